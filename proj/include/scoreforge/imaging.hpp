#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

namespace scoreforge::imaging {

/// Interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;
};

/// Row-major 8-bit luminance image.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t value = 0) : width(w), height(h), data(std::size_t(w) * std::size_t(h), value) {
        if (w < 0 || h < 0) {
            throw Error(ErrorKind::geometry, "negative image size");
        }
    }

    bool empty() const { return width == 0 || height == 0; }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    std::uint8_t& at(int x, int y) { return data[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    std::uint8_t at(int x, int y) const { return data[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Row-major foreground mask; nonzero means ink.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int w, int h, bool value = false)
        : width(w), height(h), data(std::size_t(w) * std::size_t(h), value ? 1 : 0) {}

    bool at(int x, int y) const { return data[std::size_t(y) * std::size_t(width) + std::size_t(x)] != 0; }
    void set(int x, int y, bool v) { data[std::size_t(y) * std::size_t(width) + std::size_t(x)] = v ? 1 : 0; }

    std::size_t count() const {
        return std::size_t(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline GrayImage to_grayscale(const Raster& in) {
    if (in.width <= 0 || in.height <= 0) {
        throw Error(ErrorKind::geometry, "cannot convert a zero-dimension image");
    }
    if (in.channels != 1 && in.channels != 3) {
        throw Error(ErrorKind::precondition, "expected 1 or 3 channels");
    }
    GrayImage out(in.width, in.height);
    if (in.channels == 1) {
        out.data = in.data;
        return out;
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double r = in.data[3 * i], g = in.data[3 * i + 1], b = in.data[3 * i + 2];
        const long v = std::lround(0.299 * r + 0.587 * g + 0.114 * b);
        out.data[i] = std::uint8_t(std::clamp(v, 0L, 255L));
    }
    return out;
}

/// Copies the rectangle out of `img`. The rectangle must lie inside.
inline GrayImage crop(const GrayImage& img, const PixelRect& rect) {
    if (rect.empty() || rect.x0 < 0 || rect.y0 < 0 || rect.x1 > img.width || rect.y1 > img.height) {
        throw Error(ErrorKind::geometry, "crop rectangle outside the image");
    }
    GrayImage out(rect.width(), rect.height());
    for (int y = 0; y < out.height; ++y) {
        std::copy_n(&img.data[std::size_t(rect.y0 + y) * std::size_t(img.width) + std::size_t(rect.x0)],
                    out.width, &out.data[std::size_t(y) * std::size_t(out.width)]);
    }
    return out;
}

inline double mean_luminance(const GrayImage& img) {
    if (img.data.empty()) {
        return 0.0;
    }
    const double sum = std::accumulate(img.data.begin(), img.data.end(), 0.0);
    return sum / double(img.data.size());
}

/// Median of the outermost ring of pixels.
inline std::uint8_t border_median(const GrayImage& img) {
    if (img.empty()) {
        throw Error(ErrorKind::geometry, "empty image has no border");
    }
    std::vector<std::uint8_t> ring;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (y == 0 || x == 0 || y == img.height - 1 || x == img.width - 1) {
                ring.push_back(img.at(x, y));
            }
        }
    }
    auto mid = ring.begin() + std::ptrdiff_t(ring.size() / 2);
    std::nth_element(ring.begin(), mid, ring.end());
    return *mid;
}

// ---------------------------------------------------------------------------
// Blurring and background estimation

/// Separable Gaussian blur, kernel truncated at 3 sigma, edges replicated.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (!(sigma > 0.0)) {
        throw Error(ErrorKind::precondition, "blur sigma must be positive");
    }
    if (img.empty()) {
        return img;
    }
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(std::size_t(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[std::size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        total += kernel[std::size_t(i + radius)];
    }
    for (auto& k : kernel) {
        k /= total;
    }

    const int w = img.width, h = img.height;
    std::vector<double> tmp(std::size_t(w) * std::size_t(h));
    std::vector<double> line;
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = &img.data[std::size_t(y) * std::size_t(w)];
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[std::size_t(i + radius)] * row[std::clamp(x + i, 0, w - 1)];
            }
            tmp[std::size_t(y) * std::size_t(w) + std::size_t(x)] = acc;
        }
    }
    GrayImage out(w, h);
    line.resize(std::size_t(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            line[std::size_t(y)] = tmp[std::size_t(y) * std::size_t(w) + std::size_t(x)];
        }
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[std::size_t(i + radius)] * line[std::size_t(std::clamp(y + i, 0, h - 1))];
            }
            out.at(x, y) = std::uint8_t(std::clamp(std::lround(acc), 0L, 255L));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sauvola binarization

struct SauvolaParams {
    int window = 25;
    double k = 0.2;
    double dynamic_range = 128.0;

    void check() const {
        if (window < 3 || window % 2 == 0) {
            throw Error(ErrorKind::precondition, "Sauvola window must be odd and at least 3");
        }
        if (!(k > 0.0 && k <= 1.0)) {
            throw Error(ErrorKind::precondition, "Sauvola k must be in (0, 1]");
        }
        if (!(dynamic_range > 0.0)) {
            throw Error(ErrorKind::precondition, "Sauvola dynamic range must be positive");
        }
    }
};

/// Sauvola threshold for a window with the given mean and standard deviation.
inline double sauvola_threshold(double mean, double stddev, const SauvolaParams& params) {
    return mean * (1.0 + params.k * (stddev / params.dynamic_range - 1.0));
}

/// Per-pixel threshold m * (1 + k * (s / R - 1)), where m and s are the mean
/// and standard deviation over the window centred on the pixel, clipped to
/// the image. Window sums come from integral images.
inline std::vector<double> sauvola_thresholds(const GrayImage& img, const SauvolaParams& params) {
    params.check();
    const int w = img.width, h = img.height;
    const std::size_t stride = std::size_t(w) + 1;
    std::vector<std::int64_t> sum(stride * (std::size_t(h) + 1), 0);
    std::vector<std::int64_t> sq(stride * (std::size_t(h) + 1), 0);
    for (int y = 0; y < h; ++y) {
        std::int64_t row_sum = 0, row_sq = 0;
        for (int x = 0; x < w; ++x) {
            const std::int64_t v = img.at(x, y);
            row_sum += v;
            row_sq += v * v;
            const std::size_t i = std::size_t(y + 1) * stride + std::size_t(x + 1);
            sum[i] = sum[i - stride] + row_sum;
            sq[i] = sq[i - stride] + row_sq;
        }
    }
    auto rect = [&](const std::vector<std::int64_t>& t, int x0, int y0, int x1, int y1) {
        return t[std::size_t(y1) * stride + std::size_t(x1)] - t[std::size_t(y0) * stride + std::size_t(x1)] -
               t[std::size_t(y1) * stride + std::size_t(x0)] + t[std::size_t(y0) * stride + std::size_t(x0)];
    };

    const int half = params.window / 2;
    std::vector<double> thr(std::size_t(w) * std::size_t(h));
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - half), y1 = std::min(h, y + half + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - half), x1 = std::min(w, x + half + 1);
            const double n = double(x1 - x0) * double(y1 - y0);
            const double m = double(rect(sum, x0, y0, x1, y1)) / n;
            const double var = std::max(0.0, double(rect(sq, x0, y0, x1, y1)) / n - m * m);
            const double s = std::sqrt(var);
            thr[std::size_t(y) * std::size_t(w) + std::size_t(x)] = sauvola_threshold(m, s, params);
        }
    }
    return thr;
}

/// Ink where the pixel is strictly darker than its Sauvola threshold.
inline BinaryMask sauvola_binarize(const GrayImage& img, const SauvolaParams& params = {}) {
    const auto thr = sauvola_thresholds(img, params);
    BinaryMask mask(img.width, img.height);
    for (std::size_t i = 0; i < thr.size(); ++i) {
        mask.data[i] = double(img.data[i]) < thr[i] ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Connected components

struct Pixel {
    int x = 0;
    int y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Component {
    std::vector<Pixel> pixels;
    /// Tight hull in pixel units: a single pixel at (x, y) is (x, y, 1, 1).
    BBox bbox;
    std::size_t area = 0;
};

namespace detail {

class DisjointSet {
public:
    int make() {
        parent_.push_back(int(parent_.size()));
        return parent_.back();
    }
    int find(int i) {
        while (parent_[std::size_t(i)] != i) {
            parent_[std::size_t(i)] = parent_[std::size_t(parent_[std::size_t(i)])];
            i = parent_[std::size_t(i)];
        }
        return i;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent_[std::size_t(std::max(a, b))] = std::min(a, b);
        }
    }

private:
    std::vector<int> parent_;
};

} // namespace detail

/// Two-pass labelling with union-find. Components come out in raster order
/// of their first pixel; pixels inside a component are in raster order too.
inline std::vector<Component> connected_components(const BinaryMask& mask, int connectivity = 8) {
    if (connectivity != 4 && connectivity != 8) {
        throw Error(ErrorKind::precondition, "connectivity must be 4 or 8");
    }
    const int w = mask.width, h = mask.height;
    std::vector<int> labels(std::size_t(w) * std::size_t(h), -1);
    detail::DisjointSet sets;
    auto label_at = [&](int x, int y) -> int {
        if (x < 0 || y < 0 || x >= w) {
            return -1;
        }
        return labels[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            int neighbours[4];
            int count = 0;
            neighbours[count++] = label_at(x - 1, y);
            neighbours[count++] = label_at(x, y - 1);
            if (connectivity == 8) {
                neighbours[count++] = label_at(x - 1, y - 1);
                neighbours[count++] = label_at(x + 1, y - 1);
            }
            int chosen = -1;
            for (int i = 0; i < count; ++i) {
                if (neighbours[i] >= 0) {
                    if (chosen < 0) {
                        chosen = neighbours[i];
                    } else {
                        sets.unite(chosen, neighbours[i]);
                    }
                }
            }
            if (chosen < 0) {
                chosen = sets.make();
            }
            labels[std::size_t(y) * std::size_t(w) + std::size_t(x)] = chosen;
        }
    }

    std::vector<int> slot;
    std::vector<Component> out;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int l = labels[std::size_t(y) * std::size_t(w) + std::size_t(x)];
            if (l < 0) {
                continue;
            }
            const int root = sets.find(l);
            if (slot.size() <= std::size_t(root)) {
                slot.resize(std::size_t(root) + 1, -1);
            }
            if (slot[std::size_t(root)] < 0) {
                slot[std::size_t(root)] = int(out.size());
                out.emplace_back();
            }
            out[std::size_t(slot[std::size_t(root)])].pixels.push_back({x, y});
        }
    }
    for (auto& c : out) {
        int x0 = c.pixels.front().x, x1 = x0, y0 = c.pixels.front().y, y1 = y0;
        for (const auto& p : c.pixels) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        c.bbox = {double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
        c.area = c.pixels.size();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Background estimation

struct BackgroundConfig {
    /// Gaussian sigma in pixels; 0 picks max(width, height) / 100.
    double sigma = 0.0;
    int passes = 2;
    /// Extra passes allowed while residual content remains.
    int max_passes = 8;
    /// Largest Sauvola component tolerated in the result, as a page fraction.
    double residual_area_frac = 0.001;
    SauvolaParams check_params;

    double sigma_for(const GrayImage& img) const {
        return sigma > 0.0 ? sigma : std::max(1.0, double(std::max(img.width, img.height)) / 100.0);
    }
};

inline std::size_t largest_component_area(const BinaryMask& mask) {
    std::size_t best = 0;
    for (const auto& c : connected_components(mask, 8)) {
        best = std::max(best, c.area);
    }
    return best;
}

/// Fades page content into an empty page of similar tone by repeated
/// Gaussian blurring. Passes continue past `passes` (up to `max_passes`)
/// while the Sauvola mask of the result still has a component larger than
/// `residual_area_frac` of the page.
inline GrayImage estimate_background(const GrayImage& img, const BackgroundConfig& cfg = {}) {
    if (img.empty()) {
        throw Error(ErrorKind::geometry, "cannot estimate the background of an empty image");
    }
    if (cfg.sigma < 0.0 || cfg.passes < 1 || cfg.max_passes < cfg.passes) {
        throw Error(ErrorKind::precondition, "invalid background configuration");
    }
    const double sigma = cfg.sigma_for(img);
    const double limit = cfg.residual_area_frac * double(img.width) * double(img.height);
    GrayImage out = img;
    for (int pass = 0; pass < cfg.max_passes; ++pass) {
        out = gaussian_blur(out, sigma);
        if (pass + 1 >= cfg.passes && double(largest_component_area(sauvola_binarize(out, cfg.check_params))) <= limit) {
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rotation

enum class Interpolation { bilinear, nearest };

namespace detail {

inline std::pair<double, double> rotation_cos_sin(double angle_deg) {
    const double pi = 3.14159265358979323846;
    double cs = std::cos(angle_deg * pi / 180.0);
    double sn = std::sin(angle_deg * pi / 180.0);
    // exact quarter turns
    if (std::abs(cs) < 1e-15) {
        cs = 0.0;
    }
    if (std::abs(sn) < 1e-15) {
        sn = 0.0;
    }
    return {cs, sn};
}

} // namespace detail

/// Size of the axis-aligned hull of a w x h raster rotated by `angle_deg`.
inline std::pair<int, int> rotated_size(int w, int h, double angle_deg) {
    const auto [cs, sn] = detail::rotation_cos_sin(angle_deg);
    return {std::max(1, int(std::ceil(w * std::abs(cs) + h * std::abs(sn) - 1e-9))),
            std::max(1, int(std::ceil(w * std::abs(sn) + h * std::abs(cs) - 1e-9)))};
}

struct RotatedPatch {
    GrayImage image;
    /// Pixels that received samples from the source (the rest hold `fill`).
    BinaryMask coverage;
    /// Maps source patch coordinates to output coordinates.
    AffineTransform transform;
};

/// Rotates `patch` about its centre by `angle_deg` (positive turns
/// counter-clockwise on screen). The output is the axis-aligned hull of the
/// rotated patch; uncovered pixels are set to `fill`.
inline RotatedPatch rotate_patch(const GrayImage& patch, double angle_deg, std::uint8_t fill,
                                 Interpolation interp = Interpolation::bilinear) {
    if (!(angle_deg > -180.0 && angle_deg < 180.0)) {
        throw Error(ErrorKind::precondition, "rotation angle must lie in (-180, 180)");
    }
    if (patch.empty()) {
        throw Error(ErrorKind::geometry, "cannot rotate an empty patch");
    }
    const auto [cs, sn] = detail::rotation_cos_sin(angle_deg);
    const double w = patch.width, h = patch.height;
    const auto [out_w, out_h] = rotated_size(patch.width, patch.height, angle_deg);

    const double cx = w / 2.0, cy = h / 2.0;
    AffineTransform t{cs, sn, -sn, cs, 0.0, 0.0};
    t.tx = out_w / 2.0 - (cs * cx + sn * cy);
    t.ty = out_h / 2.0 - (-sn * cx + cs * cy);
    const AffineTransform inv = t.inverse();

    RotatedPatch out{GrayImage(out_w, out_h, fill), BinaryMask(out_w, out_h), t};
    constexpr double eps = 1e-9;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const auto [u, v] = inv.apply(x + 0.5, y + 0.5);
            if (u < -eps || v < -eps || u > w + eps || v > h + eps) {
                continue;
            }
            std::uint8_t value = 0;
            if (interp == Interpolation::nearest) {
                const int sx = std::clamp(int(std::floor(u)), 0, patch.width - 1);
                const int sy = std::clamp(int(std::floor(v)), 0, patch.height - 1);
                value = patch.at(sx, sy);
            } else {
                const double px = std::clamp(u - 0.5, 0.0, w - 1.0);
                const double py = std::clamp(v - 0.5, 0.0, h - 1.0);
                const int x0 = int(std::floor(px)), y0 = int(std::floor(py));
                const int x1 = std::min(x0 + 1, patch.width - 1), y1 = std::min(y0 + 1, patch.height - 1);
                const double fx = px - x0, fy = py - y0;
                const double top = patch.at(x0, y0) * (1.0 - fx) + patch.at(x1, y0) * fx;
                const double bottom = patch.at(x0, y1) * (1.0 - fx) + patch.at(x1, y1) * fx;
                value = std::uint8_t(std::clamp(std::lround(top * (1.0 - fy) + bottom * fy), 0L, 255L));
            }
            out.image.at(x, y) = value;
            out.coverage.set(x, y, true);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ink transfer

struct TransferStats {
    std::size_t written = 0;
    std::size_t clipped = 0;
};

/// Copies the mask-selected pixels of `patch` into `dst` with the patch's
/// top-left corner at (offset_x, offset_y). Targets outside `dst` are
/// dropped and counted.
inline TransferStats transfer_ink(GrayImage& dst, const GrayImage& patch, const BinaryMask& mask, int offset_x,
                                  int offset_y) {
    if (mask.width != patch.width || mask.height != patch.height) {
        throw Error(ErrorKind::geometry, "mask and patch dimensions differ");
    }
    TransferStats stats;
    for (int y = 0; y < patch.height; ++y) {
        for (int x = 0; x < patch.width; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            const int tx = offset_x + x, ty = offset_y + y;
            if (dst.inside(tx, ty)) {
                dst.at(tx, ty) = patch.at(x, y);
                ++stats.written;
            } else {
                ++stats.clipped;
            }
        }
    }
    return stats;
}

} // namespace scoreforge::imaging
