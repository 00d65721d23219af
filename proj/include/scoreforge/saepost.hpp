#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "imaging.hpp"
#include "png_io.hpp"

namespace scoreforge::saepost {

using corpus::Detection;
using corpus::Region;

/// Vertical reduction applied to ground truth before training the SAE.
inline constexpr double kDefaultRatio = 0.2;

/// Per-pixel probability of one class.
struct ProbMap {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ProbMap() = default;
    ProbMap(int w, int h, float value = 0.0f) : width(w), height(h), data(std::size_t(w) * std::size_t(h), value) {}

    float at(int x, int y) const { return data[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    float& at(int x, int y) { return data[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }

    bool valid() const {
        return data.size() == std::size_t(width) * std::size_t(height) &&
               std::all_of(data.begin(), data.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
    }
};

inline void check_ratio(double ratio) {
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw Error(ErrorKind::precondition, "vertical ratio must be in [0, 1)");
    }
}

/// Scales the height by (1 - ratio) about the vertical centre.
inline BBox shrink_vertical(const BBox& b, double ratio = kDefaultRatio) {
    check_ratio(ratio);
    const BBox out{b.x, b.y + ratio * b.h / 2.0, b.w, b.h * (1.0 - ratio)};
    if (out.h < 1.0) {
        throw Error(ErrorKind::geometry, "shrunk box is less than one pixel tall");
    }
    return out;
}

inline Region shrink_gt_vertical(Region r, double ratio = kDefaultRatio) {
    r.bbox = shrink_vertical(r.bbox, ratio);
    return r;
}

/// Inverse of shrink_vertical, clipped to the page.
inline BBox expand_vertical(const BBox& b, double ratio, int page_width, int page_height) {
    check_ratio(ratio);
    if (!b.valid()) {
        throw Error(ErrorKind::geometry, "cannot expand a degenerate box");
    }
    const double h = b.h / (1.0 - ratio);
    const double y = b.y - (h - b.h) / 2.0;
    const double x0 = std::max(0.0, b.x), x1 = std::min(double(page_width), b.right());
    const double y0 = std::max(0.0, y), y1 = std::min(double(page_height), y + h);
    if (!(x1 > x0 && y1 > y0)) {
        throw Error(ErrorKind::geometry, "expanded box falls outside the page");
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

inline Detection expand_pred_vertical(Detection d, double ratio, int page_width, int page_height) {
    d.bbox = expand_vertical(d.bbox, ratio, page_width, page_height);
    return d;
}

struct ExtractionParams {
    double prob_thr = 0.5;
    /// Components smaller than this fraction of the page are dropped.
    double min_area_frac = 0.001;
    int connectivity = 8;
};

/// Thresholds the map, labels connected components and turns each large
/// enough component into a detection: its hull as the box and its mean
/// probability as the confidence.
inline std::vector<Detection> probmap_to_boxes(const ProbMap& map, std::int64_t page_id, int category_id,
                                               const ExtractionParams& params = {}) {
    if (!map.valid()) {
        throw Error(ErrorKind::range, "probability map has the wrong size or values outside [0, 1]");
    }
    imaging::BinaryMask mask(map.width, map.height);
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        mask.data[i] = double(map.data[i]) >= params.prob_thr ? 1 : 0;
    }
    const double min_area = params.min_area_frac * double(map.width) * double(map.height);
    std::vector<Detection> out;
    for (const auto& comp : imaging::connected_components(mask, params.connectivity)) {
        if (double(comp.area) < min_area) {
            continue;
        }
        double total = 0.0;
        for (const auto& p : comp.pixels) {
            total += double(map.at(p.x, p.y));
        }
        Detection d;
        d.page_id = page_id;
        d.category_id = category_id;
        d.bbox = comp.bbox;
        d.confidence = std::clamp(total / double(comp.area), 0.0, 1.0);
        out.push_back(d);
    }
    return out;
}

/// Reads an 8-bit map; probability is value / 255.
inline ProbMap read_probmap(const std::filesystem::path& path) {
    const auto gray = imaging::read_gray_png(path);
    ProbMap map(gray.width, gray.height);
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        map.data[i] = float(gray.data[i]) / 255.0f;
    }
    return map;
}

inline void write_probmap(const std::filesystem::path& path, const ProbMap& map) {
    imaging::GrayImage gray(map.width, map.height);
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        gray.data[i] = std::uint8_t(std::lround(std::clamp(map.data[i], 0.0f, 1.0f) * 255.0f));
    }
    imaging::write_png(path, gray);
}

/// `<page_id>.<class>.png`
inline std::string probmap_file_name(std::int64_t page_id, const std::string& class_name) {
    return std::to_string(page_id) + "." + class_name + ".png";
}

} // namespace scoreforge::saepost
