#include <gtest/gtest.h>

#include <cmath>
#include <queue>
#include <random>

#include <scoreforge/fixture.hpp>
#include <scoreforge/imaging.hpp>
#include <scoreforge/png_io.hpp>

#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace scoreforge;
using namespace scoreforge::imaging;

namespace {

GrayImage random_image(int w, int h, std::mt19937& rng) {
    GrayImage img(w, h);
    std::uniform_int_distribution<int> dist(0, 255);
    for (auto& v : img.data) {
        v = std::uint8_t(dist(rng));
    }
    return img;
}

BinaryMask random_mask(int w, int h, double density, std::mt19937& rng) {
    BinaryMask m(w, h);
    std::bernoulli_distribution on(density);
    for (auto& v : m.data) {
        v = on(rng) ? 1 : 0;
    }
    return m;
}

} // namespace

TEST(Grayscale, LuminanceFormula) {
    Raster rgb{3, 1, 3, {255, 255, 255, 0, 0, 0, 100, 150, 200}};
    const auto g = to_grayscale(rgb);
    EXPECT_EQ(g.data, (std::vector<std::uint8_t>{255, 0, 141}));
    Raster gray{2, 1, 1, {7, 9}};
    EXPECT_EQ(to_grayscale(gray).data, gray.data);
    EXPECT_THROW(to_grayscale(Raster{0, 3, 1, {}}), Error);
}

TEST(Png, GrayAndRgbRoundTrip) {
    testutil::TempDir dir;
    std::mt19937 rng(3);
    const auto img = random_image(37, 21, rng);
    write_png(dir / "g.png", img);
    const auto raster = read_png(dir / "g.png");
    EXPECT_EQ(raster.channels, 1);
    EXPECT_EQ(read_gray_png(dir / "g.png"), img);
    EXPECT_THROW(read_png(dir / "nope.png"), Error);
}

TEST(Background, ConstantImageStaysConstant) {
    const GrayImage img(60, 40, 173);
    EXPECT_EQ(estimate_background(img), img);
    EXPECT_EQ(gaussian_blur(img, 3.0), img);
}

TEST(Background, SinglePixelFadesBelowOneLevel) {
    // Two passes of sigma 20 spread one dark pixel over a Gaussian of
    // sigma 20*sqrt(2); its peak deficit is 255 / (2*pi*800) ~ 0.05 levels.
    GrayImage img(200, 200, 255);
    img.at(100, 100) = 0;
    BackgroundConfig cfg;
    cfg.sigma = 20.0;
    const double peak_deficit = 255.0 / (2.0 * 3.14159265358979 * 2.0 * 20.0 * 20.0);
    ASSERT_LT(peak_deficit, 0.5);
    const auto out = estimate_background(img, cfg);
    for (auto v : out.data) {
        ASSERT_LT(255 - int(v), 1);
    }
}

TEST(Background, FixturePageLosesItsContent) {
    const auto [c, images] = fixture::make_corpus({2, 800, 600, 9});
    for (const auto& img : images) {
        ASSERT_GT(sauvola_binarize(img).count(), img.data.size() / 100);
        const auto bg = estimate_background(img);
        EXPECT_EQ(bg.width, img.width);
        EXPECT_EQ(bg.height, img.height);
        EXPECT_LT(double(sauvola_binarize(bg).count()), 0.001 * double(bg.data.size()));
        EXPECT_NEAR(mean_luminance(bg), mean_luminance(img), 0.1 * mean_luminance(img));
    }
}

TEST(Sauvola, FormulaExample) {
    const SauvolaParams p{25, 0.2, 128.0};
    EXPECT_DOUBLE_EQ(sauvola_threshold(100.0, 30.0, p), 84.6875);
    EXPECT_LT(80.0, sauvola_threshold(100.0, 30.0, p));
}

TEST(Sauvola, ConstantImageIsBackground) {
    for (int v : {0, 1, 128, 255}) {
        EXPECT_EQ(sauvola_binarize(GrayImage(30, 20, std::uint8_t(v))).count(), 0u);
    }
}

TEST(Sauvola, CheckerboardBlackSquaresAreInk) {
    GrayImage img(40, 30);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            img.at(x, y) = (x + y) % 2 ? 255 : 0;
        }
    }
    const auto mask = sauvola_binarize(img, {25, 0.2, 128.0});
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            ASSERT_EQ(mask.at(x, y), img.at(x, y) == 0) << x << "," << y;
        }
    }
}

TEST(Sauvola, IntegralImagesMatchDirectSummation) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const auto img = random_image(64, 64, rng);
        for (int window : {3, 7, 25}) {
            const SauvolaParams p{window, 0.2 + 0.1 * trial, 128.0};
            const auto thr = sauvola_thresholds(img, p);
            for (int y = 0; y < 64; ++y) {
                for (int x = 0; x < 64; ++x) {
                    ASSERT_NEAR(thr[std::size_t(y * 64 + x)], oracle::sauvola_threshold(img, x, y, window, p.k, 128.0), 1e-6);
                }
            }
        }
    }
}

TEST(Sauvola, RejectsBadParameters) {
    const GrayImage img(8, 8, 3);
    EXPECT_THROW(sauvola_binarize(img, {24, 0.2, 128.0}), Error);
    EXPECT_THROW(sauvola_binarize(img, {1, 0.2, 128.0}), Error);
    EXPECT_THROW(sauvola_binarize(img, {25, 0.2, 0.0}), Error);
    EXPECT_THROW(sauvola_binarize(img, {25, 0.0, 128.0}), Error);
}

TEST(Rotate, ZeroIsIdentity) {
    std::mt19937 rng(2);
    const auto img = random_image(31, 17, rng);
    const auto r = rotate_patch(img, 0.0, 255);
    EXPECT_EQ(r.image, img);
    EXPECT_EQ(r.coverage.count(), img.data.size());
    const auto id = AffineTransform::identity();
    EXPECT_DOUBLE_EQ(r.transform.a, id.a);
    EXPECT_DOUBLE_EQ(r.transform.d, id.d);
    EXPECT_DOUBLE_EQ(r.transform.b, 0.0);
    EXPECT_DOUBLE_EQ(r.transform.tx, 0.0);
    EXPECT_DOUBLE_EQ(r.transform.ty, 0.0);
}

TEST(Rotate, QuarterTurnPermutesPixels) {
    std::mt19937 rng(4);
    const auto img = random_image(9, 5, rng);
    for (auto interp : {Interpolation::bilinear, Interpolation::nearest}) {
        const auto r = rotate_patch(img, 90.0, 0, interp);
        ASSERT_EQ(r.image.width, 5);
        ASSERT_EQ(r.image.height, 9);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                // counter-clockwise: column x becomes row w-1-x
                ASSERT_EQ(r.image.at(y, img.width - 1 - x), img.at(x, y));
            }
        }
        EXPECT_EQ(r.coverage.count(), img.data.size());
    }
}

TEST(Rotate, HullOfSmallRotation) {
    // ceil(200 cos 3 + 50 sin 3) x ceil(200 sin 3 + 50 cos 3)
    const double rad = 3.0 * 3.14159265358979323846 / 180.0;
    const int w = int(std::ceil(200 * std::cos(rad) + 50 * std::sin(rad)));
    const int h = int(std::ceil(200 * std::sin(rad) + 50 * std::cos(rad)));
    ASSERT_EQ(w, 203);
    ASSERT_EQ(h, 61);
    const auto r = rotate_patch(GrayImage(200, 50, 90), 3.0, 255);
    EXPECT_EQ(r.image.width, 203);
    EXPECT_EQ(r.image.height, 61);
    EXPECT_EQ(rotated_size(200, 50, -3.0), std::make_pair(203, 61));
    // uncovered corners hold the fill value
    EXPECT_EQ(r.image.at(0, 0), 255);
    EXPECT_FALSE(r.coverage.at(0, 0));
    EXPECT_EQ(r.image.at(101, 30), 90);
}

namespace {

double sample_bilinear(const GrayImage& g, double u, double v) {
    const double px = std::clamp(u - 0.5, 0.0, g.width - 1.0), py = std::clamp(v - 0.5, 0.0, g.height - 1.0);
    const int x0 = int(px), y0 = int(py);
    const int x1 = std::min(x0 + 1, g.width - 1), y1 = std::min(y0 + 1, g.height - 1);
    const double fx = px - x0, fy = py - y0;
    return (g.at(x0, y0) * (1 - fx) + g.at(x1, y0) * fx) * (1 - fy) + (g.at(x0, y1) * (1 - fx) + g.at(x1, y1) * fx) * fy;
}

// Mean absolute difference between `patch` and its rotation by `angle` and back,
// read at the exact mapped positions over the interior.
double round_trip_error(const GrayImage& patch, double angle) {
    const auto fill = border_median(patch);
    const auto there = rotate_patch(patch, angle, fill);
    const auto back = rotate_patch(there.image, -angle, fill);
    const auto map = back.transform.after(there.transform);
    double total = 0.0;
    long n = 0;
    const int margin = 4;
    for (int y = margin; y < patch.height - margin; ++y) {
        for (int x = margin; x < patch.width - margin; ++x) {
            const auto [u, v] = map.apply(x + 0.5, y + 0.5);
            total += std::abs(sample_bilinear(back.image, u, v) - patch.at(x, y));
            ++n;
        }
    }
    return total / double(n);
}

} // namespace

TEST(Rotate, ForwardThenBackRestoresSmoothContent) {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> angle(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto field = gaussian_blur(random_image(90 + 7 * trial, 40 + 3 * trial, rng), 2.0);
        const double a = angle(rng);
        EXPECT_LT(round_trip_error(field, a), 3.0) << "trial " << trial << " angle " << a;
    }
}

TEST(Rotate, ForwardThenBackRestoresScannedRegions) {
    // Scan-like page: fixture strokes softened by an optical blur.
    const auto [c, images] = fixture::make_corpus({1, 1600, 1200, 3});
    const auto page = gaussian_blur(images[0], 1.5);
    for (const auto& r : c.pages[0].regions) {
        const auto patch = crop(page, pixel_cover(r.bbox));
        for (double a : {-3.0, -1.7, 0.4, 2.2, 3.0}) {
            EXPECT_LT(round_trip_error(patch, a), 3.0) << "region " << r.id << " angle " << a;
        }
    }
}

TEST(TransformBBox, IdentityTranslationAndRotation) {
    const BBox b{10, 20, 200, 50};
    EXPECT_EQ(transform_bbox(b, AffineTransform::identity()), b);
    const auto moved = transform_bbox(b, AffineTransform::translation(3.5, -2));
    EXPECT_DOUBLE_EQ(moved.x, 13.5);
    EXPECT_DOUBLE_EQ(moved.y, 18);
    EXPECT_DOUBLE_EQ(moved.w, 200);
    EXPECT_DOUBLE_EQ(moved.h, 50);

    // 3 degrees about the box centre
    const double rad = 3.0 * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    AffineTransform rot{cs, sn, -sn, cs, 0, 0};
    rot.tx = b.center_x() - (cs * b.center_x() + sn * b.center_y());
    rot.ty = b.center_y() - (-sn * b.center_x() + cs * b.center_y());
    const auto hull = transform_bbox(b, rot);
    EXPECT_EQ(int(std::ceil(hull.w)), 203);
    EXPECT_EQ(int(std::ceil(hull.h)), 61);
    EXPECT_NEAR(hull.center_x(), b.center_x(), 1e-9);
    EXPECT_NEAR(hull.center_y(), b.center_y(), 1e-9);

    EXPECT_THROW(transform_bbox(b, AffineTransform{1, 2, 2, 4, 0, 0}), Error);
}

TEST(TransformBBox, CompositionMatchesTwoSteps) {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 200; ++i) {
        const AffineTransform t1{1 + u(rng) / 4, u(rng) / 4, u(rng) / 4, 1 + u(rng) / 4, u(rng) * 10, u(rng) * 10};
        const AffineTransform t2 = AffineTransform::translation(u(rng) * 5, u(rng) * 5);
        const BBox b{u(rng) * 50, u(rng) * 50, 5 + std::abs(u(rng)) * 20, 5 + std::abs(u(rng)) * 20};
        const auto once = transform_bbox(b, t2.after(t1));
        const auto twice = transform_bbox(transform_bbox(b, t1), t2);
        EXPECT_NEAR(once.x, twice.x, 1e-9);
        EXPECT_NEAR(once.y, twice.y, 1e-9);
        EXPECT_NEAR(once.w, twice.w, 1e-9);
        EXPECT_NEAR(once.h, twice.h, 1e-9);
        const auto inv = t1.inverse().after(t1);
        EXPECT_NEAR(inv.a, 1, 1e-12);
        EXPECT_NEAR(inv.tx, 0, 1e-9);
    }
}

TEST(Components, Examples) {
    EXPECT_TRUE(connected_components(BinaryMask(10, 10)).empty());

    BinaryMask two(20, 10);
    for (int y = 1; y < 4; ++y) {
        for (int x = 2; x < 8; ++x) {
            two.set(x, y, true);
        }
    }
    for (int y = 5; y < 9; ++y) {
        for (int x = 10; x < 19; ++x) {
            two.set(x, y, true);
        }
    }
    const auto comps = connected_components(two, 8);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_EQ(comps[0].bbox, (BBox{2, 1, 6, 3}));
    EXPECT_EQ(comps[1].bbox, (BBox{10, 5, 9, 4}));
    EXPECT_EQ(comps[1].area, 36u);

    BinaryMask diag(4, 4);
    diag.set(1, 1, true);
    diag.set(2, 2, true);
    EXPECT_EQ(connected_components(diag, 8).size(), 1u);
    EXPECT_EQ(connected_components(diag, 4).size(), 2u);
    EXPECT_THROW(connected_components(diag, 6), Error);
}

namespace {

// Breadth-first flood fill count.
std::size_t flood_count(const BinaryMask& m, int connectivity) {
    std::vector<std::uint8_t> seen(m.data.size(), 0);
    std::size_t count = 0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y) || seen[std::size_t(y * m.width + x)]) {
                continue;
            }
            ++count;
            std::queue<std::pair<int, int>> q;
            q.push({x, y});
            seen[std::size_t(y * m.width + x)] = 1;
            while (!q.empty()) {
                auto [cx, cy] = q.front();
                q.pop();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if ((dx == 0 && dy == 0) || (connectivity == 4 && dx != 0 && dy != 0)) {
                            continue;
                        }
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height || !m.at(nx, ny) ||
                            seen[std::size_t(ny * m.width + nx)]) {
                            continue;
                        }
                        seen[std::size_t(ny * m.width + nx)] = 1;
                        q.push({nx, ny});
                    }
                }
            }
        }
    }
    return count;
}

} // namespace

TEST(Components, PartitionAndTightHullsOnRandomMasks) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const auto mask = random_mask(30 + trial, 25, 0.2 + 0.01 * trial, rng);
        for (int conn : {4, 8}) {
            const auto comps = connected_components(mask, conn);
            ASSERT_EQ(comps.size(), flood_count(mask, conn));
            std::vector<int> owner(mask.data.size(), -1);
            std::size_t total = 0;
            for (std::size_t i = 0; i < comps.size(); ++i) {
                const auto& c = comps[i];
                ASSERT_EQ(c.area, c.pixels.size());
                total += c.area;
                int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
                for (const auto& p : c.pixels) {
                    ASSERT_TRUE(mask.at(p.x, p.y));
                    ASSERT_EQ(owner[std::size_t(p.y * mask.width + p.x)], -1);
                    owner[std::size_t(p.y * mask.width + p.x)] = int(i);
                    x0 = std::min(x0, p.x);
                    y0 = std::min(y0, p.y);
                    x1 = std::max(x1, p.x);
                    y1 = std::max(y1, p.y);
                }
                ASSERT_EQ(c.bbox, (BBox{double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)}));
            }
            ASSERT_EQ(total, mask.count());
        }
    }
}

TEST(TransferInk, Examples) {
    GrayImage dst(50, 40, 200);
    const GrayImage patch(10, 8, 17);
    const auto before = dst;
    auto stats = transfer_ink(dst, patch, BinaryMask(10, 8, false), 5, 5);
    EXPECT_EQ(dst, before);
    EXPECT_EQ(stats.written, 0u);

    stats = transfer_ink(dst, patch, BinaryMask(10, 8, true), 5, 6);
    EXPECT_EQ(stats.written, 80u);
    EXPECT_EQ(crop(dst, {5, 6, 15, 14}), patch);

    GrayImage edge(50, 40, 200);
    stats = transfer_ink(edge, patch, BinaryMask(10, 8, true), 45, 0);
    EXPECT_EQ(stats.clipped, 5u * 8u);
    EXPECT_EQ(stats.written, 5u * 8u);

    EXPECT_THROW(transfer_ink(edge, patch, BinaryMask(9, 8), 0, 0), Error);
}

TEST(TransferInk, TouchesExactlyMaskedInBoundsPixels) {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> off(-12, 40);
    for (int trial = 0; trial < 50; ++trial) {
        GrayImage dst(40, 30, 255);
        const auto patch = random_image(15, 12, rng);
        const auto mask = random_mask(15, 12, 0.4, rng);
        const int ox = off(rng), oy = off(rng);
        const auto before = dst;
        const auto stats = transfer_ink(dst, patch, mask, ox, oy);
        std::size_t written = 0;
        for (int y = 0; y < dst.height; ++y) {
            for (int x = 0; x < dst.width; ++x) {
                const int px = x - ox, py = y - oy;
                const bool selected = px >= 0 && py >= 0 && px < 15 && py < 12 && mask.at(px, py);
                if (selected) {
                    ASSERT_EQ(dst.at(x, y), patch.at(px, py));
                    ++written;
                } else {
                    ASSERT_EQ(dst.at(x, y), before.at(x, y));
                }
            }
        }
        ASSERT_EQ(stats.written, written);
        ASSERT_EQ(stats.written + stats.clipped, mask.count());
    }
}
