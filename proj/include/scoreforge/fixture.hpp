#pragma once

// Synthetic stand-ins for a labelled score corpus and for the external
// systems (detector, transcriber) whose outputs the tools consume. Used by
// the tests, the acceptance suite and the scoreforge-fixture tool.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "goaleval.hpp"
#include "imaging.hpp"
#include "metrics.hpp"
#include "png_io.hpp"
#include "rng.hpp"

namespace scoreforge::fixture {

inline constexpr int kStaff = 1;
inline constexpr int kText = 2;

inline std::vector<corpus::Category> categories() { return {{kStaff, "staff"}, {kText, "text"}}; }

struct FixtureSpec {
    std::size_t pages = 4;
    int width = 800;
    int height = 600;
    std::uint64_t seed = 1;
};

namespace detail {

inline void fill_rect(imaging::GrayImage& img, int x0, int y0, int x1, int y1, std::uint8_t v) {
    for (int y = std::max(0, y0); y < std::min(img.height, y1); ++y) {
        for (int x = std::max(0, x0); x < std::min(img.width, x1); ++x) {
            img.at(x, y) = v;
        }
    }
}

inline void fill_ellipse(imaging::GrayImage& img, double cx, double cy, double rx, double ry, std::uint8_t v) {
    for (int y = int(cy - ry) - 1; y <= int(cy + ry) + 1; ++y) {
        for (int x = int(cx - rx) - 1; x <= int(cx + rx) + 1; ++x) {
            const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
            if (dx * dx + dy * dy <= 1.0 && img.inside(x, y)) {
                img.at(x, y) = v;
            }
        }
    }
}

inline void draw_staff(imaging::GrayImage& img, const PixelRect& r, Engine& rng) {
    const int spacing = std::max(3, (r.height() - 8) / 4);
    const int top = r.y0 + (r.height() - 4 * spacing) / 2;
    const std::uint8_t ink = std::uint8_t(20 + uniform_index(rng, 30));
    for (int line = 0; line < 5; ++line) {
        const int y = top + line * spacing;
        fill_rect(img, r.x0 + 2, y, r.x1 - 2, y + 2, ink);
    }
    fill_rect(img, r.x0 + 2, top, r.x0 + 4, top + 4 * spacing + 2, ink);
    fill_rect(img, r.x1 - 4, top, r.x1 - 2, top + 4 * spacing + 2, ink);
    for (int x = r.x0 + 24; x < r.x1 - 16; x += 14 + int(uniform_index(rng, 16))) {
        const double cy = top + double(uniform_index(rng, std::uint64_t(4 * spacing + 1)));
        fill_ellipse(img, x, cy, spacing * 0.65, spacing * 0.45, ink);
        const bool up = cy > top + 2 * spacing;
        const int stem_x = up ? x + int(spacing * 0.55) : x - int(spacing * 0.6);
        const int y0 = up ? int(cy) - 3 * spacing : int(cy);
        fill_rect(img, stem_x, std::max(r.y0 + 1, y0), stem_x + 2, std::min(r.y1 - 1, y0 + 3 * spacing), ink);
    }
}

inline void draw_text(imaging::GrayImage& img, const PixelRect& r, Engine& rng) {
    const std::uint8_t ink = std::uint8_t(30 + uniform_index(rng, 40));
    const int base = r.y1 - 5;
    for (int x = r.x0 + 3; x < r.x1 - 8;) {
        const int glyph_w = 4 + int(uniform_index(rng, 5));
        const int glyph_h = 6 + int(uniform_index(rng, std::uint64_t(std::max(1, r.height() - 12))));
        fill_rect(img, x, base - glyph_h, x + 2, base, ink);
        fill_rect(img, x, base - 2, x + glyph_w, base, ink);
        if (uniform_index(rng, 2)) {
            fill_rect(img, x + glyph_w - 2, base - glyph_h / 2, x + glyph_w, base, ink);
        }
        x += glyph_w + 2 + (uniform_index(rng, 6) == 0 ? 8 : 0);
    }
}

} // namespace detail

/// Renders one page and its regions: alternating staff and lyric rows on a
/// slightly uneven paper tone.
inline std::pair<imaging::GrayImage, std::vector<corpus::Region>> render_page(const FixtureSpec& spec, std::int64_t page_id,
                                                                              std::int64_t first_region_id) {
    Engine rng = stream_engine(spec.seed, std::uint64_t(page_id));
    imaging::GrayImage img(spec.width, spec.height);
    const double tone = 215.0 + double(uniform_index(rng, 25));
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const double shade = tone - 12.0 * double(x) / spec.width - 6.0 * double(y) / spec.height;
            img.at(x, y) = std::uint8_t(std::clamp(long(std::lround(shade)) + long(uniform_index(rng, 5)) - 2, 0L, 255L));
        }
    }

    std::vector<corpus::Region> regions;
    std::int64_t next_id = first_region_id;
    const int margin = std::max(8, spec.width / 20);
    const int staff_h = std::max(20, spec.height / 11);
    const int text_h = std::max(12, spec.height / 27);
    int y = spec.height / 20;
    while (y + staff_h + text_h + 10 < spec.height - spec.height / 30) {
        const int x0 = margin + int(uniform_index(rng, std::uint64_t(margin)));
        const int x1 = spec.width - margin - int(uniform_index(rng, std::uint64_t(margin)));
        const PixelRect staff{x0, y, x1, y + staff_h};
        detail::draw_staff(img, staff, rng);
        regions.push_back({next_id++, page_id, kStaff, staff.to_bbox()});
        y += staff_h + 6;

        const int n_text = 1 + int(uniform_index(rng, 2));
        const int span = (x1 - x0) / n_text;
        for (int t = 0; t < n_text; ++t) {
            const int tx0 = x0 + t * span + int(uniform_index(rng, std::uint64_t(std::max(1, span / 6))));
            const int tx1 = x0 + (t + 1) * span - 10 - int(uniform_index(rng, std::uint64_t(std::max(1, span / 4))));
            if (tx1 - tx0 < 30) {
                continue;
            }
            const PixelRect text{tx0, y, tx1, y + text_h};
            detail::draw_text(img, text, rng);
            regions.push_back({next_id++, page_id, kText, text.to_bbox()});
        }
        y += text_h + staff_h / 3;
    }
    return {std::move(img), std::move(regions)};
}

/// Renders `spec.pages` pages in memory. Page ids start at 1.
inline std::pair<corpus::AnnotatedCorpus, std::vector<imaging::GrayImage>> make_corpus(const FixtureSpec& spec) {
    corpus::AnnotatedCorpus c;
    c.categories = categories();
    std::vector<imaging::GrayImage> images;
    std::int64_t next_region = 1;
    for (std::size_t i = 0; i < spec.pages; ++i) {
        const std::int64_t id = std::int64_t(i) + 1;
        auto [img, regions] = render_page(spec, id, next_region);
        next_region += std::int64_t(regions.size());
        c.pages.push_back({id, "pages/page_" + std::to_string(id) + ".png", spec.width, spec.height, std::move(regions)});
        images.push_back(std::move(img));
    }
    return {std::move(c), std::move(images)};
}

/// Writes the rendered corpus under `dir` (annotations.json + pages/) and
/// returns it as loaded from disk.
inline corpus::AnnotatedCorpus write_corpus_dir(const FixtureSpec& spec, const std::filesystem::path& dir) {
    auto [c, images] = make_corpus(spec);
    for (std::size_t i = 0; i < c.pages.size(); ++i) {
        imaging::write_png(dir / c.pages[i].file_name, images[i]);
    }
    corpus::write_corpus(c, dir / "annotations.json");
    return corpus::load_corpus(dir / "annotations.json");
}

/// Annotation-only corpus of `pages` pages (no image files), for split tests.
inline corpus::AnnotatedCorpus descriptor_corpus(std::size_t pages, int width = 1000, int height = 1400) {
    corpus::AnnotatedCorpus c;
    c.categories = categories();
    std::int64_t rid = 1;
    for (std::size_t i = 0; i < pages; ++i) {
        const std::int64_t id = std::int64_t(i) + 1;
        corpus::Page p{id, "page_" + std::to_string(id) + ".png", width, height, {}};
        p.regions.push_back({rid++, id, kStaff, {50, 100, 900, 120}});
        p.regions.push_back({rid++, id, kText, {60, 230, 700, 40}});
        c.pages.push_back(std::move(p));
    }
    return c;
}

struct FakeDetectorSpec {
    std::uint64_t seed = 11;
    /// Box edges move by up to this fraction of the box size.
    double jitter = 0.08;
    double miss_rate = 0.1;
    /// Expected spurious detections per page.
    double false_positives_per_page = 0.5;
};

/// Jittered ground truth with synthetic confidences: the closer a box stays
/// to its ground truth, the higher its confidence. Detections carry ids.
inline std::vector<corpus::Detection> fake_detections(const corpus::AnnotatedCorpus& gt, const FakeDetectorSpec& spec) {
    std::vector<corpus::Detection> out;
    std::int64_t next_id = 1;
    for (const auto& page : gt.pages) {
        Engine rng = stream_engine(spec.seed, std::uint64_t(page.id));
        for (const auto& r : page.regions) {
            if (uniform_real(rng, 0.0, 1.0) < spec.miss_rate) {
                continue;
            }
            const double j = spec.jitter;
            const double dx0 = uniform_real(rng, -j, j) * r.bbox.w, dx1 = uniform_real(rng, -j, j) * r.bbox.w;
            const double dy0 = uniform_real(rng, -j, j) * r.bbox.h, dy1 = uniform_real(rng, -j, j) * r.bbox.h;
            const double x0 = std::clamp(r.bbox.x + dx0, 0.0, double(page.width) - 2.0);
            const double y0 = std::clamp(r.bbox.y + dy0, 0.0, double(page.height) - 2.0);
            const double x1 = std::clamp(r.bbox.right() + dx1, x0 + 1.0, double(page.width));
            const double y1 = std::clamp(r.bbox.bottom() + dy1, y0 + 1.0, double(page.height));
            corpus::Detection d;
            d.page_id = page.id;
            d.category_id = r.category_id;
            d.bbox = {x0, y0, x1 - x0, y1 - y0};
            const double q = metrics::iou(d.bbox, r.bbox);
            d.confidence = std::clamp(0.35 + 0.6 * q + uniform_real(rng, -0.1, 0.1), 0.0, 1.0);
            d.id = next_id++;
            out.push_back(d);
        }
        const int spurious = int(std::floor(spec.false_positives_per_page + uniform_real(rng, 0.0, 1.0)));
        for (int k = 0; k < spurious; ++k) {
            corpus::Detection d;
            d.page_id = page.id;
            d.category_id = uniform_index(rng, 2) ? kStaff : kText;
            const double w = uniform_real(rng, 0.1, 0.5) * page.width, h = uniform_real(rng, 0.03, 0.1) * page.height;
            d.bbox = {uniform_real(rng, 0.0, page.width - w), uniform_real(rng, 0.0, page.height - h), w, h};
            d.confidence = uniform_real(rng, 0.0, 0.5);
            d.id = next_id++;
            out.push_back(d);
        }
    }
    return out;
}

struct FakeTranscriptions {
    goaleval::Transcriptions ref;
    goaleval::Transcriptions hyp_gt;
    goaleval::Transcriptions hyp_det;
};

/// Symbol sequences for every staff: a random reference, a near-perfect
/// hypothesis for the annotated region, and a hypothesis for each detection
/// whose error grows as its overlap with the best-matching staff shrinks.
inline FakeTranscriptions fake_transcriptions(const corpus::AnnotatedCorpus& gt,
                                              const std::vector<corpus::Detection>& dets, std::uint64_t seed) {
    static const std::vector<std::string> alphabet = {"clef.G", "note.C4", "note.D4", "note.E4", "note.F4",
                                                      "note.G4", "rest.q",  "barline", "note.A4", "note.B4"};
    FakeTranscriptions out;
    Engine rng(splitmix64(seed));
    auto corrupt = [&](const goaleval::Tokens& ref, double rate) {
        goaleval::Tokens hyp;
        for (const auto& tok : ref) {
            const double u = uniform_real(rng, 0.0, 1.0);
            if (u < rate / 2) {
                continue; // deletion
            }
            hyp.push_back(u < rate ? alphabet[uniform_index(rng, alphabet.size())] : tok);
        }
        return hyp;
    };
    std::vector<corpus::Region> staves;
    for (const auto& page : gt.pages) {
        for (const auto& r : page.regions) {
            if (r.category_id != kStaff) {
                continue;
            }
            staves.push_back(r);
            goaleval::Tokens ref(8 + uniform_index(rng, 16));
            for (auto& t : ref) {
                t = alphabet[uniform_index(rng, alphabet.size())];
            }
            out.hyp_gt[r.id] = corrupt(ref, 0.05);
            out.ref[r.id] = std::move(ref);
        }
    }
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        if (d.category_id != kStaff) {
            continue;
        }
        double best = 0.0;
        const corpus::Region* match = nullptr;
        for (const auto& s : staves) {
            const double v = s.page_id == d.page_id ? metrics::iou(d.bbox, s.bbox) : 0.0;
            if (v > best) {
                best = v;
                match = &s;
            }
        }
        const auto key = goaleval::detection_key(d, i);
        if (match) {
            out.hyp_det[key] = corrupt(out.ref[match->id], std::clamp(1.6 * (1.0 - best), 0.0, 1.0));
        } else {
            out.hyp_det[key] = {};
        }
    }
    return out;
}

} // namespace scoreforge::fixture
