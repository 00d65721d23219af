#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "imaging.hpp"
#include "parallel.hpp"
#include "png_io.hpp"
#include "rng.hpp"

namespace scoreforge::synthgen {

using corpus::AnnotatedCorpus;
using corpus::Region;
using imaging::BinaryMask;
using imaging::GrayImage;

struct GenConfig {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    /// Per-page angles are drawn from [-rotation_range, +rotation_range] degrees.
    double rotation_range = 3.0;
    /// Alternative candidates tried after the first one collides. 0 skips
    /// the slot on the first collision.
    int max_retries = 10;
    imaging::BackgroundConfig background;
    imaging::SauvolaParams binarization;
    imaging::Interpolation interpolation = imaging::Interpolation::bilinear;
    unsigned threads = 1;

    void check() const {
        if (!(rotation_range >= 0.0) || rotation_range >= 180.0) {
            throw Error(ErrorKind::precondition, "rotation_range must be in [0, 180)");
        }
        if (max_retries < 0) {
            throw Error(ErrorKind::precondition, "max_retries must be non-negative");
        }
        binarization.check();
        if (background.sigma < 0.0 || background.passes < 1 || background.max_passes < background.passes) {
            throw Error(ErrorKind::precondition, "invalid background configuration");
        }
    }
};

struct SlotRecord {
    std::int64_t slot_region_id = 0;
    /// Region whose patch filled the slot; empty when the slot was skipped.
    std::optional<std::int64_t> chosen_region_id;
    int attempts = 0;
};

struct Provenance {
    std::int64_t synthetic_page_id = 0;
    std::int64_t source_page_id = 0;
    double angle_deg = 0.0;
    std::vector<SlotRecord> slots;

    std::size_t skipped() const {
        return std::size_t(std::count_if(slots.begin(), slots.end(), [](const SlotRecord& s) { return !s.chosen_region_id; }));
    }
};

struct SyntheticPage {
    GrayImage image;
    std::vector<Region> regions;
    Provenance provenance;
    /// Pixels overwritten with transferred ink.
    BinaryMask ink;
};

/// A corpus region together with its pixels.
struct RegionPatch {
    Region region;
    GrayImage pixels;
    std::uint8_t fill = 255;
};

/// Loads every page image of the corpus as grayscale, checking its size
/// against the annotation.
inline std::vector<GrayImage> load_page_images(const AnnotatedCorpus& corpus, unsigned threads = 1) {
    std::vector<GrayImage> images(corpus.pages.size());
    parallel_for(corpus.pages.size(), threads, [&](std::size_t i) {
        const auto& page = corpus.pages[i];
        GrayImage img = imaging::read_gray_png(corpus.root / page.file_name);
        if (img.width != page.width || img.height != page.height) {
            throw Error(ErrorKind::geometry, page.file_name + " is " + std::to_string(img.width) + "x" +
                                                 std::to_string(img.height) + " but annotated as " +
                                                 std::to_string(page.width) + "x" + std::to_string(page.height));
        }
        images[i] = std::move(img);
    });
    return images;
}

/// Cuts the pixel cover of every region out of its page.
inline std::vector<RegionPatch> extract_patches(const AnnotatedCorpus& corpus, std::span<const GrayImage> images) {
    if (images.size() != corpus.pages.size()) {
        throw Error(ErrorKind::precondition, "one image per corpus page is required");
    }
    std::vector<RegionPatch> out;
    for (std::size_t p = 0; p < corpus.pages.size(); ++p) {
        for (const auto& r : corpus.pages[p].regions) {
            RegionPatch patch{r, imaging::crop(images[p], pixel_cover(r.bbox)), 255};
            patch.fill = imaging::border_median(patch.pixels);
            out.push_back(std::move(patch));
        }
    }
    return out;
}

/// Page under construction.
struct PageState {
    GrayImage image;
    BinaryMask ink;
    std::vector<BBox> placed;

    explicit PageState(GrayImage background)
        : image(std::move(background)), ink(image.width, image.height) {}

    BBox bounds() const { return {0.0, 0.0, double(image.width), double(image.height)}; }
};

struct PlacementOptions {
    double angle_deg = 0.0;
    int max_retries = 10;
    imaging::SauvolaParams binarization;
    imaging::Interpolation interpolation = imaging::Interpolation::bilinear;
};

struct PlacementOutcome {
    bool placed = false;
    int attempts = 0;
    std::optional<std::int64_t> chosen_region_id;
    BBox bbox;
    imaging::TransferStats transfer;
};

/// Where a rotated patch lands when the unrotated candidate has its
/// top-left corner at the slot's top-left corner and rotation keeps the
/// candidate's centre fixed.
inline PixelRect placement_rect(const Region& slot, int patch_w, int patch_h, int rotated_w, int rotated_h) {
    const PixelRect anchor = pixel_cover(slot.bbox);
    auto floor_half = [](int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
    const int x0 = anchor.x0 + floor_half(patch_w - rotated_w);
    const int y0 = anchor.y0 + floor_half(patch_h - rotated_h);
    return {x0, y0, x0 + rotated_w, y0 + rotated_h};
}

/// Fills one slot of the page. Candidates are drawn uniformly from `pool`;
/// one is accepted when its distorted box stays on the page and overlaps no
/// box placed earlier. After 1 + max_retries rejections the slot is skipped.
inline PlacementOutcome place_region(PageState& state, const Region& slot, std::span<const RegionPatch* const> pool,
                                     const PlacementOptions& opts, Engine& rng) {
    if (pool.empty()) {
        throw Error(ErrorKind::generation, "no candidate regions for slot " + std::to_string(slot.id));
    }
    PlacementOutcome outcome;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        const RegionPatch& candidate = *pool[uniform_index(rng, pool.size())];
        ++outcome.attempts;

        const auto [rot_w, rot_h] =
            imaging::rotated_size(candidate.pixels.width, candidate.pixels.height, opts.angle_deg);
        const PixelRect rect = placement_rect(slot, candidate.pixels.width, candidate.pixels.height, rot_w, rot_h);
        const BBox box = rect.to_bbox();
        if (!contains(state.bounds(), box)) {
            continue;
        }
        bool collides = false;
        for (const auto& other : state.placed) {
            if (overlaps(other, box)) {
                collides = true;
                break;
            }
        }
        if (collides) {
            continue;
        }

        auto rotated = imaging::rotate_patch(candidate.pixels, opts.angle_deg, candidate.fill, opts.interpolation);
        BinaryMask ink = imaging::sauvola_binarize(rotated.image, opts.binarization);
        for (std::size_t i = 0; i < ink.data.size(); ++i) {
            ink.data[i] = ink.data[i] && rotated.coverage.data[i];
        }
        outcome.transfer = imaging::transfer_ink(state.image, rotated.image, ink, rect.x0, rect.y0);
        for (int y = 0; y < ink.height; ++y) {
            for (int x = 0; x < ink.width; ++x) {
                if (ink.at(x, y)) {
                    state.ink.set(rect.x0 + x, rect.y0 + y, true);
                }
            }
        }
        state.placed.push_back(box);
        outcome.placed = true;
        outcome.chosen_region_id = candidate.region.id;
        outcome.bbox = box;
        return outcome;
    }
    return outcome;
}

struct GenerationStats {
    std::size_t pages = 0;
    std::size_t slots = 0;
    std::size_t placed = 0;
    std::size_t skipped = 0;
};

inline GenerationStats summarize(std::span<const SyntheticPage> pages) {
    GenerationStats s;
    s.pages = pages.size();
    for (const auto& p : pages) {
        s.slots += p.provenance.slots.size();
        s.skipped += p.provenance.skipped();
    }
    s.placed = s.slots - s.skipped;
    return s;
}

/// Builds cfg.n semi-synthetic pages. Each page picks a source page
/// uniformly, blurs it into a background, and refills every source region
/// with a same-class region drawn uniformly from the whole corpus, rotated by
/// one page-wide angle, keeping only its ink. Page i draws from its own RNG
/// stream, so the result does not depend on cfg.threads.
inline std::vector<SyntheticPage> generate(const AnnotatedCorpus& corpus, std::span<const GrayImage> images,
                                           const GenConfig& cfg) {
    cfg.check();
    if (cfg.n == 0) {
        return {};
    }
    if (corpus.pages.empty()) {
        throw Error(ErrorKind::precondition, "cannot generate from an empty corpus");
    }

    const std::vector<RegionPatch> patches = extract_patches(corpus, images);
    std::map<int, std::vector<const RegionPatch*>> pools;
    for (const auto& p : patches) {
        pools[p.region.category_id].push_back(&p);
    }

    struct PagePlan {
        std::size_t source = 0;
        double angle = 0.0;
        Engine rng;
    };
    std::vector<PagePlan> plans;
    plans.reserve(cfg.n);
    std::set<std::size_t> sources;
    for (std::size_t i = 0; i < cfg.n; ++i) {
        PagePlan plan{0, 0.0, stream_engine(cfg.seed, i)};
        plan.source = std::size_t(uniform_index(plan.rng, corpus.pages.size()));
        if (cfg.rotation_range > 0.0) {
            plan.angle = uniform_real(plan.rng, -cfg.rotation_range, cfg.rotation_range);
        }
        for (const auto& r : corpus.pages[plan.source].regions) {
            if (pools[r.category_id].empty()) {
                throw Error(ErrorKind::generation, "class " + std::to_string(r.category_id) + " has no candidate regions");
            }
        }
        sources.insert(plan.source);
        plans.push_back(std::move(plan));
    }

    const std::vector<std::size_t> source_list(sources.begin(), sources.end());
    std::map<std::size_t, GrayImage> backgrounds;
    {
        std::vector<GrayImage> computed(source_list.size());
        parallel_for(source_list.size(), cfg.threads, [&](std::size_t k) {
            computed[k] = imaging::estimate_background(images[source_list[k]], cfg.background);
        });
        for (std::size_t k = 0; k < source_list.size(); ++k) {
            backgrounds.emplace(source_list[k], std::move(computed[k]));
        }
    }

    std::vector<SyntheticPage> out(cfg.n);
    parallel_for(cfg.n, cfg.threads, [&](std::size_t i) {
        PagePlan& plan = plans[i];
        const auto& source = corpus.pages[plan.source];
        const std::int64_t page_id = std::int64_t(i) + 1;

        PageState state(backgrounds.at(plan.source));
        SyntheticPage page;
        page.provenance.synthetic_page_id = page_id;
        page.provenance.source_page_id = source.id;
        page.provenance.angle_deg = plan.angle;

        const PlacementOptions opts{plan.angle, cfg.max_retries, cfg.binarization, cfg.interpolation};
        for (const auto& slot : source.regions) {
            const auto& pool = pools.at(slot.category_id);
            const auto result = place_region(state, slot, pool, opts, plan.rng);
            page.provenance.slots.push_back({slot.id, result.chosen_region_id, result.attempts});
            if (result.placed) {
                page.regions.push_back({0, page_id, slot.category_id, result.bbox});
            }
        }
        page.image = std::move(state.image);
        page.ink = std::move(state.ink);
        out[i] = std::move(page);
    });

    std::int64_t next_id = 1;
    for (auto& page : out) {
        for (auto& r : page.regions) {
            r.id = next_id++;
        }
    }
    return out;
}

inline corpus::Json provenance_to_json(std::span<const SyntheticPage> pages) {
    corpus::Json arr = corpus::Json::array();
    for (const auto& page : pages) {
        const auto& p = page.provenance;
        corpus::Json slots = corpus::Json::array();
        for (const auto& s : p.slots) {
            corpus::Json chosen = s.chosen_region_id ? corpus::Json(*s.chosen_region_id) : corpus::Json("skipped");
            slots.push_back({{"slot_region_id", s.slot_region_id}, {"chosen_region_id", chosen}, {"attempts", s.attempts}});
        }
        arr.push_back({{"synthetic_page_id", p.synthetic_page_id},
                       {"source_page_id", p.source_page_id},
                       {"angle_deg", p.angle_deg},
                       {"slots", slots}});
    }
    return arr;
}

inline std::string synthetic_file_name(std::int64_t page_id) {
    std::string digits = std::to_string(page_id);
    return "images/synth_" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits + ".png";
}

/// Writes one PNG per page, `annotations.json` and `provenance.json` under
/// `out_dir` and returns the corpus as it would be loaded back.
inline AnnotatedCorpus write_synthetic_corpus(std::span<const SyntheticPage> pages,
                                              const std::vector<corpus::Category>& categories,
                                              const std::filesystem::path& out_dir, unsigned threads = 1) {
    std::filesystem::create_directories(out_dir / "images");
    AnnotatedCorpus result;
    result.categories = categories;
    result.root = out_dir;
    for (const auto& page : pages) {
        corpus::Page p;
        p.id = page.provenance.synthetic_page_id;
        p.file_name = synthetic_file_name(p.id);
        p.width = page.image.width;
        p.height = page.image.height;
        p.regions = page.regions;
        result.pages.push_back(std::move(p));
    }
    parallel_for(pages.size(), threads,
                 [&](std::size_t i) { imaging::write_png(out_dir / result.pages[i].file_name, pages[i].image); });
    corpus::write_corpus(result, out_dir / "annotations.json");
    corpus::detail::write_text_file(out_dir / "provenance.json", provenance_to_json(pages).dump(1) + "\n");
    return result;
}

} // namespace scoreforge::synthgen
