#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace scoreforge::corpus {

using Json = nlohmann::json;

struct Category {
    int id = 0;
    std::string name;

    friend bool operator==(const Category&, const Category&) = default;
};

/// A labeled box belonging to a page.
struct Region {
    std::int64_t id = 0;
    std::int64_t page_id = 0;
    int category_id = 0;
    BBox bbox;

    friend bool operator==(const Region&, const Region&) = default;
};

struct Page {
    std::int64_t id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
    std::vector<Region> regions;

    BBox bounds() const { return {0.0, 0.0, double(width), double(height)}; }

    friend bool operator==(const Page&, const Page&) = default;
};

struct AnnotatedCorpus {
    std::vector<Page> pages;
    std::vector<Category> categories;
    /// Directory that page file names are relative to.
    std::filesystem::path root;

    const Category* find_category(int id) const {
        auto it = std::find_if(categories.begin(), categories.end(), [&](const Category& c) { return c.id == id; });
        return it == categories.end() ? nullptr : &*it;
    }

    std::optional<int> category_id(std::string_view name) const {
        for (const auto& c : categories) {
            if (c.name == name) {
                return c.id;
            }
        }
        return std::nullopt;
    }

    const Page* find_page(std::int64_t id) const {
        auto it = std::find_if(pages.begin(), pages.end(), [&](const Page& p) { return p.id == id; });
        return it == pages.end() ? nullptr : &*it;
    }

    std::size_t region_count() const {
        std::size_t n = 0;
        for (const auto& p : pages) {
            n += p.regions.size();
        }
        return n;
    }

    /// All regions in page order, flattened.
    std::vector<Region> all_regions() const {
        std::vector<Region> out;
        out.reserve(region_count());
        for (const auto& p : pages) {
            out.insert(out.end(), p.regions.begin(), p.regions.end());
        }
        return out;
    }
};

inline bool structurally_equal(const AnnotatedCorpus& a, const AnnotatedCorpus& b) {
    return a.pages == b.pages && a.categories == b.categories;
}

// ---------------------------------------------------------------------------
// Validation

enum class FindingKind {
    out_of_bounds,
    bad_geometry,
    bad_page_size,
    duplicate_page_id,
    duplicate_region_id,
    duplicate_category_id,
    unknown_class,
    wrong_page,
};

inline const char* to_string(FindingKind k) {
    switch (k) {
    case FindingKind::out_of_bounds: return "out_of_bounds";
    case FindingKind::bad_geometry: return "bad_geometry";
    case FindingKind::bad_page_size: return "bad_page_size";
    case FindingKind::duplicate_page_id: return "duplicate_page_id";
    case FindingKind::duplicate_region_id: return "duplicate_region_id";
    case FindingKind::duplicate_category_id: return "duplicate_category_id";
    case FindingKind::unknown_class: return "unknown_class";
    case FindingKind::wrong_page: return "wrong_page";
    }
    return "unknown";
}

struct Finding {
    FindingKind kind;
    std::int64_t id = 0; // region, page or category id the finding is about
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }

    std::size_t count(FindingKind kind) const {
        return std::size_t(std::count_if(findings.begin(), findings.end(), [&](const Finding& f) { return f.kind == kind; }));
    }
};

inline ValidationReport validate_corpus(const AnnotatedCorpus& corpus) {
    ValidationReport report;
    auto add = [&](FindingKind kind, std::int64_t id, std::string msg) {
        report.findings.push_back({kind, id, std::move(msg)});
    };

    std::set<int> category_ids;
    for (const auto& c : corpus.categories) {
        if (!category_ids.insert(c.id).second) {
            add(FindingKind::duplicate_category_id, c.id, "category id " + std::to_string(c.id) + " repeated");
        }
    }

    std::set<std::int64_t> page_ids;
    std::set<std::int64_t> region_ids;
    for (const auto& page : corpus.pages) {
        if (!page_ids.insert(page.id).second) {
            add(FindingKind::duplicate_page_id, page.id, "page id " + std::to_string(page.id) + " repeated");
        }
        if (page.width <= 0 || page.height <= 0) {
            add(FindingKind::bad_page_size, page.id, "page " + std::to_string(page.id) + " has non-positive size");
        }
        for (const auto& r : page.regions) {
            const std::string rid = "region " + std::to_string(r.id);
            if (!region_ids.insert(r.id).second) {
                add(FindingKind::duplicate_region_id, r.id, rid + " repeated");
            }
            if (r.page_id != page.id) {
                add(FindingKind::wrong_page, r.id, rid + " is stored under page " + std::to_string(page.id) +
                                                       " but refers to page " + std::to_string(r.page_id));
            }
            if (!category_ids.count(r.category_id)) {
                add(FindingKind::unknown_class, r.id, rid + " has unknown category " + std::to_string(r.category_id));
            }
            if (!r.bbox.valid()) {
                add(FindingKind::bad_geometry, r.id, rid + " has non-positive or non-finite size");
            } else if (!contains(page.bounds(), r.bbox)) {
                add(FindingKind::out_of_bounds, r.id, rid + " exceeds the bounds of page " + std::to_string(page.id));
            }
        }
    }
    return report;
}

namespace detail {

inline ErrorKind error_kind_for(FindingKind k) {
    switch (k) {
    case FindingKind::out_of_bounds:
    case FindingKind::bad_geometry:
    case FindingKind::bad_page_size:
        return ErrorKind::geometry;
    default:
        return ErrorKind::reference;
    }
}

inline BBox bbox_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) {
        throw Error(ErrorKind::parse, "bbox must be an array [x, y, w, h]");
    }
    for (const auto& v : j) {
        if (!v.is_number()) {
            throw Error(ErrorKind::parse, "bbox entries must be numbers");
        }
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline Json bbox_to_json(const BBox& b) { return Json::array({b.x, b.y, b.w, b.h}); }

template <typename T>
T field(const Json& obj, const char* key, const char* where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error(ErrorKind::parse, std::string(where) + " is missing '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string(where) + "." + key + ": " + e.what());
    }
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// COCO-subset annotation files

/// Builds a corpus from an annotation document and checks every invariant.
/// Malformed structure is a parse error, dangling references are reference
/// errors and bad or out-of-page boxes are geometry errors. With `strict`
/// off, only structure and page references are enforced so that
/// validate_corpus can report the rest.
inline AnnotatedCorpus parse_corpus(const Json& doc, std::filesystem::path root = {}, bool strict = true) {
    if (!doc.is_object()) {
        throw Error(ErrorKind::parse, "annotation document must be a JSON object");
    }
    for (const char* key : {"images", "annotations", "categories"}) {
        if (!doc.contains(key) || !doc.at(key).is_array()) {
            throw Error(ErrorKind::parse, std::string("annotation document needs an array '") + key + "'");
        }
    }

    AnnotatedCorpus corpus;
    corpus.root = std::move(root);

    for (const auto& c : doc.at("categories")) {
        corpus.categories.push_back({detail::field<int>(c, "id", "category"), detail::field<std::string>(c, "name", "category")});
    }

    std::map<std::int64_t, std::size_t> page_index;
    for (const auto& im : doc.at("images")) {
        Page page;
        page.id = detail::field<std::int64_t>(im, "id", "image");
        page.file_name = detail::field<std::string>(im, "file_name", "image");
        page.width = detail::field<int>(im, "width", "image");
        page.height = detail::field<int>(im, "height", "image");
        if (strict && (page.width <= 0 || page.height <= 0)) {
            throw Error(ErrorKind::geometry, "image " + std::to_string(page.id) + " has non-positive size");
        }
        if (!page_index.emplace(page.id, corpus.pages.size()).second) {
            throw Error(ErrorKind::reference, "image id " + std::to_string(page.id) + " repeated");
        }
        corpus.pages.push_back(std::move(page));
    }

    for (const auto& an : doc.at("annotations")) {
        Region r;
        r.id = detail::field<std::int64_t>(an, "id", "annotation");
        r.page_id = detail::field<std::int64_t>(an, "image_id", "annotation");
        r.category_id = detail::field<int>(an, "category_id", "annotation");
        if (!an.contains("bbox")) {
            throw Error(ErrorKind::parse, "annotation " + std::to_string(r.id) + " is missing 'bbox'");
        }
        r.bbox = detail::bbox_from_json(an.at("bbox"));
        auto it = page_index.find(r.page_id);
        if (it == page_index.end()) {
            throw Error(ErrorKind::reference,
                        "annotation " + std::to_string(r.id) + " refers to missing image " + std::to_string(r.page_id));
        }
        if (strict && !corpus.find_category(r.category_id)) {
            throw Error(ErrorKind::reference, "annotation " + std::to_string(r.id) + " refers to missing category " +
                                                  std::to_string(r.category_id));
        }
        if (strict && !r.bbox.valid()) {
            throw Error(ErrorKind::geometry, "annotation " + std::to_string(r.id) + " has a non-positive bbox");
        }
        corpus.pages[it->second].regions.push_back(r);
    }

    const auto report = strict ? validate_corpus(corpus) : ValidationReport{};
    if (!report.ok()) {
        const auto& f = report.findings.front();
        throw Error(detail::error_kind_for(f.kind), f.message);
    }
    return corpus;
}

inline AnnotatedCorpus load_corpus(const std::filesystem::path& path, bool strict = true) {
    return parse_corpus(detail::read_json_file(path), path.parent_path(), strict);
}

inline Json corpus_to_json(const AnnotatedCorpus& corpus) {
    Json images = Json::array();
    Json annotations = Json::array();
    Json categories = Json::array();
    for (const auto& c : corpus.categories) {
        categories.push_back({{"id", c.id}, {"name", c.name}});
    }
    for (const auto& p : corpus.pages) {
        images.push_back({{"id", p.id}, {"file_name", p.file_name}, {"width", p.width}, {"height", p.height}});
        for (const auto& r : p.regions) {
            annotations.push_back({{"id", r.id},
                                   {"image_id", r.page_id},
                                   {"category_id", r.category_id},
                                   {"bbox", detail::bbox_to_json(r.bbox)},
                                   {"area", r.bbox.area()},
                                   {"iscrowd", 0}});
        }
    }
    return {{"images", images}, {"annotations", annotations}, {"categories", categories}};
}

inline void write_corpus(const AnnotatedCorpus& corpus, const std::filesystem::path& path) {
    detail::write_text_file(path, corpus_to_json(corpus).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Train / validation / test splits

/// Largest training subset size in the ladder.
inline constexpr int kMaxTrainPages = 64;

struct SplitPlan {
    /// Ladder of training subsets keyed by size (1, 2, 4, ...). Smaller
    /// subsets are prefixes of larger ones.
    std::map<int, std::vector<std::int64_t>> train_subsets;
    std::vector<std::int64_t> validation;
    std::vector<std::int64_t> test;
    std::uint64_t seed = 0;

    int max_train_size() const { return train_subsets.empty() ? 0 : train_subsets.rbegin()->first; }
    bool full_ladder() const { return max_train_size() == kMaxTrainPages; }

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Shuffles the page ids with `seed` and carves a nested power-of-two
/// training ladder (up to 64 pages) off the front. The remainder is split
/// evenly into validation and test; an odd page goes to validation. Corpora
/// too small for 64 training pages get the largest ladder that still leaves
/// one validation and one test page.
inline SplitPlan make_splits(const AnnotatedCorpus& corpus, std::uint64_t seed) {
    const std::size_t n = corpus.pages.size();
    if (n < 3) {
        throw Error(ErrorKind::precondition, "splitting needs at least 3 pages, corpus has " + std::to_string(n));
    }

    std::vector<std::int64_t> ids;
    ids.reserve(n);
    for (const auto& p : corpus.pages) {
        ids.push_back(p.id);
    }
    std::sort(ids.begin(), ids.end());

    Engine eng(splitmix64(seed));
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(ids[i], ids[uniform_index(eng, i + 1)]);
    }

    int top = 1;
    while (top * 2 <= kMaxTrainPages && std::size_t(top * 2) + 2 <= n) {
        top *= 2;
    }

    SplitPlan plan;
    plan.seed = seed;
    for (int k = 1; k <= top; k *= 2) {
        plan.train_subsets[k] = std::vector<std::int64_t>(ids.begin(), ids.begin() + k);
    }
    const std::size_t rest = n - std::size_t(top);
    const std::size_t n_val = (rest + 1) / 2;
    plan.validation.assign(ids.begin() + top, ids.begin() + top + std::ptrdiff_t(n_val));
    plan.test.assign(ids.begin() + top + std::ptrdiff_t(n_val), ids.end());
    return plan;
}

inline Json split_plan_to_json(const SplitPlan& plan) {
    Json ladder = Json::object();
    for (const auto& [k, ids] : plan.train_subsets) {
        ladder[std::to_string(k)] = ids;
    }
    return {{"seed", plan.seed},
            {"max_train_size", plan.max_train_size()},
            {"full_ladder", plan.full_ladder()},
            {"train_subsets", ladder},
            {"validation", plan.validation},
            {"test", plan.test}};
}

/// Restricts a corpus to the given page ids, keeping corpus order.
inline AnnotatedCorpus subset(const AnnotatedCorpus& corpus, const std::vector<std::int64_t>& page_ids) {
    const std::set<std::int64_t> keep(page_ids.begin(), page_ids.end());
    AnnotatedCorpus out;
    out.categories = corpus.categories;
    out.root = corpus.root;
    for (const auto& p : corpus.pages) {
        if (keep.count(p.id)) {
            out.pages.push_back(p);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Detection files (COCO results layout)

struct Detection {
    std::int64_t page_id = 0;
    int category_id = 0;
    BBox bbox;
    double confidence = 1.0;
    /// Optional record id; tools that need one fall back to the file position.
    std::optional<std::int64_t> id;

    friend bool operator==(const Detection&, const Detection&) = default;
};

inline Json detections_to_json(const std::vector<Detection>& dets) {
    Json arr = Json::array();
    for (const auto& d : dets) {
        Json rec = {{"image_id", d.page_id},
                    {"category_id", d.category_id},
                    {"bbox", detail::bbox_to_json(d.bbox)},
                    {"score", d.confidence}};
        if (d.id) {
            rec["id"] = *d.id;
        }
        arr.push_back(std::move(rec));
    }
    return arr;
}

inline std::vector<Detection> detections_from_json(const Json& doc) {
    if (!doc.is_array()) {
        throw Error(ErrorKind::parse, "detections file must hold a JSON array");
    }
    std::vector<Detection> out;
    out.reserve(doc.size());
    for (const auto& rec : doc) {
        Detection d;
        d.page_id = detail::field<std::int64_t>(rec, "image_id", "detection");
        d.category_id = detail::field<int>(rec, "category_id", "detection");
        if (!rec.contains("bbox")) {
            throw Error(ErrorKind::parse, "detection is missing 'bbox'");
        }
        d.bbox = detail::bbox_from_json(rec.at("bbox"));
        d.confidence = detail::field<double>(rec, "score", "detection");
        if (rec.contains("id")) {
            d.id = detail::field<std::int64_t>(rec, "id", "detection");
        }
        if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
            throw Error(ErrorKind::range, "detection score " + std::to_string(d.confidence) + " outside [0, 1]");
        }
        if (!d.bbox.valid()) {
            throw Error(ErrorKind::geometry, "detection has a non-positive bbox");
        }
        out.push_back(d);
    }
    return out;
}

inline void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path) {
    detail::write_text_file(path, detections_to_json(dets).dump(1) + "\n");
}

inline std::vector<Detection> read_detections(const std::filesystem::path& path) {
    return detections_from_json(detail::read_json_file(path));
}

} // namespace scoreforge::corpus
