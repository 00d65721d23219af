#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "geometry.hpp"
#include "parallel.hpp"

namespace scoreforge::metrics {

using corpus::Detection;
using corpus::Region;

/// Scores closer than this to a threshold count as equal to it, so that
/// grid values like 0.7 compare as written.
inline constexpr double kThresholdEps = 1e-12;

inline bool reaches(double value, double threshold) { return value >= threshold - kThresholdEps; }
inline bool exceeds(double value, double threshold) { return value > threshold + kThresholdEps; }

inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) {
        return 0.0;
    }
    const double area_a = (a.right() - a.x) * (a.bottom() - a.y);
    const double area_b = (b.right() - b.x) * (b.bottom() - b.y);
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

/// Fails when a detection refers to a page the ground truth does not have.
inline void check_page_universe(std::span<const Detection> dets, const corpus::AnnotatedCorpus& gt) {
    std::set<std::int64_t> pages;
    for (const auto& p : gt.pages) {
        pages.insert(p.id);
    }
    for (const auto& d : dets) {
        if (!pages.count(d.page_id)) {
            throw Error(ErrorKind::reference, "detection refers to page " + std::to_string(d.page_id) +
                                                  ", which is not in the ground truth");
        }
    }
}

// ---------------------------------------------------------------------------
// Greedy matching

struct MatchedPair {
    std::size_t det = 0; // index into the detection list
    std::size_t gt = 0;  // index into the ground-truth list
    double iou = 0.0;
};

struct ClassMatch {
    std::vector<MatchedPair> pairs;
    std::vector<std::size_t> false_positives;
    std::vector<std::size_t> false_negatives;
    std::size_t gt_count = 0;
    std::size_t kept_count = 0;

    std::size_t tp() const { return pairs.size(); }
    std::size_t fp() const { return false_positives.size(); }
    std::size_t fn() const { return false_negatives.size(); }
};

struct MatchResult {
    std::map<int, ClassMatch> classes;
    double conf_thr = 0.0;
    double iou_thr = 0.0;
};

namespace detail {

/// Detection indices sorted by descending confidence, input order on ties.
inline std::vector<std::size_t> by_confidence(std::span<const Detection> dets, const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> order = idx;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
    return order;
}

/// Greedy assignment of already-ordered detections to ground truths of one
/// class. Returns the matched ground-truth index (or nothing) per detection.
inline std::vector<std::optional<std::pair<std::size_t, double>>>
greedy_assign(std::span<const Detection> dets, std::span<const Region> gts, const std::vector<std::size_t>& ordered_dets,
              const std::vector<std::size_t>& class_gts, double iou_thr) {
    std::map<std::int64_t, std::vector<std::size_t>> gts_by_page;
    for (std::size_t g : class_gts) {
        gts_by_page[gts[g].page_id].push_back(g);
    }
    std::set<std::size_t> taken;
    std::vector<std::optional<std::pair<std::size_t, double>>> out(ordered_dets.size());
    for (std::size_t k = 0; k < ordered_dets.size(); ++k) {
        const Detection& d = dets[ordered_dets[k]];
        auto it = gts_by_page.find(d.page_id);
        if (it == gts_by_page.end()) {
            continue;
        }
        double best = -1.0;
        std::size_t best_gt = 0;
        for (std::size_t g : it->second) {
            if (taken.count(g)) {
                continue;
            }
            const double v = iou(d.bbox, gts[g].bbox);
            if (reaches(v, iou_thr) && v > best) {
                best = v;
                best_gt = g;
            }
        }
        if (best >= 0.0) {
            taken.insert(best_gt);
            out[k] = std::make_pair(best_gt, best);
        }
    }
    return out;
}

} // namespace detail

/// Drops detections below `conf_thr`, then per class lets each remaining
/// detection (highest confidence first) claim the unclaimed ground truth on
/// its page with the highest IoU, provided that IoU reaches `iou_thr`.
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const Region> gts, double conf_thr,
                                    double iou_thr) {
    MatchResult result;
    result.conf_thr = conf_thr;
    result.iou_thr = iou_thr;

    std::map<int, std::vector<std::size_t>> gts_by_class;
    std::map<int, std::vector<std::size_t>> dets_by_class;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        gts_by_class[gts[g].category_id].push_back(g);
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (reaches(dets[d].confidence, conf_thr)) {
            dets_by_class[dets[d].category_id].push_back(d);
        }
    }
    std::set<int> classes;
    for (const auto& [c, _] : gts_by_class) {
        classes.insert(c);
    }
    for (const auto& [c, _] : dets_by_class) {
        classes.insert(c);
    }

    for (int c : classes) {
        ClassMatch cm;
        const auto& class_gts = gts_by_class[c];
        const auto ordered = detail::by_confidence(dets, dets_by_class[c]);
        cm.gt_count = class_gts.size();
        cm.kept_count = ordered.size();
        const auto assigned = detail::greedy_assign(dets, gts, ordered, class_gts, iou_thr);
        std::set<std::size_t> matched_gts;
        for (std::size_t k = 0; k < ordered.size(); ++k) {
            if (assigned[k]) {
                cm.pairs.push_back({ordered[k], assigned[k]->first, assigned[k]->second});
                matched_gts.insert(assigned[k]->first);
            } else {
                cm.false_positives.push_back(ordered[k]);
            }
        }
        for (std::size_t g : class_gts) {
            if (!matched_gts.count(g)) {
                cm.false_negatives.push_back(g);
            }
        }
        result.classes.emplace(c, std::move(cm));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Precision, recall, F1

struct ClassScores {
    int category_id = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct PrfResult {
    std::vector<ClassScores> classes;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

inline ClassScores class_scores(int category_id, std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassScores s{category_id, tp, fp, fn};
    s.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

/// Per-class scores and their unweighted means. Macro-F1 is the mean of the
/// per-class F1 values. Classes with neither ground truth nor kept
/// detections do not take part.
inline PrfResult prf(const MatchResult& match) {
    PrfResult out;
    for (const auto& [c, cm] : match.classes) {
        if (cm.gt_count == 0 && cm.kept_count == 0) {
            continue;
        }
        out.classes.push_back(class_scores(c, cm.tp(), cm.fp(), cm.fn()));
    }
    if (!out.classes.empty()) {
        const double n = double(out.classes.size());
        for (const auto& s : out.classes) {
            out.macro_precision += s.precision;
            out.macro_recall += s.recall;
            out.macro_f1 += s.f1;
        }
        out.macro_precision /= n;
        out.macro_recall /= n;
        out.macro_f1 /= n;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Average precision

inline constexpr int kRecallPoints = 101;

/// COCO-style AP of one class at one IoU threshold: precision envelope
/// sampled at recall 0, 0.01, ..., 1. Empty when the class has no ground
/// truth.
inline std::optional<double> average_precision(std::span<const Detection> dets, std::span<const Region> gts,
                                               int category_id, double iou_thr) {
    std::vector<std::size_t> class_gts;
    std::vector<std::size_t> class_dets;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].category_id == category_id) {
            class_gts.push_back(g);
        }
    }
    if (class_gts.empty()) {
        return std::nullopt;
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (dets[d].category_id == category_id) {
            class_dets.push_back(d);
        }
    }
    const auto ordered = detail::by_confidence(dets, class_dets);
    const auto assigned = detail::greedy_assign(dets, gts, ordered, class_gts, iou_thr);

    const double n_gt = double(class_gts.size());
    std::vector<double> recall(ordered.size());
    std::vector<double> precision(ordered.size());
    std::size_t tp = 0;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        if (assigned[k]) {
            ++tp;
        }
        recall[k] = double(tp) / n_gt;
        precision[k] = double(tp) / double(k + 1);
    }
    for (std::size_t k = precision.size(); k-- > 1;) {
        precision[k - 1] = std::max(precision[k - 1], precision[k]);
    }
    double total = 0.0;
    for (int i = 0; i < kRecallPoints; ++i) {
        const double r = double(i) / double(kRecallPoints - 1);
        auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) {
            total += precision[std::size_t(it - recall.begin())];
        }
    }
    return total / double(kRecallPoints);
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
inline std::vector<double> coco_iou_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) {
        t.push_back(double(50 + 5 * i) / 100.0);
    }
    return t;
}

struct MapResult {
    std::vector<double> iou_thresholds;
    /// AP per class, one entry per threshold.
    std::map<int, std::vector<double>> ap;
    double map = 0.0;
};

/// Mean AP over the ten COCO IoU thresholds and over the classes that have
/// ground truth.
inline MapResult coco_map(std::span<const Detection> dets, std::span<const Region> gts) {
    MapResult out;
    out.iou_thresholds = coco_iou_thresholds();
    std::set<int> classes;
    for (const auto& g : gts) {
        classes.insert(g.category_id);
    }
    for (int c : classes) {
        auto& row = out.ap[c];
        for (double t : out.iou_thresholds) {
            row.push_back(*average_precision(dets, gts, c, t));
        }
    }
    if (!out.ap.empty()) {
        double total = 0.0;
        for (const auto& [c, row] : out.ap) {
            total += std::accumulate(row.begin(), row.end(), 0.0) / double(row.size());
        }
        out.map = total / double(out.ap.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Threshold sweep

/// Confidence thresholds 0.05, 0.15, ..., 0.95.
inline std::vector<double> confidence_grid() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) {
        t.push_back(double(5 + 10 * i) / 100.0);
    }
    return t;
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
inline std::vector<double> iou_grid() { return coco_iou_thresholds(); }

struct SweepCell {
    double conf_thr = 0.0;
    double iou_thr = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

struct SweepResult {
    /// Confidence-major order.
    std::vector<SweepCell> cells;
    SweepCell best;
};

/// Evaluates macro-F1 over the confidence x IoU grid and keeps the best cell;
/// ties go to the lowest confidence threshold, then the lowest IoU threshold.
inline SweepResult sweep_thresholds(std::span<const Detection> dets, std::span<const Region> gts, unsigned threads = 1) {
    const auto confs = confidence_grid();
    const auto ious = iou_grid();
    SweepResult out;
    out.cells.resize(confs.size() * ious.size());
    parallel_for(out.cells.size(), threads, [&](std::size_t k) {
        const double c = confs[k / ious.size()];
        const double t = ious[k % ious.size()];
        const auto scores = prf(match_detections(dets, gts, c, t));
        out.cells[k] = {c, t, scores.macro_precision, scores.macro_recall, scores.macro_f1};
    });
    out.best = out.cells.front();
    for (const auto& cell : out.cells) {
        if (cell.macro_f1 > out.best.macro_f1 + kThresholdEps) {
            out.best = cell;
        }
    }
    return out;
}

inline std::string sweep_csv(const SweepResult& sweep) {
    std::ostringstream os;
    os.precision(17);
    os << "conf_thr,iou_thr,mP,mR,mF1\n";
    for (const auto& c : sweep.cells) {
        os << c.conf_thr << ',' << c.iou_thr << ',' << c.macro_precision << ',' << c.macro_recall << ',' << c.macro_f1
           << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Report

struct EvalReport {
    double conf_thr = 0.0;
    double iou_thr = 0.0;
    PrfResult scores;
    MapResult map;
    std::optional<SweepResult> sweep;
};

inline EvalReport evaluate(std::span<const Detection> dets, std::span<const Region> gts, double conf_thr,
                           double iou_thr, bool with_sweep, unsigned threads = 1) {
    EvalReport r;
    r.conf_thr = conf_thr;
    r.iou_thr = iou_thr;
    r.scores = prf(match_detections(dets, gts, conf_thr, iou_thr));
    r.map = coco_map(dets, gts);
    if (with_sweep) {
        r.sweep = sweep_thresholds(dets, gts, threads);
    }
    return r;
}

inline std::string percent_display(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
    return buf;
}

inline corpus::Json sweep_cell_to_json(const SweepCell& c) {
    return {{"conf_thr", c.conf_thr},
            {"iou_thr", c.iou_thr},
            {"mP", c.macro_precision},
            {"mR", c.macro_recall},
            {"mF1", c.macro_f1}};
}

inline corpus::Json report_to_json(const EvalReport& r, const std::vector<corpus::Category>& categories) {
    auto name_of = [&](int id) {
        for (const auto& c : categories) {
            if (c.id == id) {
                return c.name;
            }
        }
        return std::to_string(id);
    };
    corpus::Json classes = corpus::Json::array();
    for (const auto& s : r.scores.classes) {
        corpus::Json entry = {{"category_id", s.category_id},
                              {"name", name_of(s.category_id)},
                              {"tp", s.tp},
                              {"fp", s.fp},
                              {"fn", s.fn},
                              {"precision", s.precision},
                              {"recall", s.recall},
                              {"f1", s.f1}};
        if (auto it = r.map.ap.find(s.category_id); it != r.map.ap.end()) {
            entry["ap"] = it->second;
        }
        classes.push_back(std::move(entry));
    }
    corpus::Json doc = {{"conf_thr", r.conf_thr},
                        {"iou_thr", r.iou_thr},
                        {"classes", classes},
                        {"mP", r.scores.macro_precision},
                        {"mR", r.scores.macro_recall},
                        {"mF1", r.scores.macro_f1},
                        {"ap_iou_thresholds", r.map.iou_thresholds},
                        {"mAP", r.map.map},
                        {"mAP_percent_display", percent_display(r.map.map)}};
    if (r.sweep) {
        doc["sweep_best"] = sweep_cell_to_json(r.sweep->best);
    }
    return doc;
}

} // namespace scoreforge::metrics
