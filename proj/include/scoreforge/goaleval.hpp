#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "metrics.hpp"

namespace scoreforge::goaleval {

using corpus::Detection;
using corpus::Region;

/// Default IoU a detected staff must exceed to be paired with a ground-truth staff.
inline constexpr double kGoalIouMin = 0.55;

using Tokens = std::vector<std::string>;

/// Region id -> symbol tokens.
using Transcriptions = std::map<std::int64_t, Tokens>;

/// Token-level Levenshtein distance with unit costs.
inline std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Symbol error rate: edit distance divided by the reference length.
inline double ser(std::span<const std::string> hyp, std::span<const std::string> ref) {
    if (ref.empty()) {
        throw Error(ErrorKind::precondition, "SER needs a non-empty reference");
    }
    return double(edit_distance(hyp, ref)) / double(ref.size());
}

struct GoalPair {
    std::size_t det = 0;
    std::size_t gt = 0;
    double iou = 0.0;
};

/// Every same-page (detection, ground truth) pair whose IoU is strictly
/// above `iou_min`. A detection may pair with several ground truths and the
/// other way round.
inline std::vector<GoalPair> match_goal(std::span<const Detection> dets, std::span<const Region> gts,
                                        double iou_min = kGoalIouMin) {
    std::vector<GoalPair> out;
    for (std::size_t d = 0; d < dets.size(); ++d) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (dets[d].page_id != gts[g].page_id) {
                continue;
            }
            const double v = metrics::iou(dets[d].bbox, gts[g].bbox);
            if (metrics::exceeds(v, iou_min)) {
                out.push_back({d, g, v});
            }
        }
    }
    return out;
}

struct GoalTuple {
    double ser_delta = 0.0;
    double confidence = 0.0;
    double iou = 0.0;
    std::int64_t det_region_id = 0;
    std::int64_t gt_region_id = 0;
};

/// SER(hyp_det, ref) - SER(hyp_gt, ref): positive when the detected region
/// transcribes worse than the annotated one.
inline double ser_delta(std::span<const std::string> hyp_det, std::span<const std::string> hyp_gt,
                        std::span<const std::string> ref) {
    return ser(hyp_det, ref) - ser(hyp_gt, ref);
}

/// Id a detection is known by in transcription files: its `id` field, or
/// its position in the detection list.
inline std::int64_t detection_key(const Detection& d, std::size_t index) { return d.id.value_or(std::int64_t(index)); }

struct MissingTranscription {
    std::int64_t det_region_id = 0;
    std::int64_t gt_region_id = 0;
    std::string which; // "ref", "hyp_gt" or "hyp_det"
};

struct GoalRun {
    std::vector<GoalTuple> tuples;
    std::vector<MissingTranscription> missing;
};

/// Pairs detections with ground truth and scores each pair. Pairs with a
/// missing or empty-reference transcription are reported and skipped.
inline GoalRun goal_tuples(std::span<const Detection> dets, std::span<const Region> gts, const Transcriptions& ref,
                           const Transcriptions& hyp_gt, const Transcriptions& hyp_det, double iou_min = kGoalIouMin) {
    GoalRun run;
    for (const auto& pair : match_goal(dets, gts, iou_min)) {
        const Detection& d = dets[pair.det];
        const std::int64_t det_id = detection_key(d, pair.det);
        const std::int64_t gt_id = gts[pair.gt].id;
        auto r = ref.find(gt_id);
        auto hg = hyp_gt.find(gt_id);
        auto hd = hyp_det.find(det_id);
        if (r == ref.end() || r->second.empty()) {
            run.missing.push_back({det_id, gt_id, "ref"});
            continue;
        }
        if (hg == hyp_gt.end()) {
            run.missing.push_back({det_id, gt_id, "hyp_gt"});
            continue;
        }
        if (hd == hyp_det.end()) {
            run.missing.push_back({det_id, gt_id, "hyp_det"});
            continue;
        }
        run.tuples.push_back({ser_delta(hd->second, hg->second, r->second), d.confidence, pair.iou, det_id, gt_id});
    }
    return run;
}

struct GroupStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
};

struct GoalSummary {
    double conf_thr = 0.0;
    GroupStats above; // confidence >= conf_thr
    GroupStats below;
};

inline GroupStats group_stats(std::vector<double> values) {
    GroupStats g;
    g.count = values.size();
    if (values.empty()) {
        return g;
    }
    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    g.mean = total / double(values.size());
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    g.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
    return g;
}

inline GoalSummary summarize(std::span<const GoalTuple> tuples, double conf_thr) {
    std::vector<double> above, below;
    for (const auto& t : tuples) {
        (metrics::reaches(t.confidence, conf_thr) ? above : below).push_back(t.ser_delta);
    }
    return {conf_thr, group_stats(std::move(above)), group_stats(std::move(below))};
}

/// Parses `<region_id>\t<token> <token> ...` lines. Blank lines are ignored;
/// a record may have no tokens.
inline Transcriptions parse_transcriptions(std::istream& in, const std::string& source = "transcriptions") {
    Transcriptions out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const auto where = source + ":" + std::to_string(line_no);
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorKind::parse, where + ": expected '<region_id>\\t<tokens>'");
        }
        std::int64_t id = 0;
        try {
            std::size_t used = 0;
            id = std::stoll(line.substr(0, tab), &used);
            if (used != tab) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception&) {
            throw Error(ErrorKind::parse, where + ": bad region id '" + line.substr(0, tab) + "'");
        }
        Tokens tokens;
        std::istringstream ts(line.substr(tab + 1));
        for (std::string tok; ts >> tok;) {
            tokens.push_back(tok);
        }
        if (!out.emplace(id, std::move(tokens)).second) {
            throw Error(ErrorKind::parse, where + ": region id " + std::to_string(id) + " repeated");
        }
    }
    return out;
}

inline Transcriptions read_transcriptions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    return parse_transcriptions(in, path.string());
}

inline void write_transcriptions(const std::filesystem::path& path, const Transcriptions& t) {
    std::ostringstream os;
    for (const auto& [id, tokens] : t) {
        os << id << '\t';
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            os << (i ? " " : "") << tokens[i];
        }
        os << '\n';
    }
    corpus::detail::write_text_file(path, os.str());
}

/// Scatter table: confidence, iou, ser_delta, det_id, gt_id, corpus.
inline std::string scatter_csv(std::span<const GoalTuple> tuples, const std::string& corpus_label) {
    std::ostringstream os;
    os.precision(17);
    os << "confidence,iou,ser_delta,det_id,gt_id,corpus\n";
    for (const auto& t : tuples) {
        os << t.confidence << ',' << t.iou << ',' << t.ser_delta << ',' << t.det_region_id << ',' << t.gt_region_id
           << ',' << corpus_label << '\n';
    }
    return os.str();
}

inline corpus::Json summary_to_json(const GoalSummary& s) {
    auto group = [](const GroupStats& g) {
        return corpus::Json{{"count", g.count}, {"mean_ser_delta", g.mean}, {"median_ser_delta", g.median}};
    };
    return {{"conf_thr", s.conf_thr}, {"above", group(s.above)}, {"below", group(s.below)}};
}

} // namespace scoreforge::goaleval
