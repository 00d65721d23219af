// scoreforge: semi-synthetic score page generation and layout-analysis
// evaluation from the command line.
//
// Every subcommand resolves its parameters as defaults < --config file <
// SCOREFORGE_<NAME> environment variables < flags, and records the resolved
// set in the report it writes.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <scoreforge/scoreforge.hpp>

namespace fs = std::filesystem;
using scoreforge::Error;
using scoreforge::ErrorKind;
using Json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFailure = 3;

struct Param {
    std::string name;
    Json fallback; // type of the default decides how strings are converted
    std::string help;
};

/// Parameters of one subcommand and the raw flag values CLI11 collected.
struct Command {
    std::string name;
    std::vector<Param> params;
    std::map<std::string, std::string> flag_values;
    CLI::App* app = nullptr;
    std::string config_path;
};

Json convert(const Param& p, const std::string& raw, const std::string& origin) {
    try {
        if (p.fallback.is_boolean()) {
            if (raw == "1" || raw == "true" || raw == "on" || raw == "yes") {
                return true;
            }
            if (raw == "0" || raw == "false" || raw == "off" || raw == "no") {
                return false;
            }
            throw std::invalid_argument("not a boolean");
        }
        std::size_t used = 0;
        if (p.fallback.is_number_integer()) {
            const long long v = std::stoll(raw, &used);
            if (used != raw.size()) {
                throw std::invalid_argument("trailing characters");
            }
            return v;
        }
        if (p.fallback.is_number()) {
            const double v = std::stod(raw, &used);
            if (used != raw.size()) {
                throw std::invalid_argument("trailing characters");
            }
            return v;
        }
    } catch (const std::exception&) {
        throw Error(ErrorKind::precondition, origin + ": cannot read '" + raw + "' for " + p.name);
    }
    return raw;
}

std::string env_name(const std::string& param) {
    std::string out = "SCOREFORGE_";
    for (char c : param) {
        out += c == '-' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

Json resolve(const Command& cmd) {
    Json cfg = Json::object();
    for (const auto& p : cmd.params) {
        cfg[p.name] = p.fallback;
    }
    if (!cmd.config_path.empty()) {
        Json file = scoreforge::corpus::detail::read_json_file(cmd.config_path);
        if (!file.is_object()) {
            throw Error(ErrorKind::parse, "config file must hold a JSON object");
        }
        // Top-level keys apply to every subcommand; a section named after the
        // subcommand overrides them.
        auto apply = [&](const Json& obj) {
            for (const auto& p : cmd.params) {
                if (!obj.contains(p.name)) {
                    continue;
                }
                const Json& v = obj.at(p.name);
                cfg[p.name] = v.is_string() ? convert(p, v.get<std::string>(), cmd.config_path) : v;
            }
        };
        apply(file);
        if (file.contains(cmd.name) && file.at(cmd.name).is_object()) {
            apply(file.at(cmd.name));
        }
    }
    for (const auto& p : cmd.params) {
        if (const char* env = std::getenv(env_name(p.name).c_str())) {
            cfg[p.name] = convert(p, env, env_name(p.name));
        }
    }
    for (const auto& [name, raw] : cmd.flag_values) {
        const auto it = std::find_if(cmd.params.begin(), cmd.params.end(), [&](const Param& p) { return p.name == name; });
        if (cmd.app->get_option("--" + name)->count() > 0) {
            cfg[name] = convert(*it, raw, "--" + name);
        }
    }
    return cfg;
}

std::string require_path(const Json& cfg, const std::string& key) {
    const auto v = cfg.at(key).get<std::string>();
    if (v.empty()) {
        throw Error(ErrorKind::precondition, "--" + key + " is required");
    }
    return v;
}

double unit_interval(const Json& cfg, const std::string& key) {
    const double v = cfg.at(key).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::precondition, "--" + key + " must be in [0, 1]");
    }
    return v;
}

unsigned threads_of(const Json& cfg) {
    const auto t = cfg.at("threads").get<long long>();
    if (t < 0 || t > 1024) {
        throw Error(ErrorKind::precondition, "--threads must be in [0, 1024]");
    }
    return unsigned(t);
}

Json report_header(const std::string& command, const Json& cfg) {
    return {{"tool", "scoreforge"}, {"tool_version", scoreforge::kVersion}, {"command", command}, {"config", cfg}};
}

void write_json(const fs::path& path, const Json& doc) {
    scoreforge::corpus::detail::write_text_file(path, doc.dump(1) + "\n");
}

void write_text(const fs::path& path, const std::string& text) { scoreforge::corpus::detail::write_text_file(path, text); }

/// Output directory handling for commands that build a whole tree: the tree
/// is staged next to the destination and moved into place only on success.
class StagedDir {
public:
    explicit StagedDir(fs::path target) : target_(std::move(target)) {
        if (fs::exists(target_)) {
            const bool empty = fs::is_directory(target_) && fs::is_empty(target_);
            const bool previous_run = fs::exists(target_ / "provenance.json");
            if (!empty && !previous_run) {
                throw Error(ErrorKind::io, target_.string() + " exists and is not a previous generate output");
            }
        }
        stage_ = target_;
        stage_ += ".partial";
        fs::remove_all(stage_);
        fs::create_directories(stage_);
    }
    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(stage_, ec);
        }
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;

    const fs::path& path() const { return stage_; }

    void commit() {
        fs::remove_all(target_);
        fs::rename(stage_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path stage_;
    bool committed_ = false;
};

// ---------------------------------------------------------------------------

int cmd_generate(const Json& cfg) {
    namespace sg = scoreforge::synthgen;
    const auto corpus = scoreforge::corpus::load_corpus(require_path(cfg, "corpus"));
    const fs::path out = require_path(cfg, "out");
    const long long n = cfg.at("n").get<long long>();
    if (n < 0) {
        throw Error(ErrorKind::precondition, "--n must be non-negative");
    }
    sg::GenConfig gen;
    gen.n = std::size_t(n);
    gen.seed = std::uint64_t(cfg.at("seed").get<long long>());
    gen.rotation_range = cfg.at("rotation-range").get<double>();
    gen.max_retries = int(cfg.at("max-retries").get<long long>());
    gen.background.sigma = cfg.at("blur-sigma").get<double>();
    gen.background.passes = int(cfg.at("blur-passes").get<long long>());
    gen.background.max_passes = std::max(gen.background.passes, gen.background.max_passes);
    gen.binarization.window = int(cfg.at("sauvola-window").get<long long>());
    gen.binarization.k = cfg.at("sauvola-k").get<double>();
    gen.binarization.dynamic_range = cfg.at("sauvola-r").get<double>();
    gen.background.check_params = gen.binarization;
    const auto interp = cfg.at("interpolation").get<std::string>();
    if (interp != "bilinear" && interp != "nearest") {
        throw Error(ErrorKind::precondition, "--interpolation must be 'bilinear' or 'nearest'");
    }
    gen.interpolation = interp == "nearest" ? scoreforge::imaging::Interpolation::nearest
                                            : scoreforge::imaging::Interpolation::bilinear;
    gen.threads = threads_of(cfg);
    gen.check();

    StagedDir stage(out);
    std::vector<scoreforge::imaging::GrayImage> images;
    if (gen.n > 0) {
        spdlog::info("loading {} source pages", corpus.pages.size());
        images = sg::load_page_images(corpus, gen.threads);
    }
    spdlog::info("generating {} pages", gen.n);
    const auto pages = sg::generate(corpus, images, gen);
    sg::write_synthetic_corpus(pages, corpus.categories, stage.path(), gen.threads);

    const auto reloaded = scoreforge::corpus::load_corpus(stage.path() / "annotations.json");
    if (!scoreforge::corpus::validate_corpus(reloaded).ok()) {
        throw Error(ErrorKind::generation, "generated corpus failed validation");
    }
    const auto stats = sg::summarize(pages);
    Json report = report_header("generate", cfg);
    report["stats"] = {{"pages", stats.pages}, {"slots", stats.slots}, {"placed", stats.placed}, {"skipped", stats.skipped}};
    write_json(stage.path() / "report.json", report);
    stage.commit();

    std::cout << "pages " << stats.pages << "\nslots " << stats.slots << "\nplaced " << stats.placed << "\nskipped "
              << stats.skipped << "\n";
    return kExitOk;
}

int cmd_split(const Json& cfg) {
    namespace co = scoreforge::corpus;
    const fs::path corpus_path = require_path(cfg, "corpus");
    const auto corpus = co::load_corpus(corpus_path);
    const fs::path out = require_path(cfg, "out");
    const auto plan = co::make_splits(corpus, std::uint64_t(cfg.at("seed").get<long long>()));

    fs::create_directories(out);
    // Page paths in the subset files are rewritten relative to `out`.
    auto rebase = [&](co::AnnotatedCorpus c) {
        for (auto& p : c.pages) {
            p.file_name = fs::proximate(fs::absolute(corpus.root / p.file_name), fs::absolute(out)).generic_string();
        }
        return c;
    };
    Json files = Json::object();
    for (const auto& [k, ids] : plan.train_subsets) {
        const std::string name = "train_" + std::to_string(k) + ".json";
        co::write_corpus(rebase(co::subset(corpus, ids)), out / name);
        files["train_" + std::to_string(k)] = name;
    }
    co::write_corpus(rebase(co::subset(corpus, plan.validation)), out / "validation.json");
    co::write_corpus(rebase(co::subset(corpus, plan.test)), out / "test.json");
    files["validation"] = "validation.json";
    files["test"] = "test.json";

    std::ostringstream csv;
    csv << "page_id,partition,smallest_train_subset\n";
    std::map<std::int64_t, int> smallest;
    for (auto it = plan.train_subsets.rbegin(); it != plan.train_subsets.rend(); ++it) {
        for (auto id : it->second) {
            smallest[id] = it->first;
        }
    }
    for (const auto& [id, k] : smallest) {
        csv << id << ",train," << k << "\n";
    }
    for (auto id : plan.validation) {
        csv << id << ",validation,\n";
    }
    for (auto id : plan.test) {
        csv << id << ",test,\n";
    }
    write_text(out / "split.csv", csv.str());

    Json report = report_header("split", cfg);
    report["plan"] = co::split_plan_to_json(plan);
    report["files"] = files;
    if (!plan.full_ladder()) {
        spdlog::warn("corpus has {} pages; training ladder stops at {}", corpus.pages.size(), plan.max_train_size());
    }
    write_json(out / "split.json", report);
    std::cout << "ladder";
    for (const auto& [k, _] : plan.train_subsets) {
        std::cout << ' ' << k;
    }
    std::cout << "\nvalidation " << plan.validation.size() << "\ntest " << plan.test.size() << "\n";
    return kExitOk;
}

struct EvalInputs {
    scoreforge::corpus::AnnotatedCorpus corpus;
    std::vector<scoreforge::corpus::Region> gts;
    std::vector<scoreforge::corpus::Detection> dets;
};

EvalInputs load_eval_inputs(const Json& cfg) {
    EvalInputs in;
    in.corpus = scoreforge::corpus::load_corpus(require_path(cfg, "corpus"));
    in.gts = in.corpus.all_regions();
    in.dets = scoreforge::corpus::read_detections(require_path(cfg, "detections"));
    scoreforge::metrics::check_page_universe(in.dets, in.corpus);
    for (const auto& d : in.dets) {
        if (!in.corpus.find_category(d.category_id)) {
            throw Error(ErrorKind::reference, "detection has unknown category " + std::to_string(d.category_id));
        }
    }
    return in;
}

int cmd_eval(const Json& cfg) {
    namespace me = scoreforge::metrics;
    const auto in = load_eval_inputs(cfg);
    const fs::path out = require_path(cfg, "out");
    double conf_thr = unit_interval(cfg, "conf-thr");
    double iou_thr = unit_interval(cfg, "iou-thr");
    const auto thresholds = cfg.at("thresholds").get<std::string>();
    if (!thresholds.empty()) {
        // Winner of a validation sweep.
        const Json sweep = scoreforge::corpus::detail::read_json_file(thresholds);
        const Json& best = sweep.contains("best") ? sweep.at("best") : sweep.at("sweep_best");
        conf_thr = best.at("conf_thr").get<double>();
        iou_thr = best.at("iou_thr").get<double>();
    }
    const bool with_sweep = cfg.at("sweep").get<bool>();
    const auto report = me::evaluate(in.dets, in.gts, conf_thr, iou_thr, with_sweep, threads_of(cfg));

    Json doc = report_header("eval", cfg);
    doc["evaluation"] = me::report_to_json(report, in.corpus.categories);
    fs::create_directories(out);
    write_json(out / "eval.json", doc);
    if (report.sweep) {
        write_text(out / "grid.csv", me::sweep_csv(*report.sweep));
    }
    std::cout.precision(6);
    std::cout << std::fixed << "mAP " << report.map.map << "\nmP " << report.scores.macro_precision << "\nmR "
              << report.scores.macro_recall << "\nmF1 " << report.scores.macro_f1 << "\n";
    return kExitOk;
}

int cmd_sweep(const Json& cfg) {
    namespace me = scoreforge::metrics;
    const auto in = load_eval_inputs(cfg);
    const fs::path out = require_path(cfg, "out");
    const auto sweep = me::sweep_thresholds(in.dets, in.gts, threads_of(cfg));

    Json doc = report_header("sweep", cfg);
    doc["best"] = me::sweep_cell_to_json(sweep.best);
    doc["confidence_grid"] = me::confidence_grid();
    doc["iou_grid"] = me::iou_grid();
    Json cells = Json::array();
    for (const auto& c : sweep.cells) {
        cells.push_back(me::sweep_cell_to_json(c));
    }
    doc["cells"] = cells;
    fs::create_directories(out);
    write_json(out / "sweep.json", doc);
    write_text(out / "grid.csv", me::sweep_csv(sweep));
    std::cout << "conf_thr " << sweep.best.conf_thr << "\niou_thr " << sweep.best.iou_thr << "\nmF1 "
              << sweep.best.macro_f1 << "\n";
    return kExitOk;
}

int cmd_postprocess(const Json& cfg) {
    namespace sp = scoreforge::saepost;
    const auto corpus = scoreforge::corpus::load_corpus(require_path(cfg, "corpus"));
    const fs::path maps = require_path(cfg, "maps");
    const fs::path out = require_path(cfg, "out");
    sp::ExtractionParams params;
    params.prob_thr = unit_interval(cfg, "prob-thr");
    params.min_area_frac = unit_interval(cfg, "min-area-frac");
    params.connectivity = int(cfg.at("connectivity").get<long long>());
    const double ratio = cfg.at("ratio").get<double>();
    sp::check_ratio(ratio);
    const bool expand = cfg.at("expand").get<bool>();

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(maps)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<scoreforge::corpus::Detection> dets;
    Json per_map = Json::array();
    for (const auto& file : files) {
        // <page_id>.<class>.png
        const std::string stem = file.stem().string();
        const auto dot = stem.find('.');
        if (dot == std::string::npos) {
            throw Error(ErrorKind::parse, file.filename().string() + " is not named <page_id>.<class>.png");
        }
        std::int64_t page_id = 0;
        try {
            page_id = std::stoll(stem.substr(0, dot));
        } catch (const std::exception&) {
            throw Error(ErrorKind::parse, file.filename().string() + " does not start with a page id");
        }
        const std::string class_name = stem.substr(dot + 1);
        const auto* page = corpus.find_page(page_id);
        if (!page) {
            throw Error(ErrorKind::reference, file.filename().string() + " refers to unknown page");
        }
        const auto category = corpus.category_id(class_name);
        if (!category) {
            throw Error(ErrorKind::reference, file.filename().string() + " refers to unknown class " + class_name);
        }
        const auto map = sp::read_probmap(file);
        if (map.width != page->width || map.height != page->height) {
            throw Error(ErrorKind::geometry, file.filename().string() + " does not match its page size");
        }
        auto found = sp::probmap_to_boxes(map, page_id, *category, params);
        if (expand) {
            for (auto& d : found) {
                d = sp::expand_pred_vertical(d, ratio, page->width, page->height);
            }
        }
        per_map.push_back({{"file", file.filename().string()}, {"detections", found.size()}});
        dets.insert(dets.end(), found.begin(), found.end());
    }
    for (std::size_t i = 0; i < dets.size(); ++i) {
        dets[i].id = std::int64_t(i) + 1;
    }

    fs::create_directories(out);
    scoreforge::corpus::write_detections(dets, out / "detections.json");
    std::ostringstream csv;
    csv.precision(17);
    csv << "id,page_id,category_id,x,y,w,h,score\n";
    for (const auto& d : dets) {
        csv << *d.id << ',' << d.page_id << ',' << d.category_id << ',' << d.bbox.x << ',' << d.bbox.y << ','
            << d.bbox.w << ',' << d.bbox.h << ',' << d.confidence << '\n';
    }
    write_text(out / "detections.csv", csv.str());
    Json report = report_header("postprocess", cfg);
    report["maps"] = per_map;
    report["detections"] = dets.size();
    write_json(out / "postprocess.json", report);
    std::cout << "maps " << files.size() << "\ndetections " << dets.size() << "\n";
    return kExitOk;
}

int cmd_goal_eval(const Json& cfg) {
    namespace ge = scoreforge::goaleval;
    const auto in = load_eval_inputs(cfg);
    const fs::path out = require_path(cfg, "out");
    const auto class_name = cfg.at("class").get<std::string>();
    const auto category = in.corpus.category_id(class_name);
    if (!category) {
        throw Error(ErrorKind::reference, "corpus has no class named " + class_name);
    }
    std::vector<scoreforge::corpus::Detection> dets;
    for (std::size_t i = 0; i < in.dets.size(); ++i) {
        if (in.dets[i].category_id == *category) {
            auto d = in.dets[i];
            d.id = ge::detection_key(d, i);
            dets.push_back(d);
        }
    }
    std::vector<scoreforge::corpus::Region> gts;
    for (const auto& r : in.gts) {
        if (r.category_id == *category) {
            gts.push_back(r);
        }
    }
    const auto ref = ge::read_transcriptions(require_path(cfg, "ref"));
    const auto hyp_gt = ge::read_transcriptions(require_path(cfg, "hyp-gt"));
    const auto hyp_det = ge::read_transcriptions(require_path(cfg, "hyp-det"));
    const double iou_min = unit_interval(cfg, "iou-min");
    const double conf_thr = unit_interval(cfg, "conf-thr");

    const auto run = ge::goal_tuples(dets, gts, ref, hyp_gt, hyp_det, iou_min);
    const auto summary = ge::summarize(run.tuples, conf_thr);
    std::string label = cfg.at("label").get<std::string>();
    if (label.empty()) {
        label = fs::path(require_path(cfg, "corpus")).stem().string();
    }
    for (const auto& m : run.missing) {
        spdlog::warn("missing {} transcription for pair det {} / gt {}", m.which, m.det_region_id, m.gt_region_id);
    }

    Json doc = report_header("goal-eval", cfg);
    doc["tuples"] = run.tuples.size();
    doc["summary"] = ge::summary_to_json(summary);
    Json missing = Json::array();
    for (const auto& m : run.missing) {
        missing.push_back({{"det_id", m.det_region_id}, {"gt_id", m.gt_region_id}, {"missing", m.which}});
    }
    doc["missing"] = missing;
    fs::create_directories(out);
    write_json(out / "goal.json", doc);
    write_text(out / "scatter.csv", ge::scatter_csv(run.tuples, label));
    std::cout << "tuples " << run.tuples.size() << "\nmissing " << run.missing.size() << "\nabove " << summary.above.count
              << " mean " << summary.above.mean << "\nbelow " << summary.below.count << " mean " << summary.below.mean
              << "\n";
    return kExitOk;
}

int cmd_validate(const Json& cfg) {
    namespace co = scoreforge::corpus;
    const auto corpus = co::load_corpus(require_path(cfg, "corpus"), false);
    auto report = co::validate_corpus(corpus);
    Json findings = Json::array();
    for (const auto& f : report.findings) {
        findings.push_back({{"kind", co::to_string(f.kind)}, {"id", f.id}, {"message", f.message}});
    }
    std::size_t detection_count = 0;
    const auto dets_path = cfg.at("detections").get<std::string>();
    if (!dets_path.empty()) {
        const auto dets = co::read_detections(dets_path);
        detection_count = dets.size();
        scoreforge::metrics::check_page_universe(dets, corpus);
    }
    Json doc = report_header("validate", cfg);
    doc["pages"] = corpus.pages.size();
    doc["regions"] = corpus.region_count();
    doc["detections"] = detection_count;
    doc["valid"] = report.ok();
    doc["findings"] = findings;
    const auto out = cfg.at("out").get<std::string>();
    if (!out.empty()) {
        fs::create_directories(out);
        write_json(fs::path(out) / "validation.json", doc);
        std::ostringstream csv;
        csv << "kind,id,message\n";
        for (const auto& f : report.findings) {
            std::string message;
            for (char c : f.message) {
                message += c == '"' ? std::string("\"\"") : std::string(1, c);
            }
            csv << co::to_string(f.kind) << ',' << f.id << ",\"" << message << "\"\n";
        }
        write_text(fs::path(out) / "validation.csv", csv.str());
    }
    std::cout << "pages " << corpus.pages.size() << "\nregions " << corpus.region_count() << "\nfindings "
              << report.findings.size() << "\n";
    for (const auto& f : report.findings) {
        std::cout << co::to_string(f.kind) << ": " << f.message << "\n";
    }
    return report.ok() ? kExitOk : kExitFindings;
}

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("scoreforge");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("SCOREFORGE_LOG")) {
        const std::string v = level;
        if (v == "error") {
            spdlog::set_level(spdlog::level::err);
        } else if (v == "warn") {
            spdlog::set_level(spdlog::level::warn);
        } else if (v == "info") {
            spdlog::set_level(spdlog::level::info);
        } else if (v == "debug") {
            spdlog::set_level(spdlog::level::debug);
        } else {
            spdlog::warn("ignoring SCOREFORGE_LOG={} (expected error|warn|info|debug)", v);
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Semi-synthetic score page generation and layout-analysis evaluation"};
    app.set_version_flag("--version", std::string(scoreforge::kVersion));
    app.require_subcommand(1);

    const Param corpus{"corpus", "", "annotation file (COCO subset JSON)"};
    const Param detections{"detections", "", "detections file (COCO results JSON)"};
    const Param out{"out", "", "output directory"};
    const Param seed{"seed", 0, "random seed"};
    const Param threads{"threads", 1, "worker threads (0 = all cores)"};

    std::vector<Command> commands = {
        {"generate",
         {corpus, out, seed, threads,
          {"n", 100, "number of pages to generate"},
          {"rotation-range", 3.0, "per-page rotation drawn from [-r, r] degrees"},
          {"max-retries", 10, "extra candidates tried before a slot is skipped"},
          {"blur-sigma", 0.0, "background blur sigma (0 = max(w, h) / 100)"},
          {"blur-passes", 2, "background blur passes"},
          {"sauvola-window", 25, "Sauvola window (odd)"},
          {"sauvola-k", 0.2, "Sauvola k"},
          {"sauvola-r", 128.0, "Sauvola dynamic range"},
          {"interpolation", "bilinear", "bilinear | nearest"}}},
        {"split", {corpus, out, seed, threads}},
        {"eval",
         {corpus, detections, out, threads,
          {"conf-thr", 0.05, "confidence threshold for P/R/F1"},
          {"iou-thr", 0.5, "IoU threshold for P/R/F1"},
          {"thresholds", "", "sweep.json whose winner replaces the two thresholds"},
          {"sweep", true, "also run the threshold sweep"}}},
        {"sweep", {corpus, detections, out, threads}},
        {"postprocess",
         {corpus, out, threads,
          {"maps", "", "directory of <page_id>.<class>.png probability maps"},
          {"prob-thr", 0.5, "probability threshold"},
          {"min-area-frac", 0.001, "minimum component area as page fraction"},
          {"connectivity", 8, "4 or 8"},
          {"ratio", 0.2, "vertical expansion ratio"},
          {"expand", true, "undo the vertical ground-truth shrink"}}},
        {"goal-eval",
         {corpus, detections, out, threads,
          {"ref", "", "reference transcriptions (by ground-truth region id)"},
          {"hyp-gt", "", "transcriptions of the annotated regions"},
          {"hyp-det", "", "transcriptions of the detected regions"},
          {"iou-min", 0.55, "pairs need IoU strictly above this"},
          {"conf-thr", 0.6, "summary split threshold"},
          {"class", "staff", "class to evaluate"},
          {"label", "", "corpus label for the scatter table"}}},
        {"validate", {corpus, detections, out, threads}},
    };

    const std::map<std::string, std::string> about{
        {"generate", "build semi-synthetic pages from an annotated corpus"},
        {"split", "nested training ladder plus validation and test splits"},
        {"eval", "per-class P/R/F1, macro scores and COCO mAP"},
        {"sweep", "confidence x IoU grid search for the best macro-F1"},
        {"postprocess", "probability maps to boxes, undoing the vertical shrink"},
        {"goal-eval", "symbol error rate change of detected versus annotated staffs"},
        {"validate", "check a corpus and optional detections"},
    };
    for (auto& cmd : commands) {
        cmd.app = app.add_subcommand(cmd.name, about.at(cmd.name));
        cmd.app->add_option("--config", cmd.config_path, "JSON config file");
        for (const auto& p : cmd.params) {
            std::string help = p.help;
            if (!p.fallback.is_string() || !p.fallback.get<std::string>().empty()) {
                help += " [" + (p.fallback.is_string() ? p.fallback.get<std::string>() : p.fallback.dump()) + "]";
            }
            cmd.app->add_option("--" + p.name, cmd.flag_values[p.name], help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    for (auto& cmd : commands) {
        if (!cmd.app->parsed()) {
            continue;
        }
        try {
            const Json cfg = resolve(cmd);
            spdlog::debug("resolved config: {}", cfg.dump());
            if (cmd.name == "generate") {
                return cmd_generate(cfg);
            }
            if (cmd.name == "split") {
                return cmd_split(cfg);
            }
            if (cmd.name == "eval") {
                return cmd_eval(cfg);
            }
            if (cmd.name == "sweep") {
                return cmd_sweep(cfg);
            }
            if (cmd.name == "postprocess") {
                return cmd_postprocess(cfg);
            }
            if (cmd.name == "goal-eval") {
                return cmd_goal_eval(cfg);
            }
            if (cmd.name == "validate") {
                return cmd_validate(cfg);
            }
        } catch (const Error& e) {
            spdlog::error("{}", e.what());
            return e.kind() == ErrorKind::precondition ? kExitUsage : kExitFailure;
        } catch (const std::exception& e) {
            spdlog::error("{}", e.what());
            return kExitFailure;
        }
    }
    return kExitUsage;
}
