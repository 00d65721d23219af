// Writes a small synthetic score corpus (pages + annotations), plus fake
// detector output and fake transcriptions for it, so the scoreforge
// subcommands can be tried without a real corpus.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include <scoreforge/fixture.hpp>

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    namespace fx = scoreforge::fixture;

    CLI::App app{"Render a synthetic score corpus"};
    fs::path out;
    fx::FixtureSpec spec;
    fx::FakeDetectorSpec detector;
    bool extras = true;
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--pages", spec.pages, "number of pages")->capture_default_str();
    app.add_option("--width", spec.width, "page width")->capture_default_str();
    app.add_option("--height", spec.height, "page height")->capture_default_str();
    app.add_option("--seed", spec.seed, "render seed")->capture_default_str();
    app.add_option("--jitter", detector.jitter, "fake detector box jitter")->capture_default_str();
    app.add_flag("!--no-extras", extras, "skip fake detections and transcriptions");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto corpus = fx::write_corpus_dir(spec, out);
        std::cout << "pages " << corpus.pages.size() << "\nregions " << corpus.region_count() << "\n";
        if (extras) {
            detector.seed = spec.seed + 10;
            const auto dets = fx::fake_detections(corpus, detector);
            scoreforge::corpus::write_detections(dets, out / "detections.json");
            const auto tr = fx::fake_transcriptions(corpus, dets, spec.seed + 20);
            scoreforge::goaleval::write_transcriptions(out / "ref.txt", tr.ref);
            scoreforge::goaleval::write_transcriptions(out / "hyp_gt.txt", tr.hyp_gt);
            scoreforge::goaleval::write_transcriptions(out / "hyp_det.txt", tr.hyp_det);
            std::cout << "detections " << dets.size() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
    return 0;
}
