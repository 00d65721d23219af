#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <scoreforge/goaleval.hpp>

#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace scoreforge;
using namespace scoreforge::goaleval;

namespace {

Tokens toks(std::initializer_list<const char*> t) { return Tokens(t.begin(), t.end()); }

Detection det(std::int64_t id, std::int64_t page, BBox b, double conf) { return {page, 1, b, conf, id}; }

// All sequences over {a, b, c} up to `max_len` tokens.
std::vector<Tokens> all_sequences(std::size_t max_len) {
    std::vector<Tokens> out{{}};
    std::size_t begin = 0;
    for (std::size_t len = 1; len <= max_len; ++len) {
        const std::size_t end = out.size();
        for (std::size_t i = begin; i < end; ++i) {
            for (const char* t : {"a", "b", "c"}) {
                Tokens s = out[i];
                s.push_back(t);
                out.push_back(std::move(s));
            }
        }
        begin = end;
    }
    return out;
}

} // namespace

TEST(Ser, Examples) {
    const auto ref = toks({"C4", "D4", "E4"});
    EXPECT_EQ(ser(ref, ref), 0.0);
    EXPECT_EQ(ser({}, toks({"a", "b", "c", "d", "e"})), 1.0);
    EXPECT_NEAR(ser(toks({"C4", "E4"}), ref), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(ser(toks({"x", "y", "z", "w", "v", "u"}), ref), 2.0);
    EXPECT_THROW(ser(ref, {}), Error);
}

TEST(EditDistance, MatchesRecursiveOracleAndIsSymmetric) {
    const auto seqs = all_sequences(4);
    ASSERT_EQ(seqs.size(), 121u);
    for (const auto& a : seqs) {
        for (const auto& b : seqs) {
            const auto d = edit_distance(a, b);
            ASSERT_EQ(d, oracle::edit_distance(a, b));
            ASSERT_EQ(d, edit_distance(b, a));
            if (!b.empty()) {
                ASSERT_EQ(ser(a, b), double(d) / double(b.size()));
            }
        }
    }
}

TEST(EditDistance, RandomLongerSequences) {
    std::mt19937 rng(6);
    for (int i = 0; i < 300; ++i) {
        Tokens a(rng() % 9), b(rng() % 9);
        for (auto& t : a) {
            t = std::string(1, char('a' + rng() % 4));
        }
        for (auto& t : b) {
            t = std::string(1, char('a' + rng() % 4));
        }
        ASSERT_EQ(edit_distance(a, b), oracle::edit_distance(a, b));
    }
}

TEST(MatchGoal, Examples) {
    const std::vector<Region> one{{1, 1, 1, {0, 0, 100, 100}}};
    auto pairs = match_goal(std::vector<Detection>{det(5, 1, {0, 0, 100, 100}, 0.9)}, one);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].iou, 1.0);

    const std::vector<Detection> boundary{det(5, 1, {0, 0, 55, 100}, 0.9)};
    ASSERT_NEAR(metrics::iou(boundary[0].bbox, one[0].bbox), 0.55, 1e-15);
    EXPECT_TRUE(match_goal(boundary, one).empty());
    EXPECT_EQ(match_goal(std::vector<Detection>{det(5, 1, {0, 0, 56, 100}, 0.9)}, one).size(), 1u);

    const std::vector<Region> stacked{{1, 1, 1, {0, 0, 100, 60}}, {2, 1, 1, {0, 40, 100, 60}}};
    pairs = match_goal(std::vector<Detection>{det(5, 1, {0, 0, 100, 100}, 0.9)}, stacked);
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_NEAR(pairs[0].iou, 0.6, 1e-12);
    EXPECT_NEAR(pairs[1].iou, 0.6, 1e-12);

    EXPECT_TRUE(match_goal(std::vector<Detection>{det(5, 2, {0, 0, 100, 100}, 0.9)}, one).empty());
}

TEST(MatchGoal, EmitsExactlyThePairsAboveThreshold) {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(0, 40), s(10, 60);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Region> gts;
        std::vector<Detection> dets;
        for (int i = 0; i < 5; ++i) {
            gts.push_back({i + 1, 1 + i % 2, 1, {u(rng), u(rng), s(rng), s(rng)}});
            dets.push_back(det(i + 10, 1 + i % 2, {u(rng), u(rng), s(rng), s(rng)}, 0.5));
        }
        const auto pairs = match_goal(dets, gts, 0.3);
        std::size_t expected = 0;
        for (const auto& d : dets) {
            for (const auto& g : gts) {
                expected += d.page_id == g.page_id && oracle::box_iou(d.bbox, g.bbox) > 0.3 + 1e-12;
            }
        }
        ASSERT_EQ(pairs.size(), expected);
        for (const auto& p : pairs) {
            ASSERT_GT(p.iou, 0.3);
        }
    }
}

TEST(SerDelta, SignConvention) {
    const auto ref = toks({"C4", "D4", "E4"});
    EXPECT_EQ(ser_delta(toks({"C4", "E4"}), toks({"C4", "E4"}), ref), 0.0);
    EXPECT_EQ(ser_delta(toks({"x", "y", "z"}), ref, ref), 1.0);
    EXPECT_NEAR(ser_delta(ref, toks({"C4", "E4"}), ref), -1.0 / 3.0, 1e-15);
}

TEST(GoalTuples, ReportsMissingTranscriptions) {
    const std::vector<Region> gts{{1, 1, 1, {0, 0, 100, 50}}, {2, 1, 1, {0, 100, 100, 50}}, {3, 1, 1, {0, 200, 100, 50}}};
    const std::vector<Detection> dets{det(11, 1, {0, 0, 100, 50}, 0.9), det(12, 1, {0, 100, 100, 50}, 0.4),
                                      det(13, 1, {0, 200, 100, 50}, 0.7)};
    const Transcriptions ref{{1, toks({"a", "b"})}, {2, toks({"a"})}, {3, toks({"c"})}};
    const Transcriptions hyp_gt{{1, toks({"a", "b"})}, {2, toks({"a"})}};
    const Transcriptions hyp_det{{11, toks({"a"})}, {12, toks({"a"})}, {13, toks({"c"})}};
    const auto run = goal_tuples(dets, gts, ref, hyp_gt, hyp_det);
    ASSERT_EQ(run.tuples.size(), 2u);
    EXPECT_EQ(run.tuples[0].det_region_id, 11);
    EXPECT_EQ(run.tuples[0].gt_region_id, 1);
    EXPECT_DOUBLE_EQ(run.tuples[0].ser_delta, 0.5);
    EXPECT_EQ(run.tuples[0].confidence, 0.9);
    EXPECT_EQ(run.tuples[1].ser_delta, 0.0);
    ASSERT_EQ(run.missing.size(), 1u);
    EXPECT_EQ(run.missing[0].which, "hyp_gt");
    EXPECT_EQ(run.missing[0].gt_region_id, 3);
}

TEST(GoalTuples, IdenticalTranscriptionsGiveZeroDeltas) {
    std::vector<Region> gts;
    std::vector<Detection> dets;
    Transcriptions ref, hyp_gt, hyp_det;
    for (int i = 0; i < 8; ++i) {
        gts.push_back({i + 1, 1, 1, {0, 60.0 * i, 300, 50}});
        dets.push_back(det(100 + i, 1, {2, 60.0 * i + 1, 300, 48}, 0.1 * i));
        ref[i + 1] = toks({"a", "b", "c"});
        hyp_gt[i + 1] = toks({"a", "c"});
        hyp_det[100 + i] = toks({"a", "c"});
    }
    const auto run = goal_tuples(dets, gts, ref, hyp_gt, hyp_det);
    ASSERT_EQ(run.tuples.size(), 8u);
    for (const auto& t : run.tuples) {
        EXPECT_EQ(t.ser_delta, 0.0);
    }
}

TEST(GoalTuples, DetectionsWithoutIdsUseTheirPosition) {
    const std::vector<Region> gts{{1, 1, 1, {0, 0, 100, 50}}};
    std::vector<Detection> dets{{1, 1, {0, 0, 100, 50}, 0.8, std::nullopt}};
    const Transcriptions ref{{1, toks({"a"})}}, hyp_gt{{1, toks({"a"})}}, hyp_det{{0, toks({"b"})}};
    const auto run = goal_tuples(dets, gts, ref, hyp_gt, hyp_det);
    ASSERT_EQ(run.tuples.size(), 1u);
    EXPECT_EQ(run.tuples[0].det_region_id, 0);
    EXPECT_EQ(run.tuples[0].ser_delta, 1.0);
}

TEST(Summarize, Examples) {
    const auto empty = summarize({}, 0.6);
    EXPECT_EQ(empty.above.count, 0u);
    EXPECT_EQ(empty.below.count, 0u);

    const std::vector<GoalTuple> zeros{{0.0, 0.9, 0.8, 1, 1}, {0.0, 0.7, 0.9, 2, 2}};
    const auto z = summarize(zeros, 0.6);
    EXPECT_EQ(z.above.count, 2u);
    EXPECT_EQ(z.above.mean, 0.0);
    EXPECT_EQ(z.below.count, 0u);

    // above: 0.1, -0.2, 0.4 (0.6 exactly counts as above); below: 0.5, 1.0, 0.3
    const std::vector<GoalTuple> six{{0.1, 0.95, 0.9, 1, 1}, {-0.2, 0.6, 0.7, 2, 2}, {0.4, 0.8, 0.6, 3, 3},
                                     {0.5, 0.59, 0.7, 4, 4},  {1.0, 0.1, 0.6, 5, 5},  {0.3, 0.3, 0.8, 6, 6}};
    const auto s = summarize(six, 0.6);
    EXPECT_EQ(s.above.count, 3u);
    EXPECT_NEAR(s.above.mean, 0.1, 1e-12);
    EXPECT_NEAR(s.above.median, 0.1, 1e-12);
    EXPECT_EQ(s.below.count, 3u);
    EXPECT_NEAR(s.below.mean, 0.6, 1e-12);
    EXPECT_NEAR(s.below.median, 0.5, 1e-12);

    const auto even = group_stats({4.0, 1.0, 3.0, 2.0});
    EXPECT_DOUBLE_EQ(even.median, 2.5);
    EXPECT_DOUBLE_EQ(even.mean, 2.5);
}

TEST(Transcriptions, ParseAndRoundTrip) {
    std::istringstream in("3\tC4 D4  E4\r\n\n7\t\n12\tx\n");
    const auto t = parse_transcriptions(in);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t.at(3), toks({"C4", "D4", "E4"}));
    EXPECT_TRUE(t.at(7).empty());

    testutil::TempDir dir;
    write_transcriptions(dir / "t.txt", t);
    EXPECT_EQ(read_transcriptions(dir / "t.txt"), t);
    EXPECT_THROW(read_transcriptions(dir / "none.txt"), Error);
}

TEST(Transcriptions, ParseErrors) {
    for (const char* text : {"3 C4 D4\n", "x\tC4\n", "3x\tC4\n", "3\ta\n3\tb\n"}) {
        std::istringstream in(text);
        try {
            parse_transcriptions(in, "t.txt");
            FAIL() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::parse) << text;
            EXPECT_NE(std::string(e.what()).find("t.txt:"), std::string::npos);
        }
    }
}

TEST(Scatter, CsvShape) {
    const std::vector<GoalTuple> t{{0.25, 0.9, 0.8, 11, 1}};
    const auto csv = scatter_csv(t, "fixture");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "confidence,iou,ser_delta,det_id,gt_id,corpus");
    EXPECT_NE(csv.find("11,1,fixture"), std::string::npos);
    const auto j = summary_to_json(summarize(t, 0.6));
    EXPECT_EQ(j["above"]["count"], 1);
}
