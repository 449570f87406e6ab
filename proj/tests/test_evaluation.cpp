#include "doctest.h"

#include <random>

#include "drumrefine/evaluation.hpp"
#include "oracle_matching.hpp"

using namespace drumrefine;

TEST_SUITE("evaluation") {

TEST_CASE("matching: one in-window pair, one stray each side") {
    const std::vector<double> ref = {1.0, 2.0};
    const std::vector<double> est = {1.03, 2.06};
    const MatchCounts c = match_onsets(ref, est, 0.05);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
}

TEST_CASE("matching: identical sequences") {
    const std::vector<double> times = {0.1, 0.5, 0.9, 1.4};
    const MatchCounts c = match_onsets(times, times, 0.05);
    CHECK(c.tp == 4);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
}

TEST_CASE("matching is maximum, not greedy") {
    // Nearest-first pairing would bind 1.00<->1.04 and leave 1.05 vs 1.09
    // unmatched only if it bound 1.05<->1.04 first; maximum matching finds 2.
    const std::vector<double> ref = {1.00, 1.05};
    const std::vector<double> est = {1.04, 1.09};
    const MatchCounts c = match_onsets(ref, est, 0.05);
    CHECK(c.tp == 2);
}

TEST_CASE("matching agrees with exhaustive search on random instances") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> t(0.0, 1.0);
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<double> ref(rng() % 9), est(rng() % 9);
        for (double& x : ref) x = t(rng);
        for (double& x : est) x = t(rng);
        std::sort(ref.begin(), ref.end());
        std::sort(est.begin(), est.end());
        const MatchCounts c = match_onsets(ref, est, 0.05);
        CHECK(static_cast<std::size_t>(c.tp) ==
              testutil::brute_force_matching(ref, est, 0.05));
    }
}

TEST_CASE("matching symmetry: swapping sides swaps precision and recall") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> t(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(3 + rng() % 10), b(3 + rng() % 10);
        for (double& x : a) x = t(rng);
        for (double& x : b) x = t(rng);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        const MatchCounts ab = match_onsets(a, b, 0.05);
        const MatchCounts ba = match_onsets(b, a, 0.05);
        const Prf pab = prf(ab.tp, ab.fp, ab.fn);
        const Prf pba = prf(ba.tp, ba.fp, ba.fn);
        CHECK(pab.precision == doctest::Approx(pba.recall));
        CHECK(pab.recall == doctest::Approx(pba.precision));
        CHECK(pab.f == doctest::Approx(pba.f));
    }
}

TEST_CASE("matched count is monotone in tolerance") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> t(0.0, 2.0);
    std::vector<double> ref(20), est(20);
    for (double& x : ref) x = t(rng);
    for (double& x : est) x = t(rng);
    std::sort(ref.begin(), ref.end());
    std::sort(est.begin(), est.end());
    long prev = 0;
    for (double tol : {0.005, 0.01, 0.02, 0.05, 0.1, 0.5}) {
        const long tp = match_onsets(ref, est, tol).tp;
        CHECK(tp >= prev);
        prev = tp;
    }
}

TEST_CASE("prf arithmetic") {
    const Prf a = prf(1, 0, 1);
    CHECK(a.precision == doctest::Approx(1.0));
    CHECK(a.recall == doctest::Approx(0.5));
    CHECK(a.f == doctest::Approx(0.6667).epsilon(1e-4));

    const Prf perfect = prf(17, 0, 0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f == 1.0);

    const Prf empty = prf(0, 0, 0);
    CHECK(empty.precision == 0.0);
    CHECK(empty.recall == 0.0);
    CHECK(empty.f == 0.0);
}

TEST_CASE("evaluate: identical transcriptions score 1.0 in every vocabulary") {
    std::vector<NoteEvent> notes;
    int v = 1;
    for (DrumClass7 c : kAllClasses7) {
        notes.push_back({0.25 * v, c, 30 + v});
        v++;
    }
    for (Vocabulary voc : {Vocabulary::FiveClass, Vocabulary::SevenClass,
                           Vocabulary::EightClass}) {
        const EvalReport r = evaluate(notes, notes, voc, 0.05);
        for (const auto& [label, res] : r.per_class) {
            if (res.counts.tp + res.counts.fp + res.counts.fn > 0) {
                CHECK(res.scores.f == doctest::Approx(1.0));
            }
        }
        CHECK(r.micro.scores.f == doctest::Approx(1.0));
        CHECK(r.velocity_pearson.value() == doctest::Approx(1.0));
    }
}

TEST_CASE("evaluate: unpredicted cowbell counts as misses in the 8-class vocabulary") {
    std::vector<EvalNote> ref = {{1.0, "CB", 90}, {2.0, "CB", 80}, {3.0, "CB", 70},
                                 {4.0, "KD", 100}};
    std::vector<EvalNote> est = {{4.0, "KD", 90}};
    const EvalReport r = evaluate(ref, est, Vocabulary::EightClass, 0.05);
    for (const auto& [label, res] : r.per_class) {
        if (label == "CB") {
            CHECK(res.counts.tp == 0);
            CHECK(res.counts.fn == 3);
            CHECK(res.scores.recall == 0.0);
        }
        if (label == "KD") CHECK(res.scores.f == doctest::Approx(1.0));
    }
}

TEST_CASE("evaluate: cowbell outside the 5- and 7-class vocabularies") {
    std::vector<EvalNote> ref = {{1.0, "CB", 90}};
    std::vector<EvalNote> est = {};
    CHECK_THROWS_AS(evaluate(ref, est, Vocabulary::SevenClass, 0.05), Error);
    CHECK_THROWS_AS(evaluate(ref, est, Vocabulary::FiveClass, 0.05), Error);
}

TEST_CASE("evaluate: classes never cross-match") {
    const std::vector<NoteEvent> ref = {{1.0, DrumClass7::Snare, 100}};
    const std::vector<NoteEvent> est = {{1.0, DrumClass7::Kick, 100}};
    const EvalReport r = evaluate(ref, est, Vocabulary::FiveClass, 0.05);
    for (const auto& [label, res] : r.per_class) {
        if (label == "SD") CHECK(res.counts.fn == 1);
        if (label == "KD") CHECK(res.counts.fp == 1);
        CHECK(res.counts.tp == 0);
    }
}

TEST_CASE("evaluate drops zero-velocity estimates before matching") {
    const std::vector<NoteEvent> ref = {{1.0, DrumClass7::Kick, 100}};
    const std::vector<NoteEvent> est = {{1.0, DrumClass7::Kick, 0},
                                        {5.0, DrumClass7::Kick, 0}};
    const EvalReport r = evaluate(ref, est, Vocabulary::SevenClass, 0.05);
    CHECK(r.micro.counts.tp == 0);
    CHECK(r.micro.counts.fp == 0); // the stray zero-velocity note is invisible
    CHECK(r.micro.counts.fn == 1);
}

TEST_CASE("micro counts are exact sums of per-class counts") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> t(0.0, 10.0);
    std::uniform_int_distribution<int> cls(0, 6);
    std::vector<NoteEvent> ref, est;
    for (int i = 0; i < 60; ++i) {
        ref.push_back({t(rng), static_cast<DrumClass7>(cls(rng)), 100});
        est.push_back({t(rng), static_cast<DrumClass7>(cls(rng)), 100});
    }
    auto by_time = [](const NoteEvent& a, const NoteEvent& b) { return a.time < b.time; };
    std::sort(ref.begin(), ref.end(), by_time);
    std::sort(est.begin(), est.end(), by_time);

    const EvalReport r = evaluate(ref, est, Vocabulary::SevenClass, 0.05);
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [label, res] : r.per_class) {
        tp += res.counts.tp;
        fp += res.counts.fp;
        fn += res.counts.fn;
    }
    CHECK(tp == r.micro.counts.tp);
    CHECK(fp == r.micro.counts.fp);
    CHECK(fn == r.micro.counts.fn);
}

TEST_CASE("report serialization keeps stable keys") {
    const std::vector<NoteEvent> notes = {{1.0, DrumClass7::Kick, 100}};
    const EvalReport r = evaluate(notes, notes, Vocabulary::FiveClass, 0.05);
    const std::string json = format_report_json(r);
    for (const char* key : {"\"class\"", "\"tp\"", "\"fp\"", "\"fn\"",
                            "\"precision\"", "\"recall\"", "\"f_measure\""}) {
        CHECK(json.find(key) != std::string::npos);
    }
    const std::string text = format_report_text(r);
    CHECK(text.find("micro") != std::string::npos);
    CHECK(text.find("macro") != std::string::npos);
}

} // TEST_SUITE
