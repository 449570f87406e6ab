#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drumrefine/events.hpp"

namespace drumrefine {

struct MatchCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

// Maximum bipartite matching between reference and estimate times where a
// pair may match iff |r - e| <= tolerance (closed window). Implemented with
// augmenting paths, equivalent to exhaustive maximum matching.
MatchCounts match_onsets(std::span<const double> reference,
                         std::span<const double> estimate, double tolerance);
std::vector<std::pair<std::size_t, std::size_t>> match_pairs(
    std::span<const double> reference, std::span<const double> estimate,
    double tolerance);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

// P = tp/(tp+fp), R = tp/(tp+fn), F = 2PR/(P+R); zero denominators yield 0.
Prf prf(long tp, long fp, long fn);

enum class Vocabulary { FiveClass = 5, SevenClass = 7, EightClass = 8 };
std::optional<Vocabulary> vocabulary_from_int(int n);
std::vector<std::string> vocabulary_labels(Vocabulary v);

// Evaluation-side event: label string so that reference-only classes
// (cowbell in the 8-class vocabulary) can be represented. velocity < 0
// means unknown (onset-only reference formats).
struct EvalNote {
    double time = 0.0;
    std::string label;
    int velocity = -1;
};

EvalNote to_eval_note(const NoteEvent& note);
std::vector<EvalNote> to_eval_notes(std::span<const NoteEvent> notes);

struct ClassResult {
    MatchCounts counts;
    Prf scores;
};

struct EvalReport {
    std::vector<std::pair<std::string, ClassResult>> per_class; // vocabulary order
    ClassResult micro; // P/R/F over summed counts
    Prf macro;         // unweighted mean over classes with any support
    std::vector<std::string> vocabulary;
    double tolerance = 0.05;
    // Pearson correlation of velocities over matched pairs where both sides
    // carry a velocity; absent when there are fewer than two such pairs.
    std::optional<double> velocity_pearson;
};

// Zero-velocity estimates are dropped before matching; labels are projected
// into the chosen vocabulary (HHC/HHO -> HH and CR/RD -> CY for 5-class);
// matching runs independently per class. A label that cannot be projected
// into the vocabulary raises Error(unknown_class_label).
EvalReport evaluate(std::span<const EvalNote> reference,
                    std::span<const EvalNote> estimate, Vocabulary vocabulary,
                    double tolerance);
EvalReport evaluate(std::span<const NoteEvent> reference,
                    std::span<const NoteEvent> estimate, Vocabulary vocabulary,
                    double tolerance);

std::string format_report_text(const EvalReport& report);
std::string format_report_json(const EvalReport& report);

} // namespace drumrefine
