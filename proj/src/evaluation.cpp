#include "drumrefine/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "json.hpp"

namespace drumrefine {
namespace {

// Kuhn's augmenting-path matching over the interval graph where reference i
// may pair with estimate j iff |r_i - e_j| <= tolerance.
struct Matcher {
    std::span<const double> ref;
    std::span<const double> est;
    double tol;
    std::vector<long> est_match;  // est index -> ref index or -1
    std::vector<char> visited;

    std::pair<std::size_t, std::size_t> candidates(double t) const {
        const auto lo = std::lower_bound(est.begin(), est.end(), t - tol) - est.begin();
        const auto hi = std::upper_bound(est.begin(), est.end(), t + tol) - est.begin();
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    }

    bool augment(std::size_t i) {
        const auto [lo, hi] = candidates(ref[i]);
        for (std::size_t j = lo; j < hi; ++j) {
            if (visited[j]) continue;
            visited[j] = 1;
            if (est_match[j] < 0 || augment(static_cast<std::size_t>(est_match[j]))) {
                est_match[j] = static_cast<long>(i);
                return true;
            }
        }
        return false;
    }
};

double pearson(const std::vector<std::pair<double, double>>& xy) {
    const double n = static_cast<double>(xy.size());
    double sx = 0, sy = 0;
    for (const auto& [x, y] : xy) {
        sx += x;
        sy += y;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& [x, y] : xy) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// Projects an event label into the given vocabulary; nullopt only for labels
// no vocabulary knows.
std::optional<std::string> project_label(const std::string& label, Vocabulary v) {
    static const std::map<std::string, std::string> to5 = {
        {"KD", "KD"},  {"SD", "SD"}, {"HH", "HH"},  {"HHC", "HH"}, {"HHO", "HH"},
        {"TT", "TT"},  {"CY", "CY"}, {"CR", "CY"},  {"RD", "CY"}};
    if (v == Vocabulary::FiveClass) {
        const auto it = to5.find(label);
        if (it == to5.end()) return std::nullopt;
        return it->second;
    }
    for (const std::string& known : vocabulary_labels(v)) {
        if (label == known) return label;
    }
    return std::nullopt;
}

} // namespace

std::vector<std::pair<std::size_t, std::size_t>> match_pairs(
    std::span<const double> reference, std::span<const double> estimate,
    double tolerance) {
    Matcher m{reference, estimate, tolerance,
              std::vector<long>(estimate.size(), -1),
              std::vector<char>(estimate.size(), 0)};
    for (std::size_t i = 0; i < reference.size(); ++i) {
        std::fill(m.visited.begin(), m.visited.end(), 0);
        m.augment(i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t j = 0; j < estimate.size(); ++j) {
        if (m.est_match[j] >= 0) {
            pairs.emplace_back(static_cast<std::size_t>(m.est_match[j]), j);
        }
    }
    return pairs;
}

MatchCounts match_onsets(std::span<const double> reference,
                         std::span<const double> estimate, double tolerance) {
    const auto pairs = match_pairs(reference, estimate, tolerance);
    MatchCounts c;
    c.tp = static_cast<long>(pairs.size());
    c.fp = static_cast<long>(estimate.size()) - c.tp;
    c.fn = static_cast<long>(reference.size()) - c.tp;
    return c;
}

Prf prf(long tp, long fp, long fn) {
    Prf r;
    r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f = (r.precision + r.recall) > 0.0
              ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
              : 0.0;
    return r;
}

std::optional<Vocabulary> vocabulary_from_int(int n) {
    switch (n) {
        case 5: return Vocabulary::FiveClass;
        case 7: return Vocabulary::SevenClass;
        case 8: return Vocabulary::EightClass;
        default: return std::nullopt;
    }
}

std::vector<std::string> vocabulary_labels(Vocabulary v) {
    switch (v) {
        case Vocabulary::FiveClass: return {"KD", "SD", "HH", "TT", "CY"};
        case Vocabulary::SevenClass:
            return {"KD", "SD", "HHC", "HHO", "TT", "CR", "RD"};
        case Vocabulary::EightClass:
            return {"KD", "SD", "HHC", "HHO", "TT", "CR", "RD", "CB"};
    }
    return {};
}

EvalNote to_eval_note(const NoteEvent& note) {
    return {note.time, std::string(label_of(note.class7)), note.velocity};
}

std::vector<EvalNote> to_eval_notes(std::span<const NoteEvent> notes) {
    std::vector<EvalNote> out;
    out.reserve(notes.size());
    for (const NoteEvent& n : notes) out.push_back(to_eval_note(n));
    return out;
}

EvalReport evaluate(std::span<const EvalNote> reference,
                    std::span<const EvalNote> estimate, Vocabulary vocabulary,
                    double tolerance) {
    struct PerClass {
        std::vector<double> ref_times, est_times;
        std::vector<int> ref_vels, est_vels;
    };
    std::map<std::string, PerClass> buckets;
    const std::vector<std::string> labels = vocabulary_labels(vocabulary);
    for (const std::string& l : labels) buckets[l];

    auto add = [&](const EvalNote& n, bool is_ref) {
        const auto projected = project_label(n.label, vocabulary);
        if (!projected) {
            throw Error(Errc::unknown_class_label,
                        "label '" + n.label + "' is outside the " +
                            std::to_string(static_cast<int>(vocabulary)) +
                            "-class vocabulary");
        }
        PerClass& b = buckets[*projected];
        if (is_ref) {
            b.ref_times.push_back(n.time);
            b.ref_vels.push_back(n.velocity);
        } else {
            b.est_times.push_back(n.time);
            b.est_vels.push_back(n.velocity);
        }
    };
    for (const EvalNote& n : reference) add(n, true);
    for (const EvalNote& n : estimate) {
        if (n.velocity == 0) continue; // zero-velocity estimates are omitted
        add(n, false);
    }

    EvalReport report;
    report.vocabulary = labels;
    report.tolerance = tolerance;

    MatchCounts total;
    double macro_p = 0, macro_r = 0, macro_f = 0;
    int supported_classes = 0;
    std::vector<std::pair<double, double>> velocity_pairs;

    for (const std::string& label : labels) {
        PerClass& b = buckets[label];
        // Inputs may be unsorted; matching expects sorted timelines.
        std::vector<std::size_t> ref_order(b.ref_times.size()), est_order(b.est_times.size());
        for (std::size_t i = 0; i < ref_order.size(); ++i) ref_order[i] = i;
        for (std::size_t i = 0; i < est_order.size(); ++i) est_order[i] = i;
        std::stable_sort(ref_order.begin(), ref_order.end(), [&](std::size_t a, std::size_t c) {
            return b.ref_times[a] < b.ref_times[c];
        });
        std::stable_sort(est_order.begin(), est_order.end(), [&](std::size_t a, std::size_t c) {
            return b.est_times[a] < b.est_times[c];
        });
        std::vector<double> ref_sorted(ref_order.size()), est_sorted(est_order.size());
        for (std::size_t i = 0; i < ref_order.size(); ++i) ref_sorted[i] = b.ref_times[ref_order[i]];
        for (std::size_t i = 0; i < est_order.size(); ++i) est_sorted[i] = b.est_times[est_order[i]];

        const auto pairs = match_pairs(ref_sorted, est_sorted, tolerance);
        ClassResult res;
        res.counts.tp = static_cast<long>(pairs.size());
        res.counts.fp = static_cast<long>(est_sorted.size()) - res.counts.tp;
        res.counts.fn = static_cast<long>(ref_sorted.size()) - res.counts.tp;
        res.scores = prf(res.counts.tp, res.counts.fp, res.counts.fn);
        report.per_class.emplace_back(label, res);

        total.tp += res.counts.tp;
        total.fp += res.counts.fp;
        total.fn += res.counts.fn;
        if (res.counts.tp + res.counts.fp + res.counts.fn > 0) {
            supported_classes++;
            macro_p += res.scores.precision;
            macro_r += res.scores.recall;
            macro_f += res.scores.f;
        }

        for (const auto& [ri, ei] : pairs) {
            const int rv = b.ref_vels[ref_order[ri]];
            const int ev = b.est_vels[est_order[ei]];
            if (rv >= 0 && ev >= 0) {
                velocity_pairs.emplace_back(static_cast<double>(rv),
                                            static_cast<double>(ev));
            }
        }
    }

    report.micro.counts = total;
    report.micro.scores = prf(total.tp, total.fp, total.fn);
    if (supported_classes > 0) {
        report.macro = {macro_p / supported_classes, macro_r / supported_classes,
                        macro_f / supported_classes};
    }
    if (velocity_pairs.size() >= 2) {
        report.velocity_pearson = pearson(velocity_pairs);
    }
    return report;
}

EvalReport evaluate(std::span<const NoteEvent> reference,
                    std::span<const NoteEvent> estimate, Vocabulary vocabulary,
                    double tolerance) {
    const auto ref = to_eval_notes(reference);
    const auto est = to_eval_notes(estimate);
    return evaluate(ref, est, vocabulary, tolerance);
}

std::string format_report_text(const EvalReport& report) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s %6s %6s %6s %10s %8s %10s\n", "class",
                  "tp", "fp", "fn", "precision", "recall", "f-measure");
    out += buf;
    auto row = [&](const std::string& name, const ClassResult& r) {
        std::snprintf(buf, sizeof buf, "%-6s %6ld %6ld %6ld %10.3f %8.3f %10.3f\n",
                      name.c_str(), r.counts.tp, r.counts.fp, r.counts.fn,
                      r.scores.precision, r.scores.recall, r.scores.f);
        out += buf;
    };
    for (const auto& [label, res] : report.per_class) row(label, res);
    row("micro", report.micro);
    std::snprintf(buf, sizeof buf, "%-6s %6s %6s %6s %10.3f %8.3f %10.3f\n", "macro",
                  "-", "-", "-", report.macro.precision, report.macro.recall,
                  report.macro.f);
    out += buf;
    if (report.velocity_pearson) {
        std::snprintf(buf, sizeof buf, "velocity pearson: %.4f\n",
                      *report.velocity_pearson);
        out += buf;
    }
    return out;
}

std::string format_report_json(const EvalReport& report) {
    nlohmann::json j;
    j["vocabulary"] = report.vocabulary;
    j["tolerance"] = report.tolerance;
    j["classes"] = nlohmann::json::array();
    for (const auto& [label, r] : report.per_class) {
        j["classes"].push_back({{"class", label},
                                {"tp", r.counts.tp},
                                {"fp", r.counts.fp},
                                {"fn", r.counts.fn},
                                {"precision", r.scores.precision},
                                {"recall", r.scores.recall},
                                {"f_measure", r.scores.f}});
    }
    j["micro"] = {{"tp", report.micro.counts.tp},
                  {"fp", report.micro.counts.fp},
                  {"fn", report.micro.counts.fn},
                  {"precision", report.micro.scores.precision},
                  {"recall", report.micro.scores.recall},
                  {"f_measure", report.micro.scores.f}};
    j["macro"] = {{"precision", report.macro.precision},
                  {"recall", report.macro.recall},
                  {"f_measure", report.macro.f}};
    if (report.velocity_pearson) {
        j["velocity_pearson"] = *report.velocity_pearson;
    } else {
        j["velocity_pearson"] = nullptr;
    }
    return j.dump(2) + "\n";
}

} // namespace drumrefine
