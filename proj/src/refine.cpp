#include "drumrefine/refine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace drumrefine {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void config_fail(const std::string& what) {
    throw Error(Errc::config_error, what);
}

double max_in_window(const LoudnessCurve& curve, double t_start, double t_end) {
    const auto window = curve_window(curve, t_start, t_end);
    double m = -std::numeric_limits<double>::infinity();
    for (double v : window) m = std::max(m, v);
    return m;
}

// Lower velocity bound for GlobalMin mode: the quietest above-floor frame in
// the group. Falls back to the configured fixed floor for all-silent groups.
double observed_floor_db(const CurveGroup& group, const RefinementConfig& cfg) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [stem, curve] : group.curves) {
        for (double v : curve.values) {
            if (v > curve.floor_db) lo = std::min(lo, v);
        }
    }
    if (!std::isfinite(lo) || lo >= 0.0) return cfg.velocity_floor_db;
    return lo;
}

} // namespace

void RefinementConfig::validate() const {
    if (velocity_window_seconds <= 0.0) config_fail("velocity_window_seconds must be positive");
    if (hihat_window_cap_seconds <= 0.0) config_fail("hihat_window_cap_seconds must be positive");
    if (hihat_sustain_ratio <= 0.0 || hihat_sustain_ratio >= 1.0) {
        config_fail("hihat_sustain_ratio must lie in (0, 1)");
    }
    if (refraction_lead_seconds <= 0.0) config_fail("refraction_lead_seconds must be positive");
    if (peak_onset_grace_seconds <= 0.0) config_fail("peak_onset_grace_seconds must be positive");
    if (crash_peak_prominence_db <= 0.0) config_fail("crash_peak_prominence_db must be positive");
    if (rms_window_samples < 1) config_fail("rms_window_samples must be >= 1");
    if (rms_hop_seconds <= 0.0) config_fail("rms_hop_seconds must be positive");
    if (hihat_db_drop <= 0.0) config_fail("hihat_db_drop must be positive");
    if (velocity_floor_db <= db_floor) config_fail("velocity_floor_db must be above db_floor");
}

bool apply_config_entry(RefinementConfig& cfg, std::string_view key,
                        std::string_view value) {
    const std::string v(trim(value));
    auto as_double = [&](double& field) {
        try {
            std::size_t used = 0;
            const double parsed = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            field = parsed;
        } catch (const std::exception&) {
            config_fail("bad numeric value '" + v + "' for " + std::string(key));
        }
    };

    if (key == "velocity_window_seconds") as_double(cfg.velocity_window_seconds);
    else if (key == "velocity_floor_db") as_double(cfg.velocity_floor_db);
    else if (key == "hihat_window_cap_seconds") as_double(cfg.hihat_window_cap_seconds);
    else if (key == "hihat_sustain_ratio") as_double(cfg.hihat_sustain_ratio);
    else if (key == "refraction_lead_seconds") as_double(cfg.refraction_lead_seconds);
    else if (key == "crash_peak_min_db") as_double(cfg.crash_peak_min_db);
    else if (key == "crash_peak_prominence_db") as_double(cfg.crash_peak_prominence_db);
    else if (key == "peak_onset_grace_seconds") as_double(cfg.peak_onset_grace_seconds);
    else if (key == "rms_window_samples") {
        double d = 0;
        as_double(d);
        if (d < 1 || d != std::floor(d)) config_fail("rms_window_samples must be a positive integer");
        cfg.rms_window_samples = static_cast<std::size_t>(d);
    } else if (key == "rms_hop_seconds") as_double(cfg.rms_hop_seconds);
    else if (key == "db_floor") as_double(cfg.db_floor);
    else if (key == "hihat_db_drop") as_double(cfg.hihat_db_drop);
    else if (key == "velocity_floor_mode") {
        if (v == "fixed") cfg.velocity_floor_mode = VelocityFloorMode::Fixed;
        else if (v == "global-min") cfg.velocity_floor_mode = VelocityFloorMode::GlobalMin;
        else config_fail("velocity_floor_mode must be 'fixed' or 'global-min'");
    } else if (key == "hihat_threshold_mode") {
        if (v == "linear") cfg.hihat_threshold_mode = HihatThresholdMode::LinearRatio;
        else if (v == "db-drop") cfg.hihat_threshold_mode = HihatThresholdMode::DbDrop;
        else config_fail("hihat_threshold_mode must be 'linear' or 'db-drop'");
    } else {
        return false;
    }
    return true;
}

RefinementConfig parse_config(std::string_view text) {
    RefinementConfig cfg;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(
            start, nl == std::string_view::npos ? text.size() - start : nl - start);
        line_no++;
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            config_fail("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (!apply_config_entry(cfg, key, value)) {
            config_fail("config line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RefinementConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::config_error, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

bool RefractionIntervals::contains(double t) const {
    for (const auto& [start, end] : intervals) {
        if (t >= start && t < end) return true;
        if (t < start) break; // sorted
    }
    return false;
}

int estimate_velocity(const LoudnessCurve& curve, double onset_time,
                      double window_seconds, double floor_db) {
    const double half = window_seconds / 2.0;
    const double m = max_in_window(curve, onset_time - half, onset_time + half);
    const double scaled = 127.0 * (m - floor_db) / (0.0 - floor_db);
    return static_cast<int>(std::clamp<long>(std::lround(scaled), 0, 127));
}

int estimate_velocity(const LoudnessCurve& curve, double onset_time,
                      const RefinementConfig& cfg) {
    return estimate_velocity(curve, onset_time, cfg.velocity_window_seconds,
                             cfg.velocity_floor_db);
}

std::vector<double> detect_crash_peaks(const LoudnessCurve& crash_curve,
                                       const RefinementConfig& cfg) {
    const auto& v = crash_curve.values;
    const std::size_t n = v.size();

    // Local maxima above the absolute threshold, then a prominence gate:
    // each flank extends to the nearest strictly higher frame (so to the
    // neighboring higher peak) or the curve end, and the flank minimum is
    // taken over that stretch. Decay-tail ripples next to a real hit get
    // near-zero prominence this way; the hit itself keeps its full rise.
    std::vector<double> peaks;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] < cfg.crash_peak_min_db) continue;
        if (i > 0 && v[i - 1] >= v[i]) continue; // plateaus count at their first frame
        std::size_t plateau_end = i;
        while (plateau_end + 1 < n && v[plateau_end + 1] == v[i]) ++plateau_end;
        if (plateau_end + 1 < n && v[plateau_end + 1] > v[i]) continue;

        double left_base = v[i];
        bool left_any = false;
        for (std::size_t k = i; k-- > 0;) {
            if (v[k] > v[i]) break;
            left_base = left_any ? std::min(left_base, v[k]) : v[k];
            left_any = true;
        }
        if (!left_any) left_base = crash_curve.floor_db;

        double right_base = v[i];
        bool right_any = false;
        for (std::size_t k = plateau_end + 1; k < n; ++k) {
            if (v[k] > v[i]) break;
            right_base = right_any ? std::min(right_base, v[k]) : v[k];
            right_any = true;
        }
        if (!right_any) right_base = crash_curve.floor_db;

        if (v[i] - std::max(left_base, right_base) >= cfg.crash_peak_prominence_db) {
            peaks.push_back(crash_curve.frame_time(i));
        }
    }
    return peaks;
}

RefractionIntervals build_refraction_intervals(std::span<const double> peaks,
                                               double performance_end,
                                               const RefinementConfig& cfg) {
    RefractionIntervals out;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const double start = peaks[i] + cfg.peak_onset_grace_seconds;
        const double end = i + 1 < peaks.size()
                               ? std::max(start, peaks[i + 1] - cfg.refraction_lead_seconds)
                               : performance_end;
        if (end > start) out.intervals.emplace_back(start, end);
    }
    return out;
}

DrumClass7 classify_cymbal(double onset, const LoudnessCurve& crash_curve,
                           const LoudnessCurve& ride_curve,
                           const RefractionIntervals& refraction,
                           std::span<const double> peaks,
                           const RefinementConfig& cfg) {
    for (double p : peaks) {
        if (std::abs(onset - p) <= cfg.peak_onset_grace_seconds) {
            return DrumClass7::Crash; // the hit that produced the peak
        }
    }
    if (refraction.contains(onset)) return DrumClass7::Ride;

    const double half = cfg.velocity_window_seconds / 2.0;
    const double crash_db = max_in_window(crash_curve, onset - half, onset + half);
    const double ride_db = max_in_window(ride_curve, onset - half, onset + half);
    return crash_db > ride_db ? DrumClass7::Crash : DrumClass7::Ride;
}

DrumClass7 classify_hihat(double onset, std::optional<double> next_hihat_onset,
                          const LoudnessCurve& hihat_curve,
                          const RefinementConfig& cfg) {
    double extent = cfg.hihat_window_cap_seconds;
    if (next_hihat_onset) {
        extent = std::min(extent, *next_hihat_onset - onset);
    }
    if (extent <= 0.0) return DrumClass7::HiHatClosed;

    const auto window = curve_window(hihat_curve, onset, onset + extent);
    double min_db = std::numeric_limits<double>::infinity();
    double max_db = -std::numeric_limits<double>::infinity();
    for (double v : window) {
        min_db = std::min(min_db, v);
        max_db = std::max(max_db, v);
    }
    if (window.empty() || max_db <= hihat_curve.floor_db) {
        return DrumClass7::HiHatClosed;
    }

    if (cfg.hihat_threshold_mode == HihatThresholdMode::DbDrop) {
        return (max_db - min_db) < cfg.hihat_db_drop ? DrumClass7::HiHatOpen
                                                     : DrumClass7::HiHatClosed;
    }
    // Sustain ratio on the linear amplitude scale.
    const double ratio = std::pow(10.0, (min_db - max_db) / 20.0);
    return ratio > cfg.hihat_sustain_ratio ? DrumClass7::HiHatOpen
                                           : DrumClass7::HiHatClosed;
}

CurveGroup build_stem_curves(const StemSet& stems, const RefinementConfig& cfg,
                             std::optional<double> reference_db) {
    for (StemClass stem : kAllStems) {
        if (!stems.count(stem)) {
            throw Error(Errc::io_error,
                        "missing stem: " + std::string(label_of(stem)));
        }
    }
    const int rate = stems.begin()->second.sample_rate;
    for (const auto& [stem, clip] : stems) {
        if (!is_supported_sample_rate(clip.sample_rate)) {
            throw Error(Errc::unsupported_sample_rate,
                        std::string(label_of(stem)) + " stem: unsupported sample rate " +
                            std::to_string(clip.sample_rate));
        }
        if (clip.sample_rate != rate) {
            throw Error(Errc::unsupported_sample_rate,
                        "stems have mixed sample rates");
        }
    }

    std::map<StemClass, LoudnessCurve> curves;
    for (const auto& [stem, clip] : stems) {
        curves.emplace(stem, compute_loudness_curve(clip, cfg.rms_window_samples,
                                                    cfg.rms_hop_seconds, cfg.db_floor));
    }
    return normalize_group(std::move(curves), reference_db);
}

RefineResult refine_with_curves(std::span<const OnsetEvent> onsets,
                                const CurveGroup& group,
                                const RefinementConfig& cfg) {
    const LoudnessCurve& crash = group.curves.at(StemClass::Crash);
    const LoudnessCurve& ride = group.curves.at(StemClass::Ride);
    const LoudnessCurve& hihat = group.curves.at(StemClass::HiHat);

    double performance_end = 0.0;
    for (const auto& [stem, curve] : group.curves) {
        performance_end = std::max(performance_end, curve.duration());
    }

    RefineResult result;
    result.crash_peaks = detect_crash_peaks(crash, cfg);
    const RefractionIntervals refraction =
        build_refraction_intervals(result.crash_peaks, performance_end, cfg);

    const double velocity_floor =
        cfg.velocity_floor_mode == VelocityFloorMode::GlobalMin
            ? observed_floor_db(group, cfg)
            : cfg.velocity_floor_db;

    // Next hi-hat onset per hi-hat event, for the decay classification window.
    std::vector<std::optional<double>> next_hihat(onsets.size());
    std::optional<double> upcoming;
    for (std::size_t i = onsets.size(); i-- > 0;) {
        if (onsets[i].class5 == DrumClass5::HiHat) {
            next_hihat[i] = upcoming;
            upcoming = onsets[i].time;
        }
    }

    result.notes.reserve(onsets.size());
    for (std::size_t i = 0; i < onsets.size(); ++i) {
        const OnsetEvent& onset = onsets[i];
        DrumClass7 cls = DrumClass7::Kick;
        switch (onset.class5) {
            case DrumClass5::Kick: cls = DrumClass7::Kick; break;
            case DrumClass5::Snare: cls = DrumClass7::Snare; break;
            case DrumClass5::Toms: cls = DrumClass7::Toms; break;
            case DrumClass5::HiHat:
                cls = classify_hihat(onset.time, next_hihat[i], hihat, cfg);
                break;
            case DrumClass5::Cymbals:
                cls = classify_cymbal(onset.time, crash, ride, refraction,
                                      result.crash_peaks, cfg);
                break;
        }

        const LoudnessCurve& curve = group.curves.at(stem_for_class(cls));
        const int velocity = estimate_velocity(curve, onset.time,
                                               cfg.velocity_window_seconds,
                                               velocity_floor);
        if (velocity <= 0) continue; // inaudible against the stems
        result.notes.push_back({onset.time, cls, velocity});
    }

    std::stable_sort(result.notes.begin(), result.notes.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.time < b.time; });
    return result;
}

RefineResult refine_transcription(std::span<const OnsetEvent> onsets,
                                  const StemSet& stems,
                                  const RefinementConfig& cfg) {
    cfg.validate();

    double shortest = std::numeric_limits<double>::infinity();
    double longest = 0.0;
    for (const auto& [stem, clip] : stems) {
        shortest = std::min(shortest, clip.duration_seconds());
        longest = std::max(longest, clip.duration_seconds());
    }

    RefineResult result;
    try {
        const CurveGroup group = build_stem_curves(stems, cfg);
        result = refine_with_curves(onsets, group, cfg);
    } catch (const Error& e) {
        if (e.code() != Errc::all_curves_at_floor) throw;
        // Fully silent stems: every onset estimates to zero velocity and is
        // dropped, leaving an empty transcription.
    }
    result.duration_mismatch = stems.empty() ? false : (longest - shortest) > 0.1;
    return result;
}

} // namespace drumrefine
