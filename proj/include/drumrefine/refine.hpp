#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drumrefine/loudness.hpp"

namespace drumrefine {

using StemSet = std::map<StemClass, AudioClip>;

enum class VelocityFloorMode {
    Fixed,     // linear map over [velocity_floor_db, 0]
    GlobalMin, // lower bound = quietest above-floor frame across the group
};

enum class HihatThresholdMode {
    LinearRatio, // min/max of linear amplitudes vs hihat_sustain_ratio
    DbDrop,      // max - min in dB vs hihat_db_drop
};

// Every tunable of the refinement stage. Config files use "key = value"
// lines with these exact field names; the CLI exposes one override flag per
// field.
struct RefinementConfig {
    double velocity_window_seconds = 0.050;
    double velocity_floor_db = -48.0;
    double hihat_window_cap_seconds = 0.150;
    double hihat_sustain_ratio = 0.75;
    double refraction_lead_seconds = 1.0;
    double crash_peak_min_db = -24.0;
    double crash_peak_prominence_db = 6.0;
    double peak_onset_grace_seconds = 0.050;
    std::size_t rms_window_samples = 1024; // at 44.1 kHz; rescaled for 48 kHz
    double rms_hop_seconds = 0.010;
    double db_floor = -96.0;
    VelocityFloorMode velocity_floor_mode = VelocityFloorMode::Fixed;
    HihatThresholdMode hihat_threshold_mode = HihatThresholdMode::LinearRatio;
    double hihat_db_drop = 2.5;

    void validate() const; // throws Error(config_error)
};

RefinementConfig parse_config(std::string_view text);
RefinementConfig load_config(const std::filesystem::path& path);
bool apply_config_entry(RefinementConfig& cfg, std::string_view key,
                        std::string_view value); // false -> unknown key

// Non-overlapping half-open [start, end) spans during which a crash cannot
// re-trigger and cymbal onsets are reassigned to the ride.
struct RefractionIntervals {
    std::vector<std::pair<double, double>> intervals;
    bool contains(double t) const;
};

// Velocity from the window maximum of a group-normalized curve, mapped
// linearly from [floor_db, 0] dB onto [0, 127].
int estimate_velocity(const LoudnessCurve& curve, double onset_time,
                      const RefinementConfig& cfg);
int estimate_velocity(const LoudnessCurve& curve, double onset_time,
                      double window_seconds, double floor_db);

// Local maxima of the crash curve at or above crash_peak_min_db whose
// prominence (rise above the higher of the two flanking minima, measured
// between neighboring qualifying maxima or the curve ends) reaches
// crash_peak_prominence_db. Returns frame times, sorted.
std::vector<double> detect_crash_peaks(const LoudnessCurve& crash_curve,
                                       const RefinementConfig& cfg);

RefractionIntervals build_refraction_intervals(std::span<const double> peaks,
                                               double performance_end,
                                               const RefinementConfig& cfg);

// Crash if within the onset grace of a detected peak; Ride inside a
// refraction interval; otherwise the louder window wins, ties to Ride.
DrumClass7 classify_cymbal(double onset, const LoudnessCurve& crash_curve,
                           const LoudnessCurve& ride_curve,
                           const RefractionIntervals& refraction,
                           std::span<const double> peaks,
                           const RefinementConfig& cfg);

// Open when the loudness over [onset, onset + min(cap, gap to next hi-hat))
// sustains above the threshold fraction of its maximum.
DrumClass7 classify_hihat(double onset, std::optional<double> next_hihat_onset,
                          const LoudnessCurve& hihat_curve,
                          const RefinementConfig& cfg);

// Filtered/RMS/dB curves for all six stems, group-normalized.
CurveGroup build_stem_curves(const StemSet& stems, const RefinementConfig& cfg,
                             std::optional<double> reference_db = std::nullopt);

struct RefineResult {
    std::vector<NoteEvent> notes;     // sorted, zero-velocity notes dropped
    bool duration_mismatch = false;   // stem lengths differ by > 0.1 s
    std::vector<double> crash_peaks;  // diagnostics
};

RefineResult refine_transcription(std::span<const OnsetEvent> onsets,
                                  const StemSet& stems,
                                  const RefinementConfig& cfg);
RefineResult refine_with_curves(std::span<const OnsetEvent> onsets,
                                const CurveGroup& group,
                                const RefinementConfig& cfg);

} // namespace drumrefine
