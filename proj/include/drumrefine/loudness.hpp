#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "drumrefine/audio_io.hpp"
#include "drumrefine/events.hpp"

namespace drumrefine {

// Time series of windowed loudness values in dB. After group normalization
// the values are relative to the group peak (<= 0 dB except for a user
// supplied reference override). Frame i starts at i * hop_seconds and covers
// window_seconds of signal; silence clamps to floor_db.
struct LoudnessCurve {
    std::vector<double> values;
    double hop_seconds = 0.010;
    double window_seconds = 0.0;
    double floor_db = -96.0;

    std::size_t size() const { return values.size(); }
    double frame_time(std::size_t i) const { return static_cast<double>(i) * hop_seconds; }
    // Extent addressable by frame starts.
    double duration() const { return static_cast<double>(values.size()) * hop_seconds; }
};

// The six stem curves normalized against one shared reference level.
struct CurveGroup {
    std::map<StemClass, LoudnessCurve> curves;
    double normalization_reference_db = 0.0;
};

inline constexpr double kDefaultFloorDb = -96.0;

// ReplayGain equal-loudness cascade: 10th-order Yulewalk IIR followed by a
// 2nd-order Butterworth high-pass, rate-specific published coefficients.
// Filter state starts at zero; output length equals input length.
AudioClip equal_loudness_filter(const AudioClip& clip);

// Complex-frequency-domain magnitude of the cascade, evaluated directly from
// the coefficient tables. Independent of the sample-by-sample filter path.
double equal_loudness_magnitude(int sample_rate, double frequency_hz);

// Windowed RMS. Frame i covers [i*hop, i*hop + window) samples; every frame
// whose start lies inside the clip is emitted, the trailing partial frames
// zero-padded. Full-frame count is floor((n - window)/hop) + 1.
std::vector<double> rms_curve(const AudioClip& clip, std::size_t window_samples,
                              double hop_seconds);

// v -> max(20*log10(v), floor_db); exact zeros map to floor_db.
std::vector<double> to_decibels(std::span<const double> rms, double floor_db);

// Reference = override if supplied, otherwise the peak dB across every value
// of every curve. The same reference is subtracted from every curve and the
// floor re-clamped. Curves must share hop/window parameters.
CurveGroup normalize_group(std::map<StemClass, LoudnessCurve> curves,
                           std::optional<double> reference_db = std::nullopt);

// Values of frames whose start time lies in [t_start, t_end), clipped to the
// curve. A selection that comes up empty (query outside the curve, or a
// range narrower than the hop straddling no frame start) falls back to the
// single frame nearest t_start.
std::span<const double> curve_window(const LoudnessCurve& curve, double t_start,
                                     double t_end);

// Convenience: equal-loudness filter, RMS, dB conversion packaged into a
// curve. window_samples_44k is rescaled for 48 kHz input to preserve the
// temporal extent.
LoudnessCurve compute_loudness_curve(const AudioClip& clip,
                                     std::size_t window_samples_44k,
                                     double hop_seconds, double floor_db);

std::size_t scaled_window_samples(std::size_t window_samples_44k, int sample_rate);

} // namespace drumrefine
