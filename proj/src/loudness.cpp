#include "drumrefine/loudness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace drumrefine {
namespace {

// Published ReplayGain equal-loudness coefficients: 10th-order Yulewalk IIR
// and 2nd-order Butterworth high-pass, one row per supported sample rate.
struct IirCoefficients {
    std::array<double, 11> b;
    std::array<double, 10> a; // a1..a10, a0 = 1
};

struct BiquadCoefficients {
    std::array<double, 3> b;
    std::array<double, 2> a; // a1, a2
};

constexpr IirCoefficients kYule44100 = {
    {0.05418656406430, -0.02911007808948, -0.00848709379851, -0.00851165645469,
     -0.00834990904936, 0.02245293253339, -0.02596338512915, 0.01624864962975,
     -0.00240879051584, 0.00674613682247, -0.00187763777362},
    {-3.47845948550071, 6.36317777566148, -8.54751527471874, 9.47693607801280,
     -8.81498681370155, 6.85401540936998, -4.39470996079559, 2.19611684890774,
     -0.75104302451432, 0.13149317958808}};

constexpr IirCoefficients kYule48000 = {
    {0.03857599435200, -0.02160367184185, -0.00123395316851, -0.00009291677959,
     -0.01655260341619, 0.02161526843274, -0.02074045215285, 0.00594298065125,
     0.00306428023191, 0.00012025322027, 0.00288463683916},
    {-3.84664617118067, 7.81501653005538, -11.34170355132042, 13.05504219327545,
     -12.28759895145294, 9.48293806319790, -5.87257861775999, 2.75465861874613,
     -0.86984376593551, 0.13919314567432}};

constexpr BiquadCoefficients kButter44100 = {
    {0.98500175787242, -1.97000351574484, 0.98500175787242},
    {-1.96977855582618, 0.97022847566350}};

constexpr BiquadCoefficients kButter48000 = {
    {0.98621192462708, -1.97242384925416, 0.98621192462708},
    {-1.97223372919527, 0.97261396931306}};

const IirCoefficients& yule_for(int rate) {
    return rate == 48000 ? kYule48000 : kYule44100;
}

const BiquadCoefficients& butter_for(int rate) {
    return rate == 48000 ? kButter48000 : kButter44100;
}

// Direct form I, zero initial state.
template <std::size_t NB, std::size_t NA>
std::vector<double> filter(const std::array<double, NB>& b,
                           const std::array<double, NA>& a,
                           const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < NB && k <= n; ++k) acc += b[k] * x[n - k];
        for (std::size_t k = 1; k <= NA && k <= n; ++k) acc -= a[k - 1] * y[n - k];
        y[n] = acc;
    }
    return y;
}

template <std::size_t NB, std::size_t NA>
std::complex<double> transfer_at(const std::array<double, NB>& b,
                                 const std::array<double, NA>& a, double omega) {
    const std::complex<double> z_inv = std::exp(std::complex<double>(0.0, -omega));
    std::complex<double> num = 0.0, den = 1.0;
    std::complex<double> zp = 1.0;
    for (std::size_t k = 0; k < NB; ++k) {
        num += b[k] * zp;
        if (k < NA) den += a[k] * zp * z_inv;
        zp *= z_inv;
    }
    return num / den;
}

} // namespace

AudioClip equal_loudness_filter(const AudioClip& clip) {
    if (!is_supported_sample_rate(clip.sample_rate)) {
        throw Error(Errc::unsupported_sample_rate,
                    "equal-loudness filter needs 44100 or 48000 Hz, got " +
                        std::to_string(clip.sample_rate));
    }
    const auto& yule = yule_for(clip.sample_rate);
    const auto& butter = butter_for(clip.sample_rate);

    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples = filter(butter.b, butter.a, filter(yule.b, yule.a, clip.samples));
    return out;
}

double equal_loudness_magnitude(int sample_rate, double frequency_hz) {
    if (!is_supported_sample_rate(sample_rate)) {
        throw Error(Errc::unsupported_sample_rate,
                    "unsupported sample rate: " + std::to_string(sample_rate));
    }
    const double omega = 2.0 * M_PI * frequency_hz / sample_rate;
    const auto& yule = yule_for(sample_rate);
    const auto& butter = butter_for(sample_rate);
    return std::abs(transfer_at(yule.b, yule.a, omega) *
                    transfer_at(butter.b, butter.a, omega));
}

std::vector<double> rms_curve(const AudioClip& clip, std::size_t window_samples,
                              double hop_seconds) {
    if (clip.empty()) throw Error(Errc::empty_clip, "cannot window an empty clip");
    if (window_samples < 1) throw std::invalid_argument("window_samples must be >= 1");
    if (hop_seconds <= 0.0) throw std::invalid_argument("hop_seconds must be positive");

    const auto hop = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(hop_seconds * clip.sample_rate)));
    const std::size_t n = clip.samples.size();

    std::vector<double> out;
    out.reserve(n / hop + 1);
    for (std::size_t start = 0; start < n; start += hop) {
        const std::size_t end = std::min(start + window_samples, n);
        double sum = 0.0;
        for (std::size_t i = start; i < end; ++i) sum += clip.samples[i] * clip.samples[i];
        // Trailing partial windows count as zero-padded: divide by the full
        // window length so late frames stay addressable.
        out.push_back(std::sqrt(sum / static_cast<double>(window_samples)));
    }
    return out;
}

std::vector<double> to_decibels(std::span<const double> rms, double floor_db) {
    std::vector<double> out(rms.size());
    for (std::size_t i = 0; i < rms.size(); ++i) {
        out[i] = rms[i] > 0.0 ? std::max(20.0 * std::log10(rms[i]), floor_db)
                              : floor_db;
    }
    return out;
}

CurveGroup normalize_group(std::map<StemClass, LoudnessCurve> curves,
                           std::optional<double> reference_db) {
    if (curves.empty()) {
        throw Error(Errc::all_curves_at_floor, "no curves to normalize");
    }
    const auto& first = curves.begin()->second;
    for (const auto& [stem, curve] : curves) {
        if (curve.hop_seconds != first.hop_seconds ||
            curve.window_seconds != first.window_seconds) {
            throw std::invalid_argument("curves must share hop and window parameters");
        }
    }

    double reference;
    if (reference_db) {
        reference = *reference_db;
    } else {
        double peak = -std::numeric_limits<double>::infinity();
        bool any_above_floor = false;
        for (const auto& [stem, curve] : curves) {
            for (double v : curve.values) {
                peak = std::max(peak, v);
                any_above_floor = any_above_floor || v > curve.floor_db;
            }
        }
        if (!any_above_floor) {
            throw Error(Errc::all_curves_at_floor,
                        "all stems silent: no usable group peak");
        }
        reference = peak;
    }

    CurveGroup group;
    group.normalization_reference_db = reference;
    for (auto& [stem, curve] : curves) {
        for (double& v : curve.values) {
            v = std::max(v - reference, curve.floor_db);
        }
        group.curves.emplace(stem, std::move(curve));
    }
    return group;
}

std::span<const double> curve_window(const LoudnessCurve& curve, double t_start,
                                     double t_end) {
    if (curve.values.empty()) return {};
    if (t_start >= t_end) throw std::invalid_argument("t_start must be < t_end");

    const double hop = curve.hop_seconds;
    const auto n = static_cast<long long>(curve.values.size());

    // Frame indices whose start time lies in [t_start, t_end).
    long long first = static_cast<long long>(std::ceil(t_start / hop - 1e-9));
    long long last = static_cast<long long>(std::ceil(t_end / hop - 1e-9)); // exclusive
    first = std::max(first, 0LL);
    last = std::min(last, n);

    if (first >= last) {
        // Nothing selected: nearest single frame to the query start.
        long long idx = std::clamp<long long>(std::llround(t_start / hop), 0, n - 1);
        return std::span<const double>(curve.values.data() + idx, 1);
    }
    return std::span<const double>(curve.values.data() + first,
                                   static_cast<std::size_t>(last - first));
}

std::size_t scaled_window_samples(std::size_t window_samples_44k, int sample_rate) {
    if (sample_rate == 44100) return window_samples_44k;
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(window_samples_44k) * sample_rate / 44100.0));
}

LoudnessCurve compute_loudness_curve(const AudioClip& clip,
                                     std::size_t window_samples_44k,
                                     double hop_seconds, double floor_db) {
    const std::size_t window = scaled_window_samples(window_samples_44k, clip.sample_rate);
    const AudioClip filtered = equal_loudness_filter(clip);
    const std::vector<double> rms = rms_curve(filtered, window, hop_seconds);

    const auto hop_samples = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(hop_seconds * clip.sample_rate)));

    LoudnessCurve curve;
    curve.values = to_decibels(rms, floor_db);
    // Store the realized hop so frame times match the sample grid exactly.
    curve.hop_seconds = static_cast<double>(hop_samples) / clip.sample_rate;
    curve.window_seconds = static_cast<double>(window) / clip.sample_rate;
    curve.floor_db = floor_db;
    return curve;
}

} // namespace drumrefine
