#include "drumrefine/synth.hpp"

#include <algorithm>
#include <cmath>

namespace drumrefine {
namespace {

// Frequency of the shared attack transient. It sits in the band the
// downstream equal-loudness weighting passes most strongly, which keeps the
// per-class loudness-per-peak ratio comparable across the kit.
constexpr double kAttackHz = 3500.0;

// Carrier mix per class: flavor tone, band-passed noise, attack transient.
// The attack weights are calibrated so each class produces the same
// post-filter loudness per unit peak within about +-1 dB (see the balance
// test in the synth suite).
struct CarrierRecipe {
    double tone_w;
    double noise_w;
    double attack_w;
};

CarrierRecipe recipe_for(DrumClass7 c) {
    switch (c) {
        case DrumClass7::Kick: return {1.00, 0.25, 0.455};
        case DrumClass7::Snare: return {0.70, 0.80, 0.45};
        case DrumClass7::HiHatClosed: return {0.40, 1.00, 0.59};
        case DrumClass7::HiHatOpen: return {0.40, 1.00, 0.48};
        case DrumClass7::Toms: return {1.00, 0.30, 0.415};
        case DrumClass7::Crash: return {0.00, 1.00, 0.385};
        case DrumClass7::Ride: return {0.30, 1.00, 0.35};
    }
    return {1.0, 0.5, 0.5};
}

bool is_cymbal_family(DrumClass7 c) {
    return c == DrumClass7::HiHatClosed || c == DrumClass7::HiHatOpen ||
           c == DrumClass7::Crash || c == DrumClass7::Ride;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic white noise in [-1, 1). Avoids <random> distributions so the
// sample stream is identical across standard library implementations.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : state_(splitmix64(seed)) {}
    double next() {
        state_ = splitmix64(state_);
        return static_cast<double>(state_ >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    }

private:
    std::uint64_t state_;
};

// Two-pole resonator for the skin instruments.
std::vector<double> resonate(const std::vector<double>& x, double center_hz,
                             int rate) {
    const double bw = std::max(center_hz / 5.0, 10.0);
    const double r = std::exp(-M_PI * bw / rate);
    const double c = 2.0 * r * std::cos(2.0 * M_PI * center_hz / rate);
    const double r2 = r * r;
    std::vector<double> y(x.size(), 0.0);
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] + c * y1 - r2 * y2;
        y2 = y1;
        y1 = v;
        y[i] = v;
    }
    return y;
}

// RBJ-style 2nd-order Butterworth high-pass for the cymbal family.
std::vector<double> highpass(const std::vector<double>& x, double cutoff_hz,
                             int rate) {
    const double w0 = 2.0 * M_PI * cutoff_hz / rate;
    const double alpha = std::sin(w0) / std::sqrt(2.0);
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha;
    const double b0 = (1.0 + cw) / 2.0 / a0;
    const double b1 = -(1.0 + cw) / a0;
    const double b2 = b0;
    const double a1 = -2.0 * cw / a0;
    const double a2 = (1.0 - alpha) / a0;
    std::vector<double> y(x.size(), 0.0);
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x[i];
        y2 = y1;
        y1 = v;
        y[i] = v;
    }
    return y;
}

void normalize_peak(std::vector<double>& v) {
    double peak = 0.0;
    for (double s : v) peak = std::max(peak, std::abs(s));
    if (peak <= 0.0) return;
    const double inv = 1.0 / peak;
    for (double& s : v) s *= inv;
}

// One enveloped burst, peak-normalized to exactly 1.
std::vector<double> render_burst(const InstrumentModel& model, int rate,
                                 std::size_t length, std::uint64_t seed) {
    const CarrierRecipe mix = recipe_for(model.class7);

    std::vector<double> noise;
    if (mix.noise_w > 0.0) {
        NoiseSource rng(seed);
        noise.resize(length);
        for (double& s : noise) s = rng.next();
        if (model.center_hz > 0.0) {
            noise = is_cymbal_family(model.class7)
                        ? highpass(noise, model.center_hz, rate)
                        : resonate(noise, model.center_hz, rate);
        }
        normalize_peak(noise);
    }

    std::vector<double> burst(length);
    const double decay = std::exp(-1.0 / (model.decay_tau * rate));
    const double tone_step = 2.0 * M_PI * model.tone_hz / rate;
    const double attack_step = 2.0 * M_PI * kAttackHz / rate;
    double env = 1.0;
    double tone_phase = 0.0, attack_phase = 0.0;
    for (std::size_t i = 0; i < length; ++i) {
        double s = 0.0;
        if (model.tone_hz > 0.0 && mix.tone_w > 0.0) s += mix.tone_w * std::sin(tone_phase);
        if (!noise.empty()) s += mix.noise_w * noise[i];
        if (mix.attack_w > 0.0) s += mix.attack_w * std::sin(attack_phase);
        burst[i] = env * s;
        env *= decay;
        tone_phase += tone_step;
        if (tone_phase > 2.0 * M_PI) tone_phase -= 2.0 * M_PI;
        attack_phase += attack_step;
        if (attack_phase > 2.0 * M_PI) attack_phase -= 2.0 * M_PI;
    }
    normalize_peak(burst);
    return burst;
}

} // namespace

InstrumentModels default_models() {
    InstrumentModels m;
    m[DrumClass7::Kick] = {DrumClass7::Kick, 0.25, 60.0, 60.0, 0.8};
    m[DrumClass7::Snare] = {DrumClass7::Snare, 0.15, 0.0, 200.0, 0.6};
    m[DrumClass7::HiHatClosed] = {DrumClass7::HiHatClosed, 0.05, 6000.0, 7000.0, 0.3};
    m[DrumClass7::HiHatOpen] = {DrumClass7::HiHatOpen, 0.60, 6000.0, 7000.0, 1.8};
    m[DrumClass7::Toms] = {DrumClass7::Toms, 0.20, 120.0, 120.0, 0.8};
    m[DrumClass7::Crash] = {DrumClass7::Crash, 1.20, 6000.0, 0.0, 3.0};
    m[DrumClass7::Ride] = {DrumClass7::Ride, 0.50, 6000.0, 5200.0, 1.5};
    return m;
}

Score make_score(std::vector<NoteEvent> events, int sample_rate,
                 const InstrumentModels& models, double min_duration) {
    std::stable_sort(events.begin(), events.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.time < b.time; });
    double longest_burst = 0.0;
    for (const auto& [cls, model] : models) {
        longest_burst = std::max(longest_burst, model.burst_seconds);
    }
    double duration = min_duration;
    if (!events.empty()) {
        duration = std::max(duration, events.back().time + longest_burst + 0.05);
    }
    return {std::move(events), duration, sample_rate};
}

AudioClip render_stem(const Score& score, StemClass stem,
                      const InstrumentModels& models, std::uint64_t seed) {
    AudioClip clip;
    clip.sample_rate = score.sample_rate;
    clip.samples.assign(
        static_cast<std::size_t>(std::llround(score.duration * score.sample_rate)), 0.0);

    for (std::size_t index = 0; index < score.events.size(); ++index) {
        const NoteEvent& event = score.events[index];
        if (stem_for_class(event.class7) != stem) continue;

        const auto it = models.find(event.class7);
        if (it == models.end()) {
            throw Error(Errc::missing_model,
                        "no instrument model for class " +
                            std::string(label_of(event.class7)));
        }
        const InstrumentModel& model = it->second;

        const auto start = static_cast<std::size_t>(
            std::llround(event.time * score.sample_rate));
        if (start >= clip.samples.size()) continue;
        const std::size_t length =
            std::min(static_cast<std::size_t>(
                         std::llround(model.burst_seconds * score.sample_rate)),
                     clip.samples.size() - start);
        if (length == 0) continue;

        const double amp = static_cast<double>(event.velocity) / 127.0;
        const std::uint64_t burst_seed =
            splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
        const std::vector<double> burst = render_burst(model, score.sample_rate,
                                                       length, burst_seed);
        for (std::size_t i = 0; i < length; ++i) {
            clip.samples[start + i] += amp * burst[i];
        }
    }
    return clip;
}

Session render_session(const Score& score, const InstrumentModels& models,
                       std::uint64_t seed) {
    Session session;
    for (StemClass stem : kAllStems) {
        session.stems.emplace(stem, render_stem(score, stem, models, seed));
    }
    session.reference = score.events;
    return session;
}

} // namespace drumrefine
