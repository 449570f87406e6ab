#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "drumrefine/audio_io.hpp"
#include "drumrefine/events.hpp"
#include "drumrefine/refine.hpp"

namespace drumrefine {

// Per-class burst recipe. center_hz selects the noise band: a resonator
// center for the skin instruments, a high-pass cutoff for the cymbal family,
// 0 for broadband. tone_hz = 0 disables the tonal component.
struct InstrumentModel {
    DrumClass7 class7 = DrumClass7::Kick;
    double decay_tau = 0.2;     // amplitude time constant, seconds
    double center_hz = 0.0;
    double tone_hz = 0.0;
    double burst_seconds = 0.5;
};

using InstrumentModels = std::map<DrumClass7, InstrumentModel>;

// Defaults are tuned so the downstream classifier math is decisive (open
// hi-hat sustains past the 150 ms threshold window, closed decays well
// under it) and so each class lands at a comparable post-filter loudness
// per unit peak amplitude, keeping velocity estimates class-consistent.
InstrumentModels default_models();

struct Score {
    std::vector<NoteEvent> events; // sorted by time, all times < duration
    double duration = 0.0;         // seconds
    int sample_rate = 44100;
};

// Duration = last event + the longest configured burst, rounded up.
Score make_score(std::vector<NoteEvent> events, int sample_rate,
                 const InstrumentModels& models, double min_duration = 0.0);

// Renders every event routed to `stem`: peak amplitude velocity/127,
// exponential decay envelope, seeded band-passed noise plus optional sine.
// Deterministic: identical (score, models, seed) give identical samples.
AudioClip render_stem(const Score& score, StemClass stem,
                      const InstrumentModels& models, std::uint64_t seed);

struct Session {
    StemSet stems;
    std::vector<NoteEvent> reference; // the score's events verbatim
};

Session render_session(const Score& score, const InstrumentModels& models,
                       std::uint64_t seed);

} // namespace drumrefine
