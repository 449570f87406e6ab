#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "drumrefine/error.hpp"

namespace drumrefine {

// Mono sample buffer, nominal full scale +-1.0.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;

    double duration_seconds() const {
        return sample_rate > 0
                   ? static_cast<double>(samples.size()) / sample_rate
                   : 0.0;
    }
    bool empty() const { return samples.empty(); }
};

bool is_supported_sample_rate(int rate);

// Reads a RIFF/WAVE file: PCM 16/24/32-bit int or 32-bit float, 1-2 channels.
// Stereo is downmixed by per-frame arithmetic mean; integer samples are
// scaled by 1/2^(bits-1).
AudioClip load_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

// 16-bit PCM writer used for synthesized stems. Written atomically
// (temp file + rename).
void write_wav16(const AudioClip& clip, const std::filesystem::path& path);
// 32-bit float writer, lossless for analysis round trips.
void write_wav_float(const AudioClip& clip, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav16(const AudioClip& clip);
std::vector<std::uint8_t> encode_wav_float(const AudioClip& clip);

// ReplayGain 1.0 track analysis over the equal-loudness filtered signal:
// RMS energy of 50 ms non-overlapping blocks, representative level at the
// 95th percentile, gain relative to the pink-noise calibration reference.
struct ReplayGainResult {
    AudioClip clip;     // input with gain applied
    double gain_db = 0.0;
    bool all_silent = false; // representative level at floor; gain forced to 0
};

// Calibration constant of the reference analyzer: the level (in the
// analyzer's dB scale) that the canonical pink-noise reference plays at,
// so that reference material computes to a gain of ~0 dB.
inline constexpr double kPinkNoiseReferenceDb = 64.82;

// Block loudness is measured against 16-bit full scale to stay comparable
// with the reference analyzer, which consumes raw PCM sample values.
double replaygain_block_offset_db();

// Analysis only; does not modify the signal.
struct ReplayGainAnalysis {
    double gain_db = 0.0;
    bool all_silent = false;
};
ReplayGainAnalysis replaygain_analyze(const AudioClip& clip);

ReplayGainResult replaygain_normalize(const AudioClip& clip);

// Atomic file write helper shared by every writer in the project.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text);

} // namespace drumrefine
