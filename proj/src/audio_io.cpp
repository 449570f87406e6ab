#include "drumrefine/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "drumrefine/loudness.hpp"

namespace drumrefine {
namespace {

constexpr double kSilenceFloorDb = -100.0;

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 24) & 0xff));
}

void put_u16le(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(static_cast<std::uint8_t>(x & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& v, const char* tag) {
    v.insert(v.end(), tag, tag + 4);
}

struct WavFormat {
    std::uint16_t format_tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
};

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, bool as_float) {
    const std::uint16_t bits = as_float ? 32 : 16;
    const std::uint32_t frames = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t data_len = frames * (bits / 8);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    put_tag(out, "RIFF");
    put_u32le(out, 36 + data_len);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32le(out, 16);
    put_u16le(out, as_float ? 3 : 1);
    put_u16le(out, 1);
    put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
    put_u16le(out, bits / 8);
    put_u16le(out, bits);
    put_tag(out, "data");
    put_u32le(out, data_len);

    if (as_float) {
        for (double s : clip.samples) {
            float f = static_cast<float>(s);
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            put_u32le(out, u);
        }
    } else {
        for (double s : clip.samples) {
            double clamped = std::clamp(s, -1.0, 1.0);
            auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
            put_u16le(out, static_cast<std::uint16_t>(v));
        }
    }
    return out;
}

} // namespace

bool is_supported_sample_rate(int rate) { return rate == 44100 || rate == 48000; }

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw Error(Errc::corrupt_header, "not a RIFF/WAVE file");
    }

    WavFormat fmt;
    bool have_fmt = false;
    std::span<const std::uint8_t> data;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* hdr = bytes.data() + pos;
        const std::uint32_t chunk_len = read_u32le(hdr + 4);
        pos += 8;
        if (pos + chunk_len > bytes.size()) {
            throw Error(Errc::corrupt_header, "chunk overruns file");
        }
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw Error(Errc::corrupt_header, "fmt chunk too short");
            const std::uint8_t* p = bytes.data() + pos;
            fmt.format_tag = read_u16le(p);
            fmt.channels = read_u16le(p + 2);
            fmt.sample_rate = read_u32le(p + 4);
            fmt.bits = read_u16le(p + 14);
            if (fmt.format_tag == 0xFFFE) {
                // WAVE_FORMAT_EXTENSIBLE: the subformat GUID starts with the
                // effective format tag.
                if (chunk_len < 40) throw Error(Errc::corrupt_header, "extensible fmt chunk too short");
                fmt.format_tag = read_u16le(p + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = bytes.subspan(pos, chunk_len);
            have_data = true;
        }
        pos += chunk_len + (chunk_len & 1); // chunks are word-aligned
    }

    if (!have_fmt || !have_data) {
        throw Error(Errc::corrupt_header, "missing fmt or data chunk");
    }
    if (fmt.channels < 1 || fmt.channels > 2) {
        throw Error(Errc::unsupported_format,
                    "unsupported channel count: " + std::to_string(fmt.channels));
    }
    if (fmt.sample_rate == 0) throw Error(Errc::corrupt_header, "zero sample rate");

    const bool is_float = fmt.format_tag == 3;
    if (fmt.format_tag != 1 && !is_float) {
        throw Error(Errc::unsupported_format,
                    "unsupported WAV encoding tag " + std::to_string(fmt.format_tag));
    }
    if (is_float ? fmt.bits != 32 : (fmt.bits != 16 && fmt.bits != 24 && fmt.bits != 32)) {
        throw Error(Errc::unsupported_format,
                    "unsupported bit depth: " + std::to_string(fmt.bits));
    }

    const std::size_t bytes_per_sample = fmt.bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    const std::size_t frames = data.size() / frame_bytes;

    AudioClip clip;
    clip.sample_rate = static_cast<int>(fmt.sample_rate);
    clip.samples.resize(frames);

    auto decode_sample = [&](const std::uint8_t* p) -> double {
        switch (fmt.bits) {
            case 16: {
                auto v = static_cast<std::int16_t>(read_u16le(p));
                return v / 32768.0;
            }
            case 24: {
                std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
                if (v & 0x800000) v |= ~0xFFFFFF;
                return v / 8388608.0;
            }
            default: {
                std::uint32_t u = read_u32le(p);
                if (is_float) {
                    float f;
                    std::memcpy(&f, &u, 4);
                    return f;
                }
                return static_cast<std::int32_t>(u) / 2147483648.0;
            }
        }
    };

    for (std::size_t i = 0; i < frames; ++i) {
        const std::uint8_t* p = data.data() + i * frame_bytes;
        double s = decode_sample(p);
        if (fmt.channels == 2) {
            s = 0.5 * (s + decode_sample(p + bytes_per_sample));
        }
        if (!std::isfinite(s)) {
            throw Error(Errc::corrupt_header, "non-finite sample in data chunk");
        }
        clip.samples[i] = s;
    }
    return clip;
}

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::file_not_found, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav16(const AudioClip& clip) { return encode_wav(clip, false); }
std::vector<std::uint8_t> encode_wav_float(const AudioClip& clip) { return encode_wav(clip, true); }

void write_wav16(const AudioClip& clip, const std::filesystem::path& path) {
    write_file_atomic(path, encode_wav16(clip));
}

void write_wav_float(const AudioClip& clip, const std::filesystem::path& path) {
    write_file_atomic(path, encode_wav_float(clip));
}

double replaygain_block_offset_db() { return 20.0 * std::log10(32768.0); }

ReplayGainAnalysis replaygain_analyze(const AudioClip& clip) {
    if (clip.empty()) throw Error(Errc::empty_clip, "cannot analyze an empty clip");
    if (!is_supported_sample_rate(clip.sample_rate)) {
        throw Error(Errc::unsupported_sample_rate,
                    "unsupported sample rate: " + std::to_string(clip.sample_rate));
    }

    const AudioClip filtered = equal_loudness_filter(clip);
    const std::size_t block =
        static_cast<std::size_t>(std::ceil(0.050 * clip.sample_rate));
    const std::size_t n_blocks = filtered.samples.size() / block;

    ReplayGainAnalysis result;
    if (n_blocks == 0) {
        // Shorter than one analysis block: fall back to one whole-clip block.
        double sum = 0.0;
        for (double s : filtered.samples) sum += s * s;
        const double ms = sum / static_cast<double>(filtered.samples.size());
        const double loud = 10.0 * std::log10(ms + 1e-37) + replaygain_block_offset_db();
        if (loud <= kSilenceFloorDb) {
            result.all_silent = true;
            return result;
        }
        result.gain_db = kPinkNoiseReferenceDb - loud;
        return result;
    }

    std::vector<double> loudness(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        double sum = 0.0;
        const double* p = filtered.samples.data() + b * block;
        for (std::size_t i = 0; i < block; ++i) sum += p[i] * p[i];
        loudness[b] = 10.0 * std::log10(sum / static_cast<double>(block) + 1e-37) +
                      replaygain_block_offset_db();
    }

    // Representative level: the ceil(5% n)-th loudest block (95th percentile).
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(0.05 * static_cast<double>(n_blocks)));
    std::nth_element(loudness.begin(), loudness.begin() + (k - 1), loudness.end(),
                     std::greater<double>());
    const double representative = loudness[k - 1];

    if (representative <= kSilenceFloorDb) {
        result.all_silent = true;
        return result;
    }
    result.gain_db = kPinkNoiseReferenceDb - representative;
    return result;
}

ReplayGainResult replaygain_normalize(const AudioClip& clip) {
    const ReplayGainAnalysis analysis = replaygain_analyze(clip);
    ReplayGainResult result;
    result.gain_db = analysis.gain_db;
    result.all_silent = analysis.all_silent;
    result.clip = clip;
    const double scale = std::pow(10.0, analysis.gain_db / 20.0);
    for (double& s : result.clip.samples) s *= scale;
    return result;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
    namespace fs = std::filesystem;
    std::random_device rd;
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(rd() % 1000000);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(Errc::io_error, "write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(Errc::io_error, "cannot rename into place: " + path.string());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(
                                reinterpret_cast<const std::uint8_t*>(text.data()),
                                text.size()));
}

} // namespace drumrefine
