#include "drumrefine/events.hpp"

#include "drumrefine/audio_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

namespace drumrefine {

DrumClass5 project_to_5(DrumClass7 c) {
    switch (c) {
        case DrumClass7::Kick: return DrumClass5::Kick;
        case DrumClass7::Snare: return DrumClass5::Snare;
        case DrumClass7::HiHatClosed:
        case DrumClass7::HiHatOpen: return DrumClass5::HiHat;
        case DrumClass7::Toms: return DrumClass5::Toms;
        case DrumClass7::Crash:
        case DrumClass7::Ride: return DrumClass5::Cymbals;
    }
    return DrumClass5::Kick;
}

StemClass stem_for_class(DrumClass7 c) {
    switch (c) {
        case DrumClass7::Kick: return StemClass::Kick;
        case DrumClass7::Snare: return StemClass::Snare;
        case DrumClass7::HiHatClosed:
        case DrumClass7::HiHatOpen: return StemClass::HiHat;
        case DrumClass7::Toms: return StemClass::Toms;
        case DrumClass7::Crash: return StemClass::Crash;
        case DrumClass7::Ride: return StemClass::Ride;
    }
    return StemClass::Kick;
}

std::string_view label_of(DrumClass5 c) {
    switch (c) {
        case DrumClass5::Kick: return "KD";
        case DrumClass5::Snare: return "SD";
        case DrumClass5::HiHat: return "HH";
        case DrumClass5::Toms: return "TT";
        case DrumClass5::Cymbals: return "CY";
    }
    return "";
}

std::string_view label_of(DrumClass7 c) {
    switch (c) {
        case DrumClass7::Kick: return "KD";
        case DrumClass7::Snare: return "SD";
        case DrumClass7::HiHatClosed: return "HHC";
        case DrumClass7::HiHatOpen: return "HHO";
        case DrumClass7::Toms: return "TT";
        case DrumClass7::Crash: return "CR";
        case DrumClass7::Ride: return "RD";
    }
    return "";
}

std::string_view label_of(StemClass c) {
    switch (c) {
        case StemClass::Kick: return "kick";
        case StemClass::Snare: return "snare";
        case StemClass::Toms: return "toms";
        case StemClass::HiHat: return "hihat";
        case StemClass::Crash: return "crash";
        case StemClass::Ride: return "ride";
    }
    return "";
}

std::optional<DrumClass5> class5_from_label(std::string_view label) {
    for (DrumClass5 c : kAllClasses5) {
        if (label == label_of(c)) return c;
    }
    return std::nullopt;
}

std::optional<DrumClass7> class7_from_label(std::string_view label) {
    for (DrumClass7 c : kAllClasses7) {
        if (label == label_of(c)) return c;
    }
    return std::nullopt;
}

std::optional<DrumClass5> class5_from_midi_note(int note) {
    switch (note) {
        case 35: case 36: return DrumClass5::Kick;
        case 38: case 40: return DrumClass5::Snare;
        case 42: case 44: case 46: return DrumClass5::HiHat;
        case 41: case 43: case 45: case 47: case 48: case 50:
            return DrumClass5::Toms;
        case 49: case 51: case 52: case 53: case 55: case 57: case 59:
            return DrumClass5::Cymbals;
        default: return std::nullopt;
    }
}

int midi_note_for(DrumClass7 c) {
    switch (c) {
        case DrumClass7::Kick: return 36;
        case DrumClass7::Snare: return 38;
        case DrumClass7::HiHatClosed: return 42;
        case DrumClass7::HiHatOpen: return 46;
        case DrumClass7::Toms: return 47;
        case DrumClass7::Crash: return 49;
        case DrumClass7::Ride: return 51;
    }
    return 36;
}

namespace {

// ---------------------------------------------------------------- SMF input

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    std::size_t remaining() const { return bytes.size() - pos; }

    std::uint8_t u8() {
        if (eof()) throw Error(Errc::malformed_smf, "truncated MIDI data");
        return bytes[pos++];
    }
    std::uint16_t u16be() {
        std::uint16_t hi = u8();
        return static_cast<std::uint16_t>((hi << 8) | u8());
    }
    std::uint32_t u32be() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
        return v;
    }
    std::uint32_t vlq() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            std::uint8_t byte = u8();
            v = (v << 7) | (byte & 0x7F);
            if (!(byte & 0x80)) return v;
        }
        throw Error(Errc::malformed_smf, "variable-length quantity too long");
    }
    void skip(std::size_t n) {
        if (remaining() < n) throw Error(Errc::malformed_smf, "truncated MIDI chunk");
        pos += n;
    }
};

struct RawMidiNote {
    long long tick = 0;
    int note = 0;
    int velocity = 0;
};

struct TempoChange {
    long long tick = 0;
    std::uint32_t us_per_quarter = kMidiTempoUsPerQuarter;
};

struct RawMidi {
    std::vector<RawMidiNote> notes;
    std::vector<TempoChange> tempos;
    std::uint16_t division = kMidiPpq;
};

void parse_track(Reader& r, std::size_t track_end, RawMidi& out) {
    long long tick = 0;
    std::uint8_t running = 0;
    while (r.pos < track_end) {
        tick += r.vlq();
        std::uint8_t status = r.bytes[r.pos];
        if (status & 0x80) {
            r.pos++;
        } else {
            if (running == 0) throw Error(Errc::malformed_smf, "data byte without running status");
            status = running;
        }

        if (status == 0xFF) {
            running = 0; // meta events cancel running status
            const std::uint8_t type = r.u8();
            const std::uint32_t len = r.vlq();
            if (r.remaining() < len) throw Error(Errc::malformed_smf, "truncated meta event");
            if (type == 0x51 && len == 3) {
                std::uint32_t tempo = (static_cast<std::uint32_t>(r.bytes[r.pos]) << 16) |
                                      (static_cast<std::uint32_t>(r.bytes[r.pos + 1]) << 8) |
                                      r.bytes[r.pos + 2];
                out.tempos.push_back({tick, tempo});
            }
            r.skip(len);
            if (type == 0x2F) return; // end of track
        } else if (status == 0xF0 || status == 0xF7) {
            running = 0;
            r.skip(r.vlq());
        } else {
            running = status;
            const std::uint8_t kind = status & 0xF0;
            const int data_bytes = (kind == 0xC0 || kind == 0xD0) ? 1 : 2;
            const std::uint8_t d1 = r.u8();
            const std::uint8_t d2 = data_bytes == 2 ? r.u8() : 0;
            if (kind == 0x90 && d2 > 0) {
                out.notes.push_back({tick, d1, d2});
            }
        }
    }
}

RawMidi parse_smf(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    if (r.remaining() < 14 || std::memcmp(bytes.data(), "MThd", 4) != 0) {
        throw Error(Errc::malformed_smf, "missing MThd header");
    }
    r.pos = 4;
    const std::uint32_t header_len = r.u32be();
    if (header_len < 6) throw Error(Errc::malformed_smf, "MThd too short");
    const std::uint16_t format = r.u16be();
    const std::uint16_t ntrks = r.u16be();
    const std::uint16_t division = r.u16be();
    if (format > 1) {
        throw Error(Errc::malformed_smf, "SMF type " + std::to_string(format) + " not supported");
    }
    if (division == 0) throw Error(Errc::malformed_smf, "zero division");
    r.skip(header_len - 6);

    RawMidi raw;
    raw.division = division;
    std::uint16_t tracks_seen = 0;
    while (!r.eof() && tracks_seen < ntrks) {
        if (r.remaining() < 8) throw Error(Errc::malformed_smf, "truncated chunk header");
        const bool is_track = std::memcmp(bytes.data() + r.pos, "MTrk", 4) == 0;
        r.pos += 4;
        const std::uint32_t len = r.u32be();
        if (r.remaining() < len) throw Error(Errc::malformed_smf, "chunk overruns file");
        const std::size_t end = r.pos + len;
        if (is_track) {
            parse_track(r, end, raw);
            tracks_seen++;
        }
        r.pos = end;
    }
    return raw;
}

// Piecewise tempo map: tick -> seconds.
class TempoMap {
public:
    TempoMap(std::vector<TempoChange> changes, std::uint16_t division) {
        if (division & 0x8000) {
            // SMPTE division: fixed seconds per tick, tempo events irrelevant.
            const int fps = -static_cast<std::int8_t>(division >> 8);
            const int tpf = division & 0xFF;
            smpte_seconds_per_tick_ = 1.0 / (static_cast<double>(fps) * tpf);
            return;
        }
        ppq_ = division;
        std::stable_sort(changes.begin(), changes.end(),
                         [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
        segments_.push_back({0, 0.0, kMidiTempoUsPerQuarter});
        for (const TempoChange& c : changes) {
            Segment& last = segments_.back();
            if (c.tick == last.tick) {
                last.us_per_quarter = c.us_per_quarter;
                continue;
            }
            const double t = last.seconds + ticks_to_s(c.tick - last.tick, last.us_per_quarter);
            segments_.push_back({c.tick, t, c.us_per_quarter});
        }
    }

    double seconds_at(long long tick) const {
        if (smpte_seconds_per_tick_ > 0.0) return tick * smpte_seconds_per_tick_;
        auto it = std::upper_bound(
            segments_.begin(), segments_.end(), tick,
            [](long long t, const Segment& s) { return t < s.tick; });
        const Segment& seg = *std::prev(it);
        return seg.seconds + ticks_to_s(tick - seg.tick, seg.us_per_quarter);
    }

private:
    struct Segment {
        long long tick;
        double seconds;
        std::uint32_t us_per_quarter;
    };

    double ticks_to_s(long long ticks, std::uint32_t us_per_quarter) const {
        return static_cast<double>(ticks) * us_per_quarter / (ppq_ * 1e6);
    }

    std::vector<Segment> segments_;
    double ppq_ = kMidiPpq;
    double smpte_seconds_per_tick_ = 0.0;
};

// ------------------------------------------------------------------ helpers

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::optional<long> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": " + what);
}

void put_u16be(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

void put_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
    v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

void put_vlq(std::vector<std::uint8_t>& v, std::uint32_t x) {
    std::uint8_t stack[5];
    int n = 0;
    stack[n++] = static_cast<std::uint8_t>(x & 0x7F);
    x >>= 7;
    while (x) {
        stack[n++] = static_cast<std::uint8_t>((x & 0x7F) | 0x80);
        x >>= 7;
    }
    while (n) v.push_back(stack[--n]);
}

} // namespace

std::vector<TimedMidiNote> parse_midi_notes(std::span<const std::uint8_t> bytes) {
    const RawMidi raw = parse_smf(bytes);
    const TempoMap tempo(raw.tempos, raw.division);

    std::vector<TimedMidiNote> notes;
    notes.reserve(raw.notes.size());
    for (const RawMidiNote& n : raw.notes) {
        notes.push_back({tempo.seconds_at(n.tick), n.note, n.velocity});
    }
    std::stable_sort(notes.begin(), notes.end(),
                     [](const TimedMidiNote& a, const TimedMidiNote& b) {
                         return a.time < b.time;
                     });
    return notes;
}

OnsetParse parse_onsets_midi(std::span<const std::uint8_t> bytes) {
    const RawMidi raw = parse_smf(bytes);
    const TempoMap tempo(raw.tempos, raw.division);

    OnsetParse result;
    for (const RawMidiNote& n : raw.notes) {
        const auto cls = class5_from_midi_note(n.note);
        if (!cls) {
            result.skipped++;
            continue;
        }
        result.onsets.push_back({tempo.seconds_at(n.tick), *cls});
    }
    std::stable_sort(result.onsets.begin(), result.onsets.end(),
                     [](const OnsetEvent& a, const OnsetEvent& b) { return a.time < b.time; });
    if (result.onsets.empty()) {
        throw Error(Errc::no_notes, "no mappable notes in MIDI input (" +
                                        std::to_string(result.skipped) + " skipped)");
    }
    return result;
}

OnsetParse parse_onsets_midi_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::file_not_found, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_onsets_midi(bytes);
}

OnsetParse parse_onsets_tsv(std::string_view text) {
    OnsetParse result;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(
            start, nl == std::string_view::npos ? text.size() - start : nl - start);
        line_no++;
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 2) parse_fail(line_no, "expected time<TAB>label");

        const auto time = parse_double(fields[0]);
        if (!time || *time < 0.0 || !std::isfinite(*time)) {
            parse_fail(line_no, "bad onset time '" + std::string(trim(fields[0])) + "'");
        }

        const std::string_view label = trim(fields[1]);
        if (auto cls = class5_from_label(label)) {
            result.onsets.push_back({*time, *cls});
        } else if (auto note = parse_int(label)) {
            if (auto mapped = class5_from_midi_note(static_cast<int>(*note))) {
                result.onsets.push_back({*time, *mapped});
            } else {
                result.skipped++;
            }
        } else {
            parse_fail(line_no, "unknown label '" + std::string(label) + "'");
        }
    }
    std::stable_sort(result.onsets.begin(), result.onsets.end(),
                     [](const OnsetEvent& a, const OnsetEvent& b) { return a.time < b.time; });
    return result;
}

std::vector<std::uint8_t> encode_midi(std::span<const NoteEvent> notes) {
    struct TrackEvent {
        long long tick;
        int order; // note-offs before note-ons at the same tick
        int note;
        int velocity;
    };
    std::vector<TrackEvent> events;
    events.reserve(notes.size() * 2);
    const long long gate_ticks =
        std::llround(kNoteGateSeconds * kMidiTicksPerSecond);
    for (const NoteEvent& n : notes) {
        if (n.velocity <= 0) continue; // zero-velocity notes are omitted
        const long long on = std::max<long long>(0, std::llround(n.time * kMidiTicksPerSecond));
        const int note = midi_note_for(n.class7);
        events.push_back({on, 1, note, std::min(n.velocity, 127)});
        events.push_back({on + gate_ticks, 0, note, 0});
    }
    std::sort(events.begin(), events.end(), [](const TrackEvent& a, const TrackEvent& b) {
        return std::tie(a.tick, a.order, a.note) < std::tie(b.tick, b.order, b.note);
    });

    std::vector<std::uint8_t> track;
    // Tempo meta event pinning 120 BPM.
    put_vlq(track, 0);
    track.insert(track.end(), {0xFF, 0x51, 0x03});
    track.push_back((kMidiTempoUsPerQuarter >> 16) & 0xff);
    track.push_back((kMidiTempoUsPerQuarter >> 8) & 0xff);
    track.push_back(kMidiTempoUsPerQuarter & 0xff);

    long long cursor = 0;
    for (const TrackEvent& e : events) {
        put_vlq(track, static_cast<std::uint32_t>(e.tick - cursor));
        cursor = e.tick;
        track.push_back(e.order ? 0x99 : 0x89); // channel 10
        track.push_back(static_cast<std::uint8_t>(e.note));
        track.push_back(static_cast<std::uint8_t>(e.velocity));
    }
    put_vlq(track, 0);
    track.insert(track.end(), {0xFF, 0x2F, 0x00});

    std::vector<std::uint8_t> out;
    out.reserve(14 + 8 + track.size());
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    put_u32be(out, 6);
    put_u16be(out, 0); // type 0
    put_u16be(out, 1);
    put_u16be(out, kMidiPpq);
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32be(out, static_cast<std::uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

void write_midi(std::span<const NoteEvent> notes, const std::filesystem::path& path) {
    write_file_atomic(path, encode_midi(notes));
}

std::string format_notes_tsv(std::span<const NoteEvent> notes) {
    std::string out;
    char buf[64];
    for (const NoteEvent& n : notes) {
        std::snprintf(buf, sizeof buf, "%.3f\t%s\t%d\n", n.time,
                      std::string(label_of(n.class7)).c_str(), n.velocity);
        out += buf;
    }
    return out;
}

std::vector<NoteEvent> parse_notes_tsv(std::string_view text) {
    std::vector<NoteEvent> notes;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(
            start, nl == std::string_view::npos ? text.size() - start : nl - start);
        line_no++;
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3) parse_fail(line_no, "expected time<TAB>label<TAB>velocity");

        const auto time = parse_double(fields[0]);
        if (!time || *time < 0.0 || !std::isfinite(*time)) {
            parse_fail(line_no, "bad time '" + std::string(trim(fields[0])) + "'");
        }
        const auto cls = class7_from_label(trim(fields[1]));
        if (!cls) parse_fail(line_no, "unknown label '" + std::string(trim(fields[1])) + "'");
        const auto vel = parse_int(fields[2]);
        if (!vel || *vel < 0 || *vel > 127) {
            parse_fail(line_no, "velocity out of range '" + std::string(trim(fields[2])) + "'");
        }
        notes.push_back({*time, *cls, static_cast<int>(*vel)});
    }
    std::stable_sort(notes.begin(), notes.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.time < b.time; });
    return notes;
}

void write_notes_tsv(std::span<const NoteEvent> notes, const std::filesystem::path& path) {
    write_file_atomic(path, format_notes_tsv(notes));
}

std::vector<NoteEvent> read_notes_tsv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::file_not_found, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_notes_tsv(ss.str());
}

} // namespace drumrefine
