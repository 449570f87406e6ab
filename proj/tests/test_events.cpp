#include "doctest.h"

#include <random>

#include "drumrefine/events.hpp"

using namespace drumrefine;

namespace {

void be16(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(x >> 8);
    v.push_back(x & 0xff);
}
void be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    be16(v, x >> 16);
    be16(v, x & 0xffff);
}

// Minimal SMF type 0 assembled by hand; the track body is given raw.
std::vector<std::uint8_t> smf(std::uint16_t division,
                              std::vector<std::uint8_t> track) {
    std::vector<std::uint8_t> v = {'M', 'T', 'h', 'd'};
    be32(v, 6);
    be16(v, 0);
    be16(v, 1);
    be16(v, division);
    v.insert(v.end(), {'M', 'T', 'r', 'k'});
    be32(v, static_cast<std::uint32_t>(track.size()));
    v.insert(v.end(), track.begin(), track.end());
    return v;
}

const std::vector<std::uint8_t> kEndOfTrack = {0x00, 0xFF, 0x2F, 0x00};

} // namespace

TEST_SUITE("events") {

TEST_CASE("class projections are total") {
    for (DrumClass7 c : kAllClasses7) {
        const DrumClass5 p = project_to_5(c);
        CHECK(!label_of(p).empty());
    }
    CHECK(project_to_5(DrumClass7::HiHatOpen) == DrumClass5::HiHat);
    CHECK(project_to_5(DrumClass7::HiHatClosed) == DrumClass5::HiHat);
    CHECK(project_to_5(DrumClass7::Crash) == DrumClass5::Cymbals);
    CHECK(project_to_5(DrumClass7::Ride) == DrumClass5::Cymbals);

    // Surjective: every 5-class label is hit.
    for (DrumClass5 five : kAllClasses5) {
        bool hit = false;
        for (DrumClass7 c : kAllClasses7) hit = hit || project_to_5(c) == five;
        CHECK(hit);
    }
}

TEST_CASE("midi parse: single snare note-on at tick 0") {
    std::vector<std::uint8_t> track = {0x00, 0x99, 38, 100};
    track.insert(track.end(), kEndOfTrack.begin(), kEndOfTrack.end());
    const OnsetParse p = parse_onsets_midi(smf(480, track));
    REQUIRE(p.onsets.size() == 1);
    CHECK(p.onsets[0].time == 0.0);
    CHECK(p.onsets[0].class5 == DrumClass5::Snare);
    CHECK(p.skipped == 0);
}

TEST_CASE("midi parse: tick-to-seconds at default tempo") {
    // Note 49 at tick 960, PPQ 480, 120 BPM: one second.
    std::vector<std::uint8_t> track = {0x87, 0x40, 0x99, 49, 64};
    track.insert(track.end(), kEndOfTrack.begin(), kEndOfTrack.end());
    const OnsetParse p = parse_onsets_midi(smf(480, track));
    REQUIRE(p.onsets.size() == 1);
    CHECK(p.onsets[0].time == doctest::Approx(1.0));
    CHECK(p.onsets[0].class5 == DrumClass5::Cymbals);
}

TEST_CASE("midi parse honors tempo changes") {
    // 480 ticks at 120 BPM (0.5 s), then 480 ticks at 240 BPM (0.25 s).
    std::vector<std::uint8_t> track = {
        0x83, 0x60, 0xFF, 0x51, 0x03, 0x03, 0xD0, 0x90, // tempo 250000 at tick 480
        0x83, 0x60, 0x99, 36, 90,                       // note at tick 960
    };
    track.insert(track.end(), kEndOfTrack.begin(), kEndOfTrack.end());
    const OnsetParse p = parse_onsets_midi(smf(480, track));
    REQUIRE(p.onsets.size() == 1);
    CHECK(p.onsets[0].time == doctest::Approx(0.75));
}

TEST_CASE("midi parse: cowbell is skipped with a counted warning") {
    std::vector<std::uint8_t> track = {0x00, 0x99, 36, 80, 0x00, 0x99, 56, 80};
    track.insert(track.end(), kEndOfTrack.begin(), kEndOfTrack.end());
    const OnsetParse p = parse_onsets_midi(smf(480, track));
    CHECK(p.onsets.size() == 1);
    CHECK(p.skipped == 1);
}

TEST_CASE("midi parse: only unmapped notes raises NoNotes") {
    std::vector<std::uint8_t> track = {0x00, 0x99, 56, 80};
    track.insert(track.end(), kEndOfTrack.begin(), kEndOfTrack.end());
    try {
        parse_onsets_midi(smf(480, track));
        FAIL("expected NoNotes");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_notes);
    }
}

TEST_CASE("midi parse: running status") {
    std::vector<std::uint8_t> track = {0x00, 0x99, 36, 80, 0x60, 38, 70};
    track.insert(track.end(), kEndOfTrack.begin(), kEndOfTrack.end());
    const OnsetParse p = parse_onsets_midi(smf(480, track));
    REQUIRE(p.onsets.size() == 2);
    CHECK(p.onsets[1].time == doctest::Approx(0.1));
    CHECK(p.onsets[1].class5 == DrumClass5::Snare);
}

TEST_CASE("midi parse: malformed input") {
    std::vector<std::uint8_t> garbage = {'M', 'T', 'h', 'x', 0, 0};
    CHECK_THROWS_AS(parse_onsets_midi(garbage), Error);

    auto truncated = smf(480, {0x00, 0x99, 36, 80});
    truncated.resize(truncated.size() - 2); // cut into the track body
    try {
        parse_onsets_midi(truncated);
        FAIL("expected MalformedSMF");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_smf);
    }
}

TEST_CASE("tsv onset parsing") {
    const OnsetParse p = parse_onsets_tsv("# comment\n0.500\tSD\n\n1.0\t42\n");
    REQUIRE(p.onsets.size() == 2);
    CHECK(p.onsets[0].time == doctest::Approx(0.5));
    CHECK(p.onsets[0].class5 == DrumClass5::Snare);
    CHECK(p.onsets[1].time == doctest::Approx(1.0));
    CHECK(p.onsets[1].class5 == DrumClass5::HiHat);
}

TEST_CASE("tsv onset parsing: malformed time names the line") {
    try {
        parse_onsets_tsv("abc\tKD\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("tsv onset parsing: unmapped note numbers are skipped") {
    const OnsetParse p = parse_onsets_tsv("0.1\t36\n0.2\t56\n");
    CHECK(p.onsets.size() == 1);
    CHECK(p.skipped == 1);
}

TEST_CASE("tsv onset parsing sorts its output") {
    const OnsetParse p = parse_onsets_tsv("2.0\tKD\n1.0\tSD\n");
    CHECK(p.onsets[0].time == doctest::Approx(1.0));
    CHECK(p.onsets[1].time == doctest::Approx(2.0));
}

TEST_CASE("midi writer: first note-on carries the output map") {
    const std::vector<NoteEvent> notes = {{0.0, DrumClass7::Kick, 100}};
    const auto bytes = encode_midi(notes);
    const auto raw = parse_midi_notes(bytes);
    REQUIRE(raw.size() == 1);
    CHECK(raw[0].note == 36);
    CHECK(raw[0].velocity == 100);
    CHECK(raw[0].time == 0.0);
}

TEST_CASE("midi writer omits zero-velocity notes") {
    const std::vector<NoteEvent> notes = {{0.0, DrumClass7::Kick, 0},
                                          {0.5, DrumClass7::Snare, 64}};
    const auto raw = parse_midi_notes(encode_midi(notes));
    REQUIRE(raw.size() == 1);
    CHECK(raw[0].note == 38);
}

TEST_CASE("midi round trip preserves times within a tick and classes exactly") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> time_dist(0.0, 120.0);
    std::uniform_int_distribution<int> vel_dist(1, 127);
    std::uniform_int_distribution<int> cls_dist(0, 6);

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<NoteEvent> notes;
        const int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            notes.push_back({time_dist(rng), static_cast<DrumClass7>(cls_dist(rng)),
                             vel_dist(rng)});
        }
        std::sort(notes.begin(), notes.end(),
                  [](const NoteEvent& a, const NoteEvent& b) { return a.time < b.time; });

        const OnsetParse p = parse_onsets_midi(encode_midi(notes));
        REQUIRE(p.onsets.size() == notes.size());
        for (std::size_t i = 0; i < notes.size(); ++i) {
            CHECK(std::abs(p.onsets[i].time - notes[i].time) <= 1.0 / 960.0 + 1e-9);
            CHECK(p.onsets[i].class5 == project_to_5(notes[i].class7));
        }
    }
}

TEST_CASE("notes tsv formatting") {
    const std::vector<NoteEvent> notes = {{0.25, DrumClass7::HiHatOpen, 90}};
    CHECK(format_notes_tsv(notes) == "0.250\tHHO\t90\n");
    CHECK(format_notes_tsv({}) == "");
    CHECK(parse_notes_tsv("").empty());
}

TEST_CASE("notes tsv round trip at millisecond precision") {
    std::mt19937 rng(4242);
    std::uniform_int_distribution<int> ms_dist(0, 200000);
    std::uniform_int_distribution<int> vel_dist(0, 127);
    std::uniform_int_distribution<int> cls_dist(0, 6);

    std::vector<NoteEvent> notes;
    for (int i = 0; i < 1000; ++i) {
        notes.push_back({ms_dist(rng) / 1000.0, static_cast<DrumClass7>(cls_dist(rng)),
                         vel_dist(rng)});
    }
    std::sort(notes.begin(), notes.end(),
              [](const NoteEvent& a, const NoteEvent& b) { return a.time < b.time; });

    const auto back = parse_notes_tsv(format_notes_tsv(notes));
    REQUIRE(back.size() == notes.size());
    for (std::size_t i = 0; i < notes.size(); ++i) {
        CHECK(back[i].time == doctest::Approx(notes[i].time).epsilon(1e-9));
        CHECK(back[i].class7 == notes[i].class7);
        CHECK(back[i].velocity == notes[i].velocity);
    }
}

TEST_CASE("notes tsv parse errors carry line numbers") {
    try {
        parse_notes_tsv("0.1\tHHO\t90\n0.2\tXX\t10\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_notes_tsv("0.1\tKD\t200\n"), Error);
    CHECK_THROWS_AS(parse_notes_tsv("0.1\tKD\n"), Error);
}

} // TEST_SUITE
