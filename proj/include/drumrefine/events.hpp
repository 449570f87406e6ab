#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drumrefine/error.hpp"

namespace drumrefine {

// Transcription input vocabulary (five coarse drum classes).
enum class DrumClass5 { Kick, Snare, HiHat, Toms, Cymbals };

// Refined output vocabulary.
enum class DrumClass7 { Kick, Snare, HiHatClosed, HiHatOpen, Toms, Crash, Ride };

// Separated-stem vocabulary (cymbals split into crash and ride).
enum class StemClass { Kick, Snare, Toms, HiHat, Crash, Ride };

inline constexpr DrumClass5 kAllClasses5[] = {
    DrumClass5::Kick, DrumClass5::Snare, DrumClass5::HiHat,
    DrumClass5::Toms, DrumClass5::Cymbals};
inline constexpr DrumClass7 kAllClasses7[] = {
    DrumClass7::Kick,       DrumClass7::Snare, DrumClass7::HiHatClosed,
    DrumClass7::HiHatOpen,  DrumClass7::Toms,  DrumClass7::Crash,
    DrumClass7::Ride};
inline constexpr StemClass kAllStems[] = {
    StemClass::Kick,  StemClass::Snare, StemClass::Toms,
    StemClass::HiHat, StemClass::Crash, StemClass::Ride};

DrumClass5 project_to_5(DrumClass7 c);
StemClass stem_for_class(DrumClass7 c);

std::string_view label_of(DrumClass5 c);  // KD SD HH TT CY
std::string_view label_of(DrumClass7 c);  // KD SD HHC HHO TT CR RD
std::string_view label_of(StemClass c);   // kick snare toms hihat crash ride
std::optional<DrumClass5> class5_from_label(std::string_view label);
std::optional<DrumClass7> class7_from_label(std::string_view label);

struct OnsetEvent {
    double time = 0.0; // seconds
    DrumClass5 class5 = DrumClass5::Kick;
};

struct NoteEvent {
    double time = 0.0; // seconds
    DrumClass7 class7 = DrumClass7::Kick;
    int velocity = 0; // 0-127
};

// Note-number grouping for 5-class transcription input. Permissive across
// the General MIDI percussion map; unmapped notes are skipped and counted.
std::optional<DrumClass5> class5_from_midi_note(int note);
// One canonical GM note per output class.
int midi_note_for(DrumClass7 c);

struct OnsetParse {
    std::vector<OnsetEvent> onsets; // sorted by time
    int skipped = 0;                // unmapped note-ons
};

// Standard MIDI file reader (type 0/1, tempo map honored, running status,
// default 120 BPM when no tempo event is present).
OnsetParse parse_onsets_midi(std::span<const std::uint8_t> bytes);
OnsetParse parse_onsets_midi_file(const std::filesystem::path& path);

// Raw note-ons (velocity > 0) with the tempo map applied, before any class
// mapping. Used by the evaluation readers, which carry their own vocabulary.
struct TimedMidiNote {
    double time = 0.0;
    int note = 0;
    int velocity = 0;
};
std::vector<TimedMidiNote> parse_midi_notes(std::span<const std::uint8_t> bytes);

// Lines of "time<TAB>label"; label is KD/SD/HH/TT/CY or a MIDI note number.
// Blank lines and '#' comments ignored.
OnsetParse parse_onsets_tsv(std::string_view text);

// SMF type 0, PPQ 480, fixed 120 BPM, channel 10, 100 ms note gate.
// Zero-velocity notes are omitted from the file.
std::vector<std::uint8_t> encode_midi(std::span<const NoteEvent> notes);
void write_midi(std::span<const NoteEvent> notes,
                const std::filesystem::path& path);

// Seven-class TSV: "time<TAB>label<TAB>velocity" at millisecond precision.
std::string format_notes_tsv(std::span<const NoteEvent> notes);
std::vector<NoteEvent> parse_notes_tsv(std::string_view text);
void write_notes_tsv(std::span<const NoteEvent> notes,
                     const std::filesystem::path& path);
std::vector<NoteEvent> read_notes_tsv_file(const std::filesystem::path& path);

constexpr int kMidiPpq = 480;
constexpr int kMidiTempoUsPerQuarter = 500000; // 120 BPM
constexpr double kMidiTicksPerSecond = 960.0;  // PPQ 480 at 120 BPM
constexpr double kNoteGateSeconds = 0.100;

} // namespace drumrefine
