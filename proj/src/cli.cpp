#include "drumrefine/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "drumrefine/audio_io.hpp"
#include "drumrefine/evaluation.hpp"
#include "drumrefine/events.hpp"
#include "drumrefine/refine.hpp"
#include "drumrefine/synth.hpp"

namespace drumrefine {
namespace {

namespace fs = std::filesystem;

bool has_extension(const fs::path& p, std::string_view ext) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

bool is_midi_path(const fs::path& p) {
    return has_extension(p, ".mid") || has_extension(p, ".midi");
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::file_not_found, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<std::string> eval_label_from_midi_note(int note) {
    switch (note) {
        case 35: case 36: return "KD";
        case 38: case 40: return "SD";
        case 42: case 44: return "HHC";
        case 46: return "HHO";
        case 41: case 43: case 45: case 47: case 48: case 50: return "TT";
        case 49: case 52: case 55: case 57: return "CR";
        case 51: case 53: case 59: return "RD";
        case 56: return "CB";
        default: return std::nullopt;
    }
}

// Evaluation-side file reader. MIDI files map notes through the GM
// percussion table; TSV files may be 3-column (time, label, velocity) or
// 2-column onset lists (velocity unknown).
std::vector<EvalNote> read_eval_file(const fs::path& path, std::ostream& err) {
    std::vector<EvalNote> notes;
    if (is_midi_path(path)) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::file_not_found, "cannot open " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        int skipped = 0;
        for (const TimedMidiNote& n : parse_midi_notes(bytes)) {
            if (auto label = eval_label_from_midi_note(n.note)) {
                notes.push_back({n.time, *label, n.velocity});
            } else {
                skipped++;
            }
        }
        if (skipped > 0) {
            err << "warning: " << path.filename().string() << ": skipped " << skipped
                << " unmapped MIDI notes\n";
        }
        return notes;
    }

    static const char* kKnown[] = {"KD", "SD", "HH",  "TT",  "CY",
                                   "HHC", "HHO", "CR", "RD", "CB"};
    const std::string text = read_text_file(path);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string line = text.substr(
            start, nl == std::string::npos ? text.size() - start : nl - start);
        line_no++;
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string> fields;
        std::size_t fs_pos = 0;
        while (true) {
            const std::size_t tab = line.find('\t', fs_pos);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(fs_pos));
                break;
            }
            fields.push_back(line.substr(fs_pos, tab - fs_pos));
            fs_pos = tab + 1;
        }
        if (fields.size() != 2 && fields.size() != 3) {
            throw Error(Errc::parse_error, path.string() + ": line " +
                                               std::to_string(line_no) +
                                               ": expected 2 or 3 tab-separated fields");
        }

        EvalNote note;
        try {
            std::size_t used = 0;
            note.time = std::stod(fields[0], &used);
            if (used != fields[0].size() || note.time < 0.0) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw Error(Errc::parse_error, path.string() + ": line " +
                                               std::to_string(line_no) + ": bad time '" +
                                               fields[0] + "'");
        }
        note.label = fields[1];
        if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) {
                return note.label == k;
            }) == std::end(kKnown)) {
            throw Error(Errc::parse_error, path.string() + ": line " +
                                               std::to_string(line_no) +
                                               ": unknown label '" + note.label + "'");
        }
        if (fields.size() == 3) {
            try {
                std::size_t used = 0;
                note.velocity = std::stoi(fields[2], &used);
                if (used != fields[2].size() || note.velocity < 0 || note.velocity > 127) {
                    throw std::invalid_argument("");
                }
            } catch (const std::exception&) {
                throw Error(Errc::parse_error, path.string() + ": line " +
                                                   std::to_string(line_no) +
                                                   ": bad velocity '" + fields[2] + "'");
            }
        } else {
            note.velocity = -1;
        }
        notes.push_back(std::move(note));
    }
    return notes;
}

struct RefineOptions {
    std::string stems_dir;
    std::string onsets_path;
    std::string out_path;
    std::string config_path;
    std::string stem_map;
    std::string dump_curves_dir;
    bool also_tsv = false;
    std::map<std::string, std::string> overrides; // config key -> raw value
};

std::map<StemClass, fs::path> resolve_stem_paths(const RefineOptions& opt) {
    std::map<StemClass, std::string> names;
    for (StemClass stem : kAllStems) {
        names[stem] = std::string(label_of(stem)) + ".wav";
    }
    if (!opt.stem_map.empty()) {
        std::stringstream ss(opt.stem_map);
        std::string entry;
        while (std::getline(ss, entry, ',')) {
            const std::size_t eq = entry.find('=');
            if (eq == std::string::npos) {
                throw Error(Errc::config_error,
                            "--stem-map entries must look like crash=file.wav");
            }
            const std::string key = entry.substr(0, eq);
            bool found = false;
            for (StemClass stem : kAllStems) {
                if (key == label_of(stem)) {
                    names[stem] = entry.substr(eq + 1);
                    found = true;
                }
            }
            if (!found) {
                throw Error(Errc::config_error, "--stem-map: unknown stem '" + key + "'");
            }
        }
    }
    std::map<StemClass, fs::path> paths;
    for (StemClass stem : kAllStems) {
        paths[stem] = fs::path(opt.stems_dir) / names[stem];
    }
    return paths;
}

int cmd_refine(const RefineOptions& opt, std::ostream& out, std::ostream& err) {
    RefinementConfig cfg = opt.config_path.empty()
                               ? RefinementConfig{}
                               : load_config(opt.config_path);
    for (const auto& [key, value] : opt.overrides) {
        if (!apply_config_entry(cfg, key, value)) {
            throw Error(Errc::config_error, "unknown config key '" + key + "'");
        }
    }
    cfg.validate();

    const auto stem_paths = resolve_stem_paths(opt);
    for (const auto& [stem, path] : stem_paths) {
        if (!fs::exists(path)) {
            throw Error(Errc::file_not_found, "missing stem file: " + path.string());
        }
    }

    StemSet stems;
    for (const auto& [stem, path] : stem_paths) {
        stems.emplace(stem, load_wav(path));
    }

    OnsetParse parsed;
    if (is_midi_path(opt.onsets_path)) {
        parsed = parse_onsets_midi_file(opt.onsets_path);
    } else {
        // Accept both onset lists (time, label) and full transcriptions
        // (time, label, velocity); the latter collapse to 5-class onsets.
        const std::string text = read_text_file(opt.onsets_path);
        std::size_t tabs = 0;
        for (std::size_t pos = 0; pos < text.size();) {
            const std::size_t nl = text.find('\n', pos);
            const std::string_view line(text.data() + pos,
                                        (nl == std::string::npos ? text.size() : nl) - pos);
            pos = nl == std::string::npos ? text.size() : nl + 1;
            if (line.empty() || line.front() == '#' || line.front() == '\r') continue;
            tabs = static_cast<std::size_t>(std::count(line.begin(), line.end(), '\t'));
            break;
        }
        if (tabs >= 2) {
            for (const NoteEvent& n : parse_notes_tsv(text)) {
                parsed.onsets.push_back({n.time, project_to_5(n.class7)});
            }
        } else {
            parsed = parse_onsets_tsv(text);
        }
    }
    if (parsed.skipped > 0) {
        err << "warning: skipped " << parsed.skipped << " unmapped notes in "
            << opt.onsets_path << "\n";
    }

    RefineResult result;
    try {
        const CurveGroup group = build_stem_curves(stems, cfg);
        if (!opt.dump_curves_dir.empty()) {
            fs::create_directories(opt.dump_curves_dir);
            for (const auto& [stem, curve] : group.curves) {
                std::string tsv;
                char buf[64];
                for (std::size_t i = 0; i < curve.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%.3f\t%.4f\n", curve.frame_time(i),
                                  curve.values[i]);
                    tsv += buf;
                }
                write_file_atomic(fs::path(opt.dump_curves_dir) /
                                      (std::string(label_of(stem)) + ".tsv"),
                                  tsv);
            }
        }
        result = refine_with_curves(parsed.onsets, group, cfg);
    } catch (const Error& e) {
        if (e.code() != Errc::all_curves_at_floor) throw;
        err << "warning: all stems silent, every onset dropped at zero velocity\n";
    }
    double shortest = std::numeric_limits<double>::infinity(), longest = 0.0;
    for (const auto& [stem, clip] : stems) {
        shortest = std::min(shortest, clip.duration_seconds());
        longest = std::max(longest, clip.duration_seconds());
    }
    if (longest - shortest > 0.1) {
        err << "warning: stem durations differ by "
            << (longest - shortest) << " s\n";
    }

    write_midi(result.notes, opt.out_path);
    if (opt.also_tsv) {
        fs::path tsv_path = opt.out_path;
        tsv_path.replace_extension(".tsv");
        write_notes_tsv(result.notes, tsv_path);
    }

    std::map<DrumClass7, int> counts;
    for (const NoteEvent& n : result.notes) counts[n.class7]++;
    for (DrumClass7 c : kAllClasses7) {
        out << label_of(c) << ": " << counts[c] << "\n";
    }
    out << "wrote " << opt.out_path << " (" << result.notes.size() << " notes, "
        << (parsed.onsets.size() - result.notes.size()) << " dropped at zero velocity)\n";
    return 0;
}

int cmd_eval(const std::string& ref_path, const std::string& est_path, int classes,
             double tolerance, bool as_json, std::ostream& out, std::ostream& err) {
    const auto vocabulary = vocabulary_from_int(classes);
    if (!vocabulary) {
        throw Error(Errc::config_error, "--classes must be 5, 7 or 8");
    }
    const auto ref = read_eval_file(ref_path, err);
    const auto est = read_eval_file(est_path, err);
    const EvalReport report = evaluate(ref, est, *vocabulary, tolerance);
    out << (as_json ? format_report_json(report) : format_report_text(report));
    return 0;
}

int cmd_synth(const std::string& score_path, const std::string& out_dir,
              std::uint64_t seed, int rate, double duration, std::ostream& out) {
    if (!is_supported_sample_rate(rate)) {
        throw Error(Errc::config_error, "--rate must be 44100 or 48000");
    }
    std::vector<NoteEvent> events = read_notes_tsv_file(score_path);
    const InstrumentModels models = default_models();
    Score score = make_score(std::move(events), rate, models);
    if (duration > 0.0) {
        if (!score.events.empty() && score.events.back().time >= duration) {
            throw Error(Errc::config_error, "--duration must exceed the last event time");
        }
        score.duration = duration;
    }

    const Session session = render_session(score, models, seed);
    fs::create_directories(out_dir);
    for (const auto& [stem, clip] : session.stems) {
        write_wav16(clip, fs::path(out_dir) / (std::string(label_of(stem)) + ".wav"));
    }
    write_midi(session.reference, fs::path(out_dir) / "reference.mid");
    write_notes_tsv(session.reference, fs::path(out_dir) / "reference.tsv");
    out << "rendered " << session.reference.size() << " events, "
        << score.duration << " s at " << rate << " Hz into " << out_dir << "\n";
    return 0;
}

int cmd_gain(const std::string& in_path, std::ostream& out, std::ostream& err) {
    const AudioClip clip = load_wav(in_path);
    const ReplayGainAnalysis analysis = replaygain_analyze(clip);
    if (analysis.all_silent) {
        err << "warning: signal at silence floor, gain forced to 0 dB\n";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f dB\n", analysis.gain_db);
    out << buf;
    return 0;
}

int cmd_stats(const std::string& notes_path, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
    std::vector<NoteEvent> notes;
    if (is_midi_path(notes_path)) {
        for (const EvalNote& n : read_eval_file(notes_path, err)) {
            const auto cls = class7_from_label(n.label);
            if (!cls) continue; // cowbell and friends have no histogram row
            notes.push_back({n.time, *cls, std::max(n.velocity, 0)});
        }
    } else {
        notes = read_notes_tsv_file(notes_path);
    }

    std::map<DrumClass7, std::array<long, 128>> histogram;
    for (const NoteEvent& n : notes) {
        if (n.velocity < 0 || n.velocity > 127) continue;
        auto& bins = histogram.try_emplace(n.class7).first->second;
        bins[static_cast<std::size_t>(n.velocity)]++;
    }

    std::string csv = "class";
    for (int b = 0; b < 128; ++b) csv += "," + std::to_string(b);
    csv += "\n";
    for (DrumClass7 c : kAllClasses7) {
        const auto it = histogram.find(c);
        if (it == histogram.end()) continue;
        csv += std::string(label_of(c));
        for (long count : it->second) csv += "," + std::to_string(count);
        csv += "\n";
    }
    write_file_atomic(out_path, csv);
    out << "wrote " << out_path << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"refine a 5-class drum transcription into 7-class velocity-"
                 "annotated MIDI using separated drum stems"};
    app.require_subcommand(1);

    // refine ----------------------------------------------------------------
    RefineOptions ropt;
    auto* refine = app.add_subcommand(
        "refine", "estimate velocities and split hi-hat/cymbal classes");
    refine->add_option("--stems", ropt.stems_dir, "directory with the six stem WAVs")
        ->required();
    refine->add_option("--onsets", ropt.onsets_path, "5-class onsets (.mid or .tsv)")
        ->required();
    refine->add_option("--out", ropt.out_path, "output MIDI path")->required();
    refine->add_option("--config", ropt.config_path, "key = value config file");
    refine->add_option("--stem-map", ropt.stem_map,
                       "override stem filenames, e.g. crash=cr.wav,ride=rd.wav");
    refine->add_flag("--tsv", ropt.also_tsv, "also write a TSV next to the MIDI");
    refine->add_option("--dump-curves", ropt.dump_curves_dir,
                       "write per-stem loudness curves as TSV into this directory");

    static const char* kConfigKeys[] = {
        "velocity_window_seconds", "velocity_floor_db", "hihat_window_cap_seconds",
        "hihat_sustain_ratio",     "refraction_lead_seconds", "crash_peak_min_db",
        "crash_peak_prominence_db", "peak_onset_grace_seconds", "rms_window_samples",
        "rms_hop_seconds",         "db_floor", "velocity_floor_mode",
        "hihat_threshold_mode",    "hihat_db_drop"};
    std::map<std::string, std::string> override_values;
    for (const char* key : kConfigKeys) {
        std::string flag = "--" + std::string(key);
        std::replace(flag.begin(), flag.end(), '_', '-');
        refine->add_option_function<std::string>(
            flag,
            [&override_values, key](const std::string& v) { override_values[key] = v; },
            std::string("override config field ") + key);
    }

    // eval ------------------------------------------------------------------
    std::string eval_ref, eval_est;
    int eval_classes = 5;
    double eval_tolerance = 0.05;
    bool eval_json = false;
    auto* eval_cmd = app.add_subcommand(
        "eval", "onset precision/recall/F against a reference transcription");
    eval_cmd->add_option("--ref", eval_ref, "reference file (.mid or .tsv)")->required();
    eval_cmd->add_option("--est", eval_est, "estimate file (.mid or .tsv)")->required();
    eval_cmd->add_option("--classes", eval_classes, "vocabulary size: 5, 7 or 8")
        ->check(CLI::IsMember({5, 7, 8}));
    eval_cmd->add_option("--tolerance", eval_tolerance, "onset tolerance in seconds");
    eval_cmd->add_flag("--json", eval_json, "emit the report as JSON");

    // synth -----------------------------------------------------------------
    std::string synth_score, synth_out;
    std::uint64_t synth_seed = 42;
    int synth_rate = 44100;
    double synth_duration = 0.0;
    auto* synth_cmd = app.add_subcommand(
        "synth", "render test stems and a reference transcription from a score");
    synth_cmd->add_option("--score", synth_score, "score TSV (time, label, velocity)")
        ->required();
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "noise seed");
    synth_cmd->add_option("--rate", synth_rate, "sample rate (44100 or 48000)");
    synth_cmd->add_option("--duration", synth_duration, "override rendered length");

    // gain ------------------------------------------------------------------
    std::string gain_in;
    auto* gain_cmd = app.add_subcommand("gain", "print the track gain of a WAV file");
    gain_cmd->add_option("--in", gain_in, "input WAV")->required();

    // stats -----------------------------------------------------------------
    std::string stats_notes, stats_out;
    auto* stats_cmd = app.add_subcommand(
        "stats", "per-class velocity histogram CSV from a transcription");
    stats_cmd->add_option("--notes", stats_notes, "notes file (.mid or .tsv)")->required();
    stats_cmd->add_option("--out", stats_out, "output CSV path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (refine->parsed()) {
            ropt.overrides = override_values;
            return cmd_refine(ropt, out, err);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_ref, eval_est, eval_classes, eval_tolerance,
                            eval_json, out, err);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(synth_score, synth_out, synth_seed, synth_rate,
                             synth_duration, out);
        }
        if (gain_cmd->parsed()) {
            return cmd_gain(gain_in, out, err);
        }
        if (stats_cmd->parsed()) {
            return cmd_stats(stats_notes, stats_out, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == Errc::config_error ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace drumrefine
