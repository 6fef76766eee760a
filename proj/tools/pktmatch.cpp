// pktmatch: command-line front end for trace ingest, fingerprint extraction,
// matching, tracking, scoring, simulation and defenses.

#include <openssl/evp.h>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pktmatch/extractor.hpp"
#include "pktmatch/ingest.hpp"
#include "pktmatch/io.hpp"
#include "pktmatch/matcher.hpp"
#include "pktmatch/records.hpp"
#include "pktmatch/simulator.hpp"
#include "pktmatch/tracker.hpp"

namespace fs = std::filesystem;
using namespace pktmatch;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string params_file;
    bool json = false;
    std::string out = "pktmatch-out";
};

// Match-parameter flags shared by several subcommands.
struct ParamFlags {
    std::optional<int> epsilon;
    std::optional<double> gamma;
    std::optional<double> beta;
    std::optional<double> alpha;
    std::optional<double> seg_gap;
    std::optional<int> seg_min;

    void attach(CLI::App* app) {
        app->add_option("--epsilon", epsilon, "size tolerance in bytes (strict)");
        app->add_option("--gamma", gamma, "minimum matched fraction");
        app->add_option("--beta", beta, "alignment distance bound, seconds");
        app->add_option("--alpha", alpha, "anchor interval tolerance, seconds");
        app->add_option("--seg-gap", seg_gap, "segmentation gap, seconds");
        app->add_option("--seg-min", seg_min, "minimum segment size");
    }

    Json overrides() const {
        Json j = Json::object();
        if (epsilon) j["epsilon"] = *epsilon;
        if (gamma) j["gamma"] = *gamma;
        if (beta) j["beta"] = *beta;
        if (alpha) j["alpha"] = *alpha;
        if (seg_gap) j["seg_gap"] = *seg_gap;
        if (seg_min) j["seg_min"] = *seg_min;
        return j;
    }
};

// Built-in default < base (e.g. a fingerprint's own params) < params file < flags.
MatchParams resolve_params(const Globals& g, const ParamFlags& flags, MatchParams base = {}) {
    if (!g.params_file.empty()) {
        Json j = read_json(g.params_file);
        if (j.contains("params")) j = j["params"];
        base = params_from_json(j, base);
    }
    return params_from_json(flags.overrides(), base);
}

// Collects written files and emits manifest.json next to them.
class Run {
public:
    Run(std::string subcommand, const Globals& g) : subcommand_(std::move(subcommand)), globals_(g) {}

    fs::path dir() const { return globals_.out; }

    void input(const std::string& path) {
        if (path.empty()) return;
        inputs_.push_back({{"path", path}, {"sha256", sha256_hex(read_text(path))}});
    }

    void write(const fs::path& path, const std::string& content) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_text(path, content);
        outputs_[path.filename().string()] = sha256_hex(content);
    }

    void write_json(const std::string& name, const Json& j) { write(dir() / name, dump_json(j)); }

    void finish(const fs::path& manifest_path, const Json& parameters, const Json& summary) {
        Json outputs = Json::object();
        for (const auto& [name, digest] : outputs_) outputs[name] = digest;
        Json m = {{"tool", "pktmatch"},
                  {"version", kVersion},
                  {"subcommand", subcommand_},
                  {"inputs", inputs_},
                  {"parameters", parameters},
                  {"seed", globals_.seed ? Json(*globals_.seed) : Json(nullptr)},
                  {"outputs", outputs}};
        if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
        write_text(manifest_path, dump_json(m));
        if (globals_.json) {
            std::cout << summary.dump() << "\n";
        } else {
            for (const auto& [k, v] : summary.items()) std::cout << k << ": " << v.dump() << "\n";
        }
    }

    void finish(const Json& parameters, const Json& summary) { finish(dir() / "manifest.json", parameters, summary); }

private:
    std::string subcommand_;
    const Globals& globals_;
    Json inputs_ = Json::array();
    std::map<std::string, std::string> outputs_;
};

std::uint64_t require_seed(const Globals& g, const std::string& cmd) {
    if (!g.seed) throw Error(cmd + " needs --seed");
    return *g.seed;
}

std::vector<Observation> load_sequence(const std::string& path) {
    if (fs::path(path).extension() == ".csv") return observations(read_trace_csv(path));
    const Json j = read_json(path);
    if (j.is_object() && j.contains("packets")) {
        std::vector<Observation> out;
        for (const auto& p : j["packets"]) {
            const auto dir = parse_direction(p.at("dir").get<std::string>());
            if (!dir) throw Error(path + ": invalid direction");
            const double t = p.contains("dt") ? p["dt"].get<double>() : p.at("t").get<double>();
            out.push_back({t, p.at("size").get<int>(), *dir});
        }
        return out;
    }
    throw Error(path + ": expected a trace CSV or a JSON object with 'packets'");
}

Json groups_to_json(const std::vector<TrainingGroup>& groups) {
    Json arr = Json::array();
    for (const auto& g : groups) {
        Json packets = Json::array();
        for (const auto& p : g.packets)
            packets.push_back({{"t", p.time}, {"size", p.size}, {"dir", std::string(to_string(p.dir))}});
        arr.push_back({{"group_id", g.group_id},
                       {"event_id", g.event_id},
                       {"label", g.label},
                       {"empty", g.packets.empty()},
                       {"packets", packets}});
    }
    return arr;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string in;
    std::string labels;
    std::string freq = "auto";
    bool no_freq = false;
    double rate = 50.0;
    bool slice = false;
    double window = kGroupWindow;
};

int cmd_ingest(const Globals& g, const IngestArgs& a) {
    if (a.slice && a.labels.empty()) throw Error("--slice needs --labels");
    IngestOptions opt;
    opt.high_traffic_rate = a.rate;
    if (a.no_freq || a.freq == "off") {
        opt.frequency_filter = FrequencyFilter::Off;
    } else if (a.freq == "on") {
        opt.frequency_filter = FrequencyFilter::On;
    } else if (a.freq != "auto") {
        throw Error("--freq-filter must be auto, on or off");
    }

    Run run("ingest", g);
    run.input(a.in);
    run.input(a.labels);
    const Trace raw = load_trace(a.in, a.labels.empty() ? std::nullopt : std::optional<fs::path>(a.labels));
    raw.validate();
    IngestReport report;
    const Trace clean = preprocess(raw, opt, &report);

    // --out may name the cleaned CSV directly; other files go next to it.
    const fs::path out(g.out);
    const bool file_mode = out.extension() == ".csv";
    const fs::path dir = file_mode ? (out.has_parent_path() ? out.parent_path() : fs::path(".")) : out;
    const std::string stem = file_mode ? out.stem().string() + "." : "";
    run.write(file_mode ? out : dir / "trace.csv", format_trace_csv(clean.packets));
    if (!a.labels.empty()) run.write(dir / (stem + "labels.json"), dump_json(labels_to_json(clean.labels)));
    Json rep = ingest_report_to_json(report);
    if (a.slice) {
        const auto groups = slice_groups(clean, a.window);
        std::size_t empty = 0;
        for (const auto& gr : groups) empty += gr.packets.empty() ? 1 : 0;
        rep["groups"] = groups.size();
        rep["empty_groups"] = empty;
        run.write(dir / (stem + "groups.json"), dump_json(groups_to_json(groups)));
    }
    run.write(dir / (stem + "report.json"), dump_json(rep));

    Json params = {{"frequency_filter", a.no_freq ? "off" : a.freq},
                   {"high_traffic_rate", a.rate},
                   {"slice", a.slice},
                   {"window", a.window}};
    run.finish(dir / (stem + "manifest.json"), params,
               {{"input_packets", report.input_packets}, {"output_packets", report.output_packets}});
    return 0;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    std::string trace;
    std::string labels;
    std::string label;
    double rho = 1.0;
    std::size_t min_support = 0;
    bool skip_ingest = false;
    ParamFlags params;
};

int cmd_extract(const Globals& g, const ExtractArgs& a) {
    Run run("extract", g);
    run.input(a.trace);
    run.input(a.labels);
    const MatchParams params = resolve_params(g, a.params);
    Trace trace = load_trace(a.trace, fs::path(a.labels));
    trace.validate();
    if (!a.skip_ingest) trace = preprocess(trace);

    std::string label = a.label;
    if (label.empty()) {
        std::vector<std::string> names;
        for (const auto& l : trace.labels)
            if (std::find(names.begin(), names.end(), l.label) == names.end()) names.push_back(l.label);
        if (names.size() != 1) throw Error("labels hold " + std::to_string(names.size()) + " event names; pick one with --label");
        label = names.front();
    }
    std::vector<TrainingGroup> groups;
    for (auto& gr : slice_groups(trace))
        if (gr.label == label) groups.push_back(std::move(gr));
    if (groups.size() < 2)
        throw Error("need >= 2 groups, found " + std::to_string(groups.size()) + " for label '" + label +
                    "'; record more event instances");

    ExtractOptions opt;
    opt.refine.rho = a.rho;
    opt.min_support = a.min_support;
    ExtractionReport report;
    Fingerprint fp;
    try {
        fp = extract(groups, label, params, opt, &report);
    } catch (const Error& e) {
        throw Error(std::string(e.what()) + " (try --rho below 1 or --min-support to loosen refinement)");
    }
    run.write_json("fingerprint.json", fingerprint_to_json(fp));
    run.write_json("extraction_report.json", extraction_report_to_json(report));
    Json p = params_to_json(params);
    p["rho"] = a.rho;
    p["min_support"] = report.min_support;
    p["label"] = label;
    run.finish(p, {{"label", label}, {"groups", groups.size()}, {"packets", fp.packets.size()},
                   {"segments", fp.segments.size()}});
    return 0;
}

// ---------------------------------------------------------------- match

struct MatchArgs {
    std::string fp;
    std::string target;
    std::string matcher = "afmlcs";
    ParamFlags params;
};

int cmd_match(const Globals& g, const MatchArgs& a) {
    Run run("match", g);
    run.input(a.fp);
    run.input(a.target);
    Fingerprint fp = read_fingerprint(a.fp);
    const MatchParams params = resolve_params(g, a.params, fp.params);
    if (fp.segments.empty()) fp = segment(fp, params);
    const auto target = load_sequence(a.target);
    MatchResult r;
    if (a.matcher == "fmlcs") {
        r = fmlcs(fp, target, params);
    } else if (a.matcher == "afmlcs") {
        r = afmlcs(fp, target, params);
    } else {
        throw Error("--matcher must be fmlcs or afmlcs");
    }
    Json result = match_result_to_json(r);
    result["fingerprint_length"] = fp.packets.size();
    result["required"] = params.required_matches(fp.packets.size());
    run.write_json("match.json", result);
    Json p = params_to_json(params);
    p["matcher"] = a.matcher;
    run.finish(p, {{"success", r.success}, {"matched", r.pairs.size()}, {"distance", number_or_null(r.distance)}});
    return 0;
}

// ---------------------------------------------------------------- track

struct TrackArgs {
    std::string fps;
    std::string trace;
    std::string labels;
    std::string scenario = "multi_target";
    std::string target;
    std::string matcher = "auto";
    double tolerance = kScoreTolerance;
    ParamFlags params;
};

int cmd_track(const Globals& g, const TrackArgs& a) {
    Run run("track", g);
    std::vector<Fingerprint> fps;
    for (const auto& path : split_list(a.fps)) {
        run.input(path);
        fps.push_back(read_fingerprint(path));
    }
    if (fps.empty()) throw Error("--fp needs at least one fingerprint file");
    run.input(a.trace);
    run.input(a.labels);
    const MatchParams params = resolve_params(g, a.params, fps.front().params);
    const auto scenario = parse_scenario(a.scenario);
    if (!scenario) throw Error("--scenario must be naive, single_target or multi_target");
    TrackOptions opt;
    if (a.matcher == "fmlcs") {
        opt.matcher = MatcherKind::Fmlcs;
    } else if (a.matcher == "afmlcs") {
        opt.matcher = MatcherKind::Afmlcs;
    } else if (a.matcher != "auto") {
        throw Error("--matcher must be auto, fmlcs or afmlcs");
    }
    const Trace trace = load_trace(a.trace, a.labels.empty() ? std::nullopt : std::optional<fs::path>(a.labels));
    trace.validate();
    const auto outcome = run_scenario(*scenario, fps, trace, a.target.empty() ? std::nullopt : std::optional(a.target),
                                      params, opt, a.tolerance);
    run.write(run.dir() / "detections.jsonl", format_detections(outcome.detections));
    Json summary = {{"detections", outcome.detections.size()}};
    if (!a.labels.empty()) {
        run.write_json("score.json", score_to_json(outcome.report));
        summary["recall"] = score_to_json(outcome.report)["overall"]["recall"];
        summary["precision"] = score_to_json(outcome.report)["overall"]["precision"];
    }
    Json p = params_to_json(params);
    p["scenario"] = a.scenario;
    p["target"] = a.target.empty() ? Json(nullptr) : Json(a.target);
    p["matcher"] = a.matcher;
    p["tolerance"] = a.tolerance;
    run.finish(p, summary);
    return 0;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
    std::string detections;
    std::string labels;
    std::string target;
    double tolerance = kScoreTolerance;
};

int cmd_score(const Globals& g, const ScoreArgs& a) {
    Run run("score", g);
    run.input(a.detections);
    run.input(a.labels);
    auto detections = parse_detections(read_text(a.detections));
    auto truth = read_labels_json(a.labels);
    if (!a.target.empty()) {
        std::erase_if(detections, [&](const Detection& d) { return d.label != a.target; });
        std::erase_if(truth, [&](const EventLabel& e) { return e.label != a.target; });
    }
    const auto report = score(detections, truth, a.tolerance);
    const Json j = score_to_json(report);
    run.write_json("score.json", j);
    run.finish({{"tolerance", a.tolerance}, {"target", a.target.empty() ? Json(nullptr) : Json(a.target)}},
               j["overall"]);
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
    const std::uint64_t seed = require_seed(g, "simulate");
    Run run("simulate", g);
    run.input(a.config);
    ScenarioConfig config = scenario_from_json(read_json(a.config));
    config.seed = seed;
    OverheadReport overhead;
    const Trace trace = generate(config, &overhead);
    run.write(run.dir() / "trace.csv", format_trace_csv(trace.packets));
    run.write_json("labels.json", labels_to_json(trace.labels));
    if (config.defense) run.write_json("overhead.json", overhead_to_json(overhead));
    run.finish(scenario_to_json(config), {{"packets", trace.packets.size()}, {"events", trace.labels.size()}});
    return 0;
}

// ---------------------------------------------------------------- defend

struct DefendArgs {
    std::string trace;
    std::string labels;
    std::string kind;
    std::optional<double> delay_max;
    std::optional<double> shape_rate;
    std::optional<int> pad_max;
    std::optional<double> burst_gap;
};

int cmd_defend(const Globals& g, const DefendArgs& a) {
    const std::uint64_t seed = require_seed(g, "defend");
    Run run("defend", g);
    run.input(a.trace);
    run.input(a.labels);
    DefenseConfig d;
    const auto kind = parse_defense_kind(a.kind);
    if (!kind) throw Error("--kind must be delay, shape or pad");
    d.kind = *kind;
    if (a.delay_max) d.delay_max = *a.delay_max;
    if (a.shape_rate) d.shape_rate = *a.shape_rate;
    if (a.pad_max) d.pad_max = *a.pad_max;
    if (a.burst_gap) d.burst_gap = *a.burst_gap;
    const Trace trace = load_trace(a.trace, a.labels.empty() ? std::nullopt : std::optional<fs::path>(a.labels));
    const auto [defended, overhead] = apply_defense(trace, d, seed);
    run.write(run.dir() / "trace.csv", format_trace_csv(defended.packets));
    if (!a.labels.empty()) run.write_json("labels.json", labels_to_json(defended.labels));
    run.write_json("overhead.json", overhead_to_json(overhead));
    run.finish(defense_to_json(d), overhead_to_json(overhead));
    return 0;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
    std::string a;
    std::string b;
    ParamFlags params;
};

int cmd_oracle(const Globals& g, const OracleArgs& a) {
    Run run("oracle", g);
    run.input(a.a);
    run.input(a.b);
    const MatchParams params = resolve_params(g, a.params);
    const auto s1 = load_sequence(a.a);
    const auto s2 = load_sequence(a.b);
    const auto r = oracle_ntlcs(s1, s2, params);
    const Json j = {{"max_length", r.max_length}, {"min_distance", number_or_null(r.min_distance)}};
    run.write_json("oracle.json", j);
    run.finish(params_to_json(params), j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Packet-level event fingerprinting and matching toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "seed for all randomness")->check(CLI::NonNegativeNumber);
    app.add_option("--params", g.params_file, "JSON file with match parameters")->check(CLI::ExistingFile);
    app.add_flag("--json", g.json, "print a JSON summary on stdout");
    app.add_option("--out", g.out, "output directory (ingest also accepts a .csv path)");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "filter, dedup and compress a raw trace");
    c_ingest->add_option("--in", ingest.in, "raw trace CSV")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--labels", ingest.labels, "label sidecar JSON")->check(CLI::ExistingFile);
    c_ingest->add_option("--freq-filter", ingest.freq, "frequent-class filter: auto, on, off");
    c_ingest->add_flag("--no-freq-filter", ingest.no_freq, "never apply the frequent-class filter");
    c_ingest->add_option("--rate-threshold", ingest.rate, "packets/s above which auto filtering applies");
    c_ingest->add_flag("--slice", ingest.slice, "also write 15 s training groups");
    c_ingest->add_option("--window", ingest.window, "group window, seconds");

    ExtractArgs extract_args;
    auto* c_extract = app.add_subcommand("extract", "build a fingerprint from labelled training traffic");
    c_extract->add_option("--trace", extract_args.trace, "training trace CSV")->required()->check(CLI::ExistingFile);
    c_extract->add_option("--labels", extract_args.labels, "label sidecar JSON")->required()->check(CLI::ExistingFile);
    c_extract->add_option("--label", extract_args.label, "event name to extract");
    c_extract->add_option("--rho", extract_args.rho, "refinement threshold factor");
    c_extract->add_option("--min-support", extract_args.min_support, "coarse support floor (0 = default)");
    c_extract->add_flag("--preprocessed", extract_args.skip_ingest, "skip the ingest pipeline");
    extract_args.params.attach(c_extract);

    MatchArgs match_args;
    auto* c_match = app.add_subcommand("match", "match one fingerprint against a target sequence");
    c_match->add_option("--fp", match_args.fp, "fingerprint JSON")->required()->check(CLI::ExistingFile);
    c_match->add_option("--target", match_args.target, "target trace CSV or packet JSON")->required()->check(CLI::ExistingFile);
    c_match->add_option("--matcher", match_args.matcher, "fmlcs or afmlcs");
    match_args.params.attach(c_match);

    TrackArgs track_args;
    auto* c_track = app.add_subcommand("track", "detect events in a trace");
    c_track->add_option("--fp", track_args.fps, "comma-separated fingerprint JSON files")->required();
    c_track->add_option("--trace", track_args.trace, "trace CSV")->required()->check(CLI::ExistingFile);
    c_track->add_option("--labels", track_args.labels, "ground-truth labels for scoring")->check(CLI::ExistingFile);
    c_track->add_option("--scenario", track_args.scenario, "naive, single_target or multi_target");
    c_track->add_option("--target", track_args.target, "target label");
    c_track->add_option("--matcher", track_args.matcher, "auto, fmlcs or afmlcs");
    c_track->add_option("--tolerance", track_args.tolerance, "scoring tolerance, seconds");
    track_args.params.attach(c_track);

    ScoreArgs score_args;
    auto* c_score = app.add_subcommand("score", "score detections against ground truth");
    c_score->add_option("--detections", score_args.detections, "detections JSON lines")->required()->check(CLI::ExistingFile);
    c_score->add_option("--labels", score_args.labels, "ground-truth labels")->required()->check(CLI::ExistingFile);
    c_score->add_option("--target", score_args.target, "score one label only");
    c_score->add_option("--tolerance", score_args.tolerance, "scoring tolerance, seconds");

    SimulateArgs sim_args;
    auto* c_sim = app.add_subcommand("simulate", "generate a labelled synthetic trace");
    c_sim->add_option("--config", sim_args.config, "scenario config JSON")->required()->check(CLI::ExistingFile);

    DefendArgs defend_args;
    auto* c_defend = app.add_subcommand("defend", "apply a traffic countermeasure");
    c_defend->add_option("--trace", defend_args.trace, "trace CSV")->required()->check(CLI::ExistingFile);
    c_defend->add_option("--labels", defend_args.labels, "label sidecar to carry over")->check(CLI::ExistingFile);
    c_defend->add_option("--kind", defend_args.kind, "delay, shape or pad")->required();
    c_defend->add_option("--delay-max", defend_args.delay_max, "max per-packet delay, seconds");
    c_defend->add_option("--shape-rate", defend_args.shape_rate, "dummy packets/s per direction");
    c_defend->add_option("--pad-max", defend_args.pad_max, "max padding bytes");
    c_defend->add_option("--burst-gap", defend_args.burst_gap, "quiet gap ending a delay burst");

    OracleArgs oracle_args;
    auto* c_oracle = app.add_subcommand("oracle", "exhaustive longest common subsequence for small inputs");
    c_oracle->add_option("--a", oracle_args.a, "first sequence (CSV or packet JSON)")->required()->check(CLI::ExistingFile);
    c_oracle->add_option("--b", oracle_args.b, "second sequence")->required()->check(CLI::ExistingFile);
    oracle_args.params.attach(c_oracle);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_ingest) return cmd_ingest(g, ingest);
        if (*c_extract) return cmd_extract(g, extract_args);
        if (*c_match) return cmd_match(g, match_args);
        if (*c_track) return cmd_track(g, track_args);
        if (*c_score) return cmd_score(g, score_args);
        if (*c_sim) return cmd_simulate(g, sim_args);
        if (*c_defend) return cmd_defend(g, defend_args);
        if (*c_oracle) return cmd_oracle(g, oracle_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
