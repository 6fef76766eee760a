#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "pktmatch/io.hpp"
#include "pktmatch/records.hpp"
#include "pktmatch/simulator.hpp"

using namespace pktmatch;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() / ("pktmatch_cli_" + std::to_string(std::rand()) + std::to_string(::time(nullptr)));
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }

    // Runs the CLI inside the sandbox; stdout and stderr go to files.
    int run(const std::string& args) const {
        const std::string cmd = "cd '" + dir.string() + "' && '" PKTMATCH_CLI "' " + args + " > stdout.txt 2> stderr.txt";
        const int rc = std::system(cmd.c_str());
        return rc == 0 ? 0 : 1;
    }
    std::string out() const { return read_text(dir / "stdout.txt"); }
    std::string err() const { return read_text(dir / "stderr.txt"); }
    fs::path operator/(const std::string& p) const { return dir / p; }
};

void write_scenario(const fs::path& path, const EventTemplate& t, int n) {
    Json j = {{"templates", Json::array({template_to_json(t)})}, {"n_events_per_label", n}, {"onset", 0.25}};
    write_text(path, dump_json(j));
}

EventTemplate hue_on() {
    return {"hue_on", {{0, 254, Direction::Downstream}, {0.15, 333, Direction::Upstream}, {0.55, 129, Direction::Downstream}}};
}

}  // namespace

TEST_CASE("simulate is reproducible and needs a seed") {
    Sandbox s;
    write_scenario(s / "s.json", hue_on(), 5);
    REQUIRE(s.run("--seed 7 --out a simulate --config s.json") == 0);
    REQUIRE(s.run("simulate --config s.json --seed 7 --out b") == 0);
    for (const char* f : {"trace.csv", "labels.json", "manifest.json"})
        CHECK(read_text(s / "a" / f) == read_text(s / "b" / f));
    CHECK(s.run("--out c simulate --config s.json") != 0);
    CHECK(s.err().find("--seed") != std::string::npos);
    const auto manifest = read_json(s / "a" / "manifest.json");
    CHECK(manifest.at("subcommand") == "simulate");
    CHECK(manifest.at("seed") == 7);
    CHECK(manifest.at("outputs").contains("trace.csv"));
}

TEST_CASE("ingest writes a clean trace and reports errors") {
    Sandbox s;
    write_scenario(s / "s.json", hue_on(), 3);
    REQUIRE(s.run("--seed 1 --out sim simulate --config s.json") == 0);
    REQUIRE(s.run("ingest --in sim/trace.csv --labels sim/labels.json --out clean.csv") == 0);
    CHECK(fs::exists(s / "clean.csv"));
    CHECK(fs::exists(s / "clean.report.json"));
    CHECK(fs::exists(s / "clean.manifest.json"));
    CHECK(s.run("ingest --in sim/trace.csv --slice --out x.csv") != 0);
    REQUIRE(s.run("ingest --in sim/trace.csv --no-freq-filter --rate-threshold 0.001 --out z.csv") == 0);
    CHECK(read_json(s / "z.report.json").at("frequency_filter_applied") == false);
    REQUIRE(s.run("ingest --in sim/trace.csv --rate-threshold 0.001 --out w.csv") == 0);
    CHECK(read_json(s / "w.report.json").at("frequency_filter_applied") == true);

    write_text(s / "bad.csv", "t,size,dir,kind,retry,seq_id\n0.1,100,up,data,0,\n0.2,abc,up,data,0,\n");
    CHECK(s.run("ingest --in bad.csv --out b.csv") != 0);
    CHECK(s.err().find("line 3") != std::string::npos);
}

TEST_CASE("extract recovers a simulated fingerprint") {
    Sandbox s;
    write_scenario(s / "s.json", hue_on(), 30);
    REQUIRE(s.run("--seed 3 --out sim simulate --config s.json") == 0);
    REQUIRE(s.run("--out ext extract --trace sim/trace.csv --labels sim/labels.json") == 0);
    const auto fp = fingerprint_from_json(read_json(s / "ext" / "fingerprint.json"));
    REQUIRE(fp.packets.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fp.packets[i].size == hue_on().packets[i].size);
        CHECK(fp.packets[i].dir == hue_on().packets[i].dir);
        CHECK(std::abs(fp.packets[i].dt - hue_on().packets[i].dt) <= 0.05);
    }
    CHECK(fs::exists(s / "ext" / "extraction_report.json"));

    REQUIRE(s.run("--out ext2 extract --trace sim/trace.csv --labels sim/labels.json --rho 0.8") == 0);
    CHECK(read_json(s / "ext2" / "manifest.json").at("parameters").at("rho") == 0.8);

    write_scenario(s / "one.json", hue_on(), 1);
    REQUIRE(s.run("--seed 3 --out one simulate --config one.json") == 0);
    CHECK(s.run("--out e1 extract --trace one/trace.csv --labels one/labels.json") != 0);
    CHECK(s.err().find("need >= 2 groups") != std::string::npos);
}

TEST_CASE("track, score, match and defend") {
    Sandbox s;
    Json j = {{"templates", Json::array({"E2", "E9"})}, {"n_events_per_label", 4}};
    write_text(s / "s.json", dump_json(j));
    REQUIRE(s.run("--seed 5 --out sim simulate --config s.json") == 0);
    const auto all = reference_templates();
    write_text(s / "a.json", dump_json(fingerprint_to_json(to_fingerprint(find_template(all, "E2"), MatchParams{}))));
    write_text(s / "b.json", dump_json(fingerprint_to_json(to_fingerprint(find_template(all, "E9"), MatchParams{}))));

    REQUIRE(s.run("--out trk --json track --fp a.json,b.json --trace sim/trace.csv --labels sim/labels.json "
                  "--scenario multi_target") == 0);
    CHECK(Json::parse(s.out()).at("detections").get<int>() >= 6);
    CHECK(fs::exists(s / "trk" / "detections.jsonl"));
    const auto sc = read_json(s / "trk" / "score.json");
    CHECK(sc.at("overall").at("tp").get<int>() >= 6);

    REQUIRE(s.run("--out sc score --detections trk/detections.jsonl --labels sim/labels.json") == 0);
    CHECK(read_json(s / "sc" / "score.json").at("overall") == sc.at("overall"));

    CHECK(s.run("--out t2 track --fp a.json,b.json --trace sim/trace.csv --scenario single_target --target E77") != 0);
    CHECK(s.run("--out t3 track --fp a.json,missing.json --trace sim/trace.csv") != 0);

    REQUIRE(s.run("--out m --json match --fp a.json --target sim/trace.csv --matcher afmlcs") == 0);
    CHECK(Json::parse(s.out()).contains("success"));

    CHECK(s.run("--out d defend --trace sim/trace.csv --kind pad") != 0);
    REQUIRE(s.run("--seed 2 --out d defend --trace sim/trace.csv --labels sim/labels.json --kind pad --pad-max 5") == 0);
    CHECK(read_json(s / "d" / "overhead.json").at("bandwidth_multiplier").get<double>() > 1.0);
    CHECK(s.run("--seed 2 --out d2 defend --trace sim/trace.csv --kind jam") != 0);
}

TEST_CASE("oracle and parameter precedence") {
    Sandbox s;
    Fingerprint big{"big", {}, {}, {}};
    for (int i = 0; i < 13; ++i) big.packets.push_back({0.1 * i, 100 + i, Direction::Upstream});
    big.segments = {{0, 13}};
    write_text(s / "big.json", dump_json(fingerprint_to_json(big)));
    Fingerprint small{"small", {{0, 100, Direction::Upstream}, {0.1, 101, Direction::Upstream}}, {{0, 2}}, {}};
    write_text(s / "small.json", dump_json(fingerprint_to_json(small)));

    CHECK(s.run("--out o oracle --a big.json --b small.json") != 0);
    CHECK(s.err().find("oracle limit") != std::string::npos);
    REQUIRE(s.run("--out o --json oracle --a small.json --b small.json") == 0);
    CHECK(Json::parse(s.out()).at("max_length") == 2);

    MatchParams file;
    file.epsilon = 3;
    file.beta = 1.5;
    write_text(s / "p.json", dump_json(params_to_json(file)));
    REQUIRE(s.run("--params p.json --out o2 oracle --a small.json --b small.json --epsilon 4") == 0);
    const auto p = read_json(s / "o2" / "manifest.json").at("parameters");
    CHECK(p.at("epsilon") == 4);
    CHECK(p.at("beta") == 1.5);
    CHECK(p.at("gamma") == 0.6);
    CHECK(s.run("--out o3 oracle --a small.json --b small.json --gamma 2") != 0);
}
