#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "pktmatch/io.hpp"
#include "pktmatch/simulator.hpp"

using namespace pktmatch;

namespace {

constexpr auto Up = Direction::Upstream;
constexpr auto Down = Direction::Downstream;

EventTemplate ten_packets() {
    EventTemplate t{"ten", {}};
    for (int i = 0; i < 10; ++i) t.packets.push_back({0.1 * i, 450 + 11 * i, i % 2 ? Up : Down});
    return t;
}

ScenarioConfig quiet(const EventTemplate& t, int n) {
    ScenarioConfig c;
    c.templates = {t};
    c.n_events_per_label = n;
    c.loss_rate = 0;
    c.noise_rate = 0;
    c.jitter = 0;
    return c;
}

}  // namespace

TEST_CASE("identity channel reproduces templates") {
    const auto all = reference_templates();
    ScenarioConfig c = quiet(find_template(all, "E5"), 3);
    c.templates.push_back(find_template(all, "E12"));
    const auto trace = generate(c);
    REQUIRE(trace.labels.size() == 6);
    std::size_t i = 0;
    for (const auto& label : trace.labels) {
        const auto& t = find_template(all, label.label);
        for (const auto& p : t.packets) {
            REQUIRE(i < trace.packets.size());
            CHECK(trace.packets[i].time == doctest::Approx(label.t_init + p.dt));
            CHECK(trace.packets[i].size == p.size);
            CHECK(trace.packets[i].dir == p.dir);
            ++i;
        }
    }
    CHECK(i == trace.packets.size());
    for (std::size_t k = 1; k < trace.labels.size(); ++k) {
        const double gap = trace.labels[k].t_init - trace.labels[k - 1].t_init;
        CHECK(gap >= 30.0);
        CHECK(gap <= 45.0);
    }
}

TEST_CASE("loss follows the binomial mean") {
    auto c = quiet(ten_packets(), 1000);
    c.loss_rate = 0.2;
    c.seed = 99;
    const auto trace = generate(c);
    const double mean = static_cast<double>(trace.packets.size()) / 1000.0;
    CHECK(mean == doctest::Approx(8.0).epsilon(0.025));
}

TEST_CASE("generation is deterministic per seed") {
    ScenarioConfig c;
    c.templates = multi_target_templates();
    c.n_events_per_label = 2;
    c.mgmt_rate = 0.5;
    c.retry_rate = 0.05;
    c.seed = 5;
    const auto a = format_trace_csv(generate(c).packets);
    CHECK(a == format_trace_csv(generate(c).packets));
    c.seed = 6;
    CHECK(a != format_trace_csv(generate(c).packets));
}

TEST_CASE("reference catalogue") {
    const auto all = reference_templates();
    CHECK(all.size() == 17);
    CHECK(all == reference_templates());
    CHECK(multi_target_templates().size() == 14);
    std::map<std::string, std::size_t> lengths;
    for (const auto& t : all) {
        lengths[t.label] = t.packets.size();
        CHECK(t.packets.front().dt == 0.0);
        for (const auto& p : t.packets) {
            CHECK(p.size >= 99);
            CHECK(p.size <= 1401);
        }
    }
    CHECK(lengths.at("E5") == 42);
    CHECK(lengths.at("E12") == 2);
    CHECK(to_fingerprint(find_template(all, "E5"), MatchParams{}).segments.size() == 4);
    CHECK(to_fingerprint(find_template(all, "E3"), MatchParams{}).segments.size() == 6);
    CHECK_THROWS_AS(find_template(all, "E99"), Error);
}

TEST_CASE("pad grows every size and keeps timing") {
    ScenarioConfig c;
    c.templates = multi_target_templates();
    c.n_events_per_label = 2;
    c.seed = 8;
    const auto trace = generate(c);
    for (int k : {5, 100}) {
        const auto [out, report] = apply_defense(trace, {DefenseKind::Pad, 0.2, 10, k, 5}, 3);
        REQUIRE(out.packets.size() == trace.packets.size());
        for (std::size_t i = 0; i < out.packets.size(); ++i) {
            CHECK(out.packets[i].time == trace.packets[i].time);
            CHECK(out.packets[i].dir == trace.packets[i].dir);
            const int grow = out.packets[i].size - trace.packets[i].size;
            CHECK(grow >= 1);
            CHECK(grow <= k);
        }
        CHECK(*report.bandwidth_multiplier > 1.0);
    }
}

TEST_CASE("pad overhead near ten percent at 500 bytes") {
    EventTemplate t{"mid", {}};
    for (int i = 0; i < 20; ++i) t.packets.push_back({0.05 * i, 400 + 10 * i + (i % 2), i % 2 ? Up : Down});
    auto c = quiet(t, 50);
    const auto trace = generate(c);
    double bytes = 0;
    for (const auto& p : trace.packets) bytes += p.size;
    CHECK(bytes / static_cast<double>(trace.packets.size()) == doctest::Approx(500.0).epsilon(0.01));
    const auto [out, report] = apply_defense(trace, {DefenseKind::Pad, 0.2, 10, 100, 5}, 1);
    const double expected = 1.0 + 50.5 / 500.0;
    CHECK(*report.bandwidth_multiplier == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("shape only inserts packets") {
    ScenarioConfig c;
    c.templates = multi_target_templates();
    c.n_events_per_label = 1;
    c.seed = 9;
    const auto trace = generate(c);
    const auto [out, report] = apply_defense(trace, {DefenseKind::Shape, 0.2, 10, 5, 5}, 4);
    CHECK(out.packets.size() > trace.packets.size());
    std::multiset<std::tuple<double, int, Direction>> shaped;
    for (const auto& p : out.packets) shaped.insert({p.time, p.size, p.dir});
    std::set<int> sizes;
    for (const auto& p : trace.packets) {
        sizes.insert(p.size);
        CHECK(shaped.count({p.time, p.size, p.dir}) >= 1);
    }
    for (const auto& p : out.packets) CHECK(sizes.count(p.size) == 1);
    CHECK(*report.bandwidth_multiplier > 1.0);
    CHECK(out.labels == trace.labels);
}

TEST_CASE("delay keeps order and stretches bursts") {
    const auto& e5 = find_template(reference_templates(), "E5");
    auto c = quiet(e5, 1);
    const auto trace = generate(c);
    double total = 0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        const auto [out, report] = apply_defense(trace, {DefenseKind::Delay, 0.2, 10, 5, 5}, static_cast<std::uint64_t>(s));
        REQUIRE(out.packets.size() == trace.packets.size());
        for (std::size_t i = 0; i < out.packets.size(); ++i) {
            CHECK(out.packets[i].size == trace.packets[i].size);
            if (i > 0)
                CHECK(out.packets[i].time - out.packets[i - 1].time >=
                      trace.packets[i].time - trace.packets[i - 1].time - 1e-12);
        }
        total += *report.added_seconds_per_event;
        CHECK_FALSE(report.bandwidth_multiplier.value_or(1.0) != 1.0);
    }
    CHECK(total / seeds == doctest::Approx(42 * 0.1).epsilon(0.1));
}

TEST_CASE("delay bursts reset after a quiet gap") {
    Trace t;
    for (int i = 0; i < 5; ++i) {
        Packet p;
        p.time = i < 3 ? 0.1 * i : 20.0 + 0.1 * i;
        p.size = 100 + i;
        t.packets.push_back(p);
    }
    const auto [out, report] = apply_defense(t, {DefenseKind::Delay, 0.2, 10, 5, 5}, 1);
    // The first packet of the second burst moves by at most one draw.
    CHECK(out.packets[3].time - t.packets[3].time <= 0.2);
    REQUIRE(report.added_seconds_per_event);
}

TEST_CASE("generate applies defenses with overhead") {
    ScenarioConfig c;
    c.templates = {find_template(reference_templates(), "E2")};
    c.n_events_per_label = 5;
    c.seed = 2;
    c.defense = DefenseConfig{DefenseKind::Shape, 0.2, 10, 5, 5};
    OverheadReport report;
    const auto a = generate(c, &report);
    CHECK(*report.bandwidth_multiplier > 1.0);
    CHECK(format_trace_csv(a.packets) == format_trace_csv(generate(c).packets));
    c.defense = DefenseConfig{DefenseKind::Delay, 0.2, 10, 5, 5};
    generate(c, &report);
    CHECK(*report.added_seconds_per_event > 0.0);
}

TEST_CASE("config validation") {
    ScenarioConfig c;
    CHECK_THROWS_AS(c.validate(), Error);
    c.templates = {ten_packets()};
    CHECK_NOTHROW(c.validate());
    c.loss_rate = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.loss_rate = 0.1;
    c.gap_min = 50;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(parse_defense_kind("shape") == DefenseKind::Shape);
    CHECK_FALSE(parse_defense_kind("jam"));
    CHECK(pad_packets(ten_packets().packets, 5, 1) == pad_packets(ten_packets().packets, 5, 1));
}
