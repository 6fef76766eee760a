#include "pktmatch/simulator.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "pktmatch/matcher.hpp"

namespace pktmatch {

namespace {

using Rng = std::mt19937_64;

// Independent stream per stage, so toggling one stage leaves the draws of the
// others untouched.
Rng stream(std::uint64_t seed, std::uint32_t stage) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stage};
    return Rng(seq);
}

enum Stage : std::uint32_t {
    kOrder = 1,
    kEvents,
    kGaps,
    kNoise,
    kMgmt,
    kRetry,
    kDefense,
};

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void sort_by_time(std::vector<Packet>& packets) {
    std::stable_sort(packets.begin(), packets.end(), [](const Packet& a, const Packet& b) { return a.time < b.time; });
}

// Poisson arrival times over [begin, end).
std::vector<double> arrivals(Rng& rng, double rate, double begin, double end) {
    std::vector<double> out;
    if (rate <= 0.0 || end <= begin) return out;
    std::exponential_distribution<double> step(rate);
    for (double t = begin + step(rng); t < end; t += step(rng)) out.push_back(t);
    return out;
}

double total_bytes(const std::vector<Packet>& packets) {
    double sum = 0.0;
    for (const auto& p : packets) sum += p.size;
    return sum;
}

// Cumulative per-packet delays within bursts separated by quiet gaps. Returns
// the mean shift of each burst's last packet.
double delay_in_place(std::vector<Packet>& packets, const DefenseConfig& d, Rng& rng) {
    if (packets.empty()) return 0.0;
    double shift = 0.0;
    double added = 0.0;
    std::size_t bursts = 0;
    double prev = packets.front().time;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const double original = packets[i].time;
        if (i > 0 && original - prev > d.burst_gap) {
            added += shift;
            ++bursts;
            shift = 0.0;
        }
        prev = original;
        shift += uniform(rng, 0.0, d.delay_max);
        packets[i].time = original + shift;
    }
    added += shift;
    ++bursts;
    sort_by_time(packets);
    return added / static_cast<double>(bursts);
}

void pad_in_place(std::vector<Packet>& packets, int pad_max, Rng& rng) {
    std::uniform_int_distribution<int> pad(1, pad_max);
    for (auto& p : packets) p.size += pad(rng);
}

void shape_in_place(std::vector<Packet>& packets, double rate, Rng& rng) {
    if (packets.empty()) return;
    const double begin = packets.front().time;
    const double end = packets.back().time;
    std::vector<Packet> dummies;
    for (const Direction dir : {Direction::Upstream, Direction::Downstream}) {
        std::vector<int> sizes;
        for (const auto& p : packets)
            if (p.dir == dir) sizes.push_back(p.size);
        if (sizes.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, sizes.size() - 1);
        for (double t : arrivals(rng, rate, begin, end)) {
            Packet p;
            p.time = t;
            p.size = sizes[pick(rng)];
            p.dir = dir;
            dummies.push_back(p);
        }
    }
    packets.insert(packets.end(), dummies.begin(), dummies.end());
    sort_by_time(packets);
}

EventTemplate shaped(const std::string& label, std::size_t n, double duration, std::size_t bursts,
                     std::vector<int>& pool, Rng& rng) {
    std::vector<std::size_t> counts(bursts, n / bursts);
    for (std::size_t b = 0; b < n % bursts; ++b) ++counts[b];
    std::size_t steps = 0;
    for (auto c : counts) steps += c - 1;
    const double reserved = 0.7 * static_cast<double>(bursts - 1);
    const double spacing = steps == 0 ? 0.0 : std::min(0.4, (duration - reserved) / static_cast<double>(steps));
    const double gap = bursts > 1 ? (duration - spacing * static_cast<double>(steps)) / static_cast<double>(bursts - 1) : 0.0;

    EventTemplate t{label, {}};
    std::bernoulli_distribution up(0.5);
    double dt = 0.0;
    for (std::size_t b = 0; b < bursts; ++b) {
        if (b > 0) dt += gap;
        for (std::size_t k = 0; k < counts[b]; ++k) {
            if (k > 0) dt += spacing;
            t.packets.push_back({dt, pool.back(), up(rng) ? Direction::Upstream : Direction::Downstream});
            pool.pop_back();
        }
    }
    return t;
}

}  // namespace

std::vector<NoiseClass> default_noise_classes() {
    return {{66, Direction::Upstream, 0.30}, {66, Direction::Downstream, 0.20}, {74, Direction::Upstream, 0.15},
            {90, Direction::Downstream, 0.15}, {54, Direction::Upstream, 0.10}, {82, Direction::Downstream, 0.10}};
}

std::optional<DefenseKind> parse_defense_kind(std::string_view text) {
    if (text == "delay") return DefenseKind::Delay;
    if (text == "shape") return DefenseKind::Shape;
    if (text == "pad") return DefenseKind::Pad;
    return std::nullopt;
}

std::string_view to_string(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::Delay: return "delay";
        case DefenseKind::Shape: return "shape";
        case DefenseKind::Pad: return "pad";
    }
    return "unknown";
}

void ScenarioConfig::validate() const {
    if (templates.empty()) throw Error("scenario needs at least one template");
    if (n_events_per_label < 0) throw Error("n_events_per_label must be >= 0");
    if (!(gap_min > 0.0) || gap_min > gap_max) throw Error("gap range must satisfy 0 < min <= max");
    if (!(loss_rate >= 0.0 && loss_rate < 1.0)) throw Error("loss_rate must lie in [0, 1)");
    if (jitter < 0.0 || noise_rate < 0.0 || mgmt_rate < 0.0 || onset < 0.0 || lead < 0.0 || tail < 0.0)
        throw Error("rates and durations must be non-negative");
    if (!(retry_rate >= 0.0 && retry_rate <= 1.0)) throw Error("retry_rate must lie in [0, 1]");
    if (noise_run < 1) throw Error("noise_run must be >= 1");
    if (noise_rate > 0.0 && noise_classes.empty()) throw Error("noise needs at least one class");
    for (const auto& t : templates) {
        if (t.packets.empty()) throw Error("template '" + t.label + "' is empty");
        for (std::size_t i = 0; i < t.packets.size(); ++i)
            if (t.packets[i].dt < 0.0 || (i > 0 && t.packets[i].dt < t.packets[i - 1].dt))
                throw Error("template '" + t.label + "' has decreasing dt");
    }
    if (defense) {
        if (defense->delay_max < 0.0 || defense->shape_rate < 0.0 || defense->pad_max < 1)
            throw Error("invalid defense parameters");
    }
}

Trace generate(const ScenarioConfig& config, OverheadReport* overhead) {
    config.validate();
    Rng order_rng = stream(config.seed, kOrder);
    Rng event_rng = stream(config.seed, kEvents);
    Rng gap_rng = stream(config.seed, kGaps);

    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < config.templates.size(); ++k)
        for (int e = 0; e < config.n_events_per_label; ++e) order.push_back(k);
    std::shuffle(order.begin(), order.end(), order_rng);

    Trace trace;
    std::vector<Packet> events;
    std::bernoulli_distribution lost(config.loss_rate);
    double t_init = config.lead;
    double end = config.lead;
    for (std::size_t e = 0; e < order.size(); ++e) {
        const auto& tpl = config.templates[order[e]];
        char id[32];
        std::snprintf(id, sizeof(id), "ev%04zu", e + 1);
        trace.labels.push_back({id, tpl.label, t_init});
        for (const auto& fp : tpl.packets) {
            const bool drop = lost(event_rng);
            const double j = config.jitter > 0.0 ? uniform(event_rng, -config.jitter, config.jitter) : 0.0;
            if (drop) continue;
            Packet p;
            p.time = std::max(0.0, t_init + config.onset + fp.dt + j);
            p.size = fp.size;
            p.dir = fp.dir;
            events.push_back(p);
        }
        end = t_init + config.onset + tpl.packets.back().dt;
        if (e + 1 < order.size()) t_init += uniform(gap_rng, config.gap_min, config.gap_max);
    }
    end += config.tail;
    sort_by_time(events);

    OverheadReport report;
    if (config.defense && config.defense->kind == DefenseKind::Delay) {
        Rng rng = stream(config.seed, kDefense);
        report.added_seconds_per_event = delay_in_place(events, *config.defense, rng);
        report.bandwidth_multiplier = 1.0;
    }

    std::vector<Packet> packets = std::move(events);
    Rng noise_rng = stream(config.seed, kNoise);
    if (config.noise_rate > 0.0) {
        std::vector<double> weights;
        for (const auto& c : config.noise_classes) weights.push_back(c.weight);
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        for (double t : arrivals(noise_rng, config.noise_rate, 0.0, end)) {
            const auto& c = config.noise_classes[pick(noise_rng)];
            for (int r = 0; r < config.noise_run; ++r) {
                Packet p;
                p.time = t + 0.002 * r;
                p.size = c.size;
                p.dir = c.dir;
                packets.push_back(p);
            }
        }
    }
    Rng mgmt_rng = stream(config.seed, kMgmt);
    for (double t : arrivals(mgmt_rng, config.mgmt_rate, 0.0, end)) {
        Packet p;
        p.time = t;
        p.size = 40;
        p.dir = Direction::Downstream;
        p.kind = FrameKind::Management;
        packets.push_back(p);
    }
    sort_by_time(packets);

    if (config.retry_rate > 0.0) {
        Rng rng = stream(config.seed, kRetry);
        std::bernoulli_distribution retried(config.retry_rate);
        std::vector<Packet> copies;
        std::int64_t seq = 0;
        for (auto& p : packets) {
            if (p.kind != FrameKind::Data) continue;
            p.seq_id = seq++;
            if (retried(rng)) {
                Packet c = p;
                c.time += uniform(rng, 0.001, 0.005);
                c.retry = true;
                copies.push_back(c);
            }
        }
        packets.insert(packets.end(), copies.begin(), copies.end());
        sort_by_time(packets);
    }

    if (config.defense && config.defense->kind != DefenseKind::Delay) {
        Trace raw{std::move(packets), {}};
        auto [defended, rep] = apply_defense(raw, *config.defense, config.seed);
        packets = std::move(defended.packets);
        report = rep;
    }
    trace.packets = std::move(packets);
    if (overhead) *overhead = report;
    return trace;
}

std::pair<Trace, OverheadReport> apply_defense(const Trace& trace, const DefenseConfig& defense, std::uint64_t seed) {
    Rng rng = stream(seed, kDefense);
    Trace out = trace;
    OverheadReport report;
    const double before = total_bytes(trace.packets);
    switch (defense.kind) {
        case DefenseKind::Delay:
            report.added_seconds_per_event = delay_in_place(out.packets, defense, rng);
            break;
        case DefenseKind::Shape:
            shape_in_place(out.packets, defense.shape_rate, rng);
            break;
        case DefenseKind::Pad:
            if (defense.pad_max < 1) throw Error("pad_max must be >= 1");
            pad_in_place(out.packets, defense.pad_max, rng);
            break;
    }
    if (before > 0.0) report.bandwidth_multiplier = total_bytes(out.packets) / before;
    return {std::move(out), report};
}

std::vector<FingerprintPacket> pad_packets(std::vector<FingerprintPacket> packets, int pad_max, std::uint64_t seed) {
    Rng rng = stream(seed, kDefense);
    std::uniform_int_distribution<int> pad(1, pad_max);
    for (auto& p : packets) p.size += pad(rng);
    return packets;
}

std::vector<EventTemplate> reference_templates() {
    struct Shape {
        const char* label;
        std::size_t n;
        double duration;
        std::size_t bursts;
    };
    static constexpr Shape shapes[] = {
        {"E1", 4, 0.23, 1},   {"E2", 23, 4.5, 3},   {"E3", 41, 7.7, 6},   {"E4", 28, 3.15, 3},
        {"E5", 42, 4.03, 4},  {"E6", 16, 0.35, 1},  {"E7", 9, 3.29, 2},   {"E8", 17, 3.41, 3},
        {"E9", 4, 0.5, 1},    {"E11", 4, 0.2, 1},   {"E12", 2, 0.04, 1},  {"E13", 20, 1.52, 2},
        {"E14", 8, 5.69, 2},  {"E15", 12, 5.76, 2}, {"E18", 5, 1.2, 1},   {"E19", 7, 2.6, 2},
    };
    Rng rng(20240611);
    std::vector<int> pool(1301);
    std::iota(pool.begin(), pool.end(), 100);
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<EventTemplate> out;
    for (const auto& s : shapes) out.push_back(shaped(s.label, s.n, s.duration, s.bursts, pool, rng));

    // Look-alike pairs: E10 differs from E9 by one byte on its first two
    // packets; E8 opens with E7's first three sizes minus one byte.
    const auto at = [&](const char* label) -> EventTemplate& {
        return *std::find_if(out.begin(), out.end(), [&](const EventTemplate& t) { return t.label == label; });
    };
    EventTemplate e10 = at("E9");
    e10.label = "E10";
    e10.packets[0].size += 1;
    e10.packets[1].size += 1;
    const EventTemplate& e7 = at("E7");
    EventTemplate& e8 = at("E8");
    for (std::size_t k = 0; k < 3; ++k) {
        e8.packets[k].size = e7.packets[k].size - 1;
        e8.packets[k].dir = e7.packets[k].dir;
    }
    out.insert(std::find_if(out.begin(), out.end(), [](const EventTemplate& t) { return t.label == "E11"; }), e10);
    return out;
}

std::vector<EventTemplate> multi_target_templates() {
    static const char* labels[] = {"E1", "E2", "E3", "E4", "E5", "E6", "E7",
                                   "E8", "E9", "E10", "E14", "E15", "E18", "E19"};
    const auto all = reference_templates();
    std::vector<EventTemplate> out;
    for (const char* l : labels) out.push_back(find_template(all, l));
    return out;
}

const EventTemplate& find_template(const std::vector<EventTemplate>& templates, const std::string& label) {
    const auto it = std::find_if(templates.begin(), templates.end(),
                                 [&](const EventTemplate& t) { return t.label == label; });
    if (it == templates.end()) throw Error("unknown template '" + label + "'");
    return *it;
}

EventTemplate find_template(std::vector<EventTemplate>&& templates, const std::string& label) {
    return find_template(static_cast<const std::vector<EventTemplate>&>(templates), label);
}

Fingerprint to_fingerprint(const EventTemplate& t, const MatchParams& params) {
    Fingerprint fp;
    fp.label = t.label;
    fp.packets = t.packets;
    fp.params = params;
    return segment(std::move(fp), params);
}

}  // namespace pktmatch
