#include "pktmatch/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "pktmatch/io.hpp"

namespace pktmatch {

Trace load_trace(const std::filesystem::path& csv, const std::optional<std::filesystem::path>& labels) {
    Trace trace;
    trace.packets = read_trace_csv(csv);
    std::stable_sort(trace.packets.begin(), trace.packets.end(),
                     [](const Packet& a, const Packet& b) { return a.time < b.time; });
    if (labels) trace.labels = read_labels_json(*labels);
    return trace;
}

Trace filter_data_frames(const Trace& trace) {
    Trace out{{}, trace.labels};
    for (const auto& p : trace.packets)
        if (p.kind == FrameKind::Data) out.packets.push_back(p);
    return out;
}

Trace dedup_retransmissions(const Trace& trace) {
    Trace out{{}, trace.labels};
    std::unordered_set<std::int64_t> seen;
    for (const auto& p : trace.packets) {
        if (p.seq_id && !seen.insert(*p.seq_id).second) continue;
        out.packets.push_back(p);
    }
    return out;
}

std::pair<Trace, FrequencyReport> filter_frequent_classes(const Trace& trace) {
    FrequencyReport report;
    Trace current = trace;
    while (true) {
        std::map<std::pair<int, Direction>, std::size_t> counts;
        for (const auto& p : current.packets) ++counts[{p.size, p.dir}];
        if (counts.size() < 2) break;

        double mean = 0.0;
        for (const auto& [cls, c] : counts) mean += static_cast<double>(c);
        mean /= static_cast<double>(counts.size());
        double var = 0.0;
        for (const auto& [cls, c] : counts) var += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
        const double sigma = std::sqrt(var / static_cast<double>(counts.size()));
        if (sigma <= 0.0) break;

        const double threshold = mean + 2.0 * sigma;
        std::map<std::pair<int, Direction>, bool> drop;
        for (const auto& [cls, c] : counts) {
            if (static_cast<double>(c) >= threshold) {
                drop[cls] = true;
                report.removed.push_back({cls.first, cls.second, c});
            }
        }
        if (drop.empty()) break;
        ++report.rounds;
        Trace next{{}, current.labels};
        for (const auto& p : current.packets)
            if (!drop.contains({p.size, p.dir})) next.packets.push_back(p);
        current = std::move(next);
    }
    return {std::move(current), std::move(report)};
}

Trace compress_duplicates(const Trace& trace) {
    Trace out{{}, trace.labels};
    for (const auto& p : trace.packets) {
        if (!out.packets.empty() && out.packets.back().size == p.size && out.packets.back().dir == p.dir) continue;
        out.packets.push_back(p);
    }
    return out;
}

std::vector<TrainingGroup> slice_groups(const Trace& trace, double window) {
    if (trace.labels.empty()) throw Error("no event initiations: slicing needs at least one label");
    std::vector<TrainingGroup> groups;
    groups.reserve(trace.labels.size());
    const auto by_time = [](const Packet& p, double t) { return p.time < t; };
    for (std::size_t g = 0; g < trace.labels.size(); ++g) {
        const auto& l = trace.labels[g];
        TrainingGroup group{static_cast<int>(g), l.event_id, l.label, {}};
        auto it = std::lower_bound(trace.packets.begin(), trace.packets.end(), l.t_init, by_time);
        for (; it != trace.packets.end() && it->time <= l.t_init + window; ++it) {
            Packet p = *it;
            p.time -= l.t_init;
            group.packets.push_back(p);
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

double packet_rate(const Trace& trace) {
    if (trace.packets.size() < 2) return 0.0;
    const double span = trace.packets.back().time - trace.packets.front().time;
    if (span <= 0.0) return static_cast<double>(trace.packets.size());
    return static_cast<double>(trace.packets.size()) / span;
}

Trace preprocess(const Trace& trace, const IngestOptions& options, IngestReport* report) {
    IngestReport local;
    local.input_packets = trace.packets.size();
    Trace t = filter_data_frames(trace);
    local.data_packets = t.packets.size();
    t = dedup_retransmissions(t);
    local.after_dedup = t.packets.size();

    bool apply = options.frequency_filter == FrequencyFilter::On;
    if (options.frequency_filter == FrequencyFilter::Auto) apply = packet_rate(t) >= options.high_traffic_rate;
    if (apply && !t.packets.empty()) {
        auto [filtered, freq] = filter_frequent_classes(t);
        t = std::move(filtered);
        local.frequency = std::move(freq);
        local.frequency_filter_applied = true;
    }
    t = compress_duplicates(t);
    local.output_packets = t.packets.size();
    if (report) *report = std::move(local);
    return t;
}

}  // namespace pktmatch
