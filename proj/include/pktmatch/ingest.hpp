#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pktmatch/core.hpp"

namespace pktmatch {

/// Loads a trace CSV (and optionally its label sidecar). Records are
/// stable-sorted by time. Malformed input raises ParseError.
Trace load_trace(const std::filesystem::path& csv,
                 const std::optional<std::filesystem::path>& labels = std::nullopt);

Trace filter_data_frames(const Trace& trace);

/// Keeps the earliest packet of every seq_id group; packets without a seq_id
/// pass through.
Trace dedup_retransmissions(const Trace& trace);

struct ClassCount {
    int size = 0;
    Direction dir = Direction::Upstream;
    std::size_t count = 0;
};

struct FrequencyReport {
    std::vector<ClassCount> removed;
    std::size_t rounds = 0;
};

/// Removes every (size, dir) class whose count is at least mean + 2 sigma of
/// the class-count distribution (population sigma, sigma > 0). Repeats until
/// no class qualifies.
std::pair<Trace, FrequencyReport> filter_frequent_classes(const Trace& trace);

/// Collapses runs of consecutive identical (size, dir) packets onto the first.
Trace compress_duplicates(const Trace& trace);

struct TrainingGroup {
    int group_id = 0;
    std::string event_id;
    std::string label;
    std::vector<Packet> packets;  // times relative to initiation, in [0, window]
};

inline constexpr double kGroupWindow = 15.0;

/// One group per label: packets with t in [t_init, t_init + window], re-based.
/// Throws Error when the trace has no labels.
std::vector<TrainingGroup> slice_groups(const Trace& trace, double window = kGroupWindow);

/// Packets per second over the capture span.
double packet_rate(const Trace& trace);

enum class FrequencyFilter { Auto, On, Off };

struct IngestOptions {
    FrequencyFilter frequency_filter = FrequencyFilter::Auto;
    double high_traffic_rate = 50.0;  // packets/s gate for Auto
};

struct IngestReport {
    std::size_t input_packets = 0;
    std::size_t data_packets = 0;
    std::size_t after_dedup = 0;
    bool frequency_filter_applied = false;
    FrequencyReport frequency;
    std::size_t output_packets = 0;
};

/// filter_data_frames -> dedup_retransmissions -> filter_frequent_classes
/// (gated) -> compress_duplicates.
Trace preprocess(const Trace& trace, const IngestOptions& options = {}, IngestReport* report = nullptr);

}  // namespace pktmatch
