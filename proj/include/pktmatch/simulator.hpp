#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pktmatch/core.hpp"

namespace pktmatch {

struct EventTemplate {
    std::string label;
    std::vector<FingerprintPacket> packets;

    friend bool operator==(const EventTemplate&, const EventTemplate&) = default;
};

struct NoiseClass {
    int size = 0;
    Direction dir = Direction::Upstream;
    double weight = 1.0;

    friend bool operator==(const NoiseClass&, const NoiseClass&) = default;
};

/// Small ACK-like frames; all below 100 bytes.
std::vector<NoiseClass> default_noise_classes();

enum class DefenseKind { Delay, Shape, Pad };

std::optional<DefenseKind> parse_defense_kind(std::string_view text);
std::string_view to_string(DefenseKind kind);

struct DefenseConfig {
    DefenseKind kind = DefenseKind::Pad;
    double delay_max = 0.2;     // seconds, per-packet delay ~ U(0, delay_max)
    double shape_rate = 10.0;   // dummy packets per second, per direction
    int pad_max = 5;            // size += U{1..pad_max}
    double burst_gap = 5.0;     // quiet gap that ends a delay burst

    friend bool operator==(const DefenseConfig&, const DefenseConfig&) = default;
};

struct ScenarioConfig {
    std::vector<EventTemplate> templates;
    int n_events_per_label = 20;
    double gap_min = 30.0;
    double gap_max = 45.0;
    double loss_rate = 0.15;
    double jitter = 0.02;
    double noise_rate = 2.0;  // background packets per second
    std::vector<NoiseClass> noise_classes = default_noise_classes();
    int noise_run = 1;           // identical copies per noise draw
    double onset = 0.0;          // delay between initiation and first packet
    double lead = 5.0;           // idle time before the first event
    double tail = 10.0;          // idle time after the last event
    double mgmt_rate = 0.0;      // management frames per second
    double retry_rate = 0.0;     // probability a data frame is retransmitted
    std::optional<DefenseConfig> defense;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OverheadReport {
    std::optional<double> added_seconds_per_event;
    std::optional<double> bandwidth_multiplier;
};

/// Labelled synthetic trace. When `config.defense` is set, delay acts on the
/// event packets only and pad/shape act on the whole capture.
Trace generate(const ScenarioConfig& config, OverheadReport* overhead = nullptr);

/// Applies one countermeasure to a captured trace.
std::pair<Trace, OverheadReport> apply_defense(const Trace& trace, const DefenseConfig& defense, std::uint64_t seed);

/// Pads every fingerprint packet once, as if extracted from padded captures.
std::vector<FingerprintPacket> pad_packets(std::vector<FingerprintPacket> packets, int pad_max, std::uint64_t seed);

/// Reference event catalogue shaped after published IoT fingerprints
/// (length, duration, sub-burst count). Deterministic.
std::vector<EventTemplate> reference_templates();

/// The 14 classes used by the multi-target suite.
std::vector<EventTemplate> multi_target_templates();

const EventTemplate& find_template(const std::vector<EventTemplate>& templates, const std::string& label);
/// Copying overload so a temporary catalogue cannot leave a dangling reference.
EventTemplate find_template(std::vector<EventTemplate>&& templates, const std::string& label);

/// Fingerprint with segments computed from `params`.
Fingerprint to_fingerprint(const EventTemplate& t, const MatchParams& params);

}  // namespace pktmatch
