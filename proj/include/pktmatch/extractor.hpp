#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pktmatch/core.hpp"
#include "pktmatch/ingest.hpp"
#include "pktmatch/matcher.hpp"

namespace pktmatch {

/// Reserved size of the synthetic packet placed at every event initiation.
inline constexpr int kFakeAnchorSize = 0;

struct CoarsePacket {
    double dt = 0.0;  // seconds after event initiation
    int size = 0;
    Direction dir = Direction::Upstream;
    std::size_t support = 0;  // pairwise matches fused into this packet

    friend bool operator==(const CoarsePacket&, const CoarsePacket&) = default;
};

using CoarseFingerprint = std::vector<CoarsePacket>;

/// Prepends a (size 0, Downstream, t=0) packet to each group. Throws Error if
/// a group already holds a size-0 packet.
std::vector<TrainingGroup> insert_fake_anchors(std::vector<TrainingGroup> groups);

struct ConsensusStats {
    std::size_t pairs = 0;
    std::size_t skipped_blowup = 0;
    std::size_t matched_packets = 0;
};

/// Matches every unordered pair of anchored groups with the fake packets
/// forced as anchors and clusters the matched packets into a coarse
/// fingerprint sorted by dt. Needs at least two groups.
CoarseFingerprint pairwise_consensus(const std::vector<TrainingGroup>& anchored_groups,
                                     const MatchParams& params,
                                     DpLimits limits = {},
                                     ConsensusStats* stats = nullptr);

struct RefineOptions {
    double rho = 1.0;            // discard when min(forward, backward) < X * rho
    double stride = 0.5;         // window step, seconds
    double window_slack = 2.0;   // window = fingerprint duration + slack
    DpLimits limits{};
};

struct RefinePass {
    std::vector<CoarsePacket> packets;  // CF entering the pass
    std::vector<std::size_t> forward;
    std::vector<std::size_t> backward;
    std::vector<std::size_t> discarded;  // indices into `packets`
};

/// Sliding-window frequency refinement until no packet is discarded. `groups`
/// are the raw (non-anchored) training groups and X is their count.
Fingerprint refine(const CoarseFingerprint& cf,
                   const std::vector<TrainingGroup>& groups,
                   const std::string& label,
                   const MatchParams& params,
                   const RefineOptions& options = {},
                   std::vector<RefinePass>* passes = nullptr);

struct ExtractOptions {
    RefineOptions refine{};
    /// Coarse packets supported by fewer pairwise matches than this are
    /// dropped before refinement. 0 selects default_min_support.
    std::size_t min_support = 0;
};

/// Pairwise support of a packet seen in half of the groups: C(ceil(X/2), 2).
std::size_t default_min_support(std::size_t groups);

struct ExtractionReport {
    std::size_t groups = 0;
    ConsensusStats consensus;
    CoarseFingerprint coarse;
    std::size_t min_support = 0;
    std::size_t pruned_low_support = 0;
    std::vector<RefinePass> passes;
};

Fingerprint extract(const std::vector<TrainingGroup>& groups,
                    const std::string& label,
                    const MatchParams& params,
                    const ExtractOptions& options = {},
                    ExtractionReport* report = nullptr);

}  // namespace pktmatch
