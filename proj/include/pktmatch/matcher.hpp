#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pktmatch/core.hpp"

namespace pktmatch {

/// Raised when the number of stored longest subsequences exceeds the cap.
class BlowupError : public Error {
public:
    using Error::Error;
};

class OracleLimitError : public Error {
public:
    using Error::Error;
};

struct DpLimits {
    /// Maximum longest-subsequence count stored at any DP cell. Total stored
    /// path entries are bounded by 16x this value.
    std::size_t path_cap = 1'000'000;
};

/// L2 norm of the difference between the mean-centred fingerprint and target
/// times at the matched indices. Throws Error on empty `pairs`.
double time_alignment(std::span<const IndexPair> pairs,
                      std::span<const Observation> fingerprint,
                      std::span<const Observation> target);

/// Full DP tables for small inputs (tests and diagnostics). `paths(i, j)`
/// lists every longest common subsequence of the prefixes fp[0, i) and
/// target[0, j).
struct DpTables {
    std::size_t rows = 0;  // fingerprint length + 1
    std::size_t cols = 0;  // target length + 1
    std::vector<int> lengths;
    std::vector<std::vector<std::vector<IndexPair>>> cell_paths;

    int length(std::size_t i, std::size_t j) const { return lengths[i * cols + j]; }
    const std::vector<std::vector<IndexPair>>& paths(std::size_t i, std::size_t j) const {
        return cell_paths[i * cols + j];
    }
};

DpTables dp_tables(std::span<const Observation> fingerprint,
                   std::span<const Observation> target,
                   int epsilon,
                   DpLimits limits = {});

/// Baseline matcher: enumerate every longest fuzzy common subsequence and keep
/// the best-aligned one (ties: lexicographically smallest pair list).
MatchResult fmlcs(std::span<const Observation> fingerprint,
                  std::span<const Observation> target,
                  const MatchParams& params,
                  DpLimits limits = {});

MatchResult fmlcs(const Fingerprint& fingerprint,
                  std::span<const Observation> target,
                  const MatchParams& params,
                  DpLimits limits = {});

/// First fingerprint packet (in order) that fuzzily matches any target packet,
/// paired with its earliest target match. Indices are relative to the spans.
std::optional<Anchor> select_anchor(std::span<const Observation> fingerprint_segment,
                                    std::span<const Observation> target,
                                    int epsilon);

/// fmlcs restricted to pairs whose anchor-relative offsets agree within alpha.
/// The anchor pair is part of every returned subsequence.
MatchResult fmlcs_anchored(std::span<const Observation> fingerprint,
                           std::span<const Observation> target,
                           Anchor anchor,
                           const MatchParams& params,
                           DpLimits limits = {});

/// Cut at gaps > seg_gap, then fold undersized segments into their successor
/// (a trailing undersized segment folds into its predecessor).
std::vector<Segment> segment_ranges(std::span<const Observation> packets, double seg_gap, int seg_min);

Fingerprint segment(Fingerprint fingerprint, const MatchParams& params);

/// Anchored, segmented matcher. Fingerprints without segments are treated as
/// a single segment. `forced_anchor` skips anchor selection.
MatchResult afmlcs(std::span<const Observation> fingerprint,
                   std::span<const Segment> segments,
                   std::span<const Observation> target,
                   const MatchParams& params,
                   DpLimits limits = {},
                   std::optional<Anchor> forced_anchor = std::nullopt);

MatchResult afmlcs(const Fingerprint& fingerprint,
                   std::span<const Observation> target,
                   const MatchParams& params,
                   DpLimits limits = {});

/// The anchored per-segment matching of afmlcs without any success gating:
/// every segment is matched and the merged pairs are returned. Used by
/// fingerprint extraction, where both sides are noisy.
std::vector<IndexPair> match_segments(std::span<const Observation> fingerprint,
                                      std::span<const Segment> segments,
                                      std::span<const Observation> target,
                                      const MatchParams& params,
                                      DpLimits limits = {},
                                      std::optional<Anchor> forced_anchor = std::nullopt);

struct OracleResult {
    std::size_t max_length = 0;
    double min_distance = std::numeric_limits<double>::infinity();
};

inline constexpr std::size_t kOracleMaxLength = 12;

/// Exhaustive enumeration of all fuzzy common subsequences. Inputs longer than
/// kOracleMaxLength raise OracleLimitError.
OracleResult oracle_ntlcs(std::span<const Observation> seq1,
                          std::span<const Observation> seq2,
                          const MatchParams& params);

}  // namespace pktmatch
