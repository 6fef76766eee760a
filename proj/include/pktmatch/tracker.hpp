#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pktmatch/core.hpp"
#include "pktmatch/matcher.hpp"

namespace pktmatch {

struct Detection {
    std::string label;
    double window_start = 0.0;
    double window_end = 0.0;
    std::size_t matched_count = 0;
    double distance = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

enum class MatcherKind {
    Auto,    // afmlcs for multi-segment fingerprints, fmlcs otherwise
    Fmlcs,
    Afmlcs,
};

struct TrackOptions {
    MatcherKind matcher = MatcherKind::Auto;
    double window_slack = 2.0;  // window = fingerprint duration + slack
    DpLimits limits{100'000};
};

struct TrackStats {
    std::size_t windows = 0;
    std::size_t matcher_calls = 0;
    std::size_t skipped_prefilter = 0;
    std::size_t blowups = 0;
};

/// Slides a window to every packet of `stream` and matches each fingerprint.
/// After a detection the scan resumes at the first packet past the window.
/// Fingerprints without segments are segmented with `params`.
std::vector<Detection> track(std::span<const Observation> stream,
                             const std::vector<Fingerprint>& fingerprints,
                             const MatchParams& params,
                             const TrackOptions& options = {},
                             TrackStats* stats = nullptr);

std::vector<Detection> track(const Trace& trace,
                             const std::vector<Fingerprint>& fingerprints,
                             const MatchParams& params,
                             const TrackOptions& options = {},
                             TrackStats* stats = nullptr);

struct LabelScore {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

struct ScoreReport {
    std::map<std::string, LabelScore> per_label;
    LabelScore overall;
    // Means over labels where the metric is defined.
    std::optional<double> macro_precision;
    std::optional<double> macro_recall;
    std::optional<double> macro_f1;
};

inline constexpr double kScoreTolerance = 3.0;

/// A detection is a true positive when an unused ground-truth event of the
/// same label starts in [window_start - tolerance, window_end].
ScoreReport score(const std::vector<Detection>& detections,
                  const std::vector<EventLabel>& ground_truth,
                  double tolerance = kScoreTolerance);

enum class Scenario { Naive, SingleTarget, MultiTarget };

std::optional<Scenario> parse_scenario(std::string_view text);
std::string_view to_string(Scenario s);

struct ScenarioOutcome {
    std::vector<Detection> detections;
    ScoreReport report;
};

/// naive: track with the target fingerprint only and score against the
/// target's events. single_target: track with all fingerprints, keep target
/// detections. multi_target: track with all and score everything.
ScenarioOutcome run_scenario(Scenario scenario,
                             const std::vector<Fingerprint>& fingerprints,
                             const Trace& trace,
                             const std::optional<std::string>& target,
                             const MatchParams& params,
                             const TrackOptions& options = {},
                             double tolerance = kScoreTolerance);

}  // namespace pktmatch
