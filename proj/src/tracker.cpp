#include "pktmatch/tracker.hpp"

#include <algorithm>
#include <set>

namespace pktmatch {

namespace {

struct Prepared {
    const Fingerprint* source;
    std::vector<Observation> obs;
    std::vector<Segment> segments;
    std::size_t required;
    bool anchored;
    // prefix[k] = packets in stream[0, k) that could pair with some
    // fingerprint packet.
    std::vector<std::size_t> prefix;
};

Prepared prepare(const Fingerprint& fp,
                 std::span<const Observation> stream,
                 const MatchParams& params,
                 MatcherKind kind) {
    if (fp.packets.empty()) throw Error("fingerprint '" + fp.label + "' is empty");
    Prepared p{&fp, fp.observations(), fp.segments, params.required_matches(fp.packets.size()), false, {}};
    if (p.segments.empty()) p.segments = segment_ranges(p.obs, params.seg_gap, params.seg_min);
    p.anchored = kind == MatcherKind::Afmlcs || (kind == MatcherKind::Auto && p.segments.size() > 1);

    std::set<std::pair<int, Direction>> classes;
    for (const auto& o : p.obs) classes.insert({o.size, o.dir});
    p.prefix.assign(stream.size() + 1, 0);
    for (std::size_t k = 0; k < stream.size(); ++k) {
        bool hit = false;
        for (const auto& [size, dir] : classes) {
            if (fuzzy_match(stream[k], Observation{0.0, size, dir}, params.epsilon)) {
                hit = true;
                break;
            }
        }
        p.prefix[k + 1] = p.prefix[k] + (hit ? 1 : 0);
    }
    return p;
}

struct Candidate {
    std::size_t fp_index;
    double fraction;
    double distance;
    std::size_t matched;
    double window_end;
};

bool better(const Candidate& a, const Candidate& b) {
    if (a.fraction != b.fraction) return a.fraction > b.fraction;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.fp_index < b.fp_index;
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void finish(LabelScore& s) {
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    if (s.precision && s.recall) {
        const double sum = *s.precision + *s.recall;
        s.f1 = sum > 0.0 ? 2.0 * *s.precision * *s.recall / sum : 0.0;
    }
}

}  // namespace

std::vector<Detection> track(std::span<const Observation> stream,
                             const std::vector<Fingerprint>& fingerprints,
                             const MatchParams& params,
                             const TrackOptions& options,
                             TrackStats* stats) {
    if (fingerprints.empty()) throw Error("tracking needs at least one fingerprint");
    params.validate();
    TrackStats local;
    std::vector<Prepared> prepared;
    prepared.reserve(fingerprints.size());
    for (const auto& fp : fingerprints) prepared.push_back(prepare(fp, stream, params, options.matcher));

    std::vector<Detection> out;
    const auto after = [](double t, const Observation& o) { return t < o.time; };
    std::size_t i = 0;
    while (i < stream.size()) {
        ++local.windows;
        const double ws = stream[i].time;
        std::optional<Candidate> best;
        for (std::size_t k = 0; k < prepared.size(); ++k) {
            const auto& p = prepared[k];
            const double we = ws + p.obs.back().time - p.obs.front().time + options.window_slack;
            const auto hi = static_cast<std::size_t>(
                std::upper_bound(stream.begin() + static_cast<std::ptrdiff_t>(i), stream.end(), we, after) -
                stream.begin());
            if (p.prefix[hi] - p.prefix[i] < p.required) {
                ++local.skipped_prefilter;
                continue;
            }
            const auto window = stream.subspan(i, hi - i);
            MatchResult r;
            ++local.matcher_calls;
            try {
                r = p.anchored ? afmlcs(p.obs, p.segments, window, params, options.limits)
                               : fmlcs(p.obs, window, params, options.limits);
            } catch (const BlowupError&) {
                ++local.blowups;
                continue;
            }
            if (!r.success) continue;
            Candidate c{k, static_cast<double>(r.pairs.size()) / static_cast<double>(p.obs.size()), r.distance,
                        r.pairs.size(), we};
            if (!best || better(c, *best)) best = c;
        }
        if (!best) {
            ++i;
            continue;
        }
        out.push_back({prepared[best->fp_index].source->label, ws, best->window_end, best->matched, best->distance});
        i = static_cast<std::size_t>(std::upper_bound(stream.begin() + static_cast<std::ptrdiff_t>(i), stream.end(),
                                                      best->window_end, after) -
                                     stream.begin());
    }
    if (stats) *stats = local;
    return out;
}

std::vector<Detection> track(const Trace& trace,
                             const std::vector<Fingerprint>& fingerprints,
                             const MatchParams& params,
                             const TrackOptions& options,
                             TrackStats* stats) {
    const auto obs = observations(trace.packets);
    return track(obs, fingerprints, params, options, stats);
}

ScoreReport score(const std::vector<Detection>& detections,
                  const std::vector<EventLabel>& ground_truth,
                  double tolerance) {
    ScoreReport report;
    for (const auto& g : ground_truth) report.per_label[g.label];
    for (const auto& d : detections) report.per_label[d.label];

    std::vector<std::size_t> order(detections.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].window_start < detections[b].window_start;
    });
    std::vector<std::size_t> truth(ground_truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) truth[k] = k;
    std::stable_sort(truth.begin(), truth.end(), [&](std::size_t a, std::size_t b) {
        return ground_truth[a].t_init < ground_truth[b].t_init;
    });

    std::vector<char> used(ground_truth.size(), 0);
    for (std::size_t k : order) {
        const auto& d = detections[k];
        auto& s = report.per_label[d.label];
        bool hit = false;
        for (std::size_t g : truth) {
            const auto& e = ground_truth[g];
            if (used[g] || e.label != d.label) continue;
            if (e.t_init >= d.window_start - tolerance && e.t_init <= d.window_end) {
                used[g] = 1;
                hit = true;
                break;
            }
        }
        ++(hit ? s.tp : s.fp);
    }
    for (std::size_t g = 0; g < ground_truth.size(); ++g)
        if (!used[g]) ++report.per_label[ground_truth[g].label].fn;

    double sp = 0.0, sr = 0.0, sf = 0.0;
    std::size_t np = 0, nr = 0, nf = 0;
    for (auto& [label, s] : report.per_label) {
        finish(s);
        report.overall.tp += s.tp;
        report.overall.fp += s.fp;
        report.overall.fn += s.fn;
        if (s.precision) sp += *s.precision, ++np;
        if (s.recall) sr += *s.recall, ++nr;
        if (s.f1) sf += *s.f1, ++nf;
    }
    finish(report.overall);
    if (np) report.macro_precision = sp / static_cast<double>(np);
    if (nr) report.macro_recall = sr / static_cast<double>(nr);
    if (nf) report.macro_f1 = sf / static_cast<double>(nf);
    return report;
}

std::optional<Scenario> parse_scenario(std::string_view text) {
    if (text == "naive") return Scenario::Naive;
    if (text == "single_target") return Scenario::SingleTarget;
    if (text == "multi_target") return Scenario::MultiTarget;
    return std::nullopt;
}

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::Naive: return "naive";
        case Scenario::SingleTarget: return "single_target";
        case Scenario::MultiTarget: return "multi_target";
    }
    return "unknown";
}

ScenarioOutcome run_scenario(Scenario scenario,
                             const std::vector<Fingerprint>& fingerprints,
                             const Trace& trace,
                             const std::optional<std::string>& target,
                             const MatchParams& params,
                             const TrackOptions& options,
                             double tolerance) {
    if (fingerprints.empty()) throw Error("scenario needs at least one fingerprint");
    ScenarioOutcome out;
    if (scenario == Scenario::MultiTarget) {
        out.detections = track(trace, fingerprints, params, options);
        out.report = score(out.detections, trace.labels, tolerance);
        return out;
    }

    std::string label;
    if (target) {
        label = *target;
    } else if (scenario == Scenario::Naive && fingerprints.size() == 1) {
        label = fingerprints.front().label;
    } else {
        throw Error(std::string(to_string(scenario)) + " scenario needs a target label");
    }
    const auto it = std::find_if(fingerprints.begin(), fingerprints.end(),
                                 [&](const Fingerprint& f) { return f.label == label; });
    if (it == fingerprints.end()) throw Error("unknown target label '" + label + "'");

    if (scenario == Scenario::Naive) {
        out.detections = track(trace, std::vector<Fingerprint>{*it}, params, options);
    } else {
        for (auto& d : track(trace, fingerprints, params, options))
            if (d.label == label) out.detections.push_back(std::move(d));
    }
    std::vector<EventLabel> truth;
    for (const auto& e : trace.labels)
        if (e.label == label) truth.push_back(e);
    out.report = score(out.detections, truth, tolerance);
    return out;
}

}  // namespace pktmatch
