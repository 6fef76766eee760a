#include "pktmatch/extractor.hpp"

#include <algorithm>
#include <tuple>

namespace pktmatch {

namespace {

bool obs_less(const Observation& a, const Observation& b) {
    return std::tie(a.time, a.size, a.dir) < std::tie(b.time, b.size, b.dir);
}

std::vector<Observation> group_observations(const TrainingGroup& g) {
    return observations(g.packets);
}

struct Canonical {
    int size;
    Direction dir;
    double dt;
};

}  // namespace

std::vector<TrainingGroup> insert_fake_anchors(std::vector<TrainingGroup> groups) {
    for (auto& g : groups) {
        for (const auto& p : g.packets)
            if (p.size == kFakeAnchorSize)
                throw Error("group " + std::to_string(g.group_id) +
                            " holds a real size-0 packet, which collides with the anchor encoding");
        Packet fake;
        fake.time = 0.0;
        fake.size = kFakeAnchorSize;
        fake.dir = Direction::Downstream;
        g.packets.insert(g.packets.begin(), fake);
    }
    return groups;
}

CoarseFingerprint pairwise_consensus(const std::vector<TrainingGroup>& anchored_groups,
                                     const MatchParams& params,
                                     DpLimits limits,
                                     ConsensusStats* stats) {
    if (anchored_groups.size() < 2) throw Error("need >= 2 groups for consensus");
    ConsensusStats local;

    std::vector<std::vector<Observation>> obs;
    std::vector<std::vector<Segment>> segs;
    obs.reserve(anchored_groups.size());
    for (const auto& g : anchored_groups) {
        if (g.packets.empty() || g.packets.front().size != kFakeAnchorSize)
            throw Error("consensus expects groups that start with the fake anchor");
        obs.push_back(group_observations(g));
        segs.push_back(segment_ranges(obs.back(), params.seg_gap, params.seg_min));
    }

    std::vector<Canonical> matched;
    for (std::size_t a = 0; a < obs.size(); ++a) {
        for (std::size_t b = a + 1; b < obs.size(); ++b) {
            ++local.pairs;
            // The smaller sequence plays the fingerprint so the outcome does
            // not depend on group order.
            std::size_t f = a;
            std::size_t t = b;
            if (std::lexicographical_compare(obs[b].begin(), obs[b].end(), obs[a].begin(), obs[a].end(), obs_less))
                std::swap(f, t);
            std::vector<IndexPair> pairs;
            try {
                pairs = match_segments(obs[f], segs[f], obs[t], params, limits, Anchor{0, 0});
            } catch (const BlowupError&) {
                ++local.skipped_blowup;
                continue;
            }
            for (const auto& p : pairs) {
                if (p.fp == 0) continue;
                const auto& x = obs[f][p.fp];
                const auto& y = obs[t][p.target];
                matched.push_back({x.size, x.dir, 0.5 * (x.time + y.time)});
            }
        }
    }
    local.matched_packets = matched.size();

    std::sort(matched.begin(), matched.end(), [](const Canonical& x, const Canonical& y) {
        return std::tie(x.size, x.dir, x.dt) < std::tie(y.size, y.dir, y.dt);
    });
    CoarseFingerprint cf;
    std::size_t i = 0;
    while (i < matched.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < matched.size() && matched[j].size == matched[i].size && matched[j].dir == matched[i].dir &&
               matched[j].dt - matched[i].dt <= params.alpha + kTimeSlack) {
            sum += matched[j].dt;
            ++j;
        }
        cf.push_back({sum / static_cast<double>(j - i), matched[i].size, matched[i].dir, j - i});
        i = j;
    }
    std::sort(cf.begin(), cf.end(), [](const CoarsePacket& x, const CoarsePacket& y) {
        return std::tie(x.dt, x.size, x.dir) < std::tie(y.dt, y.size, y.dir);
    });
    if (stats) *stats = local;
    return cf;
}

namespace {

// Counts, for every fingerprint packet, the (group, window) positions in which
// it was matched.
std::vector<std::size_t> window_counts(const std::vector<Observation>& fp,
                                       const std::vector<std::vector<Observation>>& groups,
                                       const MatchParams& params,
                                       const RefineOptions& options) {
    std::vector<std::size_t> counts(fp.size(), 0);
    const auto segments = segment_ranges(fp, params.seg_gap, params.seg_min);
    const double width = fp.back().time - fp.front().time + options.window_slack;
    std::vector<char> hit(fp.size());
    const auto by_time = [](const Observation& o, double t) { return o.time < t; };
    for (const auto& g : groups) {
        if (g.empty()) continue;
        const double first = g.front().time;
        const double last = g.back().time;
        // Window starts on the stride grid that covers every packet.
        const double start = first - width;
        for (std::size_t step = 1;; ++step) {
            const double ws = start + static_cast<double>(step) * options.stride;
            if (ws > last) break;
            const auto lo = std::lower_bound(g.begin(), g.end(), ws, by_time);
            const auto hi = std::upper_bound(g.begin(), g.end(), ws + width,
                                             [](double t, const Observation& o) { return t < o.time; });
            if (lo >= hi) continue;
            const std::span<const Observation> window(&*lo, static_cast<std::size_t>(hi - lo));
            std::vector<IndexPair> pairs;
            try {
                pairs = match_segments(fp, segments, window, params, options.limits);
            } catch (const BlowupError&) {
                continue;
            }
            std::fill(hit.begin(), hit.end(), 0);
            for (const auto& p : pairs) hit[p.fp] = 1;
            for (std::size_t k = 0; k < fp.size(); ++k) counts[k] += static_cast<std::size_t>(hit[k]);
        }
    }
    return counts;
}

std::vector<Observation> mirrored(const std::vector<Observation>& seq, double pivot) {
    std::vector<Observation> out(seq.rbegin(), seq.rend());
    for (auto& o : out) o.time = pivot - o.time;
    return out;
}

}  // namespace

Fingerprint refine(const CoarseFingerprint& cf,
                   const std::vector<TrainingGroup>& groups,
                   const std::string& label,
                   const MatchParams& params,
                   const RefineOptions& options,
                   std::vector<RefinePass>* passes) {
    if (cf.empty()) throw Error("coarse fingerprint is empty; nothing to refine");
    if (groups.empty()) throw Error("refinement needs training groups");
    if (options.stride <= 0.0) throw Error("refinement stride must be positive");

    std::vector<std::vector<Observation>> fwd_groups;
    std::vector<std::vector<Observation>> bwd_groups;
    double pivot = 0.0;
    for (const auto& g : groups) {
        fwd_groups.push_back(group_observations(g));
        if (!g.packets.empty()) pivot = std::max(pivot, g.packets.back().time);
    }
    for (const auto& g : fwd_groups) bwd_groups.push_back(mirrored(g, pivot));

    const double threshold = static_cast<double>(groups.size()) * options.rho;
    CoarseFingerprint current = cf;
    while (true) {
        std::vector<Observation> fp;
        for (const auto& c : current) fp.push_back({c.dt, c.size, c.dir});
        const auto forward = window_counts(fp, fwd_groups, params, options);
        const auto backward = window_counts(mirrored(fp, pivot), bwd_groups, params, options);

        RefinePass pass{current, forward, {}, {}};
        pass.backward.resize(current.size());
        CoarseFingerprint kept;
        for (std::size_t k = 0; k < current.size(); ++k) {
            // The mirrored fingerprint lists packets in reverse.
            const std::size_t back = backward[current.size() - 1 - k];
            pass.backward[k] = back;
            if (static_cast<double>(std::min(forward[k], back)) < threshold)
                pass.discarded.push_back(k);
            else
                kept.push_back(current[k]);
        }
        const bool changed = !pass.discarded.empty();
        if (passes) passes->push_back(std::move(pass));
        if (kept.empty()) throw Error("no stable fingerprint; lower rho or collect more samples");
        if (!changed) break;
        current = std::move(kept);
    }

    Fingerprint out;
    out.label = label;
    out.params = params;
    const double base = current.front().dt;
    for (const auto& c : current) out.packets.push_back({c.dt - base, c.size, c.dir});
    return segment(std::move(out), params);
}

std::size_t default_min_support(std::size_t groups) {
    const std::size_t half = (groups + 1) / 2;
    return std::max<std::size_t>(1, half * (half - 1) / 2);
}

Fingerprint extract(const std::vector<TrainingGroup>& groups,
                    const std::string& label,
                    const MatchParams& params,
                    const ExtractOptions& options,
                    ExtractionReport* report) {
    if (groups.size() < 2) throw Error("need >= 2 groups to extract a fingerprint");
    params.validate();
    ExtractionReport local;
    local.groups = groups.size();
    const auto anchored = insert_fake_anchors(groups);
    local.coarse = pairwise_consensus(anchored, params, options.refine.limits, &local.consensus);

    local.min_support = options.min_support == 0 ? default_min_support(groups.size()) : options.min_support;
    CoarseFingerprint supported;
    for (const auto& c : local.coarse) {
        if (c.support >= local.min_support)
            supported.push_back(c);
        else
            ++local.pruned_low_support;
    }
    if (supported.empty())
        throw Error("no coarse fingerprint packet reached the support floor; collect more samples");

    auto fp = refine(supported, groups, label, params, options.refine, &local.passes);
    if (report) *report = std::move(local);
    return fp;
}

}  // namespace pktmatch
