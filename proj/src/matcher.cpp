#include "pktmatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

namespace pktmatch {

double time_alignment(std::span<const IndexPair> pairs,
                      std::span<const Observation> fingerprint,
                      std::span<const Observation> target) {
    if (pairs.empty()) throw Error("time_alignment needs at least one matched pair");
    const double n = static_cast<double>(pairs.size());
    double mean_fp = 0.0;
    double mean_tg = 0.0;
    for (const auto& p : pairs) {
        mean_fp += fingerprint[p.fp].time;
        mean_tg += target[p.target].time;
    }
    mean_fp /= n;
    mean_tg /= n;
    double sum = 0.0;
    for (const auto& p : pairs) {
        const double d = (fingerprint[p.fp].time - mean_fp) - (target[p.target].time - mean_tg);
        sum += d * d;
    }
    return std::sqrt(sum);
}

namespace {

// All-longest-common-subsequence DP. Each cell holds the id of an immutable
// set of path nodes; a path is a parent-linked chain of index pairs. A given
// subsequence is created exactly once (at the cell of its last pair), so
// node ids identify subsequences and set union is a sorted merge on ids.
class LcsEngine {
public:
    struct Node {
        std::uint32_t fp;
        std::uint32_t target;
        std::int32_t parent;
    };

    LcsEngine(std::size_t n, std::size_t m, DpLimits limits)
        : n_(n), m_(m), cap_(limits.path_cap),
          lengths_((n + 1) * (m + 1), 0), set_ids_((n + 1) * (m + 1), 0) {
        sets_.push_back({-1});  // set 0: only the empty path
    }

    template <typename Eligible>
    void run(Eligible&& eligible) {
        for (std::size_t i = 1; i <= n_; ++i) {
            for (std::size_t j = 1; j <= m_; ++j) {
                const std::size_t here = idx(i, j);
                const std::size_t up = idx(i - 1, j);
                const std::size_t left = idx(i, j - 1);
                const std::size_t diag = idx(i - 1, j - 1);
                if (eligible(i - 1, j - 1)) {
                    const int len = lengths_[diag] + 1;
                    std::int32_t s = extend(set_ids_[diag], i - 1, j - 1);
                    if (lengths_[up] == len) s = unite(s, set_ids_[up]);
                    if (lengths_[left] == len) s = unite(s, set_ids_[left]);
                    lengths_[here] = len;
                    set_ids_[here] = s;
                } else if (lengths_[up] > lengths_[left]) {
                    lengths_[here] = lengths_[up];
                    set_ids_[here] = set_ids_[up];
                } else if (lengths_[up] < lengths_[left]) {
                    lengths_[here] = lengths_[left];
                    set_ids_[here] = set_ids_[left];
                } else {
                    lengths_[here] = lengths_[up];
                    set_ids_[here] = unite(set_ids_[up], set_ids_[left]);
                }
            }
        }
    }

    int length(std::size_t i, std::size_t j) const { return lengths_[idx(i, j)]; }
    const std::vector<std::int32_t>& members(std::size_t i, std::size_t j) const {
        return sets_[static_cast<std::size_t>(set_ids_[idx(i, j)])];
    }

    void path(std::int32_t node, std::vector<IndexPair>& out) const {
        out.clear();
        for (std::int32_t k = node; k >= 0; k = nodes_[static_cast<std::size_t>(k)].parent) {
            const auto& nd = nodes_[static_cast<std::size_t>(k)];
            out.push_back({nd.fp, nd.target});
        }
        std::reverse(out.begin(), out.end());
    }

private:
    std::size_t idx(std::size_t i, std::size_t j) const { return i * (m_ + 1) + j; }

    std::int32_t store(std::vector<std::int32_t>&& members) {
        if (members.size() > cap_)
            throw BlowupError("combinatorial blowup: " + std::to_string(members.size()) +
                              " longest subsequences at one cell; use afmlcs");
        stored_ += members.size();
        if (stored_ > 16 * cap_ || nodes_.size() > 16 * cap_)
            throw BlowupError("combinatorial blowup: path storage limit reached; use afmlcs");
        sets_.push_back(std::move(members));
        return static_cast<std::int32_t>(sets_.size() - 1);
    }

    std::int32_t extend(std::int32_t set, std::size_t i, std::size_t j) {
        const auto& src = sets_[static_cast<std::size_t>(set)];
        std::vector<std::int32_t> out;
        out.reserve(src.size());
        for (std::int32_t parent : src) {
            nodes_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), parent});
            out.push_back(static_cast<std::int32_t>(nodes_.size() - 1));
        }
        return store(std::move(out));
    }

    std::int32_t unite(std::int32_t a, std::int32_t b) {
        if (a == b) return a;
        const auto& sa = sets_[static_cast<std::size_t>(a)];
        const auto& sb = sets_[static_cast<std::size_t>(b)];
        std::vector<std::int32_t> out;
        out.reserve(sa.size() + sb.size());
        std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(out));
        if (out.size() == sa.size()) return a;
        if (out.size() == sb.size()) return b;
        return store(std::move(out));
    }

    std::size_t n_;
    std::size_t m_;
    std::size_t cap_;
    std::size_t stored_ = 0;
    std::vector<int> lengths_;
    std::vector<std::int32_t> set_ids_;
    std::vector<std::vector<std::int32_t>> sets_;
    std::vector<Node> nodes_;
};

// Runs the engine on fp x target and returns the longest subsequence with the
// smallest alignment distance. Indices in the result are shifted by the given
// offsets so callers can work on sub-spans of larger sequences.
template <typename Eligible>
MatchResult best_longest(std::span<const Observation> fp,
                         std::span<const Observation> target,
                         DpLimits limits,
                         Eligible&& eligible) {
    MatchResult result;
    if (fp.empty() || target.empty()) return result;
    LcsEngine engine(fp.size(), target.size(), limits);
    engine.run(eligible);
    if (engine.length(fp.size(), target.size()) == 0) return result;

    std::vector<IndexPair> candidate;
    for (std::int32_t node : engine.members(fp.size(), target.size())) {
        engine.path(node, candidate);
        const double d = time_alignment(candidate, fp, target);
        if (result.pairs.empty() || d < result.distance ||
            (d == result.distance && candidate < result.pairs)) {
            result.pairs = candidate;
            result.distance = d;
        }
    }
    return result;
}

void shift(std::vector<IndexPair>& pairs, std::size_t fp_offset, std::size_t target_offset) {
    for (auto& p : pairs) {
        p.fp += fp_offset;
        p.target += target_offset;
    }
}

bool within_alpha(double fp_rel, double target_rel, double alpha) {
    return std::abs(fp_rel - target_rel) <= alpha + kTimeSlack;
}

MatchResult judge(MatchResult r, std::size_t fp_len, const MatchParams& params) {
    r.success = !r.pairs.empty() && r.pairs.size() >= params.required_matches(fp_len) &&
                r.distance <= params.beta;
    return r;
}

}  // namespace

DpTables dp_tables(std::span<const Observation> fingerprint,
                   std::span<const Observation> target,
                   int epsilon,
                   DpLimits limits) {
    LcsEngine engine(fingerprint.size(), target.size(), limits);
    engine.run([&](std::size_t i, std::size_t j) { return fuzzy_match(fingerprint[i], target[j], epsilon); });
    DpTables t;
    t.rows = fingerprint.size() + 1;
    t.cols = target.size() + 1;
    t.lengths.resize(t.rows * t.cols);
    t.cell_paths.resize(t.rows * t.cols);
    std::vector<IndexPair> path;
    for (std::size_t i = 0; i < t.rows; ++i) {
        for (std::size_t j = 0; j < t.cols; ++j) {
            t.lengths[i * t.cols + j] = engine.length(i, j);
            auto& cell = t.cell_paths[i * t.cols + j];
            for (std::int32_t node : engine.members(i, j)) {
                if (node < 0) {
                    cell.emplace_back();
                } else {
                    engine.path(node, path);
                    cell.push_back(path);
                }
            }
        }
    }
    return t;
}

MatchResult fmlcs(std::span<const Observation> fingerprint,
                  std::span<const Observation> target,
                  const MatchParams& params,
                  DpLimits limits) {
    if (fingerprint.empty()) throw Error("fmlcs needs a non-empty fingerprint");
    auto r = best_longest(fingerprint, target, limits, [&](std::size_t i, std::size_t j) {
        return fuzzy_match(fingerprint[i], target[j], params.epsilon);
    });
    return judge(std::move(r), fingerprint.size(), params);
}

MatchResult fmlcs(const Fingerprint& fingerprint,
                  std::span<const Observation> target,
                  const MatchParams& params,
                  DpLimits limits) {
    const auto obs = fingerprint.observations();
    return fmlcs(obs, target, params, limits);
}

std::optional<Anchor> select_anchor(std::span<const Observation> fingerprint_segment,
                                    std::span<const Observation> target,
                                    int epsilon) {
    for (std::size_t i = 0; i < fingerprint_segment.size(); ++i)
        for (std::size_t j = 0; j < target.size(); ++j)
            if (fuzzy_match(fingerprint_segment[i], target[j], epsilon)) return Anchor{i, j};
    return std::nullopt;
}

MatchResult fmlcs_anchored(std::span<const Observation> fingerprint,
                           std::span<const Observation> target,
                           Anchor anchor,
                           const MatchParams& params,
                           DpLimits limits) {
    if (anchor.fp >= fingerprint.size() || anchor.target >= target.size() ||
        !fuzzy_match(fingerprint[anchor.fp], target[anchor.target], params.epsilon))
        throw Error("anchor does not pair two similar packets");
    const double fa = fingerprint[anchor.fp].time;
    const double ta = target[anchor.target].time;
    auto r = best_longest(fingerprint, target, limits, [&](std::size_t i, std::size_t j) {
        if (i == anchor.fp && j == anchor.target) return true;
        const bool before = i < anchor.fp && j < anchor.target;
        const bool after = i > anchor.fp && j > anchor.target;
        return (before || after) && fuzzy_match(fingerprint[i], target[j], params.epsilon) &&
               within_alpha(fingerprint[i].time - fa, target[j].time - ta, params.alpha);
    });
    return judge(std::move(r), fingerprint.size(), params);
}

std::vector<Segment> segment_ranges(std::span<const Observation> packets, double seg_gap, int seg_min) {
    std::vector<Segment> raw;
    if (packets.empty()) return raw;
    std::size_t begin = 0;
    for (std::size_t i = 1; i < packets.size(); ++i) {
        if (packets[i].time - packets[i - 1].time > seg_gap) {
            raw.push_back({begin, i});
            begin = i;
        }
    }
    raw.push_back({begin, packets.size()});

    const auto min_size = static_cast<std::size_t>(std::max(seg_min, 1));
    std::vector<Segment> merged;
    std::size_t acc_begin = 0;
    for (const auto& s : raw) {
        if (s.end - acc_begin >= min_size) {
            merged.push_back({acc_begin, s.end});
            acc_begin = s.end;
        }
    }
    if (acc_begin < packets.size()) {
        if (merged.empty())
            merged.push_back({acc_begin, packets.size()});
        else
            merged.back().end = packets.size();
    }
    return merged;
}

Fingerprint segment(Fingerprint fingerprint, const MatchParams& params) {
    const auto obs = fingerprint.observations();
    fingerprint.segments = segment_ranges(obs, params.seg_gap, params.seg_min);
    return fingerprint;
}

namespace {

enum class Gate { FirstSegment, None };

// Anchored match of one fingerprint segment against the target packets whose
// anchor-relative time lies in the segment's span widened by `slack`.
MatchResult match_one_segment(std::span<const Observation> fp,
                              Segment seg,
                              std::span<const Observation> target,
                              Anchor anchor,
                              bool holds_anchor,
                              double slack,
                              const MatchParams& params,
                              DpLimits limits) {
    const double fa = fp[anchor.fp].time;
    const double ta = target[anchor.target].time;
    const double lo_t = ta + (fp[seg.begin].time - fa) - slack - kTimeSlack;
    const double hi_t = ta + (fp[seg.end - 1].time - fa) + slack + kTimeSlack;
    const auto by_time = [](const Observation& o, double t) { return o.time < t; };
    const auto lo = static_cast<std::size_t>(
        std::lower_bound(target.begin(), target.end(), lo_t, by_time) - target.begin());
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(target.begin(), target.end(), hi_t,
                         [](double t, const Observation& o) { return t < o.time; }) -
        target.begin());
    if (lo >= hi) return {};

    const auto fp_seg = fp.subspan(seg.begin, seg.size());
    const auto tg_slice = target.subspan(lo, hi - lo);
    auto r = best_longest(fp_seg, tg_slice, limits, [&](std::size_t i, std::size_t j) {
        const std::size_t gi = i + seg.begin;
        const std::size_t gj = j + lo;
        if (holds_anchor) {
            if (gi == anchor.fp && gj == anchor.target) return true;
            const bool before = gi < anchor.fp && gj < anchor.target;
            const bool after = gi > anchor.fp && gj > anchor.target;
            if (!before && !after) return false;
        }
        return fuzzy_match(fp[gi], target[gj], params.epsilon) &&
               within_alpha(fp[gi].time - fa, target[gj].time - ta, params.alpha);
    });
    shift(r.pairs, seg.begin, lo);
    return r;
}

MatchResult run_afmlcs(std::span<const Observation> fp,
                       std::span<const Segment> segments,
                       std::span<const Observation> target,
                       const MatchParams& params,
                       DpLimits limits,
                       std::optional<Anchor> forced,
                       Gate gate) {
    if (fp.empty()) throw Error("afmlcs needs a non-empty fingerprint");
    std::vector<Segment> whole;
    if (segments.empty()) {
        whole.push_back({0, fp.size()});
        segments = whole;
    }
    MatchResult result;
    if (target.empty()) return result;

    const Segment first = segments.front();
    Anchor anchor{};
    if (forced) {
        anchor = *forced;
        if (anchor.fp < first.begin || anchor.fp >= first.end || anchor.target >= target.size())
            throw Error("forced anchor must lie in the first segment");
    } else {
        const auto a = select_anchor(fp.subspan(first.begin, first.size()), target, params.epsilon);
        if (!a) return result;
        anchor = {a->fp + first.begin, a->target};
    }

    auto head = match_one_segment(fp, first, target, anchor, true, params.alpha, params, limits);
    result.pairs = std::move(head.pairs);
    if (gate == Gate::FirstSegment && result.pairs.size() < params.required_matches(first.size())) {
        if (!result.pairs.empty()) result.distance = time_alignment(result.pairs, fp, target);
        return result;
    }

    // Later segments are matched independently and merged in fingerprint
    // order; a pair that would break target monotonicity is dropped.
    for (std::size_t s = 1; s < segments.size(); ++s) {
        auto part = match_one_segment(fp, segments[s], target, anchor, false,
                                      params.alpha + params.beta, params, limits);
        for (const auto& p : part.pairs) {
            if (!result.pairs.empty() && p.target <= result.pairs.back().target) continue;
            result.pairs.push_back(p);
        }
    }
    if (!result.pairs.empty()) result.distance = time_alignment(result.pairs, fp, target);
    return judge(std::move(result), fp.size(), params);
}

}  // namespace

MatchResult afmlcs(std::span<const Observation> fingerprint,
                   std::span<const Segment> segments,
                   std::span<const Observation> target,
                   const MatchParams& params,
                   DpLimits limits,
                   std::optional<Anchor> forced_anchor) {
    return run_afmlcs(fingerprint, segments, target, params, limits, forced_anchor, Gate::FirstSegment);
}

MatchResult afmlcs(const Fingerprint& fingerprint,
                   std::span<const Observation> target,
                   const MatchParams& params,
                   DpLimits limits) {
    const auto obs = fingerprint.observations();
    return afmlcs(obs, fingerprint.segments, target, params, limits);
}

std::vector<IndexPair> match_segments(std::span<const Observation> fingerprint,
                                      std::span<const Segment> segments,
                                      std::span<const Observation> target,
                                      const MatchParams& params,
                                      DpLimits limits,
                                      std::optional<Anchor> forced_anchor) {
    return run_afmlcs(fingerprint, segments, target, params, limits, forced_anchor, Gate::None).pairs;
}

OracleResult oracle_ntlcs(std::span<const Observation> seq1,
                          std::span<const Observation> seq2,
                          const MatchParams& params) {
    if (seq1.size() > kOracleMaxLength || seq2.size() > kOracleMaxLength)
        throw OracleLimitError("oracle limit: sequences must have at most " +
                               std::to_string(kOracleMaxLength) + " packets");
    OracleResult best;
    std::vector<IndexPair> chain;
    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t i0, std::size_t j0) {
        for (std::size_t i = i0; i < seq1.size(); ++i) {
            for (std::size_t j = j0; j < seq2.size(); ++j) {
                if (!fuzzy_match(seq1[i], seq2[j], params.epsilon)) continue;
                chain.push_back({i, j});
                const double d = time_alignment(chain, seq1, seq2);
                if (chain.size() > best.max_length) {
                    best.max_length = chain.size();
                    best.min_distance = d;
                } else if (chain.size() == best.max_length) {
                    best.min_distance = std::min(best.min_distance, d);
                }
                walk(i + 1, j + 1);
                chain.pop_back();
            }
        }
    };
    walk(0, 0);
    return best;
}

}  // namespace pktmatch
