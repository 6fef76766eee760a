#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pktmatch {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Direction : std::uint8_t { Upstream, Downstream };

enum class FrameKind : std::uint8_t { Data, Management, Control };

std::string_view to_string(Direction dir);
std::string_view to_string(FrameKind kind);
std::optional<Direction> parse_direction(std::string_view text);
std::optional<FrameKind> parse_frame_kind(std::string_view text);

/// One observed frame. `time` is seconds since trace start.
struct Packet {
    double time = 0.0;
    int size = 0;
    Direction dir = Direction::Upstream;
    FrameKind kind = FrameKind::Data;
    bool retry = false;
    std::optional<std::int64_t> seq_id;

    friend bool operator==(const Packet&, const Packet&) = default;
};

struct EventLabel {
    std::string event_id;
    std::string label;
    double t_init = 0.0;

    friend bool operator==(const EventLabel&, const EventLabel&) = default;
};

struct Trace {
    std::vector<Packet> packets;
    std::vector<EventLabel> labels;

    /// Throws Error if timestamps decrease or a label lies outside
    /// [0, last packet time + 15 s].
    void validate() const;

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// The (time, size, direction) triple the matchers operate on. Fingerprint
/// packets use their relative dt as `time`.
struct Observation {
    double time = 0.0;
    int size = 0;
    Direction dir = Direction::Upstream;

    friend bool operator==(const Observation&, const Observation&) = default;
};

std::vector<Observation> observations(std::span<const Packet> packets);

struct FingerprintPacket {
    double dt = 0.0;
    int size = 0;
    Direction dir = Direction::Upstream;

    friend bool operator==(const FingerprintPacket&, const FingerprintPacket&) = default;
};

/// Half-open index range [begin, end).
struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct MatchParams {
    int epsilon = 1;       // bytes, strict bound on |size difference|
    double gamma = 0.6;    // minimum matched fraction
    double beta = 2.0;     // seconds, alignment distance bound
    double alpha = 0.2;    // seconds, anchor interval tolerance
    double seg_gap = 0.5;  // seconds, segmentation gap threshold
    int seg_min = 3;       // minimum packets per segment

    void validate() const;

    /// ceil(gamma * n), the matched-length floor for an n-packet fingerprint.
    std::size_t required_matches(std::size_t n) const;

    friend bool operator==(const MatchParams&, const MatchParams&) = default;
};

struct Fingerprint {
    std::string label;
    std::vector<FingerprintPacket> packets;
    std::vector<Segment> segments;
    MatchParams params;

    double duration() const { return packets.empty() ? 0.0 : packets.back().dt; }
    std::vector<Observation> observations() const;

    /// Checks dt ordering and exact segment coverage.
    void validate() const;

    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

struct IndexPair {
    std::size_t fp = 0;
    std::size_t target = 0;

    friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

using Anchor = IndexPair;

struct MatchResult {
    std::vector<IndexPair> pairs;
    double distance = std::numeric_limits<double>::infinity();
    bool success = false;
};

/// Two packets are similar iff directions agree and |size difference| < epsilon.
template <typename A, typename B>
constexpr bool fuzzy_match(const A& a, const B& b, int epsilon) {
    if (a.dir != b.dir) return false;
    const long long diff = static_cast<long long>(a.size) - static_cast<long long>(b.size);
    return (diff < 0 ? -diff : diff) < epsilon;
}

/// Slack added to time-tolerance comparisons so exactly equal values are not
/// rejected by floating-point rounding.
inline constexpr double kTimeSlack = 1e-9;

}  // namespace pktmatch
