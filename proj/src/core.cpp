#include "pktmatch/core.hpp"

#include <string>

namespace pktmatch {

std::string_view to_string(Direction dir) {
    return dir == Direction::Upstream ? "up" : "down";
}

std::string_view to_string(FrameKind kind) {
    switch (kind) {
        case FrameKind::Data: return "data";
        case FrameKind::Management: return "mgmt";
        case FrameKind::Control: return "ctrl";
    }
    return "data";
}

std::optional<Direction> parse_direction(std::string_view text) {
    if (text == "up") return Direction::Upstream;
    if (text == "down") return Direction::Downstream;
    return std::nullopt;
}

std::optional<FrameKind> parse_frame_kind(std::string_view text) {
    if (text == "data") return FrameKind::Data;
    if (text == "mgmt") return FrameKind::Management;
    if (text == "ctrl") return FrameKind::Control;
    return std::nullopt;
}

void Trace::validate() const {
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto& p = packets[i];
        if (!std::isfinite(p.time) || p.time < 0.0)
            throw Error("packet " + std::to_string(i) + " has invalid time");
        if (p.size < 0) throw Error("packet " + std::to_string(i) + " has negative size");
        if (i > 0 && p.time < packets[i - 1].time)
            throw Error("timestamps decrease at packet " + std::to_string(i));
    }
    const double last = packets.empty() ? 0.0 : packets.back().time;
    for (const auto& l : labels) {
        if (!(l.t_init >= 0.0 && l.t_init <= last + 15.0))
            throw Error("label " + l.event_id + " initiation time out of range");
    }
}

std::vector<Observation> observations(std::span<const Packet> packets) {
    std::vector<Observation> out;
    out.reserve(packets.size());
    for (const auto& p : packets) out.push_back({p.time, p.size, p.dir});
    return out;
}

void MatchParams::validate() const {
    if (epsilon < 1) throw Error("epsilon must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("gamma must lie in (0, 1]");
    if (!(beta > 0.0)) throw Error("beta must be > 0");
    if (!(alpha > 0.0)) throw Error("alpha must be > 0");
    if (!(seg_gap > 0.0)) throw Error("seg_gap must be > 0");
    if (seg_min < 1) throw Error("seg_min must be >= 1");
}

std::size_t MatchParams::required_matches(std::size_t n) const {
    // 0.6 * 5 must give 3, not 4
    return static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
}

std::vector<Observation> Fingerprint::observations() const {
    std::vector<Observation> out;
    out.reserve(packets.size());
    for (const auto& p : packets) out.push_back({p.dt, p.size, p.dir});
    return out;
}

void Fingerprint::validate() const {
    if (packets.empty()) return;
    if (packets.front().dt != 0.0) throw Error("fingerprint dt must start at 0");
    for (std::size_t i = 1; i < packets.size(); ++i)
        if (packets[i].dt < packets[i - 1].dt) throw Error("fingerprint dt decreases");
    std::size_t next = 0;
    for (const auto& s : segments) {
        if (s.begin != next || s.end <= s.begin) throw Error("segments must be contiguous and non-empty");
        next = s.end;
    }
    if (!segments.empty() && next != packets.size()) throw Error("segments must cover every packet");
}

}  // namespace pktmatch
