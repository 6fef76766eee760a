#include "pktmatch/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace pktmatch {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) return false;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

void append_double(std::string& out, double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

Direction direction_field(const Json& j) {
    const auto d = parse_direction(j.get<std::string>());
    if (!d) throw Error("invalid direction '" + j.get<std::string>() + "'");
    return *d;
}

}  // namespace

std::vector<Packet> parse_trace_csv(const std::string& text) {
    std::vector<Packet> packets;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kTraceHeader) throw ParseError(line_no, std::string("expected header '") + kTraceHeader + "'");
            header_seen = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 6) throw ParseError(line_no, "expected 6 fields, got " + std::to_string(f.size()));
        Packet p;
        if (!parse_number(f[0], p.time) || !std::isfinite(p.time) || p.time < 0.0)
            throw ParseError(line_no, "invalid time '" + std::string(f[0]) + "'");
        if (!parse_number(f[1], p.size) || p.size < 0)
            throw ParseError(line_no, "invalid size '" + std::string(f[1]) + "'");
        const auto dir = parse_direction(f[2]);
        if (!dir) throw ParseError(line_no, "invalid dir '" + std::string(f[2]) + "'");
        p.dir = *dir;
        const auto kind = parse_frame_kind(f[3]);
        if (!kind) throw ParseError(line_no, "invalid kind '" + std::string(f[3]) + "'");
        p.kind = *kind;
        if (f[4] == "0") {
            p.retry = false;
        } else if (f[4] == "1") {
            p.retry = true;
        } else {
            throw ParseError(line_no, "invalid retry '" + std::string(f[4]) + "'");
        }
        if (!f[5].empty()) {
            std::int64_t seq = 0;
            if (!parse_number(f[5], seq)) throw ParseError(line_no, "invalid seq_id '" + std::string(f[5]) + "'");
            p.seq_id = seq;
        }
        packets.push_back(p);
    }
    return packets;
}

std::vector<Packet> read_trace_csv(const std::filesystem::path& path) {
    return parse_trace_csv(read_text(path));
}

std::string format_trace_csv(const std::vector<Packet>& packets) {
    std::string out = kTraceHeader;
    out += '\n';
    out.reserve(packets.size() * 32);
    for (const auto& p : packets) {
        append_double(out, p.time);
        out += ',';
        out += std::to_string(p.size);
        out += ',';
        out += to_string(p.dir);
        out += ',';
        out += to_string(p.kind);
        out += p.retry ? ",1," : ",0,";
        if (p.seq_id) out += std::to_string(*p.seq_id);
        out += '\n';
    }
    return out;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<Packet>& packets) {
    write_text(path, format_trace_csv(packets));
}

Json labels_to_json(const std::vector<EventLabel>& labels) {
    Json arr = Json::array();
    for (const auto& l : labels) arr.push_back({{"event_id", l.event_id}, {"label", l.label}, {"t_init", l.t_init}});
    return arr;
}

std::vector<EventLabel> labels_from_json(const Json& j) {
    if (!j.is_array()) throw Error("label sidecar must be a JSON array");
    std::vector<EventLabel> out;
    for (const auto& e : j) {
        out.push_back({e.at("event_id").get<std::string>(), e.at("label").get<std::string>(),
                       e.at("t_init").get<double>()});
    }
    return out;
}

std::vector<EventLabel> read_labels_json(const std::filesystem::path& path) {
    return labels_from_json(read_json(path));
}

Json params_to_json(const MatchParams& p) {
    return {{"epsilon", p.epsilon}, {"gamma", p.gamma},     {"beta", p.beta},
            {"alpha", p.alpha},     {"seg_gap", p.seg_gap}, {"seg_min", p.seg_min}};
}

MatchParams params_from_json(const Json& j, MatchParams base) {
    if (!j.is_object()) throw Error("params must be a JSON object");
    if (j.contains("epsilon")) base.epsilon = j["epsilon"].get<int>();
    if (j.contains("gamma")) base.gamma = j["gamma"].get<double>();
    if (j.contains("beta")) base.beta = j["beta"].get<double>();
    if (j.contains("alpha")) base.alpha = j["alpha"].get<double>();
    if (j.contains("seg_gap")) base.seg_gap = j["seg_gap"].get<double>();
    if (j.contains("seg_min")) base.seg_min = j["seg_min"].get<int>();
    base.validate();
    return base;
}

Json fingerprint_to_json(const Fingerprint& fp) {
    Json packets = Json::array();
    for (const auto& p : fp.packets)
        packets.push_back({{"dt", p.dt}, {"size", p.size}, {"dir", std::string(to_string(p.dir))}});
    Json segments = Json::array();
    for (const auto& s : fp.segments) segments.push_back(Json::array({s.begin, s.end}));
    return {{"label", fp.label}, {"packets", packets}, {"segments", segments}, {"params", params_to_json(fp.params)}};
}

Fingerprint fingerprint_from_json(const Json& j) {
    Fingerprint fp;
    fp.label = j.at("label").get<std::string>();
    for (const auto& p : j.at("packets"))
        fp.packets.push_back({p.at("dt").get<double>(), p.at("size").get<int>(), direction_field(p.at("dir"))});
    if (j.contains("segments"))
        for (const auto& s : j["segments"]) fp.segments.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    if (j.contains("params")) fp.params = params_from_json(j["params"]);
    fp.validate();
    return fp;
}

Fingerprint read_fingerprint(const std::filesystem::path& path) {
    return fingerprint_from_json(read_json(path));
}

Json match_result_to_json(const MatchResult& r) {
    Json pairs = Json::array();
    for (const auto& p : r.pairs) pairs.push_back(Json::array({p.fp, p.target}));
    return {{"pairs", pairs}, {"distance", number_or_null(r.distance)}, {"success", r.success}};
}

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::string dump_json(const Json& j) {
    return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace pktmatch
