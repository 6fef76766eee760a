#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pktmatch/core.hpp"

namespace pktmatch {

using Json = nlohmann::json;

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

inline constexpr const char* kTraceHeader = "t,size,dir,kind,retry,seq_id";

/// Parses the trace CSV format. Records are returned in file order.
std::vector<Packet> parse_trace_csv(const std::string& text);
std::vector<Packet> read_trace_csv(const std::filesystem::path& path);

/// Times are written in shortest round-trip form, so parse(format(x)) == x.
std::string format_trace_csv(const std::vector<Packet>& packets);
void write_trace_csv(const std::filesystem::path& path, const std::vector<Packet>& packets);

Json labels_to_json(const std::vector<EventLabel>& labels);
std::vector<EventLabel> labels_from_json(const Json& j);
std::vector<EventLabel> read_labels_json(const std::filesystem::path& path);

Json params_to_json(const MatchParams& params);
/// Fields absent from `j` keep their value in `base`.
MatchParams params_from_json(const Json& j, MatchParams base = {});

Json fingerprint_to_json(const Fingerprint& fp);
Fingerprint fingerprint_from_json(const Json& j);
Fingerprint read_fingerprint(const std::filesystem::path& path);

Json match_result_to_json(const MatchResult& r);

Json read_json(const std::filesystem::path& path);
/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// JSON number, or null for NaN / infinity.
Json number_or_null(double v);

}  // namespace pktmatch
