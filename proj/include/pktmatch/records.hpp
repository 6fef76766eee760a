#pragma once

#include <string>
#include <vector>

#include "pktmatch/extractor.hpp"
#include "pktmatch/ingest.hpp"
#include "pktmatch/io.hpp"
#include "pktmatch/simulator.hpp"
#include "pktmatch/tracker.hpp"

// JSON forms of the pipeline's reports and configs.
namespace pktmatch {

Json template_to_json(const EventTemplate& t);
EventTemplate template_from_json(const Json& j);

Json defense_to_json(const DefenseConfig& d);
DefenseConfig defense_from_json(const Json& j, DefenseConfig base = {});

Json scenario_to_json(const ScenarioConfig& c);
/// Missing fields keep their defaults. `templates` may hold full templates or
/// reference labels such as "E5".
ScenarioConfig scenario_from_json(const Json& j);

Json overhead_to_json(const OverheadReport& r);

Json detection_to_json(const Detection& d);
Detection detection_from_json(const Json& j);
/// One JSON object per line.
std::string format_detections(const std::vector<Detection>& detections);
std::vector<Detection> parse_detections(const std::string& text);

Json score_to_json(const ScoreReport& r);

Json ingest_report_to_json(const IngestReport& r);
Json extraction_report_to_json(const ExtractionReport& r);

}  // namespace pktmatch
