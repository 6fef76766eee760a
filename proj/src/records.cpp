#include "pktmatch/records.hpp"

#include <sstream>

namespace pktmatch {

namespace {

Json optional_number(const std::optional<double>& v) {
    return v ? number_or_null(*v) : Json(nullptr);
}

Direction direction_of(const Json& j) {
    const auto d = parse_direction(j.get<std::string>());
    if (!d) throw Error("invalid direction '" + j.get<std::string>() + "'");
    return *d;
}

Json label_score_to_json(const LabelScore& s) {
    return {{"tp", s.tp},
            {"fp", s.fp},
            {"fn", s.fn},
            {"precision", optional_number(s.precision)},
            {"recall", optional_number(s.recall)},
            {"f1", optional_number(s.f1)}};
}

Json coarse_to_json(const std::vector<CoarsePacket>& cf) {
    Json arr = Json::array();
    for (const auto& c : cf)
        arr.push_back({{"dt", c.dt}, {"size", c.size}, {"dir", std::string(to_string(c.dir))}, {"support", c.support}});
    return arr;
}

}  // namespace

Json template_to_json(const EventTemplate& t) {
    Json packets = Json::array();
    for (const auto& p : t.packets)
        packets.push_back({{"dt", p.dt}, {"size", p.size}, {"dir", std::string(to_string(p.dir))}});
    return {{"label", t.label}, {"packets", packets}};
}

EventTemplate template_from_json(const Json& j) {
    EventTemplate t;
    t.label = j.at("label").get<std::string>();
    for (const auto& p : j.at("packets"))
        t.packets.push_back({p.at("dt").get<double>(), p.at("size").get<int>(), direction_of(p.at("dir"))});
    return t;
}

Json defense_to_json(const DefenseConfig& d) {
    return {{"kind", std::string(to_string(d.kind))},
            {"delay_max", d.delay_max},
            {"shape_rate", d.shape_rate},
            {"pad_max", d.pad_max},
            {"burst_gap", d.burst_gap}};
}

DefenseConfig defense_from_json(const Json& j, DefenseConfig base) {
    if (j.contains("kind")) {
        const auto k = parse_defense_kind(j["kind"].get<std::string>());
        if (!k) throw Error("unknown defense kind '" + j["kind"].get<std::string>() + "'");
        base.kind = *k;
    }
    if (j.contains("delay_max")) base.delay_max = j["delay_max"].get<double>();
    if (j.contains("shape_rate")) base.shape_rate = j["shape_rate"].get<double>();
    if (j.contains("pad_max")) base.pad_max = j["pad_max"].get<int>();
    if (j.contains("burst_gap")) base.burst_gap = j["burst_gap"].get<double>();
    return base;
}

Json scenario_to_json(const ScenarioConfig& c) {
    Json templates = Json::array();
    for (const auto& t : c.templates) templates.push_back(template_to_json(t));
    Json noise = Json::array();
    for (const auto& n : c.noise_classes)
        noise.push_back({{"size", n.size}, {"dir", std::string(to_string(n.dir))}, {"weight", n.weight}});
    Json j = {{"templates", templates},
              {"n_events_per_label", c.n_events_per_label},
              {"gap", Json::array({c.gap_min, c.gap_max})},
              {"loss_rate", c.loss_rate},
              {"jitter", c.jitter},
              {"noise_rate", c.noise_rate},
              {"noise_classes", noise},
              {"noise_run", c.noise_run},
              {"onset", c.onset},
              {"lead", c.lead},
              {"tail", c.tail},
              {"mgmt_rate", c.mgmt_rate},
              {"retry_rate", c.retry_rate},
              {"seed", c.seed}};
    j["defense"] = c.defense ? defense_to_json(*c.defense) : Json(nullptr);
    return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
    if (!j.is_object()) throw Error("scenario config must be a JSON object");
    ScenarioConfig c;
    if (j.contains("templates")) {
        std::vector<EventTemplate> reference;
        for (const auto& t : j["templates"]) {
            if (t.is_string()) {
                if (reference.empty()) reference = reference_templates();
                c.templates.push_back(find_template(reference, t.get<std::string>()));
            } else {
                c.templates.push_back(template_from_json(t));
            }
        }
    }
    if (j.contains("n_events_per_label")) c.n_events_per_label = j["n_events_per_label"].get<int>();
    if (j.contains("gap")) {
        c.gap_min = j["gap"].at(0).get<double>();
        c.gap_max = j["gap"].at(1).get<double>();
    }
    if (j.contains("loss_rate")) c.loss_rate = j["loss_rate"].get<double>();
    if (j.contains("jitter")) c.jitter = j["jitter"].get<double>();
    if (j.contains("noise_rate")) c.noise_rate = j["noise_rate"].get<double>();
    if (j.contains("noise_classes")) {
        c.noise_classes.clear();
        for (const auto& n : j["noise_classes"])
            c.noise_classes.push_back({n.at("size").get<int>(), direction_of(n.at("dir")), n.value("weight", 1.0)});
    }
    if (j.contains("noise_run")) c.noise_run = j["noise_run"].get<int>();
    if (j.contains("onset")) c.onset = j["onset"].get<double>();
    if (j.contains("lead")) c.lead = j["lead"].get<double>();
    if (j.contains("tail")) c.tail = j["tail"].get<double>();
    if (j.contains("mgmt_rate")) c.mgmt_rate = j["mgmt_rate"].get<double>();
    if (j.contains("retry_rate")) c.retry_rate = j["retry_rate"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("defense") && !j["defense"].is_null()) c.defense = defense_from_json(j["defense"]);
    c.validate();
    return c;
}

Json overhead_to_json(const OverheadReport& r) {
    return {{"added_seconds_per_event", optional_number(r.added_seconds_per_event)},
            {"bandwidth_multiplier", optional_number(r.bandwidth_multiplier)}};
}

Json detection_to_json(const Detection& d) {
    return {{"label", d.label},
            {"window_start", d.window_start},
            {"window_end", d.window_end},
            {"matched_count", d.matched_count},
            {"distance", d.distance}};
}

Detection detection_from_json(const Json& j) {
    return {j.at("label").get<std::string>(), j.at("window_start").get<double>(), j.at("window_end").get<double>(),
            j.at("matched_count").get<std::size_t>(), j.at("distance").get<double>()};
}

std::string format_detections(const std::vector<Detection>& detections) {
    std::string out;
    for (const auto& d : detections) out += detection_to_json(d).dump() + "\n";
    return out;
}

std::vector<Detection> parse_detections(const std::string& text) {
    std::vector<Detection> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(detection_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

Json score_to_json(const ScoreReport& r) {
    Json per_label = Json::object();
    for (const auto& [label, s] : r.per_label) per_label[label] = label_score_to_json(s);
    return {{"per_label", per_label},
            {"overall", label_score_to_json(r.overall)},
            {"macro",
             {{"precision", optional_number(r.macro_precision)},
              {"recall", optional_number(r.macro_recall)},
              {"f1", optional_number(r.macro_f1)}}}};
}

Json ingest_report_to_json(const IngestReport& r) {
    Json removed = Json::array();
    for (const auto& c : r.frequency.removed)
        removed.push_back({{"size", c.size}, {"dir", std::string(to_string(c.dir))}, {"count", c.count}});
    return {{"input_packets", r.input_packets},
            {"data_packets", r.data_packets},
            {"after_dedup", r.after_dedup},
            {"frequency_filter_applied", r.frequency_filter_applied},
            {"frequency_rounds", r.frequency.rounds},
            {"removed_classes", removed},
            {"output_packets", r.output_packets}};
}

Json extraction_report_to_json(const ExtractionReport& r) {
    std::map<std::size_t, std::size_t> histogram;
    for (const auto& c : r.coarse) ++histogram[c.support];
    Json hist = Json::array();
    for (const auto& [support, count] : histogram) hist.push_back(Json::array({support, count}));
    Json passes = Json::array();
    for (const auto& p : r.passes) {
        Json discarded = Json::array();
        for (std::size_t k : p.discarded)
            discarded.push_back({{"dt", p.packets[k].dt},
                                 {"size", p.packets[k].size},
                                 {"dir", std::string(to_string(p.packets[k].dir))},
                                 {"forward", p.forward[k]},
                                 {"backward", p.backward[k]}});
        passes.push_back({{"packets", p.packets.size()}, {"discarded", discarded}});
    }
    return {{"groups", r.groups},
            {"pairs", r.consensus.pairs},
            {"pairs_skipped_blowup", r.consensus.skipped_blowup},
            {"coarse_packets", r.coarse.size()},
            {"support_histogram", hist},
            {"min_support", r.min_support},
            {"pruned_low_support", r.pruned_low_support},
            {"coarse", coarse_to_json(r.coarse)},
            {"passes", passes}};
}

}  // namespace pktmatch
