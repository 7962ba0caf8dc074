#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"

namespace hithar::datapipe {

enum class Verdict { Gold, Corrected, Skipped, Deleted };

inline constexpr std::array<std::string_view, 4> kVerdictNames = {"Gold", "Corrected", "Skipped", "Deleted"};

inline std::string_view to_string(Verdict v) { return kVerdictNames[static_cast<std::size_t>(v)]; }

inline std::optional<Verdict> parse_verdict(std::string_view s) {
  const std::string key = hithar::detail::squash(s);
  for (std::size_t i = 0; i < kVerdictNames.size(); ++i)
    if (hithar::detail::squash(kVerdictNames[i]) == key) return static_cast<Verdict>(i);
  return std::nullopt;
}

enum class Provenance { Unlabeled, Gold, Propagated };

/// One narration. Records without a verdict are the unverified pool that
/// propagation draws from.
struct AnnotationRecord {
  std::string id;
  std::string video_id;
  double timestamp_s = 0.0;
  std::string narration;
  Scenario scenario = Scenario::Cooking;
  Action llm_label = Action::Stationary;
  std::optional<Verdict> verdict;
  std::optional<Action> corrected_label;
  bool has_secondary_choice = false;
  bool ambiguous_verb = false;
  int tier = 0;  // 0 = not yet assigned
  double weight = 0.0;
  Provenance provenance = Provenance::Unlabeled;
  std::string source_id;  // gold record a propagated label came from

  /// Human-corrected label when present, otherwise the LLM label.
  Action label() const { return corrected_label.value_or(llm_label); }
  bool is_gold() const { return verdict.has_value(); }
};

inline json to_json(const AnnotationRecord& r) {
  json j{{"id", r.id},
         {"video_id", r.video_id},
         {"timestamp_s", r.timestamp_s},
         {"narration", r.narration},
         {"scenario", std::string(to_string(r.scenario))},
         {"llm_label", std::string(to_string(r.llm_label))},
         {"has_secondary_choice", r.has_secondary_choice},
         {"ambiguous_verb", r.ambiguous_verb}};
  j["verdict"] = r.verdict ? json(std::string(to_string(*r.verdict))) : json(nullptr);
  j["corrected_label"] = r.corrected_label ? json(std::string(to_string(*r.corrected_label))) : json(nullptr);
  if (r.tier > 0) {
    j["tier"] = r.tier;
    j["weight"] = r.weight;
  }
  if (r.provenance != Provenance::Unlabeled) {
    j["provenance"] = r.provenance == Provenance::Gold ? "gold" : "propagated";
    j["label"] = std::string(to_string(r.label()));
  }
  if (!r.source_id.empty()) j["source_id"] = r.source_id;
  return j;
}

inline AnnotationRecord annotation_from_json(const json& j) {
  AnnotationRecord r;
  StrictReader rd(j, "annotation");
  std::string scenario, llm, verdict, corrected, provenance, label;
  rd.get("id", r.id)
      .get("video_id", r.video_id)
      .get("timestamp_s", r.timestamp_s)
      .get("narration", r.narration)
      .get("scenario", scenario)
      .get("llm_label", llm)
      .get("has_secondary_choice", r.has_secondary_choice)
      .get("ambiguous_verb", r.ambiguous_verb)
      .get("tier", r.tier)
      .get("weight", r.weight)
      .get("provenance", provenance)
      .get("label", label)
      .get("source_id", r.source_id);
  if (const json* v = rd.sub("verdict"); v && !v->is_null()) verdict = v->get<std::string>();
  if (const json* c = rd.sub("corrected_label"); c && !c->is_null()) corrected = c->get<std::string>();
  rd.finish();
  if (r.video_id.empty()) throw InputError("annotation " + r.id + ": missing video_id");
  auto sc = parse_scenario(scenario);
  if (!sc) throw InputError("annotation " + r.id + ": unknown scenario '" + scenario + "'");
  r.scenario = *sc;
  auto lab = parse_action(llm);
  if (!lab) throw InputError("annotation " + r.id + ": unknown llm_label '" + llm + "'");
  r.llm_label = *lab;
  if (!verdict.empty()) {
    r.verdict = parse_verdict(verdict);
    if (!r.verdict) throw InputError("annotation " + r.id + ": unknown verdict '" + verdict + "'");
  }
  if (!corrected.empty()) {
    r.corrected_label = parse_action(corrected);
    if (!r.corrected_label) throw InputError("annotation " + r.id + ": unknown corrected_label '" + corrected + "'");
  }
  if (provenance == "gold") r.provenance = Provenance::Gold;
  else if (provenance == "propagated") r.provenance = Provenance::Propagated;
  else if (!provenance.empty()) throw InputError("annotation " + r.id + ": unknown provenance '" + provenance + "'");
  if (!label.empty() && r.provenance == Provenance::Propagated) {
    // A propagated record's label is carried in corrected_label so label() reports it.
    auto pl = parse_action(label);
    if (!pl) throw InputError("annotation " + r.id + ": unknown label '" + label + "'");
    r.corrected_label = *pl;
  }
  return r;
}

inline std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError("annotations line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << "\n";
}

}  // namespace hithar::datapipe
