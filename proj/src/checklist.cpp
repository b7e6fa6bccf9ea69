#include <algorithm>

#include "clinrec/baselines.hpp"
#include "clinrec/error.hpp"

namespace clinrec::baselines {

Checklist Checklist::from_mapping(std::map<std::string, std::vector<std::string>> mapping,
                                  const Vocabularies& vocab) {
  Checklist c;
  c.by_diagnosis_.resize(vocab.diagnosis_ids.size());
  for (const auto& [diagnosis, procedures] : mapping) {
    const auto d = vocab.diagnosis_index(diagnosis);
    if (!d) throw LoadError("checklist: unknown diagnosis id '" + diagnosis + "'");
    auto& set = c.by_diagnosis_[*d];
    for (const auto& proc : procedures) {
      const auto j = vocab.procedure_index(proc);
      if (!j)
        throw LoadError("checklist: unknown procedure id '" + proc + "' under '" + diagnosis + "'");
      set.push_back(*j);
    }
    std::ranges::sort(set);
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  c.mapping_ = std::move(mapping);
  return c;
}

Checklist checklist_from_json(const nlohmann::json& doc, const Vocabularies& vocab) {
  if (!doc.is_object()) throw LoadError("checklist: expected a JSON object");
  std::map<std::string, std::vector<std::string>> mapping;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it->is_array())
      throw LoadError("checklist: entry '" + it.key() + "' must be an array of procedure ids");
    try {
      mapping[it.key()] = it->get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw LoadError("checklist: entry '" + it.key() + "' must contain strings");
    }
  }
  return Checklist::from_mapping(std::move(mapping), vocab);
}

nlohmann::json to_json(const Checklist& checklist) { return checklist.mapping(); }

std::vector<double> checklist_predict(std::span<const std::uint8_t> diagnosis_bits,
                                      const Checklist& checklist) {
  if (diagnosis_bits.size() != kNumDiagnoses)
    throw ShapeError("checklist_predict: expected 10 diagnosis bits");
  std::vector<double> scores(kNumProcedures, 0.0);
  for (std::size_t d = 0; d < diagnosis_bits.size(); ++d)
    if (diagnosis_bits[d])
      for (std::size_t j : checklist.procedures_for(d)) scores[j] = 1.0;
  return scores;
}

}  // namespace clinrec::baselines
