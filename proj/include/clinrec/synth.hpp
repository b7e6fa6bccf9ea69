#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "clinrec/data.hpp"
#include "clinrec/matrix.hpp"
#include "json.hpp"

namespace clinrec::synth {

/// Generative parameters. Sampled from the config seed unless supplied.
struct ParameterTables {
  Matrix lab_abnormal_prob;           // diagnoses x labs: P(abnormal | diagnosis)
  std::vector<double> lab_base_abnormal_prob;  // labs
  std::vector<double> lab_observed_prob;       // labs
  std::vector<double> lab_low_prob;            // labs: P(low | abnormal)
  Matrix diagnosis_effect;            // diagnoses x procedures (logit)
  Matrix lab_effect;                  // labs x procedures (logit, when abnormal)
  Matrix specialist_effect;           // specialists x procedures (logit)
  Matrix pcp_noise_prob;              // diagnoses x procedures

  bool operator==(const ParameterTables&) const = default;
};

struct GeneratorConfig {
  std::size_t num_patients = 6511;
  std::uint64_t seed = 0;
  double signal_strength = 1.0;
  std::size_t num_specialists = 10;
  double label_bias = -3.0;
  double pcp_echo_prob = 0.7;
  double pcp_base_noise_prob = 0.02;
  std::optional<ParameterTables> tables;

  void validate() const;
};

/// Returns `config` with its tables populated (sampled from the seed if absent).
GeneratorConfig resolved(GeneratorConfig config);

Vocabularies make_vocabularies(const GeneratorConfig& config);

std::string specialist_name(std::size_t index);

/// Samples a cohort. Byte-for-byte deterministic in the config.
Cohort generate(const GeneratorConfig& config);

/// P(specialty order | labs, diagnoses, specialist): the probability each
/// label bit was drawn with.
std::vector<double> label_probabilities(const GeneratorConfig& config,
                                        const PatientRecord& patient);

/// Exact posterior P(specialty order | every observed feature), including the
/// PCP orders. No predictor of the labels can rank better in expectation.
std::vector<double> bayes_scores(const GeneratorConfig& config, const PatientRecord& patient);

/// Indices of the `n` procedures with the largest diagnosis effect, per diagnosis.
std::vector<std::vector<std::size_t>> top_procedures_per_diagnosis(
    const GeneratorConfig& config, std::size_t n);

nlohmann::json to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const nlohmann::json& doc);

/// Default config document with "_comment" fields describing each knob.
nlohmann::json commented_default_config();

}  // namespace clinrec::synth
