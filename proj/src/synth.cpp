#include "clinrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "clinrec/error.hpp"
#include "clinrec/rng.hpp"

namespace clinrec::synth {
namespace {

constexpr std::size_t kRelevantProceduresPerDiagnosis = 6;
constexpr std::size_t kAffectedLabsPerDiagnosis = 8;
constexpr std::size_t kNoisyProceduresPerDiagnosis = 3;
constexpr double kLabEffectFraction = 0.2;

const char* const kDiagnosisNames[kNumDiagnoses] = {
    "diabetes_type_1", "diabetes_type_2", "hypercalcemia",  "hyperlipidemia",
    "hypothyroidism",  "hyperthyroidism", "osteopenia",     "thyroid_cancer",
    "thyroid_nodule",  "obesity"};

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

ParameterTables sample_tables(const GeneratorConfig& c) {
  Rng rng(derive_seed(c.seed, "generator/tables"));
  ParameterTables t;
  t.lab_abnormal_prob = Matrix(kNumDiagnoses, kNumLabs);
  t.lab_base_abnormal_prob.assign(kNumLabs, 0.0);
  t.lab_observed_prob.assign(kNumLabs, 0.0);
  t.lab_low_prob.assign(kNumLabs, 0.0);
  t.diagnosis_effect = Matrix(kNumDiagnoses, kNumProcedures);
  t.lab_effect = Matrix(kNumLabs, kNumProcedures);
  t.specialist_effect = Matrix(c.num_specialists, kNumProcedures);
  t.pcp_noise_prob = Matrix(kNumDiagnoses, kNumProcedures);

  for (std::size_t lab = 0; lab < kNumLabs; ++lab) {
    t.lab_base_abnormal_prob[lab] = rng.uniform(0.03, 0.12);
    t.lab_observed_prob[lab] = rng.uniform(0.3, 0.9);
    t.lab_low_prob[lab] = rng.uniform(0.1, 0.9);
  }
  for (std::size_t d = 0; d < kNumDiagnoses; ++d) {
    for (std::size_t lab : sample_distinct(rng, kNumLabs, kAffectedLabsPerDiagnosis))
      t.lab_abnormal_prob(d, lab) = rng.uniform(0.5, 0.9);
    for (std::size_t j = 0; j < kNumProcedures; ++j)
      t.diagnosis_effect(d, j) = rng.normal(0.0, 0.25);
    for (std::size_t j : sample_distinct(rng, kNumProcedures, kRelevantProceduresPerDiagnosis))
      t.diagnosis_effect(d, j) = rng.uniform(2.0, 3.5);
    for (std::size_t j : sample_distinct(rng, kNumProcedures, kNoisyProceduresPerDiagnosis))
      t.pcp_noise_prob(d, j) = rng.uniform(0.1, 0.3);
  }
  for (std::size_t lab = 0; lab < kNumLabs; ++lab) {
    if (!rng.bernoulli(kLabEffectFraction)) continue;
    for (std::size_t j : sample_distinct(rng, kNumProcedures, 2))
      t.lab_effect(lab, j) = rng.uniform(1.0, 2.0);
  }
  for (double& v : t.specialist_effect.values()) v = rng.normal(0.0, 0.7);
  return t;
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw UsageError(std::string("generator config: ") + what + " must lie in [0, 1]");
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw UsageError(std::string("generator tables: ") + what + " has the wrong shape");
}

const ParameterTables& tables_of(const GeneratorConfig& config, std::optional<GeneratorConfig>& holder) {
  if (config.tables) return *config.tables;
  holder = resolved(config);
  return *holder->tables;
}

std::size_t specialist_index(const GeneratorConfig& config, const std::string& id) {
  unsigned idx = 0;
  char tail = 0;
  if (std::sscanf(id.c_str(), "SPEC-%u%c", &idx, &tail) != 1 || idx >= config.num_specialists)
    throw UsageError("bayes_scores: specialist '" + id + "' was not produced by this config");
  return idx;
}

std::vector<double> noise_probabilities(const GeneratorConfig& c, const ParameterTables& t,
                                        const BitVector& diagnoses) {
  std::vector<double> keep(kNumProcedures, 1.0 - c.pcp_base_noise_prob);
  for (std::size_t d = 0; d < kNumDiagnoses; ++d)
    if (diagnoses[d])
      for (std::size_t j = 0; j < kNumProcedures; ++j) keep[j] *= 1.0 - t.pcp_noise_prob(d, j);
  for (double& k : keep) k = 1.0 - k;
  return keep;
}

std::vector<double> label_probs(const GeneratorConfig& c, const ParameterTables& t,
                                const BitVector& diagnoses, const BitVector& lab_features,
                                std::size_t specialist) {
  std::vector<double> logit(kNumProcedures, 0.0);
  for (std::size_t d = 0; d < kNumDiagnoses; ++d)
    if (diagnoses[d])
      for (std::size_t j = 0; j < kNumProcedures; ++j) logit[j] += t.diagnosis_effect(d, j);
  for (std::size_t lab = 0; lab < kNumLabs; ++lab)
    if (lab_features[3 * lab + 1] || lab_features[3 * lab + 2])
      for (std::size_t j = 0; j < kNumProcedures; ++j) logit[j] += t.lab_effect(lab, j);
  for (std::size_t j = 0; j < kNumProcedures; ++j) logit[j] += t.specialist_effect(specialist, j);

  std::vector<double> p(kNumProcedures);
  for (std::size_t j = 0; j < kNumProcedures; ++j)
    p[j] = sigmoid(c.label_bias + c.signal_strength * logit[j]);
  return p;
}

void check_patient(const PatientRecord& patient) {
  try {
    patient.validate();
  } catch (const UsageError& e) {
    throw UsageError(std::string("bayes_scores: ") + e.what());
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (num_patients < 1) throw UsageError("generator config: num_patients must be >= 1");
  if (num_specialists < 1) throw UsageError("generator config: num_specialists must be >= 1");
  check_prob(signal_strength, "signal_strength");
  check_prob(pcp_echo_prob, "pcp_echo_prob");
  check_prob(pcp_base_noise_prob, "pcp_base_noise_prob");
  if (!std::isfinite(label_bias)) throw UsageError("generator config: label_bias must be finite");
  if (!tables) return;
  const auto& t = *tables;
  check_shape(t.lab_abnormal_prob, kNumDiagnoses, kNumLabs, "lab_abnormal_prob");
  check_shape(t.diagnosis_effect, kNumDiagnoses, kNumProcedures, "diagnosis_effect");
  check_shape(t.lab_effect, kNumLabs, kNumProcedures, "lab_effect");
  check_shape(t.specialist_effect, num_specialists, kNumProcedures, "specialist_effect");
  check_shape(t.pcp_noise_prob, kNumDiagnoses, kNumProcedures, "pcp_noise_prob");
  if (t.lab_base_abnormal_prob.size() != kNumLabs || t.lab_observed_prob.size() != kNumLabs ||
      t.lab_low_prob.size() != kNumLabs)
    throw UsageError("generator tables: per-lab vectors need 100 entries");
  for (const auto* m : {&t.lab_abnormal_prob, &t.pcp_noise_prob})
    for (double p : m->values()) check_prob(p, "table probability");
  for (const auto* v : {&t.lab_base_abnormal_prob, &t.lab_observed_prob, &t.lab_low_prob})
    for (double p : *v) check_prob(p, "table probability");
  for (const auto* m : {&t.diagnosis_effect, &t.lab_effect, &t.specialist_effect})
    for (double x : m->values())
      if (!std::isfinite(x)) throw UsageError("generator tables: effects must be finite");
}

GeneratorConfig resolved(GeneratorConfig config) {
  config.validate();
  if (!config.tables) config.tables = sample_tables(config);
  return config;
}

Vocabularies make_vocabularies(const GeneratorConfig& config) {
  Rng rng(derive_seed(config.seed, "generator/vocab"));
  Vocabularies v;
  char buf[32];
  for (std::size_t i = 0; i < kNumLabs; ++i) {
    std::snprintf(buf, sizeof buf, "LAB%03zu", i);
    v.lab_ids.emplace_back(buf);
    const double low = rng.uniform(1.0, 100.0);
    v.lab_normal_ranges.push_back({low, low * rng.uniform(1.3, 3.0)});
  }
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    std::snprintf(buf, sizeof buf, "PROC%02zu", j);
    v.procedure_ids.emplace_back(buf);
  }
  for (const char* name : kDiagnosisNames) v.diagnosis_ids.emplace_back(name);
  return v;
}

std::string specialist_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "SPEC-%03zu", index);
  return buf;
}

Cohort generate(const GeneratorConfig& config) {
  const GeneratorConfig c = resolved(config);
  const ParameterTables& t = *c.tables;
  Cohort cohort{make_vocabularies(c), {}};
  cohort.patients.reserve(c.num_patients);
  Rng rng(derive_seed(c.seed, "generator/patients"));
  const double echo = c.signal_strength * c.pcp_echo_prob;

  char id[32];
  for (std::size_t i = 0; i < c.num_patients; ++i) {
    PatientRecord p;
    std::snprintf(id, sizeof id, "P%06zu", i);
    p.patient_id = id;

    p.diagnosis_bits.assign(kNumDiagnoses, 0);
    const auto k = 1 + static_cast<std::size_t>(rng.below(3));
    for (std::size_t d : sample_distinct(rng, kNumDiagnoses, k)) p.diagnosis_bits[d] = 1;

    std::vector<RawLabResult> labs;
    for (std::size_t lab = 0; lab < kNumLabs; ++lab) {
      const bool observed = rng.bernoulli(t.lab_observed_prob[lab]);
      double normal_prob = 1.0 - t.lab_base_abnormal_prob[lab];
      for (std::size_t d = 0; d < kNumDiagnoses; ++d)
        if (p.diagnosis_bits[d]) normal_prob *= 1.0 - t.lab_abnormal_prob(d, lab);
      const bool abnormal = rng.bernoulli(1.0 - normal_prob);
      const bool low = rng.bernoulli(t.lab_low_prob[lab]);
      const auto range = cohort.vocab.lab_normal_ranges[lab];
      const double width = range.high - range.low;
      const double offset = rng.uniform(0.05, 0.5) * width;
      const double inside = rng.uniform(range.low, range.high);
      if (!observed) continue;
      double value = inside;
      if (abnormal) value = low ? range.low - offset : range.high + offset;
      labs.push_back({cohort.vocab.lab_ids[lab], value});
    }
    p.lab_features = encode_labs(labs, cohort.vocab);

    const auto specialist = static_cast<std::size_t>(rng.below(c.num_specialists));
    p.specialist_id = specialist_name(specialist);

    const auto probs = label_probs(c, t, p.diagnosis_bits, p.lab_features, specialist);
    const auto noise = noise_probabilities(c, t, p.diagnosis_bits);
    p.specialty_procedure_bits.assign(kNumProcedures, 0);
    p.pcp_procedure_bits.assign(kNumProcedures, 0);
    for (std::size_t j = 0; j < kNumProcedures; ++j) {
      const bool ordered = rng.bernoulli(probs[j]);
      const bool echoed = rng.bernoulli(echo);
      const bool noisy = rng.bernoulli(noise[j]);
      p.specialty_procedure_bits[j] = ordered;
      p.pcp_procedure_bits[j] = (ordered && echoed) || noisy;
    }
    cohort.patients.push_back(std::move(p));
  }
  return cohort;
}

std::vector<double> label_probabilities(const GeneratorConfig& config,
                                        const PatientRecord& patient) {
  check_patient(patient);
  std::optional<GeneratorConfig> holder;
  const auto& t = tables_of(config, holder);
  return label_probs(config, t, patient.diagnosis_bits, patient.lab_features,
                     specialist_index(config, patient.specialist_id));
}

std::vector<double> bayes_scores(const GeneratorConfig& config, const PatientRecord& patient) {
  check_patient(patient);
  std::optional<GeneratorConfig> holder;
  const auto& t = tables_of(config, holder);
  const auto prior = label_probs(config, t, patient.diagnosis_bits, patient.lab_features,
                                 specialist_index(config, patient.specialist_id));
  const auto noise = noise_probabilities(config, t, patient.diagnosis_bits);
  const double echo = config.signal_strength * config.pcp_echo_prob;

  // PCP bit j depends on the labels only through label j, so the posterior
  // factorizes per procedure.
  std::vector<double> post(kNumProcedures);
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    const double p = prior[j];
    const double n = noise[j];
    const double like_pos = patient.pcp_procedure_bits[j] ? echo + (1.0 - echo) * n
                                                           : (1.0 - echo) * (1.0 - n);
    const double like_neg = patient.pcp_procedure_bits[j] ? n : 1.0 - n;
    const double denom = p * like_pos + (1.0 - p) * like_neg;
    post[j] = denom > 0.0 ? p * like_pos / denom : p;
  }
  return post;
}

std::vector<std::vector<std::size_t>> top_procedures_per_diagnosis(
    const GeneratorConfig& config, std::size_t n) {
  std::optional<GeneratorConfig> holder;
  const auto& t = tables_of(config, holder);
  n = std::min(n, kNumProcedures);
  std::vector<std::vector<std::size_t>> out(kNumDiagnoses);
  for (std::size_t d = 0; d < kNumDiagnoses; ++d) {
    std::vector<std::size_t> idx(kNumProcedures);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return t.diagnosis_effect(d, a) > t.diagnosis_effect(d, b);
    });
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    out[d] = std::move(idx);
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r)
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from(const nlohmann::json& rows) {
  const auto v = rows.get<std::vector<std::vector<double>>>();
  Matrix m(v.size(), v.empty() ? 0 : v.front().size());
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (v[r].size() != m.cols()) throw LoadError("generator tables: ragged matrix");
    std::ranges::copy(v[r], m.row(r).begin());
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const GeneratorConfig& c) {
  nlohmann::json doc = {{"num_patients", c.num_patients},
                        {"seed", c.seed},
                        {"signal_strength", c.signal_strength},
                        {"num_specialists", c.num_specialists},
                        {"label_bias", c.label_bias},
                        {"pcp_echo_prob", c.pcp_echo_prob},
                        {"pcp_base_noise_prob", c.pcp_base_noise_prob}};
  if (c.tables) {
    const auto& t = *c.tables;
    doc["tables"] = {{"lab_abnormal_prob", matrix_json(t.lab_abnormal_prob)},
                     {"lab_base_abnormal_prob", t.lab_base_abnormal_prob},
                     {"lab_observed_prob", t.lab_observed_prob},
                     {"lab_low_prob", t.lab_low_prob},
                     {"diagnosis_effect", matrix_json(t.diagnosis_effect)},
                     {"lab_effect", matrix_json(t.lab_effect)},
                     {"specialist_effect", matrix_json(t.specialist_effect)},
                     {"pcp_noise_prob", matrix_json(t.pcp_noise_prob)}};
  }
  return doc;
}

GeneratorConfig generator_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw LoadError("generator config: expected a JSON object");
  GeneratorConfig c;
  try {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const std::string& key = it.key();
      if (key.starts_with("_")) continue;
      if (key == "num_patients") c.num_patients = it->get<std::size_t>();
      else if (key == "seed") c.seed = it->get<std::uint64_t>();
      else if (key == "signal_strength") c.signal_strength = it->get<double>();
      else if (key == "num_specialists") c.num_specialists = it->get<std::size_t>();
      else if (key == "label_bias") c.label_bias = it->get<double>();
      else if (key == "pcp_echo_prob") c.pcp_echo_prob = it->get<double>();
      else if (key == "pcp_base_noise_prob") c.pcp_base_noise_prob = it->get<double>();
      else if (key == "tables") {
        ParameterTables t;
        const auto& td = *it;
        t.lab_abnormal_prob = matrix_from(td.at("lab_abnormal_prob"));
        t.lab_base_abnormal_prob = td.at("lab_base_abnormal_prob").get<std::vector<double>>();
        t.lab_observed_prob = td.at("lab_observed_prob").get<std::vector<double>>();
        t.lab_low_prob = td.at("lab_low_prob").get<std::vector<double>>();
        t.diagnosis_effect = matrix_from(td.at("diagnosis_effect"));
        t.lab_effect = matrix_from(td.at("lab_effect"));
        t.specialist_effect = matrix_from(td.at("specialist_effect"));
        t.pcp_noise_prob = matrix_from(td.at("pcp_noise_prob"));
        c.tables = std::move(t);
      } else {
        throw LoadError("generator config: unknown field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("generator config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw LoadError(e.what());
  }
  return c;
}

nlohmann::json commented_default_config() {
  nlohmann::json doc = to_json(GeneratorConfig{});
  doc["_comment"] =
      "Synthetic cohort generator. Fields starting with '_' are ignored. "
      "Omit 'tables' to sample the parameter tables from 'seed'.";
  doc["_num_patients"] = "patients to generate";
  doc["_signal_strength"] = "0 = labels independent of all features, 1 = full signal";
  doc["_num_specialists"] = "distinct specialists, sampled uniformly per patient";
  doc["_label_bias"] = "shared base logit of every specialty order";
  doc["_pcp_echo_prob"] = "chance a true specialty order is already placed by the PCP "
                          "(scaled by signal_strength)";
  doc["_pcp_base_noise_prob"] = "chance of an unrelated PCP order, per procedure";
  return doc;
}

}  // namespace clinrec::synth
