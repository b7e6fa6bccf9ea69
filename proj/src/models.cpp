#include "clinrec/models.hpp"

#include <algorithm>
#include <string>

#include "clinrec/error.hpp"
#include "clinrec/nn_json.hpp"

namespace clinrec::models {
namespace {

template <class Bits>
void put(Matrix& m, std::size_t row, std::size_t offset, const Bits& bits) {
  for (std::size_t j = 0; j < bits.size(); ++j) m(row, offset + j) = static_cast<double>(bits[j]);
}

nn::TrainConfig with_stream(nn::TrainConfig config, std::string_view stream) {
  config.seed = derive_seed(config.seed, stream);
  return config;
}

template <std::size_t N>
nn::MlpModel init_net(const std::array<std::size_t, N>& dims, const nn::TrainConfig& config,
                      std::string_view stream) {
  return nn::init_model(dims, config.dropout_p, derive_seed(config.seed, stream));
}

void require_non_empty(const Cohort& train, const char* what) {
  if (train.patients.empty()) throw UsageError(std::string(what) + ": empty training cohort");
}

template <class Model, std::size_t N>
void require_dims(const Model& m, const std::array<std::size_t, N>& dims, const char* what) {
  const auto got = m.net.layer_dims();
  if (!std::equal(got.begin(), got.end(), dims.begin(), dims.end()))
    throw ShapeError(std::string(what) + ": network dims do not match the architecture");
}

}  // namespace

Matrix diagnostic_inputs(const std::vector<PatientRecord>& patients) {
  Matrix m(patients.size(), kDiagnosticInputWidth);
  for (std::size_t i = 0; i < patients.size(); ++i) {
    put(m, i, 0, patients[i].lab_features);
    put(m, i, kLabFeatureWidth, patients[i].diagnosis_bits);
  }
  return m;
}

Matrix pcp_inputs(const std::vector<PatientRecord>& patients) {
  Matrix m(patients.size(), kAutoencoderInputWidth);
  for (std::size_t i = 0; i < patients.size(); ++i) put(m, i, 0, patients[i].pcp_procedure_bits);
  return m;
}

Matrix specialty_targets(const std::vector<PatientRecord>& patients) {
  Matrix m(patients.size(), kNumProcedures);
  for (std::size_t i = 0; i < patients.size(); ++i)
    put(m, i, 0, patients[i].specialty_procedure_bits);
  return m;
}

Matrix aggregate_inputs(const std::vector<PatientRecord>& patients) {
  Matrix m(patients.size(), kAggregateInputWidth);
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const auto row = aggregate_input(patients[i]);
    std::ranges::copy(row, m.row(i).begin());
  }
  return m;
}

Matrix ensemble_inputs(const DiagnosticModel& dm, const AutoencoderModel& ae,
                       const std::vector<PatientRecord>& patients) {
  if (dm.net.output_dim() + ae.net.output_dim() + kSpecialistBuckets != kEnsembleInputWidth)
    throw ShapeError("ensemble input width " +
                     std::to_string(dm.net.output_dim() + ae.net.output_dim() + kSpecialistBuckets) +
                     " != 130");
  const Matrix dm_scores = nn::predict(dm.net, diagnostic_inputs(patients));
  const Matrix ae_scores = nn::predict(ae.net, pcp_inputs(patients));
  Matrix m(patients.size(), kEnsembleInputWidth);
  for (std::size_t i = 0; i < patients.size(); ++i) {
    put(m, i, 0, dm_scores.row(i));
    put(m, i, kNumProcedures, ae_scores.row(i));
    put(m, i, 2 * kNumProcedures, encode_specialist(patients[i].specialist_id));
  }
  return m;
}

DiagnosticModel init_diagnostic(const nn::TrainConfig& c) {
  return {init_net(kDiagnosticDims, c, "init/dm")};
}
AutoencoderModel init_autoencoder(const nn::TrainConfig& c) {
  return {init_net(kAutoencoderDims, c, "init/ae")};
}
EnsembleModel init_ensemble(const nn::TrainConfig& c) {
  return {init_net(kEnsembleDims, c, "init/ensemble")};
}
AggregateAnnModel init_aggregate(const nn::TrainConfig& c) {
  return {init_net(kAggregateDims, c, "init/ann")};
}

BaseModels train_base_models(const Cohort& train, const nn::TrainConfig& config) {
  require_non_empty(train, "train_base_models");
  const Matrix targets = specialty_targets(train.patients);
  auto dm = nn::train(init_diagnostic(config).net, diagnostic_inputs(train.patients), targets,
                      with_stream(config, "train/dm"));
  auto ae = nn::train(init_autoencoder(config).net, pcp_inputs(train.patients), targets,
                      with_stream(config, "train/ae"));
  return {{{std::move(dm.model)}, std::move(dm.loss_history)},
          {{std::move(ae.model)}, std::move(ae.loss_history)}};
}

Trained<EnsembleModel> train_ensemble(const Cohort& train, const DiagnosticModel& dm,
                                      const AutoencoderModel& ae, const nn::TrainConfig& config,
                                      bool two_fold_stacking) {
  require_non_empty(train, "train_ensemble");
  require_dims(dm, kDiagnosticDims, "train_ensemble: diagnostic model");
  require_dims(ae, kAutoencoderDims, "train_ensemble: autoencoder");

  Matrix inputs;
  std::vector<PatientRecord> ordered;
  if (!two_fold_stacking) {
    inputs = ensemble_inputs(dm, ae, train.patients);
    ordered = train.patients;
  } else {
    const CohortSplit halves =
        split_cohort(train, 0.5, derive_seed(config.seed, "stacking/folds"));
    const auto first = train_base_models(halves.train, with_stream(config, "stacking/fold0"));
    const auto second = train_base_models(halves.test, with_stream(config, "stacking/fold1"));
    const Matrix a = ensemble_inputs(second.dm.model, second.ae.model, halves.train.patients);
    const Matrix b = ensemble_inputs(first.dm.model, first.ae.model, halves.test.patients);
    inputs = Matrix(a.rows() + b.rows(), kEnsembleInputWidth);
    for (std::size_t i = 0; i < a.rows(); ++i) std::ranges::copy(a.row(i), inputs.row(i).begin());
    for (std::size_t i = 0; i < b.rows(); ++i)
      std::ranges::copy(b.row(i), inputs.row(a.rows() + i).begin());
    ordered = halves.train.patients;
    ordered.insert(ordered.end(), halves.test.patients.begin(), halves.test.patients.end());
  }
  auto result = nn::train(init_ensemble(config).net, inputs, specialty_targets(ordered),
                          with_stream(config, "train/ensemble"));
  return {{std::move(result.model)}, std::move(result.loss_history)};
}

Trained<AggregateAnnModel> train_aggregate_ann(const Cohort& train, const nn::TrainConfig& config) {
  require_non_empty(train, "train_aggregate_ann");
  auto result = nn::train(init_aggregate(config).net, aggregate_inputs(train.patients),
                          specialty_targets(train.patients), with_stream(config, "train/ann"));
  return {{std::move(result.model)}, std::move(result.loss_history)};
}

Matrix predict(const DiagnosticModel& dm, const AutoencoderModel& ae, const EnsembleModel& ens,
               const std::vector<PatientRecord>& patients) {
  return nn::predict(ens.net, ensemble_inputs(dm, ae, patients));
}

std::vector<double> predict(const DiagnosticModel& dm, const AutoencoderModel& ae,
                            const EnsembleModel& ens, const PatientRecord& patient) {
  const Matrix out = predict(dm, ae, ens, std::vector<PatientRecord>{patient});
  return {out.values().begin(), out.values().end()};
}

void ModelBundle::require_vocab(const Vocabularies& vocab) const {
  if (vocab.hash() != vocab_hash)
    throw UsageError("model bundle was trained on a different vocabulary (bundle hash " +
                     std::to_string(vocab_hash) + ", cohort hash " +
                     std::to_string(vocab.hash()) + ")");
}

std::vector<double> predict(const ModelBundle& bundle, const Vocabularies& vocab,
                            const PatientRecord& patient) {
  bundle.require_vocab(vocab);
  if (!bundle.has_pipeline())
    throw UsageError("model bundle lacks the diagnostic/autoencoder/ensemble networks");
  return predict(*bundle.dm, *bundle.ae, *bundle.ensemble, patient);
}

nlohmann::json to_json(const ModelBundle& b) {
  nlohmann::json nets = nlohmann::json::object();
  if (b.dm) nets["diagnostic"] = nn::to_json(b.dm->net);
  if (b.ae) nets["autoencoder"] = nn::to_json(b.ae->net);
  if (b.ensemble) nets["ensemble"] = nn::to_json(b.ensemble->net);
  if (b.ann) nets["aggregate_ann"] = nn::to_json(b.ann->net);
  nlohmann::json factors = nlohmann::json::object();
  if (b.svd) factors["svd"] = baselines::to_json(*b.svd);
  if (b.pmf) factors["pmf"] = baselines::to_json(*b.pmf);
  nlohmann::json doc = {{"format_version", kBundleFormatVersion},
                        // Decimal string so the full 64-bit value survives any JSON reader.
                        {"vocab_hash", std::to_string(b.vocab_hash)},
                        {"train_fraction", b.train_fraction},
                        {"split_seed", b.split_seed},
                        {"train_config", nn::to_json(b.train_config)},
                        {"two_fold_stacking", b.two_fold_stacking},
                        {"networks", std::move(nets)},
                        {"factor_models", std::move(factors)}};
  if (b.pmf_config) doc["pmf_config"] = baselines::to_json(*b.pmf_config);
  return doc;
}

ModelBundle bundle_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw LoadError("bundle: expected a JSON object");
    if (!doc.contains("format_version")) throw LoadError("bundle: missing field 'format_version'");
    const int version = doc.at("format_version").get<int>();
    if (version != kBundleFormatVersion)
      throw LoadError("bundle: field 'format_version' is " + std::to_string(version) +
                      ", expected " + std::to_string(kBundleFormatVersion));
    for (const char* name : {"vocab_hash", "train_fraction", "split_seed", "train_config",
                             "networks", "factor_models"})
      if (!doc.contains(name)) throw LoadError(std::string("bundle: missing field '") + name + "'");

    ModelBundle b;
    b.vocab_hash = std::stoull(doc.at("vocab_hash").get<std::string>());
    b.train_fraction = doc.at("train_fraction").get<double>();
    b.split_seed = doc.at("split_seed").get<std::uint64_t>();
    b.train_config = nn::train_config_from_json(doc.at("train_config"));
    b.two_fold_stacking = doc.value("two_fold_stacking", false);
    const auto& nets = doc.at("networks");
    if (nets.contains("diagnostic")) b.dm = DiagnosticModel{nn::model_from_json(nets["diagnostic"])};
    if (nets.contains("autoencoder"))
      b.ae = AutoencoderModel{nn::model_from_json(nets["autoencoder"])};
    if (nets.contains("ensemble")) b.ensemble = EnsembleModel{nn::model_from_json(nets["ensemble"])};
    if (nets.contains("aggregate_ann"))
      b.ann = AggregateAnnModel{nn::model_from_json(nets["aggregate_ann"])};
    const auto& factors = doc.at("factor_models");
    if (factors.contains("svd")) b.svd = baselines::factor_model_from_json(factors["svd"]);
    if (factors.contains("pmf")) b.pmf = baselines::factor_model_from_json(factors["pmf"]);
    if (doc.contains("pmf_config")) b.pmf_config = baselines::pmf_config_from_json(doc["pmf_config"]);

    if (b.dm) require_dims(*b.dm, kDiagnosticDims, "bundle: diagnostic");
    if (b.ae) require_dims(*b.ae, kAutoencoderDims, "bundle: autoencoder");
    if (b.ensemble) require_dims(*b.ensemble, kEnsembleDims, "bundle: ensemble");
    if (b.ann) require_dims(*b.ann, kAggregateDims, "bundle: aggregate_ann");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bundle: ") + e.what());
  } catch (const ShapeError& e) {
    throw LoadError(e.what());
  } catch (const std::invalid_argument&) {
    throw LoadError("bundle: field 'vocab_hash' is not a decimal integer");
  }
}

}  // namespace clinrec::models
