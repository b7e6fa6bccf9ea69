#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "clinrec/baselines.hpp"
#include "clinrec/data.hpp"
#include "clinrec/nn.hpp"
#include "json.hpp"

namespace clinrec::models {

inline constexpr std::array<std::size_t, 5> kDiagnosticDims{310, 200, 100, 80, 60};
inline constexpr std::array<std::size_t, 5> kAutoencoderDims{60, 60, 40, 60, 60};
inline constexpr std::array<std::size_t, 6> kEnsembleDims{130, 200, 150, 100, 80, 60};
// Six layer widths, counted the same way as the other three; hidden widths
// are our own choice.
inline constexpr std::array<std::size_t, 6> kAggregateDims{380, 300, 200, 150, 100, 60};

/// Labs ++ diagnoses -> specialty procedure scores.
struct DiagnosticModel {
  nn::MlpModel net;
};

/// PCP procedures -> specialty procedure scores.
struct AutoencoderModel {
  nn::MlpModel net;
};

/// DM scores ++ AE scores ++ specialist one-hot -> specialty procedure scores.
struct EnsembleModel {
  nn::MlpModel net;
};

/// Every input channel concatenated, single network.
struct AggregateAnnModel {
  nn::MlpModel net;
};

// Batch builders; one row per patient.
Matrix diagnostic_inputs(const std::vector<PatientRecord>& patients);
Matrix pcp_inputs(const std::vector<PatientRecord>& patients);
Matrix specialty_targets(const std::vector<PatientRecord>& patients);
Matrix aggregate_inputs(const std::vector<PatientRecord>& patients);

/// Stacking inputs: infer-mode DM and AE scores plus the specialist one-hot.
Matrix ensemble_inputs(const DiagnosticModel& dm, const AutoencoderModel& ae,
                       const std::vector<PatientRecord>& patients);

template <class Model>
struct Trained {
  Model model;
  std::vector<double> loss_history;
};

struct BaseModels {
  Trained<DiagnosticModel> dm;
  Trained<AutoencoderModel> ae;
};

/// Trains the DM and AE independently. Initialization and training streams
/// are derived from config.seed per model.
BaseModels train_base_models(const Cohort& train, const nn::TrainConfig& config);

/// Fits the ensemble on base-model scores over `train`. With two_fold_stacking
/// the stacking inputs for each half come from base models trained on the
/// other half; the supplied dm/ae are then only used for input validation.
Trained<EnsembleModel> train_ensemble(const Cohort& train, const DiagnosticModel& dm,
                                      const AutoencoderModel& ae, const nn::TrainConfig& config,
                                      bool two_fold_stacking = false);

Trained<AggregateAnnModel> train_aggregate_ann(const Cohort& train, const nn::TrainConfig& config);

DiagnosticModel init_diagnostic(const nn::TrainConfig& config);
AutoencoderModel init_autoencoder(const nn::TrainConfig& config);
EnsembleModel init_ensemble(const nn::TrainConfig& config);
AggregateAnnModel init_aggregate(const nn::TrainConfig& config);

/// Full stacked pipeline for one patient.
std::vector<double> predict(const DiagnosticModel& dm, const AutoencoderModel& ae,
                            const EnsembleModel& ens, const PatientRecord& patient);
/// Batch form; row i scores patients[i].
Matrix predict(const DiagnosticModel& dm, const AutoencoderModel& ae, const EnsembleModel& ens,
               const std::vector<PatientRecord>& patients);

inline constexpr int kBundleFormatVersion = 1;

/// Everything `train` produces, keyed to the vocabulary it was trained on.
struct ModelBundle {
  std::uint64_t vocab_hash = 0;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  nn::TrainConfig train_config;
  bool two_fold_stacking = false;
  std::optional<DiagnosticModel> dm;
  std::optional<AutoencoderModel> ae;
  std::optional<EnsembleModel> ensemble;
  std::optional<AggregateAnnModel> ann;
  std::optional<baselines::FactorModel> svd;
  std::optional<baselines::FactorModel> pmf;
  std::optional<baselines::PmfConfig> pmf_config;

  /// UsageError unless the bundle was trained on `vocab`.
  void require_vocab(const Vocabularies& vocab) const;
  bool has_pipeline() const { return dm && ae && ensemble; }
};

/// Ensemble scores for one patient; refuses a bundle from another vocabulary.
std::vector<double> predict(const ModelBundle& bundle, const Vocabularies& vocab,
                            const PatientRecord& patient);

nlohmann::json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& doc);

}  // namespace clinrec::models
