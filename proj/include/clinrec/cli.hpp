#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clinrec/baselines.hpp"
#include "clinrec/nn.hpp"
#include "clinrec/synth.hpp"

namespace clinrec::cli {

inline constexpr const char* kVersion = "1.0.0";

// File names inside command output directories.
inline constexpr const char* kGeneratorFileName = "generator.json";
inline constexpr const char* kChecklistFileName = "checklist.json";
inline constexpr const char* kBundleFileName = "bundle.json";
inline constexpr const char* kLossHistoryFileName = "loss_history.csv";

struct GenOptions {
  synth::GeneratorConfig generator;
  std::filesystem::path out_dir;
  std::size_t checklist_size = 5;  // procedures per diagnosis in the derived checklist
};

struct GenSummary {
  std::size_t patients = 0;
  double positive_label_rate = 0.0;
  double mean_pcp_orders = 0.0;
  bool null_signal = false;
};

/// Writes cohort.jsonl, vocab.json, generator.json and checklist.json.
GenSummary cmd_gen(const GenOptions& options, std::ostream& log);

enum class ModelKind { dm, ae, ensemble, ann, svd, pmf };

struct TrainOptions {
  std::filesystem::path cohort_dir;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  nn::TrainConfig train;  // seed field is derived from `seed`
  double train_fraction = 0.8;
  std::vector<ModelKind> models{ModelKind::dm,  ModelKind::ae,  ModelKind::ensemble,
                                ModelKind::ann, ModelKind::svd, ModelKind::pmf};
  std::size_t svd_rank = 20;
  baselines::PmfConfig pmf;  // seed field is derived from `seed`
  bool two_fold_stacking = false;
};

/// Writes bundle.json and loss_history.csv; returns the bundle fingerprint.
std::uint64_t cmd_train(const TrainOptions& options, std::ostream& log);

struct EvalOptions {
  std::filesystem::path cohort_dir;
  std::optional<std::filesystem::path> bundle;
  std::optional<std::filesystem::path> checklist;  // defaults to <cohort>/checklist.json if present
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;  // only used without a bundle
  std::size_t n_resamples = 1000;
  double example_threshold = 0.20;
};

/// Writes pr_curve.csv, auroc.csv, policy.csv, precision_at_recall.csv,
/// metrics.json, example_report.json and example_report.txt.
void cmd_eval(const EvalOptions& options, std::ostream& log);

struct RecommendOptions {
  std::filesystem::path bundle;
  std::filesystem::path cohort_dir;  // vocabulary source
  std::filesystem::path patients_file;
  std::optional<double> threshold;
  std::optional<std::size_t> top_k;
  std::optional<std::filesystem::path> out;
};

/// One JSON object per patient with ranked recommendations and the policy used.
std::string cmd_recommend(const RecommendOptions& options);

/// Full command-line entry point. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clinrec::cli
