#include <algorithm>

#include "clinrec/error.hpp"
#include "clinrec/models.hpp"
#include "clinrec/synth.hpp"
#include "doctest.h"

using namespace clinrec;
using namespace clinrec::models;

namespace {

Cohort cohort(std::size_t n, std::uint64_t seed) {
  synth::GeneratorConfig c;
  c.num_patients = n;
  c.seed = seed;
  return synth::generate(c);
}

nn::TrainConfig quick(std::size_t epochs, double lr = 0.3) {
  return {lr, epochs, 32, 0.3, 5};
}

template <std::size_t N>
std::vector<std::size_t> dims(const std::array<std::size_t, N>& a) {
  return {a.begin(), a.end()};
}

}  // namespace

TEST_CASE("architectures match the fixed layer sequences") {
  const nn::TrainConfig c;
  CHECK(init_diagnostic(c).net.layer_dims() == std::vector<std::size_t>{310, 200, 100, 80, 60});
  CHECK(init_autoencoder(c).net.layer_dims() == std::vector<std::size_t>{60, 60, 40, 60, 60});
  CHECK(init_ensemble(c).net.layer_dims() == std::vector<std::size_t>{130, 200, 150, 100, 80, 60});
  CHECK(init_aggregate(c).net.layer_dims() == std::vector<std::size_t>{380, 300, 200, 150, 100, 60});
  CHECK(init_diagnostic(c).net.dropout_p() == 0.3);
}

TEST_CASE("input builders have the documented widths") {
  const Cohort c = cohort(7, 1);
  CHECK(diagnostic_inputs(c.patients).cols() == 310);
  CHECK(pcp_inputs(c.patients).cols() == 60);
  CHECK(aggregate_inputs(c.patients).cols() == 380);
  CHECK(specialty_targets(c.patients).cols() == 60);
  const nn::TrainConfig cfg;
  const Matrix ens = ensemble_inputs(init_diagnostic(cfg), init_autoencoder(cfg), c.patients);
  CHECK(ens.cols() == 130);
  CHECK(ens.rows() == 7);
  // The side bits are the specialist one-hot.
  const BitVector side = encode_specialist(c.patients[2].specialist_id);
  for (std::size_t b = 0; b < kSpecialistBuckets; ++b) CHECK(ens(2, 120 + b) == side[b]);
}

TEST_CASE("ensemble rejects base models of the wrong width") {
  const nn::TrainConfig cfg;
  const std::vector<std::size_t> narrow{310, 20, 50};
  const DiagnosticModel dm{nn::init_model(narrow, 0.3, 1)};
  const Cohort c = cohort(4, 1);
  CHECK_THROWS_AS(ensemble_inputs(dm, init_autoencoder(cfg), c.patients), ShapeError);
  CHECK_THROWS_AS(train_ensemble(c, dm, init_autoencoder(cfg), quick(1)), ShapeError);
}

TEST_CASE("lr = 0 ensemble equals the freshly initialized net") {
  const Cohort c = cohort(40, 2);
  const BaseModels base = train_base_models(c, quick(2));
  const nn::TrainConfig frozen = quick(2, 0.0);
  const auto ens = train_ensemble(c, base.dm.model, base.ae.model, frozen);
  CHECK(ens.model.net.same_parameters(init_ensemble(frozen).net));
  const EnsembleModel fresh = init_ensemble(frozen);
  CHECK(predict(base.dm.model, base.ae.model, ens.model, c.patients) ==
        predict(base.dm.model, base.ae.model, fresh, c.patients));
}

TEST_CASE("training is deterministic per seed") {
  const Cohort c = cohort(60, 3);
  const BaseModels a = train_base_models(c, quick(3));
  const BaseModels b = train_base_models(c, quick(3));
  CHECK(a.dm.model.net.same_parameters(b.dm.model.net));
  CHECK(a.ae.model.net.same_parameters(b.ae.model.net));
  CHECK(a.dm.loss_history == b.dm.loss_history);
  nn::TrainConfig other = quick(3);
  other.seed = 6;
  CHECK_FALSE(train_base_models(c, other).dm.model.net.same_parameters(a.dm.model.net));
  CHECK(train_aggregate_ann(c, quick(2)).model.net.same_parameters(train_aggregate_ann(c, quick(2)).model.net));
}

TEST_CASE("pipeline predictions are pure per patient") {
  const Cohort c = cohort(50, 4);
  const BaseModels base = train_base_models(c, quick(3));
  const auto ens = train_ensemble(c, base.dm.model, base.ae.model, quick(3)).model;
  const auto& dm = base.dm.model;
  const auto& ae = base.ae.model;

  const std::vector<PatientRecord> ab{c.patients[0], c.patients[1]};
  const std::vector<PatientRecord> ba{c.patients[1], c.patients[0]};
  const Matrix s_ab = predict(dm, ae, ens, ab);
  const Matrix s_ba = predict(dm, ae, ens, ba);
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    CHECK(s_ab(0, j) == s_ba(1, j));
    CHECK(s_ab(1, j) == s_ba(0, j));
  }
  const auto single = predict(dm, ae, ens, c.patients[0]);
  CHECK(single == predict(dm, ae, ens, c.patients[0]));
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    CHECK(single[j] == s_ab(0, j));
    CHECK(single[j] > 0.0);
    CHECK(single[j] < 1.0);
  }
}

TEST_CASE("ensemble consumes the specialist side information") {
  const Cohort c = cohort(600, 5);
  const BaseModels base = train_base_models(c, quick(10));
  const auto ens = train_ensemble(c, base.dm.model, base.ae.model, quick(10)).model;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    PatientRecord p = c.patients[i];
    const auto before = predict(base.dm.model, base.ae.model, ens, p);
    const BitVector bucket = encode_specialist(p.specialist_id);
    for (std::size_t s = 0; s < 10; ++s) {
      p.specialist_id = synth::specialist_name(s);
      if (encode_specialist(p.specialist_id) != bucket) {
        changed += predict(base.dm.model, base.ae.model, ens, p) != before;
        break;
      }
    }
  }
  CHECK(changed > 0);
}

TEST_CASE("two-fold stacking trains a different ensemble") {
  const Cohort c = cohort(80, 6);
  const BaseModels base = train_base_models(c, quick(2));
  const auto same = train_ensemble(c, base.dm.model, base.ae.model, quick(2), false);
  const auto folds = train_ensemble(c, base.dm.model, base.ae.model, quick(2), true);
  CHECK_FALSE(same.model.net.same_parameters(folds.model.net));
  CHECK(folds.loss_history.size() == 2);
}

TEST_CASE("bundle JSON round-trip and vocabulary guard") {
  const Cohort c = cohort(50, 7);
  const BaseModels base = train_base_models(c, quick(2));
  ModelBundle bundle;
  bundle.vocab_hash = c.vocab.hash();
  bundle.split_seed = 99;
  bundle.train_config = quick(2);
  bundle.dm = base.dm.model;
  bundle.ae = base.ae.model;
  bundle.ensemble = train_ensemble(c, base.dm.model, base.ae.model, quick(2)).model;
  bundle.svd = baselines::svd_fit(c, 5);

  const ModelBundle back = bundle_from_json(nlohmann::json::parse(to_json(bundle).dump()));
  CHECK(back.vocab_hash == bundle.vocab_hash);
  CHECK(back.split_seed == 99);
  CHECK(back.train_config == bundle.train_config);
  CHECK(back.dm->net.same_parameters(bundle.dm->net));
  CHECK(back.svd == bundle.svd);
  CHECK_FALSE(back.pmf.has_value());
  CHECK(predict(back, c.vocab, c.patients[3]) == predict(bundle, c.vocab, c.patients[3]));

  Vocabularies other = c.vocab;
  std::swap(other.procedure_ids[0], other.procedure_ids[1]);
  CHECK_THROWS_AS(bundle.require_vocab(other), UsageError);
  CHECK_THROWS_AS(predict(bundle, other, c.patients[0]), UsageError);

  auto doc = to_json(bundle);
  doc["networks"]["diagnostic"] = doc["networks"]["autoencoder"];
  CHECK_THROWS_AS(bundle_from_json(doc), LoadError);
  doc = to_json(bundle);
  doc["format_version"] = 2;
  CHECK_THROWS_AS(bundle_from_json(doc), LoadError);
}
