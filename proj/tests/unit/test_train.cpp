#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "mcseg/arch/weights_io.hpp"
#include "mcseg/data/patch_index.hpp"
#include "mcseg/imaging/phantom.hpp"
#include "mcseg/train/evaluation.hpp"
#include "mcseg/train/trainer.hpp"
#include "synthetic.hpp"

using namespace mcseg::train;
using mcseg::data::PatchClass;
using mcseg::data::Target;
using mcseg::nn::Tensor;
namespace fs = std::filesystem;

namespace {

TrainLog log_of(const std::vector<double>& losses, double lr = 1e-3) {
  TrainLog log;
  for (std::size_t i = 0; i < losses.size(); ++i) log.epochs.push_back({i + 1, losses[i], losses[i], 0.5, lr});
  return log;
}

// Feeds the losses one epoch at a time, letting plateau_lr_step pick each rate.
std::vector<double> lr_schedule(const std::vector<double>& losses, std::size_t window, double lr0) {
  TrainLog log;
  double lr = lr0;
  std::vector<double> rates;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    log.epochs.push_back({i + 1, losses[i], losses[i], 0.5, lr});
    rates.push_back(lr);
    lr = plateau_lr_step(log, window, 1e-4, lr);
  }
  rates.push_back(lr);
  return rates;
}

TrainConfig quick_config(std::uint64_t seed) {
  TrainConfig c;
  c.batch = 16;
  c.batches_per_epoch = 4;
  c.max_epochs = 6;
  c.plateau_window = 2;
  c.patience = 4;
  c.validation_batches = 1;
  c.seed = seed;
  return c;
}

double inference_accuracy(const mcseg::arch::NetworkWeights<double>& w, const Tensor& patches, const Tensor& labels) {
  const Tensor probs = mcseg::arch::predict(w, patches);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < probs.extent(0); ++i) ok += (probs(i, 1) >= 0.5) == (labels(i, 1) == 1.0);
  return static_cast<double>(ok) / static_cast<double>(probs.extent(0));
}

}  // namespace

TEST_CASE("plateau rule examples") {
  SUBCASE("strictly decreasing losses keep the rate") {
    const auto rates = lr_schedule({1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3}, 3, 1e-3);
    for (double r : rates) CHECK(r == 1e-3);
  }
  SUBCASE("constant losses halve once, then need a fresh window") {
    const auto rates = lr_schedule(std::vector<double>(10, 0.5), 3, 1e-3);
    // epochs 1-3 have no earlier best; epoch 4 closes the first plateau
    CHECK(rates[3] == 1e-3);
    CHECK(rates[4] == 5e-4);
    CHECK(rates[5] == 5e-4);
    CHECK(rates[6] == 5e-4);
    CHECK(rates[7] == 2.5e-4);  // second window
    CHECK(rates[8] == 2.5e-4);
  }
  SUBCASE("improvement no larger than epsilon counts as a plateau") {
    TrainLog log = log_of({1.0, 1.0 - 5e-5, 1.0 - 9e-5});
    CHECK(plateau_lr_step(log, 2, 1e-4, 1e-3) == 5e-4);
    log = log_of({1.0, 0.9, 0.9});
    CHECK(plateau_lr_step(log, 2, 1e-4, 1e-3) == 1e-3);
  }
  SUBCASE("fewer epochs than the window") {
    CHECK(plateau_lr_step(log_of({1.0, 1.0}), 3, 1e-4, 1e-3) == 1e-3);
    CHECK(plateau_lr_step(TrainLog{}, 1, 1e-4, 1e-3) == 1e-3);
  }
  CHECK_THROWS_AS(plateau_lr_step(log_of({1.0}), 0, 1e-4, 1e-3), std::invalid_argument);
}

TEST_CASE("learning rate only ever halves") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> losses;
    double level = 1.0;
    for (int i = 0; i < 60; ++i) {
      level *= 0.97 + 0.06 * u(rng);
      losses.push_back(level);
    }
    const auto rates = lr_schedule(losses, 1 + trial % 5, 1e-3);
    for (std::size_t i = 1; i < rates.size(); ++i) {
      CHECK((rates[i] == rates[i - 1] || rates[i] == rates[i - 1] / 2.0));
    }
  }
}

TEST_CASE("early stopping examples") {
  std::vector<double> losses;
  for (int i = 0; i < 40; ++i) losses.push_back(1.0 / (i + 1));
  for (std::size_t e = 1; e <= losses.size(); ++e) {
    CHECK_FALSE(early_stop_check(log_of({losses.begin(), losses.begin() + static_cast<long>(e)}), 3));
  }

  std::vector<double> best_at_5{5, 4, 3, 2, 1};
  for (int i = 0; i < 12; ++i) best_at_5.push_back(1.5);
  for (std::size_t e = 5; e <= best_at_5.size(); ++e) {
    const bool stop = early_stop_check(log_of({best_at_5.begin(), best_at_5.begin() + static_cast<long>(e)}), 10);
    CHECK(stop == (e >= 15));
  }

  CHECK(early_stop_check(log_of({1.0, 1.0}), 1));  // equal is not a new best
  CHECK(early_stop_check(log_of({1.0, 2.0}), 1));
  CHECK_FALSE(early_stop_check(log_of({2.0, 1.0}), 1));
  CHECK_FALSE(early_stop_check(TrainLog{}, 1));
  CHECK_THROWS_AS(early_stop_check(log_of({1.0}), 0), std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.batch = 15;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.patience = c.plateau_window - 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.plateau_window = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("log text format") {
  TrainLog log = log_of({0.5, 0.25});
  log.wall_seconds = {1.5, 2.0};
  const std::string text = format_log(log);
  CHECK(text.rfind("epoch\ttrain_loss\tval_loss\tval_accuracy\tlr\twall_s\n", 0) == 0);
  CHECK(text.find("\n2\t0.25\t0.25\t0.5\t0.001\t2\n") != std::string::npos);

  TrainLog other = log;
  other.wall_seconds = {9.0, 9.0};
  CHECK(other == log);
}

TEST_CASE("overfits a small fixed set") {
  const auto spec = mcseg::testing::miniature_spec(9);
  const auto set = mcseg::testing::spot_patches(64, 9, 11);
  const FixedBatchSource source(set.patches, set.labels);
  TrainConfig c;
  c.batch = 64;
  c.batches_per_epoch = 1;
  c.max_epochs = 300;
  c.patience = 300;
  c.plateau_window = 20;
  c.lr = 1e-2;
  c.validation_batches = 1;
  c.seed = 5;
  std::size_t reached = 0;
  TrainResult r = train(spec, source, source, c, [&](const EpochRecord& e) {
    if (e.val_accuracy == 1.0 && e.val_loss < 0.01 && reached == 0) reached = e.epoch;
    return reached == 0;
  });
  INFO("epochs run: " << r.log.epochs.size());
  REQUIRE(reached > 0);
  CHECK(reached <= 300);
  CHECK(inference_accuracy(r.weights, set.patches, set.labels) == 1.0);
  CHECK(evaluate_batches(r.weights, {{set.patches, set.labels}}).loss < 0.01);
}

TEST_CASE("fixed seed gives identical runs; the checkpoint is the best validation epoch") {
  const auto spec = mcseg::testing::miniature_spec(9);
  const auto tr = mcseg::testing::spot_patches(64, 9, 1);
  const auto va = mcseg::testing::spot_patches(32, 9, 2);
  const FixedBatchSource train_source(tr.patches, tr.labels);
  const FixedBatchSource val_source(va.patches, va.labels);
  TrainConfig c = quick_config(77);
  c.batch = 32;  // equals the validation set, so validation sees it whole
  c.max_epochs = 12;

  const TrainResult a = train(spec, train_source, val_source, c);
  const TrainResult b = train(spec, train_source, val_source, c);
  CHECK(a.log == b.log);
  CHECK(a.weights == b.weights);
  CHECK_FALSE(a.log.stop_reason.empty());

  const TrainResult other = train(spec, train_source, val_source, quick_config(78));
  CHECK_FALSE(other.log == a.log);

  REQUIRE(a.log.best_epoch >= 1);
  const EpochRecord& best = a.log.epochs[a.log.best_epoch - 1];
  CHECK(best.val_loss <= a.log.epochs.back().val_loss);
  for (const EpochRecord& e : a.log.epochs) CHECK(best.val_loss <= e.val_loss);
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) CHECK(a.log.epochs[i].epoch == i + 1);

  // the checkpoint reproduces its logged validation loss, also after a save/load cycle
  const Evaluation eval = evaluate_batches(a.weights, {{va.patches, va.labels}});
  CHECK(eval.loss == best.val_loss);
  const fs::path path = fs::temp_directory_path() / "mcseg_train_ckpt.bin";
  mcseg::arch::save_weights(a.weights, path);
  const auto loaded = mcseg::arch::load_weights(path, spec);
  fs::remove(path);
  CHECK(loaded == a.weights);
  CHECK(evaluate_batches(loaded, {{va.patches, va.labels}}).loss == best.val_loss);
}

TEST_CASE("training from a patch index is deterministic") {
  mcseg::imaging::PhantomConfig pc;
  std::vector<mcseg::imaging::GrayImage> images;
  std::vector<mcseg::imaging::BinaryMask> masks;
  std::vector<mcseg::data::ImageEntry> manifest;
  for (std::uint64_t s = 0; s < 2; ++s) {
    pc.seed = s;
    auto p = mcseg::imaging::generate_phantom(pc);
    images.push_back(p.image);
    masks.push_back(p.mask);
    manifest.push_back({"p" + std::to_string(s), "p.pgm", "m.pgm"});
  }
  const auto index = mcseg::data::build_patch_index(images, masks, manifest, 9);
  TrainConfig c = quick_config(4);
  c.target = Target::Segmentator;
  const auto spec = mcseg::testing::miniature_spec(9);
  const TrainResult a = train(spec, index, images, index, images, c);
  const TrainResult b = train(spec, index, images, index, images, c);
  CHECK(a.log == b.log);
  CHECK(a.weights == b.weights);
  for (std::size_t i = 1; i < a.log.epochs.size(); ++i) CHECK(a.log.epochs[i].lr <= a.log.epochs[i - 1].lr);

  const auto table = evaluate_per_class(a.weights, index, images, Target::Segmentator);
  for (double e : table.error_percent) CHECK((e >= 0.0 && e <= 100.0));
  for (PatchClass cls : mcseg::data::kAllClasses) CHECK(table.evaluated[index_of(cls)] == index.count(cls));

  // self-consistency with raw predictions
  const auto inference = a.weights.cast<float>();
  for (PatchClass cls : mcseg::data::kAllClasses) {
    const auto& recs = index.records(cls);
    const auto probs = predict_records(inference, recs, images);
    std::size_t wrong = 0;
    for (double p : probs) wrong += (p >= 0.5) != mcseg::data::is_positive(cls, Target::Segmentator);
    CHECK(table.error_percent[index_of(cls)] ==
          doctest::Approx(100.0 * static_cast<double>(wrong) / static_cast<double>(recs.size())).epsilon(1e-12));
  }

  EvalConfig capped;
  capped.per_class_cap = 5;
  const auto small = evaluate_per_class(a.weights, index, images, Target::Segmentator, capped);
  for (std::size_t n : small.evaluated) CHECK(n == 5);

  auto missing = index;
  missing.groups[index_of(PatchClass::C2)].clear();
  CHECK_THROWS_AS(evaluate_per_class(a.weights, missing, images, Target::Segmentator), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with the log so far") {
  const auto spec = mcseg::testing::miniature_spec(9);
  auto tr = mcseg::testing::spot_patches(16, 9, 1);
  tr.patches(3, 0, 4, 4) = std::numeric_limits<double>::quiet_NaN();
  const FixedBatchSource bad(tr.patches, tr.labels);
  const auto va = mcseg::testing::spot_patches(16, 9, 2);
  const FixedBatchSource good(va.patches, va.labels);
  TrainConfig c = quick_config(1);
  try {
    (void)train(spec, bad, good, c);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.log().epochs.empty());
    CHECK(e.log().stop_reason == "diverged");
  }
}

TEST_CASE("per-class table from raw predictions") {
  std::vector<Prediction> preds;
  for (PatchClass c : mcseg::data::kAllClasses) {
    for (int i = 0; i < 10; ++i) preds.push_back({c, mcseg::data::is_positive(c, Target::Detector) ? 0.9 : 0.1});
  }
  SUBCASE("perfect classifier") {
    const auto t = evaluate_predictions(preds, Target::Detector);
    for (double e : t.error_percent) CHECK(e == 0.0);
    CHECK(t.overall_accuracy_percent == 100.0);
  }
  SUBCASE("errors in one class") {
    for (int i = 0; i < 4; ++i) preds[20 + i].positive_probability = 0.2;  // C3 misses
    const auto t = evaluate_predictions(preds, Target::Detector);
    CHECK(t.error_percent[2] == doctest::Approx(40.0));
    CHECK(t.worst_class() == PatchClass::C3);
    // positive side averages C1..C3, negative side is C4 alone
    CHECK(t.overall_accuracy_percent == doctest::Approx(0.5 * (100.0 - 40.0 / 3.0) + 0.5 * 100.0));
  }
  SUBCASE("missing class") {
    preds.erase(preds.begin() + 10, preds.begin() + 20);
    CHECK_THROWS_AS(evaluate_predictions(preds, Target::Detector), std::invalid_argument);
  }
  SUBCASE("probabilities outside [0, 1]") {
    preds[0].positive_probability = 1.5;
    CHECK_THROWS_AS(evaluate_predictions(preds, Target::Detector), std::invalid_argument);
  }
}

TEST_CASE("coin-flip classifier scores chance") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Target target : {Target::Detector, Target::Segmentator}) {
    std::vector<Prediction> preds;
    for (PatchClass c : mcseg::data::kAllClasses)
      for (int i = 0; i < 20000; ++i) preds.push_back({c, u(rng)});
    const auto t = evaluate_predictions(preds, target);
    CHECK(t.overall_accuracy_percent == doctest::Approx(50.0).epsilon(0.04));
    for (double e : t.error_percent) CHECK(e == doctest::Approx(50.0).epsilon(0.04));
  }
}

TEST_CASE("table rendering") {
  ClassErrorTable det;
  det.error_percent = {1.0, 2.5, 7.84, 0.5};
  det.overall_accuracy_percent = 98.22;
  ClassErrorTable seg = det;
  seg.target = Target::Segmentator;
  const std::vector<ClassErrorTable> tables{det, seg};
  const std::string text = render_tables(tables);
  CHECK(text ==
        "Network            C1       C2       C3       C4    Overall\n"
        "Detector         1.00     2.50     7.84     0.50      98.22\n"
        "Segmentator      1.00     2.50     7.84     0.50      98.22\n");
}

TEST_CASE("patch size sweep trains one network per size") {
  const std::vector<std::size_t> sizes{9, 11};
  TrainConfig c = quick_config(3);
  c.max_epochs = 2;
  const auto entries = sweep_patch_sizes(sizes, mcseg::testing::miniature_spec(9),
                                         [](std::size_t n) {
                                           auto tr = mcseg::testing::spot_patches(32, n, n);
                                           auto va = mcseg::testing::spot_patches(16, n, n + 100);
                                           return SweepSources{
                                               std::make_unique<FixedBatchSource>(tr.patches, tr.labels),
                                               std::make_unique<FixedBatchSource>(va.patches, va.labels)};
                                         },
                                         c);
  REQUIRE(entries.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(entries[i].patch_size == sizes[i]);
    CHECK(entries[i].log.epochs.size() == 2);
    CHECK(entries[i].best_val_loss == entries[i].log.epochs[entries[i].log.best_epoch - 1].val_loss);
  }
  CHECK(kSweepPatchSizes == std::array<std::size_t, 3>{29, 39, 49});
}
