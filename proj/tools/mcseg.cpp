// Command-line front end: phantom generation, indexing, training, evaluation,
// inference and feature-space analysis.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mcseg/analysis/analysis.hpp"
#include "mcseg/arch/weights_io.hpp"
#include "mcseg/data/patch_index.hpp"
#include "mcseg/imaging/netpbm.hpp"
#include "mcseg/imaging/phantom.hpp"
#include "mcseg/pipeline/pipeline.hpp"
#include "mcseg/train/evaluation.hpp"
#include "mcseg/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace mcseg;

namespace {

struct Common {
  std::size_t patch_size = 49;
  std::string conv_mode = "same";
  std::uint64_t seed = 0;
  double spacing_mm = imaging::kDefaultSpacingMm;
};

arch::NetworkSpec network_spec(const Common& c) {
  arch::NetworkSpec spec;
  spec.patch_size = c.patch_size;
  spec.conv_mode = c.conv_mode == "valid" ? arch::ConvMode::Valid : arch::ConvMode::Same;
  spec.validate();
  return spec;
}

// A dataset directory holds manifest.tsv (image and mask paths relative to
// the directory) and, once indexed, index.tsv.
struct Dataset {
  data::PatchIndex index;
  data::Corpus corpus;
};

std::vector<data::ImageEntry> resolved(std::vector<data::ImageEntry> manifest, const fs::path& dir) {
  for (auto& e : manifest) {
    if (e.image.is_relative()) e.image = dir / e.image;
    if (e.mask.is_relative()) e.mask = dir / e.mask;
  }
  return manifest;
}

// Loads index.tsv when it matches the patch size, otherwise builds the index in memory.
Dataset load_dataset(const fs::path& dir, std::size_t n, std::uint64_t seed, double spacing) {
  const auto manifest = data::load_manifest(dir / "manifest.tsv");
  Dataset ds;
  ds.corpus = data::load_corpus(resolved(manifest, dir), spacing);
  const fs::path index_path = dir / "index.tsv";
  if (fs::exists(index_path)) {
    ds.index = data::load_index(index_path, dir / "manifest.tsv");
    if (ds.index.patch_size == n) return ds;
  }
  data::IndexConfig cfg;
  cfg.seed = seed;
  ds.index = data::build_patch_index(ds.corpus.images, ds.corpus.masks, manifest, n, cfg);
  return ds;
}

// Creates the parent directory of an output path if needed.
fs::path output_path(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  return path;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(output_path(path));
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

data::Target target_of(const std::string& name) { return data::parse_target(name); }

void print_counts(const data::PatchIndex& index) {
  std::cout << "patches:";
  for (auto c : data::kAllClasses) std::cout << ' ' << data::to_string(c) << '=' << index.count(c);
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microcalcification detection and segmentation with two patch CNNs"};
  app.set_config("--config", "", "Plain-text key=value file with option defaults");
  app.require_subcommand(1);
  app.fallthrough();  // global flags may also follow the subcommand

  Common common;
  app.add_option("--patch-size", common.patch_size, "Patch side N (odd)")->capture_default_str();
  app.add_option("--conv-mode", common.conv_mode, "Convolution padding")
      ->check(CLI::IsMember({"same", "valid"}))
      ->capture_default_str();
  app.add_option("--seed", common.seed, "Master random seed")->capture_default_str();
  app.add_option("--spacing", common.spacing_mm, "Pixel spacing in mm")->capture_default_str();

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic mammograms with ground truth");
  fs::path phantom_out;
  std::size_t phantom_count = 10;
  imaging::PhantomConfig pcfg;
  phantom->add_option("--out", phantom_out, "Output directory")->required();
  phantom->add_option("--count", phantom_count, "Number of images")->capture_default_str();
  phantom->add_option("--width", pcfg.width)->capture_default_str();
  phantom->add_option("--height", pcfg.height)->capture_default_str();
  phantom->add_option("--clusters", pcfg.clusters)->capture_default_str();
  phantom->add_option("--mcs-per-cluster", pcfg.mcs_per_cluster)->capture_default_str();
  phantom->add_option("--scattered", pcfg.scattered_mcs)->capture_default_str();
  phantom->add_option("--contrast", pcfg.mc_contrast)->capture_default_str();
  phantom->add_option("--noise", pcfg.noise_sigma)->capture_default_str();
  phantom->add_option("--max-value", pcfg.max_value)->capture_default_str();

  // index
  auto* index_cmd = app.add_subcommand("index", "Build the patch index of a dataset directory");
  fs::path index_dir;
  data::IndexConfig icfg;
  index_cmd->add_option("--data", index_dir, "Dataset directory")->required();
  index_cmd->add_option("--min-cap", icfg.min_cap)->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the Detector or the Segmentator");
  fs::path train_dir, val_dir, weights_out, log_out;
  std::string target_name = "detector";
  train::TrainConfig tcfg;
  train_cmd->add_option("--target", target_name)->check(CLI::IsMember({"detector", "segmentator"}))->required();
  train_cmd->add_option("--train", train_dir, "Training dataset directory")->required();
  train_cmd->add_option("--val", val_dir, "Validation dataset directory")->required();
  train_cmd->add_option("--out", weights_out, "Weight file to write")->required();
  train_cmd->add_option("--log", log_out, "Training log (TSV)");
  train_cmd->add_option("--batch", tcfg.batch)->capture_default_str();
  train_cmd->add_option("--lr", tcfg.lr)->capture_default_str();
  train_cmd->add_option("--epochs", tcfg.max_epochs)->capture_default_str();
  train_cmd->add_option("--batches-per-epoch", tcfg.batches_per_epoch)->capture_default_str();
  train_cmd->add_option("--plateau-window", tcfg.plateau_window)->capture_default_str();
  train_cmd->add_option("--plateau-epsilon", tcfg.plateau_epsilon)->capture_default_str();
  train_cmd->add_option("--patience", tcfg.patience)->capture_default_str();
  train_cmd->add_option("--validation-batches", tcfg.validation_batches)->capture_default_str();
  bool sweep = false;
  train_cmd->add_flag("--sweep", sweep, "Train once per patch size 29, 39, 49 and report validation results");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Per-class error table on a test dataset");
  fs::path test_dir, det_path, seg_path;
  train::EvalConfig ecfg;
  eval_cmd->add_option("--test", test_dir, "Test dataset directory")->required();
  eval_cmd->add_option("--detector", det_path, "Detector weights");
  eval_cmd->add_option("--segmentator", seg_path, "Segmentator weights");
  eval_cmd->add_option("--per-class-cap", ecfg.per_class_cap, "Patches per class (0 = all)")->capture_default_str();

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Segment one image and report clusters");
  fs::path image_path, out_prefix;
  pipeline::PipelineConfig plcfg;
  infer_cmd->add_option("--image", image_path, "Input PGM")->required();
  infer_cmd->add_option("--detector", det_path)->required();
  infer_cmd->add_option("--segmentator", seg_path)->required();
  infer_cmd->add_option("--out", out_prefix, "Output prefix for _mask.pgm, _report.txt, _overlay.ppm")->required();
  infer_cmd->add_option("--threads", plcfg.threads, "Worker threads (0 = all cores)")->capture_default_str();
  infer_cmd->add_option("--skip-background", plcfg.skip_background_fraction)->capture_default_str();

  // tsne
  auto* tsne_cmd = app.add_subcommand("tsne", "Penultimate-layer t-SNE and misclassification report");
  fs::path tsne_dir, tsne_weights;
  std::size_t tsne_cap = 1000;
  analysis::TsneConfig scfg;
  tsne_cmd->add_option("--data", tsne_dir, "Dataset directory")->required();
  tsne_cmd->add_option("--weights", tsne_weights)->required();
  tsne_cmd->add_option("--target", target_name)->check(CLI::IsMember({"detector", "segmentator"}))->required();
  tsne_cmd->add_option("--out", out_prefix, "Output prefix for _projection.tsv and _report.txt")->required();
  tsne_cmd->add_option("--cap", tsne_cap, "Patches to embed")->capture_default_str();
  tsne_cmd->add_option("--perplexity", scfg.perplexity)->capture_default_str();
  tsne_cmd->add_option("--iterations", scfg.iterations)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) {
      fs::create_directories(phantom_out);
      std::vector<data::ImageEntry> manifest;
      for (std::size_t i = 0; i < phantom_count; ++i) {
        pcfg.seed = common.seed + i;
        pcfg.spacing_mm = common.spacing_mm;
        const imaging::Phantom p = imaging::generate_phantom(pcfg);
        char stem[32];
        std::snprintf(stem, sizeof stem, "phantom_%04zu", i);
        imaging::write_pgm(p.image, phantom_out / (std::string(stem) + ".pgm"));
        imaging::write_mask_pgm(p.mask, phantom_out / (std::string(stem) + "_mask.pgm"));
        imaging::write_sidecar(p.truth, phantom_out / (std::string(stem) + "_truth.txt"));
        manifest.push_back({stem, std::string(stem) + ".pgm", std::string(stem) + "_mask.pgm"});
      }
      data::save_manifest(manifest, phantom_out / "manifest.tsv");
      std::cout << "wrote " << phantom_count << " phantoms to " << phantom_out << '\n';
    } else if (*index_cmd) {
      const auto manifest = data::load_manifest(index_dir / "manifest.tsv");
      const auto corpus = data::load_corpus(resolved(manifest, index_dir), common.spacing_mm);
      icfg.seed = common.seed;
      const auto index = data::build_patch_index(corpus.images, corpus.masks, manifest, common.patch_size, icfg);
      data::save_index(index, index_dir / "index.tsv", index_dir / "manifest.tsv");
      print_counts(index);
    } else if (*train_cmd) {
      tcfg.target = target_of(target_name);
      tcfg.seed = common.seed;
      const arch::NetworkSpec base = network_spec(common);
      if (sweep) {
        std::vector<Dataset> keep;
        keep.reserve(2 * train::kSweepPatchSizes.size());
        const auto entries = train::sweep_patch_sizes(
            train::kSweepPatchSizes, base,
            [&](std::size_t n) {
              keep.push_back(load_dataset(train_dir, n, common.seed, common.spacing_mm));
              keep.push_back(load_dataset(val_dir, n, common.seed, common.spacing_mm));
              const Dataset& tr = keep[keep.size() - 2];
              const Dataset& va = keep.back();
              return train::SweepSources{
                  std::make_unique<train::IndexBatchSource>(tr.index, tr.corpus.images, tcfg.target),
                  std::make_unique<train::IndexBatchSource>(va.index, va.corpus.images, tcfg.target)};
            },
            tcfg);
        std::cout << "patch_size\tbest_val_loss\tbest_val_accuracy\tepochs\n";
        for (const auto& e : entries) {
          std::cout << e.patch_size << '\t' << e.best_val_loss << '\t' << e.best_val_accuracy << '\t'
                    << e.log.epochs.size() << '\n';
        }
        return 0;
      }
      const Dataset tr = load_dataset(train_dir, base.patch_size, common.seed, common.spacing_mm);
      const Dataset va = load_dataset(val_dir, base.patch_size, common.seed, common.spacing_mm);
      print_counts(tr.index);
      const auto result = train::train(base, tr.index, tr.corpus.images, va.index, va.corpus.images, tcfg,
                                       [](const train::EpochRecord& e) {
                                         std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss
                                                   << " val_loss " << e.val_loss << " val_acc " << e.val_accuracy
                                                   << " lr " << e.lr << std::endl;
                                         return true;
                                       });
      arch::save_weights(result.weights, output_path(weights_out));
      if (!log_out.empty()) train::write_log(result.log, output_path(log_out));
      std::cout << "best epoch " << result.log.best_epoch << " (" << result.log.stop_reason << "), weights in "
                << weights_out << '\n';
    } else if (*eval_cmd) {
      if (det_path.empty() && seg_path.empty()) throw std::invalid_argument("give --detector and/or --segmentator");
      ecfg.seed = common.seed;
      std::vector<train::ClassErrorTable> tables;
      for (const auto& [path, target] :
           {std::pair{det_path, data::Target::Detector}, std::pair{seg_path, data::Target::Segmentator}}) {
        if (path.empty()) continue;
        const auto weights = arch::load_weights(path);
        const Dataset ds = load_dataset(test_dir, weights.spec.patch_size, common.seed, common.spacing_mm);
        tables.push_back(train::evaluate_per_class(weights, ds.index, ds.corpus.images, target, ecfg));
      }
      std::cout << train::render_tables(tables);
    } else if (*infer_cmd) {
      const auto image = imaging::read_pgm(image_path, common.spacing_mm);
      const auto result = pipeline::run_pipeline(image, det_path, seg_path, common.patch_size, plcfg);
      const fs::path prefix = output_path(out_prefix);
      imaging::write_mask_pgm(result.segmentation.mask, prefix.string() + "_mask.pgm");
      write_text(prefix.string() + "_report.txt", imaging::format_report(result.report));
      imaging::write_ppm(pipeline::render_overlay(image, result.segmentation.mask, result.report),
                         prefix.string() + "_overlay.ppm");
      std::cout << imaging::format_report(result.report);
      std::cout << "tiles " << result.rois.tiles_evaluated << '/' << result.rois.tiles_total << ", rois "
                << result.rois.rois.size() << ", evaluations " << result.stats.evaluations() << ", "
                << result.stats.patches_per_second() << " patches/s\n";
    } else if (*tsne_cmd) {
      const auto weights = arch::load_weights(tsne_weights);
      const Dataset ds = load_dataset(tsne_dir, weights.spec.patch_size, common.seed, common.spacing_mm);
      const auto set = analysis::collect_embeddings(weights, ds.index, ds.corpus.images, target_of(target_name),
                                                    tsne_cap, common.seed);
      scfg.seed = common.seed;
      const auto projection = analysis::tsne_project(set, scfg);
      const fs::path prefix = output_path(out_prefix);
      write_text(prefix.string() + "_projection.tsv", analysis::format_projection(projection, set));
      write_text(prefix.string() + "_report.txt",
                 analysis::format_report(analysis::misclassification_report(set), set));
      std::cout << "embedded " << set.size() << " patches, KL " << projection.initial_kl << " -> "
                << projection.final_kl << '\n';
    }
  } catch (const pipeline::PipelineError& e) {
    std::cerr << "pipeline error in " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
