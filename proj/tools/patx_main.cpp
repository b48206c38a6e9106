// patx: pattern-explanation pipeline CLI.
//
// Subcommands cover every phase: synth-data, train-classifier, train-gan,
// attribute, baseline, evaluate, report, pipeline. Exit codes: 0 success,
// 2 configuration error, 3 runtime failure.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "patx/io.hpp"
#include "patx/kernels.hpp"
#include "patx/pipeline.hpp"
#include "patx/rng.hpp"

namespace fs = std::filesystem;
using namespace patx;

namespace {

struct CommonOpts {
  std::string config_file;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg = o.config_file.empty() ? default_run_config() : load_run_config(o.config_file);
  if (o.seed_given) {
    cfg.seed = o.seed;
    cfg.derive_phase_seeds();
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_file, "JSON run configuration file");
  cmd->add_option("--seed", o.seed, "global seed (overrides the config)")
      ->each([&o](const std::string&) { o.seed_given = true; });
  cmd->add_option("--out", o.out, "output directory");
}

int run(int argc, char** argv) {
  CLI::App app{"pattern explanation via score-guided generative image pairs"};
  app.require_subcommand(1);

  CommonOpts synth_o, cls_o, gan_o, attr_o, pipe_o;

  auto* cmd_synth = app.add_subcommand("synth-data", "generate the synthetic scene dataset");
  add_common(cmd_synth, synth_o);

  auto* cmd_cls = app.add_subcommand("train-classifier", "train the naturalness score network");
  std::string cls_data;
  add_common(cmd_cls, cls_o);
  cmd_cls->add_option("--data", cls_data, "dataset directory")->required();

  auto* cmd_gan = app.add_subcommand("train-gan", "train the pattern enhancement pair");
  std::string gan_data, gan_classifier;
  bool skip_pretrain = false;
  add_common(cmd_gan, gan_o);
  cmd_gan->add_option("--data", gan_data, "dataset directory")->required();
  cmd_gan->add_option("--classifier", gan_classifier, "classifier checkpoint")->required();
  cmd_gan->add_flag("--skip-pretrain", skip_pretrain, "skip the reconstruction pre-training");

  auto* cmd_attr = app.add_subcommand("attribute", "derive attribution maps from a trained pair");
  std::string attr_data, attr_gan;
  add_common(cmd_attr, attr_o);
  cmd_attr->add_option("--data", attr_data, "dataset directory")->required();
  cmd_attr->add_option("--gan", attr_gan, "gan checkpoint directory")->required();

  auto* cmd_base = app.add_subcommand("baseline", "occlusion or gradcam map for one image");
  std::string base_method, base_classifier, base_image, base_out;
  cmd_base->add_option("--method", base_method, "occlusion or gradcam")
      ->required()
      ->check(CLI::IsMember({"occlusion", "gradcam"}));
  cmd_base->add_option("--classifier", base_classifier, "classifier checkpoint")->required();
  cmd_base->add_option("--image", base_image, "sample (.pxs) or float image (.npy)")->required();
  cmd_base->add_option("--out", base_out, "output directory")->required();

  auto* cmd_eval = app.add_subcommand("evaluate", "IoU of maps against reference masks");
  std::string eval_maps, eval_data, eval_out = "report.csv";
  double eval_percentile = 80.0;
  std::vector<int> eval_classes = {1, 2};
  cmd_eval->add_option("--maps", eval_maps, "attribution maps directory")->required();
  cmd_eval->add_option("--data", eval_data, "dataset directory")->required();
  cmd_eval->add_option("--out", eval_out, "report CSV path");
  cmd_eval->add_option("--percentile", eval_percentile, "high-attribution percentile");
  cmd_eval->add_option("--classes", eval_classes, "reference class ids");

  auto* cmd_report = app.add_subcommand("report", "render a report CSV as a table");
  std::string report_in;
  cmd_report->add_option("--in", report_in, "report CSV path")->required();

  auto* cmd_pipe = app.add_subcommand("pipeline", "full run: synth through report");
  bool resume = false, pipe_skip_pretrain = false;
  add_common(cmd_pipe, pipe_o);
  cmd_pipe->add_flag("--resume", resume, "reuse existing artifacts in the run directory");
  cmd_pipe->add_flag("--skip-pretrain", pipe_skip_pretrain, "skip gan pre-training");

  CLI11_PARSE(app, argc, argv);
  std::printf("[patx] kernel backend: %s\n",
              kernels::backend_name(kernels::active_backend()));

  if (cmd_synth->parsed()) {
    RunConfig cfg = resolve_config(synth_o);
    const fs::path out = synth_o.out.empty() ? fs::path(cfg.out_dir) / "data"
                                             : fs::path(synth_o.out);
    const auto samples = data::generate_synthetic_dataset(cfg.synth);
    const auto split =
        data::split_dataset(samples, cfg.ratios, derive_seed(cfg.seed, "phase-split"));
    data::save_dataset(out, split, cfg.synth);
    std::printf("[patx] dataset written to %s (manifest hash %s)\n", out.string().c_str(),
                io::hex64(data::dataset_manifest_hash(out)).c_str());
    return 0;
  }

  if (cmd_cls->parsed()) {
    RunConfig cfg = resolve_config(cls_o);
    const fs::path ckpt = cls_o.out.empty() ? fs::path(cfg.out_dir) / "classifier" / "model.ckpt"
                                            : fs::path(cls_o.out);
    const auto split = data::load_dataset(cls_data);
    cls::Model model = cls::build_classifier(cfg.classifier, cfg.classifier.seed);
    const auto report = cls::train_classifier(model, split, cfg.classifier);
    nlohmann::json extra;
    extra["normalization_scale"] = 10000.0;
    extra["data_manifest_hash"] = io::hex64(data::dataset_manifest_hash(cls_data));
    extra["epochs_trained"] = report.epochs.size();
    extra["test_accuracy"] = report.test_accuracy;
    cls::save_classifier(ckpt, model, cfg.classifier, extra);
    std::printf("[patx] classifier saved to %s (test accuracy %.4f)\n", ckpt.string().c_str(),
                report.test_accuracy);
    return 0;
  }

  if (cmd_gan->parsed()) {
    RunConfig cfg = resolve_config(gan_o);
    cfg.gan.skip_pretrain = cfg.gan.skip_pretrain || skip_pretrain;
    const fs::path out = gan_o.out.empty() ? fs::path(cfg.out_dir) / "gan" : fs::path(gan_o.out);
    const auto split = data::load_dataset(gan_data);
    cls::Model classifier = cls::load_classifier(gan_classifier);
    classifier.freeze();
    gan::CycleGanPair pair =
        gan::make_cyclegan_pair(cfg.gan, cfg.classifier.input_channels, cfg.gan.seed);
    nlohmann::json extra;
    extra["classifier_checkpoint_hash"] = io::hex64(io::file_hash(gan_classifier));
    if (!cfg.gan.skip_pretrain) {
      const auto pre = gan::pretrain_cyclegan(pair, split, cfg.gan);
      extra["pretrain_recon_plus"] = pre.recon_plus;
      extra["pretrain_recon_minus"] = pre.recon_minus;
      std::printf("[patx] pretrain reconstruction: w+ %.4f, w- %.4f\n", pre.recon_plus,
                  pre.recon_minus);
    }
    gan::train_cyclegan(pair, classifier, split, cfg.gan);
    gan::save_gan(out, pair, cfg.gan, extra);
    std::printf("[patx] gan checkpoints saved to %s\n", out.string().c_str());
    return 0;
  }

  if (cmd_attr->parsed()) {
    RunConfig cfg = resolve_config(attr_o);
    pipeline::RunPaths paths = pipeline::layout(cfg.out_dir);
    paths.data_dir = attr_data;
    paths.gan_dir = attr_gan;
    if (!attr_o.out.empty()) paths.maps_dir = attr_o.out;
    pipeline::phase_attribute(cfg, paths);
    std::printf("[patx] attribution maps written to %s\n", paths.maps_dir.string().c_str());
    return 0;
  }

  if (cmd_base->parsed()) {
    cls::Model classifier = cls::load_classifier(base_classifier);
    classifier.freeze();
    data::Image image;
    std::string sample_id;
    if (fs::path(base_image).extension() == ".pxs") {
      const auto s = data::load_sample(base_image);
      image = s.image;
      sample_id = s.id;
    } else {
      image = io::npy_as_f32(io::load_npy(base_image));
      if (image.rank() != 3)
        throw std::invalid_argument("baseline: image must be C x H x W");
      sample_id = fs::path(base_image).stem().string();
    }
    RunConfig cfg = default_run_config();
    attr::AttributionMap map;
    if (base_method == "occlusion")
      map = baselines::occlusion_map(classifier, image, cfg.evaluation.occlusion);
    else
      map = baselines::gradcam(classifier, image);
    const fs::path stem = fs::path(base_out) / (sample_id + "__" + base_method);
    attr::save_attribution(fs::path(stem).concat(".npy"), map, base_method, sample_id,
                           cfg.evaluation.percentile);
    attr::save_overlay_png(fs::path(stem).concat(".png"), attr::overlay(image, map, 0.5f));
    std::printf("[patx] %s map written to %s.npy\n", base_method.c_str(),
                stem.string().c_str());
    return 0;
  }

  if (cmd_eval->parsed()) {
    const auto results =
        pipeline::evaluate_maps(eval_maps, eval_data, eval_classes, eval_percentile);
    const auto table = evalio::report_table(results, true);
    io::write_text(eval_out, table.csv);
    std::printf("%s", table.text.c_str());
    std::printf("[patx] report written to %s\n", eval_out.c_str());
    return 0;
  }

  if (cmd_report->parsed()) {
    const auto rows = evalio::parse_csv(io::read_text(report_in));
    std::printf("%s", evalio::render_rows_text(rows, true).c_str());
    return 0;
  }

  if (cmd_pipe->parsed()) {
    RunConfig cfg = resolve_config(pipe_o);
    cfg.gan.skip_pretrain = cfg.gan.skip_pretrain || pipe_skip_pretrain;
    pipeline::run_pipeline(cfg, resume);
    std::printf("[patx] pipeline run complete: %s\n", cfg.out_dir.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
