#include "patx/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "patx/io.hpp"
#include "patx/rng.hpp"

namespace patx::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

RunPaths layout(const fs::path& root) {
  RunPaths p;
  p.root = root;
  p.config_file = root / "config.json";
  p.data_dir = root / "data";
  p.classifier_ckpt = root / "classifier" / "model.ckpt";
  p.gan_dir = root / "gan";
  p.maps_dir = root / "maps";
  p.report_csv = root / "report.csv";
  p.report_txt = root / "report.txt";
  p.run_manifest = root / "run_manifest.json";
  return p;
}

namespace {

struct PhaseTimer {
  const char* name;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  explicit PhaseTimer(const char* n) : name(n) {
    std::printf("[pipeline] phase %s started\n", name);
    std::fflush(stdout);
  }
  ~PhaseTimer() {
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[pipeline] phase %s done in %.1fs\n", name, sec);
    std::fflush(stdout);
  }
};

std::string map_stem(const std::string& sample_id, const std::string& method,
                     const std::string& mode) {
  return sample_id + "__" + method + (mode == "-" ? "" : "__" + mode);
}

}  // namespace

std::vector<data::SamplePtr> evaluation_samples(const RunConfig& cfg,
                                                const data::DatasetSplit& split) {
  std::vector<data::SamplePtr> out;
  for (const auto& s : split.test)
    if (s->label == 1.0f) out.push_back(s);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a->id < b->id; });
  if (cfg.evaluation.max_images > 0 &&
      static_cast<int>(out.size()) > cfg.evaluation.max_images)
    out.resize(static_cast<std::size_t>(cfg.evaluation.max_images));
  return out;
}

void phase_synth(const RunConfig& cfg, const RunPaths& paths) {
  PhaseTimer timer("synth");
  const auto samples = data::generate_synthetic_dataset(cfg.synth);
  const auto split =
      data::split_dataset(samples, cfg.ratios, derive_seed(cfg.seed, "phase-split"));
  data::save_dataset(paths.data_dir, split, cfg.synth);
}

void phase_classifier(const RunConfig& cfg, const RunPaths& paths) {
  PhaseTimer timer("classifier");
  const auto split = data::load_dataset(paths.data_dir);
  cls::Model model = cls::build_classifier(cfg.classifier, cfg.classifier.seed);
  const cls::TrainReport report = cls::train_classifier(model, split, cfg.classifier);

  json extra;
  extra["normalization_scale"] = 10000.0;
  extra["data_manifest_hash"] = io::hex64(data::dataset_manifest_hash(paths.data_dir));
  extra["epochs_trained"] = report.epochs.size();
  if (!report.epochs.empty()) {
    extra["final_val_accuracy"] = report.epochs.back().val_accuracy;
    extra["test_accuracy"] = report.test_accuracy;
  }
  cls::save_classifier(paths.classifier_ckpt, model, cfg.classifier, extra);
}

void phase_gan(const RunConfig& cfg, const RunPaths& paths) {
  PhaseTimer timer("gan");
  const auto split = data::load_dataset(paths.data_dir);
  cls::Model classifier = cls::load_classifier(paths.classifier_ckpt);
  classifier.freeze();

  gan::CycleGanPair pair = gan::make_cyclegan_pair(cfg.gan, cfg.classifier.input_channels,
                                                   cfg.gan.seed);
  json extra;
  extra["classifier_checkpoint_hash"] = io::hex64(io::file_hash(paths.classifier_ckpt));
  if (!cfg.gan.skip_pretrain) {
    const auto pre = gan::pretrain_cyclegan(pair, split, cfg.gan);
    extra["pretrain_recon_plus"] = pre.recon_plus;
    extra["pretrain_recon_minus"] = pre.recon_minus;
  } else {
    pair.pretrained = false;
  }
  const auto res = gan::train_cyclegan(pair, classifier, split, cfg.gan);
  if (!res.epoch_max.empty()) {
    extra["final_loss_max_total"] = res.epoch_max.back().total;
    extra["final_loss_min_total"] = res.epoch_min.back().total;
  }
  gan::save_gan(paths.gan_dir, pair, cfg.gan, extra);
}

void phase_attribute(const RunConfig& cfg, const RunPaths& paths) {
  PhaseTimer timer("attribute");
  const auto split = data::load_dataset(paths.data_dir);
  gan::CycleGanPair pair = gan::load_gan(paths.gan_dir);
  const auto samples = evaluation_samples(cfg, split);
  fs::create_directories(paths.maps_dir);

  for (const auto& s : samples) {
    const auto [x_max, x_min] = gan::generate_pair(pair, s->image);

    const attr::AttributionMap pair_map = attr::attribution_from_pair(x_max, x_min);
    attr::save_attribution(paths.maps_dir / (map_stem(s->id, "ours", "pair-diff") + ".npy"),
                           pair_map, "ours", s->id, cfg.attribution.percentile);
    // input-diff mode uses the pattern-minimized image: the difference shows
    // what had to be suppressed to lower the score
    const attr::AttributionMap input_map = attr::attribution_vs_input(s->image, x_min);
    attr::save_attribution(paths.maps_dir / (map_stem(s->id, "ours", "input-diff") + ".npy"),
                           input_map, "ours", s->id, cfg.attribution.percentile);

    const auto& primary =
        cfg.attribution.mode == attr::Mode::pair_diff ? pair_map : input_map;
    attr::save_overlay_png(
        paths.maps_dir / (map_stem(s->id, "ours", mode_name(cfg.attribution.mode)) + ".png"),
        attr::overlay(s->image, primary, static_cast<float>(cfg.attribution.overlay_alpha)));
  }
}

void phase_baselines(const RunConfig& cfg, const RunPaths& paths) {
  PhaseTimer timer("baselines");
  const auto split = data::load_dataset(paths.data_dir);
  cls::Model classifier = cls::load_classifier(paths.classifier_ckpt);
  classifier.freeze();
  const auto samples = evaluation_samples(cfg, split);
  fs::create_directories(paths.maps_dir);

  for (const auto& s : samples) {
    const auto occ = baselines::occlusion_map(classifier, s->image, cfg.evaluation.occlusion);
    attr::save_attribution(paths.maps_dir / (map_stem(s->id, "occlusion", "-") + ".npy"), occ,
                           "occlusion", s->id, cfg.evaluation.percentile);
    const auto cam = baselines::gradcam(classifier, s->image);
    attr::save_attribution(paths.maps_dir / (map_stem(s->id, "gradcam", "-") + ".npy"), cam,
                           "gradcam", s->id, cfg.evaluation.percentile);
  }
}

namespace {

std::vector<evalio::EvalResult> evaluate_maps_impl(const fs::path& maps_dir,
                                                   const fs::path& data_dir,
                                                   const std::vector<int>& classes,
                                                   double percentile) {
  // sample id -> file, from the dataset manifest (all splits)
  const json manifest = io::read_json(data_dir / "manifest.json");
  std::map<std::string, fs::path> sample_files;
  for (const char* split : {"train", "val", "test"})
    for (const auto& e : manifest.at("splits").at(split))
      sample_files[e.at("id").get<std::string>()] = data_dir / e.at("file").get<std::string>();

  std::vector<fs::path> map_files;
  for (const auto& entry : fs::directory_iterator(maps_dir))
    if (entry.path().extension() == ".npy") map_files.push_back(entry.path());
  std::sort(map_files.begin(), map_files.end());
  if (map_files.empty())
    throw std::runtime_error("no attribution maps found in " + maps_dir.string());

  // group IoUs by (method, mode); keep insertion order deterministic
  std::map<std::pair<std::string, std::string>, evalio::EvalResult> grouped;
  for (const auto& file : map_files) {
    std::string method, sample_id;
    const attr::AttributionMap map = attr::load_attribution(file, &method, &sample_id);
    const auto it = sample_files.find(sample_id);
    if (it == sample_files.end())
      throw std::runtime_error("map " + file.string() + " references unknown sample id " +
                               sample_id);
    const data::SceneSample sample = data::load_sample(it->second);
    const double v = evalio::evaluate_attribution(map, sample, classes, percentile);
    const std::string mode = method == "ours" ? attr::mode_name(map.mode) : "-";
    auto& res = grouped[{method, mode}];
    if (res.per_image_iou.empty()) {
      res.method = method;
      res.mode = mode;
      res.percentile = percentile;
      res.classes = classes;
    }
    res.per_image_iou.push_back(v);
  }

  // fixed presentation order: ours first, then baselines alphabetically
  std::vector<evalio::EvalResult> out;
  for (const auto& key : {std::pair<std::string, std::string>{"ours", "pair-diff"},
                          {"ours", "input-diff"}}) {
    auto it = grouped.find(key);
    if (it != grouped.end()) {
      out.push_back(it->second);
      grouped.erase(it);
    }
  }
  for (auto& [key, res] : grouped) out.push_back(res);
  return out;
}

}  // namespace

std::vector<evalio::EvalResult> evaluate_maps(const fs::path& maps_dir, const fs::path& data_dir,
                                              const std::vector<int>& classes,
                                              double percentile) {
  return evaluate_maps_impl(maps_dir, data_dir, classes, percentile);
}

std::vector<evalio::EvalResult> phase_evaluate(const RunConfig& cfg, const RunPaths& paths) {
  PhaseTimer timer("evaluate");
  const auto results = evaluate_maps_impl(paths.maps_dir, paths.data_dir,
                                          cfg.evaluation.classes, cfg.evaluation.percentile);
  const evalio::ReportTable table = evalio::report_table(results, true);
  io::write_text(paths.report_csv, table.csv);
  io::write_text(paths.report_txt, table.text);
  std::printf("%s", table.text.c_str());
  std::fflush(stdout);
  return results;
}

void run_pipeline(const RunConfig& cfg, bool resume) {
  const RunPaths paths = layout(cfg.out_dir);
  fs::create_directories(paths.root);
  io::write_json(paths.config_file, run_config_to_json(cfg));

  auto guard = [](const char* phase, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("pipeline phase '") + phase + "' failed: " +
                               e.what());
    }
  };

  guard("synth", [&] {
    if (resume && fs::exists(paths.data_dir / "manifest.json")) {
      std::printf("[pipeline] resume: dataset already present, skipping synth\n");
      return;
    }
    phase_synth(cfg, paths);
  });
  guard("classifier", [&] {
    if (resume && fs::exists(paths.classifier_ckpt)) {
      cls::load_classifier(paths.classifier_ckpt);  // verifies the checksum
      std::printf("[pipeline] resume: classifier checkpoint verified, skipping training\n");
      return;
    }
    phase_classifier(cfg, paths);
  });
  guard("gan", [&] {
    if (resume && fs::exists(paths.gan_dir / "manifest.json")) {
      gan::load_gan(paths.gan_dir);
      std::printf("[pipeline] resume: gan checkpoints verified, skipping training\n");
      return;
    }
    phase_gan(cfg, paths);
  });
  guard("attribute", [&] { phase_attribute(cfg, paths); });
  guard("baselines", [&] { phase_baselines(cfg, paths); });
  guard("evaluate", [&] { phase_evaluate(cfg, paths); });

  // run manifest: every artifact with its content hash
  guard("manifest", [&] {
    json artifacts;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(paths.root))
      if (entry.is_regular_file() && entry.path() != paths.run_manifest)
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      artifacts[fs::relative(f, paths.root).generic_string()] =
          io::hex64(io::file_hash(f));
    json m;
    m["config"] = run_config_to_json(cfg);
    m["artifacts"] = artifacts;
    io::write_json(paths.run_manifest, m);
  });
}

}  // namespace patx::pipeline
