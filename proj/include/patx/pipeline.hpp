#pragma once

#include <filesystem>
#include <vector>

#include "patx/config.hpp"
#include "patx/evalio.hpp"

namespace patx::pipeline {

struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path config_file;
  std::filesystem::path data_dir;
  std::filesystem::path classifier_ckpt;
  std::filesystem::path gan_dir;
  std::filesystem::path maps_dir;
  std::filesystem::path report_csv;
  std::filesystem::path report_txt;
  std::filesystem::path run_manifest;
};

RunPaths layout(const std::filesystem::path& root);

// Individual phases; each reads its inputs from and writes its outputs to the
// run layout. They are also reused by the standalone CLI subcommands.
void phase_synth(const RunConfig& cfg, const RunPaths& paths);
void phase_classifier(const RunConfig& cfg, const RunPaths& paths);
void phase_gan(const RunConfig& cfg, const RunPaths& paths);
void phase_attribute(const RunConfig& cfg, const RunPaths& paths);
void phase_baselines(const RunConfig& cfg, const RunPaths& paths);
std::vector<evalio::EvalResult> phase_evaluate(const RunConfig& cfg, const RunPaths& paths);

/// Full run: synth -> classifier -> gan -> attribute -> baselines -> evaluate
/// -> report. With resume, phases whose artifacts already exist are loaded
/// instead of recomputed (a corrupt artifact aborts with its checksum error).
void run_pipeline(const RunConfig& cfg, bool resume = false);

/// Natural-class test samples selected for attribution/evaluation, sorted by
/// id and capped by cfg.evaluation.max_images.
std::vector<data::SamplePtr> evaluation_samples(const RunConfig& cfg,
                                                const data::DatasetSplit& split);

/// Standalone evaluation of a maps directory against a dataset directory.
std::vector<evalio::EvalResult> evaluate_maps(const std::filesystem::path& maps_dir,
                                              const std::filesystem::path& data_dir,
                                              const std::vector<int>& classes,
                                              double percentile);

}  // namespace patx::pipeline
