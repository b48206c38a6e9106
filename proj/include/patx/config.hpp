#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "patx/attribution.hpp"
#include "patx/baselines.hpp"
#include "patx/classifier.hpp"
#include "patx/data.hpp"
#include "patx/ganx.hpp"

namespace patx {

struct AttributionRunConfig {
  attr::Mode mode = attr::Mode::pair_diff;
  double percentile = 80.0;
  double overlay_alpha = 0.5;
};

struct EvaluationRunConfig {
  double percentile = 80.0;
  std::vector<int> classes = {1, 2};  // wetland-like, bare-land-like
  int max_images = 0;                 // cap on evaluated test images; 0 = all
  baselines::OcclusionConfig occlusion;
};

/// Whole-pipeline configuration. Phase seeds derive from the global seed via
/// a documented hash unless a section pins its own seed explicitly.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  std::array<double, 3> ratios = {0.7, 0.15, 0.15};
  data::SynthConfig synth;
  cls::ClassifierConfig classifier;
  gan::GanTrainConfig gan;
  AttributionRunConfig attribution;
  EvaluationRunConfig evaluation;

  void validate() const;
  void derive_phase_seeds();  // fills synth/classifier/gan seeds from `seed`
};

/// Strict parse: unknown keys anywhere are rejected.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& file);
nlohmann::json run_config_to_json(const RunConfig& c);

/// Desk-scale defaults used when no config file is given.
RunConfig default_run_config();

}  // namespace patx
