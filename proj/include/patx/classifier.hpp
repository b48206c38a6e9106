#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "patx/data.hpp"
#include "patx/models.hpp"

namespace patx::cls {

struct ClassifierConfig {
  int input_channels = 3;
  int base_width = 8;
  int depth = 4;
  double max_lr = 0.01;
  double weight_decay = 1e-4;
  int batch_size = 32;
  int epochs = 12;
  double cutmix_probability = 0.5;
  double momentum = 0.0;  // plain gradient descent unless raised
  double onecycle_warmup = 0.3;
  double onecycle_div_factor = 25.0;
  double onecycle_final_div = 1e4;
  std::uint64_t seed = 0;

  void validate() const;
  ScoreNetConfig arch() const { return {input_channels, base_width, depth}; }
};

struct EpochStats {
  double train_loss = 0, train_accuracy = 0, val_loss = 0, val_accuracy = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double test_accuracy = -1.0;  // -1 when the split has no test set
  std::vector<double> lr_trace;  // one entry per optimizer step
  long cutmix_batches = 0;
  long fractional_label_batches = 0;
};

using Model = ScoreNet<float>;

Model build_classifier(const ClassifierConfig& config, std::uint64_t seed);

/// One-cycle schedule: linear ramp from max_lr/div_factor to max_lr over the
/// first warmup fraction of steps, cosine anneal to max_lr/final_div after.
double onecycle_lr(long step, long total_steps, double max_lr, double div_factor = 25.0,
                   double final_div = 1e4, double warmup_frac = 0.3);

/// Scores one C x H x W image; deterministic, differentiable via the model's
/// backward pass.
float classify(Model& model, const data::Image& image);

/// Scores a batch of samples (eval path); returns one score per sample.
std::vector<float> classify_samples(Model& model, const std::vector<data::SamplePtr>& samples,
                                    int batch_size = 64);

TrainReport train_classifier(Model& model, const data::DatasetSplit& split,
                             const ClassifierConfig& config);

/// Fraction of pure-label samples classified correctly at the threshold.
/// Fractional labels are rejected (accuracy undefined).
double evaluate_accuracy(Model& model, const std::vector<data::SamplePtr>& samples,
                         double threshold = 0.5);

void save_classifier(const std::filesystem::path& file, Model& model,
                     const ClassifierConfig& config,
                     const nlohmann::json& extra = nlohmann::json::object());
Model load_classifier(const std::filesystem::path& file, ClassifierConfig* config_out = nullptr);

/// Assembles samples into an N x C x H x W batch tensor.
Tensor<float> stack_images(const std::vector<data::SamplePtr>& samples, std::size_t begin,
                           std::size_t end);

}  // namespace patx::cls
