#include "patx/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "patx/io.hpp"
#include "patx/rng.hpp"

namespace patx::cls {

namespace {

constexpr double kProbEps = 1e-7;

double bce(double y, double s) {
  s = std::clamp(s, kProbEps, 1.0 - kProbEps);
  return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}

double bce_grad(double y, double s) {
  s = std::clamp(s, kProbEps, 1.0 - kProbEps);
  return -y / s + (1.0 - y) / (1.0 - s);
}

}  // namespace

void ClassifierConfig::validate() const {
  if (input_channels < 1) throw std::invalid_argument("classifier: input_channels must be >= 1");
  if (base_width < 1 || depth < 1)
    throw std::invalid_argument("classifier: base_width and depth must be >= 1");
  if (max_lr <= 0) throw std::invalid_argument("classifier: max_lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("classifier: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("classifier: epochs must be >= 0");
  if (cutmix_probability < 0 || cutmix_probability > 1)
    throw std::invalid_argument("classifier: cutmix_probability must be in [0,1]");
  if (weight_decay < 0) throw std::invalid_argument("classifier: weight_decay must be >= 0");
  if (onecycle_warmup <= 0 || onecycle_warmup >= 1)
    throw std::invalid_argument("classifier: onecycle_warmup must be in (0,1)");
}

Model build_classifier(const ClassifierConfig& config, std::uint64_t seed) {
  config.validate();
  return Model(config.arch(), seed);
}

double onecycle_lr(long step, long total_steps, double max_lr, double div_factor,
                   double final_div, double warmup_frac) {
  if (total_steps < 1) throw std::invalid_argument("onecycle_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("onecycle_lr: step outside [0, total_steps]");
  const auto warmup = static_cast<long>(std::floor(warmup_frac * static_cast<double>(total_steps)));
  const double start = max_lr / div_factor;
  const double end = max_lr / final_div;
  if (step <= warmup) {
    if (warmup == 0) return max_lr;
    const double t = static_cast<double>(step) / static_cast<double>(warmup);
    return start + (max_lr - start) * t;
  }
  const double t =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return end + (max_lr - end) * 0.5 * (1.0 + std::cos(M_PI * t));
}

float classify(Model& model, const data::Image& image) {
  if (image.rank() != 3) throw std::invalid_argument("classify: expected C x H x W image");
  Tensor<float> batch({1, image.dim(0), image.dim(1), image.dim(2)});
  std::memcpy(batch.data(), image.data(), image.size() * sizeof(float));
  return model.forward(batch)[0];
}

Tensor<float> stack_images(const std::vector<data::SamplePtr>& samples, std::size_t begin,
                           std::size_t end) {
  const auto& first = samples.at(begin)->image;
  const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
  Tensor<float> batch({static_cast<int>(end - begin), c, h, w});
  for (std::size_t i = begin; i < end; ++i) {
    const auto& img = samples[i]->image;
    if (!img.same_shape(first))
      throw std::invalid_argument("stack_images: inconsistent sample shapes");
    std::memcpy(batch.data() + (i - begin) * img.size(), img.data(),
                img.size() * sizeof(float));
  }
  return batch;
}

std::vector<float> classify_samples(Model& model, const std::vector<data::SamplePtr>& samples,
                                    int batch_size) {
  std::vector<float> scores;
  scores.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t j = std::min(samples.size(), i + static_cast<std::size_t>(batch_size));
    Tensor<float> batch = stack_images(samples, i, j);
    Tensor<float> s = model.forward(batch);
    for (std::size_t k = 0; k < s.size(); ++k) scores.push_back(s[k]);
  }
  return scores;
}

double evaluate_accuracy(Model& model, const std::vector<data::SamplePtr>& samples,
                         double threshold) {
  if (samples.empty()) throw std::invalid_argument("evaluate_accuracy: empty sample list");
  for (const auto& s : samples)
    if (s->label != 0.0f && s->label != 1.0f)
      throw std::invalid_argument("evaluate_accuracy: sample " + s->id +
                                  " has fractional label; accuracy undefined");
  const std::vector<float> scores = classify_samples(model, samples);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = samples[i]->label == 1.0f;
    if (pred == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace {

struct EvalLossAcc {
  double loss = 0, acc = 0;
};

EvalLossAcc eval_loss_acc(Model& model, const std::vector<data::SamplePtr>& samples) {
  const std::vector<float> scores = classify_samples(model, samples);
  EvalLossAcc out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.loss += bce(samples[i]->label, scores[i]);
    if ((scores[i] >= 0.5f) == (samples[i]->label == 1.0f)) ++correct;
  }
  out.loss /= static_cast<double>(samples.size());
  out.acc = static_cast<double>(correct) / static_cast<double>(samples.size());
  return out;
}

}  // namespace

TrainReport train_classifier(Model& model, const data::DatasetSplit& split,
                             const ClassifierConfig& config) {
  config.validate();
  if (split.train.empty() || split.validation.empty())
    throw std::invalid_argument("train_classifier: train and validation sets must be nonempty");

  TrainReport report;
  if (config.epochs == 0) return report;

  const std::size_t n = split.train.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * config.epochs;

  auto rng = make_rng(derive_seed(config.seed, "classifier-train"));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  nn::SgdOptimizer<float> opt(model.params(), static_cast<float>(config.weight_decay),
                              static_cast<float>(config.momentum));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    long batches = 0;
    for (std::size_t off = 0; off < n; off += batch) {
      const std::size_t take = std::min(batch, n - off);
      std::vector<data::SamplePtr> items;
      items.reserve(take);
      for (std::size_t i = 0; i < take; ++i) items.push_back(split.train[order[off + i]]);

      std::vector<float> labels(take);
      for (std::size_t i = 0; i < take; ++i) labels[i] = items[i]->label;

      Tensor<float> xb;
      const bool mix = take > 1 && coin(rng) < config.cutmix_probability;
      if (mix) {
        ++report.cutmix_batches;
        std::vector<std::size_t> partner(take);
        std::iota(partner.begin(), partner.end(), 0);
        std::shuffle(partner.begin(), partner.end(), rng);
        std::vector<data::SamplePtr> mixed;
        mixed.reserve(take);
        bool any_fractional = false;
        for (std::size_t i = 0; i < take; ++i) {
          auto m = std::make_shared<data::SceneSample>(
              data::cutmix(*items[i], *items[partner[i]], rng));
          labels[i] = m->label;
          if (m->label != 0.0f && m->label != 1.0f) any_fractional = true;
          mixed.push_back(std::move(m));
        }
        if (any_fractional) ++report.fractional_label_batches;
        xb = stack_images(mixed, 0, take);
      } else {
        xb = stack_images(items, 0, take);
      }

      Tensor<float> scores = model.forward(xb);
      double loss = 0;
      Tensor<float> gs({static_cast<int>(take)});
      for (std::size_t i = 0; i < take; ++i) {
        loss += bce(labels[i], scores[i]);
        gs[i] = static_cast<float>(bce_grad(labels[i], scores[i]) /
                                   static_cast<double>(take));
      }
      loss /= static_cast<double>(take);
      epoch_loss += loss;
      ++batches;

      opt.zero_grads();
      model.backward(gs);
      const double lr = onecycle_lr(step, total_steps, config.max_lr,
                                    config.onecycle_div_factor, config.onecycle_final_div,
                                    config.onecycle_warmup);
      report.lr_trace.push_back(lr);
      opt.step(static_cast<float>(lr));
      ++step;
    }

    EpochStats st;
    st.train_loss = epoch_loss / static_cast<double>(batches);
    st.train_accuracy = evaluate_accuracy(model, split.train);
    const EvalLossAcc val = eval_loss_acc(model, split.validation);
    st.val_loss = val.loss;
    st.val_accuracy = val.acc;
    report.epochs.push_back(st);
    std::printf("[classifier] epoch %2d/%d  train_loss %.4f  train_acc %.4f  val_loss %.4f  val_acc %.4f\n",
                epoch + 1, config.epochs, st.train_loss, st.train_accuracy, st.val_loss,
                st.val_accuracy);
    std::fflush(stdout);
  }

  if (!split.test.empty()) report.test_accuracy = evaluate_accuracy(model, split.test);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const ClassifierConfig& c) {
  nlohmann::json j;
  j["input_channels"] = c.input_channels;
  j["base_width"] = c.base_width;
  j["depth"] = c.depth;
  j["max_lr"] = c.max_lr;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["cutmix_probability"] = c.cutmix_probability;
  j["momentum"] = c.momentum;
  j["onecycle_warmup"] = c.onecycle_warmup;
  j["onecycle_div_factor"] = c.onecycle_div_factor;
  j["onecycle_final_div"] = c.onecycle_final_div;
  j["seed"] = c.seed;
  return j;
}

ClassifierConfig config_from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  c.input_channels = j.at("input_channels").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.depth = j.at("depth").get<int>();
  c.max_lr = j.at("max_lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.cutmix_probability = j.at("cutmix_probability").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.onecycle_warmup = j.at("onecycle_warmup").get<double>();
  c.onecycle_div_factor = j.at("onecycle_div_factor").get<double>();
  c.onecycle_final_div = j.at("onecycle_final_div").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_classifier(const std::filesystem::path& file, Model& model,
                     const ClassifierConfig& config, const nlohmann::json& extra) {
  nlohmann::json manifest;
  manifest["kind"] = "classifier";
  manifest["config"] = config_to_json(config);
  manifest["seed"] = config.seed;
  manifest["param_checksum"] = model.checksum();
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();

  std::vector<io::NamedTensor> tensors;
  int idx = 0;
  for (const auto* p : model.params()) {
    io::NamedTensor t;
    t.name = "p" + std::to_string(idx++) + "." + p->name;
    t.shape = p->value.shape();
    t.data.assign(p->value.data(), p->value.data() + p->value.size());
    tensors.push_back(std::move(t));
  }
  io::save_checkpoint(file, manifest, tensors);
}

Model load_classifier(const std::filesystem::path& file, ClassifierConfig* config_out) {
  const io::Checkpoint ck = io::load_checkpoint(file);
  if (ck.manifest.at("kind").get<std::string>() != "classifier")
    throw std::runtime_error("not a classifier checkpoint: " + file.string());
  const ClassifierConfig config = config_from_json(ck.manifest.at("config"));
  Model model = build_classifier(config, config.seed);
  auto& params = model.params();
  if (params.size() != ck.tensors.size())
    throw std::runtime_error("checkpoint tensor count mismatch: " + file.string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != ck.tensors[i].shape)
      throw std::runtime_error("checkpoint tensor shape mismatch at " + ck.tensors[i].name +
                               ": " + file.string());
    std::copy(ck.tensors[i].data.begin(), ck.tensors[i].data.end(), params[i]->value.data());
  }
  if (config_out) *config_out = config;
  return model;
}

}  // namespace patx::cls
