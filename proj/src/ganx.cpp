#include "patx/ganx.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "patx/io.hpp"
#include "patx/rng.hpp"

namespace patx::gan {

namespace fs = std::filesystem;
using nlohmann::json;

void GanTrainConfig::validate() const {
  if (lambda_am < 0) throw std::invalid_argument("gan: lambda_am must be >= 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    throw std::invalid_argument("gan: adam betas must lie in [0,1)");
  if (lr <= 0) throw std::invalid_argument("gan: learning rate must be positive");
  if (pretrain_epochs < 0 || main_epochs < 0)
    throw std::invalid_argument("gan: epoch counts must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("gan: batch_size must be >= 1");
  if (ngf < 1 || ndf < 1 || n_res < 1)
    throw std::invalid_argument("gan: ngf, ndf and n_res must be >= 1");
  if (max_train_images < 0) throw std::invalid_argument("gan: max_train_images must be >= 0");
}

CycleGanPair make_cyclegan_pair(const GanTrainConfig& config, int in_channels,
                                std::uint64_t seed) {
  config.validate();
  CycleGanPair pair;
  const GeneratorConfig gcfg{in_channels, config.ngf, config.n_res};
  const DiscriminatorConfig dcfg{in_channels, config.ndf, default_patchgan_stack()};
  pair.w_plus = std::make_unique<Generator<float>>(gcfg, Polarity::maximizer,
                                                   derive_seed(seed, "gan-w-plus"));
  pair.w_minus = std::make_unique<Generator<float>>(gcfg, Polarity::minimizer,
                                                    derive_seed(seed, "gan-w-minus"));
  pair.d_plus = std::make_unique<PatchDiscriminator<float>>(dcfg, Polarity::maximizer,
                                                            derive_seed(seed, "gan-d-plus"));
  pair.d_minus = std::make_unique<PatchDiscriminator<float>>(dcfg, Polarity::minimizer,
                                                             derive_seed(seed, "gan-d-minus"));
  return pair;
}

std::vector<data::SamplePtr> natural_subset(const std::vector<data::SamplePtr>& samples,
                                            int cap) {
  std::vector<data::SamplePtr> out;
  for (const auto& s : samples)
    if (s->label == 1.0f) out.push_back(s);
  if (cap > 0 && static_cast<int>(out.size()) > cap) out.resize(static_cast<std::size_t>(cap));
  return out;
}

std::pair<data::Image, data::Image> generate_pair(CycleGanPair& pair, const data::Image& x) {
  if (x.rank() != 3) throw std::invalid_argument("generate_pair: expected C x H x W image");
  Tensor<float> batch({1, x.dim(0), x.dim(1), x.dim(2)});
  std::memcpy(batch.data(), x.data(), x.size() * sizeof(float));
  Tensor<float> max_b = pair.w_plus->forward(batch);
  Tensor<float> min_b = pair.w_minus->forward(batch);
  data::Image x_max(x.shape()), x_min(x.shape());
  std::memcpy(x_max.data(), max_b.data(), x.size() * sizeof(float));
  std::memcpy(x_min.data(), min_b.data(), x.size() * sizeof(float));
  return {std::move(x_max), std::move(x_min)};
}

double mean_reconstruction_error(Generator<float>& g,
                                 const std::vector<data::SamplePtr>& samples) {
  if (samples.empty())
    throw std::invalid_argument("mean_reconstruction_error: empty sample list");
  double total = 0;
  for (const auto& s : samples) {
    Tensor<float> batch({1, s->image.dim(0), s->image.dim(1), s->image.dim(2)});
    std::memcpy(batch.data(), s->image.data(), s->image.size() * sizeof(float));
    Tensor<float> y = g.forward(batch);
    Tensor<float> img(batch.shape());
    std::memcpy(img.data(), s->image.data(), s->image.size() * sizeof(float));
    total += static_cast<double>(sim_loss(img, y));
  }
  return total / static_cast<double>(samples.size());
}

namespace {

struct DiscStepResult {
  double loss = 0;
};

// One discriminator update: bce(1, d(real)) + bce(0, d(fake)).
DiscStepResult disc_step(PatchDiscriminator<float>& d, nn::AdamOptimizer<float>& opt,
                         const Tensor<float>& real, const Tensor<float>& fake) {
  opt.zero_grads();
  DiscStepResult out;

  Tensor<float> pr = d.forward(real);
  Tensor<float> gr(pr.shape());
  const auto nr = static_cast<float>(pr.size());
  for (std::size_t i = 0; i < pr.size(); ++i) {
    out.loss += static_cast<double>(bce_loss(1, pr[i]));
    gr[i] = bce_loss_grad(1, pr[i]) / nr;
  }
  out.loss /= static_cast<double>(pr.size());
  d.backward(gr);

  Tensor<float> pf = d.forward(fake);
  Tensor<float> gf(pf.shape());
  const auto nf = static_cast<float>(pf.size());
  double fake_loss = 0;
  for (std::size_t i = 0; i < pf.size(); ++i) {
    fake_loss += static_cast<double>(bce_loss(0, pf[i]));
    gf[i] = bce_loss_grad(0, pf[i]) / nf;
  }
  out.loss += fake_loss / static_cast<double>(pf.size());
  d.backward(gf);

  opt.step();
  return out;
}

struct Trainer {
  CycleGanPair& pair;
  cls::Model* classifier;
  GanTrainConfig cfg;
  nn::AdamOptimizer<float> opt_g, opt_dp, opt_dm;
  std::mt19937_64 rng;

  Trainer(CycleGanPair& p, cls::Model* c, const GanTrainConfig& config, std::uint64_t seed)
      : pair(p), classifier(c), cfg(config),
        opt_g(
            [&p] {
              auto ps = p.w_plus->params();
              auto pm = p.w_minus->params();
              ps.insert(ps.end(), pm.begin(), pm.end());
              return ps;
            }(),
            static_cast<float>(config.lr), static_cast<float>(config.adam_beta1),
            static_cast<float>(config.adam_beta2)),
        opt_dp(p.d_plus->params(), static_cast<float>(config.lr),
               static_cast<float>(config.adam_beta1), static_cast<float>(config.adam_beta2)),
        opt_dm(p.d_minus->params(), static_cast<float>(config.lr),
               static_cast<float>(config.adam_beta1), static_cast<float>(config.adam_beta2)),
        rng(make_rng(seed)) {}

  // Runs `epochs` epochs over the natural training images; fills the epoch
  // trace vectors. Checks loss finiteness every step.
  template <typename MaxTrace, typename DTrace>
  void run(const std::vector<data::SamplePtr>& train, int epochs, const char* phase,
           MaxTrace& trace_max, MaxTrace& trace_min, DTrace& trace_dp, DTrace& trace_dm) {
    const std::size_t n = train.size();
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      LossBreakdown mean_max, mean_min;
      double mean_dp = 0, mean_dm = 0;
      long batches = 0;

      for (std::size_t off = 0; off < n; off += batch) {
        const std::size_t take = std::min(batch, n - off);
        const auto& first = train[order[off]]->image;
        Tensor<float> xb({static_cast<int>(take), first.dim(0), first.dim(1), first.dim(2)});
        for (std::size_t i = 0; i < take; ++i) {
          const auto& img = train[order[off + i]]->image;
          std::memcpy(xb.data() + i * img.size(), img.data(), img.size() * sizeof(float));
        }

        // generator update (both polarities, one Adam step)
        opt_g.zero_grads();
        const LossBreakdown lb_max = generator_loss<float>(
            xb, 1, *pair.w_plus, *pair.w_minus, *pair.d_plus, classifier, cfg, true);
        const LossBreakdown lb_min = generator_loss<float>(
            xb, 0, *pair.w_minus, *pair.w_plus, *pair.d_minus, classifier, cfg, true);
        opt_g.step();
        if (!std::isfinite(lb_max.total) || !std::isfinite(lb_min.total))
          throw std::runtime_error("gan training diverged: non-finite generator loss");

        // discriminator updates on detached fakes
        Tensor<float> fake_plus = pair.w_plus->forward(xb);
        Tensor<float> fake_minus = pair.w_minus->forward(xb);
        const double dl_p = disc_step(*pair.d_plus, opt_dp, xb, fake_plus).loss;
        const double dl_m = disc_step(*pair.d_minus, opt_dm, xb, fake_minus).loss;
        if (!std::isfinite(dl_p) || !std::isfinite(dl_m))
          throw std::runtime_error("gan training diverged: non-finite discriminator loss");

        mean_max.sim += lb_max.sim;
        mean_max.cyc += lb_max.cyc;
        mean_max.adv += lb_max.adv;
        mean_max.am += lb_max.am;
        mean_max.total += lb_max.total;
        mean_min.sim += lb_min.sim;
        mean_min.cyc += lb_min.cyc;
        mean_min.adv += lb_min.adv;
        mean_min.am += lb_min.am;
        mean_min.total += lb_min.total;
        mean_dp += dl_p;
        mean_dm += dl_m;
        ++batches;
      }

      const auto inv = 1.0 / static_cast<double>(batches);
      mean_max.sim *= inv;
      mean_max.cyc *= inv;
      mean_max.adv *= inv;
      mean_max.am *= inv;
      mean_max.total *= inv;
      mean_max.polarity = Polarity::maximizer;
      mean_min.sim *= inv;
      mean_min.cyc *= inv;
      mean_min.adv *= inv;
      mean_min.am *= inv;
      mean_min.total *= inv;
      mean_min.polarity = Polarity::minimizer;
      trace_max.push_back(mean_max);
      trace_min.push_back(mean_min);
      trace_dp.push_back(mean_dp * inv);
      trace_dm.push_back(mean_dm * inv);
      std::printf(
          "[gan/%s] epoch %2d/%d  max(sim %.4f cyc %.4f adv %.4f am %.4f)  min(sim %.4f cyc "
          "%.4f adv %.4f am %.4f)  d+ %.4f d- %.4f\n",
          phase, epoch + 1, epochs, mean_max.sim, mean_max.cyc, mean_max.adv, mean_max.am,
          mean_min.sim, mean_min.cyc, mean_min.adv, mean_min.am, mean_dp * inv, mean_dm * inv);
      std::fflush(stdout);
    }
  }
};

}  // namespace

PretrainResult pretrain_cyclegan(CycleGanPair& pair, const data::DatasetSplit& split,
                                 const GanTrainConfig& config) {
  config.validate();
  const auto train = natural_subset(split.train, config.max_train_images);
  const auto val = natural_subset(split.validation);
  if (train.empty()) throw std::invalid_argument("pretrain_cyclegan: no natural training images");
  if (val.empty()) throw std::invalid_argument("pretrain_cyclegan: no natural validation images");

  PretrainResult res;
  if (config.pretrain_epochs > 0) {
    GanTrainConfig pre = config;
    pre.lambda_am = 0.0;  // reconstruction phase: no activation-maximization term
    Trainer tr(pair, nullptr, pre, derive_seed(config.seed, "gan-pretrain"));
    tr.run(train, config.pretrain_epochs, "pretrain", res.epoch_max, res.epoch_min,
           res.epoch_d_plus, res.epoch_d_minus);
  }
  res.recon_plus = mean_reconstruction_error(*pair.w_plus, val);
  res.recon_minus = mean_reconstruction_error(*pair.w_minus, val);
  pair.pretrained = true;
  return res;
}

TrainResult train_cyclegan(CycleGanPair& pair, cls::Model& classifier,
                           const data::DatasetSplit& split, const GanTrainConfig& config) {
  config.validate();
  if (!classifier.frozen())
    throw std::invalid_argument("train_cyclegan: classifier must be frozen");
  if (!pair.pretrained && !config.skip_pretrain)
    throw std::invalid_argument(
        "train_cyclegan: pair is not pretrained (set skip_pretrain to override)");
  const auto train = natural_subset(split.train, config.max_train_images);
  if (train.empty()) throw std::invalid_argument("train_cyclegan: no natural training images");

  const std::uint32_t checksum_before = classifier.checksum();
  TrainResult res;
  Trainer tr(pair, &classifier, config, derive_seed(config.seed, "gan-main"));
  tr.run(train, config.main_epochs, "main", res.epoch_max, res.epoch_min, res.epoch_d_plus,
         res.epoch_d_minus);
  if (classifier.checksum() != checksum_before)
    throw std::logic_error("train_cyclegan: frozen classifier parameters changed");
  return res;
}

// ---------------------------------------------------------------------------

namespace {

json config_to_json(const GanTrainConfig& c) {
  json j;
  j["lambda_am"] = c.lambda_am;
  j["w_sim"] = c.w_sim;
  j["w_cyc"] = c.w_cyc;
  j["w_adv"] = c.w_adv;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["lr"] = c.lr;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["main_epochs"] = c.main_epochs;
  j["batch_size"] = c.batch_size;
  j["ngf"] = c.ngf;
  j["ndf"] = c.ndf;
  j["n_res"] = c.n_res;
  j["adv_bce"] = c.adv_bce;
  j["cyc_single_order"] = c.cyc_single_order;
  j["sim_l2"] = c.sim_l2;
  j["skip_pretrain"] = c.skip_pretrain;
  j["max_train_images"] = c.max_train_images;
  j["seed"] = c.seed;
  return j;
}

GanTrainConfig config_from_json(const json& j) {
  GanTrainConfig c;
  c.lambda_am = j.at("lambda_am").get<double>();
  c.w_sim = j.at("w_sim").get<double>();
  c.w_cyc = j.at("w_cyc").get<double>();
  c.w_adv = j.at("w_adv").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.lr = j.at("lr").get<double>();
  c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  c.main_epochs = j.at("main_epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.ngf = j.at("ngf").get<int>();
  c.ndf = j.at("ndf").get<int>();
  c.n_res = j.at("n_res").get<int>();
  c.adv_bce = j.at("adv_bce").get<bool>();
  c.cyc_single_order = j.at("cyc_single_order").get<bool>();
  c.sim_l2 = j.at("sim_l2").get<bool>();
  c.skip_pretrain = j.at("skip_pretrain").get<bool>();
  c.max_train_images = j.at("max_train_images").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename Net>
std::vector<io::NamedTensor> collect_tensors(Net& net) {
  std::vector<io::NamedTensor> out;
  int idx = 0;
  for (const auto* p : net.params()) {
    io::NamedTensor t;
    t.name = "p" + std::to_string(idx++) + "." + p->name;
    t.shape = p->value.shape();
    t.data.assign(p->value.data(), p->value.data() + p->value.size());
    out.push_back(std::move(t));
  }
  return out;
}

template <typename Net>
void restore_tensors(Net& net, const io::Checkpoint& ck, const fs::path& file) {
  auto& params = net.params();
  if (params.size() != ck.tensors.size())
    throw std::runtime_error("checkpoint tensor count mismatch: " + file.string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != ck.tensors[i].shape)
      throw std::runtime_error("checkpoint tensor shape mismatch: " + file.string());
    std::copy(ck.tensors[i].data.begin(), ck.tensors[i].data.end(), params[i]->value.data());
  }
}

}  // namespace

void save_gan(const fs::path& dir, CycleGanPair& pair, const GanTrainConfig& config,
              const json& extra) {
  fs::create_directories(dir);
  json manifest;
  manifest["kind"] = "cyclegan-pair";
  manifest["config"] = config_to_json(config);
  manifest["in_channels"] = pair.w_plus->config().in_channels;
  manifest["pretrained"] = pair.pretrained;
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();

  auto save_one = [&](const char* name, auto& net, const char* role) {
    json m = manifest;
    m["network"] = role;
    io::save_checkpoint(dir / name, m, collect_tensors(net));
  };
  save_one("w_plus.ckpt", *pair.w_plus, "generator-maximizer");
  save_one("w_minus.ckpt", *pair.w_minus, "generator-minimizer");
  save_one("d_plus.ckpt", *pair.d_plus, "discriminator-maximizer");
  save_one("d_minus.ckpt", *pair.d_minus, "discriminator-minimizer");
  io::write_json(dir / "manifest.json", manifest);
}

CycleGanPair load_gan(const fs::path& dir, GanTrainConfig* config_out) {
  const json manifest = io::read_json(dir / "manifest.json");
  if (manifest.at("kind").get<std::string>() != "cyclegan-pair")
    throw std::runtime_error("not a cyclegan checkpoint directory: " + dir.string());
  const GanTrainConfig config = config_from_json(manifest.at("config"));
  const int in_channels = manifest.at("in_channels").get<int>();
  CycleGanPair pair = make_cyclegan_pair(config, in_channels, config.seed);
  pair.pretrained = manifest.at("pretrained").get<bool>();

  auto load_one = [&](const char* name, auto& net) {
    const fs::path file = dir / name;
    restore_tensors(net, io::load_checkpoint(file), file);
  };
  load_one("w_plus.ckpt", *pair.w_plus);
  load_one("w_minus.ckpt", *pair.w_minus);
  load_one("d_plus.ckpt", *pair.d_plus);
  load_one("d_minus.ckpt", *pair.d_minus);
  if (config_out) *config_out = config;
  return pair;
}

}  // namespace patx::gan
