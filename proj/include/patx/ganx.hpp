#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include <json.hpp>

#include "patx/classifier.hpp"
#include "patx/data.hpp"
#include "patx/models.hpp"

namespace patx::gan {

struct GanTrainConfig {
  double lambda_am = 0.3;
  double w_sim = 1.0, w_cyc = 1.0, w_adv = 1.0;
  double adam_beta1 = 0.5, adam_beta2 = 0.999;
  double lr = 2e-4;
  int pretrain_epochs = 3;
  int main_epochs = 4;
  int batch_size = 1;
  int ngf = 12;
  int ndf = 12;
  int n_res = 12;
  bool adv_bce = false;          // least-squares adversarial term by default
  bool cyc_single_order = false; // symmetric two-order cycle loss by default
  bool sim_l2 = false;           // mean absolute difference by default
  bool skip_pretrain = false;
  int max_train_images = 0;      // cap on natural-class training images; 0 = all
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossBreakdown {
  double sim = 0, cyc = 0, adv = 0, am = 0, total = 0;
  Polarity polarity = Polarity::maximizer;
};

template <typename T>
struct CycleGanPairT {
  std::unique_ptr<Generator<T>> w_plus, w_minus;
  std::unique_ptr<PatchDiscriminator<T>> d_plus, d_minus;
  bool pretrained = false;
};

using CycleGanPair = CycleGanPairT<float>;

CycleGanPair make_cyclegan_pair(const GanTrainConfig& config, int in_channels,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Loss terms. Probabilities are clamped to [1e-7, 1-1e-7] before any log.

inline constexpr double kProbClamp = 1e-7;

template <typename T>
T clamp_prob(T p) {
  const T lo = static_cast<T>(kProbClamp), hi = T(1) - static_cast<T>(kProbClamp);
  return p < lo ? lo : (p > hi ? hi : p);
}

/// Negative log-likelihood form of binary cross entropy for a hard label.
template <typename T>
T bce_loss(int h, T h_hat) {
  if (h != 0 && h != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
  const T p = clamp_prob(h_hat);
  return h == 1 ? -std::log(p) : -std::log(T(1) - p);
}

template <typename T>
T bce_loss_grad(int h, T h_hat) {
  const T p = clamp_prob(h_hat);
  return h == 1 ? -T(1) / p : T(1) / (T(1) - p);
}

/// Mean of bce_loss over every element of a prediction grid.
template <typename T>
T bce_grid(int h, const Tensor<T>& grid) {
  T total = T(0);
  for (std::size_t i = 0; i < grid.size(); ++i) total += bce_loss(h, grid[i]);
  return total / static_cast<T>(grid.size());
}

/// Mean absolute (or squared, when l2) difference over all elements.
template <typename T>
T sim_loss(const Tensor<T>& x, const Tensor<T>& x_hat, bool l2 = false) {
  if (!x.same_shape(x_hat)) throw std::invalid_argument("sim_loss: shape mismatch");
  T total = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x[i] - x_hat[i];
    total += l2 ? d * d : std::fabs(d);
  }
  return total / static_cast<T>(x.size());
}

// d(sim)/d(x_hat), accumulated into g with weight.
template <typename T>
void sim_loss_grad_acc(const Tensor<T>& x, const Tensor<T>& x_hat, T weight, Tensor<T>& g,
                       bool l2 = false) {
  const T inv = weight / static_cast<T>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x_hat[i] - x[i];
    g[i] += l2 ? T(2) * inv * d : (d > T(0) ? inv : (d < T(0) ? -inv : T(0)));
  }
}

/// Reconstruction error of mapping through both generators. Symmetric over
/// the two composition orders unless single_order, which keeps only the
/// composition ending in w_plus (minimize first, then maximize back).
template <typename T, typename GenMinus, typename GenPlus>
T cyc_loss(GenMinus& w_minus, GenPlus& w_plus, const Tensor<T>& x,
           bool single_order = false) {
  const Tensor<T> a = w_plus.forward(w_minus.forward(x));
  const T first = sim_loss(x, a);
  if (single_order) return first;
  const Tensor<T> b = w_minus.forward(w_plus.forward(x));
  return (first + sim_loss(x, b)) / T(2);
}

/// Least-squares adversarial generator term mean((d(w(x)) - 1)^2), or the
/// cross-entropy variant mean(bce(1, d(w(x)))) when bce is set.
template <typename T, typename Disc, typename Gen>
T adv_gen_loss(Disc& d, Gen& w, const Tensor<T>& x, bool bce = false) {
  const Tensor<T> p = d.forward(w.forward(x));
  if (bce) return bce_grid(1, p);
  T total = T(0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T e = p[i] - T(1);
    total += e * e;
  }
  return total / static_cast<T>(p.size());
}

/// Activation-maximization term: cross entropy between the polarity label and
/// the frozen classifier's score of the generated image.
template <typename T, typename Classifier, typename Gen>
T am_loss(int y, Classifier& classifier, Gen& w, const Tensor<T>& x) {
  if (!classifier.frozen())
    throw std::invalid_argument("am_loss: classifier must be frozen");
  if (y != 0 && y != 1) throw std::invalid_argument("am_loss: y must be 0 or 1");
  const Tensor<T> scores = classifier.forward(w.forward(x));
  T total = T(0);
  for (std::size_t i = 0; i < scores.size(); ++i) total += bce_loss(y, scores[i]);
  return total / static_cast<T>(scores.size());
}

/// Sum of bce(1, d(real)) and bce(0, d(fake)), each averaged over its patch
/// grid. fake must already be detached (a plain tensor carries no gradients).
template <typename T, typename Disc>
T discriminator_loss(Disc& d, const Tensor<T>& real, const Tensor<T>& fake) {
  const Tensor<T> pr = d.forward(real);
  const T lr_ = bce_grid(1, pr);
  const Tensor<T> pf = d.forward(fake);
  return lr_ + bce_grid(0, pf);
}

/// Complete generator objective for one polarity:
///   total = w_sim*sim + w_cyc*cyc + w_adv*adv + lambda_am*am
/// With backward set, parameter gradients are accumulated into w_self and
/// w_other (both appear in the cycle term); the discriminator and classifier
/// only relay input gradients. classifier may be null only when lambda_am==0.
template <typename T, typename GenSelf, typename GenOther, typename Disc,
          typename Classifier>
LossBreakdown generator_loss(const Tensor<T>& x, int y, GenSelf& w_self, GenOther& w_other,
                             Disc& d_self, Classifier* classifier, const GanTrainConfig& cfg,
                             bool backward = false) {
  if (y != 0 && y != 1) throw std::invalid_argument("generator_loss: y must be 0 or 1");
  const Polarity want = y == 1 ? Polarity::maximizer : Polarity::minimizer;
  if (w_self.polarity() != want || d_self.polarity() != want ||
      w_other.polarity() == w_self.polarity())
    throw std::invalid_argument(std::string("generator_loss: polarity mismatch (y=") +
                                std::to_string(y) + " requires the " + polarity_name(want) +
                                " generator and discriminator)");
  if (cfg.lambda_am > 0 && classifier == nullptr)
    throw std::invalid_argument("generator_loss: lambda_am > 0 requires a classifier");
  if (classifier && !classifier->frozen())
    throw std::invalid_argument("generator_loss: classifier must be frozen");

  LossBreakdown out;
  out.polarity = want;
  const auto n_elems = static_cast<T>(x.size());

  // d_self only relays gradients during the generator update
  d_self.set_param_grads(false);

  // self branch: sim + adv + am all flow through one forward of w_self
  Tensor<T> x_hat = w_self.forward(x);
  out.sim = static_cast<double>(sim_loss(x, x_hat, cfg.sim_l2));
  Tensor<T> g_xhat(x_hat.shape());
  if (backward && cfg.w_sim != 0)
    sim_loss_grad_acc(x, x_hat, static_cast<T>(cfg.w_sim), g_xhat, cfg.sim_l2);

  {
    Tensor<T> p = d_self.forward(x_hat);
    const auto n_patch = static_cast<T>(p.size());
    T adv = T(0);
    Tensor<T> gp(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (cfg.adv_bce) {
        adv += bce_loss(1, p[i]);
        gp[i] = static_cast<T>(cfg.w_adv) * bce_loss_grad(1, p[i]) / n_patch;
      } else {
        const T e = p[i] - T(1);
        adv += e * e;
        gp[i] = static_cast<T>(cfg.w_adv) * T(2) * e / n_patch;
      }
    }
    out.adv = static_cast<double>(adv / n_patch);
    if (backward && cfg.w_adv != 0) {
      Tensor<T> g = d_self.backward(gp);
      for (std::size_t i = 0; i < g.size(); ++i) g_xhat[i] += g[i];
    }
  }

  if (classifier) {
    Tensor<T> scores = classifier->forward(x_hat);
    const auto nb = static_cast<T>(scores.size());
    T am = T(0);
    Tensor<T> gs(scores.shape());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      am += bce_loss(y, scores[i]);
      gs[i] = static_cast<T>(cfg.lambda_am) * bce_loss_grad(y, scores[i]) / nb;
    }
    out.am = static_cast<double>(am / nb);
    if (backward && cfg.lambda_am > 0) {
      Tensor<T> g = classifier->backward(gs);
      for (std::size_t i = 0; i < g.size(); ++i) g_xhat[i] += g[i];
    }
  }

  if (backward) w_self.backward(g_xhat);

  // cycle, order A: w_other(w_self(x)); reuses the cached w_self forward
  const T cyc_w = static_cast<T>(cfg.w_cyc) * (cfg.cyc_single_order ? T(1) : T(0.5));
  double cyc_a = 0;
  if (!cfg.cyc_single_order) {
    Tensor<T> r = w_other.forward(x_hat);
    cyc_a = static_cast<double>(sim_loss(x, r));
    if (backward && cfg.w_cyc != 0) {
      Tensor<T> gr(r.shape());
      for (std::size_t i = 0; i < r.size(); ++i) {
        const T d = r[i] - x[i];
        gr[i] = d > T(0) ? cyc_w / n_elems : (d < T(0) ? -cyc_w / n_elems : T(0));
      }
      Tensor<T> g_mid = w_other.backward(gr);
      w_self.backward(g_mid);
    }
  }

  // cycle, order B: w_self(w_other(x)) — the literal composition that ends in
  // the generator being optimized
  double cyc_b = 0;
  {
    Tensor<T> v = w_other.forward(x);
    Tensor<T> u = w_self.forward(v);
    cyc_b = static_cast<double>(sim_loss(x, u));
    if (backward && cfg.w_cyc != 0) {
      Tensor<T> gu(u.shape());
      for (std::size_t i = 0; i < u.size(); ++i) {
        const T d = u[i] - x[i];
        gu[i] = d > T(0) ? cyc_w / n_elems : (d < T(0) ? -cyc_w / n_elems : T(0));
      }
      Tensor<T> gv = w_self.backward(gu);
      w_other.backward(gv);
    }
  }
  out.cyc = cfg.cyc_single_order ? cyc_b : 0.5 * (cyc_a + cyc_b);

  d_self.set_param_grads(true);

  out.total = cfg.w_sim * out.sim + cfg.w_cyc * out.cyc + cfg.w_adv * out.adv +
              cfg.lambda_am * out.am;
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct PretrainResult {
  double recon_plus = 0, recon_minus = 0;  // mean sim_loss(x, w(x)) on validation
  std::vector<LossBreakdown> epoch_max, epoch_min;
  std::vector<double> epoch_d_plus, epoch_d_minus;
};

struct TrainResult {
  std::vector<LossBreakdown> epoch_max, epoch_min;
  std::vector<double> epoch_d_plus, epoch_d_minus;
};

/// Pre-training: the full objective with the activation-maximization weight
/// forced to zero, so both generators learn to reconstruct the input domain.
PretrainResult pretrain_cyclegan(CycleGanPair& pair, const data::DatasetSplit& split,
                                 const GanTrainConfig& config);

/// Main training with the frozen classifier in the loop. Alternates generator
/// and discriminator updates per batch; both sub-GANs update every step.
TrainResult train_cyclegan(CycleGanPair& pair, cls::Model& classifier,
                           const data::DatasetSplit& split, const GanTrainConfig& config);

/// (w_plus(x), w_minus(x)) for a single C x H x W image.
std::pair<data::Image, data::Image> generate_pair(CycleGanPair& pair, const data::Image& x);

/// Natural-class (label 1) samples of a list; the GAN's single input domain.
std::vector<data::SamplePtr> natural_subset(const std::vector<data::SamplePtr>& samples,
                                            int cap = 0);

double mean_reconstruction_error(Generator<float>& g,
                                 const std::vector<data::SamplePtr>& samples);

void save_gan(const std::filesystem::path& dir, CycleGanPair& pair,
              const GanTrainConfig& config,
              const nlohmann::json& extra = nlohmann::json::object());
CycleGanPair load_gan(const std::filesystem::path& dir, GanTrainConfig* config_out = nullptr);

}  // namespace patx::gan
