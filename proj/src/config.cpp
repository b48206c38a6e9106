#include "patx/config.hpp"

#include <set>
#include <stdexcept>

#include "patx/io.hpp"
#include "patx/rng.hpp"

namespace patx {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) throw std::invalid_argument("config: " + ctx + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + ctx);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_synth(const json& j, data::SynthConfig& c, bool& seed_set) {
  check_keys(j,
             {"size", "samples_per_class", "wetland_count", "bare_count", "water_count",
              "field_count", "road_count", "blob_radius", "class_colors", "road_color",
              "color_jitter", "noise_lowfreq", "noise_pixel", "seed"},
             "synth");
  get_if(j, "size", c.size);
  get_if(j, "samples_per_class", c.samples_per_class);
  auto get_range = [&](const char* key, int& lo, int& hi) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<int>>();
    if (v.size() != 2) throw std::invalid_argument(std::string("config: synth.") + key +
                                                   " must be [min, max]");
    lo = v[0];
    hi = v[1];
  };
  get_range("wetland_count", c.wetland_count_min, c.wetland_count_max);
  get_range("bare_count", c.bare_count_min, c.bare_count_max);
  get_range("water_count", c.water_count_min, c.water_count_max);
  get_range("field_count", c.field_count_min, c.field_count_max);
  get_range("road_count", c.road_count_min, c.road_count_max);
  if (j.contains("blob_radius")) {
    const auto v = j.at("blob_radius").get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("config: synth.blob_radius must be [min, max]");
    c.radius_min = v[0];
    c.radius_max = v[1];
  }
  if (j.contains("class_colors")) {
    const auto v = j.at("class_colors").get<std::vector<std::vector<double>>>();
    if (v.size() != 5) throw std::invalid_argument("config: synth.class_colors needs 5 colors");
    for (std::size_t i = 0; i < 5; ++i) {
      if (v[i].size() != 3)
        throw std::invalid_argument("config: synth.class_colors entries are RGB triples");
      c.class_colors[i] = {v[i][0], v[i][1], v[i][2]};
    }
  }
  if (j.contains("road_color")) {
    const auto v = j.at("road_color").get<std::vector<double>>();
    if (v.size() != 3) throw std::invalid_argument("config: synth.road_color is an RGB triple");
    c.road_color = {v[0], v[1], v[2]};
  }
  get_if(j, "color_jitter", c.color_jitter);
  get_if(j, "noise_lowfreq", c.noise_lowfreq);
  get_if(j, "noise_pixel", c.noise_pixel);
  if (j.contains("seed")) {
    c.seed = j.at("seed").get<std::uint64_t>();
    seed_set = true;
  }
}

void parse_classifier(const json& j, cls::ClassifierConfig& c, bool& seed_set) {
  check_keys(j,
             {"input_channels", "base_width", "depth", "max_lr", "weight_decay", "batch_size",
              "epochs", "cutmix_probability", "momentum", "onecycle_warmup",
              "onecycle_div_factor", "onecycle_final_div", "seed"},
             "classifier");
  get_if(j, "input_channels", c.input_channels);
  get_if(j, "base_width", c.base_width);
  get_if(j, "depth", c.depth);
  get_if(j, "max_lr", c.max_lr);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "epochs", c.epochs);
  get_if(j, "cutmix_probability", c.cutmix_probability);
  get_if(j, "momentum", c.momentum);
  get_if(j, "onecycle_warmup", c.onecycle_warmup);
  get_if(j, "onecycle_div_factor", c.onecycle_div_factor);
  get_if(j, "onecycle_final_div", c.onecycle_final_div);
  if (j.contains("seed")) {
    c.seed = j.at("seed").get<std::uint64_t>();
    seed_set = true;
  }
}

void parse_gan(const json& j, gan::GanTrainConfig& c, bool& seed_set) {
  check_keys(j,
             {"lambda_am", "w_sim", "w_cyc", "w_adv", "adam_beta1", "adam_beta2", "lr",
              "pretrain_epochs", "main_epochs", "batch_size", "ngf", "ndf", "n_res", "adv_bce",
              "cyc_single_order", "sim_l2", "skip_pretrain", "max_train_images", "seed"},
             "gan");
  get_if(j, "lambda_am", c.lambda_am);
  get_if(j, "w_sim", c.w_sim);
  get_if(j, "w_cyc", c.w_cyc);
  get_if(j, "w_adv", c.w_adv);
  get_if(j, "adam_beta1", c.adam_beta1);
  get_if(j, "adam_beta2", c.adam_beta2);
  get_if(j, "lr", c.lr);
  get_if(j, "pretrain_epochs", c.pretrain_epochs);
  get_if(j, "main_epochs", c.main_epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "ngf", c.ngf);
  get_if(j, "ndf", c.ndf);
  get_if(j, "n_res", c.n_res);
  get_if(j, "adv_bce", c.adv_bce);
  get_if(j, "cyc_single_order", c.cyc_single_order);
  get_if(j, "sim_l2", c.sim_l2);
  get_if(j, "skip_pretrain", c.skip_pretrain);
  get_if(j, "max_train_images", c.max_train_images);
  if (j.contains("seed")) {
    c.seed = j.at("seed").get<std::uint64_t>();
    seed_set = true;
  }
}

void parse_attribution(const json& j, AttributionRunConfig& c) {
  check_keys(j, {"mode", "percentile", "overlay_alpha"}, "attribution");
  if (j.contains("mode")) c.mode = attr::mode_from_name(j.at("mode").get<std::string>());
  get_if(j, "percentile", c.percentile);
  get_if(j, "overlay_alpha", c.overlay_alpha);
}

void parse_evaluation(const json& j, EvaluationRunConfig& c) {
  check_keys(j, {"percentile", "classes", "max_images", "occlusion"}, "evaluation");
  get_if(j, "percentile", c.percentile);
  if (j.contains("classes")) c.classes = j.at("classes").get<std::vector<int>>();
  get_if(j, "max_images", c.max_images);
  if (j.contains("occlusion")) {
    const auto& o = j.at("occlusion");
    check_keys(o, {"patch_size", "stride", "fill_value"}, "evaluation.occlusion");
    get_if(o, "patch_size", c.occlusion.patch_size);
    get_if(o, "stride", c.occlusion.stride);
    get_if(o, "fill_value", c.occlusion.fill_value);
  }
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  classifier.validate();
  gan.validate();
  if (attribution.percentile <= 0 || attribution.percentile >= 100 ||
      evaluation.percentile <= 0 || evaluation.percentile >= 100)
    throw std::invalid_argument("config: percentiles must lie in (0, 100)");
  if (attribution.overlay_alpha < 0 || attribution.overlay_alpha > 1)
    throw std::invalid_argument("config: overlay_alpha must lie in [0,1]");
  for (int c : evaluation.classes)
    if (c < 0 || c >= data::kNumMaskClasses)
      throw std::invalid_argument("config: evaluation class id outside the mask scheme");
  if (evaluation.max_images < 0)
    throw std::invalid_argument("config: evaluation.max_images must be >= 0");
  for (double r : ratios)
    if (r <= 0) throw std::invalid_argument("config: split ratios must be positive");
  if (std::fabs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw std::invalid_argument("config: split ratios must sum to 1");
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir must not be empty");
}

void RunConfig::derive_phase_seeds() {
  synth.seed = derive_seed(seed, "phase-synth");
  classifier.seed = derive_seed(seed, "phase-classifier");
  gan.seed = derive_seed(seed, "phase-gan");
}

RunConfig parse_run_config(const json& j) {
  check_keys(j,
             {"seed", "out_dir", "ratios", "synth", "classifier", "gan", "attribution",
              "evaluation"},
             "top level");
  RunConfig c;
  get_if(j, "seed", c.seed);
  c.derive_phase_seeds();
  get_if(j, "out_dir", c.out_dir);
  if (j.contains("ratios")) {
    const auto v = j.at("ratios").get<std::vector<double>>();
    if (v.size() != 3)
      throw std::invalid_argument("config: ratios must be [train, validation, test]");
    c.ratios = {v[0], v[1], v[2]};
  }
  bool seed_set = false;
  if (j.contains("synth")) parse_synth(j.at("synth"), c.synth, seed_set);
  if (j.contains("classifier")) parse_classifier(j.at("classifier"), c.classifier, seed_set);
  if (j.contains("gan")) parse_gan(j.at("gan"), c.gan, seed_set);
  if (j.contains("attribution")) parse_attribution(j.at("attribution"), c.attribution);
  if (j.contains("evaluation")) parse_evaluation(j.at("evaluation"), c.evaluation);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  json j;
  try {
    j = io::read_json(file);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config: cannot parse " + file.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["ratios"] = {c.ratios[0], c.ratios[1], c.ratios[2]};

  json s;
  s["size"] = c.synth.size;
  s["samples_per_class"] = c.synth.samples_per_class;
  s["wetland_count"] = {c.synth.wetland_count_min, c.synth.wetland_count_max};
  s["bare_count"] = {c.synth.bare_count_min, c.synth.bare_count_max};
  s["water_count"] = {c.synth.water_count_min, c.synth.water_count_max};
  s["field_count"] = {c.synth.field_count_min, c.synth.field_count_max};
  s["road_count"] = {c.synth.road_count_min, c.synth.road_count_max};
  s["blob_radius"] = {c.synth.radius_min, c.synth.radius_max};
  {
    json colors = json::array();
    for (const auto& col : c.synth.class_colors) colors.push_back({col[0], col[1], col[2]});
    s["class_colors"] = colors;
  }
  s["road_color"] = {c.synth.road_color[0], c.synth.road_color[1], c.synth.road_color[2]};
  s["color_jitter"] = c.synth.color_jitter;
  s["noise_lowfreq"] = c.synth.noise_lowfreq;
  s["noise_pixel"] = c.synth.noise_pixel;
  s["seed"] = c.synth.seed;
  j["synth"] = s;

  json cl;
  cl["input_channels"] = c.classifier.input_channels;
  cl["base_width"] = c.classifier.base_width;
  cl["depth"] = c.classifier.depth;
  cl["max_lr"] = c.classifier.max_lr;
  cl["weight_decay"] = c.classifier.weight_decay;
  cl["batch_size"] = c.classifier.batch_size;
  cl["epochs"] = c.classifier.epochs;
  cl["cutmix_probability"] = c.classifier.cutmix_probability;
  cl["momentum"] = c.classifier.momentum;
  cl["onecycle_warmup"] = c.classifier.onecycle_warmup;
  cl["onecycle_div_factor"] = c.classifier.onecycle_div_factor;
  cl["onecycle_final_div"] = c.classifier.onecycle_final_div;
  cl["seed"] = c.classifier.seed;
  j["classifier"] = cl;

  json g;
  g["lambda_am"] = c.gan.lambda_am;
  g["w_sim"] = c.gan.w_sim;
  g["w_cyc"] = c.gan.w_cyc;
  g["w_adv"] = c.gan.w_adv;
  g["adam_beta1"] = c.gan.adam_beta1;
  g["adam_beta2"] = c.gan.adam_beta2;
  g["lr"] = c.gan.lr;
  g["pretrain_epochs"] = c.gan.pretrain_epochs;
  g["main_epochs"] = c.gan.main_epochs;
  g["batch_size"] = c.gan.batch_size;
  g["ngf"] = c.gan.ngf;
  g["ndf"] = c.gan.ndf;
  g["n_res"] = c.gan.n_res;
  g["adv_bce"] = c.gan.adv_bce;
  g["cyc_single_order"] = c.gan.cyc_single_order;
  g["sim_l2"] = c.gan.sim_l2;
  g["skip_pretrain"] = c.gan.skip_pretrain;
  g["max_train_images"] = c.gan.max_train_images;
  g["seed"] = c.gan.seed;
  j["gan"] = g;

  json a;
  a["mode"] = attr::mode_name(c.attribution.mode);
  a["percentile"] = c.attribution.percentile;
  a["overlay_alpha"] = c.attribution.overlay_alpha;
  j["attribution"] = a;

  json e;
  e["percentile"] = c.evaluation.percentile;
  e["classes"] = c.evaluation.classes;
  e["max_images"] = c.evaluation.max_images;
  json o;
  o["patch_size"] = c.evaluation.occlusion.patch_size;
  o["stride"] = c.evaluation.occlusion.stride;
  o["fill_value"] = c.evaluation.occlusion.fill_value;
  e["occlusion"] = o;
  j["evaluation"] = e;

  return j;
}

RunConfig default_run_config() {
  RunConfig c;
  // Desk-scale training settings. The per-module defaults keep the published
  // full-scale values (12 residual blocks, max_lr 0.01, no momentum); at
  // 64x64 with this architecture the score net needs the higher peak rate
  // plus momentum to converge inside the epoch budget.
  c.classifier.max_lr = 0.05;
  c.classifier.momentum = 0.9;
  c.classifier.epochs = 15;
  c.gan.n_res = 3;
  c.gan.pretrain_epochs = 3;
  c.gan.main_epochs = 4;
  c.gan.max_train_images = 300;
  c.evaluation.max_images = 100;
  c.derive_phase_seeds();
  c.validate();
  return c;
}

}  // namespace patx
