#include "lulcseg/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lulcseg/synth.hpp"

namespace lulcseg {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

i64 parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    i64 r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    std::uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an unsigned integer");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::array<i64, 4> parse_stage_list(const std::string& key, const std::string& v) {
  std::array<i64, 4> out{};
  std::stringstream ss(v);
  std::string item;
  size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 4) throw ConfigError("key '" + key + "': expected 4 comma-separated values");
    out[i++] = parse_int(key, trim(item));
  }
  if (i != 4) throw ConfigError("key '" + key + "': expected 4 comma-separated values");
  return out;
}

SplitRatio parse_ratio(const std::string& key, const std::string& v) {
  size_t slash = v.find('/');
  if (slash == std::string::npos)
    throw ConfigError("key '" + key + "': expected a fraction like 3/4");
  SplitRatio r;
  r.num = parse_int(key, trim(v.substr(0, slash)));
  r.den = parse_int(key, trim(v.substr(slash + 1)));
  return r;
}

}  // namespace

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kFocal: return "focal";
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kBinaryCrossEntropy: return "bce";
  }
  return "?";
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "run.seed") cfg.seed = parse_u64(key, v);
  else if (key == "run.out_dir") cfg.out_dir = v;
  else if (key == "data.manifest") cfg.manifest = v;
  else if (key == "data.eval_manifest") cfg.eval_manifest = v;
  else if (key == "data.patch_size") cfg.patch_size = parse_int(key, v);
  else if (key == "data.n_patches") cfg.n_patches = parse_int(key, v);
  else if (key == "data.n_classes") cfg.n_classes = static_cast<int>(parse_int(key, v));
  else if (key == "data.window_days") cfg.window_days = static_cast<int>(parse_int(key, v));
  else if (key == "data.min_observations") cfg.min_observations = static_cast<int>(parse_int(key, v));
  else if (key == "data.max_observations") cfg.max_observations = static_cast<int>(parse_int(key, v));
  else if (key == "data.label_grid") cfg.label_grid = parse_int(key, v);
  else if (key == "net.preset") {
    if (v == "desk") cfg.net = NetConfig::desk();
    else if (v == "full") cfg.net = NetConfig::full_size();
    else throw ConfigError("key 'net.preset': unknown preset '" + v + "'");
  } else if (key == "net.channels") {
    auto vals = parse_stage_list(key, v);
    for (int i = 0; i < 4; ++i) cfg.net.stages[static_cast<size_t>(i)].channels = vals[static_cast<size_t>(i)];
  } else if (key == "net.depths") {
    auto vals = parse_stage_list(key, v);
    for (int i = 0; i < 4; ++i) cfg.net.stages[static_cast<size_t>(i)].depth = vals[static_cast<size_t>(i)];
  } else if (key == "net.heads") {
    auto vals = parse_stage_list(key, v);
    for (int i = 0; i < 4; ++i) cfg.net.stages[static_cast<size_t>(i)].heads = vals[static_cast<size_t>(i)];
  } else if (key == "net.reductions") {
    auto vals = parse_stage_list(key, v);
    for (int i = 0; i < 4; ++i) cfg.net.stages[static_cast<size_t>(i)].reduction = vals[static_cast<size_t>(i)];
  } else if (key == "net.mlp_ratio") cfg.net.mlp_ratio = parse_int(key, v);
  else if (key == "net.split") cfg.net.split = parse_ratio(key, v);
  else if (key == "net.decoder_dim") cfg.net.decoder_dim = parse_int(key, v);
  else if (key == "net.gate_reduction") cfg.net.gate_reduction = parse_int(key, v);
  else if (key == "net.cross_attention") cfg.net.cross_attention = parse_bool(key, v);
  else if (key == "net.efficient_sa") cfg.net.efficient_sa = parse_bool(key, v);
  else if (key == "net.mmam") cfg.net.mmam = parse_bool(key, v);
  else if (key == "train.lr0") cfg.lr0 = parse_double(key, v);
  else if (key == "train.epochs") cfg.epochs = parse_int(key, v);
  else if (key == "train.batch_size") cfg.batch_size = parse_int(key, v);
  else if (key == "train.weight_decay") cfg.weight_decay = parse_double(key, v);
  else if (key == "train.beta1") cfg.beta1 = parse_double(key, v);
  else if (key == "train.beta2") cfg.beta2 = parse_double(key, v);
  else if (key == "train.eps") cfg.adam_eps = parse_double(key, v);
  else if (key == "train.augment") cfg.augment = parse_bool(key, v);
  else if (key == "train.loss") {
    if (v == "focal") cfg.loss_kind = LossKind::kFocal;
    else if (v == "ce") cfg.loss_kind = LossKind::kCrossEntropy;
    else if (v == "bce") cfg.loss_kind = LossKind::kBinaryCrossEntropy;
    else throw ConfigError("key 'train.loss': unknown loss '" + v + "'");
  } else if (key == "train.focal_gamma") cfg.focal_gamma = parse_double(key, v);
  else if (key == "train.alpha") {
    if (v == "inverse_freq") cfg.alpha_mode = AlphaMode::kInverseFrequency;
    else if (v == "uniform") cfg.alpha_mode = AlphaMode::kUniform;
    else throw ConfigError("key 'train.alpha': unknown mode '" + v + "'");
  } else if (key == "ablate.epochs") cfg.ablate_epochs = parse_int(key, v);
  else if (key == "ablate.patches") cfg.ablate_patches = parse_int(key, v);
  else if (key == "ablate.eval_patches") cfg.ablate_eval_patches = parse_int(key, v);
  else if (key == "ablate.patch_size") cfg.ablate_patch_size = parse_int(key, v);
  else if (key == "ablate.seeds") cfg.ablate_seeds = static_cast<int>(parse_int(key, v));
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    apply_override(cfg, section.empty() ? key : section + "." + key, value);
  }
}

void RunConfig::validate() const {
  if (lr0 < 0) throw ConfigError("train.lr0 must be >= 0");
  if (epochs < 0 || batch_size < 1) throw ConfigError("train.epochs/batch_size out of range");
  if (focal_gamma < 0) throw ConfigError("train.focal_gamma must be >= 0");
  if (n_classes < 1 || n_classes > kMaxClasses)
    throw ConfigError("data.n_classes must lie in [1, " + std::to_string(kMaxClasses) + "]");
  if (patch_size < 16) throw ConfigError("data.patch_size must be >= 16");
  if (window_days <= 0) throw ConfigError("data.window_days must be positive");
  if (min_observations < 0 || max_observations < min_observations)
    throw ConfigError("data.min/max_observations are inconsistent");
  if (label_grid < 1) throw ConfigError("data.label_grid must be >= 1");
  if (ablate_seeds < 1) throw ConfigError("ablate.seeds must be >= 1");
}

}  // namespace lulcseg
