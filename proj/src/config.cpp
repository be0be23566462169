#include "vdpm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vdpm/adapt.hpp"
#include "vdpm/errors.hpp"
#include "vdpm/synth.hpp"
#include "vdpm/train.hpp"

namespace vdpm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValue KeyValue::parse(const std::string& text) {
  KeyValue kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    kv.kv_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValue KeyValue::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValue::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
  return out.str();
}

void KeyValue::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config: " + path);
  out << to_text();
}

std::string KeyValue::get_string(const std::string& key, const std::string& def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double KeyValue::get_double(const std::string& key, double def) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw DataError("config key " + key + " is not a number: " + it->second);
  }
}

int KeyValue::get_int(const std::string& key, int def) const {
  return static_cast<int>(get_double(key, def));
}

std::uint64_t KeyValue::get_u64(const std::string& key, std::uint64_t def) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::uint64_t v = 0;
  const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (res.ec != std::errc()) throw DataError("config key " + key + " is not an integer");
  return v;
}

bool KeyValue::get_bool(const std::string& key, bool def) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DataError("config key " + key + " is not a boolean: " + v);
}

std::vector<double> KeyValue::get_list(const std::string& key) const {
  std::vector<double> out;
  const auto it = kv_.find(key);
  if (it == kv_.end()) return out;
  std::istringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

void KeyValue::set(const std::string& key, const std::string& value) { kv_[key] = value; }

void KeyValue::set_double(const std::string& key, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  kv_[key] = std::string(buf, res.ptr);
}

void KeyValue::set_int(const std::string& key, long long v) { kv_[key] = std::to_string(v); }

void KeyValue::set_bool(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }

TrainConfig train_config_from(const KeyValue& kv) {
  TrainConfig c;
  c.components = kv.get_int("train.components", c.components);
  c.parts_per_component = kv.get_int("train.parts", c.parts_per_component);
  c.C = kv.get_double("train.c", c.C);
  c.sgd.epochs = kv.get_int("train.sgd.epochs", c.sgd.epochs);
  c.sgd.eta0 = kv.get_double("train.sgd.eta0", c.sgd.eta0);
  c.sgd.t0_factor = kv.get_double("train.sgd.t0_factor", c.sgd.t0_factor);
  c.sgd.return_best = kv.get_bool("train.sgd.return_best", c.sgd.return_best);
  c.relabel_rounds = kv.get_int("train.relabel_rounds", c.relabel_rounds);
  c.neg_cache = kv.get_int("train.neg_cache", c.neg_cache);
  c.mine_per_image_cap = kv.get_int("train.mine_per_image_cap", c.mine_per_image_cap);
  c.mine_threshold = kv.get_double("train.mine_threshold", c.mine_threshold);
  c.mine_max_overlap = kv.get_double("train.mine_max_overlap", c.mine_max_overlap);
  c.latent_overlap = kv.get_double("train.latent_overlap", c.latent_overlap);
  c.calib_fraction = kv.get_double("train.calib_fraction", c.calib_fraction);
  c.calib_fppi = kv.get_double("train.calib_fppi", c.calib_fppi);
  c.root_negatives_per_image = kv.get_int("train.root_negatives_per_image", c.root_negatives_per_image);
  c.augment_flip_pretrain = kv.get_bool("train.augment_flip_pretrain", c.augment_flip_pretrain);
  c.deform_quad_floor = kv.get_double("train.deform_quad_floor", c.deform_quad_floor);
  c.seed = kv.get_u64("seed", kv.get_u64("train.seed", c.seed));
  c.threads = kv.get_int("threads", c.threads);
  c.hog.cell_size = kv.get_int("hog.cell_size", c.hog.cell_size);
  c.hog.interval = kv.get_int("hog.interval", c.hog.interval);
  if (kv.has("classes.positive")) {
    c.classes.positives.clear();
    std::istringstream ss(kv.get_string("classes.positive"));
    std::string tok;
    while (std::getline(ss, tok, ',')) c.classes.positives.push_back(trim(tok));
  }
  if (kv.has("classes.ignore")) {
    c.classes.ignores.clear();
    std::istringstream ss(kv.get_string("classes.ignore"));
    std::string tok;
    while (std::getline(ss, tok, ',')) c.classes.ignores.push_back(trim(tok));
  }
  c.moderate.max_truncation = kv.get_double("moderate.max_truncation", c.moderate.max_truncation);
  c.moderate.min_height = kv.get_double("moderate.min_height", c.moderate.min_height);
  return c;
}

AdaptConfig adapt_config_from(const KeyValue& kv) {
  AdaptConfig c;
  c.train = train_config_from(kv);
  c.gamma = kv.get_double("adapt.gamma", c.gamma);
  c.C = kv.get_double("adapt.c", kv.get_double("train.c", c.C));
  c.repetitions = kv.get_int("adapt.repetitions", c.repetitions);
  c.seed = kv.get_u64("adapt.seed", kv.get_u64("seed", c.seed));
  c.alternations = kv.get_int("adapt.alternations", c.alternations);
  return c;
}

DomainSpec domain_spec_from(const KeyValue& kv, const std::string& prefix) {
  DomainSpec s;
  const auto key = [&](const char* k) { return prefix + k; };
  s.name = kv.get_string(key("name"), s.name);
  s.version = kv.get_string(key("version"), s.version);
  s.body_shade = kv.get_double(key("body_shade"), s.body_shade);
  s.body_shade_spread = kv.get_double(key("body_shade_spread"), s.body_shade_spread);
  s.wheel_contrast = kv.get_double(key("wheel_contrast"), s.wheel_contrast);
  s.windshield_lift = kv.get_double(key("windshield_lift"), s.windshield_lift);
  s.edge_blur_sigma = kv.get_double(key("edge_blur_sigma"), s.edge_blur_sigma);
  s.distractor_density = kv.get_double(key("distractor_density"), s.distractor_density);
  s.noise_amp = kv.get_double(key("noise_amp"), s.noise_amp);
  s.aspect_mean = kv.get_double(key("aspect_mean"), s.aspect_mean);
  s.aspect_spread = kv.get_double(key("aspect_spread"), s.aspect_spread);
  s.height_min = kv.get_double(key("height_min"), s.height_min);
  s.height_max = kv.get_double(key("height_max"), s.height_max);
  s.gain = kv.get_double(key("gain"), s.gain);
  s.gamma = kv.get_double(key("gamma"), s.gamma);
  s.max_objects = kv.get_int(key("max_objects"), s.max_objects);
  s.seed = kv.get_u64(key("seed"), s.seed);
  return s;
}

KeyValue domain_spec_to_keyvalue(const DomainSpec& s, const std::string& prefix) {
  KeyValue kv;
  const auto key = [&](const char* k) { return prefix + k; };
  kv.set(key("name"), s.name);
  kv.set(key("version"), s.version);
  kv.set_double(key("body_shade"), s.body_shade);
  kv.set_double(key("body_shade_spread"), s.body_shade_spread);
  kv.set_double(key("wheel_contrast"), s.wheel_contrast);
  kv.set_double(key("windshield_lift"), s.windshield_lift);
  kv.set_double(key("edge_blur_sigma"), s.edge_blur_sigma);
  kv.set_double(key("distractor_density"), s.distractor_density);
  kv.set_double(key("noise_amp"), s.noise_amp);
  kv.set_double(key("aspect_mean"), s.aspect_mean);
  kv.set_double(key("aspect_spread"), s.aspect_spread);
  kv.set_double(key("height_min"), s.height_min);
  kv.set_double(key("height_max"), s.height_max);
  kv.set_double(key("gain"), s.gain);
  kv.set_double(key("gamma"), s.gamma);
  kv.set_int(key("max_objects"), s.max_objects);
  kv.set(key("seed"), std::to_string(s.seed));
  return kv;
}

}  // namespace vdpm
