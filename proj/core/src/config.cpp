#include "stymam/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "stymam/errors.hpp"

namespace stymam {

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::Desk;
  if (name == "paper") return Profile::Paper;
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

const char* to_string(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

TrainConfig TrainConfig::for_profile(Profile p) {
  TrainConfig c;
  c.profile = to_string(p);
  if (p == Profile::Paper) {
    c.image_size = 256;
    c.generator = GeneratorConfig::paper();
    c.discriminator = DiscriminatorConfig::paper();
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(lr_g >= 0) || !(lr_d >= 0)) throw ConfigError("learning rates must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0 || max_steps == 0 || image_size == 0 || checkpoint_every == 0) {
    throw ConfigError("batch_size, max_steps, image_size and checkpoint_every must be positive");
  }
  if (image_size % 4 != 0) throw ConfigError("image_size must be a multiple of 4");
  if (!(loss.content >= 0) || !(loss.adversarial >= 0)) throw ConfigError("loss weights must be non-negative");
  generator.validate();
  discriminator.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  if constexpr (std::is_unsigned_v<T>) {
    if (value.find('-') != std::string::npos) throw ConfigError("config key '" + key + "': must be non-negative");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

void assign(TrainConfig& c, const std::string& key, const std::string& v) {
  auto sz = [&] { return parse_number<std::size_t>(key, v); };
  auto real = [&] { return parse_number<Real>(key, v); };
  if (key == "lr_g") c.lr_g = real();
  else if (key == "lr_d") c.lr_d = real();
  else if (key == "beta1") c.beta1 = real();
  else if (key == "beta2") c.beta2 = real();
  else if (key == "adam_eps") c.adam_eps = real();
  else if (key == "batch_size") c.batch_size = sz();
  else if (key == "max_steps") c.max_steps = sz();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "image_size") c.image_size = sz();
  else if (key == "lambda_c") c.loss.content = real();
  else if (key == "lambda_adv") c.loss.adversarial = real();
  else if (key == "generator_loss") {
    if (v == "nonsaturating") c.generator_loss = GeneratorLossMode::NonSaturating;
    else if (v == "saturating") c.generator_loss = GeneratorLossMode::Saturating;
    else throw ConfigError("config key 'generator_loss': expected saturating or nonsaturating, got '" + v + "'");
  }
  else if (key == "checkpoint_every") c.checkpoint_every = sz();
  else if (key == "content_dir") c.content_dir = v;
  else if (key == "style_dir") c.style_dir = v;
  else if (key == "metrics_path") c.metrics_path = v;
  else if (key == "checkpoint_path") c.checkpoint_path = v;
  else if (key == "extractor_seed") c.extractor_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "extractor_weights") c.extractor_weights = v;
  else if (key == "channels") c.generator.channels = sz();
  else if (key == "state_dim") c.generator.state_dim = sz();
  else if (key == "num_rdsmb") c.generator.num_rdsmb = sz();
  else if (key == "dsmb_per_rdsmb") c.generator.dsmb_per_rdsmb = sz();
  else if (key == "strip_size") c.generator.strip_size = sz();
  else if (key == "alpha_init") c.generator.alpha_init = real();
  else if (key == "selective") c.generator.selective = parse_bool(key, v);
  else if (key == "crsa_softmax") c.generator.crsa_softmax = parse_bool(key, v);
  else if (key == "disc_scales") c.discriminator.scales = sz();
  else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::vector<std::string> order;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!entries.emplace(key, trim(line.substr(eq + 1))).second) throw ConfigError("duplicate config key '" + key + "'");
    order.push_back(key);
  }
  TrainConfig cfg = TrainConfig::for_profile(entries.count("profile") ? parse_profile(entries["profile"]) : Profile::Desk);
  for (const auto& key : order) {
    if (key != "profile") assign(cfg, key, entries[key]);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg = parse_train_config(ss.str());
  // Relative data/output paths resolve against the config file's directory.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.content_dir, &cfg.style_dir, &cfg.metrics_path, &cfg.checkpoint_path, &cfg.extractor_weights}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return cfg;
}

void apply_env_overrides(TrainConfig& cfg) {
  if (const char* s = std::getenv("STYMAM_SEED"); s && *s) {
    cfg.seed = parse_number<std::uint64_t>("STYMAM_SEED", s);
  }
}

}  // namespace stymam
