#include "gnp/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gnp/error.hpp"

namespace gnp::harness {

Scheme parse_scheme(const std::string& name) {
  if (name == "standard") return Scheme::kStandard;
  if (name == "sam") return Scheme::kSam;
  if (name == "gnp") return Scheme::kGnp;
  throw ConfigError("unknown scheme '" + name + "' (expected standard, sam or gnp)");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kStandard:
      return "standard";
    case Scheme::kSam:
      return "sam";
    case Scheme::kGnp:
      return "gnp";
  }
  return "gnp";
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("key '" + key + "': not a number: '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("key '" + key + "': not an integer: '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("key '" + key + "': not a boolean: '" + text + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("key '" + key + "': not an unsigned integer: '" + text + "'");
  }
  return v;
}

std::vector<std::size_t> parse_layers(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_int("layers", trim(item));
    if (v <= 0) throw ConfigError("key 'layers': sizes must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string join_layers(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(sizes[i]);
  }
  return out;
}

void check_layer(const KeyValues& layer, const char* origin) {
  bool alpha = false, lambda = false;
  for (const auto& [k, v] : layer) {
    alpha |= k == "alpha";
    lambda |= k == "lambda";
  }
  if (alpha && lambda) {
    throw ConfigError(std::string("alpha and lambda are mutually exclusive (both given in ") +
                      origin + ")");
  }
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "name") {
    cfg.name = value;
  } else if (key == "scheme") {
    cfg.scheme = parse_scheme(value);
  } else if (key == "alpha") {
    cfg.optim.alpha = parse_double(key, value);
    cfg.optim.lambda.reset();
  } else if (key == "lambda") {
    cfg.optim.lambda = parse_double(key, value);
    cfg.optim.alpha.reset();
  } else if (key == "r") {
    cfg.optim.r = parse_double(key, value);
  } else if (key == "p") {
    cfg.optim.p = parse_double(key, value);
  } else if (key == "lr") {
    cfg.optim.lr = parse_double(key, value);
  } else if (key == "momentum") {
    cfg.optim.momentum = parse_double(key, value);
  } else if (key == "weight_decay") {
    cfg.optim.weight_decay = parse_double(key, value);
  } else if (key == "schedule") {
    cfg.optim.schedule = parse_schedule(value);
  } else if (key == "grad_floor") {
    cfg.optim.grad_floor = parse_double(key, value);
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    const auto v = parse_int(key, value);
    if (v <= 0) throw ConfigError("key 'batch_size' must be positive");
    cfg.batch_size = static_cast<std::size_t>(v);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "data_seed") {
    cfg.data_seed = parse_u64(key, value);
  } else if (key == "dataset") {
    cfg.dataset.kind = parse_dataset_kind(value);
  } else if (key == "dataset_size") {
    const auto v = parse_int(key, value);
    if (v < 0) throw ConfigError("key 'dataset_size' must be non-negative");
    cfg.dataset.size = static_cast<std::size_t>(v);
  } else if (key == "noise") {
    cfg.dataset.noise = parse_double(key, value);
  } else if (key == "split") {
    cfg.dataset.split = parse_double(key, value);
  } else if (key == "classes") {
    cfg.dataset.classes = static_cast<int>(parse_int(key, value));
  } else if (key == "images") {
    cfg.dataset.images_path = value;
  } else if (key == "labels") {
    cfg.dataset.labels_path = value;
  } else if (key == "layers") {
    cfg.model.layer_sizes = parse_layers(value);
  } else if (key == "activation") {
    cfg.model.activation = parse_activation(value);
  } else if (key == "init") {
    cfg.model.init = parse_init_scheme(value);
  } else if (key == "probe") {
    cfg.probe = parse_bool(key, value);
  } else if (key == "probe_rho") {
    cfg.probe_cfg.rho = parse_double(key, value);
  } else if (key == "probe_samples") {
    cfg.probe_cfg.n_samples = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "probe_seed") {
    cfg.probe_cfg.seed = parse_u64(key, value);
  } else if (key == "probe_ascent_steps") {
    cfg.probe_cfg.ascent_steps = static_cast<int>(parse_int(key, value));
  } else if (key == "probe_power_iters") {
    cfg.probe_cfg.power_iters = static_cast<int>(parse_int(key, value));
  } else if (key == "deterministic") {
    cfg.deterministic = parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig build_config(const KeyValues& file, const KeyValues& flags) {
  check_layer(file, "config file");
  check_layer(flags, "flags");
  RunConfig cfg;
  bool penalty_given = false;
  for (const KeyValues* layer : {&file, &flags}) {
    for (const auto& [k, v] : *layer) {
      apply_key(cfg, k, v);
      penalty_given |= k == "alpha" || k == "lambda";
    }
  }
  if (cfg.scheme != Scheme::kGnp) {
    const double fixed = cfg.scheme == Scheme::kStandard ? 0.0 : 1.0;
    if (penalty_given && !(cfg.optim.alpha && *cfg.optim.alpha == fixed)) {
      throw ConfigError("scheme " + to_string(cfg.scheme) + " fixes alpha = " +
                        format_double(fixed) + "; drop alpha/lambda or use scheme = gnp");
    }
    cfg.optim.lambda.reset();
    cfg.optim.alpha = fixed;
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  optim.validate();
  if (scheme == Scheme::kStandard && optim.balance() != 0.0) {
    throw ConfigError("scheme standard requires alpha = 0");
  }
  if (scheme == Scheme::kSam && optim.balance() != 1.0) {
    throw ConfigError("scheme sam requires alpha = 1");
  }
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  resolved_dataset().validate();
  model.validate();
  if (dataset.kind != DatasetKind::kIdxFiles) {
    const int classes = dataset.kind == DatasetKind::kTwoMoons ? 2 : dataset.classes;
    if (model.classes() != classes) {
      throw ConfigError("model output width " + std::to_string(model.classes()) +
                        " does not match " + std::to_string(classes) + " classes");
    }
    if (model.inputs() != 2) throw ConfigError("synthetic datasets have 2 input features");
  }
  if (probe) {
    if (!(probe_cfg.rho > 0.0)) throw ConfigError("probe_rho must be positive");
    if (probe_cfg.n_samples == 0) throw ConfigError("probe_samples must be positive");
  }
}

DatasetSpec RunConfig::resolved_dataset() const {
  DatasetSpec d = dataset;
  d.seed = data_seed.value_or(seed);
  return d;
}

ModelSpec RunConfig::resolved_model() const {
  ModelSpec m = model;
  m.seed = seed;
  return m;
}

std::map<std::string, std::string> to_key_values(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["scheme"] = to_string(cfg.scheme);
  if (cfg.optim.lambda) {
    kv["lambda"] = format_double(*cfg.optim.lambda);
  } else if (cfg.optim.alpha) {
    kv["alpha"] = format_double(*cfg.optim.alpha);
  }
  kv["r"] = format_double(cfg.optim.r);
  kv["p"] = format_double(cfg.optim.p);
  kv["lr"] = format_double(cfg.optim.lr);
  kv["momentum"] = format_double(cfg.optim.momentum);
  kv["weight_decay"] = format_double(cfg.optim.weight_decay);
  kv["schedule"] = to_string(cfg.optim.schedule);
  kv["grad_floor"] = format_double(cfg.optim.grad_floor);
  kv["epochs"] = std::to_string(cfg.epochs);
  kv["batch_size"] = std::to_string(cfg.batch_size);
  kv["seed"] = std::to_string(cfg.seed);
  if (cfg.data_seed) kv["data_seed"] = std::to_string(*cfg.data_seed);
  kv["dataset"] = to_string(cfg.dataset.kind);
  kv["dataset_size"] = std::to_string(cfg.dataset.size);
  kv["noise"] = format_double(cfg.dataset.noise);
  kv["split"] = format_double(cfg.dataset.split);
  kv["classes"] = std::to_string(cfg.dataset.classes);
  if (cfg.dataset.kind == DatasetKind::kIdxFiles) {
    kv["images"] = cfg.dataset.images_path.string();
    kv["labels"] = cfg.dataset.labels_path.string();
  }
  kv["layers"] = join_layers(cfg.model.layer_sizes);
  kv["activation"] = to_string(cfg.model.activation);
  kv["init"] = to_string(cfg.model.init);
  kv["probe"] = cfg.probe ? "true" : "false";
  if (cfg.probe) {
    kv["probe_rho"] = format_double(cfg.probe_cfg.rho);
    kv["probe_samples"] = std::to_string(cfg.probe_cfg.n_samples);
    kv["probe_seed"] = std::to_string(cfg.probe_cfg.seed);
    kv["probe_ascent_steps"] = std::to_string(cfg.probe_cfg.ascent_steps);
    kv["probe_power_iters"] = std::to_string(cfg.probe_cfg.power_iters);
  }
  return kv;
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t basis) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = canonical_text(cfg);
  const std::uint64_t h = fnv1a(text.data(), text.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path output_root() {
  const char* env = std::getenv(kOutputEnv);
  if (env && *env) return env;
  return "runs";
}

}  // namespace gnp::harness
