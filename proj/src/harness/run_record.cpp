#include "gnp/harness/run_record.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "gnp/error.hpp"

namespace gnp::harness {

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// JSON has no NaN or infinity; non-finite values are written as strings.
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw IoError("run record: bad number '" + s + "'");
}

}  // namespace

std::string Outcome::label() const {
  return diverged ? "diverged(" + std::to_string(step) + ")" : "converged";
}

nlohmann::json to_json(const FlatnessReport& r) {
  return {{"grad_norm_at_theta", number(r.grad_norm_at_theta)},
          {"local_lipschitz_est", number(r.local_lipschitz_est)},
          {"sharpness_est", number(r.sharpness_est)},
          {"top_eig_est", number(r.top_eig_est)},
          {"n_samples", r.n_samples},
          {"rho", r.rho}};
}

FlatnessReport flatness_from_json(const nlohmann::json& j) {
  FlatnessReport r;
  r.grad_norm_at_theta = number(j.at("grad_norm_at_theta"));
  r.local_lipschitz_est = number(j.at("local_lipschitz_est"));
  r.sharpness_est = number(j.at("sharpness_est"));
  r.top_eig_est = number(j.at("top_eig_est"));
  r.n_samples = j.at("n_samples").get<std::size_t>();
  r.rho = j.at("rho").get<double>();
  return r;
}

nlohmann::json to_json(const RunRecord& record) {
  nlohmann::json j;
  j["name"] = record.config.name;
  j["config"] = to_key_values(record.config);
  j["config_hash"] = config_hash(record.config);
  nlohmann::json rows = nlohmann::json::array();
  for (const EpochRow& r : record.rows) {
    rows.push_back({{"epoch", r.epoch},
                    {"train_loss", number(r.train_loss)},
                    {"test_error", number(r.test_error)},
                    {"grad_norm", number(r.grad_norm)},
                    {"lr", r.lr},
                    {"wall_ms", r.wall_ms}});
  }
  j["rows"] = rows;
  j["flatness"] = record.flatness ? to_json(*record.flatness) : nlohmann::json(nullptr);
  j["outcome"] = record.outcome.label();
  if (record.outcome.diverged) {
    j["diverged_step"] = record.outcome.step;
    j["diverged_in"] = record.outcome.where;
  }
  j["experimental"] = record.experimental;
  j["params_hash"] = record.params_hash;
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord rec;
  try {
    KeyValues kv;
    for (const auto& [k, v] : j.at("config").items()) kv.emplace_back(k, v.get<std::string>());
    if (j.contains("name")) kv.emplace_back("name", j.at("name").get<std::string>());
    rec.config = build_config(kv);
    for (const auto& r : j.at("rows")) {
      EpochRow row;
      row.epoch = r.at("epoch").get<int>();
      row.train_loss = number(r.at("train_loss"));
      row.test_error = number(r.at("test_error"));
      row.grad_norm = number(r.at("grad_norm"));
      row.lr = r.at("lr").get<double>();
      row.wall_ms = r.at("wall_ms").get<double>();
      rec.rows.push_back(row);
    }
    if (!j.at("flatness").is_null()) rec.flatness = flatness_from_json(j.at("flatness"));
    rec.outcome.diverged = j.at("outcome").get<std::string>() != "converged";
    if (rec.outcome.diverged) {
      rec.outcome.step = j.at("diverged_step").get<std::int64_t>();
      rec.outcome.where = j.at("diverged_in").get<std::string>();
    }
    rec.experimental = j.at("experimental").get<bool>();
    rec.params_hash = j.at("params_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed run record: ") + e.what());
  }
  return rec;
}

std::string metrics_csv(const RunRecord& record) {
  std::string out = "epoch,train_loss,test_error,grad_norm,lr,wall_ms\n";
  for (const EpochRow& r : record.rows) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           format_double(r.test_error) + "," + format_double(r.grad_norm) + "," +
           format_double(r.lr) + "," + format_double(r.wall_ms) + "\n";
  }
  return out;
}

bool same_trajectory(const RunRecord& a, const RunRecord& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const EpochRow& x = a.rows[i];
    const EpochRow& y = b.rows[i];
    if (x.epoch != y.epoch || !same_bits(x.train_loss, y.train_loss) ||
        !same_bits(x.test_error, y.test_error) || !same_bits(x.grad_norm, y.grad_norm) ||
        !same_bits(x.lr, y.lr)) {
      return false;
    }
  }
  if (a.flatness.has_value() != b.flatness.has_value()) return false;
  if (a.flatness) {
    const FlatnessReport& x = *a.flatness;
    const FlatnessReport& y = *b.flatness;
    if (!same_bits(x.grad_norm_at_theta, y.grad_norm_at_theta) ||
        !same_bits(x.local_lipschitz_est, y.local_lipschitz_est) ||
        !same_bits(x.sharpness_est, y.sharpness_est) || !same_bits(x.top_eig_est, y.top_eig_est)) {
      return false;
    }
  }
  return a.outcome.diverged == b.outcome.diverged && a.outcome.step == b.outcome.step &&
         a.params_hash == b.params_hash;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gnp::harness
