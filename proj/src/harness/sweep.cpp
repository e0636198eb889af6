#include "gnp/harness/sweep.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "gnp/error.hpp"
#include "gnp/harness/train.hpp"

namespace gnp::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<std::string> expand_axis_values(const std::string& text) {
  const auto c1 = text.find(':');
  if (c1 == std::string::npos) return split_commas(text);
  const auto c2 = text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ConfigError("range '" + text + "' needs start:stop:step");
  const double start = parse_double("range", trim(text.substr(0, c1)));
  const double stop = parse_double("range", trim(text.substr(c1 + 1, c2 - c1 - 1)));
  const double step = parse_double("range", trim(text.substr(c2 + 1)));
  if (!(step > 0.0) || stop < start) throw ConfigError("range '" + text + "' is empty");
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  std::vector<std::string> out;
  for (long i = 0; i <= n; ++i) {
    // Rounded so that 0.1 * 3 prints as 0.3.
    const double v = std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12;
    out.push_back(format_double(v));
  }
  return out;
}

SweepSpec parse_sweep(const KeyValues& kv) {
  SweepSpec spec;
  for (const auto& [k, v] : kv) {
    if (k.rfind("sweep.", 0) != 0) {
      spec.base.emplace_back(k, v);
      continue;
    }
    const std::string sub = k.substr(6);
    if (sub == "name") {
      spec.name = v;
    } else if (sub == "seeds") {
      spec.seeds.clear();
      for (const auto& s : expand_axis_values(v)) {
        const auto x = parse_int("sweep.seeds", s);
        if (x < 0) throw ConfigError("sweep.seeds must be non-negative");
        spec.seeds.push_back(static_cast<std::uint64_t>(x));
      }
    } else if (sub == "cap") {
      spec.cap = static_cast<std::size_t>(parse_int(k, v));
    } else if (sub == "workers") {
      spec.workers = static_cast<int>(parse_int(k, v));
    } else if (sub.rfind("axis.", 0) == 0) {
      SweepAxis axis{sub.substr(5), expand_axis_values(v)};
      if (axis.key == "seed") throw ConfigError("use sweep.seeds instead of a seed axis");
      for (const auto& a : spec.axes) {
        if (a.key == axis.key) throw ConfigError("duplicate sweep axis '" + axis.key + "'");
      }
      spec.axes.push_back(std::move(axis));
    } else {
      throw ConfigError("unknown sweep key '" + k + "'");
    }
  }
  spec.validate();
  return spec;
}

std::size_t SweepSpec::cell_count() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

void SweepSpec::validate() const {
  if (seeds.empty()) throw ConfigError("sweep has no seeds");
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.key + "' has no values");
  }
  if (workers < 1) throw ConfigError("sweep.workers must be at least 1");
  if (run_count() > cap) {
    throw ConfigError("sweep has " + std::to_string(run_count()) + " runs, over the cap of " +
                      std::to_string(cap));
  }
  for (const auto& cell : sweep_cells(*this)) cell_config(*this, cell, seeds.front());
}

std::string SweepCell::label() const {
  std::string out;
  for (const auto& [k, v] : coords) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out.empty() ? "base" : out;
}

std::vector<SweepCell> sweep_cells(const SweepSpec& spec) {
  std::vector<SweepCell> cells{SweepCell{}};
  for (const auto& axis : spec.axes) {
    std::vector<SweepCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : axis.values) {
        SweepCell c = cell;
        c.coords.emplace_back(axis.key, v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

RunConfig cell_config(const SweepSpec& spec, const SweepCell& cell, std::uint64_t seed) {
  KeyValues flags(cell.coords.begin(), cell.coords.end());
  flags.emplace_back("seed", std::to_string(seed));
  flags.emplace_back("name", spec.name + "/" + cell.label() + "/seed=" + std::to_string(seed));
  return build_config(spec.base, flags);
}

std::vector<CellSummary> summarize(const SweepSpec& spec, const std::vector<RunRecord>& records) {
  const auto cells = sweep_cells(spec);
  const std::size_t n = spec.seeds.size();
  if (records.size() != cells.size() * n) throw Error("summarize: record count mismatch");
  std::vector<CellSummary> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary s;
    s.cell = cells[c];
    double loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const RunRecord& r = records[c * n + k];
      s.test_errors.push_back(r.final_row().test_error);
      loss += r.final_row().train_loss;
      if (r.outcome.diverged) ++s.diverged;
    }
    double mean = 0.0;
    for (double e : s.test_errors) mean += e;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double e : s.test_errors) var += (e - mean) * (e - mean);
    var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
    s.mean_test_error = mean;
    s.std_test_error = std::sqrt(var);
    s.sem_test_error = s.std_test_error / std::sqrt(static_cast<double>(n));
    s.mean_train_loss = loss / static_cast<double>(n);
    out.push_back(std::move(s));
  }
  return out;
}

std::string tidy_csv(const SweepSpec& spec, const std::vector<RunRecord>& records) {
  std::string out;
  for (const auto& a : spec.axes) out += a.key + ",";
  out += "seed,outcome,diverged_step,epochs_recorded,final_train_loss,final_test_error,"
         "final_grad_norm,initial_grad_norm,config_hash\n";
  const auto cells = sweep_cells(spec);
  const std::size_t n = spec.seeds.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t k = 0; k < n; ++k) {
      const RunRecord& r = records[c * n + k];
      for (const auto& [key, v] : cells[c].coords) out += v + ",";
      out += std::to_string(spec.seeds[k]) + ",";
      out += std::string(r.outcome.diverged ? "diverged" : "converged") + ",";
      out += std::to_string(r.outcome.step) + ",";
      out += std::to_string(r.final_row().epoch) + ",";
      out += format_double(r.final_row().train_loss) + ",";
      out += format_double(r.final_row().test_error) + ",";
      out += format_double(r.final_row().grad_norm) + ",";
      out += format_double(r.rows.front().grad_norm) + ",";
      out += config_hash(r.config) + "\n";
    }
  }
  return out;
}

std::string summary_csv(const SweepSpec& spec, const std::vector<CellSummary>& summary) {
  std::string out;
  for (const auto& a : spec.axes) out += a.key + ",";
  out += "n_seeds,n_diverged,mean_test_error,std_test_error,sem_test_error,mean_train_loss\n";
  for (const CellSummary& s : summary) {
    for (const auto& [key, v] : s.cell.coords) out += v + ",";
    out += std::to_string(s.test_errors.size()) + "," + std::to_string(s.diverged) + "," +
           format_double(s.mean_test_error) + "," + format_double(s.std_test_error) + "," +
           format_double(s.sem_test_error) + "," + format_double(s.mean_train_loss) + "\n";
  }
  return out;
}

SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& opts) {
  spec.validate();
  const std::filesystem::path root = opts.out_dir.empty() ? output_root() / spec.name : opts.out_dir;
  const auto cells = sweep_cells(spec);
  const std::size_t n = spec.seeds.size();
  const std::size_t total = cells.size() * n;

  std::vector<RunConfig> configs;
  configs.reserve(total);
  for (const auto& cell : cells) {
    for (std::uint64_t seed : spec.seeds) configs.push_back(cell_config(spec, cell, seed));
  }

  std::vector<std::optional<RunRecord>> records(total);
  SweepResult result;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<int> budget{opts.max_new_runs < 0 ? std::numeric_limits<int>::max()
                                                 : opts.max_new_runs};
  std::exception_ptr failure;

  const auto log = [&](const std::string& msg) {
    if (!opts.log) return;
    std::lock_guard<std::mutex> lock(mu);
    opts.log(msg);
  };

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      try {
        const RunConfig& cfg = configs[i];
        const std::string hash = config_hash(cfg);
        const std::filesystem::path dir = root / "runs" / hash;
        const RunFiles files = run_files(dir);
        if (std::filesystem::exists(files.record)) {
          RunRecord rec = record_from_json(nlohmann::json::parse(read_text(files.record)));
          if (config_hash(rec.config) == hash) {
            records[i] = std::move(rec);
            std::lock_guard<std::mutex> lock(mu);
            ++result.reused;
            continue;
          }
        }
        if (budget.fetch_sub(1) <= 0) continue;
        TrainResult tr = train_run(cfg);
        write_run(tr, dir);
        log(cfg.name + ": " + tr.record.outcome.label() + ", test error " +
            format_double(tr.record.final_row().test_error));
        records[i] = std::move(tr.record);
        std::lock_guard<std::mutex> lock(mu);
        ++result.trained;
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int threads = std::max(1, std::min<int>(spec.workers, static_cast<int>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& r : records) {
    if (!r) return result;
  }
  result.complete = true;
  for (auto& r : records) result.records.push_back(std::move(*r));
  result.summary = summarize(spec, result.records);
  result.tidy_csv = root / "tidy.csv";
  result.summary_csv = root / "summary.csv";
  write_text(result.tidy_csv, tidy_csv(spec, result.records));
  write_text(result.summary_csv, summary_csv(spec, result.summary));
  return result;
}

}  // namespace gnp::harness
