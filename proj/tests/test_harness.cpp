#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "gnp/error.hpp"
#include "gnp/harness/checkpoint.hpp"
#include "gnp/harness/config.hpp"
#include "gnp/harness/probe.hpp"
#include "gnp/harness/run_record.hpp"
#include "gnp/harness/sweep.hpp"
#include "gnp/harness/train.hpp"
#include "gnp/harness/verify.hpp"

using namespace gnp;
using namespace gnp::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gnp_test_harness_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig small_config() {
  RunConfig cfg = tiny_run_config();
  cfg.name = "small";
  cfg.deterministic = true;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GNP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("key-value parsing") {
  const KeyValues kv = parse_key_values("# comment\n alpha = 0.5 \n\nlr=0.1 # trailing\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0].first == "alpha");
  CHECK(kv[0].second == "0.5");
  CHECK(kv[1].second == "0.1");
  CHECK_THROWS_WITH_AS(parse_key_values("lr 0.1"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("= 3"), ConfigError);
}

TEST_CASE("config building") {
  SUBCASE("defaults validate") { CHECK_NOTHROW(build_config({})); }
  SUBCASE("alpha and lambda in one layer") {
    CHECK_THROWS_AS(build_config({{"alpha", "0.5"}, {"lambda", "0.01"}}), ConfigError);
    CHECK_THROWS_AS(build_config({}, {{"alpha", "0.5"}, {"lambda", "0.01"}}), ConfigError);
  }
  SUBCASE("a flag replaces the file's choice") {
    const RunConfig cfg = build_config({{"alpha", "0.5"}}, {{"lambda", "0.01"}});
    CHECK_FALSE(cfg.optim.alpha.has_value());
    CHECK(*cfg.optim.lambda == 0.01);
    CHECK(cfg.optim.balance() == doctest::Approx(0.2));
  }
  SUBCASE("flag wins") {
    const RunConfig cfg = build_config({{"lr", "0.1"}, {"epochs", "5"}}, {{"lr", "0.3"}});
    CHECK(cfg.optim.lr == 0.3);
    CHECK(cfg.epochs == 5);
  }
  SUBCASE("schemes fix alpha") {
    CHECK(build_config({{"scheme", "standard"}}).optim.balance() == 0.0);
    CHECK(build_config({{"scheme", "sam"}}).optim.balance() == 1.0);
    CHECK_NOTHROW(build_config({{"scheme", "sam"}, {"alpha", "1"}}));
    CHECK_THROWS_AS(build_config({{"scheme", "standard"}, {"alpha", "0.5"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"scheme", "bogus"}}), ConfigError);
  }
  SUBCASE("bad values") {
    CHECK_THROWS_AS(build_config({{"nonsense", "1"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"lr", "fast"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"layers", "2,0,2"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"layers", "3,8,2"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"layers", "2,8,3"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"split", "1.5"}}), ConfigError);
  }
  SUBCASE("negative alpha is allowed and flagged") {
    const RunConfig cfg = build_config({{"alpha", "-0.2"}});
    CHECK(cfg.optim.experimental());
  }
}

TEST_CASE("canonical text and hashing") {
  const RunConfig a = build_config({{"alpha", "0.3"}, {"seed", "4"}});
  RunConfig b = build_config({{"seed", "4"}, {"alpha", "0.3"}, {"name", "other"}});
  CHECK(canonical_text(a) == canonical_text(b));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 5;
  CHECK(config_hash(a) != config_hash(b));
  // The canonical text parses back to the same config.
  KeyValues kv;
  for (const auto& [k, v] : to_key_values(a)) kv.emplace_back(k, v);
  CHECK(canonical_text(build_config(kv)) == canonical_text(a));
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double("x", format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("output root follows the environment") {
  ::setenv(kOutputEnv, "/tmp/somewhere", 1);
  CHECK(output_root() == fs::path("/tmp/somewhere"));
  ::unsetenv(kOutputEnv);
  CHECK(output_root() == fs::path("runs"));
}

TEST_CASE("checkpoint round trip") {
  SegmentTable table;
  table.append("w", {2, 3});
  table.append("b", {3});
  std::vector<double> values{1.0, -0.0, 1e-310, std::numeric_limits<double>::infinity(),
                             std::nextafter(1.0, 2.0), -3.5, 0.1, 0.2, 0.3};
  values[3] = std::numeric_limits<double>::quiet_NaN();
  const ParamVector p(table, values);
  const fs::path path = scratch("ckpt") / "p.ckpt";
  save_checkpoint(path, p, {{"note", "x"}});
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.params.identical(p));
  CHECK(ck.params.layout() == p.layout());
  CHECK(ck.meta.at("note") == "x");

  std::string bytes = encode_checkpoint(p, {});
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(decode_checkpoint("NOTACKPT" + bytes.substr(8)), IoError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 12)), IoError);
  std::string bad_header = bytes;
  bad_header[17] = '!';
  CHECK_THROWS_AS(decode_checkpoint(bad_header), IoError);
  CHECK_THROWS_AS(load_checkpoint(path.parent_path() / "missing.ckpt"), IoError);
}

TEST_CASE("run records") {
  TrainResult r = train_run(small_config());
  const RunRecord& rec = r.record;
  REQUIRE(rec.rows.size() == 4);
  for (std::size_t i = 0; i < rec.rows.size(); ++i) CHECK(rec.rows[i].epoch == static_cast<int>(i));
  CHECK(rec.outcome.label() == "converged");
  CHECK(rec.params_hash == params_hash(r.params));

  const RunRecord back = record_from_json(to_json(rec));
  CHECK(same_trajectory(rec, back));
  CHECK(to_json(back).dump() == to_json(rec).dump());

  const std::string csv = metrics_csv(rec);
  CHECK(csv.rfind("epoch,train_loss,test_error,grad_norm,lr,wall_ms\n", 0) == 0);

  const fs::path dir = scratch("record");
  const RunFiles files = write_run(r, dir);
  CHECK(fs::exists(files.record));
  CHECK(read_text(files.metrics) == csv);
  CHECK(load_checkpoint(files.checkpoint).params.identical(r.params));
}

TEST_CASE("training is deterministic") {
  const TrainResult a = train_run(small_config());
  const TrainResult b = train_run(small_config());
  CHECK(to_json(a.record).dump() == to_json(b.record).dump());
  CHECK(a.params.identical(b.params));
  RunConfig other = small_config();
  other.seed = 1;
  CHECK_FALSE(train_run(other).params.identical(a.params));
}

TEST_CASE("scheme reductions at run level") {
  RunConfig standard = small_config();
  standard.scheme = Scheme::kStandard;
  standard.optim = GnpConfig::with_alpha(0.0);
  standard.optim.momentum = 0.9;
  RunConfig zero = standard;
  zero.scheme = Scheme::kGnp;
  const TrainResult s = train_run(standard);
  CHECK(same_trajectory(s.record, train_run(zero).record));
  CHECK(s.params.identical(reference_run(standard, false)));

  RunConfig sam = standard;
  sam.scheme = Scheme::kSam;
  sam.optim.alpha = 1.0;
  CHECK(train_run(sam).params.identical(reference_run(sam, true)));
}

TEST_CASE("divergence is an outcome") {
  RunConfig cfg = small_config();
  cfg.model.activation = Activation::kRelu;
  cfg.model.init = InitScheme::kHe;
  cfg.optim.lr = 1e6;
  cfg.epochs = 20;
  const TrainResult r = train_run(cfg);
  CHECK(r.record.outcome.diverged);
  CHECK(r.record.outcome.step >= 0);
  CHECK(r.record.rows.size() < 21);
  CHECK(r.record.outcome.label().rfind("diverged(", 0) == 0);
  CHECK_FALSE(r.record.flatness.has_value());
  const RunRecord back = record_from_json(to_json(r.record));
  CHECK(back.outcome.step == r.record.outcome.step);
}

TEST_CASE("sweep axes and cells") {
  CHECK(expand_axis_values("0:1:0.25") == std::vector<std::string>{"0", "0.25", "0.5", "0.75", "1"});
  CHECK(expand_axis_values("0:1:0.1").size() == 11);
  CHECK(expand_axis_values("0:1:0.1")[3] == "0.3");
  CHECK(expand_axis_values("a, b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK_THROWS_AS(expand_axis_values("1:0:0.1"), ConfigError);

  const SweepSpec spec = parse_sweep({{"epochs", "2"},
                                      {"sweep.axis.alpha", "0,0.5"},
                                      {"sweep.axis.r", "0.01,0.05,0.1"},
                                      {"sweep.seeds", "0,1"}});
  CHECK(spec.cell_count() == 6);
  CHECK(spec.run_count() == 12);
  const auto cells = sweep_cells(spec);
  CHECK(cells[0].label() == "alpha=0;r=0.01");
  CHECK(cells[1].label() == "alpha=0;r=0.05");
  CHECK(cell_config(spec, cells[5], 1).optim.r == 0.1);
  CHECK(*cell_config(spec, cells[5], 1).optim.alpha == 0.5);

  CHECK_THROWS_AS(parse_sweep({{"sweep.axis.alpha", "0:1:0.1"}, {"sweep.seeds", "0:9:1"},
                               {"sweep.cap", "50"}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_sweep({{"sweep.bogus", "1"}}), ConfigError);
  CHECK_THROWS_AS(parse_sweep({{"sweep.axis.lr", "fast"}}), ConfigError);
}

TEST_CASE("sweep resumes to the same summary") {
  const KeyValues kv{{"epochs", "2"},          {"dataset_size", "96"},    {"layers", "2,6,2"},
                     {"batch_size", "16"},     {"probe", "false"},        {"sweep.name", "mini"},
                     {"sweep.axis.alpha", "0,0.5,1"}, {"sweep.seeds", "0,1"}};
  const SweepSpec spec = parse_sweep(kv);

  SweepOptions straight;
  straight.out_dir = scratch("sweep_straight");
  const SweepResult full = run_sweep(spec, straight);
  REQUIRE(full.complete);
  CHECK(full.trained == 6);
  CHECK(full.summary.size() == 3);

  SweepOptions interrupted;
  interrupted.out_dir = scratch("sweep_resumed");
  interrupted.max_new_runs = 4;
  const SweepResult part = run_sweep(spec, interrupted);
  CHECK_FALSE(part.complete);
  CHECK(part.trained == 4);
  CHECK_FALSE(fs::exists(interrupted.out_dir / "summary.csv"));
  interrupted.max_new_runs = -1;
  const SweepResult rest = run_sweep(spec, interrupted);
  REQUIRE(rest.complete);
  CHECK(rest.reused == 4);
  CHECK(rest.trained == 2);
  CHECK(read_text(rest.summary_csv) == read_text(full.summary_csv));
  CHECK(read_text(rest.tidy_csv) == read_text(full.tidy_csv));

  // Single-cell sweep equals a direct run.
  const SweepSpec one = parse_sweep({{"epochs", "2"}, {"dataset_size", "96"}, {"layers", "2,6,2"},
                                     {"batch_size", "16"}, {"probe", "false"}, {"alpha", "0.5"},
                                     {"sweep.seeds", "1"}});
  SweepOptions o;
  o.out_dir = scratch("sweep_one");
  const SweepResult single = run_sweep(one, o);
  REQUIRE(single.records.size() == 1);
  CHECK(same_trajectory(single.records[0], train_run(cell_config(one, sweep_cells(one)[0], 1)).record));
}

TEST_CASE("sweep workers give the same tables") {
  const KeyValues kv{{"epochs", "1"},        {"dataset_size", "64"}, {"layers", "2,4,2"},
                     {"batch_size", "16"},   {"probe", "false"},     {"sweep.axis.alpha", "0,1"},
                     {"sweep.seeds", "0,1"}, {"sweep.workers", "3"}};
  SweepSpec spec = parse_sweep(kv);
  SweepOptions a;
  a.out_dir = scratch("workers_3");
  const SweepResult threaded = run_sweep(spec, a);
  spec.workers = 1;
  SweepOptions b;
  b.out_dir = scratch("workers_1");
  const SweepResult serial = run_sweep(spec, b);
  CHECK(read_text(threaded.summary_csv) == read_text(serial.summary_csv));
}

TEST_CASE("verify passes and catches a broken combination") {
  const VerifyReport ok = run_verify();
  for (const auto& c : ok.checks) {
    INFO(c.name << " measured " << c.measured);
    CHECK(c.passed);
  }
  CHECK(ok.passed());
  const auto j = to_json(ok);
  CHECK(j.at("checks").size() == ok.checks.size());
  CHECK(j.at("checks")[0].contains("tolerance"));
  CHECK(j.at("checks")[0].contains("measured"));

  VerifyOptions broken;
  broken.combine = [](const ParamVector& g1, const ParamVector& g2, double alpha) {
    return sub(scale(g1, 1.0 - alpha), scale(g2, alpha));
  };
  const VerifyReport bad = run_verify(broken);
  CHECK_FALSE(bad.passed());
  CHECK_FALSE(bad.find("reduction_alpha1_gradient").passed);
  CHECK_FALSE(bad.find("quadratic_exactness").passed);
}

TEST_CASE("probe") {
  SUBCASE("zero linear model on mirrored data has zero gradient") {
    ModelSpec linear;
    linear.layer_sizes = {2, 2};
    Tensor x({4, 2}, std::vector<double>{1.0, 2.0, 1.0, 2.0, -3.0, 0.5, -3.0, 0.5});
    const Batch batch{x, {0, 1, 0, 1}};
    const ParamVector zero(linear.layout());
    const FlatnessReport rep = probe_flatness(MlpObjective(linear, batch), zero, ProbeConfig{});
    CHECK(rep.grad_norm_at_theta < 1e-15);
  }
  SUBCASE("checkpoint probe is reproducible") {
    TrainResult r = train_run(small_config());
    const RunFiles files = write_run(r, scratch("probe"));
    ProbeConfig cfg;
    cfg.n_samples = 16;
    cfg.power_iters = 10;
    const FlatnessReport a = probe_checkpoint(files.checkpoint, cfg);
    const FlatnessReport b = probe_checkpoint(files.checkpoint, cfg);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.grad_norm_at_theta == doctest::Approx(r.record.final_row().grad_norm));
  }
  SUBCASE("malformed checkpoints") {
    const fs::path dir = scratch("probe_bad");
    write_text(dir / "junk.ckpt", "not a checkpoint");
    CHECK_THROWS_AS(probe_checkpoint(dir / "junk.ckpt", ProbeConfig{}), IoError);
    save_checkpoint(dir / "nometa.ckpt", ParamVector::flat({1.0}));
    CHECK_THROWS_AS(probe_checkpoint(dir / "nometa.ckpt", ProbeConfig{}), IoError);
  }
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  const std::string common = "--set epochs=2 --set dataset_size=64 --set layers=2,4,2 --set batch_size=16 --set probe=false -q";
  CHECK(run_cli("train " + common + " -o " + (dir / "ok").string()) == 0);
  CHECK(fs::exists(dir / "ok" / "record.json"));
  CHECK(run_cli("train " + common + " --set activation=relu --set init=he --lr 1e6 --epochs 20 -o " + (dir / "div").string()) == 2);
  CHECK(fs::exists(dir / "div" / "record.json"));
  CHECK(run_cli("train " + common + " --alpha 0.5 --lambda 0.1 -o " + (dir / "bad").string()) == 64);
  CHECK(run_cli("probe " + (dir / "ok" / "params.ckpt").string() + " --samples 8 --power-iters 5") == 0);
  write_text(dir / "junk.ckpt", "junk");
  CHECK(run_cli("probe " + (dir / "junk.ckpt").string()) == 74);
  CHECK(run_cli("probe --double-well --grid-points 3") == 0);
  write_text(dir / "sweep.cfg",
             "epochs = 1\ndataset_size = 64\nlayers = 2,4,2\nbatch_size = 16\nprobe = false\n"
             "sweep.axis.alpha = 0,1\nsweep.seeds = 0\n");
  const std::string sweep = "sweep " + (dir / "sweep.cfg").string() + " -q -o " + (dir / "sw").string();
  CHECK(run_cli(sweep + " --limit 1") == 3);
  CHECK(run_cli(sweep) == 0);
  CHECK(fs::exists(dir / "sw" / "summary.csv"));
}
