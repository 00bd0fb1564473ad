#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "slipctl/cli.hpp"
#include "slipctl/metrics.hpp"
#include "slipctl/sweep.hpp"
#include "slipctl/trial_io.hpp"

using namespace slipctl;
namespace fs = std::filesystem;

namespace {

TrialLog theta_trace(std::initializer_list<double> thetas) {
  TrialLog log;
  int k = 0;
  for (double th : thetas) {
    TrialRecord r;
    r.t = k++ * kControlPeriod;
    r.theta = th;
    r.slip = slip_label(th);
    log.records.push_back(r);
  }
  return log;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "slipctl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli(int(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Stubs keep sweep tests independent of trained models.
DetectorFn calm_detector() {
  return [](const TactileWindow&) { return 0.1; };
}
PredictorFn calm_predictor() {
  return [](const TactileWindow&) -> ActionScorer { return [](const Mat&) { return 0.01; }; };
}

}  // namespace

TEST_SUITE("experiments_cli") {
  TEST_CASE("single-trial metrics") {
    const auto still = theta_trace({0, 0, 0, 0});
    const auto profile = task_profile(0.3);
    auto m = compute_metrics(still, profile);
    CHECK(m.mor == 0.0);
    CHECK(m.rts == 0);

    m = compute_metrics(theta_trace({0, 5, 7, 7, 3}), profile);
    CHECK(m.mor == 7.0);
    CHECK(m.rts == 2);
    CHECK(compute_metrics(theta_trace({0, -8, 2}), profile).mor == 8.0);

    const auto open_loop = run_trial(profile, ObjectParams::training_box(), nullptr, 2);
    const auto om = compute_metrics(open_loop, profile);
    CHECK(om.drt == 0.0);
    CHECK(om.converged_ticks == 0);
  }

  TEST_CASE("aggregates agree between one-pass and two-pass") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(1e3, 2.5);
    for (int size : {1, 2, 7, 500}) {
      std::vector<double> v;
      for (int i = 0; i < size; ++i) v.push_back(n(rng));
      const auto a = mean_std(v);
      const auto b = mean_std_two_pass(v);
      CHECK(std::abs(a.mean - b.mean) < 1e-9);
      CHECK(std::abs(a.std - b.std) < 1e-9);
      if (size == 1) CHECK(a.std == 0.0);
    }
    const std::vector<double> hand = {2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(mean_std(hand).mean == 5.0);
    CHECK(mean_std(hand).std == doctest::Approx(std::sqrt(32.0 / 7.0)));

    TrialMetrics t;
    t.rts = 3;
    t.dropped = true;
    const std::vector<TrialMetrics> one = {t};
    const auto row = aggregate("psc", 4, one);
    CHECK(row.trials == 1);
    CHECK(row.drops == 1);
    CHECK(row.rts.mean == 3.0);
    CHECK(row.rts.std == 0.0);
  }

  TEST_CASE("metrics csv round-trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<MetricsRow> rows;
    for (const char* kind : {"rsc", "psc", "odd,\"name\""}) {
      MetricsRow r;
      r.controller = kind;
      r.n_basis = 3;
      r.trials = 10;
      r.drops = 1;
      for (MeanStd* m : {&r.rov, &r.mor, &r.et, &r.rts, &r.drt}) *m = {u(rng) / 3.0, u(rng) * 1e-7};
      rows.push_back(r);
    }
    std::stringstream io;
    write_metrics_csv(io, rows);
    CHECK(read_metrics_csv(io) == rows);

    std::istringstream bad("controller,n_basis\nrsc,x\n");
    CHECK_THROWS_AS(read_metrics_csv(bad), std::runtime_error);
  }

  TEST_CASE("sweep cells are reproducible from their seeds") {
    CHECK(cell_seed(1, ControllerKind::psc, 5, 3) == cell_seed(1, ControllerKind::psc, 5, 3));
    CHECK(cell_seed(1, ControllerKind::psc, 5, 3) != cell_seed(1, ControllerKind::rsc, 5, 3));
    CHECK(cell_seed(1, ControllerKind::psc, 5, 3) != cell_seed(1, ControllerKind::psc, 6, 3));
    CHECK(cell_seed(1, ControllerKind::psc, 5, 3) != cell_seed(2, ControllerKind::psc, 5, 3));

    SweepConfig cfg;
    cfg.n_min = 2;
    cfg.n_max = 3;
    cfg.trials = 2;
    cfg.v_max = 0.3;
    const auto result = run_sweep(cfg, calm_detector(), calm_predictor());
    REQUIRE(result.rows.size() == 4);
    CHECK(result.rows[0].controller == "rsc");
    CHECK(result.rows[0].n_basis == 2);
    CHECK(result.rows[3].controller == "psc");
    CHECK(result.rows[3].n_basis == 3);

    const auto cell = run_cell(cfg, ControllerKind::psc, 3, calm_detector(), calm_predictor());
    REQUIRE(cell.logs.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(same_trajectory(cell.logs[i], result.cells[3].logs[i]));

    std::ostringstream traces;
    write_traces_csv(traces, result.cells);
    const auto text = traces.str();
    const long lines = long(std::count(text.begin(), text.end(), '\n'));
    long ticks = 0;
    for (const auto& c : result.cells) {
      for (const auto& l : c.logs) ticks += long(l.records.size());
    }
    CHECK(lines == ticks + 1);

    cfg.n_max = 9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("command line") {
    const auto root = fs::temp_directory_path() / "slipctl_test_cli";
    fs::remove_all(root);
    const std::vector<std::string> base = {"--out", root.string(), "--run-id", "t", "--seed", "4"};
    auto with = [&](std::initializer_list<std::string> extra) {
      auto a = base;
      a.insert(a.end(), extra);
      return a;
    };
    const auto run_dir = root / "t";

    CHECK(run_cli({"gen-data", "--bogus"}) == 2);
    CHECK(run_cli({}) == 2);
    CHECK(run_cli(with({"train", "--kind", "detect"})) == 1);
    CHECK(run_cli(with({"run", "--controller", "psc"})) == 1);

    REQUIRE(run_cli(with({"gen-data", "--trials", "24"})) == 0);
    CHECK(read_trials((run_dir / "dataset").string()).size() == 24);

    const auto train_args = with({"train", "--kind", "predict", "--epochs", "1", "--hidden", "4"});
    REQUIRE(run_cli(train_args) == 0);
    const auto first = slurp(run_dir / "models" / "predict.json");
    REQUIRE(run_cli(train_args) == 0);
    CHECK(slurp(run_dir / "models" / "predict.json") == first);
    REQUIRE(run_cli(with({"train", "--kind", "detect", "--epochs", "1", "--hidden", "4"})) == 0);
    CHECK(run_cli(with({"eval", "--kind", "detect"})) == 0);
    CHECK(fs::exists(run_dir / "report" / "eval_detect.json"));

    REQUIRE(run_cli(with({"run", "--controller", "none", "--v-max", "0.5"})) == 0);
    const auto none = read_trial((run_dir / "trials" / "run" / "none_n5_t0.jsonl").string());
    CHECK(none.meta.dropped);

    REQUIRE(run_cli(with({"sweep", "--trials", "1", "--n-min", "2", "--n-max", "3", "--quiet"})) == 0);
    std::ifstream table_in(run_dir / "report" / "table1.csv");
    const auto rows = read_metrics_csv(table_in);
    CHECK(rows.size() == 4);
    const auto table = slurp(run_dir / "report" / "table1.csv");
    fs::remove(run_dir / "report" / "table1.csv");
    REQUIRE(run_cli(with({"report"})) == 0);
    CHECK(slurp(run_dir / "report" / "table1.csv") == table);

    const auto config = root / "config.json";
    std::ofstream(config) << R"({"run-id": "cfg", "gen-data": {"trials": 3}})";
    REQUIRE(run_cli({"--out", root.string(), "--config", config.string(), "gen-data"}) == 0);
    CHECK(read_trials((root / "cfg" / "dataset").string()).size() == 3);
    std::ofstream(config) << R"({"gen-data": {"trails": 3}})";
    CHECK(run_cli({"--out", root.string(), "--config", config.string(), "gen-data"}) == 2);
  }
}
