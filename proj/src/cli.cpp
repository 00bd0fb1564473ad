#include "slipctl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "slipctl/metrics.hpp"
#include "slipctl/sweep.hpp"
#include "slipctl/trial_io.hpp"

namespace slipctl {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Top-level scalars set root options; a nested object sets the options of the subcommand it names.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    throw CLI::ConversionError("writing JSON configs is not supported");
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: top level must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
  static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }
};

struct Common {
  std::string out = "out";
  std::string run_id = "default";
  std::uint64_t seed = 1;
};

struct RunDirs {
  fs::path root;
  fs::path dataset() const { return root / "dataset"; }
  fs::path models() const { return root / "models"; }
  fs::path trials() const { return root / "trials"; }
  fs::path report() const { return root / "report"; }
  fs::path model(ModelKind kind) const { return models() / (to_string(kind) + ".json"); }
};

RunDirs dirs_of(const Common& c) { return {fs::path(c.out) / c.run_id}; }

// Seed streams derived from --seed.
constexpr std::uint64_t kSplitStream = 0x5e11;
constexpr std::uint64_t kTrainStream = 0x7a17;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<TrialLog> load_dataset(const RunDirs& d) {
  if (!fs::is_directory(d.dataset())) {
    throw std::runtime_error("no dataset at " + d.dataset().string() + " (run gen-data first)");
  }
  auto trials = read_trials(d.dataset().string());
  if (trials.empty()) throw std::runtime_error("dataset at " + d.dataset().string() + " holds no trials");
  return trials;
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("missing model file: " + path.string());
}

json report_json(const ClassificationReport& r) {
  return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
          {"tp", r.tp},             {"fp", r.fp},               {"tn", r.tn},         {"fn", r.fn}};
}

std::string format_report(const ClassificationReport& r) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << "accuracy " << r.accuracy << " precision " << r.precision << " recall "
    << r.recall << " f1 " << r.f1;
  return s.str();
}

// ---- gen-data

struct GenOptions {
  int trials = 660;
};

void gen_data(const Common& c, const GenOptions& o) {
  const RunDirs d = dirs_of(c);
  DatasetConfig config;
  config.n_trials = o.trials;
  config.seed = c.seed;
  fs::remove_all(d.dataset());
  fs::create_directories(d.dataset());
  const DatasetSummary s = gen_dataset(config, d.dataset().string());
  std::cout << "dataset: " << s.n_trials << " trials, " << s.n_ticks << " ticks, slip fraction " << std::fixed
            << std::setprecision(3) << s.slip_fraction() << ", " << s.n_dropped << " dropped -> "
            << d.dataset().string() << '\n';
}

// ---- train / eval

struct TrainOptions {
  std::string kind;
  TrainConfig config;
};

template <class Model>
json history_json(const TrainResult<Model>& r) {
  json h = json::array();
  for (const auto& e : r.history) {
    h.push_back({{"epoch", e.epoch},
                 {"loss", e.loss},
                 {"accuracy", e.accuracy},
                 {"f1", e.f1},
                 {"val_accuracy", e.val_accuracy},
                 {"val_f1", e.val_f1}});
  }
  return h;
}

void train(const Common& c, const TrainOptions& o) {
  const RunDirs d = dirs_of(c);
  const ModelKind kind = parse_model_kind(o.kind);
  const auto trials = load_dataset(d);
  const auto split = make_classifier_split(trials, o.config.train_fraction, derive_seed(c.seed, kSplitStream));
  TrainConfig config = o.config;
  config.seed = derive_seed(c.seed, kTrainStream + std::uint64_t(kind));

  const auto started = std::chrono::steady_clock::now();
  json summary;
  ClassificationReport test;
  fs::create_directories(d.models());
  if (kind == ModelKind::detect) {
    const auto r = train_detector(split.train, config);
    save_model(r.model, d.model(kind).string());
    test = evaluate(r.model, split.test);
    summary = {{"history", history_json(r)}, {"best_epoch", r.best_epoch}, {"pos_weight", r.pos_weight}};
  } else {
    const auto r = train_predictor(split.train, config);
    save_model(r.model, d.model(kind).string());
    test = evaluate(r.model, split.test);
    summary = {{"history", history_json(r)}, {"best_epoch", r.best_epoch}, {"pos_weight", r.pos_weight}};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  summary["kind"] = to_string(kind);
  summary["train_windows"] = split.train.size();
  summary["test_windows"] = split.test.size();
  summary["test"] = report_json(test);
  summary["seconds"] = seconds;
  write_text(d.report() / ("train_" + to_string(kind) + ".json"), summary.dump(2) + "\n");
  std::cout << to_string(kind) << ": " << format_report(test) << " on " << split.test.size()
            << " held-out windows (" << std::fixed << std::setprecision(1) << seconds << " s) -> " << d.model(kind).string()
            << '\n';
}

struct EvalOptions {
  std::string kind;
  double train_fraction = 0.8;
};

void eval(const Common& c, const EvalOptions& o) {
  const RunDirs d = dirs_of(c);
  const ModelKind kind = parse_model_kind(o.kind);
  require_file(d.model(kind));
  const auto split = make_classifier_split(load_dataset(d), o.train_fraction, derive_seed(c.seed, kSplitStream));
  const ClassificationReport r = kind == ModelKind::detect ? evaluate(load_detector(d.model(kind).string()), split.test)
                                                           : evaluate(load_predictor(d.model(kind).string()), split.test);
  json j = report_json(r);
  j["kind"] = to_string(kind);
  j["windows"] = split.test.size();
  write_text(d.report() / ("eval_" + to_string(kind) + ".json"), j.dump(2) + "\n");
  std::cout << to_string(kind) << ": " << format_report(r) << " on " << split.test.size() << " held-out windows\n";
}

// ---- run / sweep / report

struct ControlOptions {
  double v_max = 0.5;
  double delta_slip = ControllerConfig{}.delta_slip;
  double box = ControllerConfig{}.ub;
  long max_evaluations = ControllerConfig{}.max_evaluations;

  ControllerConfig controller() const {
    ControllerConfig cc;
    cc.delta_slip = delta_slip;
    cc.lb = -box;
    cc.ub = box;
    cc.max_evaluations = max_evaluations;
    return cc;
  }
};

struct Models {
  std::optional<DetectorModel> detector;
  std::optional<PredictorModel> predictor;

  DetectorFn detect() const { return detector ? detector_fn(*detector) : DetectorFn{}; }
  PredictorFn predict() const { return predictor ? predictor_fn(*predictor) : PredictorFn{}; }
};

Models load_models(const RunDirs& d, const std::vector<ControllerKind>& kinds) {
  Models m;
  for (ControllerKind k : kinds) {
    if (k == ControllerKind::rsc && !m.detector) {
      require_file(d.model(ModelKind::detect));
      m.detector = load_detector(d.model(ModelKind::detect).string());
    }
    if (k == ControllerKind::psc && !m.predictor) {
      require_file(d.model(ModelKind::predict));
      m.predictor = load_predictor(d.model(ModelKind::predict).string());
    }
  }
  return m;
}

std::string metrics_line(const TrialMetrics& m) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << "dropped " << (m.dropped ? "yes" : "no") << "  MOR " << m.mor
    << " deg  RTS " << m.rts << "  DRT " << m.drt << "  ET " << m.et_ms << " ms  ROV " << std::scientific
    << std::setprecision(2) << m.rov;
  return s.str();
}

struct RunOptions {
  std::string controller = "none";
  int n_basis = 5;
  int trial = 0;
  ControlOptions control;
};

void run(const Common& c, const RunOptions& o) {
  const RunDirs d = dirs_of(c);
  ControllerConfig cc = o.control.controller();
  cc.kind = parse_controller_kind(o.controller);
  cc.n_basis = o.n_basis;
  const Models models = load_models(d, {cc.kind});
  const auto profile = task_profile(o.control.v_max);
  const std::uint64_t seed = cell_seed(c.seed, cc.kind, cc.n_basis, o.trial);
  const TrialLog log =
      run_closed_loop(profile, ObjectParams::training_box(), cc, models.detect(), models.predict(), seed);
  std::ostringstream stem;
  stem << to_string(cc.kind) << "_n" << cc.n_basis << "_t" << o.trial;
  write_trial(log, (d.trials() / "run").string(), stem.str());
  std::cout << stem.str() << " (seed " << seed << "): " << metrics_line(compute_metrics(log, profile)) << '\n';
}

void print_table(std::ostream& out, const std::vector<MetricsRow>& rows) {
  auto cell = [](const MeanStd& m, int precision, bool sci = false) {
    std::ostringstream s;
    if (sci) s << std::scientific;
    else s << std::fixed;
    s << std::setprecision(precision) << m.mean << " +- " << m.std;
    return s.str();
  };
  out << std::left << std::setw(6) << "ctrl" << std::setw(4) << "N" << std::setw(8) << "drops" << std::setw(22)
      << "ROV" << std::setw(16) << "MOR (deg)" << std::setw(18) << "ET (ms)" << std::setw(16) << "RTS"
      << "DRT\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(6) << r.controller << std::setw(4) << r.n_basis << std::setw(8)
        << (std::to_string(r.drops) + "/" + std::to_string(r.trials)) << std::setw(22) << cell(r.rov, 2, true)
        << std::setw(16) << cell(r.mor, 2) << std::setw(18) << cell(r.et, 2) << std::setw(16) << cell(r.rts, 1)
        << cell(r.drt, 2) << '\n';
  }
}

// Aggregates cells into report/table1.csv and report/traces.csv.
std::vector<MetricsRow> write_report(const RunDirs& d, std::vector<SweepCell>& cells) {
  std::vector<MetricsRow> rows;
  for (auto& cell : cells) {
    cell.metrics.clear();
    for (const auto& log : cell.logs) cell.metrics.push_back(compute_metrics(log, log.meta.profile));
    rows.push_back(aggregate(to_string(cell.kind), cell.n_basis, cell.metrics));
  }
  std::ostringstream table, traces;
  write_metrics_csv(table, rows);
  write_traces_csv(traces, cells);
  write_text(d.report() / "table1.csv", table.str());
  write_text(d.report() / "traces.csv", traces.str());
  return rows;
}

fs::path cell_dir(const RunDirs& d, ControllerKind kind, int n_basis) {
  return d.trials() / "sweep" / (to_string(kind) + "_n" + std::to_string(n_basis));
}

struct SweepOptions {
  int trials = 10;
  int n_min = 2;
  int n_max = 8;
  std::vector<std::string> kinds{"rsc", "psc"};
  int workers = 0;
  bool quiet = false;
  ControlOptions control;
};

void sweep(const Common& c, const SweepOptions& o) {
  const RunDirs d = dirs_of(c);
  SweepConfig config;
  config.trials = o.trials;
  config.n_min = o.n_min;
  config.n_max = o.n_max;
  config.kinds.clear();
  for (const auto& k : o.kinds) config.kinds.push_back(parse_controller_kind(k));
  config.v_max = o.control.v_max;
  config.master_seed = c.seed;
  config.workers = o.workers;
  config.controller = o.control.controller();
  config.validate();
  const Models models = load_models(d, config.kinds);

  const auto started = std::chrono::steady_clock::now();
  auto progress = [&](const std::string& msg) {
    if (!o.quiet) std::cerr << "  " << msg << '\n';
  };
  SweepResult result = run_sweep(config, models.detect(), models.predict(), progress);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  fs::remove_all(d.trials() / "sweep");
  for (const auto& cell : result.cells) {
    for (std::size_t i = 0; i < cell.logs.size(); ++i) {
      write_trial(cell.logs[i], cell_dir(d, cell.kind, cell.n_basis).string(), trial_stem(int(i)));
    }
  }
  const auto rows = write_report(d, result.cells);
  print_table(std::cout, rows);
  std::cout << rows.size() << " cells in " << std::fixed << std::setprecision(1) << seconds << " s -> "
            << (d.report() / "table1.csv").string() << '\n';
}

void report(const Common& c) {
  const RunDirs d = dirs_of(c);
  const fs::path root = d.trials() / "sweep";
  if (!fs::is_directory(root)) throw std::runtime_error("no sweep trials at " + root.string() + " (run sweep first)");

  std::map<std::pair<int, int>, SweepCell> by_cell;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    for (auto& log : read_trials(entry.path().string())) {
      const ControllerKind kind = parse_controller_kind(log.meta.controller);
      auto& cell = by_cell[{int(kind), log.meta.n_basis}];
      cell.kind = kind;
      cell.n_basis = log.meta.n_basis;
      cell.logs.push_back(std::move(log));
    }
  }
  if (by_cell.empty()) throw std::runtime_error("no trials under " + root.string());
  std::vector<SweepCell> cells;
  for (auto& [key, cell] : by_cell) cells.push_back(std::move(cell));
  const auto rows = write_report(d, cells);
  print_table(std::cout, rows);
  std::cout << "-> " << (d.report() / "table1.csv").string() << ", " << (d.report() / "traces.csv").string() << '\n';
}

void add_control_options(CLI::App* app, ControlOptions& o) {
  app->add_option("--v-max", o.v_max, "peak reference speed, m/s")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--delta-slip", o.delta_slip, "PSC margin on the predicted slip probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--box", o.box, "bound on the first-step speed change, m/s per tick")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--max-evaluations", o.max_evaluations, "per-tick solver budget, 0 = unlimited")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

}  // namespace

int cli(int argc, char** argv) {
  CLI::App app{"Slip-avoiding trajectory adaptation in a simulated grasp"};
  app.name("slipctl");
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Common common;
  app.add_option("--out", common.out, "output root")->capture_default_str();
  app.add_option("--run-id", common.run_id, "run directory under the output root")->capture_default_str();
  app.add_option("--seed", common.seed, "master seed for all randomness")->capture_default_str();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "simulate the training dataset");
  gen_cmd->add_option("--trials", gen.trials, "number of trials")->check(CLI::PositiveNumber)->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train the slip detector or predictor");
  train_cmd->add_option("--kind", tr.kind, "detect or predict")->required()->check(CLI::IsMember({"detect", "predict"}));
  train_cmd->add_option("--epochs", tr.config.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--hidden", tr.config.hidden, "LSTM width")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.config.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--learning-rate", tr.config.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--train-fraction", tr.config.train_fraction, "share of trials used for training")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--validation-fraction", tr.config.validation_fraction,
                        "share of training trials held out for epoch selection")
      ->check(CLI::Range(0.0, 0.9))
      ->capture_default_str();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "score a trained model on the held-out trials");
  eval_cmd->add_option("--kind", ev.kind, "detect or predict")->required()->check(CLI::IsMember({"detect", "predict"}));
  eval_cmd->add_option("--train-fraction", ev.train_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();

  RunOptions ro;
  auto* run_cmd = app.add_subcommand("run", "run one closed-loop trial");
  run_cmd->add_option("--controller", ro.controller, "none, rsc or psc")
      ->check(CLI::IsMember({"none", "rsc", "psc"}))
      ->capture_default_str();
  run_cmd->add_option("--n-basis", ro.n_basis)->check(CLI::Range(2, 8))->capture_default_str();
  run_cmd->add_option("--trial", ro.trial, "trial index; matches the sweep's seed for that cell")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_control_options(run_cmd, ro.control);

  SweepOptions so;
  auto* sweep_cmd = app.add_subcommand("sweep", "basis-count sweep over controllers");
  sweep_cmd->add_option("--trials", so.trials, "trials per cell")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->add_option("--n-min", so.n_min)->check(CLI::Range(2, 8))->capture_default_str();
  sweep_cmd->add_option("--n-max", so.n_max)->check(CLI::Range(2, 8))->capture_default_str();
  sweep_cmd->add_option("--kinds", so.kinds, "controllers to sweep")
      ->delimiter(',')
      ->check(CLI::IsMember({"none", "rsc", "psc"}))
      ->capture_default_str();
  sweep_cmd->add_option("--workers", so.workers, "0 = hardware concurrency")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sweep_cmd->add_flag("--quiet", so.quiet, "no per-trial progress");
  add_control_options(sweep_cmd, so.control);

  auto* report_cmd = app.add_subcommand("report", "rebuild the sweep table and trace CSVs from saved trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "slipctl: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen_cmd) gen_data(common, gen);
    if (*train_cmd) train(common, tr);
    if (*eval_cmd) eval(common, ev);
    if (*run_cmd) run(common, ro);
    if (*sweep_cmd) sweep(common, so);
    if (*report_cmd) report(common);
  } catch (const std::exception& e) {
    std::cerr << "slipctl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace slipctl
