#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "ocrisk/data.hpp"
#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/metrics.hpp"
#include "ocrisk/model.hpp"
#include "ocrisk/theory.hpp"
#include "ocrisk/train.hpp"

namespace fs = std::filesystem;

namespace ocrisk::cli {

namespace {

constexpr const char* kCommands[] = {"gen", "train", "eval", "sweep", "verify-theory"};

struct Common {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool no_timestamp = false;
};

struct TrainOptions {
  std::string data;
  std::size_t n_p = 100;
  std::size_t n_u = 4000;
  std::string estimator = "one_class";
  std::optional<double> pi_p;  // defaults to the dataset's prior
  double alpha_p = 0.3;
  double gamma = 0.1;
  int epochs = 1000;
  int warmup = 20;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::size_t> hidden{64, 64};
  int eval_every = 100;
  std::string warmup_mode = "in_estimator";
  std::string calibration = "none";
  bool exclude_labeled = false;
  int repeat = 1;
};

std::string env_name(const std::string& long_name) {
  std::string s = "OCRISK_";
  for (char c : long_name) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Adds an option whose environment override is OCRISK_<NAME>.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& names, T& var, const std::string& help) {
  CLI::Option* o = app->add_option(names, var, help);
  o->envname(env_name(o->get_name(false, false).substr(2)));
  return o;
}

CLI::Option* flag(CLI::App* app, const std::string& names, bool& var, const std::string& help) {
  CLI::Option* o = app->add_flag(names, var, help);
  o->envname(env_name(o->get_name(false, false).substr(2)));
  return o;
}

void add_common(CLI::App* app, Common& c) {
  opt(app, "--out-dir", c.out_dir, "directory for every output file")->capture_default_str();
  opt(app, "--seed", c.seed, "root seed; replicate i uses seed+i")->capture_default_str();
  flag(app, "--no-timestamp", c.no_timestamp, "omit the '# generated' line from output files");
  app->add_option("--config", "flat key=value file; command-line flags take precedence");
}

void add_train_options(CLI::App* app, TrainOptions& t) {
  opt(app, "--data", t.data, "dataset CSV")->required()->check(CLI::ExistingFile);
  opt(app, "--n-p", t.n_p, "labeled positives")->capture_default_str();
  opt(app, "--n-u", t.n_u, "unlabeled rows")->capture_default_str();
  opt(app, "--estimator", t.estimator, "supervised_pn|bce_u_as_n|unbiased_pu|abs_negative|one_class")
      ->capture_default_str();
  opt(app, "--pi-p", t.pi_p, "class prior given to the estimator (default: the dataset's)");
  opt(app, "--alpha-p", t.alpha_p, "positive-risk weight")->capture_default_str();
  opt(app, "--gamma", t.gamma, "focusing parameter")->capture_default_str();
  opt(app, "--epochs", t.epochs, "training epochs")->capture_default_str();
  opt(app, "--warmup", t.warmup, "warm-up epochs with the logistic loss")->capture_default_str();
  opt(app, "--lr", t.lr, "learning rate")->capture_default_str();
  opt(app, "--momentum", t.momentum, "SGD momentum")->capture_default_str();
  opt(app, "--weight-decay", t.weight_decay, "L2 weight decay")->capture_default_str();
  opt(app, "--hidden", t.hidden, "hidden layer sizes")->delimiter(',')->capture_default_str();
  opt(app, "--eval-every", t.eval_every, "held-out evaluation period in epochs (0: last only)")
      ->capture_default_str();
  opt(app, "--warmup-mode", t.warmup_mode, "in_estimator|plain_bce")
      ->check(CLI::IsMember({"in_estimator", "plain_bce"}))
      ->capture_default_str();
  opt(app, "--calibration", t.calibration, "none|pul|pbl (bce_u_as_n only)")
      ->check(CLI::IsMember({"none", "pul", "pbl"}))
      ->capture_default_str();
  flag(app, "--exclude-labeled", t.exclude_labeled, "draw the unlabeled pool from rows not labeled");
  opt(app, "--repeat", t.repeat, "seed replicates")->check(CLI::PositiveNumber)->capture_default_str();
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

fs::path resolve(const Common& c, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : fs::path(c.out_dir) / p;
}

// Every text artifact goes through here.
class Output {
 public:
  Output(const Common& c, const std::string& name) : path_(resolve(c, name)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    file_.open(path_, std::ios::binary);
    if (!file_) throw ValidationError("cannot write " + path_.string());
    if (!c.no_timestamp) file_ << "# generated " << timestamp() << '\n';
  }
  std::ostream& stream() { return file_; }
  const fs::path& path() const { return path_; }
  void close() {
    file_.close();
    if (!file_) throw ValidationError("failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream file_;
};

TrainConfig train_config(const TrainOptions& t, double dataset_prior) {
  TrainConfig cfg;
  cfg.epochs = t.epochs;
  cfg.warmup_epochs = t.warmup;
  cfg.learning_rate = t.lr;
  cfg.momentum = t.momentum;
  cfg.weight_decay = t.weight_decay;
  cfg.hidden = t.hidden;
  cfg.eval_every = t.eval_every;
  cfg.warmup_mode = t.warmup_mode == "plain_bce" ? WarmupMode::PlainBce : WarmupMode::InEstimator;
  cfg.estimator.estimator = parse_estimator(t.estimator);
  cfg.estimator.pi_p = t.pi_p.value_or(dataset_prior);
  cfg.estimator.alpha_p = t.alpha_p;
  cfg.estimator.gamma = t.gamma;
  if (t.calibration != "none" && cfg.estimator.estimator != Estimator::BceUAsN)
    throw ValidationError("--calibration needs --estimator bce_u_as_n");
  cfg.validate();
  return cfg;
}

struct RunResult {
  ModelParams params;
  TrainLog log;
  MetricsReport metrics;
};

// One replicate: PU split and initialisation both seeded by `seed`.
RunResult run_once(const LabeledDataset& ds, const TrainOptions& t, TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  const PUSample pu = make_pu_split(ds, t.n_p, t.n_u, seed, !t.exclude_labeled);
  const auto held = held_out_rows(ds, pu);
  if (held.empty()) throw ValidationError("no held-out rows left for evaluation");
  RunResult r;
  if (t.calibration == "none") {
    auto m = train(ds, pu, cfg);
    r.metrics = evaluate(m.params, ds, held);
    r.params = std::move(m.params);
    r.log = std::move(m.log);
  } else {
    auto m = train_calibrated(ds, pu, cfg, t.calibration == "pul" ? CalibrationMethod::PUL : CalibrationMethod::PBL);
    r.metrics = evaluate_calibrated(m, ds, held);
    r.params = std::move(m.base.params);
    r.log = std::move(m.base.log);
  }
  return r;
}

std::string estimator_label(const TrainOptions& t) {
  return t.calibration == "none" ? t.estimator : t.estimator + "+" + t.calibration;
}

void metric_cells(std::ostream& o, const MetricsReport& m) {
  o << percent(m.precision) << ',' << percent(m.recall) << ',' << percent(m.f1) << ',' << percent(m.auc);
}

struct Summary {
  MeanStd precision, recall, f1, auc;
};

Summary summarise(const std::vector<MetricsReport>& runs) {
  std::vector<double> p, r, f, a;
  for (const auto& m : runs) {
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
    a.push_back(m.auc);
  }
  return {mean_std(p), mean_std(r), mean_std(f), mean_std(a)};
}

std::string mean_std_text(const MeanStd& v) { return percent(v.mean) + "(" + percent(v.stddev) + ")"; }

int cmd_gen(const Common& c, std::size_t dim, double pi_p, std::size_t n, std::size_t neg_components,
            double overlap, const std::string& name, const std::string& output, std::ostream& out) {
  SyntheticSpec spec = default_synthetic_spec(dim, pi_p, n, neg_components, overlap);
  spec.name = name;
  const LabeledDataset ds = gen_synthetic(spec, c.seed);
  Output f(c, output);
  write_csv(f.stream(), ds);
  f.close();
  out << "wrote " << f.path().string() << " (" << ds.rows() << " rows, " << ds.count_positive()
      << " positive)\n";
  return 0;
}

int cmd_train(const Common& c, const TrainOptions& t, std::ostream& out) {
  const LabeledDataset ds = load_csv(t.data);
  const TrainConfig cfg = train_config(t, ds.pi_p_true);

  Output metrics(c, "metrics.csv");
  metrics.stream() << "class,estimator,precision,recall,f1,auc,seed\n";
  std::vector<MetricsReport> runs;
  for (int i = 0; i < t.repeat; ++i) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
    const RunResult r = run_once(ds, t, cfg, seed);
    const std::string suffix = t.repeat == 1 ? "" : "_r" + std::to_string(i);

    Output ckpt(c, "model" + suffix + ".ckpt");
    save_checkpoint(ckpt.stream(), r.params);
    ckpt.close();
    Output log(c, "trainlog" + suffix + ".csv");
    write_train_log(log.stream(), r.log);
    log.close();

    metrics.stream() << ds.name << ',' << estimator_label(t) << ',';
    metric_cells(metrics.stream(), r.metrics);
    metrics.stream() << ',' << seed << '\n';
    runs.push_back(r.metrics);
  }

  const Summary s = summarise(runs);
  if (t.repeat > 1) {
    auto row = [&](const char* tag, auto field) {
      metrics.stream() << ds.name << ',' << estimator_label(t) << ',' << percent(field(s.precision)) << ','
                       << percent(field(s.recall)) << ',' << percent(field(s.f1)) << ',' << percent(field(s.auc))
                       << ',' << tag << '\n';
    };
    row("mean", [](const MeanStd& m) { return m.mean; });
    row("std", [](const MeanStd& m) { return m.stddev; });
  }
  metrics.close();
  out << ds.name << ' ' << estimator_label(t) << " over " << t.repeat << " run(s): precision "
      << mean_std_text(s.precision) << " recall " << mean_std_text(s.recall) << " F1 " << mean_std_text(s.f1)
      << " AUC " << mean_std_text(s.auc) << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& model_path, const std::string& data, bool predictions,
             std::ostream& out) {
  const ModelParams params = load_checkpoint(fs::path(model_path));
  const LabeledDataset ds = load_csv(data);
  std::vector<std::size_t> rows(ds.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const MetricsReport m = evaluate(params, ds, rows);

  Output f(c, "eval_metrics.csv");
  f.stream() << "class,estimator,precision,recall,f1,auc,seed\n" << ds.name << ",checkpoint,";
  metric_cells(f.stream(), m);
  f.stream() << ",\n";
  f.close();

  if (predictions) {
    const Eigen::VectorXd s = forward_batch(params, ds.features);
    Output p(c, "predictions.csv");
    p.stream() << "row,score,decision,label\n";
    for (Eigen::Index i = 0; i < s.size(); ++i)
      p.stream() << i << ',' << format_real(s(i)) << ',' << decide_score(s(i)) << ','
                 << ds.labels[static_cast<std::size_t>(i)] << '\n';
    p.close();
  }
  out << ds.name << ": precision " << percent(m.precision) << " recall " << percent(m.recall) << " F1 "
      << percent(m.f1) << " AUC " << percent(m.auc) << " over " << m.n_eval << " rows\n";
  return 0;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) throw CLI::ValidationError("--values", "empty sweep grid");
  for (auto field : split_fields(text)) {
    const auto v = parse_real(trim(field));
    if (!v) throw CLI::ValidationError("--values", "not a number: '" + std::string(field) + "'");
    out.push_back(*v);
  }
  return out;
}

int cmd_sweep(const Common& c, const TrainOptions& base, const std::string& param,
              const std::string& grid, std::ostream& out) {
  const std::vector<double> values = parse_grid(grid);
  const LabeledDataset ds = load_csv(base.data);

  Output cells(c, "sweep.csv");
  cells.stream() << "param,value,seed,precision,recall,f1,auc\n";
  Output summary(c, "sweep_summary.csv");
  summary.stream() << "param,value,runs,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,"
                      "auc_mean,auc_std\n";

  for (double v : values) {
    TrainOptions t = base;
    if (param == "alpha_p") {
      t.alpha_p = v;
    } else if (param == "gamma") {
      t.gamma = v;
    } else if (param == "pi_p_input") {
      t.pi_p = v;
    } else {
      if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError("n_p values must be positive integers");
      t.n_p = static_cast<std::size_t>(v);
    }
    const TrainConfig cfg = train_config(t, ds.pi_p_true);
    std::vector<MetricsReport> runs;
    for (int i = 0; i < t.repeat; ++i) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
      const MetricsReport m = run_once(ds, t, cfg, seed).metrics;
      cells.stream() << param << ',' << format_real(v) << ',' << seed << ',';
      metric_cells(cells.stream(), m);
      cells.stream() << '\n';
      runs.push_back(m);
    }
    const Summary s = summarise(runs);
    summary.stream() << param << ',' << format_real(v) << ',' << runs.size();
    for (const MeanStd* m : {&s.precision, &s.recall, &s.f1, &s.auc})
      summary.stream() << ',' << percent(m->mean) << ',' << percent(m->stddev);
    summary.stream() << '\n';
    out << param << '=' << format_real(v) << ": F1 " << mean_std_text(s.f1) << '\n';
  }
  cells.close();
  summary.close();
  return 0;
}

struct TheoryOptions {
  double pi_p = 0.3;
  std::vector<std::size_t> n_p_grid{50, 200, 800};
  std::vector<std::size_t> n_u_grid{50, 200, 800};
  std::size_t trials = 20000;
  std::optional<double> alpha;
  double sigma = 0.05;
  std::string model;
  std::size_t dim = 2;
  std::size_t neg_components = 5;
  double overlap = 1.0;
  std::size_t reference_samples = 1000000;
  unsigned threads = 0;
};

int cmd_verify_theory(const Common& c, const TheoryOptions& o, std::ostream& out) {
  BoundSpec spec;
  spec.distribution = default_synthetic_spec(o.dim, o.pi_p, 1, o.neg_components, o.overlap);
  // Without a checkpoint, a random linear scorer drawn from the seed.
  spec.fixed_model = o.model.empty() ? init_mlp({o.dim, 1}, c.seed) : load_checkpoint(fs::path(o.model));
  spec.pi_p = o.pi_p;
  spec.trials = o.trials;
  spec.alpha_margin = o.alpha.value_or(0.0);
  if (o.alpha && !(*o.alpha > 0.0)) throw ValidationError("--alpha must be > 0");
  spec.sigma = o.sigma;
  spec.seed = c.seed;
  spec.reference_samples = o.reference_samples;
  spec.threads = o.threads;
  spec.validate();

  const auto reports = verify_grid(spec, o.n_p_grid, o.n_u_grid);
  Output csv(c, "bounds.csv");
  write_bound_csv(csv.stream(), reports);
  csv.close();
  Output txt(c, "bounds_summary.txt");
  write_bound_summary(txt.stream(), reports);
  txt.close();
  write_bound_summary(out, reports);
  const bool ok = std::all_of(reports.begin(), reports.end(), [](const BoundReport& r) { return r.all_pass(); });
  return ok ? 0 : kCheckFailed;
}

// Pulls --config out of the arguments and splices the file's settings in
// right after the subcommand, so explicit flags (parsed later) win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].starts_with("--config=")) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config.empty()) return rest;
  auto sub = std::find_if(rest.begin(), rest.end(), [](const std::string& a) {
    return std::find(std::begin(kCommands), std::end(kCommands), a) != std::end(kCommands);
  });
  if (sub == rest.end()) return rest;
  const auto extra = config_arguments(config);
  rest.insert(sub + 1, extra.begin(), extra.end());
  return rest;
}

}  // namespace

std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
    std::string key(trim(text.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", line_no);
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back("--" + key + "=" + std::string(trim(text.substr(eq + 1))));
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Positive-unlabeled training with the one-class risk estimator"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset CSV");
  std::size_t dim = 2, n = 50000, neg_components = 5;
  double gen_pi = 0.0, overlap = 1.0;
  std::string gen_name = "synthetic", gen_output = "dataset.csv";
  add_common(gen, common);
  opt(gen, "--dim", dim, "feature dimension")->capture_default_str();
  opt(gen, "--pi-p", gen_pi, "true class prior")->required();
  opt(gen, "--n", n, "rows")->capture_default_str();
  opt(gen, "--neg-components", neg_components, "negative mixture components (3-8)")->capture_default_str();
  opt(gen, "--overlap", overlap, "scale on every component stddev")->capture_default_str();
  opt(gen, "--name", gen_name, "dataset name")->capture_default_str();
  opt(gen, "-o,--output", gen_output, "output file, relative to --out-dir")->capture_default_str();

  CLI::App* tr = app.add_subcommand("train", "train a classifier from a PU split");
  TrainOptions train_opts;
  add_common(tr, common);
  add_train_options(tr, train_opts);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a labeled CSV");
  std::string eval_model, eval_data;
  bool eval_predictions = false;
  add_common(ev, common);
  opt(ev, "--model", eval_model, "checkpoint file")->required()->check(CLI::ExistingFile);
  opt(ev, "--data", eval_data, "dataset CSV")->required()->check(CLI::ExistingFile);
  flag(ev, "--predictions", eval_predictions, "also write per-row scores");

  CLI::App* sw = app.add_subcommand("sweep", "train over a grid of one parameter");
  TrainOptions sweep_opts;
  std::string sweep_param;
  std::string sweep_values;
  add_common(sw, common);
  add_train_options(sw, sweep_opts);
  opt(sw, "--param", sweep_param, "alpha_p|gamma|pi_p_input|n_p")
      ->required()
      ->check(CLI::IsMember({"alpha_p", "gamma", "pi_p_input", "n_p"}));
  opt(sw, "--values", sweep_values, "comma-separated grid")->required();

  CLI::App* vt = app.add_subcommand("verify-theory", "Monte-Carlo check of the estimator's bounds");
  TheoryOptions theory;
  add_common(vt, common);
  opt(vt, "--pi-p", theory.pi_p, "class prior")->capture_default_str();
  opt(vt, "--n-p-grid", theory.n_p_grid, "labeled sample sizes")->delimiter(',')->capture_default_str();
  opt(vt, "--n-u-grid", theory.n_u_grid, "unlabeled sample sizes")->delimiter(',')->capture_default_str();
  opt(vt, "--trials", theory.trials, "Monte-Carlo trials per cell")->capture_default_str();
  opt(vt, "--alpha", theory.alpha, "margin alpha (default: largest certified)");
  opt(vt, "--sigma", theory.sigma, "confidence parameter in (0,1)")->capture_default_str();
  opt(vt, "--model", theory.model, "frozen classifier checkpoint (default: random linear)")
      ->check(CLI::ExistingFile);
  opt(vt, "--dim", theory.dim, "feature dimension")->capture_default_str();
  opt(vt, "--neg-components", theory.neg_components, "negative mixture components")->capture_default_str();
  opt(vt, "--overlap", theory.overlap, "scale on every component stddev")->capture_default_str();
  opt(vt, "--reference-samples", theory.reference_samples, "negative draws for the reference risk")
      ->capture_default_str();
  opt(vt, "--threads", theory.threads, "worker threads (0: all cores)")->capture_default_str();

  try {
    const auto args = expand_config(raw_args);
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err);
    }

    if (gen->parsed()) return cmd_gen(common, dim, gen_pi, n, neg_components, overlap, gen_name, gen_output, out);
    if (tr->parsed()) return cmd_train(common, train_opts, out);
    if (ev->parsed()) return cmd_eval(common, eval_model, eval_data, eval_predictions, out);
    if (sw->parsed()) return cmd_sweep(common, sweep_opts, sweep_param, sweep_values, out);
    if (vt->parsed()) return cmd_verify_theory(common, theory, out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const TrainingError& e) {
    err << "error: training diverged at epoch " << e.epoch() << " in " << e.term() << ": " << e.what() << '\n';
    return kTrainingFailed;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
  return kInvalidInput;
}

}  // namespace ocrisk::cli
