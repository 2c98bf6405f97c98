#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "ocrisk/data.hpp"
#include "ocrisk/format.hpp"

namespace fs = std::filesystem;
using namespace ocrisk;

namespace {

struct Sandbox {
  fs::path root;
  Sandbox() {
    root = fs::temp_directory_path() / ("ocrisk_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Sandbox() { fs::remove_all(root); }
  std::string operator/(const std::string& name) const { return (root / name).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ocrisk");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Drops a leading "# generated" line.
std::string strip_stamp(const std::string& text) {
  if (text.rfind("# generated", 0) == 0) return text.substr(text.find('\n') + 1);
  return text;
}

// Column `name` of the first data row of a metrics CSV.
double metric(const std::string& path, const std::string& name) {
  const auto rows = lines_of(strip_stamp(slurp(path)));
  const auto header = split_fields(rows.at(0));
  const auto values = split_fields(rows.at(1));
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return *parse_real(values.at(i));
  throw std::runtime_error("no column " + name);
}

const Sandbox box;

const std::string& small_dataset() {
  static const std::string path = [] {
    const auto r = run({"gen", "--pi-p", "0.3", "--n", "3000", "--seed", "2", "--out-dir", box / "data", "-o",
                        "small.csv"});
    REQUIRE(r.code == 0);
    return box / "data/small.csv";
  }();
  return path;
}

const std::vector<std::string> kQuick{"--epochs", "30", "--warmup", "5", "--hidden", "8,8", "--n-p", "50",
                                      "--n-u", "500"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("gen writes a dataset that reloads to the generated one") {
  const auto r = run({"gen", "--dim", "2", "--pi-p", "0.0102", "--n", "50000", "--seed", "7", "-o", "ds.csv",
                      "--out-dir", box / "gen"});
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(box / "gen/ds.csv"));
  const auto back = load_csv(box / "gen/ds.csv");
  const auto expect = gen_synthetic(default_synthetic_spec(2, 0.0102, 50000), 7);
  CHECK(back.features == expect.features);
  CHECK(back.labels == expect.labels);
  CHECK(back.pi_p_true == 0.0102);
}

TEST_CASE("gen argument errors") {
  const auto missing = run({"gen", "--n", "10", "--out-dir", box / "gen_err"});
  CHECK(missing.code != 0);
  CHECK(missing.err.find("--pi-p") != std::string::npos);
  const auto bad = run({"gen", "--pi-p", "1.5", "--out-dir", box / "gen_err"});
  CHECK(bad.code == cli::kInvalidInput);
  CHECK(bad.err.find("pi_p") != std::string::npos);
  CHECK(run({}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
}

TEST_CASE("train emits checkpoint, log and metrics") {
  const auto dir = box / "train";
  const auto r = run(with({"train", "--data", small_dataset(), "--out-dir", dir}, kQuick));
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir + "/model.ckpt"));
  CHECK(fs::exists(dir + "/trainlog.csv"));
  CHECK(fs::exists(dir + "/metrics.csv"));
  const auto metrics = lines_of(slurp(dir + "/metrics.csv"));
  CHECK(metrics.at(0).rfind("# generated ", 0) == 0);
  CHECK(metrics.at(1) == "class,estimator,precision,recall,f1,auc,seed");
  CHECK(metrics.size() == 3);
  const auto log = lines_of(strip_stamp(slurp(dir + "/trainlog.csv")));
  CHECK(log.at(0) == "epoch,loss_kind,pos_term,neg_term,total,inner_neg,precision,recall,f1");
  CHECK(log.size() == 31);
  CHECK(r.out.find("F1 ") != std::string::npos);
}

TEST_CASE("train is byte-identical across runs modulo the timestamp") {
  const auto a = run(with({"train", "--data", small_dataset(), "--out-dir", box / "det_a"}, kQuick));
  const auto b = run(with({"train", "--data", small_dataset(), "--out-dir", box / "det_b"}, kQuick));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* f : {"/metrics.csv", "/trainlog.csv", "/model.ckpt"})
    CHECK(strip_stamp(slurp(box / "det_a" + f)) == strip_stamp(slurp(box / "det_b" + f)));

  run(with({"train", "--data", small_dataset(), "--no-timestamp", "--out-dir", box / "det_c"}, kQuick));
  run(with({"train", "--data", small_dataset(), "--no-timestamp", "--out-dir", box / "det_d"}, kQuick));
  CHECK(slurp(box / "det_c/metrics.csv") == slurp(box / "det_d/metrics.csv"));
  CHECK(slurp(box / "det_c/metrics.csv").rfind("class,", 0) == 0);
}

TEST_CASE("train --repeat appends mean and std rows") {
  const auto dir = box / "repeat";
  const auto r = run(with({"train", "--data", small_dataset(), "--repeat", "3", "--seed", "10", "--no-timestamp",
                           "--out-dir", dir},
                          kQuick));
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir + "/metrics.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[1].ends_with(",10"));
  CHECK(rows[3].ends_with(",12"));
  CHECK(rows[4].ends_with(",mean"));
  CHECK(rows[5].ends_with(",std"));
  for (int i = 0; i < 3; ++i) {
    CHECK(fs::exists(dir + "/model_r" + std::to_string(i) + ".ckpt"));
    CHECK(fs::exists(dir + "/trainlog_r" + std::to_string(i) + ".csv"));
  }
  CHECK(r.out.find("over 3 run(s)") != std::string::npos);
  CHECK(r.out.find(")") != std::string::npos);
  CHECK(run(with({"train", "--data", small_dataset(), "--repeat", "0", "--out-dir", dir}, kQuick)).code != 0);
}

TEST_CASE("config file, environment and flag precedence") {
  const auto cfg = box / "run.cfg";
  std::ofstream(cfg) << "# quick settings\nepochs = 12\nwarmup=4\nhidden=8,8\nn_p=50\nn_u=500\n";
  auto log_rows = [](const std::string& dir) {
    return lines_of(strip_stamp(slurp(dir + "/trainlog.csv"))).size() - 1;
  };

  REQUIRE(run({"train", "--data", small_dataset(), "--config", cfg, "--out-dir", box / "cfg1"}).code == 0);
  CHECK(log_rows(box / "cfg1") == 12);
  REQUIRE(run({"train", "--data", small_dataset(), "--config", cfg, "--epochs", "15", "--out-dir", box / "cfg2"})
              .code == 0);
  CHECK(log_rows(box / "cfg2") == 15);

  ::setenv("OCRISK_EPOCHS", "9", 1);
  REQUIRE(run(with({"train", "--data", small_dataset(), "--out-dir", box / "env1"},
                   {"--warmup", "5", "--hidden", "8,8", "--n-p", "50", "--n-u", "500"}))
              .code == 0);
  CHECK(log_rows(box / "env1") == 9);
  REQUIRE(run({"train", "--data", small_dataset(), "--config", cfg, "--out-dir", box / "env2"}).code == 0);
  CHECK(log_rows(box / "env2") == 12);
  ::unsetenv("OCRISK_EPOCHS");

  std::ofstream(box / "bad.cfg") << "no_such_option=1\n";
  CHECK(run({"train", "--data", small_dataset(), "--config", box / "bad.cfg"}).code != 0);
  std::ofstream(box / "worse.cfg") << "just words\n";
  CHECK(run({"train", "--data", small_dataset(), "--config", box / "worse.cfg"}).code == cli::kInvalidInput);
}

TEST_CASE("train reports divergence with the epoch") {
  const auto r = run(with({"train", "--data", small_dataset(), "--estimator", "bce_u_as_n", "--lr", "1e308",
                           "--out-dir", box / "nan"},
                          kQuick));
  CHECK(r.code == cli::kTrainingFailed);
  CHECK(r.err.find("epoch") != std::string::npos);
}

TEST_CASE("train validation errors exit nonzero") {
  CHECK(run(with({"train", "--data", small_dataset(), "--estimator", "nnpu", "--out-dir", box / "v"}, kQuick)).code ==
        cli::kInvalidInput);
  CHECK(run(with({"train", "--data", small_dataset(), "--alpha-p", "2", "--out-dir", box / "v"}, kQuick)).code ==
        cli::kInvalidInput);
  CHECK(run(with({"train", "--data", small_dataset(), "--calibration", "pul", "--out-dir", box / "v"}, kQuick))
            .code == cli::kInvalidInput);
  CHECK(run({"train", "--data", box / "missing.csv"}).code != 0);
}

TEST_CASE("calibrated baseline through the CLI") {
  const auto dir = box / "calib";
  const auto r = run(with({"train", "--data", small_dataset(), "--estimator", "bce_u_as_n", "--calibration", "pbl",
                           "--no-timestamp", "--out-dir", dir},
                          kQuick));
  REQUIRE(r.code == 0);
  CHECK(lines_of(slurp(dir + "/metrics.csv")).at(1).find("bce_u_as_n+pbl") != std::string::npos);
}

TEST_CASE("eval scores a checkpoint") {
  const auto dir = box / "for_eval";
  REQUIRE(run(with({"train", "--data", small_dataset(), "--out-dir", dir}, kQuick)).code == 0);
  const auto r = run({"eval", "--model", dir + "/model.ckpt", "--data", small_dataset(), "--predictions",
                      "--no-timestamp", "--out-dir", box / "eval"});
  REQUIRE(r.code == 0);
  CHECK(lines_of(slurp(box / "eval/eval_metrics.csv")).at(0) == "class,estimator,precision,recall,f1,auc,seed");
  CHECK(lines_of(slurp(box / "eval/predictions.csv")).size() == 3001);
  CHECK(run({"eval", "--model", small_dataset(), "--data", small_dataset(), "--out-dir", box / "eval"}).code ==
        cli::kInvalidInput);
}

TEST_CASE("sweep grid shape") {
  const auto dir = box / "sweep";
  const auto r = run(with({"sweep", "--data", small_dataset(), "--param", "alpha_p", "--values",
                           "0.1,0.2,0.3,0.4,0.5,0.6", "--gamma", "0", "--repeat", "2", "--epochs", "8",
                           "--no-timestamp", "--out-dir", dir},
                          {"--warmup", "3", "--hidden", "4,4", "--n-p", "20", "--n-u", "200"}));
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir + "/sweep.csv"));
  CHECK(rows.at(0) == "param,value,seed,precision,recall,f1,auc");
  CHECK(rows.size() == 1 + 6 * 2);
  CHECK(lines_of(slurp(dir + "/sweep_summary.csv")).size() == 1 + 6);

  CHECK(run(with({"sweep", "--data", small_dataset(), "--param", "alpha_p", "--values", "", "--out-dir", dir},
                 kQuick))
            .code != 0);
  CHECK(run(with({"sweep", "--data", small_dataset(), "--param", "beta", "--values", "1", "--out-dir", dir}, kQuick))
            .code != 0);
  CHECK(run(with({"sweep", "--data", small_dataset(), "--param", "n_p", "--values", "2.5", "--out-dir", dir}, kQuick))
            .code == cli::kInvalidInput);
}

TEST_CASE("n_p sweep in the few-shot range keeps F1 above zero") {
  const auto dir = box / "np_sweep";
  const auto r = run({"sweep", "--data", small_dataset(), "--param", "n_p", "--values", "5,50,100", "--n-u", "1000",
                      "--epochs", "300", "--hidden", "16,16", "--no-timestamp", "--out-dir", dir});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir + "/sweep.csv"));
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(*parse_real(split_fields(rows[i])[5]) > 0.0);
}

TEST_CASE("verify-theory writes one row per cell") {
  const auto dir = box / "theory";
  const auto r = run({"verify-theory", "--trials", "1000", "--reference-samples", "100000", "--no-timestamp",
                      "--out-dir", dir});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir + "/bounds.csv"));
  CHECK(rows.size() == 10);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].find("FAIL") == std::string::npos);
    CHECK(rows[i].find("PASS") != std::string::npos);
  }
  CHECK(fs::exists(dir + "/bounds_summary.txt"));
  CHECK(r.out.find("all cells passed") != std::string::npos);

  const auto zero = run({"verify-theory", "--sigma", "0", "--out-dir", dir});
  CHECK(zero.code == cli::kInvalidInput);
  const auto margin = run({"verify-theory", "--alpha", "5", "--trials", "1000", "--out-dir", dir});
  CHECK(margin.code == cli::kInvalidInput);
  CHECK(margin.err.find("alpha_margin 5") != std::string::npos);
}

TEST_CASE("one_class beats unbiased_pu on the imbalanced dataset") {
  REQUIRE(run({"gen", "--pi-p", "0.01", "--n", "400000", "--seed", "7", "--out-dir", box / "imb", "-o",
               "imbalanced.csv"})
              .code == 0);
  const auto data = box / "imb/imbalanced.csv";
  REQUIRE(run({"train", "--data", data, "--estimator", "unbiased_pu", "--out-dir", box / "imb/unb"}).code == 0);
  REQUIRE(run({"train", "--data", data, "--estimator", "one_class", "--out-dir", box / "imb/oc"}).code == 0);
  const double f_unb = metric(box / "imb/unb/metrics.csv", "f1");
  const double f_oc = metric(box / "imb/oc/metrics.csv", "f1");
  CHECK(f_oc > f_unb);
  MESSAGE("F1 unbiased_pu " << f_unb << " one_class " << f_oc);
}

TEST_CASE("prior sweep trades precision for recall") {
  const auto dir = box / "prior";
  REQUIRE(run({"gen", "--pi-p", "0.3", "--n", "50000", "--seed", "0", "--out-dir", dir, "-o", "ref.csv"}).code == 0);
  const auto r = run({"sweep", "--data", dir + "/ref.csv", "--param", "pi_p_input", "--values",
                      "0.20,0.25,0.30,0.35,0.40", "--no-timestamp", "--out-dir", dir});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir + "/sweep.csv"));
  REQUIRE(rows.size() == 6);
  std::vector<double> precision, recall;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split_fields(rows[i]);
    precision.push_back(*parse_real(f[3]));
    recall.push_back(*parse_real(f[4]));
  }
  // At most one reversal per sequence, no larger than 2 points.
  auto reversals = [](const std::vector<double>& v, double sign, bool& small) {
    int n = 0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const double step = sign * (v[i + 1] - v[i]);
      if (step > 0.0) {
        ++n;
        small = small && step <= 2.0;
      }
    }
    return n;
  };
  bool small = true;
  CHECK(reversals(precision, 1.0, small) <= 1);
  CHECK(reversals(recall, -1.0, small) <= 1);
  CHECK(small);
}
