// faclearn: generate datasets, benchmark both execution paths, fit and
// evaluate the strategy estimator, and print reports.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "faclearn/bench.hpp"
#include "faclearn/datagen.hpp"
#include "faclearn/errors.hpp"
#include "faclearn/estimator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace faclearn;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <typename F>
void write_with(const fs::path& path, F&& body) {
  std::ostringstream ss;
  body(ss);
  write_text(path, ss.str());
}

std::vector<LabeledRun> load_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus " + path.string());
  return read_corpus_csv(in);
}

std::vector<fs::path> find_datasets(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return {dir};
  if (fs::exists(dir / "manifest.json")) return {dir / "manifest.json"};
  if (!fs::is_directory(dir)) throw ConfigError("no dataset directory at " + dir.string());
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) found.push_back(e.path() / "manifest.json");
  }
  std::sort(found.begin(), found.end());
  if (found.empty()) throw ConfigError("no manifest.json found under " + dir.string());
  return found;
}

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  std::vector<ModelKind> out;
  for (const auto& n : names) out.push_back(model_from_string(n));
  return out;
}

// Shared run options; flags override the config file.
struct RunFlags {
  std::string config;
  std::string data;
  std::string out = "out";
  std::string hardware;
  std::vector<std::string> models;
  std::vector<unsigned> threads;
  std::size_t repeats = 0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

BenchOptions bench_options(const RunFlags& f) {
  BenchOptions o;
  json cfg = f.config.empty() ? json::object() : read_json(f.config);
  try {
    if (cfg.contains("models")) o.models = parse_models(cfg["models"].get<std::vector<std::string>>());
    if (cfg.contains("threads")) o.threads = cfg["threads"].get<std::vector<unsigned>>();
    o.repeats = cfg.value("repeats", o.repeats);
    o.warmup = cfg.value("warmup", o.warmup);
    o.train.iterations = cfg.value("iterations", o.train.iterations);
    o.train.clusters = cfg.value("clusters", o.train.clusters);
    o.train.rank = cfg.value("rank", o.train.rank);
    o.train.seed = cfg.value("seed", o.train.seed);
    if (cfg.contains("learning_rate")) {
      o.train.learning_rate = cfg["learning_rate"].get<double>();
      o.auto_learning_rate = false;
    }
    o.memory_bandwidth = cfg.value("memory_bandwidth", o.memory_bandwidth);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
  if (!f.hardware.empty()) {
    const HardwareSpec hw = HardwareSpec::from_json(read_json(f.hardware));
    o.memory_bandwidth = hw.memory_bandwidth;
    o.hardware_label = hw.label;
  }
  if (!f.models.empty()) o.models = parse_models(f.models);
  if (!f.threads.empty()) o.threads = f.threads;
  if (f.repeats > 0) o.repeats = f.repeats;
  if (f.iterations > 0) o.train.iterations = f.iterations;
  if (f.seed_set) o.train.seed = f.seed;
  o.validate();
  return o;
}

std::string data_dir(const RunFlags& f) {
  if (!f.data.empty()) return f.data;
  if (!f.config.empty()) {
    const json cfg = read_json(f.config);
    if (cfg.contains("data")) {
      fs::path p = cfg["data"].get<std::string>();
      return p.is_relative() ? (fs::path(f.config).parent_path() / p).string() : p.string();
    }
  }
  throw ConfigError("no dataset directory given (use --data or a config 'data' field)");
}

int cmd_datagen(const RunFlags& f, const std::string& format) {
  if (f.config.empty()) throw ConfigError("datagen needs --config");
  json cfg = read_json(f.config);
  if (f.seed_set) cfg["seed"] = f.seed;
  const auto specs = expand_grid(cfg);
  const auto paths = write_grid(f.out, specs, format);
  std::cout << "wrote " << paths.size() << " datasets to " << f.out << "\n";
  return 0;
}

int cmd_bench(const RunFlags& f) {
  const BenchOptions opts = bench_options(f);
  const auto manifests = find_datasets(data_dir(f));
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const LoadedDataset d = load_dataset(manifests[i]);
    auto part = bench_dataset(d.table, d.manifest.id, opts);
    rows.insert(rows.end(), part.begin(), part.end());
    std::cerr << "[" << (i + 1) << "/" << manifests.size() << "] " << d.manifest.id << "\n";
  }
  const fs::path out = f.out;
  write_with(out / "bench.csv", [&](std::ostream& s) { write_bench_csv(s, rows); });
  write_with(out / "corpus.csv", [&](std::ostream& s) { write_corpus_csv(s, to_corpus(rows)); });
  const auto flagged = std::count_if(rows.begin(), rows.end(), [](const BenchRow& r) { return !r.equivalent; });
  std::cout << rows.size() << " runs, " << flagged << " flagged by the equivalence check; wrote " << out / "bench.csv"
            << " and " << out / "corpus.csv" << "\n";
  return 0;
}

int cmd_features(const RunFlags& f) {
  const BenchOptions opts = bench_options(f);
  std::ostringstream s;
  s << "dataset,model,threads";
  for (auto n : feature_names()) s << ',' << n;
  s << '\n';
  for (const auto& m : find_datasets(data_dir(f))) {
    const LoadedDataset d = load_dataset(m);
    require_valid(d.table);
    const TableDescriptor desc = TableDescriptor::from(d.table);
    for (ModelKind model : opts.models) {
      for (unsigned t : opts.threads) {
        const auto fv = extract_features(desc, model, opts.train,
                                         {static_cast<double>(t), opts.memory_bandwidth, opts.hardware_label});
        s << d.manifest.id << ',' << to_string(model) << ',' << t;
        for (double v : fv) s << ',' << json(v).dump();
        s << '\n';
      }
    }
  }
  const fs::path out = fs::path(f.out) / "features.csv";
  write_text(out, s.str());
  std::cout << "wrote " << out << "\n";
  return 0;
}

void write_metrics(const fs::path& dir, const MetricsTable& t, std::size_t train_rows, std::size_t test_rows,
                   std::uint64_t seed) {
  write_with(dir / "metrics.csv", [&](std::ostream& s) { t.write_csv(s); });
  json j = {{"seed", seed}, {"train_rows", train_rows}, {"test_rows", test_rows}, {"estimators", t.to_json()}};
  write_text(dir / "metrics.json", j.dump(2) + "\n");
  std::printf("%-20s %6s %9s %9s %9s\n", "estimator", "n", "accuracy", "f1", "speedup");
  for (const auto& [name, m] : t.rows) {
    std::printf("%-20s %6zu %9.4f %9.4f %9.4f\n", name.c_str(), m.n, m.accuracy, m.f1, m.overall_speedup);
  }
}

int cmd_fit(const std::string& corpus_path, const RunFlags& f) {
  const auto corpus = load_corpus(corpus_path);
  const ProtocolResult r = run_protocol(corpus, f.seed);
  const fs::path out = f.out;
  write_text(out / "model.json", r.full.to_json().dump(2) + "\n");
  write_text(out / "model_no_hardware.json", r.no_hardware.to_json().dump(2) + "\n");
  write_metrics(out, r.metrics, r.train_rows, r.test_rows, f.seed);
  return 0;
}

int cmd_eval(const std::string& corpus_path, const std::string& model_dir, const RunFlags& f) {
  const auto corpus = load_corpus(corpus_path);
  const fs::path dir = model_dir.empty() ? fs::path(f.out) : fs::path(model_dir);
  const GbdtModel full = GbdtModel::from_json(read_json(dir / "model.json"));
  const GbdtModel no_hw = GbdtModel::from_json(read_json(dir / "model_no_hardware.json"));
  const MetricsTable t = evaluate_protocol(corpus, f.seed, full, no_hw);
  const Split s = split_corpus(corpus, f.seed);
  write_metrics(f.out, t, s.train.size(), s.test.size(), f.seed);
  return 0;
}

int cmd_report(const std::string& bench_path, const std::string& corpus_path, const std::string& model_path,
               const std::string& metrics_path, const RunFlags& f) {
  std::vector<BenchRow> rows;
  if (!bench_path.empty()) {
    std::ifstream in(bench_path);
    if (!in) throw ConfigError("cannot open " + bench_path);
    rows = read_bench_csv(in);
  }
  // Estimator decisions need the features, which live in the corpus.
  std::map<std::tuple<std::string, std::string, unsigned>, FeatureVector> features;
  if (!corpus_path.empty()) {
    for (const auto& r : load_corpus(corpus_path)) features[{r.dataset, r.model, r.threads}] = r.features;
  }
  std::optional<GbdtModel> model;
  if (!model_path.empty()) model = GbdtModel::from_json(read_json(model_path));

  std::ostringstream csv, text;
  csv << "dataset,model,threads,t_fact,t_mat,speedup,equivalent,tr_fr,max_rule,gbdt,speedup_gbdt\n";
  char line[256];
  if (!rows.empty()) {
    std::snprintf(line, sizeof line, "%-12s %-7s %3s %10s %10s %8s %4s %6s %6s %6s\n", "dataset", "model", "thr",
                  "t_fact", "t_mat", "speedup", "eq", "tr_fr", "max", "gbdt");
    text << line;
  }
  for (const auto& r : rows) {
    std::string gbdt = "-";
    double guided = 1.0;
    const auto it = features.find({r.dataset, to_string(r.model), r.threads});
    if (model && it != features.end()) {
      const bool fact = predict(*model, it->second).factorize;
      gbdt = fact ? "fact" : "mat";
      guided = fact ? r.speedup() : 1.0;
    }
    csv << r.dataset << ',' << to_string(r.model) << ',' << r.threads << ',' << json(r.t_fact).dump() << ','
        << json(r.t_mat).dump() << ',' << json(r.speedup()).dump() << ',' << (r.equivalent ? 1 : 0) << ','
        << (r.tr_fr ? "fact" : "mat") << ',' << (r.max_rule ? "fact" : "mat") << ',' << gbdt << ','
        << (gbdt == "-" ? std::string("") : json(guided).dump()) << '\n';
    std::snprintf(line, sizeof line, "%-12s %-7s %3u %10.5f %10.5f %8.3f %4s %6s %6s %6s\n", r.dataset.c_str(),
                  to_string(r.model).c_str(), r.threads, r.t_fact, r.t_mat, r.speedup(), r.equivalent ? "ok" : "FAIL",
                  r.tr_fr ? "fact" : "mat", r.max_rule ? "fact" : "mat", gbdt.c_str());
    text << line;
  }
  if (!rows.empty()) {
    // Mean speedup per model, the shape of the per-model summary tables.
    text << "\nmean speedup by model\n";
    for (ModelKind m : kAllModels) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : rows) {
        if (r.model == m && r.equivalent) {
          sum += r.speedup();
          ++n;
        }
      }
      if (n == 0) continue;
      std::snprintf(line, sizeof line, "  %-7s %8.3f  (%zu runs)\n", to_string(m).c_str(), sum / static_cast<double>(n), n);
      text << line;
    }
  }
  if (!metrics_path.empty()) {
    std::ifstream in(metrics_path);
    if (!in) throw ConfigError("cannot open " + metrics_path);
    text << "\nestimator metrics\n" << in.rdbuf();
  }
  const fs::path out = f.out;
  write_text(out / "report.csv", csv.str());
  write_text(out / "report.txt", text.str());
  std::cout << text.str();
  return 0;
}

int cmd_hwprobe(const RunFlags& f) {
  // STREAM-style triad a = b + s * c over arrays well beyond cache size.
  const std::size_t n = 1 << 23;
  std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 2.0);
  double best = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) a[i] = b[i] + 3.0 * c[i];
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::max(best, 3.0 * sizeof(double) * static_cast<double>(n) / s);
  }
  volatile double sink = a[n / 2];
  (void)sink;
  HardwareSpec hw;
  hw.parallelism = std::max(1u, std::thread::hardware_concurrency());
  hw.memory_bandwidth = best;
  hw.label = "probe";
  const fs::path out = fs::path(f.out) / "hardware.json";
  write_text(out, hw.to_json().dump(2) + "\n");
  std::cout << hw.to_json().dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factorized learning over data-integration metadata"};
  app.require_subcommand(1);
  RunFlags flags;
  std::string format = ".mtx", corpus, model_dir, bench_csv, model_json, metrics_csv;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--seed", flags.seed, "Seed")->each([&](const std::string&) { flags.seed_set = true; });
  };
  auto run = [&](CLI::App* sub) {
    sub->add_option("--data", flags.data, "Dataset directory (one dataset or a directory of datasets)");
    sub->add_option("--models", flags.models, "Models: linreg, logreg, kmeans, gnmf")->delimiter(',');
    sub->add_option("--threads", flags.threads, "Thread counts")->delimiter(',');
    sub->add_option("--repeats", flags.repeats, "Timed repetitions per path");
    sub->add_option("--iterations", flags.iterations, "Training iterations");
    sub->add_option("--hardware", flags.hardware, "Hardware JSON from hwprobe");
  };

  auto* datagen = app.add_subcommand("datagen", "Generate synthetic datasets from a grid config");
  common(datagen);
  datagen->add_option("--format", format, "Matrix file extension: .mtx or .ilg")
      ->check(CLI::IsMember({".mtx", ".ilg"}));
  auto* bench = app.add_subcommand("bench", "Time both execution paths per dataset, model and thread count");
  common(bench);
  run(bench);
  auto* features = app.add_subcommand("features", "Extract estimator features without training");
  common(features);
  run(features);
  auto* fit = app.add_subcommand("fit", "Fit the estimator on a corpus and evaluate it on the held-out split");
  common(fit);
  fit->add_option("corpus", corpus, "Corpus CSV from bench")->required();
  auto* eval = app.add_subcommand("eval", "Evaluate fitted estimators on the held-out split");
  common(eval);
  eval->add_option("corpus", corpus, "Corpus CSV from bench")->required();
  eval->add_option("--model-dir", model_dir, "Directory with model.json and model_no_hardware.json");
  auto* report = app.add_subcommand("report", "Render bench and estimator outputs as tables");
  common(report);
  report->add_option("--bench", bench_csv, "bench.csv");
  report->add_option("--corpus", corpus, "corpus.csv, for estimator decisions");
  report->add_option("--model", model_json, "model.json");
  report->add_option("--metrics", metrics_csv, "metrics.csv");
  auto* hwprobe = app.add_subcommand("hwprobe", "Measure memory bandwidth and parallelism");
  common(hwprobe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*datagen) return cmd_datagen(flags, format);
    if (*bench) return cmd_bench(flags);
    if (*features) return cmd_features(flags);
    if (*fit) return cmd_fit(corpus, flags);
    if (*eval) return cmd_eval(corpus, model_dir, flags);
    if (*report) return cmd_report(bench_csv, corpus, model_json, metrics_csv, flags);
    if (*hwprobe) return cmd_hwprobe(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
