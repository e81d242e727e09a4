#include "moltk/bench.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace moltk;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<ResultRow> read_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty csv");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 11) throw ConfigError("unexpected csv layout");
    ResultRow r;
    r.experiment = f[0];
    r.method = f[1];
    r.weights = f[2];
    r.n = std::stoi(f[3]);
    r.N = std::stoi(f[4]);
    r.seed = std::stoull(f[5]);
    r.excess = std::stod(f[6]);
    r.task_excess = Vec(2);
    r.task_excess << std::stod(f[7]), std::stod(f[8]);
    r.error = f[9];
    r.wall_ms = std::stod(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// "l2:d=4,R=1[,degree=2]", "l1:...", "grid:m=64,L=1"
std::pair<ClassPtr, CovariateSampler> parse_class_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw ConfigError("class spec: expected kind:key=value,...");
  const std::string kind = spec.substr(0, colon);
  std::map<std::string, double> kv;
  std::stringstream rest(spec.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("class spec: bad item " + item);
    kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  if (kind == "l1" || kind == "l2") {
    const int d = static_cast<int>(kv.count("d") ? kv["d"] : 2);
    const double R = kv.count("R") ? kv["R"] : 1.0;
    const int degree = static_cast<int>(kv.count("degree") ? kv["degree"] : 0);
    auto cls = std::make_shared<LinearClass>(
        d, degree, kind == "l1" ? Ball::L1 : Ball::L2, R, Link::Identity);
    CovariateSampler sampler = [d](Rng& rng) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = rng.normal();
      return Vec(x / std::max(x.norm(), 1e-300));
    };
    return {cls, sampler};
  }
  if (kind == "grid") {
    const int m = static_cast<int>(kv.count("m") ? kv["m"] : 64);
    const double L = kv.count("L") ? kv["L"] : 1.0;
    auto cls = std::make_shared<GridLipschitzClass>(m, L);
    CovariateSampler sampler = [](Rng& rng) {
      Vec x(1);
      x[0] = rng.uniform();
      return x;
    };
    return {cls, sampler};
  }
  throw ConfigError("class spec: unknown kind " + kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-objective learning toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment and write outputs");
  std::string experiment, config_file, out_dir;
  std::uint64_t seed_base = 0;
  int seeds = -1, weights = -1;
  bool zero_one = false;
  run->add_option("experiment", experiment,
                  "lipschitz_regression | logistic_hard | logistic_easy | "
                  "coin_inconsistency | l2_linear_regression | "
                  "zero_one_regression")
      ->required();
  run->add_option("--config", config_file, "TOML config file");
  run->add_option("--seed-base", seed_base, "first seed");
  run->add_option("--seeds", seeds, "number of repeats");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--weights", weights, "weight grid size m");
  run->add_flag("--zero-one-labels", zero_one,
                "noiseless/Ber(0.65) label variant (logistic_hard)");

  // rate
  auto* rate = app.add_subcommand("rate", "fit a log-log rate from a CSV");
  std::string csv_path, group_col = "n", method = "pl_mol", wfilter;
  rate->add_option("csv", csv_path, "CSV produced by `moltk run`")->required();
  rate->add_option("--group-col", group_col, "n or N");
  rate->add_option("--method", method, "method column filter");
  rate->add_option("--weights", wfilter, "weights column filter (optional)");

  // complexity
  auto* cx = app.add_subcommand("complexity",
                                "Monte-Carlo Rademacher complexity estimate");
  std::string class_spec;
  int cx_n = 64, cx_draws = 200;
  std::uint64_t cx_seed = 0;
  cx->add_option("class-spec", class_spec,
                 "e.g. l2:d=4,R=1 | l1:d=8,R=1 | grid:m=64,L=1")
      ->required();
  cx->add_option("--n", cx_n, "sample size");
  cx->add_option("--draws", cx_draws, "Monte-Carlo draws");
  cx->add_option("--seed", cx_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentConfig cfg = default_config(experiment);
      if (!config_file.empty()) {
        std::ifstream f(config_file);
        if (!f) throw ConfigError("cannot open " + config_file);
        std::stringstream buf;
        buf << f.rdbuf();
        cfg = apply_toml(buf.str(), cfg);
        cfg.experiment = experiment;
      }
      if (seed_base != 0) cfg.seed_base = seed_base;
      if (seeds > 0) cfg.seeds = seeds;
      if (weights > 1) cfg.weight_count = weights;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (zero_one) cfg.zero_one_labels = true;
      const auto rows = run_experiment(cfg);
      write_outputs(cfg, rows);
      int failed = 0;
      for (const auto& r : rows)
        if (!r.error.empty()) ++failed;
      std::cout << rows.size() << " rows -> " << cfg.out_dir << "/"
                << cfg.experiment << ".csv";
      if (failed) std::cout << " (" << failed << " rows aborted)";
      std::cout << "\n";
    } else if (rate->parsed()) {
      if (group_col != "n" && group_col != "N")
        throw ConfigError("--group-col must be n or N");
      const auto rows = read_rows(csv_path);
      const auto [slope, se] = fit_rate_rows(rows, group_col, method, wfilter);
      std::cout << "slope " << slope << " stderr " << se << "\n";
    } else if (cx->parsed()) {
      auto [cls, sampler] = parse_class_spec(class_spec);
      const auto est =
          rademacher_estimate(cls, cx_n, sampler, cx_draws, cx_seed);
      std::cout << "R_n(" << est.class_id << ") ~ " << est.value << " +- "
                << est.std_error << "  (n=" << est.n
                << ", draws=" << est.mc_draws << ")\n";
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
