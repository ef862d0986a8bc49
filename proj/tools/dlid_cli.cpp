// Experiment driver: deltaf, localmin, outliers, samplen, report.
#include "dlid/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum Exit { kOk = 0, kConfig = 2, kNonConvergence = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  std::string format = "csv";
};

void emit(const dlid::Table& t, const Options& o) {
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw dlid::ConfigError("cannot write " + o.out);
    os = &file;
  }
  if (o.format == "json") *os << t.to_json().dump(2) << "\n";
  else t.write_csv(*os);
}

void emit_json(const nlohmann::json& j, const Options& o) {
  if (o.out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream file(o.out);
  if (!file) throw dlid::ConfigError("cannot write " + o.out);
  file << j.dump(2) << "\n";
}

dlid::ExperimentConfig load(const Options& o) {
  auto kv = dlid::KeyValueConfig::from_file(o.config);
  auto cfg = dlid::load_experiment(kv, o.seed);
  if (o.threads) {
    if (*o.threads < 1) throw dlid::ConfigError("--threads must be positive");
    cfg.threads = *o.threads;
  }
  return cfg;
}

// seeds seed, seed+1, ... as set by `seeds`
std::vector<std::uint64_t> seed_list(const dlid::ExperimentConfig& cfg) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < cfg.seeds; ++i) s.push_back(cfg.seed + i);
  return s;
}

int check_failures(long failed, long cells, const dlid::ExperimentConfig& cfg) {
  if (cells > 0 && failed > cfg.max_fail_fraction * cells) {
    std::cerr << "solver non-convergence in " << failed << " of " << cells
              << " cells\n";
    return kNonConvergence;
  }
  return kOk;
}

int cmd_deltaf(const Options& o) {
  auto cfg = load(o);
  std::vector<dlid::DeltaFRow> rows;
  long failed = 0, cells = 0;
  for (auto s : seed_list(cfg)) {
    auto r = dlid::run_delta_F(cfg, s);
    for (auto& row : r) {
      failed += row.failed_dirs;
      cells += row.n_dirs;
    }
    rows.insert(rows.end(), r.begin(), r.end());
  }
  emit(dlid::delta_F_table(cfg, rows), o);
  return check_failures(failed, cells, cfg);
}

int cmd_localmin(const Options& o) {
  auto cfg = load(o);
  nlohmann::json out = nlohmann::json::array();
  for (auto s : seed_list(cfg))
    out.push_back(dlid::to_json(dlid::run_local_min_search(cfg, s), cfg));
  if (o.format == "json") {
    emit_json(out, o);
  } else {
    dlid::Table t;
    t.columns = {"seed", "config_hash", "version", "r_init", "final_distance",
                 "iterations", "converged", "diverged", "sign_match"};
    for (auto& j : out) t.rows.push_back(j);
    emit(t, o);
  }
  return kOk;
}

int cmd_outliers(const Options& o) {
  auto cfg = load(o);
  std::vector<dlid::OutlierRow> rows;
  for (auto s : seed_list(cfg)) {
    auto r = dlid::run_outlier_sweep(cfg, s);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  emit(dlid::outlier_table(cfg, rows), o);
  return kOk;
}

int cmd_samplen(const Options& o) {
  auto cfg = load(o);
  emit(dlid::sample_table(cfg, dlid::run_sample_complexity_sweep(cfg)), o);
  return kOk;
}

int cmd_report(const Options& o) {
  auto cfg = load(o);
  auto R = dlid::asymptotic_report(cfg.D0, cfg.model, cfg.lambda);
  nlohmann::json j = dlid::to_json(R);
  nlohmann::json radii = nlohmann::json::array();
  auto sp = dlid::spectral_profile(cfg.D0);
  for (double r : cfg.radii) {
    nlohmann::json e = {{"r", r},
                        {"delta_f_lower", dlid::delta_f_lower(R, r)},
                        {"noise_threshold", R.noise_threshold(r)}};
    try {
      e["outliers"] = dlid::to_json(dlid::outlier_thresholds(R, r, cfg.x, cfg.n, sp.frame_lower));
    } catch (const dlid::InfeasibleRadius& ex) {
      e["outliers"] = ex.what();
    }
    if (r > R.r_lo && r < R.r_hi)
      e["sample_complexity"] = dlid::to_json(dlid::finite_sample_n(R, r, cfg.x));
    radii.push_back(e);
  }
  j["radii"] = radii;
  j["config_hash"] = cfg.hash;
  j["seed"] = cfg.seed;
  j["version"] = dlid::kVersion;
  if (o.format == "json") {
    emit_json(j, o);
  } else {
    dlid::Table t;
    t.columns = {"seed", "config_hash", "version", "condition", "lhs",
                 "relation", "rhs", "satisfied"};
    for (auto& c : R.conditions)
      t.rows.push_back({{"seed", cfg.seed}, {"config_hash", cfg.hash},
                        {"version", dlid::kVersion}, {"condition", c.name},
                        {"lhs", c.lhs}, {"relation", c.relation},
                        {"rhs", c.rhs}, {"satisfied", c.satisfied}});
    emit(t, o);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dictionary learning identifiability experiments"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  int threads = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value config file")->required();
    sub->add_option("--seed", seed, "base seed (overrides the config)");
    sub->add_option("--out", o.out, "output path (default stdout)");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--format", o.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> cmds = {
      {app.add_subcommand("deltaf", "minimum of Delta F_X over sampled spheres"), cmd_deltaf},
      {app.add_subcommand("localmin", "alternating minimization from a perturbed start"), cmd_localmin},
      {app.add_subcommand("outliers", "outlier energy sweep"), cmd_outliers},
      {app.add_subcommand("samplen", "failure rate against n"), cmd_samplen},
      {app.add_subcommand("report", "theorem conditions and constants"), cmd_report}};
  for (auto& [sub, fn] : cmds) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  for (auto& [sub, fn] : cmds) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) o.seed = seed;
    if (sub->count("--threads")) o.threads = threads;
    try {
      return fn(o);
    } catch (const dlid::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const dlid::InvalidParameter& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const dlid::NonConvergence& e) {
      std::cerr << "solver: " << e.what() << "\n";
      return kNonConvergence;
    }
  }
  return kOk;
}
