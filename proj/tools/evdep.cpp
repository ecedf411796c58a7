// Command-line front end: simulate logistic samples, estimate exponent
// measures at a point, check consistency of user-supplied sets, and run the
// full Monte Carlo experiment. All outputs are CSV/JSON for plotting
// elsewhere. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evdep/constrain.hpp"
#include "evdep/estimate.hpp"
#include "evdep/experiment.hpp"
#include "evdep/lattice.hpp"
#include "evdep/models.hpp"
#include "evdep/version.hpp"
#include "json.hpp"

namespace {

using nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> y;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      throw UsageError("bad coordinate '" + token + "' in --y");
    }
    if (used != token.size()) {
      throw UsageError("bad coordinate '" + token + "' in --y");
    }
    y.push_back(v);
  }
  if (y.empty()) throw UsageError("--y needs at least one coordinate");
  return y;
}

void emit(const ordered_json& doc, const std::string& out_path) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream file(out_path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("cannot open '" + out_path + "' for writing");
  }
  file << text;
  if (!file) throw std::runtime_error("failed writing '" + out_path + "'");
}

ordered_json consistency_json(const evdep::ExponentEvaluationSet& set,
                              double tol) {
  const evdep::MoebiusDecomposition dec = evdep::decompose(set);
  const evdep::ConsistencyReport report = evdep::check_consistency(set, tol);
  ordered_json d = ordered_json::object();
  for (const evdep::SubsetIndex& L : evdep::enumerate_subsets(set.dimension())) {
    d[L.label()] = dec.at(L);
  }
  ordered_json violations = ordered_json::array();
  for (const auto& [L, value] : report.violations) {
    violations.push_back({{"L", L.label()}, {"d", value}});
  }
  return ordered_json{{"consistent", report.consistent},
                      {"min_d", report.min_d},
                      {"d", std::move(d)},
                      {"violations", std::move(violations)}};
}

int run_simulate(double alpha, int m, int n, std::uint64_t seed,
                 const std::string& out) {
  const evdep::LogisticModel model(alpha, m);
  evdep::RngStream rng(seed, 0);
  const evdep::BlockMaximaSample sample = evdep::sample_logistic(model, n, rng);
  sample.write_csv(out);
  return 0;
}

int run_estimate(const std::string& in, const std::string& y_text,
                 bool constrained, double tol, const std::string& out) {
  const std::vector<double> y = parse_point(y_text);
  const evdep::BlockMaximaSample sample = evdep::BlockMaximaSample::read_csv(in);
  if (static_cast<int>(y.size()) != sample.dim()) {
    throw std::runtime_error("--y has " + std::to_string(y.size()) +
                             " coordinates but the sample has dimension " +
                             std::to_string(sample.dim()));
  }
  const evdep::ExponentEvaluationSet set = evdep::estimate_all(sample, y);

  ordered_json doc;
  doc["m"] = sample.dim();
  doc["n"] = sample.size();
  doc["y"] = y;
  ordered_json v_json = ordered_json::object();
  ordered_json a_json = ordered_json::object();
  std::vector<double> proj;
  for (const evdep::SubsetIndex& B : evdep::enumerate_subsets(sample.dim())) {
    const double v = set.at(B);
    v_json[B.label()] = v;
    if (B.size() >= 2) {
      proj.clear();
      for (int e : B.elements()) proj.push_back(y[e - 1]);
      a_json[B.label()] = evdep::pickands_from_V(v, proj);
    }
  }
  doc["V"] = std::move(v_json);
  doc["A"] = std::move(a_json);
  doc.update(consistency_json(set, tol));

  if (constrained) {
    const std::vector<double> corrections = evdep::marginal_corrections(sample);
    evdep::HtWeightsMap weights;
    for (const evdep::SubsetIndex& B : evdep::enumerate_subsets(sample.dim())) {
      if (B.size() < 2) continue;
      proj.clear();
      for (int e : B.elements()) proj.push_back(y[e - 1]);
      weights.emplace(B.bits(),
                      evdep::ht_weights(sample, corrections, B,
                                        evdep::simplex_point(proj)));
    }
    const evdep::ConstrainedEstimate sol =
        evdep::solve_constrained(weights, y);
    const evdep::ExponentEvaluationSet cset = evdep::to_evaluation_set(sol, y);
    ordered_json cdoc;
    ordered_json cv = ordered_json::object();
    for (const evdep::SubsetIndex& B : evdep::enumerate_subsets(sample.dim())) {
      cv[B.label()] = cset.at(B);
    }
    ordered_json ca = ordered_json::object();
    for (std::size_t i = 0; i < sol.vars.size(); ++i) {
      ca[sol.vars[i].label()] = sol.a[i];
    }
    cdoc["V"] = std::move(cv);
    cdoc["A"] = std::move(ca);
    cdoc["changed"] = sol.changed;
    cdoc["kkt_residual"] = sol.kkt_residual;
    ordered_json active = ordered_json::array();
    for (const evdep::SubsetIndex& L : sol.active) active.push_back(L.label());
    cdoc["active"] = std::move(active);
    cdoc.update(consistency_json(cset, 1e-7));
    doc["constrained"] = std::move(cdoc);
  }
  emit(doc, out);
  return 0;
}

int run_check(const std::string& in, double tol, const std::string& out) {
  std::ifstream file(in);
  if (!file) throw std::runtime_error("cannot open '" + in + "'");
  ordered_json doc;
  try {
    file >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error("'" + in + "': invalid JSON: " + e.what());
  }
  if (!doc.contains("y") || !doc["y"].is_array()) {
    throw std::runtime_error("'" + in + "': missing \"y\" array");
  }
  std::vector<double> y = doc["y"].get<std::vector<double>>();
  const int m = static_cast<int>(y.size());
  if (!doc.contains("V") || !doc["V"].is_object()) {
    throw std::runtime_error("'" + in + "': missing \"V\" object");
  }
  evdep::ExponentEvaluationSet set{std::vector<double>(y)};
  for (const auto& [key, value] : doc["V"].items()) {
    set.set(evdep::SubsetIndex::parse_label(key, m), value.get<double>());
  }
  if (!set.complete()) {
    throw std::runtime_error("'" + in + "': the V set must cover all 2^m-1 " +
                             std::string("subsets"));
  }
  for (int i = 1; i <= m; ++i) {
    const evdep::SubsetIndex single(1u << (i - 1), m);
    if (std::abs(set.at(single) * y[i - 1] - 1.0) > 1e-6) {
      throw std::runtime_error(
          "margins are not unit Frechet: V_{" + single.label() +
          "} must equal 1/y_" + std::to_string(i));
    }
  }
  ordered_json report;
  report["m"] = m;
  report["y"] = y;
  report.update(consistency_json(set, tol));
  bool all_ones = true;
  for (double v : y) all_ones = all_ones && v == 1.0;
  if (m == 3 && all_ones) {
    const double t12 = set.at(evdep::SubsetIndex(0b011, 3));
    const double t13 = set.at(evdep::SubsetIndex(0b101, 3));
    const double t23 = set.at(evdep::SubsetIndex(0b110, 3));
    try {
      const evdep::ThetaBounds b = evdep::triple_theta_bounds(t12, t13, t23);
      report["theta123_bounds"] = {b.lo, b.hi};
    } catch (const std::invalid_argument&) {
      report["theta123_bounds"] = nullptr;  // pairwise values outside [1,2]
    }
  }
  emit(report, out);
  return 0;
}

evdep::ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "'");
  evdep::ExperimentConfig config;
  bool have_seed = false;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  };
  while (std::getline(file, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) +
                       ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "alphas") {
        config.alphas.clear();
        std::istringstream list(value);
        std::string token;
        while (std::getline(list, token, ',')) {
          config.alphas.push_back(std::stod(trim(token)));
        }
      } else if (key == "n") {
        config.n = std::stoi(value);
      } else if (key == "replications") {
        config.replications = std::stoi(value);
      } else if (key == "seed") {
        config.seed = std::stoull(value);
        have_seed = true;
      } else if (key == "p_start") {
        config.grid.p_start = std::stod(value);
      } else if (key == "p_step") {
        config.grid.p_step = std::stod(value);
      } else if (key == "p_count") {
        config.grid.count = std::stoi(value);
      } else if (key == "threads") {
        config.threads = std::stoi(value);
      } else {
        throw UsageError(path + ":" + std::to_string(line_no) +
                         ": unknown key '" + key + "'");
      }
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw UsageError(path + ":" + std::to_string(line_no) +
                       ": bad value for '" + key + "'");
    }
  }
  if (!have_seed) {
    throw UsageError(path + ": a seed must be given explicitly");
  }
  return config;
}

int run_experiment_cmd(const std::string& config_path,
                       const std::string& out_dir, int threads_override) {
  evdep::ExperimentConfig config = parse_experiment_config(config_path);
  if (threads_override > 0) config.threads = threads_override;
  const evdep::ExperimentResult result = evdep::run_experiment(config);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  evdep::write_rmse_csv(result, (dir / "rmse.csv").string());
  evdep::write_tdev_csv(result, (dir / "tdev.csv").string());
  evdep::write_changed_csv(result, (dir / "changed.csv").string());
  evdep::write_meta_json(result, (dir / "meta.json").string());
  std::cout << "wrote rmse.csv, tdev.csv, changed.csv, meta.json to "
            << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(evdep::kToolName) +
               " - dependence structure of max-stable distributions"};
  app.set_version_flag("--version",
                       std::string(evdep::kToolName) + " " + evdep::kVersion);
  app.require_subcommand(1);

  double sim_alpha = 0.5;
  int sim_m = 3;
  int sim_n = 50;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  CLI::App* sim = app.add_subcommand(
      "simulate", "draw block maxima from the logistic max-stable law");
  sim->add_option("--alpha", sim_alpha, "dependence parameter")
      ->required()
      ->check(CLI::Range(1e-3, 1.0));
  sim->add_option("--m", sim_m, "dimension")->check(CLI::Range(1, 16));
  sim->add_option("--n", sim_n, "number of block maxima")
      ->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "RNG seed (always explicit)")->required();
  sim->add_option("--out", sim_out, "output CSV path")->required();

  std::string est_in, est_y, est_out;
  bool est_constrained = false;
  double est_tol = 1e-9;
  CLI::App* est = app.add_subcommand(
      "estimate", "estimate all exponent measures at one point");
  est->add_option("--in", est_in, "sample CSV (header j,y1,...,ym)")
      ->required();
  est->add_option("--y", est_y, "evaluation point, comma separated")
      ->required();
  est->add_flag("--constrained", est_constrained,
                "also solve the joint constrained problem");
  est->add_option("--tol", est_tol, "consistency tolerance for the report")
      ->check(CLI::NonNegativeNumber);
  est->add_option("--out", est_out, "output JSON path (default stdout)");

  std::string chk_in, chk_out;
  double chk_tol = 1e-9;
  CLI::App* chk = app.add_subcommand(
      "check", "consistency report for a user-supplied V set");
  chk->add_option("--in", chk_in, "JSON with fields y (array) and V (object)")
      ->required();
  chk->add_option("--tol", chk_tol, "consistency tolerance")
      ->check(CLI::NonNegativeNumber);
  chk->add_option("--out", chk_out, "output JSON path (default stdout)");

  std::string exp_config, exp_out;
  int exp_threads = 0;
  CLI::App* exp = app.add_subcommand(
      "experiment", "run the Monte Carlo study and emit CSV/JSON results");
  exp->add_option("--config", exp_config, "key = value configuration file")
      ->required();
  exp->add_option("--out", exp_out, "output directory")->required();
  exp->add_option("--threads", exp_threads,
                  "worker threads (1 = serial reference run)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) {
      return run_simulate(sim_alpha, sim_m, sim_n, sim_seed, sim_out);
    }
    if (est->parsed()) {
      return run_estimate(est_in, est_y, est_constrained, est_tol, est_out);
    }
    if (chk->parsed()) {
      return run_check(chk_in, chk_tol, chk_out);
    }
    if (exp->parsed()) {
      return run_experiment_cmd(exp_config, exp_out, exp_threads);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
