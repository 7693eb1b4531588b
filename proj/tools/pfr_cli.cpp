// Command-line front end for partial factor regression experiments.
#include "pfr/baselines.hpp"
#include "pfr/experiments.hpp"
#include "pfr/factor_sampler.hpp"
#include "pfr/io.hpp"
#include "pfr/partial_factor_regression.hpp"
#include "pfr/random.hpp"
#include "pfr/selection.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace pfr;

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string input;
  std::string response_col;
  std::string model;
  std::string methods;
  Index k = 0;
  double variance_fraction = 0.90;
  Index folds = 10;
  double split = 0.75;
  std::vector<double> grid_f;
  std::vector<double> grid_r;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  Index datasets = 50;
  std::string scenario = "unfavorable";
  Index replicates = 5000;
  Index n = 10;
  Index sweeps = 0;
  Index burn = -1;
  double noise_variance = 1.0;
  double theta_scale = 1.0;
  bool full_scale = false;
  bool timing = false;
  std::string scatter;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
  return M;
}

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

GibbsOptions gibbs_options(const RunConfig& cfg) {
  GibbsOptions g;
  if (cfg.sweeps > 0) {
    g.schedule.total = cfg.sweeps;
    g.schedule.burn_in = cfg.burn >= 0 ? cfg.burn : cfg.sweeps / 2;
  } else if (cfg.burn >= 0) {
    g.schedule.burn_in = cfg.burn;
  }
  g.keep_draws = false;
  return g;
}

json config_echo(const std::string& command, const RunConfig& cfg, const GibbsOptions& g) {
  return json{{"command", command},
              {"input", cfg.input},
              {"response_col", cfg.response_col},
              {"model", cfg.model},
              {"methods", cfg.methods},
              {"k", cfg.k},
              {"variance_fraction", cfg.variance_fraction},
              {"folds", cfg.folds},
              {"split", cfg.split},
              {"grid_f", cfg.grid_f},
              {"grid_r", cfg.grid_r},
              {"seed", cfg.seed},
              {"datasets", cfg.datasets},
              {"scenario", cfg.scenario},
              {"replicates", cfg.replicates},
              {"n", cfg.n},
              {"sweeps", g.schedule.total},
              {"burn", g.schedule.burn_in},
              {"noise_variance", cfg.noise_variance},
              {"theta_scale", cfg.theta_scale},
              {"full_scale", cfg.full_scale},
              {"format", cfg.format}};
}

json report_header(const std::string& command, const RunConfig& cfg, const GibbsOptions& g) {
  return json{{"config", config_echo(command, cfg, g)},
              {"seed", cfg.seed},
              {"versions", {{"pfr", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)}}}};
}

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(cfg.out, text);
  }
}

CsvOptions csv_options(const RunConfig& cfg, bool center) {
  CsvOptions o;
  if (!cfg.response_col.empty()) o.response_column = cfg.response_col;
  o.center = center;
  return o;
}

void require_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw std::invalid_argument("--input is required");
}

// ---------------------------------------------------------------------------

json run_fit(const RunConfig& cfg) {
  require_input(cfg);
  const std::string method = cfg.methods.empty() ? "PFR" : cfg.methods;
  if (method != "PFR" && method != "BFR") throw UnknownMethodError("fit supports PFR or BFR, not " + method);
  DataMatrix data = ingest_csv(cfg.input, csv_options(cfg, true));
  if (!data.y) throw std::invalid_argument("fit: input has no response column");
  const GibbsOptions g = gibbs_options(cfg);
  const Index k = cfg.k > 0 ? cfg.k : choose_k(data.X, cfg.variance_fraction);
  PfrOptions opts;
  opts.gibbs = g;
  opts.grid_f = cfg.grid_f;
  opts.grid_r = cfg.grid_r;
  opts.folds = cfg.folds;
  opts.factor_only = method == "BFR";
  const PfrModel model = fit_partial_factor_regression(data, k, opts, cfg.seed);

  json rep = report_header("fit", cfg, g);
  rep["model"] = {{"method", method},
                  {"k", k},
                  {"tau_f", model.fit.tau_f},
                  {"tau_r", model.fit.tau_r},
                  {"sigma2_hat", model.fit.sigma2_hat},
                  {"effective_df", model.fit.effective_df},
                  {"gamma", to_json(model.fit.gamma)},
                  {"B", to_json(model.posterior.mean_B)},
                  {"Psi", to_json(model.posterior.mean_Psi)},
                  {"column_means", to_json(data.column_means)},
                  {"y_mean", data.y_mean}};
  rep["n_labeled"] = data.labeled.size();
  const Vector fitted = predict(model.fit, model.design.subset(data.labeled));
  rep["training_mse"] = (fitted - data.labeled_y()).squaredNorm() / static_cast<double>(data.labeled.size());
  return rep;
}

std::string run_predict(const RunConfig& cfg) {
  require_input(cfg);
  if (cfg.model.empty()) throw std::invalid_argument("--model is required");
  std::ifstream in(cfg.model);
  if (!in) throw std::invalid_argument("cannot open model " + cfg.model);
  const json artifact = json::parse(in);
  const json& m = artifact.at("model");
  FactorPosterior post;
  post.mean_B = matrix_from_json(m.at("B"));
  post.mean_Psi = vector_from_json(m.at("Psi"));
  PfrFit fit;
  fit.gamma = vector_from_json(m.at("gamma"));
  fit.k = m.at("k").get<Index>();
  fit.tau_f = m.at("tau_f").get<double>();
  fit.tau_r = m.at("tau_r").get<double>();

  DataMatrix data = ingest_csv(cfg.input, csv_options(cfg, false));
  data.center_with(vector_from_json(m.at("column_means")), m.at("y_mean").get<double>());
  const Vector pred = predict(fit, post, data.X).array() + m.at("y_mean").get<double>();
  std::ostringstream out;
  out << "prediction\n";
  for (Index i = 0; i < pred.size(); ++i) out << format_double(pred(i)) << '\n';
  return out.str();
}

json metrics_json(const MetricsTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"method", r.method},
                    {"percent_best", r.percent_best},
                    {"mean_relative_error", r.mean_relative_error},
                    {"excess_relative_error", r.excess_relative_error},
                    {"overall_mse", r.overall_mse},
                    {"scaled_mse", r.scaled_mse}});
  }
  return rows;
}

std::string metrics_csv(const MetricsTable& t) {
  std::ostringstream out;
  out << "method,percent_best,mean_relative_error,excess_relative_error,overall_mse,scaled_mse\n";
  for (const auto& r : t.rows) {
    out << r.method << ',' << format_double(r.percent_best) << ',' << format_double(r.mean_relative_error) << ','
        << format_double(r.excess_relative_error) << ',' << format_double(r.overall_mse) << ','
        << format_double(r.scaled_mse) << '\n';
  }
  return out.str();
}

Scenario parse_scenario(const std::string& s) {
  if (s == "favorable") return Scenario::Favorable;
  if (s == "unfavorable") return Scenario::Unfavorable;
  throw std::invalid_argument("--scenario must be favorable or unfavorable");
}

std::string run_simulate(RunConfig cfg, const GibbsOptions& g) {
  if (cfg.full_scale) cfg.datasets = 150;
  ScenarioConfig sc;
  sc.scenario = parse_scenario(cfg.scenario);
  sc.noise_variance = cfg.noise_variance;
  sc.theta_scale = cfg.theta_scale;
  SimulationOptions opts;
  opts.gibbs = g;
  opts.grid_f = cfg.grid_f;
  opts.grid_r = cfg.grid_r;
  opts.folds = cfg.folds;
  opts.variance_fraction = cfg.variance_fraction;
  const auto methods = cfg.methods.empty() ? simulation_methods() : split_list(cfg.methods);
  const SimulationReport rep = simulation_study(cfg.datasets, sc, methods, cfg.seed, opts);
  if (rep.errors.rows() == 0) throw std::runtime_error("simulate: every dataset failed");
  if (cfg.format == "csv") return metrics_csv(rep.table);
  json out = report_header("simulate", cfg, g);
  out["metrics"] = metrics_json(rep.table);
  out["completed"] = rep.errors.rows();
  out["skipped"] = rep.skipped;
  out["diagnostics"] = rep.diagnostics;
  out["k_true"] = rep.k_true;
  out["k_used"] = rep.k_used;
  return out.dump(2) + "\n";
}

std::string run_example2(const RunConfig& cfg, const GibbsOptions& g) {
  const Example2Result res = example2_study(cfg.n, cfg.replicates, cfg.seed);
  if (!cfg.scatter.empty()) {
    std::ostringstream sc;
    sc << "delta_loglik,delta_mse\n";
    for (const auto& pt : res.scatter) sc << format_double(pt.delta_loglik) << ',' << format_double(pt.delta_mse) << '\n';
    write_file_atomic(cfg.scatter, sc.str());
  }
  json out = report_header("example2", cfg, g);
  out["lr_favor_fraction"] = res.lr_favor_fraction;
  out["pred_worse_fraction"] = res.pred_worse_fraction;
  out["mean_delta_loglik"] = res.mean_delta_loglik;
  out["se_delta_loglik"] = res.se_delta_loglik;
  out["mean_delta_mse"] = res.mean_delta_mse;
  out["approximation"] = {{"A", to_json(Vector(res.approximation.model.B.col(0)))},
                          {"D", to_json(res.approximation.model.Psi)},
                          {"kl", res.approximation.kl},
                          {"iterations", res.approximation.iterations}};
  return out.dump(2) + "\n";
}

std::string run_benchmark(const RunConfig& cfg, const GibbsOptions& g) {
  require_input(cfg);
  const DataMatrix data = ingest_csv(cfg.input, csv_options(cfg, false));
  const auto methods = cfg.methods.empty() ? std::vector<std::string>{"PFR", "RR", "PLS", "LARS", "PCR"} : split_list(cfg.methods);
  BenchmarkOptions opts;
  opts.gibbs = g;
  opts.grid_f = cfg.grid_f;
  opts.grid_r = cfg.grid_r;
  opts.variance_fraction = cfg.variance_fraction;
  opts.k = cfg.k;
  const BenchmarkReport rep = benchmark_real(data, methods, cfg.split, cfg.folds, cfg.seed, opts);
  if (cfg.format == "csv") {
    std::ostringstream out;
    out << "method,sse,percent_worse\n";
    for (std::size_t i = 0; i < rep.methods.size(); ++i)
      out << rep.methods[i] << ',' << format_double(rep.sse[i]) << ',' << format_double(rep.percent_worse[i]) << '\n';
    return out.str();
  }
  json out = report_header("benchmark", cfg, g);
  json rows = json::array();
  for (std::size_t i = 0; i < rep.methods.size(); ++i) {
    rows.push_back({{"method", rep.methods[i]},
                    {"sse", rep.sse[i]},
                    {"percent_worse", rep.percent_worse[i]},
                    {"tuning", rep.tuning.at(rep.methods[i])}});
  }
  out["results"] = rows;
  out["n_train"] = rep.n_train;
  out["n_test"] = rep.n_test;
  out["p"] = rep.p;
  return out.dump(2) + "\n";
}

std::string run_select(const RunConfig& cfg, const GibbsOptions& g) {
  require_input(cfg);
  const DataMatrix data = ingest_csv(cfg.input, csv_options(cfg, true));
  const Index k = cfg.k > 0 ? cfg.k : choose_k(data.X, cfg.variance_fraction);
  const SpikeSlabResult res = spike_slab_sampler(data, k, SpikeSlabPriors{}, g.schedule, cfg.seed);
  const InclusionReport inc = three_question_report(res.chain);
  json out = report_header("select", cfg, g);
  out["k"] = k;
  out["prob_lambda_zero"] = res.estimate.prob_lambda_zero;
  out["rank_distribution"] = res.estimate.rank_distribution;
  out["modal_rank"] = res.estimate.modal_rank();
  out["inclusion_theta"] = to_json(inc.prob_theta);
  out["inclusion_lambda"] = to_json(inc.prob_lambda);
  out["psi_acceptance"] = res.psi_acceptance;
  return out.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial factor regression: fitting, prediction and experiments"};
  app.require_subcommand(1);
  RunConfig cfg;
  cfg.grid_f = default_penalty_grid();
  cfg.grid_r = default_penalty_grid();

  auto add_common = [&](CLI::App* sub, bool stochastic) {
    sub->add_option("--out", cfg.out, "Output path (stdout when omitted)");
    sub->add_option("--methods", cfg.methods, "Comma-separated method list");
    sub->add_option("--k", cfg.k, "Number of factors (0 selects by variance fraction)")->check(CLI::NonNegativeNumber);
    sub->add_option("--variance-fraction", cfg.variance_fraction, "Variance share for choosing k")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--folds", cfg.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
    sub->add_option("--grid-f", cfg.grid_f, "Factor-block penalty grid")->delimiter(',');
    sub->add_option("--grid-r", cfg.grid_r, "Residual-block penalty grid")->delimiter(',');
    sub->add_option("--sweeps", cfg.sweeps, "Total Gibbs sweeps")->check(CLI::NonNegativeNumber);
    sub->add_option("--burn", cfg.burn, "Burn-in sweeps");
    sub->add_option("--format", cfg.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_flag("--timing", cfg.timing, "Include wall-clock time in the report");
    auto* seed = sub->add_option("--seed", cfg.seed, "Master seed");
    if (stochastic) seed->required();
  };
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "CSV input")->required();
    sub->add_option("--response-col", cfg.response_col, "Response column name (or index without header)");
  };

  auto* fit = app.add_subcommand("fit", "Fit partial factor regression and write a model artifact");
  add_common(fit, true);
  add_input(fit);
  auto* pred = app.add_subcommand("predict", "Predict new rows from a model artifact");
  add_common(pred, false);
  add_input(pred);
  pred->add_option("--model", cfg.model, "Model artifact from fit")->required();
  auto* sim = app.add_subcommand("simulate", "Synthetic simulation study");
  add_common(sim, true);
  sim->add_option("--scenario", cfg.scenario, "favorable or unfavorable");
  sim->add_option("--datasets", cfg.datasets, "Number of datasets")->check(CLI::PositiveNumber);
  sim->add_flag("--full-scale", cfg.full_scale, "Run 150 datasets");
  sim->add_option("--noise-variance", cfg.noise_variance, "Response noise variance")->check(CLI::PositiveNumber);
  sim->add_option("--theta-scale", cfg.theta_scale, "Scale of the folded-t draw for theta")->check(CLI::PositiveNumber);
  auto* ex2 = app.add_subcommand("example2", "Misspecified-k likelihood versus prediction study");
  add_common(ex2, true);
  ex2->add_option("--n", cfg.n, "Observations per replicate")->check(CLI::PositiveNumber);
  ex2->add_option("--replicates", cfg.replicates, "Replicates")->check(CLI::PositiveNumber);
  ex2->add_option("--scatter", cfg.scatter, "Write (delta_loglik, delta_mse) pairs to this CSV");
  auto* bench = app.add_subcommand("benchmark", "Train/test benchmark on a user-supplied CSV");
  add_common(bench, true);
  add_input(bench);
  bench->add_option("--split", cfg.split, "Training fraction")->check(CLI::Range(0.0, 1.0));
  auto* sel = app.add_subcommand("select", "Spike-and-slab selection and subspace dimension");
  add_common(sel, true);
  add_input(sel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const GibbsOptions g = gibbs_options(cfg);
    std::string text;
    if (*fit) {
      text = run_fit(cfg).dump(2) + "\n";
    } else if (*pred) {
      text = run_predict(cfg);
    } else if (*sim) {
      text = run_simulate(cfg, g);
    } else if (*ex2) {
      text = run_example2(cfg, g);
    } else if (*bench) {
      text = run_benchmark(cfg, g);
    } else if (*sel) {
      text = run_select(cfg, g);
    }
    if (cfg.timing && cfg.format == "json" && !text.empty() && text.front() == '{') {
      json j = json::parse(text);
      j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      text = j.dump(2) + "\n";
    }
    emit(cfg, text);
    return 0;
  } catch (const UnknownMethodError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
