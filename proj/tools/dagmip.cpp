// Command-line front end. Exit codes: 0 ok, 1 other failure (including a FAIL
// certification), 2 bad input, 3 infeasible constraints, 4 every solve hit its
// time limit.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dagmip/error.hpp"
#include "dagmip/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace dagmip;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw InvalidInput(path + ": " + ex.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

// Graph JSON, or any object with a "graph" member (fit results, certify output).
EdgeMatrix read_graph(const std::string& path) {
  const json j = read_json_file(path);
  return matrix_from_json(j.contains("graph") ? j["graph"] : j);
}

// Flags that override fields of a FitConfig loaded from --config.
struct ConfigFlags {
  std::string config;
  std::vector<double> lambda;
  std::vector<double> scales;
  std::string mode;
  std::string basis;
  std::optional<int> degree;
  std::optional<int> knots;
  std::optional<int> bootstrap;
  std::optional<double> tau_super, tau_partial, tau_stable;
  bool neighborhood = false;
  std::optional<double> neighborhood_reg;
  std::optional<int> neighborhood_target;
  std::string sets;
  std::optional<double> tau_early;
  std::optional<double> time_limit;
  std::optional<int> max_edges;
  std::optional<std::int64_t> node_limit;
  std::optional<std::uint64_t> seed;
  bool no_center = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "FitConfig JSON; flags below override its fields");
    app->add_option("--lambda", lambda, "explicit lambda^2 grid")->delimiter(',');
    app->add_option("--lambda-scales", scales, "scales c of c p (log p)^2 / n")->delimiter(',');
    app->add_option("--mode", mode, "variance regime: unequal, equal or auto");
    app->add_option("--basis", basis, "spline, radial or sine");
    app->add_option("--degree", degree, "spline degree");
    app->add_option("--knots", knots, "internal knots (spline) or number of functions");
    app->add_option("--bootstrap", bootstrap, "bootstrap replicates for the constraint sets (0 = off)");
    app->add_option("--tau-super", tau_super, "superstructure threshold");
    app->add_option("--tau-partial", tau_partial, "partial-order threshold");
    app->add_option("--tau-stable", tau_stable, "stable-set threshold");
    app->add_flag("--neighborhood", neighborhood, "add group-lasso neighborhood selection to the superstructure");
    app->add_option("--neighborhood-reg", neighborhood_reg, "fixed group-lasso penalty");
    app->add_option("--neighborhood-target", neighborhood_target, "size target (unordered pairs) for the penalty ladder");
    app->add_option("--sets", sets, "constraint sets JSON {superstructure, partial_order, stable}");
    app->add_option("--tau-early", tau_early, "early-stopping gap (default 0.1 lambda^2 / log p)");
    app->add_option("--time-limit", time_limit, "seconds per solve (default 60 p)");
    app->add_option("--max-edges", max_edges, "cardinality bound on the edge set");
    app->add_option("--node-limit", node_limit, "branch-and-bound node limit per solve");
    app->add_option("--seed", seed, "top-level seed");
    app->add_flag("--no-center", no_center, "do not subtract column means");
  }

  FitConfig resolve() const {
    FitConfig c = config.empty() ? FitConfig{} : FitConfig::from_json(read_json_file(config));
    if (!lambda.empty()) c.lambda.values = lambda;
    if (!scales.empty()) {
      c.lambda.values.clear();
      c.lambda.scales = scales;
    }
    if (!mode.empty()) c.mode = parse_regime_scope(mode);
    if (!basis.empty()) c.basis.kind = parse_basis_kind(basis);
    if (degree) c.basis.degree = *degree;
    if (knots) c.basis.knots = *knots;
    if (bootstrap) c.priors.bootstrap = *bootstrap;
    if (tau_super) c.priors.tau_super = *tau_super;
    if (tau_partial) c.priors.tau_partial = *tau_partial;
    if (tau_stable) c.priors.tau_stable = *tau_stable;
    if (neighborhood) c.priors.neighborhood = true;
    if (neighborhood_reg) c.priors.neighborhood_reg = neighborhood_reg;
    if (neighborhood_target) c.priors.neighborhood_target = neighborhood_target;
    if (!sets.empty()) c.priors.sets = read_json_file(sets);
    if (tau_early) c.solver.tau_early = tau_early;
    if (time_limit) c.solver.time_limit = time_limit;
    if (max_edges) c.solver.max_edges = max_edges;
    if (node_limit) c.solver.node_limit = node_limit;
    if (seed) c.seed = *seed;
    if (no_center) c.center = false;
    c.validate();
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Causal discovery for additive models by branch and bound (natural logarithms throughout)"};
  app.require_subcommand(1);
  std::optional<int> threads;
  app.add_option("--threads", threads, "worker threads (default: DAGMIP_THREADS or 1)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample an additive SEM to CSV plus its graph JSON");
  std::string sim_spec, sim_out, sim_truth, sim_h = "sin";
  int sim_n = 500;
  std::uint64_t sim_seed = 0;
  bool sim_example = false;
  double sim_s2 = 0.1, sim_s3 = 0.3;
  sim->add_option("--spec", sim_spec, "SEM spec JSON");
  sim->add_flag("--example", sim_example, "the five-node example model instead of --spec");
  sim->add_option("--function", sim_h, "edge function X2 -> X3 of the example");
  sim->add_option("--sigma2", sim_s2, "noise sd of X2 in the example");
  sim->add_option("--sigma3", sim_s3, "noise sd of X3 in the example");
  sim->add_option("-n,--n", sim_n, "sample size");
  sim->add_option("--seed", sim_seed, "data seed");
  sim->add_option("-o,--out", sim_out, "CSV output")->required();
  sim->add_option("--truth", sim_truth, "graph JSON output (default <out>.truth.json)");

  // fit
  auto* fitc = app.add_subcommand("fit", "grid of (lambda^2, regime) solves, chosen by BIC");
  ConfigFlags fit_flags;
  fit_flags.attach(fitc);
  std::string fit_data, fit_out, fit_dot;
  bool omit_timing = false, verbose = false;
  fitc->add_option("--data", fit_data, "CSV with a header row")->required();
  fitc->add_option("-o,--out", fit_out, "result JSON (default stdout)");
  fitc->add_option("--dot", fit_dot, "chosen graph in DOT format");
  fitc->add_flag("--omit-timing", omit_timing, "drop timing fields from the result JSON");
  fitc->add_flag("-v,--verbose", verbose, "per-cell progress on stderr");

  // certify
  auto* cert = app.add_subcommand("certify", "compare branch and bound with exact enumeration (p <= 5)");
  ConfigFlags cert_flags;
  cert_flags.attach(cert);
  std::string cert_data, cert_out;
  cert->add_option("--data", cert_data, "CSV with a header row")->required();
  cert->add_option("-o,--out", cert_out, "report JSON (default stdout)");

  // metrics
  auto* met = app.add_subcommand("metrics", "SHD breakdown of an estimate against the truth");
  std::string met_est, met_truth;
  met->add_option("--estimate", met_est, "graph JSON or fit result")->required();
  met->add_option("--truth", met_truth, "graph JSON")->required();

  // priors
  auto* pri = app.add_subcommand("priors", "bootstrap and neighborhood-selection constraint sets");
  ConfigFlags pri_flags;
  pri_flags.attach(pri);
  std::string pri_data, pri_out, pri_props;
  pri->add_option("--data", pri_data, "CSV with a header row")->required();
  pri->add_option("-o,--out", pri_out, "constraint sets JSON (default stdout)");
  pri->add_option("--proportions", pri_props, "bootstrap selection proportions CSV");

  // emit-plot-data
  auto* emit = app.add_subcommand("emit-plot-data", "flat CSV for plotting");
  std::string emit_fit, emit_truth, emit_trials, emit_out;
  emit->add_option("--fit", emit_fit, "fit result JSON: lambda_sq,regime,bic,shd,gap,time");
  emit->add_option("--truth", emit_truth, "graph JSON for the shd column");
  emit->add_option("--trials", emit_trials, "trial batch JSON [{n, method, shd, exact}]: n,method,recovery_rate,shd");
  emit->add_option("-o,--out", emit_out, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const int budget = threads ? *threads : thread_budget();
  if (budget < 1) throw InvalidInput("--threads must be positive");

  if (*sim) {
    if (!sim_example && sim_spec.empty()) throw InvalidInput("simulate: --spec or --example is required");
    SemSpec spec = sim_example ? example_model(EdgeFunction::parse(sim_h), sim_s2, sim_s3)
                               : SemSpec::from_json(read_json_file(sim_spec));
    simulate(spec, sim_n, sim_seed, sim_out, sim_truth.empty() ? sim_out + ".truth.json" : sim_truth);
    return 0;
  }

  if (*fitc) {
    const FitConfig config = fit_flags.resolve();
    const FitResult res = fit_file(config, fit_data, budget, verbose ? &std::cerr : nullptr);
    for (const std::string& w : res.warnings) std::cerr << "warning: " << w << "\n";
    write_text(fit_out, res.to_json(!omit_timing).dump(2) + "\n");
    if (!fit_dot.empty()) write_text(fit_dot, res.dot());
    return res.all_timed_out() ? 4 : 0;
  }

  if (*cert) {
    const FitConfig config = cert_flags.resolve();
    const CertifyReport rep = certify(config, read_csv_file(cert_data));
    write_text(cert_out, rep.to_json().dump(2) + "\n");
    std::cerr << (rep.pass() ? "PASS" : "FAIL") << "\n";
    return rep.pass() ? 0 : 1;
  }

  if (*met) {
    write_text("", metrics_json(read_graph(met_est), read_graph(met_truth)).dump(2) + "\n");
    return 0;
  }

  if (*pri) {
    const FitConfig config = pri_flags.resolve();
    Dataset data = read_csv_file(pri_data);
    data.validate();
    if (config.center) data = data.centered();
    const BasisSystem system = BasisSystem::fit(config.basis, data);
    std::optional<BootstrapReport> boot;
    const ConstraintSets sets = estimate_sets(config, data, system, &boot, &std::cerr);
    write_text(pri_out, sets.to_json().dump(2) + "\n");
    if (!pri_props.empty()) {
      if (!boot) throw InvalidInput("priors: --proportions needs --bootstrap > 0");
      std::ostringstream csv;
      boot->write_csv(csv, data.column_names);
      write_text(pri_props, csv.str());
    }
    return 0;
  }

  if (*emit) {
    std::ostringstream csv;
    if (!emit_fit.empty() == !emit_trials.empty())
      throw InvalidInput("emit-plot-data: give exactly one of --fit and --trials");
    if (!emit_fit.empty()) {
      std::optional<EdgeMatrix> truth;
      if (!emit_truth.empty()) truth = read_graph(emit_truth);
      write_grid_csv(csv, grid_from_json(read_json_file(emit_fit)), truth ? &*truth : nullptr);
    } else {
      write_trial_csv(csv, trials_from_json(read_json_file(emit_trials)));
    }
    write_text(emit_out, csv.str());
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dagmip::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const dagmip::InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const dagmip::CycleError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const dagmip::SizeError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const dagmip::DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
