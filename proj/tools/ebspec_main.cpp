// ebspec command-line tool: fit, cross-validate, score posteriors, simulate
// and bootstrap experiment-effect priors.
//
// Exit codes: 0 success, 2 input error, 3 numerical/solver error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebspec/bootstrap.hpp"
#include "ebspec/core.hpp"
#include "ebspec/gmm.hpp"
#include "ebspec/io.hpp"
#include "ebspec/mle.hpp"
#include "ebspec/model_selection.hpp"
#include "ebspec/parallel.hpp"
#include "ebspec/posterior.hpp"
#include "ebspec/sim.hpp"

namespace {

using namespace ebspec;

struct FitFlags {
  std::string center = "auto";
  double half_length = 0.0;  // 0 = auto (1.1 * max deviation)
  int max_iters = 5000;
  double tol = 1e-8;
  double step = 0.0;
  bool no_restart = false;
  bool no_project = false;

  void attach(CLI::App* cmd, bool with_order, int* order) {
    if (with_order) {
      cmd->add_option("-N,--order", *order, "trigonometric polynomial order")
          ->required();
    }
    cmd->add_option("-L,--half-length", half_length,
                    "domain half-length (default: 1.1 * max |delta_hat - x0|)");
    cmd->add_option("--center", center, "domain center: 'auto' (median) or a value");
    cmd->add_option("--max-iters", max_iters, "solver iteration cap");
    cmd->add_option("--tol", tol, "relative objective tolerance");
    cmd->add_option("--step", step, "fixed step size (default: backtracking)");
    cmd->add_flag("--no-restart", no_restart, "disable the momentum restart");
    cmd->add_flag("--no-project", no_project,
                  "error on out-of-domain records instead of projecting");
  }

  DomainSpec domain(const std::vector<ExperimentRecord>& records) const {
    double L = half_length > 0.0 ? half_length : default_half_length(records);
    DomainSpec dom = make_domain(records, L);
    if (center != "auto") {
      try {
        std::size_t used = 0;
        dom.x0 = std::stod(center, &used);
        if (used != center.size()) throw std::invalid_argument(center);
      } catch (const std::exception&) {
        throw input_error("--center must be 'auto' or a number, got '" + center + "'");
      }
    }
    return dom;
  }

  FitConfig config(int order) const {
    FitConfig cfg;
    cfg.order = order;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    cfg.step_size = step;
    cfg.restart = !no_restart;
    return cfg;
  }
};

std::vector<int> parse_int_list(const std::string& arg, const char* what) {
  std::vector<int> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw input_error(std::string("bad ") + what + " list entry: " + tok);
    }
  }
  if (out.empty()) throw input_error(std::string("empty ") + what + " list");
  return out;
}

std::vector<double> parse_double_list(const std::string& arg, const char* what) {
  std::vector<double> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw input_error(std::string("bad ") + what + " list entry: " + tok);
    }
  }
  if (out.empty()) throw input_error(std::string("empty ") + what + " list");
  return out;
}

// "uniform:-4,4" | "gmm:w,mu,sigma;w,mu,sigma;..." | "tabulated:file.csv"
PriorSpec parse_prior_spec(const std::string& arg) {
  auto colon = arg.find(':');
  std::string kind = arg.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : arg.substr(colon + 1);
  if (kind == "uniform") {
    auto v = parse_double_list(rest, "uniform prior");
    if (v.size() != 2 || !(v[0] < v[1])) {
      throw input_error("uniform prior needs 'uniform:a,b' with a < b");
    }
    return UniformPrior{v[0], v[1]};
  }
  if (kind == "gmm") {
    GmmPrior g;
    std::stringstream ss(rest);
    std::string comp;
    while (std::getline(ss, comp, ';')) {
      if (comp.empty()) continue;
      auto v = parse_double_list(comp, "mixture component");
      if (v.size() != 3) {
        throw input_error("mixture components are 'weight,mean,sd' triples");
      }
      g.alpha.push_back(v[0]);
      g.mu.push_back(v[1]);
      g.V.push_back(v[2] * v[2]);
    }
    g.K = static_cast<int>(g.alpha.size());
    if (g.K == 0) throw input_error("empty mixture prior");
    double sum = 0.0;
    for (double a : g.alpha) sum += a;
    if (std::abs(sum - 1.0) > 1e-9) {
      throw input_error("mixture prior weights must sum to 1");
    }
    return g;
  }
  if (kind == "tabulated") {
    if (rest.empty()) throw input_error("tabulated prior needs a file path");
    return read_tabulated_prior(rest);
  }
  throw input_error("unknown prior kind '" + kind +
                    "' (expected uniform, gmm or tabulated)");
}

// "uniform:lo,hi" | "fixed:v" | "tabulated:file"
NoiseLaw parse_noise_law(const std::string& arg) {
  auto colon = arg.find(':');
  std::string kind = arg.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : arg.substr(colon + 1);
  if (kind == "uniform") {
    auto v = parse_double_list(rest, "noise law");
    if (v.size() != 2) throw input_error("noise law needs 'uniform:lo,hi'");
    return UniformNoise{v[0], v[1]};
  }
  if (kind == "fixed") {
    auto v = parse_double_list(rest, "noise law");
    if (v.size() != 1) throw input_error("noise law needs 'fixed:value'");
    return FixedNoise{v[0]};
  }
  if (kind == "tabulated") {
    if (rest.empty()) throw input_error("tabulated noise law needs a file path");
    return TabulatedNoise{read_value_list(rest)};
  }
  throw input_error("unknown noise law '" + kind +
                    "' (expected uniform, fixed or tabulated)");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write file: " + path);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"empirical-Bayes effect priors for large experiment corpora"};
  app.require_subcommand(1);

  // ---- fit ----
  auto* fit_cmd = app.add_subcommand("fit", "fit the spectral prior by maximum likelihood");
  std::string fit_data, fit_out = "model.json";
  int fit_order = 0;
  FitFlags fit_flags;
  fit_cmd->add_option("data", fit_data, "input dataset CSV")->required();
  fit_flags.attach(fit_cmd, true, &fit_order);
  fit_cmd->add_option("-o,--out", fit_out, "output model JSON path");

  // ---- cv ----
  auto* cv_cmd = app.add_subcommand("cv", "Monte-Carlo cross-validation over N and/or K");
  std::string cv_data, cv_orders, cv_ks, cv_out;
  int cv_splits = 100;
  double cv_holdout = 0.1;
  std::uint64_t cv_seed = 0;
  unsigned cv_workers = 0;
  int cv_restarts = 10;
  FitFlags cv_flags;
  int cv_dummy_order = 0;
  cv_cmd->add_option("data", cv_data, "input dataset CSV")->required();
  cv_cmd->add_option("--orders", cv_orders, "spectral orders, e.g. 4,6,12");
  cv_cmd->add_option("--gmm-k", cv_ks, "mixture sizes, e.g. 1,2,3");
  cv_cmd->add_option("--splits", cv_splits, "number of random splits");
  cv_cmd->add_option("--holdout", cv_holdout, "held-out fraction in (0,1)");
  cv_cmd->add_option("--seed", cv_seed, "random seed");
  cv_cmd->add_option("--workers", cv_workers, "worker threads (default: all cores)");
  cv_cmd->add_option("--em-restarts", cv_restarts, "EM restarts per mixture fit");
  cv_flags.attach(cv_cmd, false, &cv_dummy_order);
  cv_cmd->add_option("-o,--out", cv_out, "report CSV path (default: stdout)");

  // ---- posterior ----
  auto* post_cmd = app.add_subcommand("posterior", "posterior summary for one observation");
  std::string post_model;
  double post_delta = 0.0, post_s = 0.0, post_cost = 0.0;
  int post_grid = 0;
  post_cmd->add_option("model", post_model, "model JSON path")->required();
  post_cmd->add_option("--delta-hat", post_delta, "observed effect")->required();
  post_cmd->add_option("--s", post_s, "noise scale")->required();
  post_cmd->add_option("--cost", post_cost, "launch cost threshold");
  post_cmd->add_option("--grid", post_grid, "emit a posterior density grid of this size");

  // ---- shrinkage ----
  auto* shr_cmd = app.add_subcommand("shrinkage", "posterior-mean shrinkage curves");
  std::string shr_model, shr_s = "0.5", shr_out;
  int shr_grid = 101;
  shr_cmd->add_option("model", shr_model, "model JSON path")->required();
  shr_cmd->add_option("--s", shr_s, "comma-separated noise scales");
  shr_cmd->add_option("--grid", shr_grid, "number of delta_hat grid points");
  shr_cmd->add_option("-o,--out", shr_out, "output CSV (default: stdout)");

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand("simulate", "draw synthetic experiments from a known prior");
  std::string sim_prior = "uniform:-4,4", sim_slaw = "uniform:0,1";
  std::string sim_mode = "real_line", sim_out = "data.csv";
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 0;
  double sim_center = 0.0, sim_half = 8.0;
  sim_cmd->add_option("--prior", sim_prior,
                      "uniform:a,b | gmm:w,mu,sd;... | tabulated:file.csv");
  sim_cmd->add_option("--s-law", sim_slaw, "uniform:lo,hi | fixed:v | tabulated:file");
  sim_cmd->add_option("--mode", sim_mode, "real_line | torus")
      ->check(CLI::IsMember({"real_line", "torus"}));
  sim_cmd->add_option("--n", sim_n, "number of experiments")->required();
  sim_cmd->add_option("--seed", sim_seed, "random seed");
  sim_cmd->add_option("--center", sim_center, "domain center (torus mode)");
  sim_cmd->add_option("--half-length", sim_half, "domain half-length (torus mode)");
  sim_cmd->add_option("-o,--out", sim_out, "output dataset CSV");

  // ---- bootstrap ----
  auto* boot_cmd = app.add_subcommand("bootstrap", "pointwise bands for the prior density");
  std::string boot_data, boot_out;
  int boot_order = 0, boot_reps = 500, boot_grid = 256;
  double boot_alpha = 0.05;
  std::uint64_t boot_seed = 0;
  unsigned boot_workers = 0;
  FitFlags boot_flags;
  boot_cmd->add_option("data", boot_data, "input dataset CSV")->required();
  boot_flags.attach(boot_cmd, true, &boot_order);
  boot_cmd->add_option("-B,--replicates", boot_reps, "bootstrap replicates");
  boot_cmd->add_option("--alpha", boot_alpha, "band level is 1 - alpha");
  boot_cmd->add_option("--grid", boot_grid, "density grid size");
  boot_cmd->add_option("--seed", boot_seed, "random seed");
  boot_cmd->add_option("--workers", boot_workers, "worker threads");
  boot_cmd->add_option("-o,--out", boot_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // flag mistakes are input errors
  }

  if (fit_cmd->parsed()) {
    Dataset ds = read_dataset_csv(fit_data);
    DomainSpec dom = fit_flags.domain(ds.records);
    auto torus = rescale_all(ds.records, dom, !fit_flags.no_project);
    auto [model, report] = fit(torus, fit_flags.config(fit_order), dom);
    save_json(fit_out, spectral_model_to_json(model));
    std::printf("records: %zu\n", ds.records.size());
    std::printf("domain: x0=%.6g L=%.6g t_max=%.6g\n", dom.x0, dom.half_length,
                dom.t_max);
    std::printf("final_nll: %.10g\n", report.final_nll);
    std::printf("iterations: %d (converged: %s)\n", report.iterations,
                report.converged ? "yes" : "no");
    std::printf("projected_grad_norm: %.3g\n", report.projected_grad_norm);
    std::printf("model: %s\n", fit_out.c_str());
    return 0;
  }

  if (cv_cmd->parsed()) {
    if (cv_orders.empty() && cv_ks.empty()) {
      throw input_error("cv: pass --orders and/or --gmm-k");
    }
    Dataset ds = read_dataset_csv(cv_data);
    DomainSpec dom = cv_flags.domain(ds.records);
    std::vector<CvCandidate> candidates;
    if (!cv_orders.empty()) {
      for (int n : parse_int_list(cv_orders, "--orders")) {
        candidates.push_back({CvCandidate::Kind::spectral, n});
      }
    }
    if (!cv_ks.empty()) {
      for (int k : parse_int_list(cv_ks, "--gmm-k")) {
        candidates.push_back({CvCandidate::Kind::gmm, k});
      }
    }
    CvOptions opts;
    opts.splits = cv_splits;
    opts.holdout_frac = cv_holdout;
    opts.seed = cv_seed;
    opts.fit = cv_flags.config(8);
    opts.em.restarts = cv_restarts;
    opts.workers = cv_workers;
    auto results = monte_carlo_cv(ds.records, dom, candidates, opts);
    if (cv_out.empty()) {
      write_cv_csv(std::cout, results);
    } else {
      auto out = open_output(cv_out);
      write_cv_csv(out, results);
    }
    Selection sel = select_candidates(results);
    std::fprintf(stderr, "selected by predicted log-likelihood: %s\n",
                 sel.by_log_likelihood.label().c_str());
    std::fprintf(stderr, "selected by score matching: %s\n",
                 sel.by_score_matching.label().c_str());
    return 0;
  }

  if (post_cmd->parsed()) {
    AnyModel model = load_model(post_model);
    ExperimentRecord rec{post_delta, post_s};
    if (post_s < 0.0) throw input_error("posterior: s must be >= 0");
    nlohmann::json j;
    if (const auto* sp = std::get_if<SpectralPrior>(&model)) {
      PosteriorSummary sum = summarize_posterior(*sp, rec, post_grid);
      j["mean"] = sum.mean;
      j["variance"] = sum.variance;
      j["shrinkage"] = sum.shrinkage;
      j["launch"] = decide_launch(*sp, rec, post_cost);
      if (sum.density) {
        j["density"] = {{"x", sum.density->x}, {"p", sum.density->p}};
      }
    } else {
      const auto& g = std::get<GmmPrior>(model);
      GmmPosterior post = gmm_posterior(g, rec);
      j["mean"] = post.mean;
      j["variance"] = post.variance;
      j["shrinkage"] = post.mean - rec.delta_hat;
      j["launch"] = post.mean > post_cost;
      j["components"] = {{"alpha", post.alpha}, {"mu", post.mu}, {"V", post.V}};
      if (!std::isnan(post.null_prob)) j["null_prob"] = post.null_prob;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  if (shr_cmd->parsed()) {
    AnyModel model = load_model(shr_model);
    auto s_values = parse_double_list(shr_s, "--s");
    if (shr_grid < 2) throw input_error("shrinkage: --grid must be >= 2");
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!shr_out.empty()) {
      file = open_output(shr_out);
      os = &file;
    }
    (*os) << "s,delta_hat,shrinkage\n";
    double x0, L;
    if (const auto* sp = std::get_if<SpectralPrior>(&model)) {
      x0 = sp->domain().x0;
      L = sp->domain().half_length;
    } else {
      // mixture models carry no domain; span the component range
      const auto& g = std::get<GmmPrior>(model);
      double lo = g.mu[0], hi = g.mu[0];
      for (int k = 0; k < g.K; ++k) {
        double sd = std::sqrt(std::max(g.V[k], 0.0));
        lo = std::min(lo, g.mu[k] - 4.0 * sd);
        hi = std::max(hi, g.mu[k] + 4.0 * sd);
      }
      x0 = 0.5 * (lo + hi);
      L = std::max(0.5 * (hi - lo), 1e-6);
    }
    char buf[120];
    for (double s : s_values) {
      if (s < 0.0) throw input_error("shrinkage: s must be >= 0");
      for (int i = 0; i < shr_grid; ++i) {
        double delta = x0 - L + 2.0 * L * i / (shr_grid - 1);
        ExperimentRecord rec{delta, s};
        double mean;
        if (const auto* sp = std::get_if<SpectralPrior>(&model)) {
          mean = tweedie_mean(*sp, rec);
        } else {
          mean = gmm_posterior(std::get<GmmPrior>(model), rec).mean;
        }
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", s, delta,
                      mean - delta);
        (*os) << buf;
      }
    }
    return 0;
  }

  if (sim_cmd->parsed()) {
    PriorSpec prior = parse_prior_spec(sim_prior);
    NoiseLaw law = parse_noise_law(sim_slaw);
    SampleMode mode =
        sim_mode == "torus" ? SampleMode::torus : SampleMode::real_line;
    DomainSpec dom;
    dom.x0 = sim_center;
    dom.half_length = sim_half;
    auto sims = sample_experiments(prior, sim_n, law, mode, sim_seed,
                                   mode == SampleMode::torus ? &dom : nullptr);
    write_dataset_csv(sim_out, sims);
    std::printf("wrote %zu records to %s\n", sims.size(), sim_out.c_str());
    return 0;
  }

  if (boot_cmd->parsed()) {
    Dataset ds = read_dataset_csv(boot_data);
    DomainSpec dom = boot_flags.domain(ds.records);
    BootstrapOptions opts;
    opts.replicates = boot_reps;
    opts.alpha = boot_alpha;
    opts.grid_size = boot_grid;
    opts.seed = boot_seed;
    opts.workers = boot_workers;
    BandsReport report =
        bootstrap_bands(ds.records, dom, boot_flags.config(boot_order), opts);
    if (boot_out.empty()) {
      write_bands_csv(std::cout, report);
    } else {
      auto out = open_output(boot_out);
      write_bands_csv(out, report);
    }
    std::fprintf(stderr, "replicates used: %d, failures: %d\n",
                 report.replicates_used, report.failures);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ebspec::input_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ebspec::numeric_error& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
