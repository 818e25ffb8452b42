#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ebspec/core.hpp"
#include "ebspec/io.hpp"
#include "ebspec/mle.hpp"

using namespace ebspec;

namespace {

const char* cli_path() { return EBSPEC_CLI_PATH; }

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  std::string out_file = "/tmp/ebspec_test_stdout.txt";
  std::string err_file = "/tmp/ebspec_test_stderr.txt";
  std::string cmd = std::string(cli_path()) + " " + args + " >" + out_file +
                    " 2>" + err_file;
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate then fit round-trips and matches the library") {
  auto sim = run_cli(
      "simulate --prior uniform:-4,4 --s-law uniform:0,1 --n 400 --seed 5 "
      "--out /tmp/ebspec_t1.csv");
  REQUIRE(sim.exit_code == 0);

  auto fitres = run_cli(
      "fit /tmp/ebspec_t1.csv -N 6 -L 8 --out /tmp/ebspec_t1_model.json");
  REQUIRE(fitres.exit_code == 0);
  CHECK(fitres.out.find("final_nll") != std::string::npos);

  // same pipeline through the library must give the identical file
  Dataset ds = read_dataset_csv("/tmp/ebspec_t1.csv");
  CHECK(ds.has_truth);
  DomainSpec dom = make_domain(ds.records, 8.0);
  auto torus = rescale_all(ds.records, dom, true);
  FitConfig cfg;
  cfg.order = 6;
  auto [model, report] = fit(torus, cfg, dom);
  save_json("/tmp/ebspec_t1_model_lib.json", spectral_model_to_json(model));
  CHECK(slurp_file("/tmp/ebspec_t1_model.json") ==
        slurp_file("/tmp/ebspec_t1_model_lib.json"));

  // model file loads back as a spectral model
  AnyModel loaded = load_model("/tmp/ebspec_t1_model.json");
  CHECK(std::holds_alternative<SpectralPrior>(loaded));
}

TEST_CASE("zero-noise simulation copies the truth column") {
  auto sim = run_cli(
      "simulate --prior uniform:-2,2 --s-law fixed:0 --n 50 --seed 9 "
      "--out /tmp/ebspec_t2.csv");
  REQUIRE(sim.exit_code == 0);
  Dataset ds = read_dataset_csv("/tmp/ebspec_t2.csv");
  REQUIRE(ds.has_truth);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(ds.records[i].delta_hat == ds.delta_true[i]);
  }
}

TEST_CASE("missing column is an input error naming the column") {
  {
    std::ofstream bad("/tmp/ebspec_bad.csv");
    bad << "delta_hat,sigma\n1.0,0.5\n";
  }
  auto r = run_cli("fit /tmp/ebspec_bad.csv -N 4 -L 8 --out /tmp/x.json");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("column s") != std::string::npos);
}

TEST_CASE("bad rows name the row and field") {
  {
    std::ofstream bad("/tmp/ebspec_bad2.csv");
    bad << "delta_hat,s\n1.0,0.5\noops,0.5\n";
  }
  auto r = run_cli("fit /tmp/ebspec_bad2.csv -N 4 -L 8 --out /tmp/x.json");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("row 2") != std::string::npos);
  CHECK(r.err.find("delta_hat") != std::string::npos);
}

TEST_CASE("unknown flags are input errors") {
  auto r = run_cli("fit /tmp/ebspec_t1.csv -N 4 --frobnicate");
  CHECK(r.exit_code == 2);
}

TEST_CASE("posterior of a flat model at zero noise is the identity") {
  int order = 3;
  DomainSpec dom{0.0, 4.0, 0.5};
  SpectralPrior flat(order,
                     std::vector<double>(2 * order + 1, 1.0 / 6.283185307179586),
                     dom);
  save_json("/tmp/ebspec_flat.json", spectral_model_to_json(flat));

  auto r = run_cli("posterior /tmp/ebspec_flat.json --delta-hat 1.25 --s 0");
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["mean"].get<double>() == 1.25);
  CHECK(j["variance"].get<double>() == 0.0);
  CHECK(j["launch"].get<bool>() == true);  // 1.25 > cost 0

  auto r2 = run_cli("posterior /tmp/ebspec_flat.json --delta-hat 1.0 --s 0.5");
  auto j2 = nlohmann::json::parse(r2.out);
  CHECK(j2["variance"].get<double>() == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("posterior works on mixture models too") {
  GmmPrior g{2, {0.5, 0.5}, {0.0, 2.0}, {0.5, 0.5}};
  save_json("/tmp/ebspec_gmm.json", gmm_model_to_json(g));
  auto r = run_cli(
      "posterior /tmp/ebspec_gmm.json --delta-hat 1.0 --s 0.4 --cost 0.5");
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.contains("components"));
  CHECK(j["mean"].get<double>() > 0.0);
}

TEST_CASE("cv with a single split reports an empty se") {
  auto r = run_cli(
      "cv /tmp/ebspec_t1.csv --orders 2,4 --splits 1 --seed 3 -L 8 "
      "--tol 1e-6");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find(",,1\n") != std::string::npos);
  CHECK(r.err.find("selected by") != std::string::npos);
}

TEST_CASE("shrinkage curves are zero at s = 0") {
  auto r = run_cli(
      "shrinkage /tmp/ebspec_flat.json --s 0,0.5 --grid 11 "
      "--out /tmp/ebspec_shr.csv");
  REQUIRE(r.exit_code == 0);
  std::ifstream in("/tmp/ebspec_shr.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "s,delta_hat,shrinkage");
  int zero_rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("0,", 0) == 0) {
      ++zero_rows;
      auto last = line.rfind(',');
      CHECK(std::stod(line.substr(last + 1)) == 0.0);
    }
  }
  CHECK(zero_rows == 11);
}

TEST_CASE("bootstrap output is deterministic for a fixed seed") {
  auto a = run_cli(
      "bootstrap /tmp/ebspec_t1.csv -N 4 -L 8 -B 6 --grid 16 --seed 21 "
      "--out /tmp/ebspec_b1.csv");
  REQUIRE(a.exit_code == 0);
  auto b = run_cli(
      "bootstrap /tmp/ebspec_t1.csv -N 4 -L 8 -B 6 --grid 16 --seed 21 "
      "--out /tmp/ebspec_b2.csv");
  REQUIRE(b.exit_code == 0);
  CHECK(slurp_file("/tmp/ebspec_b1.csv") == slurp_file("/tmp/ebspec_b2.csv"));

  std::ifstream in("/tmp/ebspec_b1.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,point,lower,upper");
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<double> v;
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    REQUIRE(v.size() == 4);
    CHECK(v[2] <= v[3]);  // lower <= upper
  }
}

TEST_CASE("uniform-effects fit shows the documented frequency damping") {
  // The exact maximum-likelihood weights are sparse (a gridded mixing
  // estimate), so the s = 0 density carries high-frequency wiggle at this
  // sample size; the wiggle must damp out quickly as s grows and the
  // N = 64 fit must oscillate more than the N = 32 one.
  auto sim = run_cli(
      "simulate --prior uniform:-4,4 --s-law uniform:0,1 --n 2000 --seed 12 "
      "--out /tmp/ebspec_unif.csv");
  REQUIRE(sim.exit_code == 0);
  auto fitres = run_cli(
      "fit /tmp/ebspec_unif.csv -N 32 -L 8 --out /tmp/ebspec_unif_model.json");
  REQUIRE(fitres.exit_code == 0);
  AnyModel loaded = load_model("/tmp/ebspec_unif_model.json");
  const auto& model = std::get<SpectralPrior>(loaded);
  const DomainSpec& dom = model.domain();
  const double pi = 3.14159265358979323846;
  double jac = pi / dom.half_length;

  auto sup_err = [&](const SpectralPrior& m, double s) {
    // true marginal of unif(-4, 4) effects: a Phi difference
    auto truth = [&](double x) {
      if (s == 0.0) return (std::abs(x) <= 4.0) ? 0.125 : 0.0;
      auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
      return (cdf((4.0 - x) / s) - cdf((-4.0 - x) / s)) / 8.0;
    };
    double worst = 0.0;
    double t = dom.noise_to_torus(s);
    for (int i = 0; i <= 200; ++i) {
      double delta = -3.5 + 7.0 * i / 200;
      double fitted = m.density(dom.to_torus(delta), t) * jac;
      worst = std::max(worst, std::abs(fitted - truth(delta)));
    }
    return worst;
  };

  double e0 = sup_err(model, 0.0);
  double e05 = sup_err(model, 0.5);
  double e1 = sup_err(model, 1.0);
  CHECK(e05 < e0);
  CHECK(e1 < e05);
  CHECK(e05 <= 0.03);
  CHECK(e1 <= 0.03);

  // larger order, more oscillation at s = 0
  auto fit64 = run_cli(
      "fit /tmp/ebspec_unif.csv -N 64 -L 8 --out /tmp/ebspec_unif_model64.json");
  REQUIRE(fit64.exit_code == 0);
  const auto& model64 =
      std::get<SpectralPrior>(load_model("/tmp/ebspec_unif_model64.json"));
  CHECK(sup_err(model64, 0.0) > e0);
}

TEST_CASE("shrinkage curves of a symmetric model are antisymmetric") {
  // symmetric node weights around a zero center
  int order = 6;
  int m = 2 * order + 1;
  std::vector<double> f(m);
  double sum = 0.0;
  for (int nu = -order; nu <= order; ++nu) {
    double v = 1.0 + std::exp(-std::abs(nu));
    f[nu + order] = v;
    sum += v;
  }
  for (double& v : f) v /= (2.0 * 3.14159265358979323846 / m) * sum;
  DomainSpec dom{0.0, 4.0, 1.0};
  save_json("/tmp/ebspec_sym.json",
            spectral_model_to_json(SpectralPrior(order, f, dom)));
  auto r = run_cli(
      "shrinkage /tmp/ebspec_sym.json --s 0.7 --grid 21 "
      "--out /tmp/ebspec_sym_shr.csv");
  REQUIRE(r.exit_code == 0);
  std::ifstream in("/tmp/ebspec_sym_shr.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> delta, shrink;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<double> v;
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    REQUIRE(v.size() == 3);
    delta.push_back(v[1]);
    shrink.push_back(v[2]);
  }
  REQUIRE(delta.size() == 21);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    std::size_t j = delta.size() - 1 - i;
    CHECK(delta[i] == doctest::Approx(-delta[j]).epsilon(1e-12));
    CHECK(std::abs(shrink[i] + shrink[j]) <=
          1e-9 * std::max(1.0, std::abs(shrink[i])));
  }
}

TEST_CASE("dataset files round-trip through their own parser") {
  Dataset ds = read_dataset_csv("/tmp/ebspec_t1.csv");
  write_dataset_csv("/tmp/ebspec_t1_copy.csv", ds.records);
  Dataset back = read_dataset_csv("/tmp/ebspec_t1_copy.csv");
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].delta_hat == ds.records[i].delta_hat);
    CHECK(back.records[i].s == ds.records[i].s);
  }
}

}  // TEST_SUITE
