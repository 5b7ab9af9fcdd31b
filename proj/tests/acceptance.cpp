// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is the number of
// failed criteria (0 when all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "dg_risklab/dg_risklab.hpp"

using namespace dg_risklab;

namespace {

const std::string kData = DG_RISKLAB_DATA_DIR;

std::size_t jobs() {
  const char* env = std::getenv("DG_RISKLAB_JOBS");
  if (env) return default_jobs();
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) { return format_sig(v, 6); }

Outcome example1_closed_form() {
  Example1Options o;
  o.jobs = jobs();
  const auto rows = run_example1(o);
  Outcome out{true, ""};
  std::ostringstream d;
  for (const auto& r : rows) {
    const double expected = std::min(r.p, 1.0 - r.p) / 2.0;
    const bool ok = r.analytic_r_pool_G == expected && std::abs(r.pool_erm.mean - expected) <= 0.01 &&
                    r.dg_erm.mean <= 0.005;
    out.pass = out.pass && ok;
    d << "p=" << r.p << " analytic " << num(r.analytic_r_pool_G) << " pool " << num(r.pool_erm.mean) << " dg "
      << num(r.dg_erm.mean) << (ok ? "" : " (!)") << "; ";
  }
  out.detail = d.str();
  return out;
}

Outcome sandwich_suite() {
  VerifyOptions o;
  o.n_instances = 1000;
  o.pd_members = 0;
  o.covariate_instances = 0;
  o.seed = 2025;
  o.jobs = jobs();
  const auto s = run_verify(o);
  Outcome out{true, ""};
  std::ostringstream d;
  for (const auto& c : s.checks) {
    if (c.name != std::string("risk hierarchy") && c.name != std::string("pool-DG sandwich") &&
        c.name != std::string("DG-full sandwich") && c.name != std::string("epsilon direct vs identity"))
      continue;
    out.pass = out.pass && c.checked == 1000 && c.violations == 0 && c.worst_slack >= -1e-12;
    d << c.name << " " << c.violations << "/" << c.checked << " worst " << num(c.worst_slack) << "; ";
  }
  out.detail = d.str();
  return out;
}

Outcome pd_margin_gain() {
  Outcome out{true, ""};
  std::ostringstream d;
  for (const auto& [g, e] : {std::pair{0.8, 0.5}, {0.5, 0.3}, {0.3, 0.1}}) {
    std::size_t violations = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto f = make_pd_member(g, e, {4, 3, 4, 4}, derive_seed(77, seed));
      const auto j = build_joint(f);
      const auto c = pd_class_certificate(j, solve_bayes(j), g, e);
      if (!c.member || c.gap < g * e / 2.0 - 1e-12) ++violations;
      worst = std::min(worst, c.gap - g * e / 2.0);
    }
    out.pass = out.pass && violations == 0;
    d << "(" << g << "," << e << ") " << violations << "/200 violations, min slack " << num(worst) << "; ";
  }
  out.detail = d.str();
  return out;
}

Outcome covariate_shift_equality() {
  std::size_t bad = 0;
  double worst_gap = 0.0, worst_upper = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Rng rng(derive_seed(404, i));
    const Sizes s{rng.between(1, 8), rng.between(2, 4), rng.between(1, 4), rng.between(1, 6)};
    const auto j = build_joint(make_covariate_shift(s, derive_seed(405, i)));
    const auto b = solve_bayes(j);
    const auto r = risks(j, b);
    const double gap = std::abs(r.r_pool - r.r_dg);
    worst_gap = std::max(worst_gap, gap);
    worst_upper = std::max(worst_upper, r.thm1_upper);
    if (gap > 1e-12 || r.thm1_upper != 0.0 || !covariate_shift_certificate(j, b, 1e-12).covariate_shift) ++bad;
  }
  return {bad == 0, std::to_string(bad) + "/200 failures, max |r_pool-r_dg| " + num(worst_gap) +
                        ", max disagreement " + num(worst_upper)};
}

Outcome pd1_exactness() {
  const auto res = cmd_report(kData + "/pd1.spec", OutputFormat::kJson);
  const auto j = nlohmann::json::parse(res.output);
  const std::pair<const char*, double> expected[] = {{"r_pool", 0.5},     {"r_dg", 0.1},        {"gap_pool_dg", 0.4},
                                                     {"thm1_lower", 0.4}, {"thm1_upper", 0.5},  {"epsilon_hat", 0.5},
                                                     {"gamma_min", 0.8}};
  Outcome out{res.exit_code == 0, ""};
  std::ostringstream d;
  for (const auto& [key, v] : expected) {
    const double got = j[key].template get<double>();
    out.pass = out.pass && std::abs(got - v) <= 1e-12;
    d << key << "=" << format_sig(got) << " ";
  }
  out.detail = d.str();
  return out;
}

Outcome erm_consistency() {
  const auto cfg = parse_experiment_config(read_text_file(kData + "/pd1_experiment.cfg"), kData);
  const auto r = run_experiment(cfg, jobs());
  const bool ok = cfg.domains == 400 && cfg.samples_per_domain.lo == 25 && cfg.samples_per_domain.hi == 25 &&
                  cfg.trials == 20 && std::abs(r.dg().mean - 0.1) <= 0.02 && std::abs(r.pool().mean - 0.5) <= 0.02;
  return {ok, "DI-ERM " + num(r.dg().mean) + " (Bayes 0.1), pooling ERM " + num(r.pool().mean) + " (Bayes 0.5)"};
}

Outcome capacity_sweep_gap() {
  const auto cfg = parse_sweep_config(read_text_file(kData + "/example1_sweep.cfg"), kData);
  const auto f = cfg.generator.build();
  const std::vector<std::size_t> ks{1, 2, 4, 8, 16, 32, 64};
  const auto rows = capacity_sweep(build_joint(f), ks, cfg.family);
  bool ok = cfg.generator.name == "example1" && cfg.generator.p == 0.7 && !cfg.sampled;
  std::ostringstream d;
  d << to_string(cfg.family) << ": ";
  for (const auto& r : rows) {
    ok = ok && r.r_pool >= r.r_dg - 1e-12;
    d << "k=" << r.k << " gap " << num(r.gap()) << "; ";
  }
  ok = ok && rows.front().gap() > 0.0 && rows.back().gap() <= 0.02;
  return {ok, d.str()};
}

Outcome readme_scope_statement() {
  std::string text;
  try {
    text = read_text_file(DG_RISKLAB_README);
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  const char* needles[] = {"## Scope: what is not reproduced", "90.5%", "73.4%", "PACS", "not reproducible",
                           "checks 1-7"};
  std::string missing;
  for (const char* n : needles)
    if (text.find(n) == std::string::npos) missing += std::string(" '") + n + "'";
  return {missing.empty(), missing.empty() ? "README states the desk-scale mapping" : "missing:" + missing};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no limit
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "Example 1 closed form and threshold ERM", 30, example1_closed_form},
      {2, "hierarchy and sandwich bounds on 1000 random instances", 60, sandwich_suite},
      {3, "gap >= gamma*eps/2 on generated posterior-drift members", 0, pd_margin_gain},
      {4, "covariate shift: equal pool and DG risks", 0, covariate_shift_equality},
      {5, "PD1 report exactness", 0, pd1_exactness},
      {6, "tabular ERM consistency on PD1", 60, erm_consistency},
      {7, "capacity sweep on Example 1", 0, capacity_sweep_gap},
      {8, "README desk-scale scope statement", 0, readme_scope_statement},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      o.pass = false;
      o.detail += " [over time limit " + num(c.limit_seconds) + " s]";
    }
    std::printf("criterion %d: %s  %s (%.2f s)  %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    if (!o.pass) ++failed;
  }
  std::fflush(stdout);
  return failed;
}
