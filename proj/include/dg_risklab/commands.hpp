#pragma once

// Subcommand implementations behind the dg_risklab CLI. Each command returns its stdout
// text, the files it would write under --out, and its resolved config for the run manifest.
// Exit codes: 0 success, 1 verification failure, 2 input error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dg_risklab/bayes.hpp"
#include "dg_risklab/erm.hpp"
#include "dg_risklab/experiment.hpp"
#include "dg_risklab/generators.hpp"
#include "dg_risklab/spec_format.hpp"
#include "json.hpp"

namespace dg_risklab {

inline constexpr const char* kVersion = "0.1.0";

enum class OutputFormat { kCsv, kJson, kTable };

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::kCsv;
  if (s == "json") return OutputFormat::kJson;
  if (s == "table") return OutputFormat::kTable;
  throw UsageError("unknown format '" + s + "' (expected csv, json or table)");
}

struct CommandResult {
  int exit_code = 0;
  std::string output;       // stdout
  std::string diagnostics;  // stderr
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::ordered_json config;
};

namespace detail {

class Table {
 public:
  void row(std::string name, std::string value) { rows_.emplace_back(std::move(name), std::move(value)); }
  void row(std::string name, double value) { row(std::move(name), format_sig(value)); }
  void row(std::string name, bool value) { row(std::move(name), std::string(value ? "true" : "false")); }

  std::string str() const {
    std::size_t w = 0;
    for (const auto& r : rows_) w = std::max(w, r.first.size());
    std::ostringstream os;
    for (const auto& [k, v] : rows_) os << k << std::string(w - k.size() + 2, ' ') << v << "\n";
    return os.str();
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ",";
    out += cells[i];
  }
  return out + "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// report

struct ReportBundle {
  RiskReport report;
  CovariateShiftCertificate covariate_shift;
  bool hierarchy_holds = false;
  bool thm1_holds = false;
  bool thm3_holds = false;
  bool independence_holds = false;

  bool all_hold() const {
    return hierarchy_holds && thm1_holds && thm3_holds && independence_holds && covariate_shift.equality_holds;
  }
};

inline ReportBundle analyze(const FactoredDistribution& f) {
  const auto joint = build_joint(f);
  const auto bayes = solve_bayes(joint);
  ReportBundle b;
  b.report = risks(joint, bayes);
  b.covariate_shift = covariate_shift_certificate(joint, bayes, kStructuralTol);
  b.hierarchy_holds = b.report.hierarchy_slack() >= -kStructuralTol;
  b.thm1_holds = b.report.thm1_slack() >= -kStructuralTol;
  b.thm3_holds = b.report.thm3_slack() >= -kStructuralTol;
  b.independence_holds = check_conditional_independence(joint, kDerivedTol).holds;
  return b;
}

inline nlohmann::ordered_json to_json(const ReportBundle& b) {
  auto j = to_json(b.report);
  j["covariate_shift"] = b.covariate_shift.covariate_shift;
  j["covariate_shift_equality_holds"] = b.covariate_shift.equality_holds;
  j["hierarchy_holds"] = b.hierarchy_holds;
  j["thm1_holds"] = b.thm1_holds;
  j["thm3_holds"] = b.thm3_holds;
  j["conditional_independence_holds"] = b.independence_holds;
  return j;
}

inline std::string report_table(const ReportBundle& b) {
  const auto& r = b.report;
  detail::Table t;
  t.row("R*_pool", r.r_pool);
  t.row("R*_DG", r.r_dg);
  t.row("R*_full", r.r_full);
  t.row("gap pool-DG", r.gap_pool_dg);
  t.row("gap DG-full", r.gap_dg_full);
  t.row("pool-DG bounds", "[" + format_sig(r.thm1_lower) + ", " + format_sig(r.thm1_upper) + "]");
  t.row("DG-full bounds", "[" + format_sig(r.thm3_lower) + ", " + format_sig(r.thm3_upper) + "]");
  t.row("epsilon_hat", r.epsilon_hat);
  t.row("gamma_min", r.gamma_min);
  t.row("zero-mass (x,m) cells", std::to_string(r.zero_mass_xm_cells));
  t.row("hierarchy holds", b.hierarchy_holds);
  t.row("pool-DG sandwich holds", b.thm1_holds);
  t.row("DG-full sandwich holds", b.thm3_holds);
  t.row("covariate shift", b.covariate_shift.covariate_shift);
  t.row("cond. independence", b.independence_holds);
  return t.str();
}

inline std::string report_csv(const ReportBundle& b) {
  const auto j = to_json(b);
  std::vector<std::string> head, vals;
  for (const auto& [k, v] : j.items()) {
    head.push_back(k);
    if (v.is_boolean())
      vals.push_back(v.get<bool>() ? "true" : "false");
    else if (v.is_number_unsigned())
      vals.push_back(std::to_string(v.get<std::size_t>()));
    else
      vals.push_back(format_sig(v.get<double>()));
  }
  return detail::csv_line(head) + detail::csv_line(vals);
}

inline std::string render_report(const ReportBundle& b, OutputFormat fmt) {
  switch (fmt) {
    case OutputFormat::kJson:
      return to_json(b).dump(2) + "\n";
    case OutputFormat::kCsv:
      return report_csv(b);
    case OutputFormat::kTable:
      break;
  }
  return report_table(b);
}

inline CommandResult cmd_report(const std::filesystem::path& spec_path, OutputFormat fmt) {
  const auto f = load_spec_file(spec_path);
  const auto b = analyze(f);
  CommandResult res;
  res.config = {{"spec", spec_path.string()}, {"distribution_id", fingerprint(f)}};
  res.output = render_report(b, fmt);
  res.files = {{"report.json", to_json(b).dump(2) + "\n"}, {"report.txt", report_table(b)}};
  res.exit_code = b.all_hold() ? 0 : 1;
  return res;
}

// ---------------------------------------------------------------------------------------
// verify

enum class Fault { kNone, kMargin };

struct CheckStats {
  std::string name;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();

  void record(double slack, double tol = kStructuralTol) {
    ++checked;
    worst_slack = std::min(worst_slack, slack);
    if (slack < -tol) ++violations;
  }
};

struct VerifyOptions {
  std::size_t n_instances = 1000;
  std::optional<Sizes> sizes;  // random sizes within the limits when unset
  std::uint64_t seed = 0;
  std::size_t pd_members = 200;
  double pd_gamma = 0.5;
  double pd_epsilon = 0.3;
  Sizes pd_sizes{4, 3, 4, 4};
  std::size_t covariate_instances = 200;
  Fault fault = Fault::kNone;
  std::size_t jobs = 1;
};

struct VerifySummary {
  std::vector<CheckStats> checks;
  std::string first_failure;  // description + emitted spec of the first offending instance

  bool ok() const {
    for (const auto& c : checks)
      if (c.violations) return false;
    return true;
  }
};

namespace detail {

struct InstanceOutcome {
  std::vector<std::pair<std::size_t, double>> slacks;  // (check index, slack)
  std::string failure;
};

enum VerifyCheck : std::size_t {
  kCheckIndependence,
  kCheckHierarchy,
  kCheckThm1,
  kCheckThm3,
  kCheckEpsilonRoutes,
  kCheckMarginBound,
  kCheckZeroGap,
  kCheckPdMember,
  kCheckPdBound,
  kCheckCovShiftCert,
  kCheckCovShiftGap,
  kCheckCovShiftUpper,
  kCheckCount
};

inline const char* check_name(std::size_t c) {
  static const char* names[] = {"conditional independence",
                                "risk hierarchy",
                                "pool-DG sandwich",
                                "DG-full sandwich",
                                "epsilon direct vs identity",
                                "margin bound gamma_min*eps/2",
                                "zero-gap characterization",
                                "Pi(gamma,eps) membership",
                                "Pi(gamma,eps) gap bound",
                                "covariate-shift certificate",
                                "covariate-shift equality",
                                "covariate-shift disagreement=0"};
  return names[c];
}

inline InstanceOutcome verify_instance(const FactoredDistribution& f, Fault fault, const std::string& label,
                                       std::optional<std::pair<double, double>> pd_class, bool covariate) {
  InstanceOutcome out;
  auto add = [&](std::size_t check, double slack) {
    out.slacks.emplace_back(check, slack);
    if (slack < -kStructuralTol && out.failure.empty())
      out.failure = label + ": " + check_name(check) + " violated (slack " + format_sig(slack) + ")\n" + emit_spec(f);
  };
  const auto joint = build_joint(f);
  auto bayes = solve_bayes(joint);
  if (fault == Fault::kMargin)
    for (auto& g : bayes.margin_xm)
      if (g) *g = std::min(1.0, *g + 0.5);

  const auto ci = check_conditional_independence(joint, kDerivedTol);
  add(kCheckIndependence, kDerivedTol - ci.max_violation);

  RiskReport r;
  try {
    r = risks(joint, bayes);
    add(kCheckEpsilonRoutes, 0.0);
  } catch (const ConsistencyError& e) {
    add(kCheckEpsilonRoutes, -1.0);
    return out;
  }
  add(kCheckHierarchy, r.hierarchy_slack());
  add(kCheckThm1, r.thm1_slack());
  add(kCheckThm3, r.thm3_slack());
  add(kCheckMarginBound, r.gap_pool_dg - r.gamma_min * r.epsilon_hat / 2.0);
  if (r.thm1_upper == 0.0) add(kCheckZeroGap, kStructuralTol - std::abs(r.gap_pool_dg));

  if (pd_class) {
    const auto c = pd_class_certificate(joint, bayes, pd_class->first, pd_class->second);
    add(kCheckPdMember, c.member ? 0.0 : -1.0);
    add(kCheckPdBound, c.gap - c.bound);
  }
  if (covariate) {
    const auto c = covariate_shift_certificate(joint, bayes, kStructuralTol);
    add(kCheckCovShiftCert, c.covariate_shift ? 0.0 : -1.0);
    add(kCheckCovShiftGap, kStructuralTol - c.abs_gap);
    add(kCheckCovShiftUpper, r.thm1_upper == 0.0 ? 0.0 : -r.thm1_upper);
  }
  return out;
}

}  // namespace detail

inline VerifySummary run_verify(const VerifyOptions& o) {
  if (o.n_instances < 1) throw UsageError("verify: n_instances must be >= 1");
  struct Job {
    enum Kind { kRandom, kPd, kCov } kind;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < o.n_instances; ++i) jobs.push_back({Job::kRandom, i});
  for (std::size_t i = 0; i < o.pd_members; ++i) jobs.push_back({Job::kPd, i});
  for (std::size_t i = 0; i < o.covariate_instances; ++i) jobs.push_back({Job::kCov, i});

  std::vector<detail::InstanceOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), o.jobs, [&](std::size_t i) {
    const auto& job = jobs[i];
    const std::uint64_t seed = derive_seed(o.seed, (static_cast<std::uint64_t>(job.kind) << 32) | job.index);
    switch (job.kind) {
      case Job::kRandom: {
        const auto f = o.sizes ? make_random(*o.sizes, seed) : make_random_any_size(seed);
        outcomes[i] = detail::verify_instance(f, o.fault, "random instance " + std::to_string(job.index), {}, false);
        break;
      }
      case Job::kPd: {
        const auto f = make_pd_member(o.pd_gamma, o.pd_epsilon, o.pd_sizes, seed);
        outcomes[i] = detail::verify_instance(f, o.fault, "Pi member " + std::to_string(job.index),
                                              std::make_pair(o.pd_gamma, o.pd_epsilon), false);
        break;
      }
      case Job::kCov: {
        const auto f = make_covariate_shift(o.pd_sizes, seed);
        outcomes[i] =
            detail::verify_instance(f, o.fault, "covariate-shift instance " + std::to_string(job.index), {}, true);
        break;
      }
    }
  });

  VerifySummary s;
  for (std::size_t c = 0; c < detail::kCheckCount; ++c) s.checks.push_back({detail::check_name(c)});
  for (const auto& oc : outcomes) {
    for (const auto& [c, slack] : oc.slacks) s.checks[c].record(slack);
    if (s.first_failure.empty()) s.first_failure = oc.failure;
  }
  return s;
}

inline CommandResult cmd_verify(const VerifyOptions& o, OutputFormat fmt) {
  const auto s = run_verify(o);
  CommandResult res;
  res.config = {{"n_instances", o.n_instances},
                {"sizes", o.sizes ? nlohmann::ordered_json{o.sizes->nx, o.sizes->ny, o.sizes->nm, o.sizes->nd}
                                  : nlohmann::ordered_json("random")},
                {"seed", o.seed},
                {"pd_members", o.pd_members},
                {"pd_gamma", o.pd_gamma},
                {"pd_epsilon", o.pd_epsilon},
                {"covariate_instances", o.covariate_instances},
                {"fault", o.fault == Fault::kMargin ? "margin" : "none"}};
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  std::ostringstream table, csv;
  csv << "check,checked,violations,worst_slack\n";
  for (const auto& c : s.checks) {
    const std::string worst = c.checked ? format_sig(c.worst_slack) : "";
    j.push_back({{"check", c.name}, {"checked", c.checked}, {"violations", c.violations},
                 {"worst_slack", c.checked ? nlohmann::ordered_json(c.worst_slack) : nlohmann::ordered_json()}});
    csv << c.name << "," << c.checked << "," << c.violations << "," << worst << "\n";
    table << (c.violations ? "FAIL  " : "ok    ") << c.name << ": " << c.checked << " checked, " << c.violations
          << " violations, worst slack " << (c.checked ? worst : "-") << "\n";
  }
  const nlohmann::ordered_json summary{{"ok", s.ok()}, {"checks", j}};
  res.output = fmt == OutputFormat::kJson ? summary.dump(2) + "\n" : fmt == OutputFormat::kCsv ? csv.str() : table.str();
  res.files = {{"verify.json", summary.dump(2) + "\n"}, {"verify.csv", csv.str()}};
  if (!s.ok()) {
    res.exit_code = 1;
    res.diagnostics = "first violation: " + s.first_failure;
    res.files.emplace_back("failure.spec", s.first_failure);
  }
  return res;
}

// ---------------------------------------------------------------------------------------
// experiment

inline CommandResult render_experiment(const ExperimentResult& r, OutputFormat fmt) {
  CommandResult res;
  res.config = r.config.to_json();
  const auto summary = to_json(r);
  const auto csv = experiment_csv(r);
  if (fmt == OutputFormat::kJson) {
    res.output = summary.dump(2) + "\n";
  } else if (fmt == OutputFormat::kCsv) {
    res.output = csv;
  } else {
    detail::Table t;
    t.row("distribution", r.distribution_id);
    t.row("trials", std::to_string(r.trials.size()));
    t.row("Bayes R*_pool", r.bayes_r_pool);
    t.row("Bayes R*_DG", r.bayes_r_dg);
    t.row("pool ERM risk", format_sig(r.pool().mean) + " +/- " + format_sig(r.pool().stderr_));
    t.row("DI-ERM risk", format_sig(r.dg().mean) + " +/- " + format_sig(r.dg().stderr_));
    t.row("pool train risk", r.train_pool().mean);
    t.row("DI train risk", r.train_dg().mean);
    res.output = t.str();
  }
  res.files = {{"experiment.csv", csv}, {"summary.json", summary.dump(2) + "\n"}};
  return res;
}

inline CommandResult cmd_experiment(const std::filesystem::path& config_path, OutputFormat fmt, std::size_t jobs,
                                    std::optional<std::uint64_t> seed_override = {}) {
  const auto text = read_text_file(config_path);
  auto cfg = parse_experiment_config(text, config_path.parent_path());
  if (seed_override) cfg.seed = *seed_override;
  auto res = render_experiment(run_experiment(cfg, jobs), fmt);
  res.config["config_path"] = config_path.string();
  res.config["config_text"] = text;
  return res;
}

// ---------------------------------------------------------------------------------------
// example1

struct Example1Options {
  std::vector<double> p_list{0.5, 0.6, 0.7, 0.9};
  std::size_t grid_n = 200;
  std::size_t sample_n = 10000;
  std::size_t samples_per_domain = 10;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct Example1Row {
  double p = 0.0;
  double analytic_r_pool_G = 0.0;  // min{p, 1-p} / 2
  double grid_r_pool_G = 0.0;      // exact single-threshold optimum on the grid
  double grid_r_dg_F = 0.0;        // exact per-m threshold optimum on the grid
  Summary pool_erm;                // population risk of pooled threshold ERM
  Summary dg_erm;                  // population risk of per-m threshold ERM
  double r_pool = 0.0, r_dg = 0.0, r_full = 0.0;
};

inline std::vector<Example1Row> run_example1(const Example1Options& o) {
  if (o.samples_per_domain < 1 || o.sample_n < o.samples_per_domain)
    throw UsageError("example1: sample_n must be at least samples_per_domain");
  std::vector<Example1Row> rows;
  for (std::size_t i = 0; i < o.p_list.size(); ++i) {
    const auto ex = make_example1({o.p_list[i], o.grid_n});
    const auto joint = build_joint(ex.dist);
    const auto rep = risks(joint, solve_bayes(joint));
    const auto pop = population_points(joint);

    ExperimentConfig cfg;
    cfg.generator.name = "example1";
    cfg.generator.p = o.p_list[i];
    cfg.generator.grid_n = o.grid_n;
    cfg.family = ErmFamily::kThreshold;
    cfg.domains = o.sample_n / o.samples_per_domain;
    cfg.samples_per_domain = SampleSizeRule::constant(o.samples_per_domain);
    cfg.trials = o.trials;
    cfg.seed = derive_seed(o.seed, i);
    const auto exp = run_experiment(cfg, ex.dist, o.jobs);

    Example1Row row;
    row.p = o.p_list[i];
    row.analytic_r_pool_G = ex.analytic.r_pool_G;
    row.grid_r_pool_G = population_risk(joint, fit_threshold(pop, ex.dist.support(), Mode::kPool));
    row.grid_r_dg_F = population_risk(joint, fit_threshold(pop, ex.dist.support(), Mode::kDg));
    row.pool_erm = exp.pool();
    row.dg_erm = exp.dg();
    row.r_pool = rep.r_pool;
    row.r_dg = rep.r_dg;
    row.r_full = rep.r_full;
    rows.push_back(row);
  }
  return rows;
}

inline CommandResult cmd_example1(const Example1Options& o, OutputFormat fmt) {
  for (double p : o.p_list)
    if (!(p > 0.0 && p < 1.0)) throw UsageError("example1: every p must lie in (0, 1)");
  const auto rows = run_example1(o);
  CommandResult res;
  res.config = {{"p_list", o.p_list},   {"grid_n", o.grid_n}, {"sample_n", o.sample_n},
                {"samples_per_domain", o.samples_per_domain}, {"trials", o.trials}, {"seed", o.seed}};
  std::ostringstream csv, table;
  csv << "p,analytic_r_pool_G,grid_r_pool_G,grid_r_dg_F,pool_erm_risk,pool_erm_stderr,dg_erm_risk,dg_erm_stderr,"
         "r_pool,r_dg,r_full\n";
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  table << "p       analytic    grid G      grid F      pool ERM    DI-ERM      R*_pool  R*_DG  R*_full\n";
  for (const auto& r : rows) {
    csv << detail::csv_line({format_sig(r.p), format_sig(r.analytic_r_pool_G), format_sig(r.grid_r_pool_G),
                             format_sig(r.grid_r_dg_F), format_sig(r.pool_erm.mean), format_sig(r.pool_erm.stderr_),
                             format_sig(r.dg_erm.mean), format_sig(r.dg_erm.stderr_), format_sig(r.r_pool),
                             format_sig(r.r_dg), format_sig(r.r_full)});
    j.push_back({{"p", r.p},
                 {"analytic_r_pool_G", r.analytic_r_pool_G},
                 {"grid_r_pool_G", r.grid_r_pool_G},
                 {"grid_r_dg_F", r.grid_r_dg_F},
                 {"pool_erm_risk", r.pool_erm.mean},
                 {"pool_erm_stderr", r.pool_erm.stderr_},
                 {"dg_erm_risk", r.dg_erm.mean},
                 {"dg_erm_stderr", r.dg_erm.stderr_},
                 {"r_pool", r.r_pool},
                 {"r_dg", r.r_dg},
                 {"r_full", r.r_full}});
    auto col = [](double v) {
      auto s = format_sig(v, 6);
      return s + std::string(s.size() < 12 ? 12 - s.size() : 1, ' ');
    };
    table << col(r.p).substr(0, 8) << col(r.analytic_r_pool_G) << col(r.grid_r_pool_G) << col(r.grid_r_dg_F)
          << col(r.pool_erm.mean) << col(r.dg_erm.mean) << format_sig(r.r_pool, 3) << "        "
          << format_sig(r.r_dg, 3) << "      " << format_sig(r.r_full, 3) << "\n";
  }
  res.output = fmt == OutputFormat::kJson ? j.dump(2) + "\n" : fmt == OutputFormat::kCsv ? csv.str() : table.str();
  res.files = {{"example1.csv", csv.str()}, {"example1.json", j.dump(2) + "\n"}};
  return res;
}

// ---------------------------------------------------------------------------------------
// sweep

inline CommandResult cmd_sweep(const std::filesystem::path& config_path, OutputFormat fmt,
                               std::optional<std::uint64_t> seed_override = {}) {
  const auto text = read_text_file(config_path);
  auto cfg = parse_sweep_config(text, config_path.parent_path());
  if (seed_override) cfg.seed = *seed_override;
  const auto f = cfg.generator.build();
  const auto rows = run_sweep(cfg, f);
  CommandResult res;
  res.config = cfg.to_json();
  res.config["config_path"] = config_path.string();
  res.config["config_text"] = text;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  detail::Table t;
  bool hierarchy = true;
  for (const auto& r : rows) {
    j.push_back({{"k", r.k}, {"pool_risk", r.r_pool}, {"dg_risk", r.r_dg}, {"gap", r.gap()}});
    t.row("k=" + std::to_string(r.k),
          "pool " + format_sig(r.r_pool) + "  dg " + format_sig(r.r_dg) + "  gap " + format_sig(r.gap()));
    hierarchy = hierarchy && r.hierarchy_holds();
  }
  const auto csv = sweep_csv(rows);
  res.output = fmt == OutputFormat::kJson ? j.dump(2) + "\n" : fmt == OutputFormat::kCsv ? csv : t.str();
  res.files = {{"sweep.csv", csv}, {"sweep.json", j.dump(2) + "\n"}};
  if (!hierarchy) res.diagnostics = "note: sampled fits violate R_pool >= R_dg at some k\n";
  return res;
}

// ---------------------------------------------------------------------------------------
// figure1

inline Figure1Scenario parse_scenario(const std::string& s) {
  if (s == "agree") return Figure1Scenario::kAgree;
  if (s == "disagree") return Figure1Scenario::kDisagree;
  throw UsageError("unknown scenario '" + s + "' (expected agree or disagree)");
}

inline std::string curves_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream os;
  os << "x,eta1,eta2,eta_pooled\n";
  for (const auto& r : rows)
    os << format_sig(r.x) << "," << format_sig(r.eta1) << "," << format_sig(r.eta2) << "," << format_sig(r.eta_pooled)
       << "\n";
  return os.str();
}

inline CommandResult cmd_figure1(Figure1Scenario scenario, std::size_t n_points, OutputFormat fmt) {
  const auto fig = make_figure1(Figure1Config::defaults(scenario, n_points));
  const auto b = analyze(fig.dist);
  CommandResult res;
  res.config = {{"scenario", scenario == Figure1Scenario::kAgree ? "agree" : "disagree"}, {"n_points", n_points}};
  const auto csv = curves_csv(fig.curves);
  res.output = fmt == OutputFormat::kCsv ? csv : render_report(b, fmt);
  res.files = {{"curves.csv", csv}, {"report.json", to_json(b).dump(2) + "\n"}, {"report.txt", report_table(b)},
               {"figure1.spec", emit_spec(fig.dist)}};
  res.exit_code = b.all_hold() ? 0 : 1;
  return res;
}

// ---------------------------------------------------------------------------------------

/// Writes `res.files` and manifest.json under `dir`. Returns the manifest.
inline nlohmann::ordered_json write_outputs(const CommandResult& res, const std::string& subcommand,
                                            const std::vector<std::string>& argv, std::uint64_t seed,
                                            const std::filesystem::path& dir, double duration_seconds) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  for (const auto& [name, content] : res.files) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out << content;
    written.push_back(path.string());
  }
  nlohmann::ordered_json manifest{{"subcommand", subcommand},
                                  {"argv", argv},
                                  {"config", res.config},
                                  {"seed", seed},
                                  {"version", kVersion},
                                  {"outputs", written},
                                  {"duration_seconds", duration_seconds}};
  std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
  return manifest;
}

}  // namespace dg_risklab
