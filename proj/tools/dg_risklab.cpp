// dg_risklab: exact Bayes-risk reports, bound verification and ERM experiments for
// domain generalization with metadata.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dg_risklab/commands.hpp"

namespace {

using namespace dg_risklab;

struct Global {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  std::size_t jobs = 0;
};

int finish(const CommandResult& res, const std::string& name, const std::vector<std::string>& argv,
           const Global& g, std::chrono::steady_clock::time_point start) {
  std::cout << res.output;
  if (!res.diagnostics.empty()) std::cerr << res.diagnostics;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!g.out.empty()) {
    write_outputs(res, name, argv, g.seed.value_or(0), g.out, secs);
  } else {
    nlohmann::ordered_json manifest{{"subcommand", name},  {"argv", argv},        {"config", res.config},
                                    {"seed", g.seed.value_or(0)}, {"version", kVersion}, {"outputs", nlohmann::json::array()},
                                    {"duration_seconds", secs}};
    std::cerr << "manifest: " << manifest.dump() << "\n";
  }
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Exact decision-theoretic laboratory for domain generalization with metadata"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Global g;
  app.add_option("--seed", g.seed, "Master seed for all randomness")->type_name("UINT");
  app.add_option("--out", g.out, "Output directory (outputs plus manifest.json)");
  app.add_option("--format", g.format, "Output format on stdout")->check(CLI::IsMember({"csv", "json", "table"}));
  app.add_option("--jobs", g.jobs, "Worker threads (fallback: DG_RISKLAB_JOBS, then 1)");

  auto* report = app.add_subcommand("report", "Bayes risks, gap bounds and certificates for a distribution spec");
  std::string spec_path;
  report->add_option("spec", spec_path, "Distribution spec file")->required();

  auto* verify = app.add_subcommand("verify", "Property suite over random and structured instances");
  VerifyOptions vo;
  std::vector<std::size_t> vsizes;
  std::string fault = "none";
  verify->add_option("-n,--instances", vo.n_instances, "Random instances")->check(CLI::PositiveNumber);
  verify->add_option("--sizes", vsizes, "Fixed |X| K |M| |D| (default: random within limits)")->expected(4);
  verify->add_option("--pd-members", vo.pd_members, "Generated Pi(gamma, eps) members");
  verify->add_option("--pd-gamma", vo.pd_gamma, "gamma for generated members");
  verify->add_option("--pd-epsilon", vo.pd_epsilon, "epsilon for generated members");
  verify->add_option("--covariate", vo.covariate_instances, "Covariate-shift instances");
  verify->add_option("--inject-fault", fault, "Test hook: corrupt a computed quantity")
      ->check(CLI::IsMember({"none", "margin"}))
      ->group("");

  auto* experiment = app.add_subcommand("experiment", "Pooling ERM vs domain-informed ERM trials");
  std::string experiment_path;
  experiment->add_option("config", experiment_path, "Experiment config file")->required();

  auto* example1 = app.add_subcommand("example1", "Disjoint-support covariate-shift example with linear classes");
  Example1Options eo;
  example1->add_option("--p", eo.p_list, "Mixture weights P(M=1)")->delimiter(',');
  example1->add_option("--grid-n", eo.grid_n, "Grid points per unit interval")->check(CLI::Range(2, 1000000));
  example1->add_option("--sample-n", eo.sample_n, "Training samples per trial");
  example1->add_option("--per-domain", eo.samples_per_domain, "Samples per domain")->check(CLI::PositiveNumber);
  example1->add_option("--trials", eo.trials, "Trials per p")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Restricted-class risks over a capacity sweep");
  std::string sweep_path;
  sweep->add_option("config", sweep_path, "Sweep config file")->required();

  auto* figure1 = app.add_subcommand("figure1", "Agree / disagree posterior scenarios: curves and report");
  std::string scenario;
  std::size_t n_points = 121;
  figure1->add_option("scenario", scenario, "agree | disagree")->required()->check(CLI::IsMember({"agree", "disagree"}));
  figure1->add_option("--points", n_points, "Grid points on [-3, 3]")->check(CLI::Range(2, 1000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  const std::size_t jobs = g.jobs ? g.jobs : default_jobs();
  try {
    if (*report) {
      const auto fmt = parse_format(g.format.empty() ? "table" : g.format);
      return finish(cmd_report(spec_path, fmt), "report", args, g, start);
    }
    if (*verify) {
      vo.seed = g.seed.value_or(0);
      vo.jobs = jobs;
      vo.fault = fault == "margin" ? Fault::kMargin : Fault::kNone;
      if (!vsizes.empty()) vo.sizes = Sizes{vsizes[0], vsizes[1], vsizes[2], vsizes[3]};
      return finish(cmd_verify(vo, parse_format(g.format.empty() ? "table" : g.format)), "verify", args, g, start);
    }
    if (*experiment) {
      const auto fmt = parse_format(g.format.empty() ? "table" : g.format);
      return finish(cmd_experiment(experiment_path, fmt, jobs, g.seed), "experiment", args, g, start);
    }
    if (*example1) {
      eo.seed = g.seed.value_or(0);
      eo.jobs = jobs;
      return finish(cmd_example1(eo, parse_format(g.format.empty() ? "table" : g.format)), "example1", args, g,
                    start);
    }
    if (*sweep) {
      const auto fmt = parse_format(g.format.empty() ? "csv" : g.format);
      return finish(cmd_sweep(sweep_path, fmt, g.seed), "sweep", args, g, start);
    }
    if (*figure1) {
      const auto fmt = parse_format(g.format.empty() ? "csv" : g.format);
      return finish(cmd_figure1(parse_scenario(scenario), n_points, fmt), "figure1", args, g, start);
    }
  } catch (const ConsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {  // ParseError, ValidationError, UsageError
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
