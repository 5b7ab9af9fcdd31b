#pragma once

// Experiment and sweep configs, seeded trial orchestration and result serialization.
//
// Config files use the same text format as distribution specs:
//
//   [generator]
//   name = pd1                 pd1 | pd1_constant_m | example1 | figure1_agree | figure1_disagree
//                              | covariate_shift | random | pd_member | spec
//   p = 0.7                    example1
//   grid_n = 200               example1
//   n_points = 121             figure1_*
//   sizes = 4, 2, 2, 2         covariate_shift | random | pd_member  (|X|, K, |M|, |D|)
//   seed = 1                   covariate_shift | random | pd_member
//   gamma = 0.5                pd_member
//   epsilon = 0.3              pd_member
//   path = pd1.spec            spec (relative to the config file)
//
//   [experiment]
//   family = tabular           tabular | threshold
//   domains = 400              N
//   samples_per_domain = 25    n_i: constant, or uniform:LO:HI
//   trials = 20
//   seed = 7
//
//   [sweep]
//   family = binned_threshold  histogram | binned_threshold
//   ks = 1, 2, 4, 8
//   mode = exact               exact | sampled (then domains / samples_per_domain / seed apply)

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dg_risklab/bayes.hpp"
#include "dg_risklab/erm.hpp"
#include "dg_risklab/generators.hpp"
#include "dg_risklab/spec_format.hpp"
#include "json.hpp"

namespace dg_risklab {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FactoredDistribution load_spec_file(const std::filesystem::path& path) {
  return parse_spec(read_text_file(path));
}

struct GeneratorConfig {
  std::string name = "pd1";
  double p = 0.7;
  std::size_t grid_n = 200;
  std::size_t n_points = 121;
  Sizes sizes;
  std::uint64_t seed = 1;
  double gamma = 0.5;
  double epsilon = 0.3;
  std::filesystem::path path;

  FactoredDistribution build() const {
    if (name == "pd1") return make_pd1();
    if (name == "pd1_constant_m") return make_pd1_constant_m();
    if (name == "example1") return make_example1({p, grid_n}).dist;
    if (name == "figure1_agree") return make_figure1(Figure1Config::defaults(Figure1Scenario::kAgree, n_points)).dist;
    if (name == "figure1_disagree")
      return make_figure1(Figure1Config::defaults(Figure1Scenario::kDisagree, n_points)).dist;
    if (name == "covariate_shift") return make_covariate_shift(sizes, seed);
    if (name == "random") return make_random(sizes, seed);
    if (name == "pd_member") return make_pd_member(gamma, epsilon, sizes, seed);
    if (name == "spec") return load_spec_file(path);
    throw UsageError("unknown generator '" + name + "'");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"name", name}};
    if (name == "example1") {
      j["p"] = p;
      j["grid_n"] = grid_n;
    } else if (name.rfind("figure1", 0) == 0) {
      j["n_points"] = n_points;
    } else if (name == "covariate_shift" || name == "random" || name == "pd_member") {
      j["sizes"] = {sizes.nx, sizes.ny, sizes.nm, sizes.nd};
      j["seed"] = seed;
      if (name == "pd_member") {
        j["gamma"] = gamma;
        j["epsilon"] = epsilon;
      }
    } else if (name == "spec") {
      j["path"] = path.string();
    }
    return j;
  }

  static GeneratorConfig from_section(const text::Section& sec, const std::filesystem::path& base_dir) {
    text::KeyValues kv(sec);
    kv.require_known({"name", "p", "grid_n", "n_points", "sizes", "seed", "gamma", "epsilon", "path"});
    GeneratorConfig g;
    g.name = kv.str("name");
    g.p = kv.real("p", g.p);
    g.grid_n = kv.count("grid_n", g.grid_n);
    g.n_points = kv.count("n_points", g.n_points);
    g.seed = kv.u64("seed", g.seed);
    g.gamma = kv.real("gamma", g.gamma);
    g.epsilon = kv.real("epsilon", g.epsilon);
    if (kv.has("sizes")) {
      const auto v = kv.counts("sizes");
      if (v.size() != 4) kv.fail("sizes", "expected 4 integers (|X|, K, |M|, |D|)");
      g.sizes = {v[0], v[1], v[2], v[3]};
    }
    if (kv.has("path")) g.path = base_dir / kv.str("path");
    static const char* known[] = {"pd1", "pd1_constant_m", "example1", "figure1_agree", "figure1_disagree",
                                  "covariate_shift", "random", "pd_member", "spec"};
    bool ok = false;
    for (auto* k : known) ok = ok || g.name == k;
    if (!ok) kv.fail("name", "unknown generator '" + g.name + "'");
    if (g.name == "spec" && !kv.has("path")) kv.fail("path", "generator 'spec' needs a path");
    return g;
  }
};

enum class ErmFamily { kTabular, kThreshold };

inline const char* to_string(ErmFamily f) { return f == ErmFamily::kTabular ? "tabular" : "threshold"; }

inline SampleSizeRule parse_sample_size_rule(const text::KeyValues& kv, const std::string& key,
                                             SampleSizeRule fallback) {
  if (!kv.has(key)) return fallback;
  const std::string v = kv.str(key);
  std::size_t n;
  if (parse_size(v, n)) {
    if (n < 1) kv.fail(key, "samples per domain must be >= 1");
    return SampleSizeRule::constant(n);
  }
  if (v.rfind("uniform:", 0) == 0) {
    const auto rest = v.substr(8);
    const auto colon = rest.find(':');
    std::size_t lo, hi;
    if (colon != std::string::npos && parse_size(rest.substr(0, colon), lo) && parse_size(rest.substr(colon + 1), hi) &&
        lo >= 1 && hi >= lo)
      return SampleSizeRule::uniform(lo, hi);
  }
  kv.fail(key, "expected a positive integer or uniform:LO:HI");
}

struct ExperimentConfig {
  GeneratorConfig generator;
  ErmFamily family = ErmFamily::kTabular;
  std::size_t domains = 400;
  SampleSizeRule samples_per_domain = SampleSizeRule::constant(25);
  std::size_t trials = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (trials < 1) throw UsageError("experiment: trials must be >= 1");
    if (domains < 1) throw UsageError("experiment: domains must be >= 1");
    samples_per_domain.validate();
  }

  nlohmann::ordered_json to_json() const {
    return {{"generator", generator.to_json()},
            {"family", to_string(family)},
            {"domains", domains},
            {"samples_per_domain", samples_per_domain.describe()},
            {"trials", trials},
            {"seed", seed}};
  }
};

inline ExperimentConfig parse_experiment_config(std::string_view text_in, const std::filesystem::path& base_dir = {}) {
  const auto sections = text::parse_document(text_in);
  ExperimentConfig c;
  bool have_gen = false, have_exp = false;
  for (const auto& sec : sections) {
    if (sec.name == "generator") {
      c.generator = GeneratorConfig::from_section(sec, base_dir);
      have_gen = true;
    } else if (sec.name == "experiment") {
      text::KeyValues kv(sec);
      kv.require_known({"family", "domains", "samples_per_domain", "trials", "seed"});
      const auto fam = kv.str("family", "tabular");
      if (fam == "tabular")
        c.family = ErmFamily::kTabular;
      else if (fam == "threshold")
        c.family = ErmFamily::kThreshold;
      else
        kv.fail("family", "expected tabular or threshold");
      c.domains = kv.count("domains", c.domains);
      c.samples_per_domain = parse_sample_size_rule(kv, "samples_per_domain", c.samples_per_domain);
      c.trials = kv.count("trials", c.trials);
      c.seed = kv.u64("seed", c.seed);
      if (c.trials < 1) kv.fail("trials", "trials must be >= 1");
      if (c.domains < 1) kv.fail("domains", "domains must be >= 1");
      have_exp = true;
    } else {
      throw ParseError(sec.title(), "", sec.line, "unknown section");
    }
  }
  if (!have_gen) throw ParseError("generator", "", 0, "missing section");
  if (!have_exp) throw ParseError("experiment", "", 0, "missing section");
  return c;
}

struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error (sample standard deviation / sqrt(n)).
inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return s;
}

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double train_risk_pool = 0.0;
  double train_risk_dg = 0.0;
  double risk_pool = 0.0;  // exact population risk of the pooled ERM fit
  double risk_dg = 0.0;    // exact population risk of the domain-informed ERM fit
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string distribution_id;
  double bayes_r_pool = 0.0;
  double bayes_r_dg = 0.0;
  std::vector<TrialResult> trials;  // sorted by trial index

  Summary train_pool() const { return column(&TrialResult::train_risk_pool); }
  Summary train_dg() const { return column(&TrialResult::train_risk_dg); }
  Summary pool() const { return column(&TrialResult::risk_pool); }
  Summary dg() const { return column(&TrialResult::risk_dg); }

 private:
  Summary column(double TrialResult::*field) const {
    std::vector<double> v;
    for (const auto& t : trials) v.push_back(t.*field);
    return summarize(v);
  }
};

inline std::size_t default_jobs() {
  if (const char* env = std::getenv("DG_RISKLAB_JOBS")) {
    std::size_t n;
    if (parse_size(env, n) && n >= 1) return n;
  }
  return 1;
}

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads. Each index is handled exactly once.
template <typename Body>
void parallel_for(std::size_t n, std::size_t jobs, Body&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline TrialResult run_trial(const FactoredDistribution& f, const JointTable& joint, const ExperimentConfig& c,
                             std::size_t trial) {
  TrialResult r;
  r.trial = trial;
  r.seed = derive_seed(c.seed, trial);
  const auto ts = sample_training_set(f, c.domains, c.samples_per_domain, r.seed);
  const auto pts = ts.weighted();
  auto evaluate = [&](const auto& pool, const auto& dg) {
    r.train_risk_pool = empirical_risk(pts, pool);
    r.train_risk_dg = empirical_risk(pts, dg);
    r.risk_pool = population_risk(joint, pool);
    r.risk_dg = population_risk(joint, dg);
  };
  if (c.family == ErmFamily::kTabular)
    evaluate(fit_tabular(pts, f.support(), Mode::kPool), fit_tabular(pts, f.support(), Mode::kDg));
  else
    evaluate(fit_threshold(pts, f.support(), Mode::kPool), fit_threshold(pts, f.support(), Mode::kDg));
  return r;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, const FactoredDistribution& f, std::size_t jobs = 1) {
  c.validate();
  if (c.family == ErmFamily::kThreshold) detail::require_binary_scalar(f.support(), "experiment");
  const auto joint = build_joint(f);
  const auto report = risks(joint, solve_bayes(joint));
  ExperimentResult out;
  out.config = c;
  out.distribution_id = fingerprint(f);
  out.bayes_r_pool = report.r_pool;
  out.bayes_r_dg = report.r_dg;
  out.trials.resize(c.trials);
  parallel_for(c.trials, jobs, [&](std::size_t i) { out.trials[i] = run_trial(f, joint, c, i); });
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, std::size_t jobs = 1) {
  return run_experiment(c, c.generator.build(), jobs);
}

inline std::string experiment_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "row,trial,seed,train_risk_pool,train_risk_dg,risk_pool,risk_dg,bayes_r_pool,bayes_r_dg\n";
  const std::string bayes = format_sig(r.bayes_r_pool) + "," + format_sig(r.bayes_r_dg);
  for (const auto& t : r.trials)
    os << "trial," << t.trial << "," << t.seed << "," << format_sig(t.train_risk_pool) << ","
       << format_sig(t.train_risk_dg) << "," << format_sig(t.risk_pool) << "," << format_sig(t.risk_dg) << ","
       << bayes << "\n";
  const Summary cols[4] = {r.train_pool(), r.train_dg(), r.pool(), r.dg()};
  os << "mean,,";
  for (const auto& s : cols) os << "," << format_sig(s.mean);
  os << "," << bayes << "\n";
  os << "stderr,,";
  for (const auto& s : cols) os << "," << format_sig(s.stderr_);
  os << "," << bayes << "\n";
  return os.str();
}

inline nlohmann::ordered_json to_json(const ExperimentResult& r) {
  auto summary = [](const Summary& s) { return nlohmann::ordered_json{{"mean", s.mean}, {"stderr", s.stderr_}}; };
  return {{"config", r.config.to_json()},
          {"distribution_id", r.distribution_id},
          {"bayes_r_pool", r.bayes_r_pool},
          {"bayes_r_dg", r.bayes_r_dg},
          {"trials", r.trials.size()},
          {"train_risk_pool", summary(r.train_pool())},
          {"train_risk_dg", summary(r.train_dg())},
          {"risk_pool", summary(r.pool())},
          {"risk_dg", summary(r.dg())}};
}

// ---------------------------------------------------------------------------------------

struct SweepConfig {
  GeneratorConfig generator;
  Family family = Family::kBinnedThreshold;
  std::vector<std::size_t> ks{1, 2, 4, 8, 16, 32, 64};
  bool sampled = false;
  std::size_t domains = 400;
  SampleSizeRule samples_per_domain = SampleSizeRule::constant(25);
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"generator", generator.to_json()},
                             {"family", to_string(family)},
                             {"ks", ks},
                             {"mode", sampled ? "sampled" : "exact"}};
    if (sampled) {
      j["domains"] = domains;
      j["samples_per_domain"] = samples_per_domain.describe();
      j["seed"] = seed;
    }
    return j;
  }
};

inline SweepConfig parse_sweep_config(std::string_view text_in, const std::filesystem::path& base_dir = {}) {
  const auto sections = text::parse_document(text_in);
  SweepConfig c;
  bool have_gen = false, have_sweep = false;
  for (const auto& sec : sections) {
    if (sec.name == "generator") {
      c.generator = GeneratorConfig::from_section(sec, base_dir);
      have_gen = true;
    } else if (sec.name == "sweep") {
      text::KeyValues kv(sec);
      kv.require_known({"family", "ks", "mode", "domains", "samples_per_domain", "seed"});
      const auto fam = kv.str("family", "binned_threshold");
      if (fam == "histogram")
        c.family = Family::kHistogram;
      else if (fam == "binned_threshold")
        c.family = Family::kBinnedThreshold;
      else
        kv.fail("family", "expected histogram or binned_threshold");
      if (kv.has("ks")) c.ks = kv.counts("ks");
      for (std::size_t i = 0; i < c.ks.size(); ++i)
        if (c.ks[i] < 1 || (i > 0 && c.ks[i] <= c.ks[i - 1]))
          kv.fail("ks", "capacities must be positive and strictly increasing");
      if (c.ks.empty()) kv.fail("ks", "at least one capacity is required");
      const auto mode = kv.str("mode", "exact");
      if (mode != "exact" && mode != "sampled") kv.fail("mode", "expected exact or sampled");
      c.sampled = mode == "sampled";
      c.domains = kv.count("domains", c.domains);
      if (c.domains < 1) kv.fail("domains", "domains must be >= 1");
      c.samples_per_domain = parse_sample_size_rule(kv, "samples_per_domain", c.samples_per_domain);
      c.seed = kv.u64("seed", c.seed);
      have_sweep = true;
    } else {
      throw ParseError(sec.title(), "", sec.line, "unknown section");
    }
  }
  if (!have_gen) throw ParseError("generator", "", 0, "missing section");
  if (!have_sweep) throw ParseError("sweep", "", 0, "missing section");
  return c;
}

inline std::vector<SweepRow> run_sweep(const SweepConfig& c, const FactoredDistribution& f) {
  const auto joint = build_joint(f);
  if (!c.sampled) return capacity_sweep(joint, c.ks, c.family);
  const auto ts = sample_training_set(f, c.domains, c.samples_per_domain, derive_seed(c.seed, 0));
  const auto pts = ts.weighted();
  return capacity_sweep(joint, c.ks, c.family, &pts);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "k,pool_risk,dg_risk,gap\n";
  for (const auto& r : rows)
    os << r.k << "," << format_sig(r.r_pool) << "," << format_sig(r.r_dg) << "," << format_sig(r.gap()) << "\n";
  return os.str();
}

}  // namespace dg_risklab
