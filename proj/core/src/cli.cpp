#include "unibound/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "unibound/distribution.hpp"
#include "unibound/model.hpp"
#include "unibound/oracle.hpp"
#include "unibound/stepper.hpp"
#include "unibound/types.hpp"

namespace unibound::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fmt_sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

std::string fmt_time(double t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", t);
  return buf;
}

ModelSpec load_model(const std::string& path, const std::string& builtin) {
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cli: cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
  }
  return builtin_model(builtin);
}

/// Distribution files are diffable by construction: lexicographic state
/// order and fixed full-precision formatting, independent of map iteration.
void write_distribution_csv(const fs::path& file, const SparseDistribution& dist,
                            std::size_t n) {
  std::string out;
  out.reserve(dist.size() * 40 + 64);
  for (std::size_t k = 0; k < n; ++k) {
    out += "x_";
    out += std::to_string(k + 1);
    out += ',';
  }
  out += "probability\n";
  for (const auto& [x, p] : dist.sorted()) {
    for (std::size_t k = 0; k < n; ++k) {
      out += std::to_string(x[k]);
      out += ',';
    }
    out += fmt_sci(p);
    out += '\n';
  }
  std::ofstream f(file, std::ios::binary);
  f << out;
  if (!f) throw Error("cli: failed to write " + file.string());
}

struct RunArgs {
  std::string model_path;
  std::string builtin;
  double t_max = 0.0;
  bool has_t_max = false;
  int r_star = 5;
  double epsilon = 1e-10;
  double delta = 1e-15;
  std::string findmax = "monotone";
  double ell = 4.0;
  std::vector<double> checkpoints;
  double every = 0.0;
  double rho = 0.0;
  bool has_rho = false;
  std::string out_dir;
};

constexpr std::size_t kMaxSummarySteps = 20000;

void write_summary_json(const fs::path& file, const RunResult& res) {
  ordered_json j;
  const double total = res.ledger.total();
  j["total_error"] = total;
  j["max_window_size"] = res.max_window_size;

  const auto& steps = res.ledger.steps();
  // The full per-window trace of a long run would dominate the artifact
  // size, so the emitted array is evenly strided down to a bounded length;
  // the cumulative losses above are exact regardless.
  const std::size_t stride =
      steps.size() > kMaxSummarySteps ? (steps.size() + kMaxSummarySteps - 1) / kMaxSummarySteps
                                      : 1;
  ordered_json arr = ordered_json::array();
  auto emit = [&](const StepRecord& s) {
    ordered_json e;
    e["t"] = s.t;
    e["delta"] = s.delta;
    e["mu"] = s.mu;
    e["R"] = s.R;
    e["bounding_loss"] = s.bounding_loss;
    e["poisson_loss"] = s.poisson_loss;
    e["prune_loss"] = s.prune_loss;
    arr.push_back(std::move(e));
  };
  for (std::size_t i = 0; i < steps.size(); i += stride) emit(steps[i]);
  if (!steps.empty() && (steps.size() - 1) % stride != 0) emit(steps.back());
  j["steps"] = std::move(arr);

  ordered_json split;
  const double b = res.ledger.bounding_loss();
  const double p = res.ledger.poisson_loss();
  const double q = res.ledger.prune_loss();
  split["bounding"] = total > 0.0 ? 100.0 * b / total : 0.0;
  split["poisson"] = total > 0.0 ? 100.0 * p / total : 0.0;
  split["prune"] = total > 0.0 ? 100.0 * q / total : 0.0;
  j["loss_split_percent"] = std::move(split);

  j["windows"] = steps.size();
  j["steps_stride"] = stride;
  j["final_time"] = res.final_time;
  j["final_mass"] = res.final_dist.mass();
  j["support_size"] = res.final_dist.size();
  j["envelope_retries"] = res.envelope_retries;
  j["fallback_windows"] = res.fallback_windows;
  j["budget_retries"] = res.budget_retries;
  j["ell_final"] = res.ell_final;

  std::ofstream f(file, std::ios::binary);
  f << j.dump(2) << '\n';
  if (!f) throw Error("cli: failed to write " + file.string());
}

int cmd_run(const RunArgs& a) {
  const ModelSpec spec = load_model(a.model_path, a.builtin);

  RunOptions opts;
  opts.r_star = a.r_star;
  opts.epsilon = a.epsilon;
  opts.delta_threshold = a.delta;
  opts.findmax =
      a.findmax == "moments" ? FindMaxMethod::moments : FindMaxMethod::monotone;
  opts.ell = a.ell;
  if (a.has_t_max) opts.t_max = a.t_max;
  if (a.has_rho) opts.rho_budget = a.rho;

  const double t_end = a.has_t_max ? a.t_max : spec.horizon;
  if (a.every > 0.0) {
    for (long k = 1;; ++k) {
      if (k > 2'000'000) throw Error("cli: --every stride yields too many checkpoints");
      const double t = static_cast<double>(k) * a.every;
      if (t >= t_end) break;
      opts.checkpoints.push_back(t);
    }
  } else {
    opts.checkpoints = a.checkpoints;
  }

  const RunResult res = run(spec, opts);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  bool final_written = false;
  for (const Checkpoint& cp : res.checkpoints) {
    write_distribution_csv(out / ("dist_t" + fmt_time(cp.t) + ".csv"), cp.dist,
                           spec.dim());
    final_written = final_written || cp.t == res.final_time;
  }
  if (!final_written) {
    write_distribution_csv(out / ("dist_t" + fmt_time(res.final_time) + ".csv"),
                           res.final_dist, spec.dim());
  }
  write_summary_json(out / "summary.json", res);

  std::cout << "total_error=" << fmt_sci(res.ledger.total()) << '\n'
            << "max_window_size=" << res.max_window_size << '\n'
            << "windows=" << res.ledger.steps().size() << '\n'
            << "support_size=" << res.final_dist.size() << '\n'
            << "out=" << a.out_dir << '\n';
  return kExitOk;
}

struct VerifyArgs {
  std::string model_path;
  std::string builtin;
  std::vector<long long> box;
  double t = 0.0;
  double tol = 1e-10;
  double slack = 1e-9;
  double boundary_tol = 1e-12;
  int r_star = 5;
  double epsilon = 1e-10;
  double delta = 1e-15;
};

int cmd_verify(const VerifyArgs& a) {
  const ModelSpec spec = load_model(a.model_path, a.builtin);
  if (a.box.size() != spec.dim()) {
    throw Error("cli: --box needs one upper bound per species (" +
                std::to_string(spec.dim()) + ")");
  }
  StateBox box;
  box.upper.assign(a.box.begin(), a.box.end());

  RunOptions opts;
  opts.r_star = a.r_star;
  opts.epsilon = a.epsilon;
  opts.delta_threshold = a.delta;
  opts.t_max = a.t;
  const RunResult res = run(spec, opts);

  const ReferenceSolution ref =
      integrate_forward(spec, initial_distribution(spec), 0.0, a.t, box, a.tol);
  const UnderApproxReport rep = verify_underapprox(res.final_dist, ref, a.slack);

  std::cout << "boundary_mass=" << fmt_sci(rep.boundary_mass) << '\n'
            << "worst_excess=" << fmt_sci(rep.worst_excess) << '\n'
            << "violations=" << rep.violations.size() << '\n';
  if (rep.boundary_mass > a.boundary_tol) {
    std::cout << "verdict=inconclusive\n";
    return kExitInconclusive;
  }
  if (!rep.pass()) {
    std::cout << "verdict=fail\n";
    std::size_t shown = 0;
    for (const Violation& v : rep.violations) {
      if (++shown > 10) break;
      std::string s = "violation state=(";
      for (std::size_t k = 0; k < v.state.size(); ++k) {
        if (k) s += ',';
        s += std::to_string(v.state[k]);
      }
      s += ") p_hat=" + fmt_sci(v.p_hat) + " p_ref=" + fmt_sci(v.p_ref);
      std::cout << s << '\n';
    }
    return kExitViolations;
  }
  std::cout << "verdict=pass\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Transient analysis of infinite Markov population models via "
               "adaptive uniformization with guaranteed under-approximation"};
  app.require_subcommand(1);

  RunArgs ra;
  CLI::App* runc = app.add_subcommand("run", "Propagate a model and write checkpoints");
  auto* opt_model = runc->add_option("--model", ra.model_path, "Model JSON file");
  auto* opt_builtin =
      runc->add_option("--builtin", ra.builtin,
                       "Builtin model name (gene_expression, exclusive_switch)");
  opt_model->excludes(opt_builtin);
  auto* opt_tmax = runc->add_option("--t-max", ra.t_max, "End time (default: horizon)");
  runc->add_option("--r-star", ra.r_star, "Target jump-count truncation per window")
      ->required();
  runc->add_option("--epsilon", ra.epsilon, "Poisson tail tolerance")->capture_default_str();
  runc->add_option("--delta", ra.delta, "Pruning threshold")->capture_default_str();
  runc->add_option("--findmax", ra.findmax, "Dominating-state method")->capture_default_str()
      ->check(CLI::IsMember({"monotone", "moments"}));
  runc->add_option("--ell", ra.ell, "Moment-envelope width in standard deviations")
      ->capture_default_str();
  auto* opt_cps = runc->add_option("--checkpoints", ra.checkpoints,
                                   "Comma-separated emission times")
                      ->delimiter(',');
  auto* opt_every =
      runc->add_option("--every", ra.every, "Emit checkpoints every S time units");
  opt_cps->excludes(opt_every);
  auto* opt_rho = runc->add_option("--rho", ra.rho, "Total pruning-loss budget");
  runc->add_option("--out", ra.out_dir, "Output directory")->required();

  VerifyArgs va;
  CLI::App* ver = app.add_subcommand(
      "verify", "Compare a run against a dense finite-box reference");
  auto* vopt_model = ver->add_option("--model", va.model_path, "Model JSON file");
  auto* vopt_builtin = ver->add_option("--builtin", va.builtin, "Builtin model name");
  vopt_model->excludes(vopt_builtin);
  ver->add_option("--box", va.box, "Per-species inclusive upper bounds")
      ->delimiter(',')
      ->required();
  ver->add_option("--t", va.t, "Comparison time")->required();
  ver->add_option("--tol", va.tol, "Reference integrator tolerance")->capture_default_str();
  ver->add_option("--slack", va.slack, "Pointwise comparison slack")->capture_default_str();
  ver->add_option("--boundary-tol", va.boundary_tol,
                  "Max boundary mass for a conclusive verdict")
      ->capture_default_str();
  ver->add_option("--r-star", va.r_star, "Engine jump-count budget")->capture_default_str();
  ver->add_option("--epsilon", va.epsilon, "Engine Poisson tail tolerance")->capture_default_str();
  ver->add_option("--delta", va.delta, "Engine pruning threshold")->capture_default_str();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("unibound");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  argv.reserve(argv_store.size());
  for (std::string& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (runc->parsed()) {
      if (opt_model->count() == 0 && opt_builtin->count() == 0) {
        throw CLI::RequiredError("--model or --builtin");
      }
      ra.has_t_max = opt_tmax->count() > 0;
      ra.has_rho = opt_rho->count() > 0;
      return cmd_run(ra);
    }
    if (vopt_model->count() == 0 && vopt_builtin->count() == 0) {
      throw CLI::RequiredError("--model or --builtin");
    }
    return cmd_verify(va);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace unibound::cli
