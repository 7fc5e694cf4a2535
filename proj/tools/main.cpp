// Batch front end: validate parameter files, solve the Riccati system,
// simulate ensembles and run the verification suites.
//
// Exit codes: 0 pass, 1 domain/validation failure, 2 input error.

#include "affine_hilbert/families.hpp"
#include "affine_hilbert/io.hpp"
#include "affine_hilbert/params.hpp"
#include "affine_hilbert/riccati.hpp"
#include "affine_hilbert/simulate.hpp"
#include "affine_hilbert/transform.hpp"
#include "affine_hilbert/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ah = affine_hilbert;
using json = ah::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitPass = 0;
constexpr int kExitDomain = 1;
constexpr int kExitInput = 2;

int default_threads() {
  if (const char* env = std::getenv("AFFINE_HILBERT_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

std::uint64_t resolve_seed(bool seed_given, std::uint64_t seed) {
  if (seed_given) return seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

struct Manifest {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json config = json::object();
  std::uint64_t master_seed = 0;
  bool has_seed = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& path) {
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j{{"command", command},
           {"inputs", inputs},
           {"outputs", outputs},
           {"config", config},
           {"wall_seconds", wall},
           {"library_version", kVersion}};
    if (has_seed) j["master_seed"] = master_seed;
    std::ofstream out(path);
    out << j.dump(2) << '\n';
  }
};

std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

// parses "a", "a:b" (a + bi) entries; a single entry broadcasts to all coords
ah::CVec parse_u(const std::string& text, int n) {
  std::vector<ah::Complex> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double re = 0.0, im = 0.0;
    auto colon = item.find(':');
    if (colon == std::string::npos) {
      re = std::stod(item);
    } else {
      re = std::stod(item.substr(0, colon));
      im = std::stod(item.substr(colon + 1));
    }
    vals.emplace_back(re, im);
  }
  if (vals.empty()) throw std::invalid_argument("empty value list");
  ah::CVec u(n);
  if (static_cast<int>(vals.size()) == 1) {
    for (int k = 0; k < n; ++k) u[k] = vals[0];
  } else if (static_cast<int>(vals.size()) == n) {
    for (int k = 0; k < n; ++k) u[k] = vals[static_cast<std::size_t>(k)];
  } else {
    throw std::invalid_argument("expected 1 or n entries");
  }
  return u;
}

ah::RVec parse_x(const std::string& text, int n) {
  ah::CVec u = parse_u(text, n);
  ah::RVec x(n);
  for (int k = 0; k < n; ++k) {
    if (u[k].imag() != 0.0) throw std::invalid_argument("state vector must be real");
    x[k] = u[k].real();
  }
  return x;
}

int run_validate(const std::string& params_path, double tol, const std::string& out_path) {
  Manifest man;
  man.command = "validate";
  man.inputs = {params_path};
  man.config = json{{"tol", tol}};
  ah::AffineParams p = ah::load_params(params_path);

  ah::AdmissibilityReport rep = ah::check_admissibility(p, tol);
  rep.merge(ah::check_inward(p, tol));
  rep.merge(ah::check_parallel(p, tol));
  auto [lam, kap] = ah::lambda_kappa(p);
  auto [nu, T] = ah::build_retraction(p.partition, lam, ah::RetractionRule::Identity);
  (void)T;
  rep.merge(ah::check_existence_side_conditions(p, nu, tol));
  rep.merge(ah::check_uniqueness_conditions(p, tol));

  json jrep = ah::admissibility_report_to_json(rep);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << jrep.dump(2) << '\n';
    man.outputs.push_back(out_path);
    man.write(manifest_path_for(out_path));
  }
  for (const ah::Finding& f : rep.findings) {
    const char* status = f.status == ah::FindingStatus::Pass
                             ? "pass"
                             : (f.status == ah::FindingStatus::Fail ? "fail" : "truncation_only");
    std::cout << f.id << ": " << status << '\n';
  }
  std::cout << (rep.overall ? "overall: pass" : "overall: fail") << '\n';
  return rep.overall ? kExitPass : kExitDomain;
}

int run_riccati(const std::string& params_path, const std::string& u_text, double t_end,
                double dt, double atol, const std::string& out_path) {
  Manifest man;
  man.command = "riccati";
  man.inputs = {params_path};
  man.config = json{{"u", u_text}, {"t_end", t_end}, {"dt", dt}, {"atol", atol}};
  ah::AffineParams p = ah::load_params(params_path);
  ah::CVec u = parse_u(u_text, p.n());
  if (!ah::in_U(u, p.partition, 1e-12)) {
    for (int i : p.partition.I)
      if (u[i].real() > 1e-12) {
        std::cerr << "u outside the admissible domain: Re(u_" << (i + 1) << ") > 0\n";
        return kExitDomain;
      }
    for (int j : p.partition.J)
      if (std::abs(u[j].real()) > 1e-12) {
        std::cerr << "u outside the admissible domain: Re(u_" << (j + 1) << ") != 0\n";
        return kExitDomain;
      }
    return kExitDomain;
  }
  ah::SolverOpts opts;
  if (dt > 0.0) {
    opts.method = ah::RiccatiMethod::RK4Fixed;
    opts.dt = dt;
  } else {
    opts.method = ah::RiccatiMethod::AdaptiveRK45;
    opts.atol = opts.rtol = atol;
  }
  try {
    ah::RiccatiSolution sol = ah::solve_riccati(p, u, t_end, opts);
    std::ofstream out(out_path);
    ah::write_riccati_csv(out, sol);
    man.outputs.push_back(out_path);
    man.write(manifest_path_for(out_path));
    std::cout << "final psi_1 = " << ah::fmt_double(sol.psi_end()[0].real()) << '\n';
    return kExitPass;
  } catch (const ah::solver_error& e) {
    std::cerr << "solver failure: " << e.what() << " at t = " << e.time
              << " (residual " << e.residual << ")\n";
    return kExitDomain;
  }
}

int run_simulate(const std::string& params_path, const std::string& x0_text, long paths,
                 double dt, double t_end, bool seed_given, std::uint64_t seed, int threads,
                 const std::string& scheme, bool exact, const std::string& out_prefix) {
  Manifest man;
  man.command = "simulate";
  man.inputs = {params_path};
  ah::AffineParams p = ah::load_params(params_path);
  ah::RVec x0 = x0_text.empty() ? ah::RVec::Zero(p.n()) : parse_x(x0_text, p.n());
  man.master_seed = resolve_seed(seed_given, seed);
  man.has_seed = true;
  man.config = json{{"paths", paths}, {"dt", dt},      {"t_end", t_end},
                    {"scheme", scheme}, {"exact", exact}, {"threads", threads}};

  std::string paths_csv = out_prefix + "_paths.csv";
  std::string summary_json = out_prefix + "_summary.json";
  auto t0 = std::chrono::steady_clock::now();

  ah::PathEnsemble ens;
  if (exact) {
    if (!p.partition.I.empty()) {
      std::cerr << "--exact requires a pure free-coordinate model\n";
      return kExitDomain;
    }
    ens.config.t_end = t_end;
    ens.config.dt = t_end;
    ens.config.n_paths = paths;
    ens.config.master_seed = man.master_seed;
    ens.times = {t_end};
    ens.states.resize(static_cast<std::size_t>(paths));
    ens.seeds.resize(static_cast<std::size_t>(paths));
    for (long path = 0; path < paths; ++path) {
      ah::PathRng rng(man.master_seed, static_cast<std::uint64_t>(path));
      ens.seeds[static_cast<std::size_t>(path)] = rng.stream_seed();
      ens.states[static_cast<std::size_t>(path)].push_back(ah::ou_exact(p, x0, t_end, rng));
    }
  } else {
    ah::SimConfig cfg;
    cfg.t_end = t_end;
    cfg.dt = dt;
    cfg.n_paths = paths;
    cfg.master_seed = man.master_seed;
    cfg.n_threads = threads;
    cfg.scheme = scheme == "absorbed" ? ah::SimScheme::Absorbed : ah::SimScheme::FullTruncation;
    ens = ah::simulate_paths(p, x0, cfg);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream out(paths_csv);
    ah::write_paths_csv(out, ens);
  }
  {
    std::ofstream out(summary_json);
    out << ah::ensemble_summary_to_json(ens, wall).dump(2) << '\n';
  }
  man.outputs = {paths_csv, summary_json};
  man.write(manifest_path_for(out_prefix));
  std::cout << "simulated " << paths << " paths to t = " << t_end << '\n';
  return kExitPass;
}

int run_verify(const std::string& params_path, const std::string& suite, long paths, double dt,
               double t_end, bool seed_given, std::uint64_t seed, int threads,
               const std::string& out_path) {
  Manifest man;
  man.command = "verify";
  man.inputs = {params_path};
  ah::AffineParams p = ah::load_params(params_path);
  man.master_seed = resolve_seed(seed_given, seed);
  man.has_seed = true;
  man.config = json{{"suite", suite}, {"paths", paths},     {"dt", dt},
                    {"t_end", t_end}, {"threads", threads}};

  ah::VerifyConfig vc;
  vc.n_paths = paths;
  vc.dt = dt;
  vc.master_seed = man.master_seed;
  vc.n_threads = threads;

  ah::RVec x0(p.n());
  for (int k = 0; k < p.n(); ++k) x0[k] = p.partition.I.empty() ? 0.0 : 0.5;
  for (int j : p.partition.J) x0[j] = 0.0;

  json reports = json::array();
  bool pass = true;
  bool warned = false;
  auto add = [&](const ah::VerificationReport& r) {
    reports.push_back(ah::verification_report_to_json(r));
    pass = pass && r.pass;
    warned = warned || !r.warnings.empty();
  };

  if (suite == "affine" || suite == "all")
    add(ah::affine_identity_test(p, x0, t_end, ah::default_u_batch(p.partition), vc));
  if (suite == "martingale" || suite == "all") {
    ah::CVec u = ah::default_u_batch(p.partition).front();
    add(ah::martingale_test(p, x0, t_end, u, {0.0, t_end / 2.0, t_end}, vc));
  }
  if (suite == "joint" || suite == "all") {
    auto batch = ah::default_u_batch(p.partition);
    add(ah::joint_laplace_test(p, x0, t_end / 2.0, t_end, batch.front(), batch.back(), vc));
  }
  if (suite == "uniqueness" || suite == "all") {
    ah::SimConfig cfg;
    cfg.t_end = t_end;
    cfg.dt = dt;
    cfg.n_paths = std::min<long>(paths, 200);
    cfg.master_seed = vc.master_seed;
    cfg.n_threads = threads;
    ah::UniquenessReport ur = ah::pathwise_uniqueness_test(p, x0, 1e-6, cfg);
    json gaps = json::array();
    for (double g : ur.terminal_gaps) gaps.push_back(g);
    reports.push_back(json{{"test", "pathwise_uniqueness"},
                           {"pass", ur.pass},
                           {"eps", ur.eps},
                           {"terminal_gaps", std::move(gaps)},
                           {"envelope", ur.envelope}});
    pass = pass && ur.pass;
  }

  json out = json{{"suite", suite}, {"pass", pass}, {"reports", std::move(reports)}};
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    f << out.dump(2) << '\n';
    man.outputs.push_back(out_path);
    man.write(manifest_path_for(out_path));
  }
  std::cout << (pass ? "verify: pass" : "verify: fail");
  if (warned) std::cout << " (with warnings)";
  std::cout << '\n';
  return pass ? kExitPass : kExitDomain;
}

int run_families(const std::string& out_dir) {
  Manifest man;
  man.command = "families";
  struct Item {
    const char* name;
    ah::FamilySpec spec;
  };
  std::vector<Item> items;
  {
    ah::FamilySpec s;
    s.family = ah::FamilyKind::CIR;
    s.n = 1;
    s.lambda_rule = {ah::DecayKind::Power, 2.0, 0.0};
    s.rho_rule = {ah::DecayKind::Power, 1.0, 0.0};
    s.m0_rule = {ah::DecayKind::Power, 1.0, 0.0};
    items.push_back({"cir1", s});
  }
  {
    ah::FamilySpec s;
    s.family = ah::FamilyKind::CIR;
    s.n = 10;
    items.push_back({"cir10", s});
  }
  {
    ah::FamilySpec s;
    s.family = ah::FamilyKind::Heston;
    s.nI = 10;
    s.n = 20;
    items.push_back({"heston10", s});
  }
  {
    ah::FamilySpec s;
    s.family = ah::FamilyKind::OU;
    s.n = 5;
    items.push_back({"ou5", s});
  }
  for (const Item& it : items) {
    ah::AffineParams p = ah::make_family(it.spec);
    if (it.spec.lambda_rule.exponent == 0.0) p.decay.reset();
    std::string spec_path = out_dir + "/" + it.name + "_spec.json";
    std::string params_path = out_dir + "/" + it.name + ".json";
    {
      std::ofstream f(spec_path);
      f << ah::family_spec_to_json(it.spec).dump(2) << '\n';
    }
    {
      std::ofstream f(params_path);
      f << ah::params_to_json(p).dump(2) << '\n';
    }
    man.outputs.push_back(spec_path);
    man.outputs.push_back(params_path);
    std::cout << "wrote " << params_path << '\n';
  }
  man.write(out_dir + "/families.manifest.json");
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"affine diffusion toolkit: validation, Riccati solving, simulation, verification"};
  app.require_subcommand(1);

  // validate
  auto* validate = app.add_subcommand("validate", "run the parameter checkers");
  std::string v_params, v_out;
  double v_tol = 1e-10;
  validate->add_option("params", v_params, "parameter JSON file")->required();
  validate->add_option("--tol", v_tol, "checker tolerance");
  validate->add_option("--out", v_out, "report JSON output path");

  // riccati
  auto* riccati = app.add_subcommand("riccati", "solve the Riccati system");
  std::string r_params, r_u = "-1", r_out = "solution.csv";
  double r_t = 1.0, r_dt = 0.0, r_atol = 1e-9;
  riccati->add_option("params", r_params, "parameter JSON file")->required();
  riccati->add_option("--u", r_u, "initial value, comma-separated re[:im] entries");
  riccati->add_option("--t-end", r_t, "horizon");
  riccati->add_option("--dt", r_dt, "fixed RK4 step (selects the fixed-step scheme)");
  riccati->add_option("--atol", r_atol, "adaptive tolerance");
  riccati->add_option("--out", r_out, "solution CSV path");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "simulate a path ensemble");
  std::string s_params, s_x0, s_scheme = "full-truncation", s_out = "ensemble";
  long s_paths = 1000;
  double s_dt = 1e-3, s_t = 1.0;
  std::uint64_t s_seed = 0;
  bool s_exact = false;
  int s_threads = default_threads();
  simulate->add_option("params", s_params, "parameter JSON file")->required();
  simulate->add_option("--x0", s_x0, "initial state, comma-separated");
  simulate->add_option("--paths", s_paths, "number of paths");
  simulate->add_option("--dt", s_dt, "step size");
  simulate->add_option("--t-end", s_t, "horizon");
  auto* s_seed_opt = simulate->add_option("--seed", s_seed, "master seed");
  simulate->add_option("--threads", s_threads, "worker threads");
  simulate->add_option("--scheme", s_scheme, "full-truncation | absorbed");
  simulate->add_flag("--exact", s_exact, "exact Gaussian sampler (free-coordinate models)");
  simulate->add_option("--out", s_out, "output prefix");

  // verify
  auto* verify = app.add_subcommand("verify", "run Monte Carlo verification suites");
  std::string y_params, y_suite = "all", y_out = "report.json";
  long y_paths = 100000;
  double y_dt = 1e-3, y_t = 1.0;
  std::uint64_t y_seed = 0;
  int y_threads = default_threads();
  verify->add_option("params", y_params, "parameter JSON file")->required();
  verify->add_option("--suite", y_suite, "affine | martingale | joint | uniqueness | all");
  verify->add_option("--paths", y_paths, "paths per ensemble");
  verify->add_option("--dt", y_dt, "step size");
  verify->add_option("--t-end", y_t, "horizon");
  auto* y_seed_opt = verify->add_option("--seed", y_seed, "master seed");
  verify->add_option("--threads", y_threads, "worker threads");
  verify->add_option("--out", y_out, "report JSON path");

  // families
  auto* families = app.add_subcommand("families", "emit the shipped family parameter files");
  std::string f_dir = ".";
  families->add_option("--out-dir", f_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*validate) return run_validate(v_params, v_tol, v_out);
    if (*riccati) return run_riccati(r_params, r_u, r_t, r_dt, r_atol, r_out);
    if (*simulate)
      return run_simulate(s_params, s_x0, s_paths, s_dt, s_t, s_seed_opt->count() > 0, s_seed,
                          s_threads, s_scheme, s_exact, s_out);
    if (*verify)
      return run_verify(y_params, y_suite, y_paths, y_dt, y_t, y_seed_opt->count() > 0, y_seed,
                        y_threads, y_out);
    if (*families) return run_families(f_dir);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
