#pragma once

// File formats: the parameter JSON schema, family-spec JSON, report JSON and
// CSV emission. All indices are 1-based on disk and 0-based in memory; CSV
// uses '.' decimals, '\n' endings and shortest round-trip number formatting.

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/families.hpp"
#include "affine_hilbert/params.hpp"
#include "affine_hilbert/riccati.hpp"
#include "affine_hilbert/simulate.hpp"
#include "affine_hilbert/verify.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <string>
#include <vector>

namespace affine_hilbert {

using json = nlohmann::json;

/// Shortest decimal representation that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// decay rules

inline json decay_rule_to_json(const DecayRule& r) {
  return json{{"kind", r.kind == DecayKind::Power ? "power" : "geometric"},
              {"c", r.c},
              {"exponent", r.exponent}};
}

inline DecayRule decay_rule_from_json(const json& j) {
  DecayRule r;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "power")
    r.kind = DecayKind::Power;
  else if (kind == "geometric")
    r.kind = DecayKind::Geometric;
  else
    throw std::invalid_argument("decay rule: unknown kind '" + kind + "'");
  r.c = j.at("c").get<double>();
  r.exponent = j.at("exponent").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// parameters

namespace detail {

inline json mat_to_json(const RMat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline RMat mat_from_json(const json& j, int n, const char* field) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw std::invalid_argument(std::string("params: ") + field + " must be an n x n array");
  RMat m(n, n);
  for (int r = 0; r < n; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw std::invalid_argument(std::string("params: ") + field + " row length mismatch");
    for (int c = 0; c < n; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline RVec vec_from_json(const json& j, int n, const char* field) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw std::invalid_argument(std::string("params: ") + field + " must have length n");
  RVec v(n);
  for (int k = 0; k < n; ++k) v[k] = j.at(static_cast<std::size_t>(k)).get<double>();
  return v;
}

}  // namespace detail

inline json params_to_json(const AffineParams& p) {
  json j;
  j["n"] = p.n();
  json I = json::array();
  for (int i : p.partition.I) I.push_back(i + 1);
  j["I"] = std::move(I);
  json m0 = json::array();
  for (int k = 0; k < p.n(); ++k) m0.push_back(p.m0[k]);
  j["m0"] = std::move(m0);
  j["M"] = detail::mat_to_json(p.M);
  j["n0"] = detail::mat_to_json(p.n0);
  json nk = json::array();
  for (int k = 0; k < p.n(); ++k) {
    const RMat& m = p.n_k(k);
    if (m.size() == 0)
      nk.push_back(nullptr);
    else
      nk.push_back(detail::mat_to_json(m));
  }
  j["nk"] = std::move(nk);
  json sw = json::array();
  for (int k = 0; k < p.n(); ++k) sw.push_back(p.sigma_w_diag[k]);
  j["sigma_w_diag"] = std::move(sw);
  if (p.decay) {
    json d;
    if (p.decay->lambda_rule) d["lambda"] = decay_rule_to_json(*p.decay->lambda_rule);
    if (p.decay->kappa_rule) d["kappa"] = decay_rule_to_json(*p.decay->kappa_rule);
    if (p.decay->nu_rule) d["nu"] = decay_rule_to_json(*p.decay->nu_rule);
    if (p.decay->rho_rule) d["rho"] = decay_rule_to_json(*p.decay->rho_rule);
    j["decay"] = std::move(d);
  }
  return j;
}

inline AffineParams params_from_json(const json& j) {
  AffineParams p;
  int n = j.at("n").get<int>();
  if (n < 1) throw std::invalid_argument("params: n must be >= 1");
  std::vector<int> cone;
  for (const json& v : j.at("I")) {
    int i = v.get<int>();
    if (i < 1 || i > n) throw std::invalid_argument("params: cone index out of range");
    cone.push_back(i - 1);
  }
  p.partition = IndexPartition::from_cone(n, std::move(cone));
  p.m0 = detail::vec_from_json(j.at("m0"), n, "m0");
  p.M = detail::mat_from_json(j.at("M"), n, "M");
  p.n0 = detail::mat_from_json(j.at("n0"), n, "n0");
  p.nk.assign(static_cast<std::size_t>(n), RMat());
  const json& nk = j.at("nk");
  if (!nk.is_array() || static_cast<int>(nk.size()) != n)
    throw std::invalid_argument("params: nk must have length n");
  for (int k = 0; k < n; ++k) {
    const json& e = nk.at(static_cast<std::size_t>(k));
    if (!e.is_null()) p.nk[static_cast<std::size_t>(k)] = detail::mat_from_json(e, n, "nk");
  }
  if (j.contains("sigma_w_diag"))
    p.sigma_w_diag = detail::vec_from_json(j.at("sigma_w_diag"), n, "sigma_w_diag");
  else
    p.sigma_w_diag = RVec::Ones(n);
  if (j.contains("decay")) {
    TailDecay d;
    const json& dj = j.at("decay");
    if (dj.contains("lambda")) d.lambda_rule = decay_rule_from_json(dj.at("lambda"));
    if (dj.contains("kappa")) d.kappa_rule = decay_rule_from_json(dj.at("kappa"));
    if (dj.contains("nu")) d.nu_rule = decay_rule_from_json(dj.at("nu"));
    if (dj.contains("rho")) d.rho_rule = decay_rule_from_json(dj.at("rho"));
    p.decay = std::move(d);
  }
  return p;
}

inline AffineParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open params file: " + path);
  json j = json::parse(in);
  return params_from_json(j);
}

// ---------------------------------------------------------------------------
// family specs

inline json family_spec_to_json(const FamilySpec& s) {
  json j;
  switch (s.family) {
    case FamilyKind::OU: j["family"] = "ou"; break;
    case FamilyKind::CIR: j["family"] = "cir"; break;
    case FamilyKind::Heston: j["family"] = "heston"; break;
  }
  j["n"] = s.n;
  j["nI"] = s.nI;
  j["constants"] = json{{"lambda", decay_rule_to_json(s.lambda_rule)},
                        {"kappa", decay_rule_to_json(s.kappa_rule)},
                        {"rho", decay_rule_to_json(s.rho_rule)},
                        {"m0", decay_rule_to_json(s.m0_rule)},
                        {"n0", decay_rule_to_json(s.n0_rule)},
                        {"sigma_w", decay_rule_to_json(s.sigma_w_rule)}};
  return j;
}

inline FamilySpec family_spec_from_json(const json& j) {
  FamilySpec s;
  std::string fam = j.at("family").get<std::string>();
  if (fam == "ou")
    s.family = FamilyKind::OU;
  else if (fam == "cir")
    s.family = FamilyKind::CIR;
  else if (fam == "heston")
    s.family = FamilyKind::Heston;
  else
    throw std::invalid_argument("family spec: unknown family '" + fam + "'");
  if (j.contains("n")) s.n = j.at("n").get<int>();
  if (j.contains("nI")) s.nI = j.at("nI").get<int>();
  if (j.contains("constants")) {
    const json& c = j.at("constants");
    if (c.contains("lambda")) s.lambda_rule = decay_rule_from_json(c.at("lambda"));
    if (c.contains("kappa")) s.kappa_rule = decay_rule_from_json(c.at("kappa"));
    if (c.contains("rho")) s.rho_rule = decay_rule_from_json(c.at("rho"));
    if (c.contains("m0")) s.m0_rule = decay_rule_from_json(c.at("m0"));
    if (c.contains("n0")) s.n0_rule = decay_rule_from_json(c.at("n0"));
    if (c.contains("sigma_w")) s.sigma_w_rule = decay_rule_from_json(c.at("sigma_w"));
  }
  return s;
}

// ---------------------------------------------------------------------------
// reports

inline json admissibility_report_to_json(const AdmissibilityReport& rep) {
  json findings = json::array();
  for (const Finding& f : rep.findings) {
    const char* status = f.status == FindingStatus::Pass
                             ? "pass"
                             : (f.status == FindingStatus::Fail ? "fail" : "truncation_only");
    findings.push_back(json{{"id", f.id},
                            {"status", status},
                            {"residual", f.residual},
                            {"detail", f.detail}});
  }
  return json{{"overall", rep.overall}, {"findings", std::move(findings)}};
}

inline json verification_report_to_json(const VerificationReport& rep) {
  json records = json::array();
  for (const VerifyRecord& r : rep.records) {
    json u_re = json::array(), u_im = json::array();
    for (Eigen::Index k = 0; k < r.u.size(); ++k) {
      u_re.push_back(r.u[k].real());
      u_im.push_back(r.u[k].imag());
    }
    records.push_back(json{{"u_re", std::move(u_re)},
                           {"u_im", std::move(u_im)},
                           {"mc_re", r.mc.real()},
                           {"mc_im", r.mc.imag()},
                           {"stderr", r.mc_stderr},
                           {"analytic_re", r.analytic.real()},
                           {"analytic_im", r.analytic.imag()},
                           {"z", r.z},
                           {"allowance", r.allowance},
                           {"pass", r.pass},
                           {"label", r.label}});
  }
  return json{{"test", rep.test},
              {"pass", rep.pass},
              {"records", std::move(records)},
              {"warnings", rep.warnings},
              {"config", json{{"paths", rep.n_paths},
                              {"dt", rep.dt},
                              {"t", rep.t},
                              {"seed", rep.master_seed}}}};
}

// ---------------------------------------------------------------------------
// CSV

inline void write_riccati_csv(std::ostream& out, const RiccatiSolution& sol) {
  const auto n = sol.u.size();
  out << "t,re_phi,im_phi";
  for (Eigen::Index k = 0; k < n; ++k)
    out << ",re_psi_" << (k + 1) << ",im_psi_" << (k + 1);
  out << ",cert_re_phi,cert_max_re_psi_I,cert_max_abs_re_psi_J,cert_psi_I_norm_sq,cert_gronwall\n";
  for (std::size_t m = 0; m < sol.grid.size(); ++m) {
    out << fmt_double(sol.grid[m]) << ',' << fmt_double(sol.phi[m].real()) << ','
        << fmt_double(sol.phi[m].imag());
    for (Eigen::Index k = 0; k < n; ++k)
      out << ',' << fmt_double(sol.psi[m][k].real()) << ',' << fmt_double(sol.psi[m][k].imag());
    const CertRecord& c = sol.certificates[m];
    out << ',' << fmt_double(c.re_phi) << ',' << fmt_double(c.max_re_psi_I) << ','
        << fmt_double(c.max_abs_re_psi_J) << ',' << fmt_double(c.psi_I_norm_sq) << ','
        << fmt_double(c.gronwall) << '\n';
  }
}

inline void write_paths_csv(std::ostream& out, const PathEnsemble& ens) {
  int n = ens.states.empty() || ens.states.front().empty()
              ? 0
              : static_cast<int>(ens.states.front().front().size());
  out << "path_id,t";
  for (int k = 1; k <= n; ++k) out << ",x_" << k;
  out << '\n';
  for (long path = 0; path < ens.n_paths(); ++path) {
    const auto& states = ens.states[static_cast<std::size_t>(path)];
    for (std::size_t ti = 0; ti < states.size(); ++ti) {
      out << path << ',' << fmt_double(ens.times[ti]);
      for (int k = 0; k < n; ++k) out << ',' << fmt_double(states[ti][k]);
      out << '\n';
    }
  }
}

inline json ensemble_summary_to_json(const PathEnsemble& ens, double wall_seconds) {
  int n = ens.states.empty() || ens.states.front().empty()
              ? 0
              : static_cast<int>(ens.states.front().front().size());
  json mean = json::array(), var = json::array();
  for (int k = 0; k < n; ++k) {
    double m = 0.0;
    for (long p = 0; p < ens.n_paths(); ++p) m += ens.terminal(p)[k];
    m /= static_cast<double>(ens.n_paths());
    double v = 0.0;
    for (long p = 0; p < ens.n_paths(); ++p) {
      double d = ens.terminal(p)[k] - m;
      v += d * d;
    }
    v = ens.n_paths() > 1 ? v / static_cast<double>(ens.n_paths() - 1) : 0.0;
    mean.push_back(m);
    var.push_back(v);
  }
  return json{{"n_paths", ens.n_paths()},
              {"t_end", ens.config.t_end},
              {"dt", ens.config.dt},
              {"seed", ens.config.master_seed},
              {"terminal_mean", std::move(mean)},
              {"terminal_variance", std::move(var)},
              {"cone", json{{"clamp_count", ens.clamp_count},
                            {"max_negative_excursion", ens.max_negative_excursion}}},
              {"wall_seconds", wall_seconds}};
}

}  // namespace affine_hilbert
