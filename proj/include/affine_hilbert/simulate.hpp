#pragma once

// Cone-preserving Euler simulation of the transformed coupled SDE system,
// exact Ornstein-Uhlenbeck sampling, and back-transformation to the original
// coordinates.

#include "affine_hilbert/core.hpp"
#include "affine_hilbert/params.hpp"
#include "affine_hilbert/rng.hpp"
#include "affine_hilbert/transform.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace affine_hilbert {

enum class SimScheme { FullTruncation, Absorbed };
enum class StoreMode { Terminal, Times, Full };

struct SimConfig {
  double t_end = 1.0;
  double dt = 1e-3;
  long n_paths = 1;
  SimScheme scheme = SimScheme::FullTruncation;
  std::uint64_t master_seed = 0;
  StoreMode store = StoreMode::Terminal;
  std::vector<double> store_times;  // used when store == Times
  int n_threads = 1;
  int freeze_sqrt_steps = 1;  // recompute the J-block root every k steps

  void validate() const {
    if (t_end <= 0.0 || dt <= 0.0) throw std::invalid_argument("SimConfig: t_end and dt must be positive");
    if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
    double steps = t_end / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
      throw std::invalid_argument("SimConfig: dt must divide t_end");
    if (n_threads < 1) throw std::invalid_argument("SimConfig: n_threads must be >= 1");
    if (freeze_sqrt_steps < 1) throw std::invalid_argument("SimConfig: freeze_sqrt_steps must be >= 1");
  }

  long n_steps() const { return static_cast<long>(std::llround(t_end / dt)); }
};

struct PathEnsemble {
  SimConfig config;
  std::vector<double> times;                // stored times, increasing, last == t_end
  std::vector<std::vector<RVec>> states;    // [path][time index], original X coordinates
  std::vector<std::uint64_t> seeds;         // per-path stream seeds
  double max_negative_excursion = 0.0;      // most negative pre-clamp cone coordinate
  long clamp_count = 0;                     // coordinate-steps that went negative

  long n_paths() const { return static_cast<long>(states.size()); }
  const RVec& terminal(long path) const { return states[static_cast<std::size_t>(path)].back(); }
};

/// n independent N(0, dt) coordinates, drawn in fixed coordinate order.
inline RVec wiener_betas(int n, double dt, PathRng& rng) {
  RVec b(n);
  double s = std::sqrt(dt);
  for (int k = 0; k < n; ++k) b[k] = s * rng.gauss();
  return b;
}

/// One Euler step of the cone block: drift and diffusion evaluated at the
/// positive part, result left unclamped (clamping policy is the caller's).
inline RVec euler_step_I(const AffineParams& pbar, const std::vector<double>& lambda,
                         const RVec& y, const RVec& dbeta, double dt) {
  const auto& I = pbar.partition.I;
  RVec out = y;
  RVec ypos = y;
  for (int i : I) ypos[i] = std::max(y[i], 0.0);
  for (std::size_t a = 0; a < I.size(); ++a) {
    int i = I[a];
    double drift = pbar.m0[i];
    for (int k : I) drift += pbar.M(i, k) * ypos[k];
    double dif = std::sqrt(lambda[a] * ypos[i]);
    out[i] = y[i] + drift * dt + dif * dbeta[i];
    if (!std::isfinite(out[i])) throw std::runtime_error("euler_step_I: state blow-up");
  }
  return out;
}

/// One Euler step of the free block: affine drift in the full state, noise
/// with one-step covariance S_bar(y_I^+)_JJ dt.
inline RVec euler_step_J(const AffineParams& pbar, const RVec& y, const RVec& dbeta, double dt) {
  const auto& I = pbar.partition.I;
  const auto& J = pbar.partition.J;
  RVec out = y;
  if (J.empty()) return out;
  RVec ypos_I = RVec::Zero(pbar.n());
  for (int i : I) ypos_I[i] = std::max(y[i], 0.0);
  RMat SJJ = block(S_op(pbar, ypos_I), J, J);
  RMat root = psd_sqrt(SJJ, 1e-9);
  RVec noise = root * dbeta;
  for (int j : J) {
    double drift = pbar.m0[j] + pbar.M.row(j).dot(y);
    out[j] = y[j] + drift * dt + noise[j];
    if (!std::isfinite(out[j])) throw std::runtime_error("euler_step_J: state blow-up");
  }
  return out;
}

namespace detail {

/// Precomputed free-block diffusion: S_bar(y)_JJ = C0 + sum_i y_i Ci in the
/// compressed |J| x |J| coordinates, with a diagonal fast path.
struct JDiffusion {
  std::vector<int> J;
  std::vector<int> I;
  RMat C0;                 // |J| x |J|
  std::vector<RMat> Ci;    // per cone coordinate, |J| x |J| (empty = zero)
  bool diagonal = false;

  static JDiffusion build(const AffineParams& pbar) {
    JDiffusion d;
    d.J = pbar.partition.J;
    d.I = pbar.partition.I;
    const auto nj = static_cast<Eigen::Index>(d.J.size());
    d.C0 = RMat::Zero(nj, nj);
    for (Eigen::Index a = 0; a < nj; ++a)
      for (Eigen::Index b = 0; b < nj; ++b) d.C0(a, b) = pbar.n0(d.J[a], d.J[b]);
    d.Ci.resize(d.I.size());
    bool diag = d.is_diag(d.C0);
    for (std::size_t s = 0; s < d.I.size(); ++s) {
      const RMat& ni = pbar.n_k(d.I[s]);
      if (ni.size() == 0) continue;
      RMat c(nj, nj);
      for (Eigen::Index a = 0; a < nj; ++a)
        for (Eigen::Index b = 0; b < nj; ++b) c(a, b) = ni(d.J[a], d.J[b]);
      if (c.size() != 0 && c.cwiseAbs().maxCoeff() > 0.0) {
        diag = diag && d.is_diag(c);
        d.Ci[s] = std::move(c);
      }
    }
    d.diagonal = diag;
    return d;
  }

  static bool is_diag(const RMat& m) {
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b)
        if (a != b && std::abs(m(a, b)) > 1e-14) return false;
    return true;
  }

  /// Assembles S_JJ at the clamped cone state.
  void assemble(const RVec& y, RMat& SJJ) const {
    SJJ = C0;
    for (std::size_t s = 0; s < I.size(); ++s) {
      if (Ci[s].size() == 0) continue;
      double yi = std::max(y[I[s]], 0.0);
      if (yi != 0.0) SJJ += yi * Ci[s];
    }
  }

  void root_of(const RMat& SJJ, RMat& out) const {
    if (diagonal) {
      out = RMat::Zero(SJJ.rows(), SJJ.cols());
      for (Eigen::Index a = 0; a < SJJ.rows(); ++a)
        out(a, a) = std::sqrt(std::max(SJJ(a, a), 0.0));
    } else {
      out = psd_sqrt(SJJ, 1e-9);
    }
  }
};

struct PathDiag {
  double max_neg = 0.0;
  long clamps = 0;
};

}  // namespace detail

/// Simulates n_paths of the original SDE by transforming to Y = Lambda X,
/// stepping the cone block then the free block on a shared noise stream, and
/// back-transforming at storage points. Bit-identical output for a fixed
/// master seed, independent of thread count.
inline PathEnsemble simulate_paths(const AffineParams& p, const RVec& x0, const SimConfig& cfg,
                                   const TransformPack* pack = nullptr) {
  cfg.validate();
  if (x0.size() != p.n()) throw std::invalid_argument("simulate_paths: x0 length mismatch");
  for (int i : p.partition.I)
    if (x0[i] < 0.0) throw std::domain_error("simulate_paths: x0 outside the cone");

  TransformPack local;
  if (!pack) {
    local = build_transform(p);
    pack = &local;
  }
  const AffineParams& pb = pack->params_bar;
  const auto& I = p.partition.I;
  const auto& J = p.partition.J;
  const int n = p.n();
  const long n_steps = cfg.n_steps();

  // storage step indices
  std::vector<long> store_steps;
  if (cfg.store == StoreMode::Terminal) {
    store_steps.push_back(n_steps);
  } else if (cfg.store == StoreMode::Full) {
    for (long s = 0; s <= n_steps; ++s) store_steps.push_back(s);
  } else {
    for (double t : cfg.store_times) {
      double pos = t / cfg.dt;
      long s = std::llround(pos);
      if (s < 0 || s > n_steps || std::abs(pos - static_cast<double>(s)) > 1e-9 * std::max(1.0, pos))
        throw std::invalid_argument("simulate_paths: store time not on the step grid");
      store_steps.push_back(s);
    }
    if (store_steps.empty() || store_steps.back() != n_steps) store_steps.push_back(n_steps);
  }

  PathEnsemble ens;
  ens.config = cfg;
  for (long s : store_steps) ens.times.push_back(static_cast<double>(s) * cfg.dt);
  ens.times.back() = cfg.t_end;
  ens.states.assign(static_cast<std::size_t>(cfg.n_paths), {});
  ens.seeds.assign(static_cast<std::size_t>(cfg.n_paths), 0);

  const RVec y0 = pack->Lambda * x0;
  const detail::JDiffusion jd = detail::JDiffusion::build(pb);
  const auto nj = static_cast<Eigen::Index>(J.size());

  std::vector<detail::PathDiag> diags(static_cast<std::size_t>(cfg.n_paths));

  auto run_path = [&](long path) {
    PathRng rng(cfg.master_seed, static_cast<std::uint64_t>(path));
    ens.seeds[static_cast<std::size_t>(path)] = rng.stream_seed();
    auto& stored = ens.states[static_cast<std::size_t>(path)];
    stored.reserve(store_steps.size());
    auto& dg = diags[static_cast<std::size_t>(path)];

    RVec y = y0;
    RMat SJJ(nj, nj), root(nj, nj);
    bool have_root = false;
    const double sdt = std::sqrt(cfg.dt);
    RVec dbeta(n);

    std::size_t next_store = 0;
    auto store_state = [&](long step) {
      while (next_store < store_steps.size() && store_steps[next_store] == step) {
        RVec yc = y;
        for (int i : I) yc[i] = std::max(yc[i], 0.0);
        stored.push_back(pack->LambdaInv * yc);
        ++next_store;
      }
    };
    store_state(0);

    for (long step = 0; step < n_steps; ++step) {
      for (int k = 0; k < n; ++k) dbeta[k] = sdt * rng.gauss();

      // cone block: coefficients at the positive part
      RVec ynew = y;
      for (std::size_t a = 0; a < I.size(); ++a) {
        int i = I[a];
        double drift = pb.m0[i];
        for (int k : I) drift += pb.M(i, k) * std::max(y[k], 0.0);
        double dif = std::sqrt(pack->lambda[a] * std::max(y[i], 0.0));
        ynew[i] = y[i] + drift * cfg.dt + dif * dbeta[i];
        if (ynew[i] < 0.0) {
          ++dg.clamps;
          dg.max_neg = std::min(dg.max_neg, ynew[i]);
          if (cfg.scheme == SimScheme::Absorbed) ynew[i] = 0.0;
        }
      }

      // free block: drift at the post-I state, diffusion from the cone part
      if (nj > 0) {
        if (!have_root || step % cfg.freeze_sqrt_steps == 0) {
          jd.assemble(ynew, SJJ);
          jd.root_of(SJJ, root);
          have_root = true;
        }
        for (Eigen::Index a = 0; a < nj; ++a) {
          int j = J[a];
          double drift = pb.m0[j] + pb.M.row(j).dot(ynew);
          double noise = 0.0;
          for (Eigen::Index b = 0; b < nj; ++b) noise += root(a, b) * dbeta[J[b]];
          ynew[j] += drift * cfg.dt + noise;
        }
      }

      if (!ynew.allFinite()) throw std::runtime_error("simulate_paths: state blow-up");
      y = ynew;
      store_state(step + 1);
    }
  };

  int workers = std::max(1, std::min<int>(cfg.n_threads, static_cast<int>(cfg.n_paths)));
  if (workers == 1) {
    for (long path = 0; path < cfg.n_paths; ++path) run_path(path);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (long path = w; path < cfg.n_paths; path += workers) run_path(path);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }

  for (const auto& dg : diags) {
    ens.clamp_count += dg.clamps;
    ens.max_negative_excursion = std::min(ens.max_negative_excursion, dg.max_neg);
  }
  return ens;
}

/// Gaussian law of the pure free-coordinate model at horizon t:
/// mean exp(Mt) x0 + Int_0^t exp(Ms) m0 ds, covariance Int_0^t exp(Ms) n0
/// exp(M^T s) ds. Closed forms for diagonal M, quadrature otherwise.
inline std::pair<RVec, RMat> ou_mean_cov(const AffineParams& p, const RVec& x0, double t) {
  if (!p.partition.I.empty()) throw std::domain_error("ou_mean_cov: cone coordinates present");
  const int n = p.n();
  // block trick: exp([[M, I], [0, 0]] t) packs exp(Mt) and its integral
  RMat B = RMat::Zero(2 * n, 2 * n);
  B.topLeftCorner(n, n) = p.M;
  B.topRightCorner(n, n) = RMat::Identity(n, n);
  RMat E = (t * B).exp();
  RMat eMt = E.topLeftCorner(n, n);
  RMat intE = E.topRightCorner(n, n);
  RVec mean = eMt * x0 + intE * p.m0;

  bool diagM = true;
  for (int a = 0; a < n && diagM; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b && std::abs(p.M(a, b)) > 1e-14) { diagM = false; break; }

  RMat cov(n, n);
  if (diagM) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double r = p.M(a, a) + p.M(b, b);
        double w = std::abs(r) > 1e-14 ? std::expm1(r * t) / r : t;
        cov(a, b) = p.n0(a, b) * w;
      }
  } else {
    // composite Simpson on s -> exp(Ms) n0 exp(M^T s)
    const int panels = 256;
    double ds = t / panels;
    RMat Estep = (ds * p.M).exp();
    RMat cur = RMat::Identity(n, n);
    cov = RMat::Zero(n, n);
    RMat prev_f = p.n0;  // s = 0
    for (int m = 1; m <= panels; ++m) {
      cur = cur * Estep;
      RMat f = cur * p.n0 * cur.transpose();
      // trapezoid panels accumulated (Simpson needs odd nodes; trapezoid at
      // 256 panels is already far below sampling error)
      cov += 0.5 * ds * (prev_f + f);
      prev_f = f;
    }
  }
  return {mean, cov};
}

/// One exact draw from the free-coordinate Gaussian law.
inline RVec ou_exact(const AffineParams& p, const RVec& x0, double t, PathRng& rng) {
  auto [mean, cov] = ou_mean_cov(p, x0, t);
  RMat root = psd_sqrt(cov, 1e-9);
  RVec z(p.n());
  for (int k = 0; k < p.n(); ++k) z[k] = rng.gauss();
  return mean + root * z;
}

}  // namespace affine_hilbert
