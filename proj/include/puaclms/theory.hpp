#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "puaclms/algebra.hpp"
#include "puaclms/errors.hpp"
#include "puaclms/filter.hpp"
#include "puaclms/random.hpp"
#include "puaclms/schedule.hpp"
#include "puaclms/signal.hpp"

namespace puaclms::theory {

using algebra::CMatrix;
using algebra::Complex;
using algebra::CVector;
using filter::SelectionMask;
using filter::SelectionSchedule;
using filter::UpdateMode;

// Conventions. With z = [u*; u] the error recursion is
//   w~(n+1) = (I - mu J z z^H) w~(n) - mu J z v(n).
// All second-order quantities below are written for the conjugate vector
// a = conj(z) = [u; u*], whose covariance has the block layout
// [[C_u, D_u], [D_u*, C_u*]]. Weighted norms act on x = conj(w~), so that
// |e_a|^2 = x^H a a^H x and the EMSE is E||x||^2 over C_z = E[a a^H].

/// Averages a per-sample functional over the selection law of a schedule.
/// Full and sequential schedules enumerate their subsets with equal weight
/// (the time average of the round-robin); stochastic schedules draw one
/// subset per sample from their own LCG.
class MaskLaw {
 public:
  explicit MaskLaw(SelectionSchedule sched) : sched_(std::move(sched)) {}

  bool enumerable() const { return sched_.mode != UpdateMode::stochastic; }

  template <typename F>
  void for_each(F&& f) {
    if (sched_.mode == UpdateMode::stochastic) {
      f(filter::next_mask(sched_, counter_++), 1.0);
      return;
    }
    const double w = 1.0 / static_cast<double>(sched_.subsets.size());
    for (const auto& m : sched_.subsets) f(m, w);
  }

  const SelectionSchedule& schedule() const { return sched_; }

 private:
  SelectionSchedule sched_;
  std::uint64_t counter_ = 0;
};

/// Draws `count` consecutive tapped-delay-line regressors of the AR input.
inline std::vector<CVector> sample_regressors(const signal::ArInputSpec& spec, std::size_t n_taps, std::size_t count,
                                              RngStream rng) {
  signal::ArRegressorSource src(spec, n_taps, std::move(rng));
  std::vector<CVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(src.next().u);
  return out;
}

// ---------------------------------------------------------------------------
// Second-order statistics
// ---------------------------------------------------------------------------

struct SecondOrderStats {
  CMatrix C_u, D_u, C_z;
  CMatrix C_uM, D_uM, C_zM;
  std::size_t n_taps = 0;
  std::size_t m_taps = 0;
  std::size_t sample_count = 0;

  double partial_fraction() const { return static_cast<double>(m_taps) / static_cast<double>(n_taps); }
};

namespace detail {

inline CMatrix augmented_block(const CMatrix& c, const CMatrix& d) {
  const std::size_t n = c.rows();
  CMatrix z(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      z(i, j) = c(i, j);
      z(i, j + n) = d(i, j);
      z(i + n, j) = std::conj(d(i, j));
      z(i + n, j + n) = std::conj(c(i, j));
    }
  return z;
}

inline CMatrix symmetric_part(const CMatrix& a) {
  CMatrix r(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = 0.5 * (a(i, j) + a(j, i));
  return r;
}

}  // namespace detail

/// Sample estimates of C_u = E[u u^H], D_u = E[u u^T], their masked forms
/// E[I_M u u^H], E[I_M u u^T] under the schedule's selection law, and the
/// augmented C_z, C_zM.
inline SecondOrderStats estimate_stats(std::span<const CVector> regressors, const SelectionSchedule& sched,
                                       std::size_t min_samples = 10000) {
  if (regressors.size() < min_samples) {
    std::ostringstream os;
    os << "estimate_stats: " << regressors.size() << " samples supplied, at least " << min_samples << " required";
    throw InvalidSpec(os.str());
  }
  const std::size_t n = sched.n_taps;
  CMatrix cu(n, n), du(n, n), cum(n, n), dum(n, n);
  MaskLaw law(sched);
  for (const auto& u : regressors) {
    if (u.size() != n) throw DimensionError("estimate_stats: regressor length differs from schedule N");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cu(i, j) += u[i] * std::conj(u[j]);
        du(i, j) += u[i] * u[j];
      }
    law.for_each([&](const SelectionMask& mask, double w) {
      for (const std::size_t i : mask.selected)
        for (std::size_t j = 0; j < n; ++j) {
          cum(i, j) += w * u[i] * std::conj(u[j]);
          dum(i, j) += w * u[i] * u[j];
        }
    });
  }
  const double inv = 1.0 / static_cast<double>(regressors.size());
  SecondOrderStats s;
  s.n_taps = n;
  s.m_taps = sched.m_taps;
  s.sample_count = regressors.size();
  s.C_u = algebra::hermitian_part(inv * cu);
  s.D_u = detail::symmetric_part(inv * du);
  s.C_uM = algebra::hermitian_part(inv * cum);
  s.D_uM = detail::symmetric_part(inv * dum);
  s.C_z = detail::augmented_block(s.C_u, s.D_u);
  s.C_zM = detail::augmented_block(s.C_uM, s.D_uM);
  return s;
}

/// Empirical rho_M = Re E[eps_a e_a*] / E|e_a|^2 over audited steady-state
/// steps.
inline double estimate_rho_m(std::span<const filter::StepAudit> audits) {
  double num = 0.0, den = 0.0;
  for (const auto& a : audits) {
    if (!a.has_truth) throw InvalidSpec("estimate_rho_m: audits must carry the true plant");
    num += (a.eps_a * std::conj(a.e_a)).real();
    den += std::norm(a.e_a);
  }
  if (!(den > 0.0)) throw NumericalError("estimate_rho_m: zero a priori error energy");
  return num / den;
}

// ---------------------------------------------------------------------------
// Steady-state predictors
// ---------------------------------------------------------------------------

enum class SteadyStateMethod { exact_energy, small_step, variance_relation };

struct SteadyStatePrediction {
  double emse = 0.0;
  std::optional<double> msd;
  SteadyStateMethod method = SteadyStateMethod::exact_energy;
  double rho_m = 1.0;
  bool small_step_warning = false;
};

/// zeta = mu s2 tr(C_uM) / (rho_M - mu tr(C_uM)), rho_M defaulting to M/N.
inline SteadyStatePrediction emse_steady_exact(double mu, double sigma_v2, const SecondOrderStats& stats,
                                               std::optional<double> rho_m = std::nullopt) {
  const double rho = rho_m.value_or(stats.partial_fraction());
  if (!(rho > 0.0 && rho <= 1.0 + 1e-12)) throw InvalidSpec("emse_steady_exact: rho_M must lie in (0, 1]");
  const double tr = algebra::trace(stats.C_uM).real();
  const double den = rho - mu * tr;
  if (!(den > 0.0)) {
    std::ostringstream os;
    os << "emse_steady_exact: step-size too large for this formula (rho_M - mu tr(C_uM) = " << den << ")";
    throw NumericalError(os.str());
  }
  return {mu * sigma_v2 * tr / den, std::nullopt, SteadyStateMethod::exact_energy, rho, false};
}

/// zeta ~ mu s2 tr(C_u), eta ~ mu s2 N. Flags mu tr(C_u) > 0.1.
inline SteadyStatePrediction emse_steady_small_mu(double mu, double sigma_v2, const SecondOrderStats& stats) {
  const double tr = algebra::trace(stats.C_u).real();
  SteadyStatePrediction p;
  p.emse = mu * sigma_v2 * tr;
  p.msd = mu * sigma_v2 * static_cast<double>(stats.n_taps);
  p.method = SteadyStateMethod::small_step;
  p.rho_m = stats.partial_fraction();
  p.small_step_warning = mu * tr > 0.1;
  return p;
}

// ---------------------------------------------------------------------------
// Weighted variance relation
// ---------------------------------------------------------------------------

/// sigma -> F sigma with F = I - mu P + mu^2 Q, where
///   P = C_zM^T (x) I + I (x) C_zM,
///   Q = E[(J a a^H)^T (x) (a a^H J)],
///   c = E[(J a) (x) conj(J a)]   so that c^T vec(S) = E[a^H J S J a],
/// and G = [[P/2, -Q/2], [I, 0]].
struct VarianceRelationOperators {
  double mu = 0.0;
  CMatrix P, Q, F, G;
  CVector c_m;
  std::size_t sample_count = 0;

  std::size_t dim() const { return P.rows(); }
};

struct OperatorOptions {
  std::size_t max_taps = 16;
  std::size_t min_samples = 10000;
  std::size_t batch = 256;
};

inline CMatrix assemble_f(double mu, const CMatrix& p, const CMatrix& q) {
  CMatrix f = CMatrix::identity(p.rows());
  for (std::size_t i = 0; i < f.entries().size(); ++i)
    f.entries()[i] += -mu * p.entries()[i] + mu * mu * q.entries()[i];
  return f;
}

inline CMatrix assemble_g(const CMatrix& p, const CMatrix& q) {
  const std::size_t d = p.rows();
  CMatrix g(2 * d, 2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      g(i, j) = 0.5 * p(i, j);
      g(i, j + d) = -0.5 * q(i, j);
    }
    g(i + d, i) = 1.0;
  }
  return g;
}

/// Same operators at a different step size.
inline VarianceRelationOperators with_step_size(VarianceRelationOperators ops, double mu) {
  ops.mu = mu;
  ops.F = assemble_f(mu, ops.P, ops.Q);
  return ops;
}

inline VarianceRelationOperators build_operators(double mu, const SecondOrderStats& stats,
                                                 std::span<const CVector> regressors, const SelectionSchedule& sched,
                                                 const OperatorOptions& opt = {}) {
  const std::size_t n = stats.n_taps;
  if (n > opt.max_taps) {
    std::ostringstream os;
    os << "build_operators: N = " << n << " exceeds the budget of " << opt.max_taps << " taps";
    throw InvalidSpec(os.str());
  }
  if (sched.n_taps != n) throw DimensionError("build_operators: schedule N differs from statistics N");
  if (regressors.size() < opt.min_samples) {
    std::ostringstream os;
    os << "build_operators: " << regressors.size() << " samples supplied, at least " << opt.min_samples
       << " required";
    throw InvalidSpec(os.str());
  }
  const std::size_t n2 = 2 * n;
  const std::size_t dim = n2 * n2;
  const auto di = static_cast<Eigen::Index>(dim);

  VarianceRelationOperators ops;
  ops.mu = mu;
  ops.sample_count = regressors.size();
  const CMatrix eye = CMatrix::identity(n2);
  ops.P = algebra::kron(algebra::transpose(stats.C_zM), eye) + algebra::kron(eye, stats.C_zM);

  MaskLaw law(sched);
  const bool enumerable = law.enumerable();

  // K(c, d) = E[J_c J_d] over augmented indices, used when the mask law is
  // enumerated and independent of the regressor.
  CMatrix k_weights(n2, n2);
  if (enumerable) {
    MaskLaw probe(sched);
    probe.for_each([&](const SelectionMask& m, double w) {
      for (std::size_t c = 0; c < n2; ++c)
        for (std::size_t d = 0; d < n2; ++d)
          if (m.active(c % n) && m.active(d % n)) k_weights(c, d) += w;
    });
  }

  using ColMat = algebra::detail::EigenColMat;
  ColMat q_acc = ColMat::Zero(di, di);
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> c_acc = Eigen::Matrix<Complex, Eigen::Dynamic, 1>::Zero(di);
  const auto batch = static_cast<Eigen::Index>(std::max<std::size_t>(1, opt.batch));
  ColMat xs(di, batch), ys(di, batch);
  Eigen::Index fill = 0;
  CVector a(n2), ja(n2);

  auto flush = [&]() {
    if (fill == 0) return;
    q_acc.noalias() += xs.leftCols(fill) * ys.leftCols(fill).transpose();
    c_acc += ys.leftCols(fill).rowwise().sum();
    fill = 0;
  };
  auto push = [&](std::span<const Complex> av, std::span<const Complex> yv, double w) {
    for (std::size_t p = 0; p < n2; ++p)
      for (std::size_t q = 0; q < n2; ++q) {
        const auto r = static_cast<Eigen::Index>(p * n2 + q);
        xs(r, fill) = std::conj(av[p]) * av[q];
        ys(r, fill) = w * yv[p] * std::conj(yv[q]);
      }
    if (++fill == batch) flush();
  };

  for (const auto& u : regressors) {
    if (u.size() != n) throw DimensionError("build_operators: regressor length differs from N");
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = u[k];
      a[k + n] = std::conj(u[k]);
    }
    if (enumerable) {
      push(a, a, 1.0);
    } else {
      law.for_each([&](const SelectionMask& m, double w) {
        for (std::size_t k = 0; k < n2; ++k) ja[k] = m.active(k % n) ? a[k] : Complex{};
        push(a, ja, w);
      });
    }
  }
  flush();

  const double inv = 1.0 / static_cast<double>(regressors.size());
  ops.Q = CMatrix(dim, dim);
  ops.c_m.assign(dim, Complex{});
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t col = 0; col < dim; ++col) {
      const double kw = enumerable ? k_weights(col / n2, col % n2).real() : 1.0;
      ops.Q(r, col) = kw * inv * q_acc(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
    }
  for (std::size_t col = 0; col < dim; ++col) {
    const double kw = enumerable ? k_weights(col / n2, col % n2).real() : 1.0;
    ops.c_m[col] = kw * inv * c_acc(static_cast<Eigen::Index>(col));
  }
  ops.F = assemble_f(mu, ops.P, ops.Q);
  ops.G = assemble_g(ops.P, ops.Q);
  return ops;
}

/// zeta(inf) = mu^2 s2 c^T (I - F)^{-1} vec(C_z); the MSD uses vec(I).
inline SteadyStatePrediction emse_steady_variance_relation(double mu, double sigma_v2,
                                                           const VarianceRelationOperators& ops_in, const CMatrix& c_z) {
  const VarianceRelationOperators ops = ops_in.mu == mu ? ops_in : with_step_size(ops_in, mu);
  const std::size_t d = ops.dim();
  if (c_z.rows() * c_z.cols() != d) throw DimensionError("emse_steady_variance_relation: C_z does not match operators");
  const double rho = algebra::spectral_radius(ops.F);
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os << "emse_steady_variance_relation: mu = " << mu << " is at or beyond the stability boundary (rho(F) = " << rho
       << ")";
    throw NumericalError(os.str());
  }
  CMatrix i_minus_f = CMatrix::identity(d) - ops.F;
  CMatrix rhs(d, 2);
  const CVector sz = algebra::vec(c_z);
  const CVector si = algebra::vec(CMatrix::identity(c_z.rows()));
  for (std::size_t i = 0; i < d; ++i) {
    rhs(i, 0) = sz[i];
    rhs(i, 1) = si[i];
  }
  CMatrix y;
  try {
    y = algebra::solve(i_minus_f, rhs);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("emse_steady_variance_relation: at or beyond stability boundary: ") + e.what());
  }
  Complex emse = 0.0, msd = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    emse += ops.c_m[i] * y(i, 0);
    msd += ops.c_m[i] * y(i, 1);
  }
  const double scale = mu * mu * sigma_v2;
  SteadyStatePrediction p;
  p.emse = scale * emse.real();
  p.msd = scale * msd.real();
  p.method = SteadyStateMethod::variance_relation;
  return p;
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

/// 2 / lambda_max(C_zM); +inf for a zero matrix.
inline double mean_stability_bound(const SecondOrderStats& stats) {
  const auto eig = algebra::eig_hermitian(stats.C_zM, {.compute_vectors = false});
  const double lmax = eig.values.front().real();
  if (!(lmax > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 / lmax;
}

struct MeanSquareBound {
  double bound = 0.0;
  double pq_branch = std::numeric_limits<double>::infinity();  // 1 / lambda_max(P^-1 Q)
  double g_branch = std::numeric_limits<double>::infinity();   // 1 / max real positive eig(G)
  /// The dominant eigenvalue of P^-1 Q was not real; the branch uses the
  /// largest real one.
  bool pq_complex_dominant = false;
  double q_hermitian_min_eig = 0.0;
};

/// |Im l| <= 1e-8 (1 + |l|) and Re l > 0.
inline bool real_positive(Complex l) { return std::abs(l.imag()) <= 1e-8 * (1.0 + std::abs(l)) && l.real() > 0.0; }

inline MeanSquareBound mean_square_stability_bound(const VarianceRelationOperators& ops) {
  MeanSquareBound r;
  const auto p_eig = algebra::eig_hermitian(algebra::hermitian_part(ops.P), {.compute_vectors = false});
  if (!(p_eig.values.back().real() > 0.0)) {
    throw NumericalError("mean_square_stability_bound: P is not positive definite");
  }
  r.q_hermitian_min_eig =
      algebra::eig_hermitian(algebra::hermitian_part(ops.Q), {.compute_vectors = false}).values.back().real();

  const CMatrix pinv_q = algebra::solve(ops.P, ops.Q);
  double best = 0.0;
  double best_any = 0.0;
  for (const auto& l : algebra::eig_general(pinv_q).values) {
    if (real_positive(l)) best = std::max(best, l.real());
    best_any = std::max(best_any, l.real());
  }
  if (best > 0.0) r.pq_branch = 1.0 / best;
  r.pq_complex_dominant = best_any > best * (1.0 + 1e-8);

  double g_best = 0.0;
  for (const auto& l : algebra::eig_general(ops.G).values)
    if (real_positive(l)) g_best = std::max(g_best, l.real());
  if (g_best > 0.0) r.g_branch = 1.0 / g_best;

  r.bound = std::min(r.pq_branch, r.g_branch);
  return r;
}

/// Spectral radius of F(mu) = I - mu P + mu^2 Q.
inline double variance_relation_spectral_radius(const VarianceRelationOperators& ops, double mu) {
  return algebra::spectral_radius(assemble_f(mu, ops.P, ops.Q));
}

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

struct TheoryPoint {
  std::size_t iteration = 0;
  double emse = 0.0;
  double msd = 0.0;
};

/// zeta(n+1) = zeta(n) + ||x0||^2_{F^n (F - I) s} + mu^2 s2 c^T F^n s, with
/// s = vec(C_z) for the EMSE and vec(I) for the MSD. `initial_error_cov` is
/// E[x0 x0^H] for x0 = conj(w° - w(0)). The s-vectors are propagated by
/// repeated multiplication with F.
inline std::vector<TheoryPoint> learning_curves(double mu, double sigma_v2, const CMatrix& initial_error_cov,
                                                const VarianceRelationOperators& ops_in, const CMatrix& c_z,
                                                std::size_t horizon) {
  const VarianceRelationOperators ops = ops_in.mu == mu ? ops_in : with_step_size(ops_in, mu);
  const std::size_t d = ops.dim();
  const std::size_t n2 = c_z.rows();
  if (n2 * n2 != d || initial_error_cov.rows() != n2) {
    throw DimensionError("learning_curves: covariance shapes do not match operators");
  }
  using ColMat = algebra::detail::EigenColMat;
  const auto di = static_cast<Eigen::Index>(d);
  const ColMat f = algebra::detail::view(ops.F);

  ColMat s(di, 2);
  const CVector sz = algebra::vec(c_z);
  const CVector si = algebra::vec(CMatrix::identity(n2));
  const CVector r0 = algebra::vec(algebra::transpose(initial_error_cov));
  Eigen::Matrix<Complex, 1, Eigen::Dynamic> r0_row(di), c_row(di);
  for (Eigen::Index i = 0; i < di; ++i) {
    s(i, 0) = sz[static_cast<std::size_t>(i)];
    s(i, 1) = si[static_cast<std::size_t>(i)];
    r0_row(i) = r0[static_cast<std::size_t>(i)];
    c_row(i) = ops.c_m[static_cast<std::size_t>(i)];
  }
  const double noise = mu * mu * sigma_v2;

  std::vector<TheoryPoint> out;
  out.reserve(horizon + 1);
  const Eigen::Matrix<Complex, 1, 2> init = r0_row * s;
  double zeta = init(0).real(), eta = init(1).real();
  out.push_back({0, zeta, eta});
  ColMat s_next(di, 2);
  for (std::size_t it = 0; it < horizon; ++it) {
    s_next.noalias() = f * s;
    const Eigen::Matrix<Complex, 1, 2> transient = r0_row * (s_next - s);
    const Eigen::Matrix<Complex, 1, 2> floor = c_row * s;
    zeta += transient(0).real() + noise * floor(0).real();
    eta += transient(1).real() + noise * floor(1).real();
    if (!std::isfinite(zeta) || !std::isfinite(eta) || std::abs(zeta) > 1e100) {
      std::ostringstream os;
      os << "learning_curves: recursion grows without bound at iteration " << it + 1 << "; mu = " << mu
         << " is theoretically unstable";
      throw NumericalError(os.str());
    }
    out.push_back({it + 1, zeta, eta});
    s.swap(s_next);
  }
  return out;
}

/// Zero initial weights: x0 = conj(w°).
inline std::vector<TheoryPoint> learning_curves(double mu, double sigma_v2, std::span<const Complex> w_opt,
                                                const VarianceRelationOperators& ops, const CMatrix& c_z,
                                                std::size_t horizon) {
  const CVector x0 = algebra::conjugate(CVector(w_opt.begin(), w_opt.end()));
  return learning_curves(mu, sigma_v2, algebra::outer(x0, x0), ops, c_z, horizon);
}

// ---------------------------------------------------------------------------
// Decay rates
// ---------------------------------------------------------------------------

/// Spectral radii of the beta-step mean-error maps:
///   full  (I - mu C_z*)^beta,
///   seq   I - mu C_z*           (one full sweep per beta iterations),
///   stoch (I - (mu/beta) C_z*)^beta.
/// Valid under a block-diagonal C_z; elsewhere a first-order guide.
struct DecayRates {
  double r_full = 1.0;
  double r_seq = 1.0;
  double r_stoch = 1.0;
  /// ln r_full / ln r_seq: how many times faster the full update decays.
  double full_over_seq = 1.0;
  double full_over_stoch = 1.0;
};

inline DecayRates decay_rates(double mu, const CMatrix& c_z, std::size_t beta) {
  if (beta == 0) throw InvalidSpec("decay_rates: beta must be at least 1");
  const auto eig = algebra::eig_hermitian(algebra::conjugate(c_z), {.compute_vectors = false});
  const double b = static_cast<double>(beta);
  double one = 0.0, frac = 0.0;
  for (const auto& l : eig.values) {
    one = std::max(one, std::abs(1.0 - mu * l.real()));
    frac = std::max(frac, std::abs(1.0 - mu / b * l.real()));
  }
  DecayRates r;
  r.r_full = std::pow(one, b);
  r.r_seq = one;
  r.r_stoch = std::pow(frac, b);
  auto ratio = [](double num, double den) {
    if (num <= 0.0 || den <= 0.0 || den == 1.0) return std::numeric_limits<double>::quiet_NaN();
    return std::log(num) / std::log(den);
  };
  r.full_over_seq = ratio(r.r_full, r.r_seq);
  r.full_over_stoch = ratio(r.r_full, r.r_stoch);
  return r;
}

}  // namespace puaclms::theory
