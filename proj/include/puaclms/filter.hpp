#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "puaclms/algebra.hpp"
#include "puaclms/arith.hpp"
#include "puaclms/errors.hpp"
#include "puaclms/schedule.hpp"
#include "puaclms/signal.hpp"

namespace puaclms::filter {

using algebra::Complex;
using algebra::CVector;
using signal::RegressorWindow;

/// Standard and conjugate taps; stacked form w = [h; g].
struct AugmentedWeights {
  CVector h;
  CVector g;

  static AugmentedWeights zeros(std::size_t n) { return {CVector(n), CVector(n)}; }

  static AugmentedWeights from_stacked(std::span<const Complex> w) {
    if (w.size() % 2 != 0) throw DimensionError("stacked weight vector must have even length");
    const std::size_t n = w.size() / 2;
    return {CVector(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n)),
            CVector(w.begin() + static_cast<std::ptrdiff_t>(n), w.end())};
  }

  std::size_t taps() const { return h.size(); }

  CVector stacked() const {
    CVector w(h);
    w.insert(w.end(), g.begin(), g.end());
    return w;
  }

  bool finite() const {
    for (const auto& x : h)
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    for (const auto& x : g)
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    return true;
  }

  friend bool operator==(const AugmentedWeights&, const AugmentedWeights&) = default;
};

/// w° - w, in stacked-pair form.
inline AugmentedWeights weight_error(const AugmentedWeights& truth, const AugmentedWeights& w) {
  AugmentedWeights d = truth;
  for (std::size_t k = 0; k < w.taps(); ++k) {
    d.h[k] -= w.h[k];
    d.g[k] -= w.g[k];
  }
  return d;
}

/// Per-iteration record. The a priori / a posteriori fields need the true
/// plant and are left at zero when it is not supplied.
struct StepAudit {
  Complex e{};      // d - y
  Complex e_a{};    // u^T h~ + u^H g~ with pre-update weights
  Complex eps_a{};  // e_a restricted to selected taps, pre-update
  Complex eps_p{};  // same, post-update
  double u_m_normsq = 0.0;
  std::uint64_t mult_count = 0;
  std::uint64_t add_count = 0;
  bool has_truth = false;
};

/// Divergence threshold on |e|.
inline constexpr double kDivergenceErrorMagnitude = 1e12;

/// y = u^T h + u^H g.
template <typename Arith>
Complex filter_output(const AugmentedWeights& w, std::span<const Complex> u, Arith& ar) {
  const std::size_t n = u.size();
  Complex yh = cmul(ar, u[0], w.h[0]);
  for (std::size_t k = 1; k < n; ++k) yh = cadd(ar, yh, cmul(ar, u[k], w.h[k]));
  Complex yg = cmul_conj(ar, w.g[0], u[0]);
  for (std::size_t k = 1; k < n; ++k) yg = cadd(ar, yg, cmul_conj(ar, w.g[k], u[k]));
  return cadd(ar, yh, yg);
}

inline Complex filter_output(const AugmentedWeights& w, const RegressorWindow& u) {
  if (u.size() != w.taps() || w.g.size() != w.taps() || u.size() == 0) {
    throw DimensionError("filter_output: regressor and weights differ in length");
  }
  FastArith ar;
  return filter_output(w, u.u, ar);
}

/// In-place partial-update ACLMS recursion:
///   h <- h + mu e (mask o u*),  g <- g + mu e (mask o u).
/// Returns e. Every real operation goes through `ar`, which is how the
/// counted path measures per-iteration cost.
template <typename Arith>
Complex adapt_in_place(AugmentedWeights& w, std::span<const Complex> u, Complex d, double mu,
                       const SelectionMask& mask, Arith& ar) {
  const Complex y = filter_output(w, u, ar);
  const Complex e = csub(ar, d, y);
  const Complex mue = rmul(ar, mu, e);
  for (const std::size_t k : mask.selected) {
    w.h[k] = cadd(ar, w.h[k], cmul_conj(ar, mue, u[k]));
    w.g[k] = cadd(ar, w.g[k], cmul(ar, mue, u[k]));
  }
  return e;
}

namespace detail {

inline Complex masked_error(const AugmentedWeights& err, std::span<const Complex> u, const SelectionMask* mask) {
  Complex s = 0.0;
  if (mask == nullptr) {
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * err.h[k] + std::conj(u[k]) * err.g[k];
  } else {
    for (const std::size_t k : mask->selected) s += u[k] * err.h[k] + std::conj(u[k]) * err.g[k];
  }
  return s;
}

inline void check_step_inputs(const AugmentedWeights& w, const RegressorWindow& u, double mu,
                              const SelectionMask& mask) {
  if (u.size() == 0 || u.size() != w.taps() || w.g.size() != w.taps() || mask.taps() != w.taps()) {
    throw DimensionError("pu_aclms_step: regressor, weights and mask differ in length");
  }
  if (!(mu > 0.0)) throw InvalidSpec("pu_aclms_step: step size must be positive");
}

}  // namespace detail

struct StepResult {
  AugmentedWeights next;
  StepAudit audit;
  bool diverged = false;
};

inline void fill_audit(StepAudit& a, const AugmentedWeights& before, const AugmentedWeights& after,
                       const RegressorWindow& u, double mu, const SelectionMask& mask, const AugmentedWeights& truth) {
  (void)mu;
  const AugmentedWeights err_before = weight_error(truth, before);
  const AugmentedWeights err_after = weight_error(truth, after);
  a.e_a = detail::masked_error(err_before, u.u, nullptr);
  a.eps_a = detail::masked_error(err_before, u.u, &mask);
  a.eps_p = detail::masked_error(err_after, u.u, &mask);
  double s = 0.0;
  for (const std::size_t k : mask.selected) s += std::norm(u.u[k]);
  a.u_m_normsq = s;
  a.has_truth = true;
}

/// One PU-ACLMS iteration. With `truth` supplied the audit also carries
/// e_a, eps_a and eps_p.
inline StepResult pu_aclms_step(const AugmentedWeights& w, const RegressorWindow& u, Complex d, double mu,
                                const SelectionMask& mask, const AugmentedWeights* truth = nullptr) {
  detail::check_step_inputs(w, u, mu, mask);
  StepResult r{w, {}, false};
  CountingArith ar;
  r.audit.e = adapt_in_place(r.next, u.u, d, mu, mask, ar);
  r.audit.mult_count = ar.mults;
  r.audit.add_count = ar.adds;
  if (truth != nullptr) fill_audit(r.audit, w, r.next, u, mu, mask, *truth);
  r.diverged = !r.next.finite() || !(std::abs(r.audit.e) <= kDivergenceErrorMagnitude);
  return r;
}

/// The same iteration written on the gathered M-long sub-vectors h_M, g_M,
/// u_M and scattered back.
inline AugmentedWeights pu_aclms_step_reduced(const AugmentedWeights& w, const RegressorWindow& u, Complex d,
                                              double mu, const SelectionMask& mask) {
  detail::check_step_inputs(w, u, mu, mask);
  const std::size_t m = mask.count();
  CVector h_m(m), g_m(m), u_m(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t k = mask.selected[j];
    h_m[j] = w.h[k];
    g_m[j] = w.g[k];
    u_m[j] = u.u[k];
  }
  const Complex e = d - filter_output(w, u);
  const Complex mue = mu * e;
  for (std::size_t j = 0; j < m; ++j) {
    h_m[j] += mue * std::conj(u_m[j]);
    g_m[j] += mue * u_m[j];
  }
  AugmentedWeights out = w;
  for (std::size_t j = 0; j < m; ++j) {
    out.h[mask.selected[j]] = h_m[j];
    out.g[mask.selected[j]] = g_m[j];
  }
  return out;
}

/// Residual of the partial-update energy balance
///   |h~'_M|^2 + |g~'_M|^2 + |eps_a|^2 / (2|u_M|^2)
///     = |h~_M|^2 + |g~_M|^2 + |eps_p|^2 / (2|u_M|^2),
/// evaluated on the selected sub-vectors. Empty when |u_M|^2 = 0, where
/// the relation is undefined.
struct EnergyAudit {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double relative() const {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    return scale > 0.0 ? residual / scale : residual;
  }
};

inline std::optional<EnergyAudit> energy_audit_check(const StepAudit& step, const AugmentedWeights& w_tilde_before,
                                                     const AugmentedWeights& w_tilde_after, const RegressorWindow& u,
                                                     const SelectionMask& mask) {
  double unorm = 0.0;
  for (const std::size_t k : mask.selected) unorm += std::norm(u.u[k]);
  if (!(unorm > 0.0)) return std::nullopt;
  const Complex eps_a = detail::masked_error(w_tilde_before, u.u, &mask);
  const Complex eps_p = detail::masked_error(w_tilde_after, u.u, &mask);
  (void)step;
  double before = 0.0, after = 0.0;
  for (const std::size_t k : mask.selected) {
    before += std::norm(w_tilde_before.h[k]) + std::norm(w_tilde_before.g[k]);
    after += std::norm(w_tilde_after.h[k]) + std::norm(w_tilde_after.g[k]);
  }
  EnergyAudit a;
  a.lhs = after + std::norm(eps_a) / (2.0 * unorm);
  a.rhs = before + std::norm(eps_p) / (2.0 * unorm);
  a.residual = std::abs(a.lhs - a.rhs);
  return a;
}

// ---------------------------------------------------------------------------
// Per-iteration cost
// ---------------------------------------------------------------------------

enum class Algorithm { aclms, sequential, stochastic };

struct OpCount {
  std::uint64_t real_mults = 0;
  std::uint64_t real_adds = 0;
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

/// Real multiplies and additions per iteration, complex-valued data.
inline OpCount complexity_count(Algorithm alg, std::uint64_t n, std::uint64_t m) {
  if (n == 0) throw InvalidSpec("complexity_count: N must be at least 1");
  switch (alg) {
    case Algorithm::aclms: return {16 * n + 2, 16 * n};
    case Algorithm::sequential:
      if (m < 1 || m > n) throw InvalidSpec("complexity_count: need 1 <= M <= N");
      return {8 * (n + m) + 2, 8 * (n + m)};
    case Algorithm::stochastic:
      if (m < 1 || m > n) throw InvalidSpec("complexity_count: need 1 <= M <= N");
      return {8 * (n + m) + 4, 8 * (n + m) + 2};
  }
  return {};
}

/// Executes one iteration (subset selection plus update) through the
/// counting arithmetic and reports what it actually performed.
inline OpCount counted_iteration(AugmentedWeights& w, std::span<const Complex> u, Complex d, double mu,
                                 SelectionSchedule& sched, std::uint64_t n) {
  CountingArith ar;
  const SelectionMask& mask = next_mask(sched, n, ar);
  adapt_in_place(w, u, d, mu, mask, ar);
  return {ar.mults, ar.adds};
}

// ---------------------------------------------------------------------------
// Stateful filter
// ---------------------------------------------------------------------------

/// Owns its weights and schedule; one instance per trial.
class PuAclmsFilter {
 public:
  PuAclmsFilter(AugmentedWeights initial, SelectionSchedule schedule, double mu)
      : w_(std::move(initial)), sched_(std::move(schedule)), mu_(mu) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidSpec("step size must be finite and nonnegative");
    if (sched_.n_taps != w_.taps()) throw DimensionError("schedule and weights differ in length");
  }

  /// Adapts on (u, d); returns e. Sets diverged() on non-finite weights or
  /// |e| > 1e12.
  Complex adapt(std::span<const Complex> u, Complex d) {
    FastArith ar;
    const SelectionMask& mask = next_mask(sched_, iteration_, ar);
    const Complex e = adapt_in_place(w_, u, d, mu_, mask, ar);
    ++iteration_;
    if (!(std::abs(e) <= kDivergenceErrorMagnitude) || !w_.finite()) diverged_ = true;
    return e;
  }

  const AugmentedWeights& weights() const { return w_; }
  const SelectionSchedule& schedule() const { return sched_; }
  std::uint64_t iteration() const { return iteration_; }
  bool diverged() const { return diverged_; }

 private:
  AugmentedWeights w_;
  SelectionSchedule sched_;
  double mu_;
  std::uint64_t iteration_ = 0;
  bool diverged_ = false;
};

}  // namespace puaclms::filter
