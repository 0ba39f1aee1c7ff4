#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <sstream>
#include <utility>

#include "puaclms/algebra.hpp"
#include "puaclms/errors.hpp"
#include "puaclms/random.hpp"

namespace puaclms::signal {

using algebra::Complex;
using algebra::CVector;

/// Zero-mean complex Gaussian described by E|q|^2 and E[q^2].
struct NoncircularGaussianSpec {
  double variance = 1.0;
  Complex complementary_variance{0.0, 0.0};

  void validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) throw InvalidSpec("noise variance must be nonnegative");
    if (std::abs(complementary_variance) > variance * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "|complementary variance| = " << std::abs(complementary_variance) << " exceeds variance " << variance
         << "; the augmented covariance would not be positive semi-definite";
      throw InvalidSpec(os.str());
    }
  }
};

/// Draws q with E|q|^2 = variance and E[q^2] = complementary_variance.
/// A real-axis improper variate (independent real/imaginary parts with
/// variances (s2 + |c|)/2 and (s2 - |c|)/2) is rotated by half the phase of c.
inline Complex draw_noncircular(const NoncircularGaussianSpec& spec, RngStream& rng) {
  spec.validate();
  const double c = std::abs(spec.complementary_variance);
  const double re_sd = std::sqrt((spec.variance + c) / 2.0);
  const double im_sd = std::sqrt(std::max(0.0, spec.variance - c) / 2.0);
  const double x = re_sd * rng.normal();
  const double y = im_sd * rng.normal();
  const double phase = std::arg(spec.complementary_variance);
  if (phase == 0.0) return {x, y};
  return Complex{x, y} * std::polar(1.0, phase / 2.0);
}

/// Widely-linear first-order autoregression u(n+1) = a u(n) + b u*(n) + q(n).
struct ArInputSpec {
  double a = 0.3;
  double b = 0.1;
  NoncircularGaussianSpec innovation{1.0, {0.9, 0.0}};
};

/// One step with a given innovation sample q.
inline Complex ar_input_step(Complex u_prev, const ArInputSpec& spec, Complex q) {
  return spec.a * u_prev + spec.b * std::conj(u_prev) + q;
}

inline Complex ar_input_step(Complex u_prev, const ArInputSpec& spec, RngStream& rng) {
  return ar_input_step(u_prev, spec, draw_noncircular(spec.innovation, rng));
}

/// Tapped-delay-line regressor u(n) = [u(n), ..., u(n-N+1)]^T, newest first.
struct RegressorWindow {
  CVector u;

  std::size_t size() const { return u.size(); }

  /// z(n) = [u^H, u^T]^T, i.e. [conj(u); u].
  CVector z() const {
    CVector r(2 * u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      r[k] = std::conj(u[k]);
      r[k + u.size()] = u[k];
    }
    return r;
  }

  /// [u; conj(u)], the conjugate of z. Its covariance carries the
  /// [[C_u, D_u], [D_u*, C_u*]] block layout.
  CVector augmented() const {
    CVector r(2 * u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      r[k] = u[k];
      r[k + u.size()] = std::conj(u[k]);
    }
    return r;
  }
};

/// history is chronological (last element is the current sample).
inline RegressorWindow regressor_window(std::span<const Complex> history, std::size_t n_taps) {
  if (n_taps == 0) throw InvalidSpec("regressor_window: N must be at least 1");
  if (history.size() < n_taps) {
    std::ostringstream os;
    os << "regressor_window: need " << n_taps << " samples of history, have " << history.size();
    throw InvalidSpec(os.str());
  }
  RegressorWindow w;
  w.u.resize(n_taps);
  for (std::size_t k = 0; k < n_taps; ++k) w.u[k] = history[history.size() - 1 - k];
  return w;
}

/// Streams tapped-delay-line regressors from the widely-linear AR input,
/// discarding a warm-up of 10 N samples so the window starts near stationarity.
class ArRegressorSource {
 public:
  ArRegressorSource(ArInputSpec spec, std::size_t n_taps, RngStream rng)
      : spec_(spec), rng_(std::move(rng)) {
    if (n_taps == 0) throw InvalidSpec("ArRegressorSource: N must be at least 1");
    spec_.innovation.validate();
    window_.u.assign(n_taps, Complex{});
    for (std::size_t i = 0; i < 10 * n_taps; ++i) advance();
  }

  const RegressorWindow& next() {
    advance();
    return window_;
  }

  const RegressorWindow& current() const { return window_; }

 private:
  void advance() {
    state_ = ar_input_step(state_, spec_, rng_);
    auto& u = window_.u;
    for (std::size_t k = u.size() - 1; k > 0; --k) u[k] = u[k - 1];
    u[0] = state_;
  }

  ArInputSpec spec_;
  RngStream rng_;
  Complex state_{};
  RegressorWindow window_;
};

/// Widely-linear plant d(n) = u^T h° + u^H g° + v(n).
struct PlantSpec {
  CVector h_opt;
  CVector g_opt;
  double noise_variance = 0.0;
  /// Measurement noise is circular unless this is set.
  Complex noise_complementary_variance{0.0, 0.0};

  std::size_t taps() const { return h_opt.size(); }

  void validate() const {
    if (h_opt.empty() || h_opt.size() != g_opt.size()) {
      throw InvalidSpec("plant: h° and g° must share a length N >= 1");
    }
    NoncircularGaussianSpec{noise_variance, noise_complementary_variance}.validate();
  }

  CVector stacked() const {
    CVector w(h_opt);
    w.insert(w.end(), g_opt.begin(), g_opt.end());
    return w;
  }
};

struct PlantSample {
  Complex d;
  Complex v;
};

inline Complex widely_linear_response(std::span<const Complex> u, std::span<const Complex> h,
                                      std::span<const Complex> g) {
  Complex y = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) y += u[k] * h[k];
  Complex yc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) yc += std::conj(u[k]) * g[k];
  return y + yc;
}

inline PlantSample plant_output(const RegressorWindow& u, const PlantSpec& plant, RngStream& rng) {
  if (u.size() != plant.taps() || plant.g_opt.size() != plant.taps()) {
    throw DimensionError("plant_output: regressor length does not match plant");
  }
  const Complex v = plant.noise_variance > 0.0
                        ? draw_noncircular({plant.noise_variance, plant.noise_complementary_variance}, rng)
                        : Complex{};
  return {widely_linear_response(u.u, plant.h_opt, plant.g_opt) + v, v};
}

/// Plant with h°, g° drawn from a seeded circular Gaussian and scaled to
/// ||w°|| = 1.
inline PlantSpec make_random_plant(std::size_t n_taps, double noise_variance, std::uint64_t seed) {
  if (n_taps == 0) throw InvalidSpec("plant: N must be at least 1");
  RngStream rng(seed, 0x706C616E74ULL);
  PlantSpec p;
  p.noise_variance = noise_variance;
  p.h_opt.resize(n_taps);
  p.g_opt.resize(n_taps);
  for (auto& x : p.h_opt) x = rng.circular_normal();
  for (auto& x : p.g_opt) x = rng.circular_normal();
  const double scale = 1.0 / std::sqrt(algebra::norm_sq(p.h_opt) + algebra::norm_sq(p.g_opt));
  for (auto& x : p.h_opt) x *= scale;
  for (auto& x : p.g_opt) x *= scale;
  return p;
}

}  // namespace puaclms::signal
