#pragma once

#include <complex>
#include <cstdint>

namespace puaclms {

/// Plain real arithmetic. Complex products are spelled out as four real
/// multiplies and two real additions so that the counted path below and
/// this one execute the same floating-point operations in the same order.
struct FastArith {
  template <typename T>
  T mul(T a, T b) const { return a * b; }
  template <typename T>
  T add(T a, T b) const { return a + b; }
  template <typename T>
  T sub(T a, T b) const { return a - b; }
};

/// Same arithmetic, but tallies every real multiply and every real
/// addition/subtraction it performs.
struct CountingArith {
  std::uint64_t mults = 0;
  std::uint64_t adds = 0;

  template <typename T>
  T mul(T a, T b) {
    ++mults;
    return a * b;
  }
  template <typename T>
  T add(T a, T b) {
    ++adds;
    return a + b;
  }
  template <typename T>
  T sub(T a, T b) {
    ++adds;
    return a - b;
  }
};

template <typename Arith>
std::complex<double> cmul(Arith& ar, std::complex<double> x, std::complex<double> y) {
  const double re = ar.sub(ar.mul(x.real(), y.real()), ar.mul(x.imag(), y.imag()));
  const double im = ar.add(ar.mul(x.real(), y.imag()), ar.mul(x.imag(), y.real()));
  return {re, im};
}

/// x * conj(y) without materialising conj(y).
template <typename Arith>
std::complex<double> cmul_conj(Arith& ar, std::complex<double> x, std::complex<double> y) {
  const double re = ar.add(ar.mul(x.real(), y.real()), ar.mul(x.imag(), y.imag()));
  const double im = ar.sub(ar.mul(x.imag(), y.real()), ar.mul(x.real(), y.imag()));
  return {re, im};
}

template <typename Arith>
std::complex<double> cadd(Arith& ar, std::complex<double> x, std::complex<double> y) {
  return {ar.add(x.real(), y.real()), ar.add(x.imag(), y.imag())};
}

template <typename Arith>
std::complex<double> csub(Arith& ar, std::complex<double> x, std::complex<double> y) {
  return {ar.sub(x.real(), y.real()), ar.sub(x.imag(), y.imag())};
}

/// Real scalar times complex: two real multiplies.
template <typename Arith>
std::complex<double> rmul(Arith& ar, double s, std::complex<double> x) {
  return {ar.mul(s, x.real()), ar.mul(s, x.imag())};
}

}  // namespace puaclms
