#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "puaclms/arith.hpp"
#include "puaclms/errors.hpp"

namespace puaclms::filter {

enum class UpdateMode { full, sequential, stochastic };
enum class Partition { contiguous, interleaved };

/// How an LCG state is turned into a subset index.
enum class SubsetMapping {
  /// floor(beta * x / c) + 1: exactly uniform over full-period states.
  uniform_bins,
  /// round((beta - 1) / (c - 1) * x + 1): the affine map read literally.
  /// Its end bins receive half the mass of the interior ones.
  affine_rounded,
};

inline std::string_view to_string(UpdateMode m) {
  switch (m) {
    case UpdateMode::full: return "full";
    case UpdateMode::sequential: return "sequential";
    case UpdateMode::stochastic: return "stochastic";
  }
  return "?";
}

inline UpdateMode parse_update_mode(std::string_view s) {
  if (s == "full") return UpdateMode::full;
  if (s == "sequential") return UpdateMode::sequential;
  if (s == "stochastic") return UpdateMode::stochastic;
  throw InvalidSpec("unknown update mode '" + std::string(s) + "' (expected full|sequential|stochastic)");
}

inline Partition parse_partition(std::string_view s) {
  if (s == "contiguous") return Partition::contiguous;
  if (s == "interleaved") return Partition::interleaved;
  throw InvalidSpec("unknown partition '" + std::string(s) + "' (expected contiguous|interleaved)");
}

// ---------------------------------------------------------------------------
// Linear congruential generator x(n+1) = (a x(n) + b) mod c
// ---------------------------------------------------------------------------

struct LcgState {
  std::uint64_t x = 0;
  std::uint64_t a = 1664525;
  std::uint64_t b = 1013904223;
  std::uint64_t c = std::uint64_t{1} << 32;

  void validate() const {
    if (a == 0 || b == 0 || c == 0) throw InvalidSpec("LCG constants must be positive");
    if (x >= c) throw InvalidSpec("LCG state must satisfy 0 <= x < c");
  }
};

template <typename Arith>
std::uint64_t lcg_next(LcgState& s, Arith& arith) {
  using u128 = unsigned __int128;
  const u128 ax = arith.mul(static_cast<u128>(s.a), static_cast<u128>(s.x));
  s.x = static_cast<std::uint64_t>(arith.add(ax, static_cast<u128>(s.b)) % s.c);
  return s.x;
}

inline std::uint64_t lcg_next(LcgState& s) {
  FastArith arith;
  return lcg_next(s, arith);
}

/// Maps an LCG state to a 1-based subset index in {1, ..., beta}.
template <typename Arith>
std::size_t lcg_to_subset(std::uint64_t x, std::size_t beta, std::uint64_t c, Arith& arith,
                          SubsetMapping mapping = SubsetMapping::uniform_bins) {
  if (beta == 0) throw InvalidSpec("lcg_to_subset: beta must be at least 1");
  double t;
  if (mapping == SubsetMapping::uniform_bins) {
    const double scale = static_cast<double>(beta) / static_cast<double>(c);
    t = arith.add(std::floor(arith.mul(scale, static_cast<double>(x))), 1.0);
  } else {
    const double slope = static_cast<double>(beta - 1) / static_cast<double>(c - 1);
    t = std::round(arith.add(arith.mul(slope, static_cast<double>(x)), 1.0));
  }
  if (t < 1.0) t = 1.0;
  if (t > static_cast<double>(beta)) t = static_cast<double>(beta);
  return static_cast<std::size_t>(t);
}

inline std::size_t lcg_to_subset(std::uint64_t x, std::size_t beta, std::uint64_t c,
                                 SubsetMapping mapping = SubsetMapping::uniform_bins) {
  FastArith arith;
  return lcg_to_subset(x, beta, c, arith, mapping);
}

// ---------------------------------------------------------------------------
// Selection masks and schedules
// ---------------------------------------------------------------------------

/// Diagonal of the N x N coefficient-selection matrix. The augmented mask
/// applies the same flags to both the h and g blocks.
struct SelectionMask {
  std::vector<std::uint8_t> flags;
  std::vector<std::size_t> selected;  // indices with flag set, ascending

  std::size_t taps() const { return flags.size(); }
  std::size_t count() const { return selected.size(); }
  bool active(std::size_t k) const { return flags[k] != 0; }

  static SelectionMask from_indices(std::size_t n, std::vector<std::size_t> idx) {
    SelectionMask m;
    m.flags.assign(n, 0);
    for (auto k : idx) {
      if (k >= n) throw InvalidSpec("mask index out of range");
      m.flags[k] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
      if (m.flags[k]) m.selected.push_back(k);
    if (m.selected.size() != idx.size()) throw InvalidSpec("mask indices must be distinct");
    return m;
  }

  static SelectionMask all(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    return from_indices(n, std::move(idx));
  }
};

struct SelectionSchedule {
  UpdateMode mode = UpdateMode::full;
  Partition partition = Partition::contiguous;
  SubsetMapping mapping = SubsetMapping::uniform_bins;
  std::size_t n_taps = 0;
  std::size_t m_taps = 0;
  std::size_t beta = 1;
  std::vector<SelectionMask> subsets;  // S_1 ... S_beta (0-based storage)
  LcgState lcg;

  /// Subset index (0-based) used at iteration n; advances the LCG in
  /// stochastic mode.
  template <typename Arith>
  std::size_t next_subset(std::uint64_t n, Arith& arith) {
    switch (mode) {
      case UpdateMode::full: return 0;
      case UpdateMode::sequential: return static_cast<std::size_t>(n % beta);
      case UpdateMode::stochastic: {
        const std::size_t t = lcg_to_subset(lcg.x, beta, lcg.c, arith, mapping) - 1;
        lcg_next(lcg, arith);
        return t;
      }
    }
    return 0;
  }
};

/// Partitions {1..N} into beta = N/M subsets of size M and seeds the LCG.
inline SelectionSchedule make_schedule(UpdateMode mode, std::size_t n_taps, std::size_t m_taps,
                                       std::uint64_t seed = 0, Partition partition = Partition::contiguous) {
  if (n_taps == 0) throw InvalidSpec("schedule: N must be at least 1");
  if (mode == UpdateMode::full) m_taps = n_taps;
  if (m_taps < 1 || m_taps > n_taps) {
    std::ostringstream os;
    os << "schedule: M = " << m_taps << " must satisfy 1 <= M <= N = " << n_taps;
    throw InvalidSpec(os.str());
  }
  if (n_taps % m_taps != 0) {
    std::ostringstream os;
    os << "schedule: N = " << n_taps << " is not a multiple of M = " << m_taps
       << "; equal-size coefficient subsets require N mod M = 0";
    throw InvalidSpec(os.str());
  }
  SelectionSchedule s;
  s.mode = mode;
  s.partition = partition;
  s.n_taps = n_taps;
  s.m_taps = m_taps;
  s.beta = n_taps / m_taps;
  for (std::size_t t = 0; t < s.beta; ++t) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < m_taps; ++j) {
      idx.push_back(partition == Partition::contiguous ? t * m_taps + j : j * s.beta + t);
    }
    s.subsets.push_back(SelectionMask::from_indices(n_taps, std::move(idx)));
  }
  s.lcg.x = seed % s.lcg.c;
  return s;
}

template <typename Arith>
const SelectionMask& next_mask(SelectionSchedule& s, std::uint64_t n, Arith& arith) {
  return s.subsets[s.next_subset(n, arith)];
}

inline const SelectionMask& next_mask(SelectionSchedule& s, std::uint64_t n) {
  FastArith arith;
  return next_mask(s, n, arith);
}

}  // namespace puaclms::filter
