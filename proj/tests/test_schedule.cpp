#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "puaclms/errors.hpp"
#include "puaclms/schedule.hpp"

using namespace puaclms;
using namespace puaclms::filter;

namespace {

std::vector<std::size_t> indices(const SelectionMask& m) { return m.selected; }

void expect_partition(const SelectionSchedule& s) {
  std::vector<int> hits(s.n_taps, 0);
  for (const auto& m : s.subsets) {
    EXPECT_EQ(m.count(), s.m_taps);
    for (auto k : m.selected) ++hits[k];
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

}  // namespace

TEST(MakeSchedule, ContiguousBlocks) {
  const auto s = make_schedule(UpdateMode::sequential, 4, 2);
  EXPECT_EQ(s.beta, 2u);
  ASSERT_EQ(s.subsets.size(), 2u);
  EXPECT_EQ(indices(s.subsets[0]), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(indices(s.subsets[1]), (std::vector<std::size_t>{2, 3}));
}

TEST(MakeSchedule, FullUpdateIsOneSubset) {
  for (auto mode : {UpdateMode::full, UpdateMode::sequential, UpdateMode::stochastic}) {
    auto s = make_schedule(mode, 5, 5);
    ASSERT_EQ(s.subsets.size(), 1u);
    for (std::uint64_t n = 0; n < 10; ++n) EXPECT_EQ(next_mask(s, n).count(), 5u);
  }
  EXPECT_EQ(make_schedule(UpdateMode::full, 6, 2).m_taps, 6u);
}

TEST(MakeSchedule, RejectsNonDivisibleLength) {
  try {
    make_schedule(UpdateMode::sequential, 6, 4);
    FAIL() << "expected InvalidSpec";
  } catch (const InvalidSpec& e) {
    EXPECT_NE(std::string(e.what()).find("multiple"), std::string::npos);
  }
  EXPECT_THROW(make_schedule(UpdateMode::sequential, 4, 0), InvalidSpec);
  EXPECT_THROW(make_schedule(UpdateMode::sequential, 4, 5), InvalidSpec);
  EXPECT_THROW(make_schedule(UpdateMode::sequential, 0, 0), InvalidSpec);
}

TEST(MakeSchedule, PartitionsAreDisjointAndCover) {
  for (std::size_t n : {1, 2, 4, 6, 8, 12, 16}) {
    for (std::size_t m = 1; m <= n; ++m) {
      if (n % m != 0) continue;
      for (auto p : {Partition::contiguous, Partition::interleaved}) expect_partition(make_schedule(UpdateMode::sequential, n, m, 0, p));
    }
  }
  const auto s = make_schedule(UpdateMode::sequential, 6, 2, 0, Partition::interleaved);
  EXPECT_EQ(indices(s.subsets[0]), (std::vector<std::size_t>{0, 3}));
}

TEST(NextMask, SequentialRoundRobin) {
  auto s = make_schedule(UpdateMode::sequential, 4, 2);
  EXPECT_EQ(indices(next_mask(s, 0)), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(indices(next_mask(s, 1)), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(indices(next_mask(s, 2)), (std::vector<std::size_t>{0, 1}));
}

TEST(NextMask, SequentialVisitsEachSubsetOncePerCycle) {
  auto s = make_schedule(UpdateMode::sequential, 12, 3);
  for (std::uint64_t w = 0; w < 50; ++w) {
    std::set<std::size_t> seen;
    for (std::uint64_t j = 0; j < s.beta; ++j) seen.insert(next_mask(s, w * s.beta + j).selected.front());
    EXPECT_EQ(seen.size(), s.beta);
  }
}

TEST(NextMask, PopcountIsAlwaysM) {
  for (auto mode : {UpdateMode::full, UpdateMode::sequential, UpdateMode::stochastic}) {
    auto s = make_schedule(mode, 8, 2, 99);
    for (std::uint64_t n = 0; n < 1000; ++n) {
      const auto& m = next_mask(s, n);
      const auto pop = static_cast<std::size_t>(std::count(m.flags.begin(), m.flags.end(), 1));
      EXPECT_EQ(pop, s.m_taps);
      EXPECT_EQ(m.count(), s.m_taps);
    }
  }
}

TEST(NextMask, StochasticFrequencies) {
  auto s = make_schedule(UpdateMode::stochastic, 8, 2, 2024);
  std::vector<double> counts(4, 0.0);
  const std::size_t draws = 100000;
  for (std::uint64_t n = 0; n < draws; ++n) counts[next_mask(s, n).selected.front() / 2] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) {
    EXPECT_NEAR(c / draws, 0.25, 0.006);
    chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
  }
  // 0.999 quantile of chi-square with 3 degrees of freedom
  EXPECT_LT(chi2, 16.27);
}

TEST(Lcg, ExactUpdates) {
  LcgState s;
  s.x = 1;
  EXPECT_EQ(lcg_next(s), 1015568748u);
  s.x = 0;
  EXPECT_EQ(lcg_next(s), 1013904223u);
  EXPECT_LT(s.x, s.c);
}

TEST(Lcg, PeriodExceedsOneMillion) {
  // Floyd cycle detection over a prefix: no meeting means tail + period exceeds the prefix.
  LcgState tortoise, hare;
  tortoise.x = hare.x = 12345;
  bool met = false;
  for (int i = 0; i < 1100000 && !met; ++i) {
    lcg_next(tortoise);
    lcg_next(hare);
    lcg_next(hare);
    met = tortoise.x == hare.x;
  }
  EXPECT_FALSE(met);
}

TEST(Lcg, CountsOneMultiplyAndOneAdd) {
  LcgState s;
  CountingArith ar;
  lcg_next(s, ar);
  EXPECT_EQ(ar.mults, 1u);
  EXPECT_EQ(ar.adds, 1u);
}

TEST(Lcg, Validation) {
  LcgState s;
  s.x = s.c;
  EXPECT_THROW(s.validate(), InvalidSpec);
  s.x = 0;
  s.a = 0;
  EXPECT_THROW(s.validate(), InvalidSpec);
}

TEST(LcgToSubset, Endpoints) {
  const std::uint64_t c = std::uint64_t{1} << 32;
  for (auto mapping : {SubsetMapping::uniform_bins, SubsetMapping::affine_rounded}) {
    for (std::size_t beta : {2, 3, 4, 7, 8}) {
      EXPECT_EQ(lcg_to_subset(0, beta, c, mapping), 1u);
      EXPECT_EQ(lcg_to_subset(c - 1, beta, c, mapping), beta);
    }
    for (std::uint64_t x : {std::uint64_t{0}, std::uint64_t{17}, c / 2, c - 1}) EXPECT_EQ(lcg_to_subset(x, 1, c, mapping), 1u);
  }
}

TEST(LcgToSubset, UniformBinsAreExactOverAFullPeriod) {
  // Hull-Dobell full-period generator with c = 64.
  LcgState s{0, 5, 3, 64};
  std::vector<int> counts(4, 0), rounded(4, 0);
  for (int i = 0; i < 64; ++i) {
    ++counts[lcg_to_subset(s.x, 4, s.c) - 1];
    ++rounded[lcg_to_subset(s.x, 4, s.c, SubsetMapping::affine_rounded) - 1];
    lcg_next(s);
  }
  for (int k : counts) EXPECT_EQ(k, 16);
  // The literal rounded affine map gives its end bins about half the interior mass.
  EXPECT_LT(rounded.front(), rounded[1]);
  EXPECT_LT(rounded.back(), rounded[2]);
}

TEST(LcgToSubset, ChiSquareOnLcgStream) {
  LcgState s;
  s.x = 7;
  std::vector<double> counts(4, 0.0);
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) {
    counts[lcg_to_subset(s.x, 4, s.c) - 1] += 1.0;
    lcg_next(s);
  }
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
  EXPECT_LT(chi2, 16.27);
}

TEST(Parse, ModesAndPartitions) {
  EXPECT_EQ(parse_update_mode("stochastic"), UpdateMode::stochastic);
  EXPECT_EQ(parse_partition("interleaved"), Partition::interleaved);
  EXPECT_THROW(parse_update_mode("random"), InvalidSpec);
  EXPECT_EQ(to_string(UpdateMode::sequential), "sequential");
}
