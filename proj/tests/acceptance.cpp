// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "puaclms/puaclms.hpp"

using namespace puaclms;
using algebra::Complex;
using algebra::CVector;
using filter::UpdateMode;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

harness::ExperimentConfig section5(std::size_t n, std::size_t m, UpdateMode mode, double mu) {
  harness::ExperimentConfig c;
  c.n = n;
  c.m = m;
  c.mode = mode;
  c.mu = mu;
  c.sigma_v2 = 0.01;
  c.ar_a = 0.3;
  c.ar_b = 0.1;
  c.noise_var = 1.0;
  c.noise_cvar = 0.9;
  return c;
}

// Random steps on the AR input with a random plant; every step is audited.
Outcome energy_conservation() {
  const std::size_t n = 8;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t m : {1, 2, 4, 8}) {
    for (auto mode : {UpdateMode::sequential, UpdateMode::stochastic}) {
      RngStream rng(100 + m, static_cast<std::uint64_t>(mode));
      const auto plant = signal::make_random_plant(n, 0.01, 5 + m);
      const filter::AugmentedWeights truth{plant.h_opt, plant.g_opt};
      signal::ArRegressorSource src({}, n, rng.split(0));
      RngStream noise = rng.split(1);
      auto sched = filter::make_schedule(mode, n, m, 77);
      auto w = filter::AugmentedWeights::zeros(n);
      for (auto& x : w.h) x = rng.circular_normal(0.5);
      for (auto& x : w.g) x = rng.circular_normal(0.5);
      for (std::size_t it = 0; it < 5000; ++it) {
        const auto& u = src.next();
        const auto d = signal::plant_output(u, plant, noise).d;
        const auto& mask = filter::next_mask(sched, it);
        const double mu = 0.001 + 0.2 * rng.uniform();
        const auto step = filter::pu_aclms_step(w, u, d, mu, mask, &truth);
        const auto audit = filter::energy_audit_check(step.audit, filter::weight_error(truth, w),
                                                      filter::weight_error(truth, step.next), u, mask);
        if (audit) {
          worst = std::max(worst, audit->relative());
          ++checked;
        }
        w = step.next;
      }
    }
  }
  return {worst <= 1e-10 && checked >= 10000, fmt("%zu steps, max relative residual %.3g", checked, worst)};
}

Outcome reduced_equivalence() {
  const std::size_t n = 8;
  bool identical = true, untouched = true;
  std::size_t steps = 0;
  for (std::size_t m : {1, 2, 4, 8}) {
    for (auto mode : {UpdateMode::sequential, UpdateMode::stochastic}) {
      RngStream rng(200 + m, static_cast<std::uint64_t>(mode));
      const auto plant = signal::make_random_plant(n, 0.01, 9);
      signal::ArRegressorSource src({}, n, rng.split(0));
      RngStream noise = rng.split(1);
      auto sched = filter::make_schedule(mode, n, m, 3);
      auto masked = filter::AugmentedWeights::zeros(n);
      auto reduced = masked;
      for (std::size_t it = 0; it < 1000; ++it, ++steps) {
        const auto& u = src.next();
        const auto d = signal::plant_output(u, plant, noise).d;
        const auto& mask = filter::next_mask(sched, it);
        const auto before = masked;
        masked = filter::pu_aclms_step(masked, u, d, 0.02, mask).next;
        reduced = filter::pu_aclms_step_reduced(reduced, u, d, 0.02, mask);
        for (std::size_t k = 0; k < n; ++k) {
          const bool same = masked.h[k] == reduced.h[k] && masked.g[k] == reduced.g[k];
          if (mask.active(k)) identical = identical && same;
          else untouched = untouched && same && masked.h[k] == before.h[k] && masked.g[k] == before.g[k];
        }
      }
    }
  }
  return {identical && untouched,
          fmt("%zu steps, selected taps bit-identical: %s, unselected unchanged: %s", steps, identical ? "yes" : "no",
              untouched ? "yes" : "no")};
}

Outcome steady_state_independence() {
  auto base = section5(8, 8, UpdateMode::full, 0.02);
  base.trials = 200;
  base.horizon = 20000;
  base.steady_frac = 0.25;
  base.theory_samples = 100000;
  const auto regs = theory::sample_regressors(base.input_spec(), 8, 100000, RngStream(base.seed, harness::kTheoryStream));
  const auto stats = theory::estimate_stats(regs, filter::make_schedule(UpdateMode::full, 8, 8));
  const double predicted = theory::emse_steady_exact(base.mu, base.sigma_v2, stats).emse;

  struct Run {
    std::string name;
    double db;
  };
  std::vector<Run> runs;
  auto add = [&](std::size_t m, UpdateMode mode) {
    auto c = base;
    c.m = m;
    c.mode = mode;
    const auto r = harness::run_monte_carlo(c);
    runs.push_back({fmt("%s/M=%zu", std::string(filter::to_string(mode)).c_str(), c.effective_m()),
                    harness::to_db(r.summary.steady_emse)});
  };
  add(8, UpdateMode::full);
  for (std::size_t m : {2, 4}) {
    add(m, UpdateMode::sequential);
    add(m, UpdateMode::stochastic);
  }
  double lo = runs[0].db, hi = runs[0].db, worst_pred = 0.0;
  std::string detail = fmt("Eq.41 %.2f dB;", harness::to_db(predicted));
  for (const auto& r : runs) {
    lo = std::min(lo, r.db);
    hi = std::max(hi, r.db);
    worst_pred = std::max(worst_pred, std::abs(r.db - harness::to_db(predicted)));
    detail += fmt(" %s %.2f", r.name.c_str(), r.db);
  }
  detail += fmt("; spread %.3f dB, max vs prediction %.3f dB", hi - lo, worst_pred);
  return {hi - lo <= 1.0 && worst_pred <= 1.0, detail};
}

Outcome learning_curve_recursion() {
  double worst_e = 0.0, worst_m = 0.0;
  std::string detail;
  for (auto [m, mode] : {std::pair{std::size_t{2}, UpdateMode::sequential}, std::pair{std::size_t{2}, UpdateMode::stochastic},
                         std::pair{std::size_t{4}, UpdateMode::full}}) {
    auto c = section5(4, m, mode, 0.02);
    c.trials = 500;
    c.horizon = 4000;
    c.seed = 21;
    const auto r = harness::run_compare(c);
    worst_e = std::max(worst_e, r.stats.max_emse_dev_db);
    worst_m = std::max(worst_m, r.stats.max_msd_dev_db);
    detail += fmt("%s: EMSE %.2f dB, MSD %.2f dB; ", std::string(filter::to_string(mode)).c_str(),
                  r.stats.max_emse_dev_db, r.stats.max_msd_dev_db);
  }
  detail += "max deviation after n=10";
  return {worst_e <= 1.5 && worst_m <= 1.5, detail};
}

Outcome stability_bounds() {
  std::string detail;
  bool ok = true;
  for (auto mode : {UpdateMode::sequential, UpdateMode::stochastic}) {
    auto c = section5(4, 2, mode, 0.02);
    c.theory_samples = 100000;
    const auto model = harness::build_theory_model(c);
    const double mean = theory::mean_stability_bound(model.stats);
    const double ms = theory::mean_square_stability_bound(model.ops).bound;

    auto count_divergent = [&](double mu) {
      auto cc = c;
      cc.mu = mu;
      cc.horizon = 10000;
      const auto plant = harness::make_plant(cc);
      std::size_t div = 0;
      for (std::size_t t = 0; t < 50; ++t) div += harness::run_trial(cc, plant, t).diverged ? 1 : 0;
      return div;
    };
    const std::size_t below = count_divergent(0.9 * ms);
    const std::size_t above = count_divergent(3.0 * mean);
    ok = ok && below == 0 && above >= 45;
    detail += fmt("%s: ms %.4f mean %.4f, diverged %zu/50 at 0.9ms, %zu/50 at 3x mean; ",
                  std::string(filter::to_string(mode)).c_str(), ms, mean, below, above);
  }
  return {ok, detail};
}

Outcome complexity_table() {
  bool ok = true;
  std::size_t cases = 0;
  for (std::size_t n : {4, 8, 16, 64}) {
    for (std::size_t m = 1; m <= n; ++m) {
      if (n % m != 0) continue;
      RngStream rng(n, m);
      CVector u(n);
      for (auto& x : u) x = rng.circular_normal();
      const std::pair<filter::Algorithm, UpdateMode> algs[] = {{filter::Algorithm::aclms, UpdateMode::full},
                                                               {filter::Algorithm::sequential, UpdateMode::sequential},
                                                               {filter::Algorithm::stochastic, UpdateMode::stochastic}};
      for (const auto& [alg, mode] : algs) {
        auto sched = filter::make_schedule(mode, n, m, 1);
        auto w = filter::AugmentedWeights::zeros(n);
        for (std::uint64_t it = 0; it < 3; ++it) {
          const auto counted = filter::counted_iteration(w, u, {1.0, -0.5}, 0.01, sched, it);
          ok = ok && counted == filter::complexity_count(alg, n, m);
          ++cases;
        }
      }
    }
  }
  const auto a8 = filter::complexity_count(filter::Algorithm::aclms, 8, 8);
  ok = ok && a8.real_mults == 130 && a8.real_adds == 128;
  return {ok, fmt("%zu counted iterations match the table; ACLMS N=8 gives (%llu, %llu)", cases,
                  static_cast<unsigned long long>(a8.real_mults), static_cast<unsigned long long>(a8.real_adds))};
}

Outcome decay_ratio() {
  auto base = section5(8, 8, UpdateMode::full, 0.02);
  base.trials = 100;
  base.horizon = 16000;
  base.steady_frac = 0.1;
  base.seed = 31;
  auto crossing = [&](std::size_t m, UpdateMode mode) {
    auto c = base;
    c.m = m;
    c.mode = mode;
    const auto r = harness::run_monte_carlo(c);
    return harness::iterations_to_threshold(r.records, r.summary.steady_emse, 6.0);
  };
  const auto full = crossing(8, UpdateMode::full);
  bool ok = full.has_value();
  std::string detail = fmt("full %zu", full.value_or(0));
  for (std::size_t beta : {2, 4}) {
    const auto seq = crossing(8 / beta, UpdateMode::sequential);
    const double ratio = (full && seq) ? static_cast<double>(*seq) / static_cast<double>(*full) : 0.0;
    ok = ok && seq && std::abs(ratio / static_cast<double>(beta) - 1.0) <= 0.2;
    detail += fmt(", beta=%zu %zu (ratio %.3f)", beta, seq.value_or(0), ratio);
  }
  return {ok, detail + " iterations to 6 dB above steady state"};
}

Outcome scheduler_distribution() {
  bool ok = true;
  std::string detail;
  const std::size_t draws = 100000;
  for (std::size_t beta : {2, 4, 8}) {
    auto sched = filter::make_schedule(UpdateMode::stochastic, 8, 8 / beta, 12345);
    std::vector<std::size_t> counts(beta, 0);
    FastArith ar;
    for (std::size_t i = 0; i < draws; ++i) ++counts[sched.next_subset(i, ar)];
    const double p = 1.0 / static_cast<double>(beta);
    const double sd = std::sqrt(static_cast<double>(draws) * p * (1.0 - p));
    double worst = 0.0;
    for (auto k : counts) worst = std::max(worst, std::abs(static_cast<double>(k) - draws * p) / sd);
    ok = ok && worst <= 4.0;
    detail += fmt("stochastic beta=%zu max |z| %.2f; ", beta, worst);

    auto seq = filter::make_schedule(UpdateMode::sequential, 8, 8 / beta);
    bool once = true;
    for (std::size_t win = 0; win < 1000; ++win) {
      std::vector<int> seen(beta, 0);
      for (std::size_t j = 0; j < beta; ++j) ++seen[seq.next_subset(win * beta + j, ar)];
      for (int s : seen) once = once && s == 1;
    }
    ok = ok && once;
  }
  return {ok, detail + "sequential visits each subset once per beta iterations"};
}

Outcome noncircular_generator() {
  const signal::ArInputSpec spec{};
  RngStream rng(2024, 9);
  const std::size_t draws = 1000000;
  Complex acc = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Complex q = signal::draw_noncircular(spec.innovation, rng);
    acc += q * q;
  }
  const Complex cvar = acc / static_cast<double>(draws);
  const auto regs = theory::sample_regressors(spec, 8, 100000, RngStream(2024, 10));
  const auto stats = theory::estimate_stats(regs, filter::make_schedule(UpdateMode::full, 8, 8));
  const double ratio = algebra::frobenius_norm(stats.D_u) / algebra::frobenius_norm(stats.C_u);
  const bool ok = std::abs(cvar - Complex{0.9, 0.0}) <= 0.013 && ratio > 0.3;
  return {ok, fmt("E[q^2] = %.5f%+.5fi, ||D_u||/||C_u|| = %.3f", cvar.real(), cvar.imag(), ratio)};
}

Outcome variance_relation_consistency() {
  auto c = section5(4, 2, UpdateMode::sequential, 0.004);
  c.theory_samples = 100000;
  const auto model = harness::build_theory_model(c);
  const double trace_cu = algebra::trace(model.stats.C_u).real();
  const auto exact = theory::emse_steady_variance_relation(c.mu, c.sigma_v2, model.ops, model.stats.C_z);
  const auto small = theory::emse_steady_small_mu(c.mu, c.sigma_v2, model.stats);
  const double rel = std::abs(exact.emse - small.emse) / small.emse;

  std::string detail = fmt("mu tr(C_u) = %.4f, Eq.81 %.4g vs Eq.86 %.4g (%.1f%%)", c.mu * trace_cu, exact.emse,
                           small.emse, 100.0 * rel);
  bool ok = c.mu * trace_cu < 0.02 && rel <= 0.10;

  for (double mu : {0.004, 0.02}) {
    auto mc = c;
    mc.mu = mu;
    mc.trials = mu < 0.01 ? 40 : 100;
    mc.horizon = mu < 0.01 ? 40000 : 10000;
    mc.steady_frac = 0.5;
    const auto pred = theory::emse_steady_variance_relation(mu, mc.sigma_v2, model.ops, model.stats.C_z);
    const auto sim = harness::run_monte_carlo(mc);
    const double dev = std::abs(harness::to_db(pred.emse) - harness::to_db(sim.summary.steady_emse));
    ok = ok && dev <= 1.0;
    detail += fmt("; mu=%.3f Monte Carlo %.4g vs %.4g (%.2f dB)", mu, sim.summary.steady_emse, pred.emse, dev);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC-1", "energy conservation", 5.0, energy_conservation},
      {"AC-2", "masked/reduced equivalence", 1.0, reduced_equivalence},
      {"AC-3", "steady-state EMSE independent of M", 120.0, steady_state_independence},
      {"AC-4", "learning-curve recursion", 180.0, learning_curve_recursion},
      {"AC-5", "stability bounds", 60.0, stability_bounds},
      {"AC-6", "complexity table", 1.0, complexity_table},
      {"AC-7", "decay ratio", 120.0, decay_ratio},
      {"AC-8", "scheduler distribution", 1.0, scheduler_distribution},
      {"AC-9", "non-circular generator", 10.0, noncircular_generator},
      {"AC-10", "variance-relation consistency", 60.0, variance_relation_consistency},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %-5s %s: %s [%.2f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
