#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <future>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "puaclms/algebra.hpp"
#include "puaclms/config.hpp"
#include "puaclms/errors.hpp"
#include "puaclms/filter.hpp"
#include "puaclms/random.hpp"
#include "puaclms/schedule.hpp"
#include "puaclms/signal.hpp"
#include "puaclms/theory.hpp"

namespace puaclms::harness {

using algebra::CMatrix;
using algebra::Complex;
using algebra::CVector;

enum class Source { simulated, theory };

inline std::string_view to_string(Source s) { return s == Source::simulated ? "simulated" : "theory"; }

struct LearningCurveRecord {
  std::size_t iteration = 0;
  double emse_linear = 0.0;
  double emse_db = 0.0;
  double msd_linear = 0.0;
  double msd_db = 0.0;
  Source source = Source::simulated;
  std::size_t trials = 0;

  friend bool operator==(const LearningCurveRecord&, const LearningCurveRecord&) = default;
};

inline double to_db(double x) { return 10.0 * std::log10(x); }

inline LearningCurveRecord make_record(std::size_t n, double emse, double msd, Source src, std::size_t trials) {
  return {n, emse, to_db(emse), msd, to_db(msd), src, trials};
}

// Stream identifiers under the experiment seed.
inline constexpr std::uint64_t kTrialStream = 0x747269616CULL;
inline constexpr std::uint64_t kTheoryStream = 0x7468656F7279ULL;

/// Plant used by every run of a config: random h°, g° from plant_seed with
/// ||w°|| = 1, measurement noise from sigma_v2 / meas_cvar.
inline signal::PlantSpec make_plant(const ExperimentConfig& cfg) {
  auto p = signal::make_random_plant(cfg.n, cfg.sigma_v2, cfg.plant_seed);
  p.noise_complementary_variance = {cfg.meas_cvar, 0.0};
  p.validate();
  return p;
}

/// Per-entry variance of a random initial weight vector.
inline double random_init_variance(std::size_t n) { return 1.0 / (2.0 * static_cast<double>(n)); }

/// First index of the steady-state window over `points` samples.
inline std::size_t steady_window_start(std::size_t points, double frac) {
  const auto len = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(points)));
  return points - std::clamp<std::size_t>(len, 1, points);
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct TrialOutcome {
  std::vector<double> emse;  // |e_a(n)|^2, n = 0..horizon
  std::vector<double> msd;   // ||w~(n)||^2
  bool diverged = false;
  std::size_t divergence_iteration = 0;
  double steady_emse = 0.0;
  double steady_msd = 0.0;
};

/// One independent realization. Point n uses the weights w(n) held before
/// the n-th update; horizon updates give horizon + 1 points.
inline TrialOutcome run_trial(const ExperimentConfig& cfg, const signal::PlantSpec& plant, std::size_t trial) {
  const RngStream base = RngStream(cfg.seed, kTrialStream).split(trial);
  RngStream noise_rng = base.split(1);
  RngStream init_rng = base.split(2);
  RngStream sched_rng = base.split(3);
  signal::ArRegressorSource source(cfg.input_spec(), cfg.n, base.split(0));

  auto sched = filter::make_schedule(cfg.mode, cfg.n, cfg.effective_m(), sched_rng.next_u64(), cfg.partition);
  auto w0 = filter::AugmentedWeights::zeros(cfg.n);
  if (cfg.init == InitMode::random) {
    const double s2 = random_init_variance(cfg.n);
    for (auto& x : w0.h) x = init_rng.circular_normal(s2);
    for (auto& x : w0.g) x = init_rng.circular_normal(s2);
  }
  filter::PuAclmsFilter f(std::move(w0), std::move(sched), cfg.mu);

  TrialOutcome out;
  out.emse.assign(cfg.horizon + 1, 0.0);
  out.msd.assign(cfg.horizon + 1, 0.0);
  CVector h_err(cfg.n), g_err(cfg.n);
  for (std::size_t n = 0; n <= cfg.horizon; ++n) {
    const auto& u = source.next();
    const auto& w = f.weights();
    double msd = 0.0;
    for (std::size_t k = 0; k < cfg.n; ++k) {
      h_err[k] = plant.h_opt[k] - w.h[k];
      g_err[k] = plant.g_opt[k] - w.g[k];
      msd += std::norm(h_err[k]) + std::norm(g_err[k]);
    }
    out.emse[n] = std::norm(signal::widely_linear_response(u.u, h_err, g_err));
    out.msd[n] = msd;
    if (n == cfg.horizon) break;
    const auto sample = signal::plant_output(u, plant, noise_rng);
    f.adapt(u.u, sample.d);
    if (f.diverged()) {
      out.diverged = true;
      out.divergence_iteration = n;
      return out;
    }
  }
  const std::size_t start = steady_window_start(cfg.horizon + 1, cfg.steady_frac);
  double se = 0.0, sm = 0.0;
  for (std::size_t n = start; n <= cfg.horizon; ++n) {
    se += out.emse[n];
    sm += out.msd[n];
  }
  const auto len = static_cast<double>(cfg.horizon + 1 - start);
  out.steady_emse = se / len;
  out.steady_msd = sm / len;
  return out;
}

struct DivergenceRecord {
  std::size_t trial = 0;
  std::size_t iteration = 0;
};

struct MonteCarloSummary {
  std::size_t trials_requested = 0;
  std::size_t trials_used = 0;
  std::vector<DivergenceRecord> divergences;
  double steady_emse = 0.0;
  double steady_msd = 0.0;
  /// Per-trial steady-state EMSE of the non-divergent trials, by trial index.
  std::vector<double> trial_steady_emse;
};

struct MonteCarloResult {
  std::vector<LearningCurveRecord> records;
  MonteCarloSummary summary;
};

namespace detail {

struct PartialSum {
  std::vector<double> emse, msd;
  std::size_t used = 0;
};

inline void add_into(PartialSum& a, const PartialSum& b) {
  for (std::size_t i = 0; i < a.emse.size(); ++i) {
    a.emse[i] += b.emse[i];
    a.msd[i] += b.msd[i];
  }
  a.used += b.used;
}

// Pairwise tree over trial indices [lo, hi). The tree shape depends only on
// the trial count, so the sum is the same for any number of workers.
inline PartialSum reduce_trials(const ExperimentConfig& cfg, const signal::PlantSpec& plant, std::size_t lo,
                                std::size_t hi, std::size_t spawn_depth, std::vector<TrialOutcome>& meta) {
  if (hi - lo == 1) {
    TrialOutcome t = run_trial(cfg, plant, lo);
    PartialSum p;
    p.emse.assign(cfg.horizon + 1, 0.0);
    p.msd.assign(cfg.horizon + 1, 0.0);
    if (!t.diverged) {
      p.emse = std::move(t.emse);
      p.msd = std::move(t.msd);
      p.used = 1;
    }
    t.emse.clear();
    t.msd.clear();
    meta[lo] = std::move(t);
    return p;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  PartialSum left, right;
  if (spawn_depth > 0) {
    auto fut = std::async(std::launch::async,
                          [&] { return reduce_trials(cfg, plant, lo, mid, spawn_depth - 1, meta); });
    right = reduce_trials(cfg, plant, mid, hi, spawn_depth - 1, meta);
    left = fut.get();
  } else {
    left = reduce_trials(cfg, plant, lo, mid, 0, meta);
    right = reduce_trials(cfg, plant, mid, hi, 0, meta);
  }
  add_into(left, right);
  return left;
}

inline double pairwise_sum(std::span<const double> x) {
  if (x.empty()) return 0.0;
  if (x.size() == 1) return x[0];
  const std::size_t mid = x.size() / 2;
  return pairwise_sum(x.first(mid)) + pairwise_sum(x.subspan(mid));
}

inline std::size_t worker_count(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace detail

/// Averages `trials` independent runs. Divergent trials are excluded from
/// the averages and listed in the summary; if every trial diverges the run
/// fails with the step size and the mean stability bound in the message.
inline MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto plant = make_plant(cfg);
  std::vector<TrialOutcome> meta(cfg.trials);
  std::size_t depth = 0;
  for (std::size_t w = detail::worker_count(cfg); w > 1; w = (w + 1) / 2) ++depth;
  detail::PartialSum total = detail::reduce_trials(cfg, plant, 0, cfg.trials, depth, meta);

  MonteCarloResult r;
  auto& s = r.summary;
  s.trials_requested = cfg.trials;
  s.trials_used = total.used;
  for (std::size_t t = 0; t < meta.size(); ++t) {
    if (meta[t].diverged) s.divergences.push_back({t, meta[t].divergence_iteration});
    else s.trial_steady_emse.push_back(meta[t].steady_emse);
  }
  if (total.used == 0) {
    std::ostringstream os;
    os << "all " << cfg.trials << " trials diverged at mu = " << cfg.mu;
    try {
      const auto regs = theory::sample_regressors(cfg.input_spec(), cfg.n, 20000, RngStream(cfg.seed, kTheoryStream));
      const auto stats = theory::estimate_stats(
          regs, filter::make_schedule(cfg.mode, cfg.n, cfg.effective_m(), cfg.seed, cfg.partition));
      os << "; the mean stability bound is " << theory::mean_stability_bound(stats);
    } catch (const std::exception&) {
    }
    throw NumericalError(os.str());
  }
  const double inv = 1.0 / static_cast<double>(total.used);
  r.records.reserve(cfg.horizon + 1);
  for (std::size_t n = 0; n <= cfg.horizon; ++n) {
    r.records.push_back(make_record(n, total.emse[n] * inv, total.msd[n] * inv, Source::simulated, total.used));
  }
  const std::size_t start = steady_window_start(cfg.horizon + 1, cfg.steady_frac);
  std::vector<double> se, sm;
  for (std::size_t n = start; n <= cfg.horizon; ++n) {
    se.push_back(r.records[n].emse_linear);
    sm.push_back(r.records[n].msd_linear);
  }
  s.steady_emse = detail::pairwise_sum(se) / static_cast<double>(se.size());
  s.steady_msd = detail::pairwise_sum(sm) / static_cast<double>(sm.size());
  return r;
}

// ---------------------------------------------------------------------------
// Theory
// ---------------------------------------------------------------------------

struct TheoryReport {
  theory::SecondOrderStats stats;
  std::vector<theory::SteadyStatePrediction> steady;  // exact-energy, small-step, variance-relation (if stable)
  double mean_bound = 0.0;
  theory::MeanSquareBound ms_bound;
  double spectral_radius_f = 0.0;
  std::vector<LearningCurveRecord> records;
  /// Set instead of `records` when mu is not mean-square stable.
  std::optional<std::string> instability;
};

/// Statistics and operators for a config, from `theory_samples` regressors
/// drawn on the theory stream.
struct TheoryModel {
  theory::SecondOrderStats stats;
  theory::VarianceRelationOperators ops;
};

inline TheoryModel build_theory_model(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto regs =
      theory::sample_regressors(cfg.input_spec(), cfg.n, cfg.theory_samples, RngStream(cfg.seed, kTheoryStream));
  const auto sched = filter::make_schedule(cfg.mode, cfg.n, cfg.effective_m(), cfg.seed, cfg.partition);
  TheoryModel m;
  m.stats = theory::estimate_stats(regs, sched, std::min<std::size_t>(cfg.theory_samples, 10000));
  m.ops = theory::build_operators(cfg.mu, m.stats, regs, sched,
                                  {.min_samples = std::min<std::size_t>(cfg.theory_samples, 10000)});
  return m;
}

/// E[x0 x0^H] for x0 = conj(w° - w(0)).
inline CMatrix initial_error_covariance(const ExperimentConfig& cfg, const signal::PlantSpec& plant) {
  const CVector x0 = algebra::conjugate(plant.stacked());
  CMatrix r = algebra::outer(x0, x0);
  if (cfg.init == InitMode::random) {
    const double s2 = random_init_variance(cfg.n);
    for (std::size_t i = 0; i < r.rows(); ++i) r(i, i) += s2;
  }
  return r;
}

inline TheoryReport run_theory(const ExperimentConfig& cfg) {
  if (cfg.n > 8) throw InvalidSpec("run_theory: the learning-curve recursion is limited to n <= 8");
  const TheoryModel model = build_theory_model(cfg);
  const auto plant = make_plant(cfg);

  TheoryReport r;
  r.stats = model.stats;
  r.mean_bound = theory::mean_stability_bound(model.stats);
  r.ms_bound = theory::mean_square_stability_bound(model.ops);
  r.spectral_radius_f = algebra::spectral_radius(model.ops.F);
  try {
    r.steady.push_back(theory::emse_steady_exact(cfg.mu, cfg.sigma_v2, model.stats));
  } catch (const NumericalError&) {
  }
  r.steady.push_back(theory::emse_steady_small_mu(cfg.mu, cfg.sigma_v2, model.stats));

  // mu = 0 leaves F = I: no adaptation, and the curves stay at their initial values.
  const bool frozen = cfg.mu == 0.0;
  const bool stable = cfg.mu < r.ms_bound.bound && (r.spectral_radius_f < 1.0 || frozen);
  if (!stable) {
    std::ostringstream os;
    os << "mu = " << cfg.mu << " is not mean-square stable: bound " << r.ms_bound.bound << ", rho(F) = "
       << r.spectral_radius_f << "; learning curves diverge";
    r.instability = os.str();
    return r;
  }
  if (!frozen) {
    r.steady.push_back(theory::emse_steady_variance_relation(cfg.mu, cfg.sigma_v2, model.ops, model.stats.C_z));
  }
  const auto curve = theory::learning_curves(cfg.mu, cfg.sigma_v2, initial_error_covariance(cfg, plant), model.ops,
                                             model.stats.C_z, cfg.horizon);
  r.records.reserve(curve.size());
  for (const auto& p : curve) r.records.push_back(make_record(p.iteration, p.emse, p.msd, Source::theory, 0));
  return r;
}

// ---------------------------------------------------------------------------
// Overlay
// ---------------------------------------------------------------------------

struct CompareRow {
  std::size_t iteration = 0;
  double theory_emse_db = 0.0;
  double sim_emse_db = 0.0;
  double theory_msd_db = 0.0;
  double sim_msd_db = 0.0;
};

struct CompareStats {
  std::vector<CompareRow> rows;
  double max_emse_dev_db = 0.0;  // over iterations >= skip
  double max_msd_dev_db = 0.0;
  double steady_emse_dev_db = 0.0;
  double steady_msd_dev_db = 0.0;
};

/// Pairs two curves by iteration and reports dB deviations, ignoring the
/// first `skip` iterations for the maxima.
inline CompareStats compare_curves(std::span<const LearningCurveRecord> a, std::span<const LearningCurveRecord> b,
                                   std::size_t skip = 10, double steady_frac = 0.1) {
  const std::size_t len = std::min(a.size(), b.size());
  if (len == 0) throw InvalidSpec("compare_curves: empty curve");
  CompareStats s;
  s.rows.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (a[i].iteration != b[i].iteration) throw InvalidSpec("compare_curves: iteration indices do not align");
    s.rows.push_back({a[i].iteration, a[i].emse_db, b[i].emse_db, a[i].msd_db, b[i].msd_db});
    if (i >= skip) {
      s.max_emse_dev_db = std::max(s.max_emse_dev_db, std::abs(a[i].emse_db - b[i].emse_db));
      s.max_msd_dev_db = std::max(s.max_msd_dev_db, std::abs(a[i].msd_db - b[i].msd_db));
    }
  }
  const std::size_t start = steady_window_start(len, steady_frac);
  double ae = 0, be = 0, am = 0, bm = 0;
  for (std::size_t i = start; i < len; ++i) {
    ae += a[i].emse_linear;
    be += b[i].emse_linear;
    am += a[i].msd_linear;
    bm += b[i].msd_linear;
  }
  s.steady_emse_dev_db = std::abs(to_db(ae) - to_db(be));
  s.steady_msd_dev_db = std::abs(to_db(am) - to_db(bm));
  return s;
}

struct CompareReport {
  TheoryReport theory;
  MonteCarloResult simulation;
  CompareStats stats;
};

inline CompareReport run_compare(const ExperimentConfig& cfg) {
  CompareReport r;
  r.theory = run_theory(cfg);
  if (r.theory.instability) throw NumericalError(*r.theory.instability);
  r.simulation = run_monte_carlo(cfg);
  r.stats = compare_curves(r.theory.records, r.simulation.records, 10, cfg.steady_frac);
  return r;
}

/// First iteration at which the EMSE falls to `db_above` dB over `floor`.
inline std::optional<std::size_t> iterations_to_threshold(std::span<const LearningCurveRecord> curve, double floor,
                                                          double db_above) {
  const double level = floor * std::pow(10.0, db_above / 10.0);
  for (const auto& r : curve)
    if (r.emse_linear <= level) return r.iteration;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CSV and plot script
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader = "iteration,emse_linear,emse_db,msd_linear,msd_db,source,trials";

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv(std::ostream& out, std::span<const LearningCurveRecord> records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.iteration << ',' << format_double(r.emse_linear) << ',' << format_double(r.emse_db) << ','
        << format_double(r.msd_linear) << ',' << format_double(r.msd_db) << ',' << to_string(r.source) << ','
        << r.trials << '\n';
  }
}

inline std::vector<LearningCurveRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("csv: missing or unexpected header");
  std::vector<LearningCurveRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw ConfigError("csv line " + std::to_string(line_no) + ": expected 7 fields");
    auto real = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size()) throw ConfigError("csv line " + std::to_string(line_no) + ": bad number");
      return v;
    };
    LearningCurveRecord r;
    r.iteration = std::stoull(f[0]);
    r.emse_linear = real(f[1]);
    r.emse_db = real(f[2]);
    r.msd_linear = real(f[3]);
    r.msd_db = real(f[4]);
    if (f[5] == "simulated") r.source = Source::simulated;
    else if (f[5] == "theory") r.source = Source::theory;
    else throw ConfigError("csv line " + std::to_string(line_no) + ": unknown source '" + f[5] + "'");
    r.trials = std::stoull(f[6]);
    out.push_back(r);
  }
  return out;
}

/// matplotlib script that overlays every source found in the CSV files.
inline void write_plot_script(std::ostream& out, std::span<const std::string> csv_files, const std::string& title) {
  out << "import csv\nimport sys\n\nimport matplotlib\nmatplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n\n";
  out << "FILES = [";
  for (std::size_t i = 0; i < csv_files.size(); ++i) out << (i ? ", " : "") << "'" << csv_files[i] << "'";
  out << "]\nTITLE = '" << title << "'\n\n";
  out << R"(
def load(path):
    series = {}
    with open(path, newline='') as f:
        for row in csv.DictReader(f):
            s = series.setdefault(row['source'], ([], [], []))
            s[0].append(int(row['iteration']))
            s[1].append(float(row['emse_db']))
            s[2].append(float(row['msd_db']))
    return series


def main():
    fig, (ax_e, ax_m) = plt.subplots(1, 2, figsize=(11, 4))
    for path in FILES:
        for source, (n, emse, msd) in load(path).items():
            label = f'{path} ({source})'
            ax_e.plot(n, emse, label=label, linewidth=1)
            ax_m.plot(n, msd, label=label, linewidth=1)
    ax_e.set_title('EMSE')
    ax_m.set_title('MSD')
    for ax in (ax_e, ax_m):
        ax.set_xlabel('iteration')
        ax.set_ylabel('dB')
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
    fig.suptitle(TITLE)
    fig.tight_layout()
    out = sys.argv[1] if len(sys.argv) > 1 else 'curves.png'
    fig.savefig(out, dpi=120)


if __name__ == '__main__':
    main()
)";
}

}  // namespace puaclms::harness
