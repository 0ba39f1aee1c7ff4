#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "puaclms/config.hpp"
#include "puaclms/errors.hpp"
#include "puaclms/filter.hpp"
#include "puaclms/harness.hpp"
#include "puaclms/theory.hpp"

namespace puaclms::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

struct Overrides {
  std::string config;
  std::optional<double> mu;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline harness::ExperimentConfig resolve_config(const Overrides& o) {
  auto cfg = harness::load_config(o.config);
  if (o.mu) cfg.mu = *o.mu;
  if (o.trials) cfg.trials = *o.trials;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

inline std::filesystem::path output_dir(const Overrides& o) {
  std::filesystem::path dir = ".";
  if (!o.out.empty()) dir = o.out;
  else if (const char* env = std::getenv("PUACLMS_OUT_DIR"); env != nullptr && *env != '\0') dir = env;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

inline void write_outputs(const std::filesystem::path& dir, const std::string& stem,
                          std::span<const harness::LearningCurveRecord> records, std::ostream& log) {
  const auto csv = dir / (stem + ".csv");
  const auto py = dir / ("plot_" + stem + ".py");
  {
    std::ofstream f(csv, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + csv.string() + "'");
    harness::write_csv(f, records);
  }
  {
    std::ofstream f(py, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + py.string() + "'");
    const std::vector<std::string> files{csv.filename().string()};
    harness::write_plot_script(f, files, stem);
  }
  log << "wrote " << csv.string() << " and " << py.string() << '\n';
}

inline void print_config_line(std::ostream& out, const harness::ExperimentConfig& c) {
  out << "n=" << c.n << " m=" << c.effective_m() << " mode=" << filter::to_string(c.mode) << " mu=" << c.mu
      << " trials=" << c.trials << " horizon=" << c.horizon << " seed=" << c.seed << '\n';
}

inline std::string_view method_name(theory::SteadyStateMethod m) {
  switch (m) {
    case theory::SteadyStateMethod::exact_energy: return "exact-energy";
    case theory::SteadyStateMethod::small_step: return "small-step";
    case theory::SteadyStateMethod::variance_relation: return "variance-relation";
  }
  return "?";
}

inline void print_bounds(std::ostream& out, double mean_bound, const theory::MeanSquareBound& ms) {
  out << "mean stability bound        mu < " << mean_bound << '\n';
  out << "mean-square stability bound mu < " << ms.bound << "  (P^-1 Q branch " << ms.pq_branch << ", G branch "
      << ms.g_branch << ")\n";
  if (ms.pq_complex_dominant) out << "note: the dominant eigenvalue of P^-1 Q is complex\n";
  if (ms.q_hermitian_min_eig < 0.0)
    out << "note: Hermitian part of Q has minimum eigenvalue " << ms.q_hermitian_min_eig << '\n';
}

inline int cmd_simulate(const Overrides& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  print_config_line(out, cfg);
  const auto r = harness::run_monte_carlo(cfg);
  const auto& s = r.summary;
  out << "trials used " << s.trials_used << " of " << s.trials_requested << ", diverged " << s.divergences.size()
      << '\n';
  for (const auto& d : s.divergences) out << "  trial " << d.trial << " diverged at iteration " << d.iteration << '\n';
  out << "steady-state EMSE " << s.steady_emse << " (" << harness::to_db(s.steady_emse) << " dB), MSD "
      << s.steady_msd << " (" << harness::to_db(s.steady_msd) << " dB)\n";
  write_outputs(output_dir(o), "simulate", r.records, out);
  return kExitOk;
}

inline int cmd_theory(const Overrides& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  print_config_line(out, cfg);
  const auto r = harness::run_theory(cfg);
  print_bounds(out, r.mean_bound, r.ms_bound);
  for (const auto& p : r.steady) {
    out << "steady-state EMSE [" << method_name(p.method) << "] " << p.emse << " (" << harness::to_db(p.emse)
        << " dB)";
    if (p.msd) out << ", MSD " << *p.msd;
    if (p.small_step_warning) out << "  (warning: mu tr(C_u) > 0.1)";
    out << '\n';
  }
  if (r.instability) {
    out << "instability: " << *r.instability << '\n';
    return kExitNumerical;
  }
  write_outputs(output_dir(o), "theory", r.records, out);
  return kExitOk;
}

inline int cmd_compare(const Overrides& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  print_config_line(out, cfg);
  const auto r = harness::run_compare(cfg);
  out << "max deviation after iteration 10: EMSE " << r.stats.max_emse_dev_db << " dB, MSD "
      << r.stats.max_msd_dev_db << " dB\n";
  out << "steady-state deviation: EMSE " << r.stats.steady_emse_dev_db << " dB, MSD " << r.stats.steady_msd_dev_db
      << " dB\n";
  std::vector<harness::LearningCurveRecord> joint(r.theory.records);
  joint.insert(joint.end(), r.simulation.records.begin(), r.simulation.records.end());
  write_outputs(output_dir(o), "compare", joint, out);
  return kExitOk;
}

inline int cmd_stability(const Overrides& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  print_config_line(out, cfg);
  const auto model = harness::build_theory_model(cfg);
  const double mean = theory::mean_stability_bound(model.stats);
  const auto ms = theory::mean_square_stability_bound(model.ops);
  print_bounds(out, mean, ms);
  if (ms.bound > mean) out << "warning: the mean-square bound exceeds the mean bound\n";
  return kExitOk;
}

inline int cmd_complexity(std::size_t n, std::size_t m, std::ostream& out) {
  if (n == 0 || m == 0 || m > n || n % m != 0) {
    throw ConfigError("complexity: need 1 <= m <= n with n a multiple of m");
  }
  out << std::left << std::setw(12) << "algorithm" << std::right << std::setw(10) << "mults" << std::setw(10)
      << "adds" << '\n';
  const std::pair<filter::Algorithm, std::string_view> rows[] = {
      {filter::Algorithm::aclms, "aclms"},
      {filter::Algorithm::sequential, "sequential"},
      {filter::Algorithm::stochastic, "stochastic"},
  };
  for (const auto& [alg, name] : rows) {
    const auto c = filter::complexity_count(alg, n, m);
    out << std::left << std::setw(12) << name << std::right << std::setw(10) << c.real_mults << std::setw(10)
        << c.real_adds << '\n';
  }
  return kExitOk;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Partial-update augmented CLMS: simulation, theory and stability tools", "puaclms"};
  app.require_subcommand(1);
  Overrides o;
  std::size_t cn = 0, cm = 0;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config file (key = value)")->required();
    sub->add_option("--mu", o.mu, "override step size");
    sub->add_option("--trials", o.trials, "override Monte-Carlo trial count");
    sub->add_option("--seed", o.seed, "override experiment seed");
    sub->add_option("--out", o.out, "output directory (default: $PUACLMS_OUT_DIR or .)");
  };
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo learning curves");
  auto* th = app.add_subcommand("theory", "theoretical learning curves, steady state and bounds");
  auto* cmp = app.add_subcommand("compare", "theory against simulation");
  auto* stab = app.add_subcommand("stability", "mean and mean-square step-size bounds");
  auto* cx = app.add_subcommand("complexity", "real multiplies and additions per iteration");
  for (auto* s : {sim, th, cmp, stab}) add_common(s);
  cx->add_option("--n", cn, "filter length")->required();
  cx->add_option("--m", cm, "coefficients updated per iteration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(o, out);
    if (*th) return cmd_theory(o, out);
    if (*cmp) return cmd_compare(o, out);
    if (*stab) return cmd_stability(o, out);
    if (*cx) return cmd_complexity(cn, cm, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidSpec& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  err << app.help();
  return kExitConfig;
}

}  // namespace puaclms::cli
