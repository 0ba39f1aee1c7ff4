#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "puaclms/errors.hpp"
#include "puaclms/schedule.hpp"
#include "puaclms/signal.hpp"

namespace puaclms::harness {

enum class InitMode { zero, random };

inline std::string_view to_string(InitMode m) { return m == InitMode::zero ? "zero" : "random"; }

/// One experiment. Keys and units are listed in configs/SCHEMA.md.
struct ExperimentConfig {
  std::size_t n = 8;
  std::size_t m = 4;
  filter::UpdateMode mode = filter::UpdateMode::sequential;
  filter::Partition partition = filter::Partition::contiguous;
  double mu = 0.02;
  std::size_t trials = 100;
  std::size_t horizon = 2000;
  std::uint64_t seed = 1;
  std::uint64_t plant_seed = 7;
  double sigma_v2 = 0.01;
  double meas_cvar = 0.0;
  double ar_a = 0.3;
  double ar_b = 0.1;
  double noise_var = 1.0;
  double noise_cvar = 0.9;
  InitMode init = InitMode::zero;
  double steady_frac = 0.1;
  std::size_t theory_samples = 100000;
  std::size_t workers = 0;  // 0: one per hardware thread

  /// Number of coefficients actually adapted per iteration.
  std::size_t effective_m() const { return mode == filter::UpdateMode::full ? n : m; }

  signal::ArInputSpec input_spec() const { return {ar_a, ar_b, {noise_var, {noise_cvar, 0.0}}}; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (n < 1) fail("n must be at least 1");
    if (mode != filter::UpdateMode::full) {
      if (m < 1 || m > n) fail("m must satisfy 1 <= m <= n");
      if (n % m != 0) fail("n must be a multiple of m");
    }
    if (!(mu >= 0.0) || !std::isfinite(mu)) fail("mu must be finite and nonnegative");
    if (trials < 1) fail("trials must be at least 1");
    if (horizon < 1) fail("horizon must be at least 1");
    if (!(sigma_v2 >= 0.0) || !std::isfinite(sigma_v2)) fail("sigma_v2 must be finite and nonnegative");
    if (std::abs(meas_cvar) > sigma_v2 * (1.0 + 1e-12)) fail("|meas_cvar| must not exceed sigma_v2");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) fail("noise_var must be finite and nonnegative");
    if (std::abs(noise_cvar) > noise_var * (1.0 + 1e-12)) fail("|noise_cvar| must not exceed noise_var");
    if (!std::isfinite(ar_a) || !std::isfinite(ar_b)) fail("ar_a and ar_b must be finite");
    if (std::abs(ar_a) + std::abs(ar_b) >= 1.0) fail("|ar_a| + |ar_b| must be below 1 for a stationary input");
    if (!(steady_frac > 0.0 && steady_frac <= 0.5)) fail("steady_frac must lie in (0, 0.5]");
    if (theory_samples < 1) fail("theory_samples must be at least 1");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + std::string(key) + "': expected a finite real number, got '" + s + "'");
  }
  return out;
}

}  // namespace detail

/// Applies one key = value assignment. Unknown keys are errors.
inline void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_real;
  using detail::parse_uint;
  try {
    if (key == "n") cfg.n = parse_uint(key, value);
    else if (key == "m") cfg.m = parse_uint(key, value);
    else if (key == "mode") cfg.mode = filter::parse_update_mode(value);
    else if (key == "partition") cfg.partition = filter::parse_partition(value);
    else if (key == "mu") cfg.mu = parse_real(key, value);
    else if (key == "trials") cfg.trials = parse_uint(key, value);
    else if (key == "horizon") cfg.horizon = parse_uint(key, value);
    else if (key == "seed") cfg.seed = parse_uint(key, value);
    else if (key == "plant_seed") cfg.plant_seed = parse_uint(key, value);
    else if (key == "sigma_v2") cfg.sigma_v2 = parse_real(key, value);
    else if (key == "meas_cvar") cfg.meas_cvar = parse_real(key, value);
    else if (key == "ar_a") cfg.ar_a = parse_real(key, value);
    else if (key == "ar_b") cfg.ar_b = parse_real(key, value);
    else if (key == "noise_var") cfg.noise_var = parse_real(key, value);
    else if (key == "noise_cvar") cfg.noise_cvar = parse_real(key, value);
    else if (key == "init") {
      if (value == "zero") cfg.init = InitMode::zero;
      else if (value == "random") cfg.init = InitMode::random;
      else throw ConfigError("key 'init': expected zero|random, got '" + std::string(value) + "'");
    } else if (key == "steady_frac") cfg.steady_frac = parse_real(key, value);
    else if (key == "theory_samples") cfg.theory_samples = parse_uint(key, value);
    else if (key == "workers") cfg.workers = parse_uint(key, value);
    else throw ConfigError("unknown key '" + std::string(key) + "'");
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
}

/// Parses flat `key = value` text. `#` starts a comment; blank lines are
/// ignored; a key may appear once.
inline ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>") {
  ExperimentConfig cfg;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where() + "expected 'key = value'");
    if (const auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where() + "key '" + std::string(key) + "' already set on line " + std::to_string(it->second));
    }
    seen.emplace(std::string(key), line_no);
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace puaclms::harness
