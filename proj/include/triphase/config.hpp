#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "triphase/harness.hpp"
#include "triphase/interferometer.hpp"
#include "triphase/power_model.hpp"
#include "triphase/smc.hpp"
#include "triphase/strategies.hpp"

namespace triphase {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration, one entry per line, `#` comments.
/// Dotted keys group related settings (device.*, campaign.*, ...). Every key
/// must be consumed by a reader; finish() rejects leftovers by exact name.
class Config {
 public:
  static Config from_string(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected 'key = value', got '" + t + "'");
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
  }

  /// Apply a `key=value` override (CLI flags take precedence over the file).
  void set(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + assignment + "' is not of the form key=value");
    values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(key, it->second);
  }

  long get_int(const std::string& key, long fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + it->second + "'");
  }

  /// Whitespace-separated list of reals.
  std::vector<double> get_doubles(const std::string& key) const {
    used_.insert(key);
    auto it = values_.find(key);
    std::vector<double> out;
    if (it == values_.end()) return out;
    std::istringstream in(it->second);
    std::string tok;
    while (in >> tok) out.push_back(parse_double(key, tok));
    return out;
  }

  /// Reject any key that no reader asked for.
  void finish() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key))
        throw ConfigError("unknown key '" + key + "' in " + origin_);
  }

  /// Fully-resolved view (for echoing into outputs).
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static double parse_double(const std::string& key, const std::string& text) {
    try {
      std::size_t pos = 0;
      double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
    }
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

inline TritterKind parse_tritter_kind(const std::string& s, const std::string& key) {
  if (s == "fourier") return TritterKind::fourier;
  if (s == "reck_planar") return TritterKind::reck_planar;
  throw ConfigError("key '" + key + "': expected fourier or reck_planar, got '" + s + "'");
}

inline DeviceModel load_device(const Config& cfg) {
  DeviceModel dev;
  dev.tritter_a.kind = parse_tritter_kind(cfg.get_string("device.tritter_a", "fourier"),
                                          "device.tritter_a");
  dev.tritter_a.phi_t = cfg.get_double("device.phi_t_a", 0.0);
  dev.tritter_b.kind = parse_tritter_kind(cfg.get_string("device.tritter_b", "fourier"),
                                          "device.tritter_b");
  dev.tritter_b.phi_t = cfg.get_double("device.phi_t_b", 0.0);
  dev.noise.visibility = cfg.get_double("device.visibility", 1.0);
  dev.noise.background = cfg.get_double("device.background", 0.0);
  dev.input_mode = static_cast<int>(cfg.get_int("device.input_mode", 1));
  dev.reference_mode = static_cast<int>(cfg.get_int("device.reference_mode", 2));
  validate(dev);
  return dev;
}

inline ControlPolicy load_policy(const Config& cfg) {
  ControlPolicy policy;
  std::string kind = cfg.get_string("strategy.kind", "optimized");
  if (kind == "asymptotic")
    policy.kind = ControlPolicy::Kind::asymptotic;
  else if (kind == "hybrid")
    policy.kind = ControlPolicy::Kind::hybrid;
  else if (kind == "optimized")
    policy.kind = ControlPolicy::Kind::optimized;
  else if (kind == "random")
    policy.kind = ControlPolicy::Kind::random;
  else
    throw ConfigError(
        "key 'strategy.kind': expected asymptotic|hybrid|optimized|random, got '" +
        kind + "'");
  policy.k = static_cast<int>(cfg.get_int("strategy.k", 20));
  policy.utility_grid = static_cast<int>(cfg.get_int("strategy.utility_grid", 20));
  policy.refine = cfg.get_bool("strategy.refine", true);
  if (policy.k < 0) throw ConfigError("key 'strategy.k': must be >= 0");
  if (policy.utility_grid < 2) throw ConfigError("key 'strategy.utility_grid': must be >= 2");
  return policy;
}

/// Thermo-optic coefficient file: phi0, alpha.<j>.<i>, alpha_nl.<j>.<i>.<k>,
/// resistor.<i>.r0, resistor.<i>.kappa, max_power. Indices are 1-based in the
/// file. Only nonzero coefficients need to appear.
inline void load_power_model(const Config& cfg, ResponseCoefficients& coef,
                             ResistorState& base) {
  auto phi0 = cfg.get_doubles("power.phi0");
  if (phi0.size() == 2) {
    coef.phi0 = {phi0[0], phi0[1]};
  } else if (!phi0.empty()) {
    throw ConfigError("key 'power.phi0': expected two values");
  }
  for (int j = 1; j <= 2; ++j)
    for (int i = 1; i <= kResistorCount; ++i) {
      coef.alpha[j - 1][i - 1] = cfg.get_double(
          "power.alpha." + std::to_string(j) + "." + std::to_string(i), 0.0);
      for (int k = i; k <= kResistorCount; ++k)
        coef.alpha_nl[j - 1][i - 1][k - 1] =
            cfg.get_double("power.alpha_nl." + std::to_string(j) + "." +
                               std::to_string(i) + "." + std::to_string(k),
                           0.0);
    }
  base.max_power = cfg.get_double("power.max_power", 1.0);
  for (int i = 1; i <= kResistorCount; ++i) {
    base.r0[i - 1] = cfg.get_double("power.resistor." + std::to_string(i) + ".r0", 100.0);
    base.kappa[i - 1] =
        cfg.get_double("power.resistor." + std::to_string(i) + ".kappa", 0.0);
  }
}

inline ExperimentConfig load_experiment(const Config& cfg) {
  ExperimentConfig exp;
  exp.device = load_device(cfg);
  exp.policy = load_policy(cfg);
  exp.probes = static_cast<int>(cfg.get_int("campaign.probes", 100));
  exp.repetitions = static_cast<int>(cfg.get_int("campaign.repetitions", 50));
  exp.sampled_phase_pairs =
      static_cast<std::size_t>(cfg.get_int("campaign.phase_pairs", 20));
  auto phases = cfg.get_doubles("campaign.phases");
  if (!phases.empty()) {
    if (phases.size() % 2 != 0)
      throw ConfigError("key 'campaign.phases': expected an even number of values");
    for (std::size_t i = 0; i + 1 < phases.size(); i += 2)
      exp.phase_pairs.push_back({phases[i], phases[i + 1]});
  }
  exp.particles = static_cast<std::size_t>(cfg.get_int("campaign.particles", 2000));
  exp.seed = static_cast<std::uint64_t>(cfg.get_int("campaign.seed", 0));
  exp.threads = static_cast<int>(cfg.get_int("campaign.threads", 0));
  exp.resample.a = cfg.get_double("resample.a", 0.98);
  exp.resample.trigger_fraction = cfg.get_double("resample.trigger", 0.5);
  if (exp.resample.a <= 0.0 || exp.resample.a >= 1.0)
    throw ConfigError("key 'resample.a': must be in (0,1)");
  exp.hardware_mode = cfg.get_bool("hardware.enabled", false);
  exp.control_quantum = cfg.get_double("hardware.quantum", 0.0);
  if (exp.hardware_mode) load_power_model(cfg, exp.power_coefficients, exp.resistor_base);
  auto fixture = cfg.get_doubles("device.fisher_fixture");
  if (fixture.size() == 3) {
    Sym2 f{fixture[0], fixture[1], fixture[2]};
    exp.crb_trace_inverse = f.trace_inverse();
  } else if (!fixture.empty()) {
    throw ConfigError("key 'device.fisher_fixture': expected three values (f11 f12 f22)");
  }
  validate(exp);
  return exp;
}

}  // namespace triphase
