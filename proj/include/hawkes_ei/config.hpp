#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hawkes_ei/errors.hpp"
#include "hawkes_ei/model.hpp"

namespace hawkes_ei {

// Parsed `key = value` run configuration. Model keys stay optional until
// build_params assembles and validates them, so commands can report exactly
// which key is missing. Baselines given as a bare scalar broadcast to
// per-unit lists.
struct RunConfig {
  std::optional<std::int64_t> n_plus, n_minus;
  std::optional<double> c_pp, c_pm, c_mp, c_mm, nu_plus, nu_minus;
  std::optional<std::vector<double>> a_plus, a_minus;
  bool a_plus_scalar = false;
  bool a_minus_scalar = false;

  std::optional<std::uint64_t> seed, max_events;
  std::optional<double> horizon, sample_dt, x0, y0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters after number '" + s + "'", line);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("expected a number, got '" + s + "'", line);
  }
}

inline std::int64_t parse_int(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw ConfigError("trailing characters after integer '" + s + "'", line);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("expected an integer, got '" + s + "'", line);
  }
}

inline std::uint64_t parse_uint(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size() || (!s.empty() && s[0] == '-'))
      throw ConfigError("expected a nonnegative integer, got '" + s + "'", line);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("expected a nonnegative integer, got '" + s + "'", line);
  }
}

// Either `[v1, v2, ...]` or a bare scalar (flagged for broadcast).
inline std::vector<double> parse_list(const std::string& s, int line, bool* scalar) {
  if (s.empty()) throw ConfigError("empty value", line);
  if (s.front() != '[') {
    *scalar = true;
    return {parse_double(s, line)};
  }
  if (s.back() != ']') throw ConfigError("unterminated list '" + s + "'", line);
  *scalar = false;
  std::vector<double> out;
  std::string body = s.substr(1, s.size() - 2);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string v = trim(item);
    if (v.empty()) throw ConfigError("empty list element", line);
    out.push_back(parse_double(v, line));
  }
  if (out.empty()) throw ConfigError("empty list", line);
  return out;
}

}  // namespace detail

// Line-based `key = value` text; `#` starts a comment; lists in brackets.
// Unknown and duplicate keys are rejected with the offending line number.
inline RunConfig parse_config_stream(std::istream& in) {
  RunConfig cfg;
  std::string raw;
  int line = 0;
  auto assign_double = [&](std::optional<double>& slot, const std::string& value,
                           const std::string& key) {
    if (slot) throw ConfigError("duplicate key '" + key + "'", line);
    slot = detail::parse_double(value, line);
  };
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string text = detail::trim(raw);
    if (text.empty()) continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + text + "'", line);
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key before '='", line);
    if (value.empty()) throw ConfigError("missing value for key '" + key + "'", line);

    if (key == "n_plus") {
      if (cfg.n_plus) throw ConfigError("duplicate key 'n_plus'", line);
      cfg.n_plus = detail::parse_int(value, line);
    } else if (key == "n_minus") {
      if (cfg.n_minus) throw ConfigError("duplicate key 'n_minus'", line);
      cfg.n_minus = detail::parse_int(value, line);
    } else if (key == "c_pp") {
      assign_double(cfg.c_pp, value, key);
    } else if (key == "c_pm") {
      assign_double(cfg.c_pm, value, key);
    } else if (key == "c_mp") {
      assign_double(cfg.c_mp, value, key);
    } else if (key == "c_mm") {
      assign_double(cfg.c_mm, value, key);
    } else if (key == "nu_plus") {
      assign_double(cfg.nu_plus, value, key);
    } else if (key == "nu_minus") {
      assign_double(cfg.nu_minus, value, key);
    } else if (key == "a_plus") {
      if (cfg.a_plus) throw ConfigError("duplicate key 'a_plus'", line);
      cfg.a_plus = detail::parse_list(value, line, &cfg.a_plus_scalar);
    } else if (key == "a_minus") {
      if (cfg.a_minus) throw ConfigError("duplicate key 'a_minus'", line);
      cfg.a_minus = detail::parse_list(value, line, &cfg.a_minus_scalar);
    } else if (key == "seed") {
      if (cfg.seed) throw ConfigError("duplicate key 'seed'", line);
      cfg.seed = detail::parse_uint(value, line);
    } else if (key == "max_events") {
      if (cfg.max_events) throw ConfigError("duplicate key 'max_events'", line);
      cfg.max_events = detail::parse_uint(value, line);
    } else if (key == "horizon") {
      assign_double(cfg.horizon, value, key);
    } else if (key == "sample_dt") {
      assign_double(cfg.sample_dt, value, key);
    } else if (key == "x0") {
      assign_double(cfg.x0, value, key);
    } else if (key == "y0") {
      assign_double(cfg.y0, value, key);
    } else {
      throw ConfigError("unknown key '" + key + "'", line);
    }
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config_stream(in);
}

// Assembles the model parameters: every model key must be present; scalar
// baselines broadcast to the unit count; then the sign/shape validation runs.
inline ModelParams build_params(const RunConfig& cfg) {
  auto require = [](const auto& slot, const char* key) {
    if (!slot) throw ConfigError(std::string("missing required key '") + key + "'");
    return *slot;
  };
  ModelParams p;
  p.n_plus = require(cfg.n_plus, "n_plus");
  p.n_minus = require(cfg.n_minus, "n_minus");
  p.c_pp = require(cfg.c_pp, "c_pp");
  p.c_pm = require(cfg.c_pm, "c_pm");
  p.c_mp = require(cfg.c_mp, "c_mp");
  p.c_mm = require(cfg.c_mm, "c_mm");
  p.nu_plus = require(cfg.nu_plus, "nu_plus");
  p.nu_minus = require(cfg.nu_minus, "nu_minus");
  p.a_plus = require(cfg.a_plus, "a_plus");
  p.a_minus = require(cfg.a_minus, "a_minus");
  if (cfg.a_plus_scalar && p.n_plus > 1)
    p.a_plus.assign(static_cast<std::size_t>(p.n_plus), p.a_plus[0]);
  if (cfg.a_minus_scalar && p.n_minus > 1)
    p.a_minus.assign(static_cast<std::size_t>(p.n_minus), p.a_minus[0]);
  return validate_params(std::move(p));
}

}  // namespace hawkes_ei
