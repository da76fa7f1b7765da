#pragma once

// JSON Lines dataset files. Line 1 is a header with the env config; every further
// line is one trajectory.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rbsl/dataset.hpp"

namespace rbsl {

inline constexpr int kDatasetFormatVersion = 1;

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
  using nlohmann::json;
  json states = json::array();
  for (const auto& s : t.states) states.push_back(s);
  json actions = json::array();
  for (const auto& a : t.actions) actions.push_back(vec_to_json(a));
  return {
      {"provenance", to_string(t.provenance)},
      {"goal", vec_to_json(t.goal.target)},
      {"tolerance", t.goal.tolerance},
      {"obstacle",
       {{"center", vec_to_json(t.obstacle.center)},
        {"half_extents", vec_to_json(t.obstacle.half_extents)},
        {"inflation", t.obstacle.inflation}}},
      {"states", std::move(states)},
      {"actions", std::move(actions)},
      {"rewards", t.rewards},
      {"costs", t.costs},
  };
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(line, key, "missing");
  return j.at(key);
}

inline double number(const nlohmann::json& j, std::size_t line, const std::string& field) {
  if (!j.is_number()) throw ParseError(line, field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(line, field, "non-finite number");
  return v;
}

inline Vec2 vec2(const nlohmann::json& j, std::size_t line, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw ParseError(line, field, "expected a 2-element array");
  return {number(j[0], line, field), number(j[1], line, field)};
}

inline std::vector<int> binary_array(const nlohmann::json& j, std::size_t expected, std::size_t line,
                                     const std::string& field) {
  if (!j.is_array() || j.size() != expected)
    throw ParseError(line, field, "expected an array of length " + std::to_string(expected));
  std::vector<int> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) throw ParseError(line, field, "entry " + std::to_string(i) + " is not an integer");
    const auto v = j[i].get<long long>();
    if (v != 0 && v != 1)
      throw ParseError(line, field, "entry " + std::to_string(i) + " = " + std::to_string(v) + " is not 0 or 1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace detail

inline Trajectory trajectory_from_json(const nlohmann::json& j, int horizon, std::size_t line) {
  using detail::require;
  Trajectory t;
  const auto& prov = require(j, "provenance", line);
  if (prov == "expert")
    t.provenance = Provenance::Expert;
  else if (prov == "random")
    t.provenance = Provenance::Random;
  else
    throw ParseError(line, "provenance", "expected \"expert\" or \"random\"");

  t.goal.target = detail::vec2(require(j, "goal", line), line, "goal");
  t.goal.tolerance = detail::number(require(j, "tolerance", line), line, "tolerance");
  if (!(t.goal.tolerance > 0.0)) throw ParseError(line, "tolerance", "must be > 0");

  const auto& obs = require(j, "obstacle", line);
  t.obstacle.center = detail::vec2(require(obs, "center", line), line, "obstacle.center");
  t.obstacle.half_extents = detail::vec2(require(obs, "half_extents", line), line, "obstacle.half_extents");
  t.obstacle.inflation = detail::number(require(obs, "inflation", line), line, "obstacle.inflation");
  try {
    t.obstacle.validate();
  } catch (const ConfigError& e) {
    throw ParseError(line, "obstacle", e.what());
  }

  const auto& states = require(j, "states", line);
  if (!states.is_array() || states.size() != static_cast<std::size_t>(horizon) + 1)
    throw ParseError(line, "states", "expected " + std::to_string(horizon + 1) + " states");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    if (!s.is_array() || s.size() != kObsDim)
      throw ParseError(line, "states", "state " + std::to_string(i) + " must have " + std::to_string(kObsDim) + " entries");
    Observation o{};
    for (int k = 0; k < kObsDim; ++k) o[k] = detail::number(s[k], line, "states");
    t.states.push_back(o);
  }

  const auto& actions = require(j, "actions", line);
  if (!actions.is_array() || actions.size() != static_cast<std::size_t>(horizon))
    throw ParseError(line, "actions", "expected " + std::to_string(horizon) + " actions");
  for (const auto& a : actions) t.actions.push_back(detail::vec2(a, line, "actions"));

  t.rewards = detail::binary_array(require(j, "rewards", line), horizon, line, "rewards");
  t.costs = detail::binary_array(require(j, "costs", line), horizon, line, "costs");
  return t;
}

inline void save_dataset(const Dataset& d, std::ostream& os) {
  nlohmann::json header = {{"format_version", kDatasetFormatVersion}, {"env_config", to_json(d.env)}};
  os << header.dump() << '\n';
  for (const auto& t : d.trajectories) os << trajectory_to_json(t).dump() << '\n';
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  save_dataset(d, os);
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline Dataset load_dataset(std::istream& is) {
  Dataset d;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(is, text)) {
    ++line;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, "<json>", e.what());
    }
    if (!have_header) {
      const auto& version = detail::require(j, "format_version", line);
      if (version != kDatasetFormatVersion)
        throw ParseError(line, "format_version", "unsupported version " + version.dump());
      try {
        d.env = env_config_from_json(detail::require(j, "env_config", line));
      } catch (const ConfigError& e) {
        throw ParseError(line, "env_config", e.what());
      }
      have_header = true;
      continue;
    }
    d.trajectories.push_back(trajectory_from_json(j, d.env.horizon, line));
  }
  if (!have_header) throw ParseError(line + 1, "format_version", "missing header line");
  return d;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  return load_dataset(is);
}

}  // namespace rbsl
