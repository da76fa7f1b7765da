#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace rbsl {

inline constexpr const char* kVersion = "0.3.0";

using Rng = std::mt19937_64;

/// Invalid configuration or unsatisfiable request.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line and the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss evaluated to NaN/Inf. `batch_index` is the training step that produced it.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::int64_t batch_index, const std::string& what)
      : std::runtime_error("non-finite value at batch " + std::to_string(batch_index) + ": " + what),
        batch_index_(batch_index) {}

  std::int64_t batch_index() const { return batch_index_; }

 private:
  std::int64_t batch_index_;
};

/// Independent, reproducible stream for sub-task `index` of a run seeded with `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// sum_t gamma^t x_t
template <typename T>
double discounted_sum(std::span<const T> xs, double gamma) {
  double total = 0.0;
  double scale = 1.0;
  for (const T& x : xs) {
    total += scale * static_cast<double>(x);
    scale *= gamma;
  }
  return total;
}

}  // namespace rbsl
