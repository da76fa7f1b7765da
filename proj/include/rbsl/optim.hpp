#pragma once

#include <json.hpp>

#include "rbsl/nn.hpp"

namespace rbsl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  Gradients<T> m;
  Gradients<T> v;

  AdamState() = default;
  AdamState(const Mlp<T>& net, AdamConfig cfg) : config(cfg), m(net.zero_gradients()), v(net.zero_gradients()) {}

  bool operator==(const AdamState& o) const {
    if (!(config == o.config) || step != o.step || m.w.size() != o.m.w.size()) return false;
    for (std::size_t i = 0; i < m.w.size(); ++i)
      if (m.w[i] != o.m.w[i] || m.b[i] != o.m.b[i] || v.w[i] != o.v.w[i] || v.b[i] != o.v.b[i]) return false;
    return true;
  }
};

/// Bias-corrected adaptive-moment update, in place.
template <typename T>
void adam_step(Mlp<T>& net, const Gradients<T>& g, AdamState<T>& s) {
  if (s.m.w.size() != net.num_layers()) s = AdamState<T>(net, s.config);
  if (g.w.size() != net.num_layers()) throw ShapeError("adam_step: gradient does not match network");
  s.step += 1;
  const T b1 = static_cast<T>(s.config.beta1);
  const T b2 = static_cast<T>(s.config.beta2);
  const T lr = static_cast<T>(s.config.lr);
  const T eps = static_cast<T>(s.config.eps);
  const T c1 = T(1) - std::pow(b1, static_cast<T>(s.step));
  const T c2 = T(1) - std::pow(b2, static_cast<T>(s.step));

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (T(1) - b1) * grad;
    v = b2 * v + (T(1) - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].w, g.w[k], s.m.w[k], s.v.w[k]);
    update(layers[k].b, g.b[k], s.m.b[k], s.v.b[k]);
  }
}

/// Slowly-moving shadow copy of a network for TD targets.
template <typename T>
struct TargetTracker {
  Mlp<T> shadow;
  double rho = 0.995;

  TargetTracker() = default;
  TargetTracker(const Mlp<T>& source, double polyak) : shadow(source), rho(polyak) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("polyak coefficient must lie in [0,1]");
  }
};

/// shadow <- rho * shadow + (1 - rho) * source
template <typename T>
void polyak_update(TargetTracker<T>& tracker, const Mlp<T>& source) {
  if (!tracker.shadow.same_shape(source)) throw ShapeError("polyak_update: shapes differ");
  const T rho = static_cast<T>(tracker.rho);
  auto& dst = tracker.shadow.layers();
  const auto& src = source.layers();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    dst[k].w = rho * dst[k].w + (T(1) - rho) * src[k].w;
    dst[k].b = rho * dst[k].b + (T(1) - rho) * src[k].b;
  }
}

// ---- checkpoint JSON ----------------------------------------------------------

template <typename T>
nlohmann::json matrix_to_json(const MatrixX<T>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
nlohmann::json vector_to_json(const VectorX<T>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

template <typename T>
MatrixX<T> matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError("'" + field + "' must be a non-empty 2-D array");
  MatrixX<T> m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != j[0].size()) throw ConfigError("'" + field + "' is ragged");
    for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<T>();
  }
  return m;
}

template <typename T>
VectorX<T> vector_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError("'" + field + "' must be an array");
  VectorX<T> v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<T>();
  return v;
}

template <typename T>
nlohmann::json to_json(const Mlp<T>& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"w", matrix_to_json(l.w)}, {"b", vector_to_json(l.b)}, {"act", to_string(l.act)}});
  return {{"layers", std::move(layers)}};
}

template <typename T>
Mlp<T> network_from_json(const nlohmann::json& j) {
  if (!j.contains("layers") || !j.at("layers").is_array()) throw ConfigError("checkpoint: missing 'layers'");
  std::vector<Layer<T>> layers;
  for (const auto& jl : j.at("layers")) {
    Layer<T> l;
    l.w = matrix_from_json<T>(jl.at("w"), "w");
    l.b = vector_from_json<T>(jl.at("b"), "b");
    l.act = parse_activation(jl.at("act").get<std::string>());
    layers.push_back(std::move(l));
  }
  return Mlp<T>(std::move(layers));
}

template <typename T>
nlohmann::json to_json(const AdamState<T>& s) {
  auto moments = [](const Gradients<T>& g) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t k = 0; k < g.w.size(); ++k) out.push_back({{"w", matrix_to_json(g.w[k])}, {"b", vector_to_json(g.b[k])}});
    return out;
  };
  return {{"lr", s.config.lr},       {"beta1", s.config.beta1}, {"beta2", s.config.beta2},
          {"eps", s.config.eps},     {"step", s.step},          {"m", moments(s.m)},
          {"v", moments(s.v)}};
}

template <typename T>
AdamState<T> adam_state_from_json(const nlohmann::json& j) {
  AdamState<T> s;
  s.config.lr = j.at("lr").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.eps = j.at("eps").get<double>();
  s.step = j.at("step").get<std::int64_t>();
  auto moments = [](const nlohmann::json& arr, Gradients<T>& g) {
    for (const auto& e : arr) {
      g.w.push_back(matrix_from_json<T>(e.at("w"), "w"));
      g.b.push_back(vector_from_json<T>(e.at("b"), "b"));
    }
  };
  moments(j.at("m"), s.m);
  moments(j.at("v"), s.v);
  return s;
}

}  // namespace rbsl
