#pragma once

// Regression models and their training machinery: closed-form linear least
// squares, a two-hidden-layer ReLU MLP with hand-written backprop, MAE/MSE
// losses, and the evaluation metrics. Parameters are immutable values;
// updates produce new values.

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fedehr/errors.hpp"
#include "fedehr/linalg.hpp"
#include "fedehr/rng.hpp"

namespace fedehr {

enum class ModelKind { linear, mlp };
enum class LossKind { mae, mse };

inline const char* to_string(LossKind k) { return k == LossKind::mae ? "mae" : "mse"; }
inline LossKind loss_from_string(const std::string& s) {
  if (s == "mae") return LossKind::mae;
  if (s == "mse") return LossKind::mse;
  throw Error("unknown loss '" + s + "'");
}

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
};

struct MlpModel {
  // Layer sizes d_in -> h1 -> h2 -> 1. Weight matrices are (in x out),
  // row-major; the output layer has a single unit.
  Matrix w1, w2, w3;
  std::vector<double> b1, b2;
  double b3 = 0.0;
};

struct ModelParams {
  std::variant<LinearModel, MlpModel> value;
  std::uint64_t seed = 0;  // initialization seed, carried for provenance

  ModelKind kind() const {
    return std::holds_alternative<LinearModel>(value) ? ModelKind::linear : ModelKind::mlp;
  }
  const LinearModel& linear() const { return std::get<LinearModel>(value); }
  const MlpModel& mlp() const { return std::get<MlpModel>(value); }

  std::size_t input_arity() const {
    if (kind() == ModelKind::linear) return linear().weights.size();
    return mlp().w1.rows;
  }

  std::size_t param_count() const {
    if (kind() == ModelKind::linear) return linear().weights.size() + 1;
    const MlpModel& m = mlp();
    return m.w1.data.size() + m.b1.size() + m.w2.data.size() + m.b2.size() + m.w3.data.size() + 1;
  }
};

// Flat layout: linear = [weights..., bias];
// mlp = [w1 row-major..., b1..., w2..., b2..., w3..., b3].
inline std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> out;
  out.reserve(p.param_count());
  if (p.kind() == ModelKind::linear) {
    const auto& m = p.linear();
    out.insert(out.end(), m.weights.begin(), m.weights.end());
    out.push_back(m.bias);
  } else {
    const auto& m = p.mlp();
    out.insert(out.end(), m.w1.data.begin(), m.w1.data.end());
    out.insert(out.end(), m.b1.begin(), m.b1.end());
    out.insert(out.end(), m.w2.data.begin(), m.w2.data.end());
    out.insert(out.end(), m.b2.begin(), m.b2.end());
    out.insert(out.end(), m.w3.data.begin(), m.w3.data.end());
    out.push_back(m.b3);
  }
  return out;
}

inline ModelParams unflatten_like(const ModelParams& shape, const std::vector<double>& flat) {
  if (flat.size() != shape.param_count())
    throw ArityMismatch("expected " + std::to_string(shape.param_count()) + " parameters, got " +
                        std::to_string(flat.size()));
  ModelParams out = shape;
  std::size_t pos = 0;
  auto take = [&](double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = flat[pos++];
  };
  if (out.kind() == ModelKind::linear) {
    auto& m = std::get<LinearModel>(out.value);
    take(m.weights.data(), m.weights.size());
    m.bias = flat[pos++];
  } else {
    auto& m = std::get<MlpModel>(out.value);
    take(m.w1.data.data(), m.w1.data.size());
    take(m.b1.data(), m.b1.size());
    take(m.w2.data.data(), m.w2.data.size());
    take(m.b2.data(), m.b2.size());
    take(m.w3.data.data(), m.w3.data.size());
    m.b3 = flat[pos++];
  }
  return out;
}

inline ModelParams apply_delta(const ModelParams& p, const std::vector<double>& delta) {
  std::vector<double> flat = flatten(p);
  if (delta.size() != flat.size())
    throw ArityMismatch("delta arity " + std::to_string(delta.size()) + " vs " +
                        std::to_string(flat.size()));
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += delta[i];
  return unflatten_like(p, flat);
}

// --- initialization ------------------------------------------------------------

// Glorot-uniform weights, zero biases. Draw order is w1 row-major, then w2,
// then w3, so a seed pins every entry.
inline ModelParams mlp_init(std::size_t d_in, std::size_t h1, std::size_t h2, std::uint64_t seed) {
  if (d_in < 1 || h1 < 1 || h2 < 1) throw Error("all layer sizes must be >= 1");
  Rng rng(seed);
  MlpModel m;
  m.w1 = Matrix(d_in, h1);
  m.w2 = Matrix(h1, h2);
  m.w3 = Matrix(h2, 1);
  m.b1.assign(h1, 0.0);
  m.b2.assign(h2, 0.0);
  m.b3 = 0.0;
  auto fill = [&](Matrix& w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
  };
  fill(m.w1, d_in, h1);
  fill(m.w2, h1, h2);
  fill(m.w3, h2, 1);
  ModelParams p{std::move(m), seed};
  return p;
}

// --- prediction ----------------------------------------------------------------

namespace detail {

struct MlpActivations {
  std::vector<double> z1, a1, z2, a2;
  double y_hat = 0.0;
};

inline MlpActivations mlp_forward(const MlpModel& m, const double* x) {
  MlpActivations act;
  const std::size_t d = m.w1.rows, h1 = m.w1.cols, h2 = m.w2.cols;
  act.z1.assign(h1, 0.0);
  act.z2.assign(h2, 0.0);
  for (std::size_t j = 0; j < h1; ++j) {
    double s = m.b1[j];
    for (std::size_t i = 0; i < d; ++i) s += x[i] * m.w1.at(i, j);
    act.z1[j] = s;
  }
  act.a1 = act.z1;
  for (double& v : act.a1) v = v > 0 ? v : 0.0;
  for (std::size_t k = 0; k < h2; ++k) {
    double s = m.b2[k];
    for (std::size_t j = 0; j < h1; ++j) s += act.a1[j] * m.w2.at(j, k);
    act.z2[k] = s;
  }
  act.a2 = act.z2;
  for (double& v : act.a2) v = v > 0 ? v : 0.0;
  double y = m.b3;
  for (std::size_t k = 0; k < h2; ++k) y += act.a2[k] * m.w3.at(k, 0);
  act.y_hat = y;
  return act;
}

}  // namespace detail

inline std::vector<double> predict(const ModelParams& p, const Matrix& x) {
  if (x.cols != p.input_arity())
    throw ShapeMismatch("model expects " + std::to_string(p.input_arity()) + " features, got " +
                        std::to_string(x.cols));
  std::vector<double> out(x.rows, 0.0);
  if (p.kind() == ModelKind::linear) {
    const auto& m = p.linear();
    for (std::size_t r = 0; r < x.rows; ++r) {
      double s = m.bias;
      for (std::size_t j = 0; j < x.cols; ++j) s += x.at(r, j) * m.weights[j];
      out[r] = s;
    }
  } else {
    const auto& m = p.mlp();
    for (std::size_t r = 0; r < x.rows; ++r)
      out[r] = detail::mlp_forward(m, &x.data[r * x.cols]).y_hat;
  }
  return out;
}

// --- losses and metrics ----------------------------------------------------------

inline double loss_value(const std::vector<double>& pred, const std::vector<double>& target,
                         LossKind loss) {
  if (pred.size() != target.size() || pred.empty())
    throw LengthMismatch("prediction and target lengths must match and be nonzero");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    acc += loss == LossKind::mae ? std::abs(e) : e * e;
  }
  return acc / static_cast<double>(pred.size());
}

struct Metrics {
  double r_squared = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double mse = 0.0;
};

inline Metrics evaluate(const ModelParams& p, const Matrix& x, const std::vector<double>& y) {
  if (x.rows != y.size()) throw ShapeMismatch("rows of X must match length of y");
  const std::vector<double> pred = predict(p, x);
  Metrics m;
  m.mse = loss_value(pred, y, LossKind::mse);
  m.mae = loss_value(pred, y, LossKind::mae);
  m.rmse = std::sqrt(m.mse);

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - mean) * (v - mean);
  if (ss_tot == 0.0) throw ZeroVariance("target is constant; R^2 undefined");
  const double ss_res = m.mse * static_cast<double>(y.size());
  m.r_squared = 1.0 - ss_res / ss_tot;
  return m;
}

// --- gradients ---------------------------------------------------------------------

// Gradient of the mean per-sample loss with respect to the flat parameter
// vector. MAE uses the subgradient sign(y_hat - y) with sign(0) = 0; ReLU
// uses derivative 0 at the kink.
inline std::vector<double> gradient(const ModelParams& p, const Matrix& x,
                                    const std::vector<double>& y, LossKind loss) {
  if (x.rows != y.size()) throw ShapeMismatch("rows of X must match length of y");
  if (x.cols != p.input_arity())
    throw ShapeMismatch("model expects " + std::to_string(p.input_arity()) + " features");
  if (x.rows == 0) throw ShapeMismatch("gradient over zero samples");
  const double inv_n = 1.0 / static_cast<double>(x.rows);

  auto dloss = [&](double y_hat, double target) {
    const double e = y_hat - target;
    if (loss == LossKind::mse) return 2.0 * e * inv_n;
    return (e > 0 ? 1.0 : e < 0 ? -1.0 : 0.0) * inv_n;
  };

  if (p.kind() == ModelKind::linear) {
    const auto& m = p.linear();
    std::vector<double> grad(m.weights.size() + 1, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
      double y_hat = m.bias;
      for (std::size_t j = 0; j < x.cols; ++j) y_hat += x.at(r, j) * m.weights[j];
      const double e = dloss(y_hat, y[r]);
      for (std::size_t j = 0; j < x.cols; ++j) grad[j] += e * x.at(r, j);
      grad.back() += e;
    }
    return grad;
  }

  const auto& m = p.mlp();
  const std::size_t d = m.w1.rows, h1 = m.w1.cols, h2 = m.w2.cols;
  Matrix gw1(d, h1), gw2(h1, h2), gw3(h2, 1);
  std::vector<double> gb1(h1, 0.0), gb2(h2, 0.0);
  double gb3 = 0.0;

  std::vector<double> dz2(h2), dz1(h1);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xi = &x.data[r * x.cols];
    const detail::MlpActivations act = detail::mlp_forward(m, xi);
    const double e = dloss(act.y_hat, y[r]);

    gb3 += e;
    for (std::size_t k = 0; k < h2; ++k) {
      gw3.at(k, 0) += e * act.a2[k];
      const double da2 = e * m.w3.at(k, 0);
      dz2[k] = act.z2[k] > 0 ? da2 : 0.0;
      gb2[k] += dz2[k];
    }
    for (std::size_t j = 0; j < h1; ++j) {
      double da1 = 0.0;
      for (std::size_t k = 0; k < h2; ++k) {
        gw2.at(j, k) += act.a1[j] * dz2[k];
        da1 += dz2[k] * m.w2.at(j, k);
      }
      dz1[j] = act.z1[j] > 0 ? da1 : 0.0;
      gb1[j] += dz1[j];
    }
    for (std::size_t i = 0; i < d; ++i) {
      const double v = xi[i];
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < h1; ++j) gw1.at(i, j) += v * dz1[j];
    }
  }

  std::vector<double> grad;
  grad.reserve(p.param_count());
  grad.insert(grad.end(), gw1.data.begin(), gw1.data.end());
  grad.insert(grad.end(), gb1.begin(), gb1.end());
  grad.insert(grad.end(), gw2.data.begin(), gw2.data.end());
  grad.insert(grad.end(), gb2.begin(), gb2.end());
  grad.insert(grad.end(), gw3.data.begin(), gw3.data.end());
  grad.push_back(gb3);
  return grad;
}

// --- training ----------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  LossKind loss = LossKind::mae;
  std::uint64_t seed = 0;
};

namespace detail {

inline Matrix row_slice(const Matrix& x, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, x.cols);
  std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(begin * x.cols),
            x.data.begin() + static_cast<std::ptrdiff_t>(end * x.cols), out.data.begin());
  return out;
}

}  // namespace detail

// One sequential pass of mini-batch SGD over the shard, batches taken in row
// order, gradients evaluated at the evolving local parameters. Returns the
// total parameter displacement (final minus initial); with batch_size >= the
// shard size this is exactly -lr * gradient.
inline std::vector<double> local_step(const ModelParams& p, const Matrix& x,
                                      const std::vector<double>& y, const TrainConfig& cfg) {
  if (x.rows == 0) throw EmptyShard("local step on an empty shard");
  if (cfg.batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0)) throw Error("learning_rate must be non-negative");

  ModelParams current = p;
  for (std::size_t begin = 0; begin < x.rows; begin += cfg.batch_size) {
    const std::size_t end = std::min(begin + cfg.batch_size, x.rows);
    const Matrix xb = detail::row_slice(x, begin, end);
    const std::vector<double> yb(y.begin() + static_cast<std::ptrdiff_t>(begin),
                                 y.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<double> g = gradient(current, xb, yb, cfg.loss);
    for (double& v : g) v *= -cfg.learning_rate;
    current = apply_delta(current, g);
  }

  const std::vector<double> before = flatten(p);
  std::vector<double> after = flatten(current);
  for (std::size_t i = 0; i < after.size(); ++i) after[i] -= before[i];
  return after;
}

// Centralized trainer: cfg.epochs sequential passes over the pooled data.
inline ModelParams train_sgd(const ModelParams& init, const Matrix& x,
                             const std::vector<double>& y, const TrainConfig& cfg) {
  ModelParams current = init;
  TrainConfig one_pass = cfg;
  one_pass.epochs = 1;
  for (std::size_t e = 0; e < cfg.epochs; ++e)
    current = apply_delta(current, local_step(current, x, y, one_pass));
  return current;
}

// Ordinary least squares through column-pivoted QR; the intercept column is
// appended internally and reported back as the bias. RankPolicy::truncate
// accepts collinear designs (a full one-hot encoding plus intercept is one)
// by zeroing the coefficients of numerically dependent columns.
inline ModelParams fit_linear_ols(const Matrix& x, const std::vector<double>& y,
                                  RankPolicy policy = RankPolicy::strict) {
  if (x.rows != y.size()) throw ShapeMismatch("rows of X must match length of y");
  if (x.rows <= x.cols) throw ShapeMismatch("need more rows than columns");
  Matrix a(x.rows, x.cols + 1);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t j = 0; j < x.cols; ++j) a.at(r, j) = x.at(r, j);
    a.at(r, x.cols) = 1.0;
  }
  const std::vector<double> coef = solve_least_squares(a, y, policy);
  LinearModel m;
  m.weights.assign(coef.begin(), coef.end() - 1);
  m.bias = coef.back();
  return ModelParams{std::move(m), 0};
}

// --- serialization -------------------------------------------------------------------

inline nlohmann::json model_to_json(const ModelParams& p) {
  nlohmann::json j;
  if (p.kind() == ModelKind::linear) {
    const auto& m = p.linear();
    j["kind"] = "linear";
    j["shapes"] = {m.weights.size()};
    j["weights"] = m.weights;
    j["bias"] = m.bias;
  } else {
    const auto& m = p.mlp();
    j["kind"] = "mlp";
    j["shapes"] = {m.w1.rows, m.w1.cols, m.w2.cols, std::size_t{1}};
    j["w1"] = m.w1.data;
    j["b1"] = m.b1;
    j["w2"] = m.w2.data;
    j["b2"] = m.b2;
    j["w3"] = m.w3.data;
    j["b3"] = m.b3;
  }
  j["seed"] = p.seed;
  return j;
}

inline ModelParams model_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    LinearModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    return ModelParams{std::move(m), j.value("seed", std::uint64_t{0})};
  }
  if (kind != "mlp") throw Error("unknown model kind '" + kind + "'");
  const auto shapes = j.at("shapes").get<std::vector<std::size_t>>();
  if (shapes.size() != 4 || shapes[3] != 1) throw Error("bad mlp shapes");
  MlpModel m;
  m.w1 = Matrix(shapes[0], shapes[1]);
  m.w2 = Matrix(shapes[1], shapes[2]);
  m.w3 = Matrix(shapes[2], 1);
  m.w1.data = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2.data = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<std::vector<double>>();
  m.w3.data = j.at("w3").get<std::vector<double>>();
  m.b3 = j.at("b3").get<double>();
  if (m.w1.data.size() != shapes[0] * shapes[1] || m.b1.size() != shapes[1] ||
      m.w2.data.size() != shapes[1] * shapes[2] || m.b2.size() != shapes[2] ||
      m.w3.data.size() != shapes[2])
    throw Error("mlp parameter arrays do not match shapes");
  return ModelParams{std::move(m), j.value("seed", std::uint64_t{0})};
}

}  // namespace fedehr
