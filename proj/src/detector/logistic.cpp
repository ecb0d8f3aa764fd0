// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/detector/logistic.hpp"

#include <cmath>
#include <string>

#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"
#include "ecd/detector/training_data.hpp"

namespace ecd::detector {
namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct Problem {
  const Eigen::MatrixXd& x;
  Eigen::VectorXd y;
  Eigen::VectorXd weight;  // normalized to sum to 1
  double l2;

  double objective(const Eigen::VectorXd& w, double b) const {
    const Eigen::VectorXd z = (x * w).array() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += weight[i] * (softplus(z[i]) - y[i] * z[i]);
    return loss + 0.5 * l2 * w.squaredNorm();
  }

  void gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb) const {
    const Eigen::VectorXd z = (x * w).array() + b;
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = weight[i] * (sigmoid(z[i]) - y[i]);
    gw = x.transpose() * r + l2 * w;
    gb = r.sum();
  }
};

Problem make_problem(const Eigen::MatrixXd& rows, std::span<const int> labels, std::span<const double> sample_weight,
                     double l2) {
  check_training_data(rows, labels, sample_weight);
  Problem p{rows, Eigen::VectorXd(rows.rows()), Eigen::VectorXd(rows.rows()), l2};
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    p.y[i] = labels[static_cast<std::size_t>(i)];
    p.weight[i] = sample_weight.empty() ? 1.0 : sample_weight[static_cast<std::size_t>(i)];
  }
  p.weight /= p.weight.sum();
  return p;
}

}  // namespace

LogisticModel train_logistic(const Eigen::MatrixXd& rows, std::span<const int> labels, const LogisticConfig& config,
                             std::span<const double> sample_weight) {
  if (config.max_iter < 0 || !(config.tol >= 0.0) || !(config.l2 >= 0.0)) {
    throw ConfigError("logistic config needs max_iter >= 0, tol >= 0 and l2 >= 0");
  }
  const Problem p = make_problem(rows, labels, sample_weight, config.l2);

  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(rows.cols());
  m.bias = 0.0;
  double loss = p.objective(m.weights, m.bias);
  m.loss_history.push_back(loss);

  Eigen::VectorXd gw;
  double gb = 0.0;
  double step = 1.0;
  for (int it = 0; it < config.max_iter; ++it) {
    p.gradient(m.weights, m.bias, gw, gb);
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) <= config.tol) break;

    // Try a larger step than last time, then halve until the Armijo
    // condition holds.
    step = std::min(step * 2.0, 1e6);
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const Eigen::VectorXd w_new = m.weights - step * gw;
      const double b_new = m.bias - step * gb;
      const double loss_new = p.objective(w_new, b_new);
      if (loss_new <= loss - 1e-4 * step * gnorm2) {
        m.weights = w_new;
        m.bias = b_new;
        loss = loss_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable descent left
    m.loss_history.push_back(loss);
    m.iterations = it + 1;
  }
  m.final_loss = loss;
  return m;
}

double raw_score(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != model.weights.size()) {
    throw DataError("feature vector has " + std::to_string(z.size()) + " values, logistic model expects " +
                    std::to_string(model.weights.size()));
  }
  return model.weights.dot(z) + model.bias;
}

double logistic_objective(const Eigen::MatrixXd& rows, std::span<const int> labels, std::span<const double> weight,
                          const Eigen::VectorXd& w, double bias, double l2) {
  return make_problem(rows, labels, weight, l2).objective(w, bias);
}

}  // namespace ecd::detector
