#include <cmath>
#include <limits>

#include "kinvid/kin_classifier.hpp"
#include "kinvid/media_io.hpp"

namespace kinvid {

namespace {

constexpr double kTau = 1e-12;

}  // namespace

// Follows the SMO variant of Fan, Chen & Lin (WSS 2) for
//   min 1/2 a'Qa - e'a,  0 <= a <= C,  y'a = 0,  Q_ij = y_i y_j K_ij.
DualSolution svm_solve_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& labels, const std::vector<int>& train,
                            const SvmOptions& options) {
  const auto n = static_cast<Eigen::Index>(train.size());
  if (options.C <= 0) throw ValidationError("C must be positive");
  bool pos = false, neg = false;
  for (int i : train) {
    if (labels[i] > 0)
      pos = true;
    else
      neg = true;
  }
  if (!pos || !neg) throw ValidationError("single class in training data");

  const Eigen::MatrixXd k = gram(train, train);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[train[i]] > 0 ? 1.0 : -1.0;
  const double c = options.C;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  auto in_up = [&](Eigen::Index t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](Eigen::Index t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

  DualSolution out;
  long iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t)
      if (in_up(t) && -y[t] * grad[t] > gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i < 0) continue;
      const double b = gmax - v;
      if (b > 0) {
        double a = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (a <= 0) a = kTau;
        const double score = -(b * b) / a;
        if (score < best) {
          best = score;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < options.tolerance) {
      out.converged = true;
      break;
    }

    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qii = k(i, i), qjj = k(j, j), qij = y[i] * y[j] * k(i, j);
    if (y[i] != y[j]) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_ai, dj = alpha[j] - old_aj;
    // grad += Q_i di + Q_j dj, Q_t = y_t y .* K_t
    grad += (y[i] * di) * y.cwiseProduct(k.col(i)) + (y[j] * dj) * y.cwiseProduct(k.col(j));
  }

  // Bias from free vectors; midpoint of the feasible interval when none are free.
  double sum = 0, ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  int free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      ++free;
      sum += yg;
    }
  }
  const double rho = free > 0 ? sum / free : (ub + lb) / 2;
  out.alpha = alpha;
  out.bias = -rho;
  out.iterations = iter;
  return out;
}

double svm_primal_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& samples,
                            const Eigen::VectorXd& labels, double C) {
  const Eigen::ArrayXd margins = labels.array() * ((samples * w).array() + b);
  return 0.5 * w.squaredNorm() + C * (1.0 - margins).max(0.0).sum();
}

SvmModel svm_train(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels, const SvmOptions& options) {
  if (samples.rows() != labels.size()) throw ValidationError("sample and label counts differ");
  if (samples.rows() == 0) throw ValidationError("no training samples");
  const Eigen::MatrixXd gram = samples * samples.transpose();
  std::vector<int> all(static_cast<std::size_t>(samples.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const DualSolution dual = svm_solve_gram(gram, labels, all, options);
  SvmModel m;
  m.C = options.C;
  Eigen::VectorXd coef(samples.rows());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) coef[i] = dual.alpha[i] * (labels[i] > 0 ? 1.0 : -1.0);
  m.weights = samples.transpose() * coef;
  m.bias = dual.bias;
  m.iterations = dual.iterations;
  m.converged = dual.converged;
  Eigen::VectorXd y = labels.unaryExpr([](double v) { return v > 0 ? 1.0 : -1.0; });
  m.objective = svm_primal_objective(m.weights, m.bias, samples, y, options.C);
  return m;
}

double svm_decision(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.weights.size())
    throw ValidationError("input has " + std::to_string(x.size()) + " dims, model expects " +
                          std::to_string(model.weights.size()));
  return model.weights.dot(x) + model.bias;
}

}  // namespace kinvid
