#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kinvid {

/// Normalized absolute difference of a feature pair: f_i = |x_i - y_i| / sum_j (x_j + y_j).
Eigen::VectorXd pair_combine(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

struct SvmOptions {
  double C = 1.0;
  /// Stop when the maximal KKT violation (m(alpha) - M(alpha)) drops below this.
  double tolerance = 1e-6;
  long max_iterations = 10'000'000;
};

/// Dual solution on a subset of a precomputed linear-kernel Gram matrix.
struct DualSolution {
  Eigen::VectorXd alpha;  // one per training index
  double bias = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// L1-hinge SVM with unregularized bias, solved by SMO with second-order working-set
/// selection. `gram` holds x_i . x_j for every sample; `train` selects the training rows.
DualSolution svm_solve_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& labels, const std::vector<int>& train,
                            const SvmOptions& options);

struct SvmModel {
  std::string descriptor;
  Eigen::VectorXd weights;
  double bias = 0.0;
  double C = 1.0;
  long iterations = 0;
  double objective = 0.0;
  bool converged = false;

  Eigen::Index dim() const { return weights.size(); }
};

/// Rows of `samples` are training vectors; labels are +1 / -1.
SvmModel svm_train(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels, const SvmOptions& options);

/// w . x + b; positive means kin.
double svm_decision(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// 1/2 |w|^2 + C sum max(0, 1 - y (w . x + b)).
double svm_primal_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& samples,
                            const Eigen::VectorXd& labels, double C);

void write_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel read_model(const std::filesystem::path& path);

/// Element-wise sum of per-method score lists. With `standardize`, each list is z-scored first.
Eigen::VectorXd fuse_scores(const std::vector<Eigen::VectorXd>& methods, bool standardize = false);

struct ScoreRow {
  std::string pair_id;
  int label = 0;
  double score = 0.0;
};

/// CSV "pair_id,label,score".
void write_scores(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);
std::vector<ScoreRow> read_scores(const std::filesystem::path& path);

}  // namespace kinvid
