#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinvid/kin_classifier.hpp"
#include "kinvid/media_io.hpp"

namespace kinvid {

enum class Relation { SS, BB, SB, MD, MS, FD, FS };

inline constexpr std::array<Relation, 7> kRelations{Relation::SS, Relation::BB, Relation::SB, Relation::MD,
                                                    Relation::MS, Relation::FD, Relation::FS};

/// "S-S", "B-B", ...
std::string to_string(Relation r);
Relation parse_relation(const std::string& s);

struct KinPair {
  std::string pair_id;
  std::string video_a;
  std::string video_b;
  std::string subject_a;
  std::string subject_b;
  Relation relation = Relation::SS;
  SmileType smile_type = SmileType::spontaneous;
  int label = 1;

  bool operator==(const KinPair&) const = default;
};

using KinPairList = std::vector<KinPair>;

/// CSV "pair_id,video_a,video_b,subject_a,subject_b,relation,smile_type,label", label 1 or -1.
void write_pairs(const KinPairList& pairs, const std::filesystem::path& path);
KinPairList read_pairs(const std::filesystem::path& path);

/// Appends one negative per positive: video A kept, video B drawn uniformly (by rejection) from
/// the same (relation, smile type) subset among subjects outside A's family. Families are the
/// connected components of the kin graph the positives induce.
KinPairList generate_negatives(const KinPairList& positives, std::uint64_t seed);

/// Connected component label per subject.
std::map<std::string, int> family_components(const KinPairList& positives);

struct LooOptions {
  SvmOptions svm;
  /// Drop training samples that share a subject with the held-out one (stricter than plain LOO).
  bool subject_disjoint = false;
  int jobs = 1;
};

struct LooResult {
  double accuracy = 0.0;      // percent over scored folds
  Eigen::VectorXd scores;     // NaN for skipped folds
  int models_trained = 0;
  int skipped_folds = 0;
};

/// Leave-one-out over `subset` (indices into the Gram matrix / labels). `subjects`, when given,
/// holds the two subject ids of each sample and enables subject-disjoint folds.
LooResult loo_evaluate_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& labels, const std::vector<int>& subset,
                            const LooOptions& options,
                            const std::vector<std::array<std::string, 2>>* subjects = nullptr);

/// Rows of `samples` are combined pair vectors.
LooResult loo_evaluate(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels, const LooOptions& options);

/// Percentage of samples whose sign(score) matches the label; sign(0) counts as +1. NaN scores are ignored.
double accuracy_percent(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (FPR, TPR), from (0,0) to (1,1)
  double auc = 0.0;
};

/// Threshold sweep with tied scores grouped; AUC by the trapezoidal rule.
RocCurve roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);
void write_roc(const RocCurve& roc, const std::filesystem::path& path);

struct MethodFeatures {
  std::string name;
  std::map<std::string, Eigen::VectorXd> by_video;
};

struct EvaluationRow {
  std::string method;
  std::array<double, 7> relation_accuracy{};  // NaN when a relation has no pairs
  double mean_accuracy = 0.0;
  double whole_set_accuracy = 0.0;
  RocCurve roc;  // whole set
  std::vector<double> whole_set_scores;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  std::vector<std::string> pair_ids;  // whole-set order
  std::vector<int> labels;
  int folds = 0;
  int models_trained = 0;
  std::uint64_t seed = 0;
  double C = 1.0;
};

/// Per relation: leave-one-out separately on the spontaneous and posed subsets, averaged.
/// Whole set: one leave-one-out over every pair. With more than one method a "fusion" row
/// sums the per-method decision values of each run.
EvaluationReport evaluate_all(const std::vector<MethodFeatures>& methods, const KinPairList& pairs,
                              const LooOptions& options, std::uint64_t seed, bool standardize_fusion = false);

/// Plain-text table: Method | S-S ... F-S | Mean | Whole set.
std::string render_table(const EvaluationReport& report);
void write_report(const EvaluationReport& report, const std::filesystem::path& json_path);

}  // namespace kinvid
