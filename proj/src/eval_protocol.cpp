#include "kinvid/eval_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kinvid/feature_io.hpp"
#include "kinvid/rng.hpp"

namespace kinvid {

namespace {

constexpr const char* kPairsHeader = "pair_id,video_a,video_b,subject_a,subject_b,relation,smile_type,label";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream row(line);
  while (std::getline(row, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  int add() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(int a, int b) { parent[find(a)] = find(b); }
};

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string to_string(Relation r) {
  switch (r) {
    case Relation::SS: return "S-S";
    case Relation::BB: return "B-B";
    case Relation::SB: return "S-B";
    case Relation::MD: return "M-D";
    case Relation::MS: return "M-S";
    case Relation::FD: return "F-D";
    case Relation::FS: return "F-S";
  }
  return "?";
}

Relation parse_relation(const std::string& s) {
  for (Relation r : kRelations)
    if (to_string(r) == s) return r;
  throw ValidationError("unknown relation '" + s + "' (expected S-S, B-B, S-B, M-D, M-S, F-D or F-S)");
}

void write_pairs(const KinPairList& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kPairsHeader << '\n';
  for (const KinPair& p : pairs)
    out << p.pair_id << ',' << p.video_a << ',' << p.video_b << ',' << p.subject_a << ',' << p.subject_b << ','
        << to_string(p.relation) << ',' << to_string(p.smile_type) << ',' << (p.label > 0 ? "1" : "-1") << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

KinPairList read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pairs file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kPairsHeader)
    throw ValidationError(path.string() + ": expected header '" + kPairsHeader + "'");
  KinPairList pairs;
  std::set<std::string> ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 8) throw ValidationError(where + ": expected 8 fields, found " + std::to_string(f.size()));
    KinPair p;
    p.pair_id = f[0];
    p.video_a = f[1];
    p.video_b = f[2];
    p.subject_a = f[3];
    p.subject_b = f[4];
    try {
      p.relation = parse_relation(f[5]);
      p.smile_type = parse_smile_type(f[6]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (f[7] == "1" || f[7] == "+1")
      p.label = 1;
    else if (f[7] == "-1")
      p.label = -1;
    else
      throw ValidationError(where + ": label must be 1 or -1, found '" + f[7] + "'");
    if (p.subject_a == p.subject_b) throw ValidationError(where + ": pair joins subject " + p.subject_a + " with itself");
    if (!ids.insert(p.pair_id).second) throw ValidationError(where + ": duplicate pair id " + p.pair_id);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::map<std::string, int> family_components(const KinPairList& positives) {
  UnionFind uf;
  std::map<std::string, int> node;
  auto id = [&](const std::string& s) {
    auto it = node.find(s);
    if (it != node.end()) return it->second;
    return node[s] = uf.add();
  };
  for (const KinPair& p : positives)
    if (p.label > 0) uf.join(id(p.subject_a), id(p.subject_b));
  std::map<std::string, int> out;
  for (const auto& [subject, n] : node) out[subject] = uf.find(n);
  return out;
}

KinPairList generate_negatives(const KinPairList& positives, std::uint64_t seed) {
  for (const KinPair& p : positives)
    if (p.label <= 0) throw ValidationError("generate_negatives expects positives only; " + p.pair_id + " is negative");
  const auto family = family_components(positives);

  struct Candidate {
    std::string video;
    std::string subject;
  };
  using Key = std::pair<Relation, SmileType>;
  std::map<Key, std::vector<Candidate>> pools;
  for (const KinPair& p : positives) {
    auto& pool = pools[{p.relation, p.smile_type}];
    for (const Candidate& c : {Candidate{p.video_a, p.subject_a}, Candidate{p.video_b, p.subject_b}})
      if (std::none_of(pool.begin(), pool.end(), [&](const Candidate& o) { return o.video == c.video; }))
        pool.push_back(c);
  }
  for (auto& [key, pool] : pools)
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.video < b.video; });

  Rng rng(seed);
  KinPairList out = positives;
  out.reserve(positives.size() * 2);
  for (const KinPair& p : positives) {
    const auto& pool = pools.at({p.relation, p.smile_type});
    const int fam = family.at(p.subject_a);
    if (std::none_of(pool.begin(), pool.end(), [&](const Candidate& c) { return family.at(c.subject) != fam; }))
      throw ValidationError("subset " + to_string(p.relation) + "/" + to_string(p.smile_type) +
                            " has no video outside the family of subject " + p.subject_a + " (" +
                            std::to_string(pool.size()) + " videos)");
    const Candidate* pick;
    do {
      pick = &pool[rng.index(pool.size())];
    } while (family.at(pick->subject) == fam);
    KinPair n = p;
    n.pair_id = p.pair_id + "_neg";
    n.video_b = pick->video;
    n.subject_b = pick->subject;
    n.label = -1;
    out.push_back(std::move(n));
  }
  return out;
}

double accuracy_percent(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  int scored = 0, correct = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    ++scored;
    if ((scores[i] >= 0) == (labels[i] > 0)) ++correct;
  }
  return scored ? 100.0 * correct / scored : nan();
}

LooResult loo_evaluate_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& labels, const std::vector<int>& subset,
                            const LooOptions& options, const std::vector<std::array<std::string, 2>>* subjects) {
  const auto n = static_cast<int>(subset.size());
  if (n < 3) throw ValidationError("leave-one-out needs at least 3 samples, got " + std::to_string(n));
  if (options.subject_disjoint && !subjects) throw ValidationError("subject-disjoint folds need subject ids");

  LooResult result;
  result.scores = Eigen::VectorXd::Constant(n, nan());
  std::vector<char> trained(static_cast<std::size_t>(n), 0);

  auto run_fold = [&](int k) {
    const int held = subset[k];
    std::vector<int> train;
    train.reserve(static_cast<std::size_t>(n - 1));
    for (int t = 0; t < n; ++t) {
      if (t == k) continue;
      if (options.subject_disjoint) {
        const auto& a = (*subjects)[held];
        const auto& b = (*subjects)[subset[t]];
        if (a[0] == b[0] || a[0] == b[1] || a[1] == b[0] || a[1] == b[1]) continue;
      }
      train.push_back(subset[t]);
    }
    const bool pos = std::any_of(train.begin(), train.end(), [&](int i) { return labels[i] > 0; });
    const bool neg = std::any_of(train.begin(), train.end(), [&](int i) { return labels[i] <= 0; });
    if (!pos || !neg) return;
    const DualSolution dual = svm_solve_gram(gram, labels, train, options.svm);
    double score = dual.bias;
    for (std::size_t t = 0; t < train.size(); ++t)
      if (dual.alpha[static_cast<Eigen::Index>(t)] != 0)
        score += dual.alpha[static_cast<Eigen::Index>(t)] * (labels[train[t]] > 0 ? 1.0 : -1.0) *
                 gram(train[t], held);
    result.scores[k] = score;
    trained[static_cast<std::size_t>(k)] = 1;
  };

  const int jobs = std::clamp(options.jobs, 1, n);
  if (jobs == 1) {
    for (int k = 0; k < n; ++k) run_fold(k);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&, j] {
        try {
          for (int k = j; k < n; k += jobs) run_fold(k);
        } catch (...) {
          errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  result.models_trained = static_cast<int>(std::count(trained.begin(), trained.end(), 1));
  result.skipped_folds = n - result.models_trained;
  Eigen::VectorXd sub_labels(n);
  for (int k = 0; k < n; ++k) sub_labels[k] = labels[subset[k]];
  result.accuracy = accuracy_percent(result.scores, sub_labels);
  return result;
}

LooResult loo_evaluate(const Eigen::MatrixXd& samples, const Eigen::VectorXd& labels, const LooOptions& options) {
  if (samples.rows() != labels.size()) throw ValidationError("sample and label counts differ");
  const Eigen::MatrixXd gram = samples * samples.transpose();
  std::vector<int> all(static_cast<std::size_t>(samples.rows()));
  std::iota(all.begin(), all.end(), 0);
  return loo_evaluate_gram(gram, labels, all, options);
}

RocCurve roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  if (scores.size() != labels.size()) throw ValidationError("score and label counts differ");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i : order)
    if (std::isnan(scores[i])) throw ValidationError("NaN score at index " + std::to_string(i));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores[a] > scores[b]; });
  double pos = 0, neg = 0;
  for (Eigen::Index i : order) (labels[i] > 0 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw ValidationError("ROC needs both classes");

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  double tp = 0, fp = 0, area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const double tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] > 0 ? tp : fp) += 1;
    area += (fp - fp0) * (tp + tp0) / 2;
    roc.points.emplace_back(fp / neg, tp / pos);
  }
  roc.auc = area / (pos * neg);
  return roc;
}

void write_roc(const RocCurve& roc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc.points) out << format_double(fpr) << ',' << format_double(tpr) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EvaluationReport evaluate_all(const std::vector<MethodFeatures>& methods, const KinPairList& pairs,
                              const LooOptions& options, std::uint64_t seed, bool standardize_fusion) {
  if (methods.empty()) throw ValidationError("no feature methods given");
  if (pairs.empty()) throw ValidationError("empty pair list");

  std::set<std::string> missing;
  for (const MethodFeatures& m : methods)
    for (const KinPair& p : pairs)
      for (const std::string& v : {p.video_a, p.video_b})
        if (!m.by_video.count(v)) missing.insert(m.name + ":" + v);
  if (!missing.empty()) {
    std::string list;
    for (const auto& s : missing) list += (list.empty() ? "" : ", ") + s;
    throw ValidationError("missing features for " + std::to_string(missing.size()) + " video(s): " + list);
  }

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::VectorXd labels(n);
  std::vector<std::array<std::string, 2>> subjects;
  for (Eigen::Index i = 0; i < n; ++i) {
    labels[i] = pairs[i].label > 0 ? 1.0 : -1.0;
    subjects.push_back({pairs[i].subject_a, pairs[i].subject_b});
  }

  std::vector<Eigen::MatrixXd> grams;
  for (const MethodFeatures& m : methods) {
    const Eigen::Index dim = m.by_video.at(pairs[0].video_a).size();
    Eigen::MatrixXd samples(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& a = m.by_video.at(pairs[i].video_a);
      const auto& b = m.by_video.at(pairs[i].video_b);
      if (a.size() != dim || b.size() != dim)
        throw ValidationError(m.name + ": feature lengths differ across videos (pair " + pairs[i].pair_id + ")");
      samples.row(i) = pair_combine(a, b).transpose();
    }
    grams.push_back(samples * samples.transpose());
  }

  const bool fused = methods.size() > 1;
  const std::size_t rows = methods.size() + (fused ? 1 : 0);
  EvaluationReport report;
  report.seed = seed;
  report.C = options.svm.C;
  report.rows.resize(rows);
  for (std::size_t m = 0; m < methods.size(); ++m) report.rows[m].method = methods[m].name;
  if (fused) report.rows.back().method = "fusion";

  // One leave-one-out run per method on `subset`; returns per-row accuracy and fills `scores`.
  auto run = [&](const std::vector<int>& subset, std::vector<Eigen::VectorXd>& scores) {
    std::vector<double> acc(rows);
    Eigen::VectorXd sub_labels(static_cast<Eigen::Index>(subset.size()));
    for (std::size_t k = 0; k < subset.size(); ++k) sub_labels[static_cast<Eigen::Index>(k)] = labels[subset[k]];
    scores.clear();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const LooResult r = loo_evaluate_gram(grams[m], labels, subset, options, &subjects);
      report.folds += static_cast<int>(subset.size());
      report.models_trained += r.models_trained;
      acc[m] = r.accuracy;
      scores.push_back(r.scores);
    }
    if (fused) {
      scores.push_back(fuse_scores(scores, standardize_fusion));
      acc.back() = accuracy_percent(scores.back(), sub_labels);
    }
    return acc;
  };

  std::vector<Eigen::VectorXd> scores;
  for (std::size_t r = 0; r < kRelations.size(); ++r) {
    std::vector<double> sum(rows, 0.0);
    int parts = 0;
    for (SmileType smile : {SmileType::spontaneous, SmileType::posed}) {
      std::vector<int> subset;
      for (Eigen::Index i = 0; i < n; ++i)
        if (pairs[i].relation == kRelations[r] && pairs[i].smile_type == smile) subset.push_back(static_cast<int>(i));
      if (subset.empty()) continue;
      const auto acc = run(subset, scores);
      for (std::size_t m = 0; m < rows; ++m) sum[m] += acc[m];
      ++parts;
    }
    for (std::size_t m = 0; m < rows; ++m) report.rows[m].relation_accuracy[r] = parts ? sum[m] / parts : nan();
  }

  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  const auto whole = run(all, scores);
  for (std::size_t m = 0; m < rows; ++m) {
    EvaluationRow& row = report.rows[m];
    row.whole_set_accuracy = whole[m];
    double total = 0;
    int present = 0;
    for (double a : row.relation_accuracy)
      if (!std::isnan(a)) {
        total += a;
        ++present;
      }
    row.mean_accuracy = present ? total / present : nan();
    row.whole_set_scores.assign(scores[m].data(), scores[m].data() + scores[m].size());
    bool complete = std::none_of(row.whole_set_scores.begin(), row.whole_set_scores.end(),
                                 [](double s) { return std::isnan(s); });
    if (complete) row.roc = roc_auc(scores[m], labels);
  }
  for (const KinPair& p : pairs) {
    report.pair_ids.push_back(p.pair_id);
    report.labels.push_back(p.label > 0 ? 1 : -1);
  }
  return report;
}

std::string render_table(const EvaluationReport& report) {
  std::size_t width = 6;
  for (const auto& row : report.rows) width = std::max(width, row.method.size());
  std::ostringstream out;
  char cell[32];
  out << std::string(width - 6, ' ') << "Method";
  for (Relation r : kRelations) {
    std::snprintf(cell, sizeof cell, " %7s", to_string(r).c_str());
    out << cell;
  }
  out << "    Mean  Whole set\n";
  for (const auto& row : report.rows) {
    out << std::string(width - row.method.size(), ' ') << row.method;
    for (double a : row.relation_accuracy) {
      if (std::isnan(a))
        std::snprintf(cell, sizeof cell, " %7s", "-");
      else
        std::snprintf(cell, sizeof cell, " %7.2f", a);
      out << cell;
    }
    std::snprintf(cell, sizeof cell, " %7.2f", row.mean_accuracy);
    out << cell;
    std::snprintf(cell, sizeof cell, " %10.2f\n", row.whole_set_accuracy);
    out << cell;
  }
  return out.str();
}

void write_report(const EvaluationReport& report, const std::filesystem::path& json_path) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::json j;
  j["seed"] = report.seed;
  j["C"] = report.C;
  j["folds"] = report.folds;
  j["models_trained"] = report.models_trained;
  j["relations"] = nlohmann::json::array();
  for (Relation r : kRelations) j["relations"].push_back(to_string(r));
  j["methods"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json m;
    m["method"] = row.method;
    nlohmann::json rel = nlohmann::json::object();
    for (std::size_t r = 0; r < kRelations.size(); ++r) rel[to_string(kRelations[r])] = num(row.relation_accuracy[r]);
    m["relation_accuracy"] = rel;
    m["mean_accuracy"] = num(row.mean_accuracy);
    m["whole_set_accuracy"] = num(row.whole_set_accuracy);
    m["auc"] = row.roc.points.empty() ? nlohmann::json(nullptr) : nlohmann::json(row.roc.auc);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [fpr, tpr] : row.roc.points) pts.push_back({fpr, tpr});
    m["roc"] = pts;
    j["methods"].push_back(m);
  }
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + json_path.string());
}

}  // namespace kinvid
