#include <doctest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "kinvid/eval_protocol.hpp"
#include "kinvid/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace kinvid;

namespace {

// One two-subject family per positive, relations round-robin.
KinPairList family_positives(int count, SmileType smile, const std::string& prefix = "f") {
  KinPairList out;
  for (int i = 0; i < count; ++i) {
    const std::string fam = prefix + std::to_string(i);
    out.push_back({fam + "_p", fam + "_a_v", fam + "_b_v", fam + "_a", fam + "_b",
                   kRelations[static_cast<std::size_t>(i) % 7], smile, 1});
  }
  return out;
}

bool connected(const std::map<std::string, int>& fam, const KinPair& p) { return fam.at(p.subject_a) == fam.at(p.subject_b); }

}  // namespace

TEST_SUITE("eval_protocol") {
  TEST_CASE("one negative per positive") {
    const KinPairList pos = family_positives(228, SmileType::spontaneous);
    const KinPairList all = generate_negatives(pos, 42);
    CHECK(all.size() == 456);
    const auto fam = family_components(pos);
    std::map<std::pair<Relation, int>, int> balance;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const KinPair& p = all[i];
      balance[{p.relation, 0}] += p.label;
      if (i < 228) {
        CHECK(p == pos[i]);
        continue;
      }
      const KinPair& src = pos[i - 228];
      CHECK(p.label == -1);
      CHECK(p.pair_id == src.pair_id + "_neg");
      CHECK(p.video_a == src.video_a);
      CHECK(p.relation == src.relation);
      CHECK(p.smile_type == src.smile_type);
      CHECK_FALSE(connected(fam, p));
    }
    for (const auto& [key, sum] : balance) CHECK(sum == 0);
  }

  TEST_CASE("negatives avoid the whole family graph") {
    // A-kin-B and B-kin-E put A and E in one family even though they never share a pair.
    KinPairList pos{{"ab", "A1", "B1", "A", "B", Relation::SS, SmileType::posed, 1},
                    {"cd", "C1", "D1", "C", "D", Relation::SS, SmileType::posed, 1},
                    {"be", "B2", "E1", "B", "E", Relation::SS, SmileType::posed, 1}};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto all = generate_negatives(pos, seed);
      CHECK((all[3].subject_b == "C" || all[3].subject_b == "D"));
      CHECK((all[5].subject_b == "C" || all[5].subject_b == "D"));
      CHECK((all[4].subject_b != "C" && all[4].subject_b != "D"));
    }
    const auto fam = family_components(pos);
    CHECK(fam.at("A") == fam.at("E"));
    CHECK(fam.at("A") != fam.at("C"));
  }

  TEST_CASE("a subset with a single family is an error") {
    KinPairList pos{{"ab", "A1", "B1", "A", "B", Relation::MD, SmileType::posed, 1},
                    {"cd", "C1", "D1", "C", "D", Relation::SS, SmileType::posed, 1},
                    {"ef", "E1", "F1", "E", "F", Relation::SS, SmileType::posed, 1}};
    try {
      generate_negatives(pos, 1);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("M-D/posed") != std::string::npos);
    }
  }

  TEST_CASE("negatives are reproducible per seed") {
    const KinPairList pos = family_positives(40, SmileType::posed);
    const auto first = generate_negatives(pos, 7);
    CHECK(first == generate_negatives(pos, 7));
    int differing = 0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) differing += generate_negatives(pos, seed) != first;
    CHECK(differing == 20);
  }

  TEST_CASE("pairs files round-trip and are validated") {
    testutil::TempDir dir;
    const auto all = generate_negatives(family_positives(14, SmileType::spontaneous), 3);
    write_pairs(all, dir / "pairs.csv");
    CHECK(testutil::read_bytes(dir / "pairs.csv").rfind("pair_id,video_a,video_b,subject_a,subject_b,relation,smile_type,label\n", 0) == 0);
    CHECK(read_pairs(dir / "pairs.csv") == all);
    const std::string header = "pair_id,video_a,video_b,subject_a,subject_b,relation,smile_type,label\n";
    testutil::write_text(dir / "self.csv", header + "p,v1,v2,s,s,S-S,posed,1\n");
    CHECK_THROWS_AS(read_pairs(dir / "self.csv"), ValidationError);
    testutil::write_text(dir / "dup.csv", header + "p,v1,v2,s,t,S-S,posed,1\np,v3,v4,u,w,S-S,posed,1\n");
    CHECK_THROWS_AS(read_pairs(dir / "dup.csv"), ValidationError);
    testutil::write_text(dir / "rel.csv", header + "p,v1,v2,s,t,X-Y,posed,1\n");
    CHECK_THROWS_AS(read_pairs(dir / "rel.csv"), ValidationError);
  }

  TEST_CASE("leave-one-out counts and the separable case") {
    Eigen::MatrixXd X(4, 2);
    X << 3, 3, 4, 3, -3, -3, -3, -4;
    const Eigen::Vector4d y(1, 1, -1, -1);
    const LooResult r = loo_evaluate(X, y, {});
    CHECK(r.scores.size() == 4);
    CHECK(r.models_trained == 4);
    CHECK(r.skipped_folds == 0);
    CHECK(r.accuracy == 100.0);

    Rng rng(2);
    Eigen::MatrixXd Z(15, 3);
    Eigen::VectorXd yz(15);
    for (int i = 0; i < 15; ++i) {
      yz[i] = i % 3 == 0 ? 1 : -1;
      for (int j = 0; j < 3; ++j) Z(i, j) = rng.normal();
    }
    LooOptions threaded;
    threaded.jobs = 4;
    const LooResult a = loo_evaluate(Z, yz, {}), b = loo_evaluate(Z, yz, threaded);
    CHECK(a.models_trained == 15);
    CHECK(a.scores == b.scores);
  }

  TEST_CASE("identical features put every held-out sample in the training minority") {
    // w = 0, so the bias alone decides; removing one sample tips the balance against it.
    const Eigen::MatrixXd X = Eigen::MatrixXd::Constant(10, 3, 0.2);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) y[i] = i < 5 ? 1 : -1;
    const LooResult r = loo_evaluate(X, y, {});
    CHECK(r.accuracy == 0.0);
    for (int i = 0; i < 10; ++i) CHECK(r.scores[i] * y[i] < 0);
  }

  TEST_CASE("folds without both classes are skipped") {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, -1;
    const LooResult r = loo_evaluate(X, Eigen::Vector3d(1, 1, -1), {});
    CHECK(r.skipped_folds == 1);
    CHECK(std::isnan(r.scores[2]));
    CHECK(r.models_trained == 2);
  }

  TEST_CASE("subject-disjoint folds drop overlapping training pairs") {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(4, 4);
    const Eigen::Vector4d y(1, -1, 1, -1);
    const std::vector<std::array<std::string, 2>> subjects{{"a", "b"}, {"a", "c"}, {"d", "e"}, {"f", "g"}};
    LooOptions opt;
    opt.subject_disjoint = true;
    const LooResult r = loo_evaluate_gram(gram, y, {0, 1, 2, 3}, opt, &subjects);
    // Holding out 0 drops 1 (shares "a"), leaving {2 (+), 3 (-)}.
    CHECK(r.models_trained == 4);
    CHECK_THROWS_AS(loo_evaluate_gram(gram, y, {0, 1, 2, 3}, opt), ValidationError);
  }

  TEST_CASE("auc equals the Mann-Whitney statistic") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd s(20), y(20);
      for (int i = 0; i < 20; ++i) {
        y[i] = i < 8 ? 1 : -1;
        s[i] = std::round(rng.normal() * 3) / 3 + (y[i] > 0 ? 0.3 : 0);
      }
      const RocCurve roc = roc_auc(s, y);
      CHECK(std::abs(roc.auc - oracle::mann_whitney(s, y)) < 1e-12);
      CHECK(roc.points.front() == std::pair<double, double>{0, 0});
      CHECK(roc.points.back() == std::pair<double, double>{1, 1});
      for (std::size_t k = 1; k < roc.points.size(); ++k) {
        CHECK(roc.points[k].first >= roc.points[k - 1].first);
        CHECK(roc.points[k].second >= roc.points[k - 1].second);
      }
      const Eigen::VectorXd t = s.unaryExpr([](double v) { return std::exp(2 * v) - 5; });
      CHECK(roc_auc(t, y).auc == roc.auc);
      CHECK(roc_auc(t, y).points == roc.points);
    }
    CHECK(roc_auc(Eigen::Vector4d(3, 4, 1, 2), Eigen::Vector4d(1, 1, -1, -1)).auc == 1.0);
    CHECK(roc_auc(Eigen::Vector4d::Constant(0.3), Eigen::Vector4d(1, 1, -1, -1)).auc == 0.5);
    CHECK_THROWS_AS(roc_auc(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d::Ones()), ValidationError);
    CHECK_THROWS_AS(roc_auc(Eigen::Vector2d(NAN, 1), Eigen::Vector2d(1, -1)), ValidationError);
  }

  TEST_CASE("accuracy counts a zero score as kin") {
    CHECK(accuracy_percent(Eigen::Vector4d(0, -1, 1, 0), Eigen::Vector4d(1, -1, -1, -1)) == 50.0);
    CHECK(accuracy_percent(Eigen::Vector3d(NAN, 1, -1), Eigen::Vector3d(1, 1, 1)) == 50.0);
  }

  TEST_CASE("evaluation report structure") {
    // Two pairs per (relation, smile) positive set, features that separate kin perfectly.
    KinPairList pos;
    for (SmileType smile : {SmileType::spontaneous, SmileType::posed}) {
      const auto part = family_positives(21, smile, smile == SmileType::posed ? "p" : "s");
      pos.insert(pos.end(), part.begin(), part.end());
    }
    const KinPairList pairs = generate_negatives(pos, 9);
    Rng rng(4);
    MethodFeatures a{"alpha", {}}, b{"beta", {}};
    for (const KinPair& p : pos) {
      Eigen::VectorXd base(6);
      for (int j = 0; j < 6; ++j) base[j] = rng.uniform();
      a.by_video[p.video_a] = base;
      a.by_video[p.video_b] = base + 0.05 * Eigen::VectorXd::Ones(6);
      b.by_video[p.video_a] = Eigen::VectorXd::Constant(4, 1.0 + rng.uniform());
      b.by_video[p.video_b] = Eigen::VectorXd::Constant(4, 1.0 + rng.uniform());
    }
    LooOptions opt;
    opt.svm.C = 100;
    const EvaluationReport rep = evaluate_all({a, b}, pairs, opt, 9);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[2].method == "fusion");
    CHECK(rep.pair_ids.size() == pairs.size());
    CHECK(rep.rows[0].whole_set_scores.size() == pairs.size());
    // Each pair is scored once per relation subset and once in the pooled run, per method.
    CHECK(rep.folds == 2 * 2 * static_cast<int>(pairs.size()));
    for (const auto& row : rep.rows) {
      double sum = 0;
      for (double acc : row.relation_accuracy) {
        CHECK(acc >= 0);
        CHECK(acc <= 100);
        sum += acc;
      }
      CHECK(std::abs(row.mean_accuracy - sum / 7) < 1e-9);
    }
    CHECK(rep.rows[0].whole_set_accuracy > 90);

    testutil::TempDir dir;
    write_report(rep, dir / "report.json");
    const auto j = nlohmann::json::parse(testutil::read_bytes(dir / "report.json"));
    CHECK(j["relations"].size() == 7);
    CHECK(j["methods"].size() == 3);
    CHECK(j["methods"][0]["relation_accuracy"].contains("F-S"));
    const std::string table = render_table(rep);
    for (const char* col : {"S-S", "B-B", "S-B", "M-D", "M-S", "F-D", "F-S", "Mean", "Whole set", "fusion"})
      CHECK(table.find(col) != std::string::npos);
  }

  TEST_CASE("absent relations are reported as missing") {
    KinPairList pos;
    for (int i = 0; i < 4; ++i)
      pos.push_back({"q" + std::to_string(i), "a" + std::to_string(i), "b" + std::to_string(i), "sa" + std::to_string(i),
                     "sb" + std::to_string(i), Relation::BB, SmileType::posed, 1});
    const KinPairList pairs = generate_negatives(pos, 1);
    MethodFeatures m{"m", {}};
    Rng rng(2);
    for (const KinPair& p : pairs)
      for (const auto& v : {p.video_a, p.video_b}) m.by_video[v] = Eigen::Vector3d(rng.uniform(), rng.uniform(), 1);
    const EvaluationReport rep = evaluate_all({m}, pairs, {}, 1);
    REQUIRE(rep.rows.size() == 1);
    CHECK(std::isnan(rep.rows[0].relation_accuracy[0]));
    CHECK_FALSE(std::isnan(rep.rows[0].relation_accuracy[1]));
    CHECK(rep.rows[0].mean_accuracy == rep.rows[0].relation_accuracy[1]);
  }

  TEST_CASE("missing features name the videos") {
    const KinPairList pairs = generate_negatives(family_positives(14, SmileType::posed), 1);
    MethodFeatures m{"lbptop", {}};
    for (const KinPair& p : pairs) m.by_video[p.video_a] = Eigen::Vector2d(1, 1);
    try {
      evaluate_all({m}, pairs, {}, 1);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("f0_b_v") != std::string::npos);
    }
  }
}
