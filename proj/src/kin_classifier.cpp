#include "kinvid/kin_classifier.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kinvid/feature_io.hpp"
#include "kinvid/media_io.hpp"

namespace kinvid {

namespace fs = std::filesystem;

Eigen::VectorXd pair_combine(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size())
    throw ValidationError("feature lengths differ: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  const double mass = x.sum() + y.sum();
  if (!(mass > 0.0)) throw ValidationError("zero total mass in feature pair");
  return (x - y).cwiseAbs() / mass;
}

void write_model(const SvmModel& model, const fs::path& path) {
  std::ostringstream s;
  s << "{\"descriptor\": " << nlohmann::json(model.descriptor).dump() << ", \"dim\": " << model.dim()
    << ", \"C\": " << format_double(model.C) << ", \"bias\": " << format_double(model.bias) << ", \"weights\": [";
  for (Eigen::Index i = 0; i < model.dim(); ++i) s << (i ? ", " : "") << format_double(model.weights[i]);
  s << "]}\n";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << s.str();
}

SvmModel read_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    SvmModel m;
    m.descriptor = doc.at("descriptor").get<std::string>();
    m.C = doc.at("C").get<double>();
    m.bias = doc.at("bias").get<double>();
    const auto w = doc.at("weights").get<std::vector<double>>();
    if (doc.at("dim").get<std::size_t>() != w.size()) throw ValidationError(path.string() + ": dim does not match");
    m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Eigen::VectorXd fuse_scores(const std::vector<Eigen::VectorXd>& methods, bool standardize) {
  if (methods.empty()) throw ValidationError("nothing to fuse");
  const Eigen::Index n = methods.front().size();
  Eigen::VectorXd fused = Eigen::VectorXd::Zero(n);
  for (const auto& m : methods) {
    if (m.size() != n) throw ValidationError("score lists differ in length");
    if (!standardize) {
      fused += m;
      continue;
    }
    const double mean = m.mean();
    const double sd = std::sqrt((m.array() - mean).square().mean());
    fused += sd > 0 ? Eigen::VectorXd((m.array() - mean) / sd) : Eigen::VectorXd::Zero(n);
  }
  return fused;
}

void write_scores(const std::vector<ScoreRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "pair_id,label,score\n";
  for (const auto& r : rows) out << r.pair_id << ',' << r.label << ',' << format_double(r.score) << '\n';
}

std::vector<ScoreRow> read_scores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scores " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "pair_id,label,score") throw ValidationError(path.string() + ": expected header pair_id,label,score");
  std::vector<ScoreRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    ScoreRow r;
    std::string label, score;
    if (!std::getline(row, r.pair_id, ',') || !std::getline(row, label, ',') || !std::getline(row, score))
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    try {
      r.label = std::stoi(label);
      r.score = std::stod(score);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (r.label != 1 && r.label != -1)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": label must be 1 or -1");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace kinvid
