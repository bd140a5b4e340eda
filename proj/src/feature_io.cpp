#include "kinvid/feature_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kinvid/media_io.hpp"

namespace kinvid {

namespace fs = std::filesystem;

fs::path feature_path(const fs::path& dir, const std::string& video_id, const std::string& descriptor) {
  return dir / (video_id + "." + descriptor + ".json");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_feature(const FeatureVector& feature, const fs::path& path) {
  std::ostringstream s;
  s << "{\"video_id\": " << nlohmann::json(feature.video_id).dump()
    << ", \"descriptor\": " << nlohmann::json(feature.descriptor).dump()
    << ", \"scales\": " << nlohmann::json(feature.scales).dump() << ", \"length\": " << feature.values.size()
    << ", \"values\": [";
  for (Eigen::Index i = 0; i < feature.values.size(); ++i) s << (i ? ", " : "") << format_double(feature.values[i]);
  s << "]}\n";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << s.str();
}

FeatureVector read_feature(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing feature file " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    FeatureVector f;
    f.video_id = doc.at("video_id").get<std::string>();
    f.descriptor = doc.at("descriptor").get<std::string>();
    f.scales = doc.at("scales").get<std::vector<std::string>>();
    const auto values = doc.at("values").get<std::vector<double>>();
    if (doc.at("length").get<std::size_t>() != values.size())
      throw ValidationError(path.string() + ": length field does not match value count");
    f.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace kinvid
