#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kinvid {

/// A video's descriptor as stored on disk, one JSON file per video per descriptor.
struct FeatureVector {
  std::string video_id;
  std::string descriptor;
  std::vector<std::string> scales;
  Eigen::VectorXd values;
};

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& video_id,
                                   const std::string& descriptor);

/// {"video_id", "descriptor", "scales", "length", "values"} with 17 significant digits.
void write_feature(const FeatureVector& feature, const std::filesystem::path& path);
FeatureVector read_feature(const std::filesystem::path& path);

/// Shortest-form-independent decimal rendering used by every text output: %.17g.
std::string format_double(double v);

}  // namespace kinvid
