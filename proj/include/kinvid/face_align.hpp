#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "kinvid/media_io.hpp"

namespace kinvid {

using Point2 = Eigen::Vector2d;
using Affine2x3 = Eigen::Matrix<double, 2, 3>;

struct EyeAnnotation {
  int frame = 0;
  Point2 left = Point2::Zero();
  Point2 right = Point2::Zero();
};

struct AlignmentTemplate {
  int size = 64;
  Point2 left_eye;
  Point2 right_eye;

  /// Eyes at (0.3 S, 0.35 S) and (0.7 S, 0.35 S).
  static AlignmentTemplate standard(int size);
  static AlignmentTemplate texture() { return standard(64); }
  static AlignmentTemplate deep() { return standard(224); }
};

/// Similarity transform (rotation, uniform scale, translation) taking the two source
/// points exactly onto the two destination points.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> similarity_from_points(const Eigen::Matrix<Scalar, 2, 1>& src_a,
                                                   const Eigen::Matrix<Scalar, 2, 1>& src_b,
                                                   const Eigen::Matrix<Scalar, 2, 1>& dst_a,
                                                   const Eigen::Matrix<Scalar, 2, 1>& dst_b) {
  // In complex form z' = a z + t with a = (dst_b - dst_a) / (src_b - src_a).
  const Eigen::Matrix<Scalar, 2, 1> ds = src_b - src_a;
  const Eigen::Matrix<Scalar, 2, 1> dd = dst_b - dst_a;
  const Scalar denom = ds.squaredNorm();
  if (denom == Scalar(0)) throw ValidationError("coincident source points");
  const Scalar ar = (dd.x() * ds.x() + dd.y() * ds.y()) / denom;
  const Scalar ai = (dd.y() * ds.x() - dd.x() * ds.y()) / denom;
  Eigen::Matrix<Scalar, 2, 2> rs;
  rs << ar, -ai, ai, ar;
  Eigen::Matrix<Scalar, 2, 3> m;
  m.template leftCols<2>() = rs;
  m.col(2) = dst_a - rs * src_a;
  return m;
}

Affine2x3 compute_similarity(const Point2& src_left, const Point2& src_right, const AlignmentTemplate& tmpl);

inline Point2 apply(const Affine2x3& m, const Point2& p) { return m.leftCols<2>() * p + m.col(2); }

/// Inverse of a non-degenerate 2x3 affine map.
Affine2x3 invert(const Affine2x3& m);

/// Bilinear sample at (x, y); 0 outside [0, W-1] x [0, H-1].
double sample_bilinear(const Frame& frame, double x, double y, int channel = 0);

/// Warps one frame into the template's S x S output grid.
Frame warp_frame(const Frame& frame, const Affine2x3& src_to_template, int size);

/// Aligns each frame (gray and, when present, RGB) with its own eye annotation.
FaceVideo align_crop(const FaceVideo& video, const std::vector<EyeAnnotation>& annotations,
                     const AlignmentTemplate& tmpl);

/// CSV with header "frame,lx,ly,rx,ry", 0-based frame indices.
std::vector<EyeAnnotation> read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::vector<EyeAnnotation>& annotations, const std::filesystem::path& path);

}  // namespace kinvid
