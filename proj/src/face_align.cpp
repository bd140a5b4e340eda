#include "kinvid/face_align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/LU>

namespace kinvid {

namespace fs = std::filesystem;

AlignmentTemplate AlignmentTemplate::standard(int size) {
  if (size < 2) throw ValidationError("template size must be at least 2");
  AlignmentTemplate t;
  t.size = size;
  t.left_eye = Point2(0.3 * size, 0.35 * size);
  t.right_eye = Point2(0.7 * size, 0.35 * size);
  return t;
}

Affine2x3 compute_similarity(const Point2& src_left, const Point2& src_right, const AlignmentTemplate& tmpl) {
  return similarity_from_points<double>(src_left, src_right, tmpl.left_eye, tmpl.right_eye);
}

Affine2x3 invert(const Affine2x3& m) {
  const Eigen::Matrix2d a = m.leftCols<2>();
  const double det = a.determinant();
  if (det == 0.0) throw ValidationError("singular affine transform");
  const Eigen::Matrix2d inv = a.inverse();
  Affine2x3 out;
  out.leftCols<2>() = inv;
  out.col(2) = -inv * m.col(2);
  return out;
}

double sample_bilinear(const Frame& frame, double x, double y, int channel) {
  const double max_x = frame.width - 1;
  const double max_y = frame.height - 1;
  // Tolerate round-off at the far edges so integer-grid warps stay exact.
  constexpr double eps = 1e-9;
  if (!(x >= -eps && y >= -eps && x <= max_x + eps && y <= max_y + eps)) return 0.0;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = std::min(static_cast<int>(std::floor(x)), frame.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), frame.height - 1);
  const int x1 = std::min(x0 + 1, frame.width - 1);
  const int y1 = std::min(y0 + 1, frame.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = frame.at(y0, x0, channel);
  const double v01 = frame.at(y0, x1, channel);
  const double v10 = frame.at(y1, x0, channel);
  const double v11 = frame.at(y1, x1, channel);
  const double top = v00 + fx * (v01 - v00);
  const double bottom = v10 + fx * (v11 - v10);
  return top + fy * (bottom - top);
}

Frame warp_frame(const Frame& frame, const Affine2x3& src_to_template, int size) {
  const Affine2x3 back = invert(src_to_template);
  Frame out(size, size, frame.channels);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const Point2 src = apply(back, Point2(u, v));
      for (int c = 0; c < frame.channels; ++c) {
        const double s = sample_bilinear(frame, src.x(), src.y(), c);
        out.at(v, u, c) = static_cast<std::uint8_t>(std::clamp(std::floor(s + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

FaceVideo align_crop(const FaceVideo& video, const std::vector<EyeAnnotation>& annotations,
                     const AlignmentTemplate& tmpl) {
  if (annotations.size() != static_cast<std::size_t>(video.frames()))
    throw ValidationError("annotation count " + std::to_string(annotations.size()) + " does not match " +
                          std::to_string(video.frames()) + " frames");
  const int s = tmpl.size;
  const auto plane = static_cast<std::size_t>(s) * s;
  std::vector<std::uint8_t> gray(plane * video.frames());
  std::optional<std::vector<std::uint8_t>> rgb;
  if (video.has_rgb()) rgb.emplace(3 * plane * video.frames());
  for (int t = 0; t < video.frames(); ++t) {
    const EyeAnnotation& a = annotations[t];
    if (a.frame != t) throw ValidationError("annotation for frame " + std::to_string(t) + " is out of order");
    const Affine2x3 m = compute_similarity(a.left, a.right, tmpl);
    const Frame g = warp_frame(video.frame_at(t, true), m, s);
    std::copy(g.data.begin(), g.data.end(), gray.begin() + static_cast<std::ptrdiff_t>(plane * t));
    if (rgb) {
      const Frame c = warp_frame(video.frame_at(t), m, s);
      std::copy(c.data.begin(), c.data.end(), rgb->begin() + static_cast<std::ptrdiff_t>(3 * plane * t));
    }
  }
  return FaceVideo(video.frames(), s, s, std::move(gray), std::move(rgb), video.fps());
}

std::vector<EyeAnnotation> read_landmarks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open landmark file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty landmark file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "frame,lx,ly,rx,ry") throw ValidationError(path.string() + ": expected header frame,lx,ly,rx,ry");
  std::vector<EyeAnnotation> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    EyeAnnotation a;
    char c1, c2, c3, c4;
    if (!(row >> a.frame >> c1 >> a.left.x() >> c2 >> a.left.y() >> c3 >> a.right.x() >> c4 >> a.right.y()) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed landmark row");
    if ((a.right - a.left).norm() <= 0.0)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": eye separation must be positive");
    out.push_back(a);
  }
  return out;
}

void write_landmarks(const std::vector<EyeAnnotation>& annotations, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "frame,lx,ly,rx,ry\n" << std::setprecision(17);
  for (const auto& a : annotations)
    out << a.frame << ',' << a.left.x() << ',' << a.left.y() << ',' << a.right.x() << ',' << a.right.y() << '\n';
}

}  // namespace kinvid
