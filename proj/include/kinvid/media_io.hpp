#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kinvid {

/// Raised when inputs violate a documented contract (bad file, bad shape).
/// The CLI maps it to exit code 1; everything else is a runtime failure.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using GrayImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Frame() = default;
  Frame(int width, int height, int channels, std::vector<std::uint8_t> data);
  Frame(int width, int height, int channels, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  bool operator==(const Frame&) const = default;
};

enum class SmileType { spontaneous, posed };

std::string to_string(SmileType s);
SmileType parse_smile_type(const std::string& s);

/// Immutable T x H x W grayscale volume, optionally carrying the RGB frames it came from.
class FaceVideo {
 public:
  FaceVideo(int frames, int height, int width, std::vector<std::uint8_t> gray,
            std::optional<std::vector<std::uint8_t>> rgb = std::nullopt, double fps = 0.0);

  /// Builds a volume from frames of identical size. RGB frames are kept alongside their luma.
  static FaceVideo from_frames(const std::vector<Frame>& frames, double fps = 0.0);

  int frames() const { return frames_; }
  int height() const { return height_; }
  int width() const { return width_; }
  double fps() const { return fps_; }
  bool has_rgb() const { return rgb_.has_value(); }

  std::uint8_t at(int t, int y, int x) const {
    return gray_[(static_cast<std::size_t>(t) * height_ + y) * width_ + x];
  }
  std::uint8_t rgb_at(int t, int y, int x, int c) const {
    return (*rgb_)[((static_cast<std::size_t>(t) * height_ + y) * width_ + x) * 3 + c];
  }

  Eigen::Map<const GrayImage> frame(int t) const {
    return {gray_.data() + static_cast<std::size_t>(t) * height_ * width_, height_, width_};
  }

  const std::vector<std::uint8_t>& gray() const { return gray_; }
  const std::optional<std::vector<std::uint8_t>>& rgb() const { return rgb_; }

  /// Frame t as a standalone Frame; RGB when available unless gray_only is set.
  Frame frame_at(int t, bool gray_only = false) const;
  std::vector<Frame> unstack(bool gray_only = false) const;

 private:
  int frames_;
  int height_;
  int width_;
  std::vector<std::uint8_t> gray_;
  std::optional<std::vector<std::uint8_t>> rgb_;
  double fps_;
};

struct VideoManifest {
  std::string video_id;
  std::filesystem::path frames_dir;
  std::filesystem::path landmarks;
  std::string subject_id;
  SmileType smile_type = SmileType::spontaneous;
};

/// Binary PGM ("P5") or PPM ("P6") with maxval 255.
Frame read_pnm(const std::filesystem::path& path);
void write_pnm(const Frame& frame, const std::filesystem::path& path);

/// Loads 000001.pgm/.ppm ... from a directory in index order. Other files are ignored.
std::vector<Frame> load_frames(const std::filesystem::path& frame_directory);
void save_frames(const std::vector<Frame>& frames, const std::filesystem::path& frame_directory);
std::string frame_filename(int index, int channels);

/// BT.601 luma with round-half-up; identity on single-channel frames.
Frame to_gray(const Frame& frame);

FaceVideo load_video(const std::filesystem::path& frame_directory);
void save_video(const FaceVideo& video, const std::filesystem::path& frame_directory);

/// Relative paths inside a manifest resolve against the manifest's directory.
std::vector<VideoManifest> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<VideoManifest>& entries, const std::filesystem::path& path);

}  // namespace kinvid
