#include "kinvid/media_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kinvid {

namespace fs = std::filesystem;

Frame::Frame(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width(width), height(height), channels(channels), data(std::move(data)) {
  if (width < 1 || height < 1) throw ValidationError("frame dimensions must be positive");
  if (channels != 1 && channels != 3) throw ValidationError("frame channels must be 1 or 3");
  if (this->data.size() != static_cast<std::size_t>(width) * height * channels)
    throw ValidationError("frame data length does not match width*height*channels");
}

Frame::Frame(int width, int height, int channels, std::uint8_t fill)
    : Frame(width, height, channels,
            std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                          std::max(channels, 0),
                                      fill)) {}

std::string to_string(SmileType s) { return s == SmileType::spontaneous ? "spontaneous" : "posed"; }

SmileType parse_smile_type(const std::string& s) {
  if (s == "spontaneous") return SmileType::spontaneous;
  if (s == "posed") return SmileType::posed;
  throw ValidationError("unknown smile type '" + s + "'");
}

FaceVideo::FaceVideo(int frames, int height, int width, std::vector<std::uint8_t> gray,
                     std::optional<std::vector<std::uint8_t>> rgb, double fps)
    : frames_(frames), height_(height), width_(width), gray_(std::move(gray)), rgb_(std::move(rgb)), fps_(fps) {
  if (frames < 1 || height < 1 || width < 1) throw ValidationError("video dimensions must be positive");
  const auto n = static_cast<std::size_t>(frames) * height * width;
  if (gray_.size() != n) throw ValidationError("gray volume length does not match T*H*W");
  if (rgb_ && rgb_->size() != 3 * n) throw ValidationError("rgb volume does not match gray dimensions");
}

FaceVideo FaceVideo::from_frames(const std::vector<Frame>& frames, double fps) {
  if (frames.empty()) throw ValidationError("cannot build a video from zero frames");
  const int w = frames.front().width;
  const int h = frames.front().height;
  const bool color = frames.front().channels == 3;
  const auto plane = static_cast<std::size_t>(w) * h;
  std::vector<std::uint8_t> gray;
  gray.reserve(plane * frames.size());
  std::optional<std::vector<std::uint8_t>> rgb;
  if (color) rgb.emplace().reserve(3 * plane * frames.size());
  for (const auto& f : frames) {
    if (f.width != w || f.height != h || (f.channels == 3) != color)
      throw ValidationError("frames of a video must share dimensions and channel count");
    const Frame g = to_gray(f);
    gray.insert(gray.end(), g.data.begin(), g.data.end());
    if (color) rgb->insert(rgb->end(), f.data.begin(), f.data.end());
  }
  return FaceVideo(static_cast<int>(frames.size()), h, w, std::move(gray), std::move(rgb), fps);
}

Frame FaceVideo::frame_at(int t, bool gray_only) const {
  const auto plane = static_cast<std::size_t>(height_) * width_;
  if (rgb_ && !gray_only) {
    auto first = rgb_->begin() + static_cast<std::ptrdiff_t>(3 * plane * t);
    return Frame(width_, height_, 3, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(3 * plane)));
  }
  auto first = gray_.begin() + static_cast<std::ptrdiff_t>(plane * t);
  return Frame(width_, height_, 1, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

std::vector<Frame> FaceVideo::unstack(bool gray_only) const {
  std::vector<Frame> out;
  out.reserve(frames_);
  for (int t = 0; t < frames_; ++t) out.push_back(frame_at(t, gray_only));
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const fs::path& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw ValidationError(path.filename().string() + ": malformed header (truncated)");
  return tok;
}

int header_int(std::istream& in, const fs::path& path) {
  const std::string tok = header_token(in, path);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char ch) { return std::isdigit(ch); }))
    throw ValidationError(path.filename().string() + ": malformed header value '" + tok + "'");
  return std::stoi(tok);
}

}  // namespace

Frame read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.filename().string() + ": cannot open");
  const std::string magic = header_token(in, path);
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw ValidationError(path.filename().string() + ": malformed header (magic '" + magic + "')");
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (width < 1 || height < 1) throw ValidationError(path.filename().string() + ": malformed header (size)");
  if (maxval != 255) throw ValidationError(path.filename().string() + ": malformed header (maxval must be 255)");
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size()))
    throw ValidationError(path.filename().string() + ": truncated pixel data");
  return Frame(width, height, channels, std::move(data));
}

void write_pnm(const Frame& frame, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (frame.channels == 3 ? "P6" : "P5") << '\n' << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.data.data()), static_cast<std::streamsize>(frame.data.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string frame_filename(int index, int channels) {
  std::ostringstream name;
  name.width(6);
  name.fill('0');
  name << index;
  return name.str() + (channels == 3 ? ".ppm" : ".pgm");
}

std::vector<Frame> load_frames(const fs::path& frame_directory) {
  if (!fs::is_directory(frame_directory))
    throw ValidationError("frame directory not found: " + frame_directory.string());
  std::map<int, fs::path> indexed;
  for (const auto& entry : fs::directory_iterator(frame_directory)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != 10) continue;
    const std::string ext = name.substr(6);
    if (ext != ".pgm" && ext != ".ppm") continue;
    const std::string stem = name.substr(0, 6);
    if (!std::all_of(stem.begin(), stem.end(), [](unsigned char ch) { return std::isdigit(ch); })) continue;
    const int index = std::stoi(stem);
    if (!indexed.emplace(index, entry.path()).second)
      throw ValidationError(name + ": duplicate frame index");
  }
  if (indexed.empty()) throw ValidationError("no NNNNNN.pgm/.ppm frames in " + frame_directory.string());

  std::vector<Frame> frames;
  frames.reserve(indexed.size());
  int expected = 1;
  for (const auto& [index, path] : indexed) {
    if (index != expected) throw ValidationError("missing frame " + frame_filename(expected, 1).substr(0, 6));
    Frame f = read_pnm(path);
    if (!frames.empty()) {
      const Frame& first = frames.front();
      if (f.width != first.width || f.height != first.height || f.channels != first.channels)
        throw ValidationError(path.filename().string() + ": dimensions differ from the first frame");
    }
    frames.push_back(std::move(f));
    ++expected;
  }
  return frames;
}

void save_frames(const std::vector<Frame>& frames, const fs::path& frame_directory) {
  fs::create_directories(frame_directory);
  for (std::size_t i = 0; i < frames.size(); ++i)
    write_pnm(frames[i], frame_directory / frame_filename(static_cast<int>(i) + 1, frames[i].channels));
}

Frame to_gray(const Frame& frame) {
  if (frame.channels == 1) return frame;
  Frame out(frame.width, frame.height, 1);
  const std::size_t n = static_cast<std::size_t>(frame.width) * frame.height;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = frame.data[3 * i];
    const int g = frame.data[3 * i + 1];
    const int b = frame.data[3 * i + 2];
    // Integer form of round(0.299 R + 0.587 G + 0.114 B), halves rounded up.
    const int luma = (299 * r + 587 * g + 114 * b + 500) / 1000;
    out.data[i] = static_cast<std::uint8_t>(std::clamp(luma, 0, 255));
  }
  return out;
}

FaceVideo load_video(const fs::path& frame_directory) { return FaceVideo::from_frames(load_frames(frame_directory)); }

void save_video(const FaceVideo& video, const fs::path& frame_directory) {
  save_frames(video.unstack(), frame_directory);
}

std::vector<VideoManifest> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ValidationError("manifest " + path.string() + " must be a JSON array");
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  std::vector<VideoManifest> out;
  std::set<std::string> seen;
  for (const auto& rec : doc) {
    try {
      VideoManifest m;
      m.video_id = rec.at("video_id").get<std::string>();
      m.frames_dir = resolve(rec.at("frames_dir").get<std::string>());
      m.landmarks = resolve(rec.value("landmarks", std::string()));
      m.subject_id = rec.at("subject_id").get<std::string>();
      m.smile_type = parse_smile_type(rec.at("smile_type").get<std::string>());
      if (!seen.insert(m.video_id).second) throw ValidationError("duplicate video_id '" + m.video_id + "'");
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest " + path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::vector<VideoManifest>& entries, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto relative = [&](const fs::path& p) -> std::string {
    if (p.empty()) return {};
    return p.lexically_proximate(base).generic_string();
  };
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& m : entries) {
    doc.push_back({{"video_id", m.video_id},
                   {"frames_dir", relative(m.frames_dir)},
                   {"landmarks", relative(m.landmarks)},
                   {"subject_id", m.subject_id},
                   {"smile_type", to_string(m.smile_type)}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace kinvid
