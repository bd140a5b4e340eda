#include "kinvid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "kinvid/rng.hpp"

namespace kinvid {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kWaves = 4;

struct Wave {
  double fx, fy, phase;
};

// One video's texture: drifting plane waves plus a flickering grating, in template coordinates.
struct Texture {
  std::vector<Wave> waves;
  double gx = 0, gy = 0, grating_phase = 0;
  double vx = 0, vy = 0, flicker = 0;

  double operator()(double u, double v, double t) const {
    double value = 128.0;
    const double du = u - vx * t, dv = v - vy * t;
    for (const Wave& w : waves) value += 18.0 * std::cos(kTwoPi * (w.fx * du + w.fy * dv) + w.phase);
    value += 30.0 * std::cos(kTwoPi * (gx * u + gy * v - flicker * t) + grating_phase);
    return value;
  }
};

Texture make_texture(const SynthLatent& p, Rng& rng) {
  Texture tex;
  for (int k = 0; k < kWaves; ++k) {
    const double dir = kTwoPi * rng.uniform();
    const double f = p.band * (1.0 + 0.1 * rng.normal());
    tex.waves.push_back({f * std::cos(dir), f * std::sin(dir), kTwoPi * rng.uniform()});
  }
  tex.gx = std::cos(p.orientation) / p.wavelength;
  tex.gy = std::sin(p.orientation) / p.wavelength;
  tex.grating_phase = kTwoPi * rng.uniform();
  tex.vx = p.speed * std::cos(p.heading);
  tex.vy = p.speed * std::sin(p.heading);
  tex.flicker = p.flicker;
  return tex;
}

Affine2x3 placement(double scale, double angle, const Point2& from, const Point2& to) {
  Affine2x3 m;
  m.leftCols<2>() << scale * std::cos(angle), -scale * std::sin(angle), scale * std::sin(angle),
      scale * std::cos(angle);
  m.col(2) = to - m.leftCols<2>() * from;
  return m;
}

std::array<double, 6> draw_unit(Rng& rng) {
  std::array<double, 6> u;
  for (double& x : u) x = rng.uniform();
  return u;
}

}  // namespace

std::string to_string(SynthSignal s) { return s == SynthSignal::both ? "both" : "dynamics"; }

SynthSignal parse_synth_signal(const std::string& s) {
  if (s == "both") return SynthSignal::both;
  if (s == "dynamics") return SynthSignal::dynamics;
  throw ValidationError("unknown signal mode '" + s + "' (expected both or dynamics)");
}

void SynthConfig::validate() const {
  if (families < 2) throw ValidationError("need at least 2 families");
  if (videos_per_subject < 1) throw ValidationError("need at least 1 video per subject");
  // Large enough for the widest default coders (LBP 24:3, LPQ 17, BSIF 17).
  if (size < 20) throw ValidationError("face size " + std::to_string(size) + " is below the minimum 20");
  if (frames < 7) throw ValidationError("frame count " + std::to_string(frames) + " is below the minimum 7");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (!(noise >= 0.0)) throw ValidationError("noise must be non-negative");
}

SynthLatent SynthLatent::from_unit(const std::array<double, 6>& u) {
  SynthLatent p;
  p.band = 0.04 + 0.2 * u[0];
  p.orientation = std::numbers::pi * u[1];
  p.wavelength = 4.0 + 12.0 * u[2];
  p.speed = 1.5 * u[3];
  p.heading = kTwoPi * u[4];
  p.flicker = 0.02 + 0.25 * u[5];
  return p;
}

SynthDataset synth_generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const AlignmentTemplate tmpl = AlignmentTemplate::standard(config.size);
  const int raw = config.raw_size();
  const Point2 template_center(config.size / 2.0, config.size / 2.0);
  const Point2 raw_center(raw / 2.0, raw / 2.0);

  SynthDataset data;
  for (int f = 0; f < config.families; ++f) {
    const Relation relation = kRelations[static_cast<std::size_t>(f) % kRelations.size()];
    const auto family_unit = draw_unit(rng);
    std::array<std::string, 2> subject_ids;
    std::array<std::vector<std::string>, 2> video_ids;
    for (int s = 0; s < 2; ++s) {
      char id[32];
      std::snprintf(id, sizeof id, "f%03d_s%d", f, s);
      subject_ids[s] = id;
      const auto own = draw_unit(rng);
      std::array<double, 6> unit;
      for (std::size_t k = 0; k < unit.size(); ++k) {
        const bool spatial = k < 3;
        const double a = (spatial && config.signal == SynthSignal::dynamics) ? 0.0 : config.alpha;
        unit[k] = a * family_unit[k] + (1.0 - a) * own[k];
      }
      const SynthLatent latent = SynthLatent::from_unit(unit);

      for (int v = 0; v < config.videos_per_subject; ++v) {
        VideoManifest manifest;
        manifest.video_id = subject_ids[s] + "_v" + std::to_string(v);
        manifest.subject_id = subject_ids[s];
        manifest.smile_type = v % 2 == 0 ? SmileType::spontaneous : SmileType::posed;
        video_ids[s].push_back(manifest.video_id);
        std::vector<EyeAnnotation> landmarks;

        const Texture tex = make_texture(latent, rng);
        const double scale = rng.uniform(0.9, 1.1);
        const double angle = rng.uniform(-0.15, 0.15);
        const Point2 offset(rng.uniform(-1.0, 1.0) * config.size / 10.0, rng.uniform(-1.0, 1.0) * config.size / 10.0);

        std::vector<std::uint8_t> gray(static_cast<std::size_t>(config.frames) * raw * raw);
        for (int t = 0; t < config.frames; ++t) {
          const Point2 jitter(0.5 * rng.normal(), 0.5 * rng.normal());
          const Affine2x3 m =
              placement(scale, angle + 0.01 * rng.normal(), template_center, raw_center + offset + jitter);
          const Affine2x3 inv = invert(m);
          landmarks.push_back({t, apply(m, tmpl.left_eye), apply(m, tmpl.right_eye)});
          for (int y = 0; y < raw; ++y)
            for (int x = 0; x < raw; ++x) {
              const Point2 p = apply(inv, Point2(x, y));
              const double value = tex(p.x(), p.y(), t) + config.noise * rng.normal();
              gray[(static_cast<std::size_t>(t) * raw + y) * raw + x] =
                  static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
            }
        }
        data.videos.push_back({std::move(manifest), FaceVideo(config.frames, raw, raw, std::move(gray)),
                               std::move(landmarks), latent});
      }
    }
    for (int v = 0; v < config.videos_per_subject; ++v) {
      KinPair p;
      char pid[32];
      std::snprintf(pid, sizeof pid, "f%03d_v%d", f, v);
      p.pair_id = pid;
      p.video_a = video_ids[0][static_cast<std::size_t>(v)];
      p.video_b = video_ids[1][static_cast<std::size_t>(v)];
      p.subject_a = subject_ids[0];
      p.subject_b = subject_ids[1];
      p.relation = relation;
      p.smile_type = v % 2 == 0 ? SmileType::spontaneous : SmileType::posed;
      p.label = 1;
      data.positives.push_back(std::move(p));
    }
  }
  return data;
}

void write_synth_dataset(const SynthDataset& data, const fs::path& out_dir) {
  fs::create_directories(out_dir / "videos");
  fs::create_directories(out_dir / "landmarks");
  std::vector<VideoManifest> manifest;
  for (const SynthVideo& v : data.videos) {
    VideoManifest m = v.manifest;
    m.frames_dir = out_dir / "videos" / m.video_id;
    m.landmarks = out_dir / "landmarks" / (m.video_id + ".csv");
    save_video(v.video, m.frames_dir);
    write_landmarks(v.landmarks, m.landmarks);
    manifest.push_back(std::move(m));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  write_pairs(data.positives, out_dir / "positives.csv");
}

}  // namespace kinvid
