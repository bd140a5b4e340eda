#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kinvid/eval_protocol.hpp"
#include "kinvid/face_align.hpp"
#include "kinvid/media_io.hpp"

namespace kinvid {

/// Where the kin signal lives. `dynamics` keeps each subject's spatial texture private, so
/// only the temporal behaviour (drift velocity, flicker rate) is shared within a family.
enum class SynthSignal { both, dynamics };

std::string to_string(SynthSignal s);
SynthSignal parse_synth_signal(const std::string& s);

struct SynthConfig {
  int families = 25;
  int videos_per_subject = 2;  // alternating spontaneous / posed
  int frames = 16;
  int size = 64;               // side of the aligned face
  double alpha = 1.0;          // 1: kin share the latent exactly, 0: unrelated
  std::uint64_t seed = 1;
  SynthSignal signal = SynthSignal::both;
  double noise = 2.0;          // per-pixel Gaussian sigma (gray levels)

  void validate() const;
  int raw_size() const { return size + size / 2; }
};

/// Texture-dynamics parameters in physical units.
struct SynthLatent {
  double band = 0.1;         // plane-wave frequency, cycles / pixel
  double orientation = 0.0;  // grating orientation, radians
  double wavelength = 8.0;   // grating wavelength, pixels
  double speed = 0.5;        // texture drift, pixels / frame
  double heading = 0.0;      // drift direction, radians
  double flicker = 0.1;      // grating temporal frequency, cycles / frame

  /// Maps a point of the unit cube [0,1]^6 onto the parameter ranges.
  static SynthLatent from_unit(const std::array<double, 6>& u);
};

struct SynthVideo {
  VideoManifest manifest;
  FaceVideo video;  // raw (unaligned) gray frames
  std::vector<EyeAnnotation> landmarks;
  SynthLatent latent;
};

struct SynthDataset {
  std::vector<SynthVideo> videos;
  KinPairList positives;
};

/// Families of two subjects; relations assigned round-robin over S-S .. F-S. Each subject's
/// latent is alpha * family + (1 - alpha) * individual in the unit cube.
SynthDataset synth_generate(const SynthConfig& config);

/// Writes videos/<id>/NNNNNN.pgm, landmarks/<id>.csv, manifest.json and positives.csv.
void write_synth_dataset(const SynthDataset& data, const std::filesystem::path& out_dir);

}  // namespace kinvid
