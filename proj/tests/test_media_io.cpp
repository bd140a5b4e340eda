#include <doctest.h>

#include <cmath>

#include "kinvid/media_io.hpp"
#include "kinvid/rng.hpp"
#include "test_util.hpp"

using namespace kinvid;
namespace fs = std::filesystem;

namespace {

Frame random_frame(Rng& rng, int w, int h, int channels) {
  Frame f(w, h, channels);
  for (auto& v : f.data) v = static_cast<std::uint8_t>(rng.index(256));
  return f;
}

// Luma from the floating-point definition, rounded half up.
int luma_oracle(int r, int g, int b) { return static_cast<int>(std::floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5)); }

}  // namespace

TEST_SUITE("media_io") {
  TEST_CASE("pnm files round-trip byte for byte") {
    testutil::TempDir dir;
    Rng rng(3);
    for (int channels : {1, 3}) {
      const Frame f = random_frame(rng, 7, 5, channels);
      const fs::path p = dir / (channels == 1 ? "a.pgm" : "a.ppm");
      write_pnm(f, p);
      const std::string bytes = testutil::read_bytes(p);
      CHECK(bytes.substr(0, 2) == (channels == 1 ? "P5" : "P6"));
      const Frame back = read_pnm(p);
      CHECK(back == f);
      write_pnm(back, dir / "b.pnm");
      CHECK(testutil::read_bytes(dir / "b.pnm") == bytes);
    }
  }

  TEST_CASE("pnm reader accepts comments and rejects other maxvals") {
    testutil::TempDir dir;
    testutil::write_text(dir / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + char(7) + char(9));
    const Frame f = read_pnm(dir / "c.pgm");
    CHECK(f.width == 2);
    CHECK(f.at(0, 1) == 9);
    testutil::write_text(dir / "d.pgm", "P5\n2 1\n65535\n\0\0\0\0");
    CHECK_THROWS_AS(read_pnm(dir / "d.pgm"), ValidationError);
    testutil::write_text(dir / "e.pgm", std::string("P5\n4 4\n255\n") + "abc");
    CHECK_THROWS_AS(read_pnm(dir / "e.pgm"), ValidationError);
  }

  TEST_CASE("frame directories reproduce their bytes") {
    testutil::TempDir dir;
    Rng rng(5);
    std::vector<Frame> frames;
    for (int t = 0; t < 3; ++t) frames.push_back(random_frame(rng, 6, 4, 3));
    save_frames(frames, dir / "in");
    CHECK(fs::exists(dir / "in" / "000001.ppm"));
    CHECK(fs::exists(dir / "in" / "000003.ppm"));
    const auto loaded = load_frames(dir / "in");
    REQUIRE(loaded.size() == 3);
    save_frames(loaded, dir / "out");
    for (int t = 1; t <= 3; ++t)
      CHECK(testutil::read_bytes(dir / "in" / frame_filename(t, 3)) ==
            testutil::read_bytes(dir / "out" / frame_filename(t, 3)));
  }

  TEST_CASE("gaps in frame numbering are reported") {
    testutil::TempDir dir;
    Rng rng(1);
    write_pnm(random_frame(rng, 4, 4, 1), dir / "000001.pgm");
    write_pnm(random_frame(rng, 4, 4, 1), dir / "000003.pgm");
    try {
      load_frames(dir.path());
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("000002") != std::string::npos);
    }
  }

  TEST_CASE("luma conversion") {
    Frame f(3, 1, 3, std::vector<std::uint8_t>{255, 255, 255, 0, 0, 0, 100, 150, 200});
    const Frame g = to_gray(f);
    CHECK(g.channels == 1);
    CHECK(g.at(0, 0) == 255);
    CHECK(g.at(0, 1) == 0);
    CHECK(g.at(0, 2) == 141);

    Rng rng(11);
    const Frame big = random_frame(rng, 40, 30, 3);
    const Frame gray = to_gray(big);
    for (int y = 0; y < big.height; ++y)
      for (int x = 0; x < big.width; ++x)
        CHECK(gray.at(y, x) == luma_oracle(big.at(y, x, 0), big.at(y, x, 1), big.at(y, x, 2)));
    CHECK(to_gray(gray) == gray);
  }

  TEST_CASE("stacking and unstacking gray frames") {
    Rng rng(2);
    std::vector<Frame> frames;
    for (int t = 0; t < 4; ++t) frames.push_back(random_frame(rng, 5, 3, 1));
    const FaceVideo v = FaceVideo::from_frames(frames);
    CHECK(v.frames() == 4);
    CHECK(v.height() == 3);
    CHECK(v.width() == 5);
    CHECK_FALSE(v.has_rgb());
    CHECK(v.unstack() == frames);
    CHECK(v.at(2, 1, 4) == frames[2].at(1, 4));
    CHECK(v.frame(3)(2, 0) == frames[3].at(2, 0));
  }

  TEST_CASE("rgb videos keep color next to luma") {
    Rng rng(8);
    std::vector<Frame> frames{random_frame(rng, 4, 4, 3), random_frame(rng, 4, 4, 3)};
    const FaceVideo v = FaceVideo::from_frames(frames);
    REQUIRE(v.has_rgb());
    CHECK(v.rgb_at(1, 2, 3, 2) == frames[1].at(2, 3, 2));
    CHECK(v.at(1, 2, 3) == to_gray(frames[1]).at(2, 3));
    CHECK(v.unstack() == frames);
    CHECK(v.frame_at(0, true) == to_gray(frames[0]));
  }

  TEST_CASE("mismatched frame sizes are rejected") {
    Rng rng(2);
    CHECK_THROWS_AS(FaceVideo::from_frames({random_frame(rng, 4, 4, 1), random_frame(rng, 5, 4, 1)}), ValidationError);
    CHECK_THROWS_AS(FaceVideo::from_frames({}), ValidationError);
  }

  TEST_CASE("manifest round-trip with relative paths") {
    testutil::TempDir dir;
    std::vector<VideoManifest> entries(2);
    entries[0] = {"v1", dir / "frames" / "v1", dir / "lm" / "v1.csv", "s1", SmileType::spontaneous};
    entries[1] = {"v2", dir / "frames" / "v2", {}, "s2", SmileType::posed};
    write_manifest(entries, dir / "manifest.json");
    const std::string text = testutil::read_bytes(dir / "manifest.json");
    CHECK(text.find("\"frames/v1\"") != std::string::npos);
    const auto back = read_manifest(dir / "manifest.json");
    REQUIRE(back.size() == 2);
    CHECK(back[0].video_id == "v1");
    CHECK(fs::weakly_canonical(back[0].frames_dir) == fs::weakly_canonical(dir / "frames" / "v1"));
    CHECK(back[0].frames_dir.filename() == "v1");
    CHECK(back[1].smile_type == SmileType::posed);
    CHECK(back[1].landmarks.empty());
  }

  TEST_CASE("manifest errors") {
    testutil::TempDir dir;
    testutil::write_text(dir / "dup.json",
                         R"([{"video_id":"a","frames_dir":"x","subject_id":"s","smile_type":"posed"},
                             {"video_id":"a","frames_dir":"y","subject_id":"t","smile_type":"posed"}])");
    CHECK_THROWS_AS(read_manifest(dir / "dup.json"), ValidationError);
    testutil::write_text(dir / "smile.json",
                         R"([{"video_id":"a","frames_dir":"x","subject_id":"s","smile_type":"grin"}])");
    CHECK_THROWS_AS(read_manifest(dir / "smile.json"), ValidationError);
    testutil::write_text(dir / "bad.json", "{");
    CHECK_THROWS_AS(read_manifest(dir / "bad.json"), ValidationError);
  }
}
