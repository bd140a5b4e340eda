#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "kinvid/feature_io.hpp"
#include "kinvid/media_io.hpp"
#include "kinvid/synth.hpp"
#include "test_util.hpp"

using namespace kinvid;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string err;
};

Run kinvid_cli(const std::string& args, const testutil::TempDir& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(KINVID_CLI) + " " + args + " 2>" + err.string() + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_bytes(err)};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("extract on a constant video") {
    testutil::TempDir dir;
    save_frames(std::vector<Frame>(8, Frame(24, 24, 1, std::uint8_t{90})), dir / "v");
    write_manifest({{"const", dir / "v", {}, "s", SmileType::posed}}, dir / "manifest.json");
    const Run r = kinvid_cli("extract --manifest " + (dir / "manifest.json").string() +
                                 " --descriptor lbptop --scales 8:1,16:2,24:3 --out " + (dir / "feat").string(),
                             dir);
    REQUIRE(r.code == 0);
    const FeatureVector f = read_feature(feature_path(dir / "feat", "const", "lbptop"));
    CHECK(f.values.size() == 2571);
    CHECK(f.values.sum() == doctest::Approx(9.0));
  }

  TEST_CASE("pairs are byte-identical across runs") {
    testutil::TempDir dir;
    SynthConfig cfg;
    cfg.families = 14;
    cfg.size = 20;
    cfg.frames = 7;
    write_pairs(synth_generate(cfg).positives, dir / "pos.csv");
    const std::string base = "pairs --positives " + (dir / "pos.csv").string() + " --seed 7 --out ";
    REQUIRE(kinvid_cli(base + (dir / "a.csv").string(), dir).code == 0);
    REQUIRE(kinvid_cli(base + (dir / "b.csv").string(), dir).code == 0);
    CHECK(testutil::read_bytes(dir / "a.csv") == testutil::read_bytes(dir / "b.csv"));
    CHECK(read_pairs(dir / "a.csv").size() == 56);
  }

  TEST_CASE("evaluate without features exits 1 naming them") {
    testutil::TempDir dir;
    SynthConfig cfg;
    cfg.families = 14;
    write_pairs(generate_negatives(synth_generate(cfg).positives, 1), dir / "pairs.csv");
    fs::create_directories(dir / "none");
    const Run r = kinvid_cli("evaluate --pairs " + (dir / "pairs.csv").string() + " --features " +
                                 (dir / "none").string() + " --descriptor lbptop --out " + (dir / "rep").string(),
                             dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("f000_s0_v0") != std::string::npos);
  }

  TEST_CASE("usage errors exit 1") {
    testutil::TempDir dir;
    CHECK(kinvid_cli("frobnicate", dir).code == 1);
    const Run r = kinvid_cli("pairs --positives x --bogus 3", dir);
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
    CHECK(kinvid_cli("", dir).code == 1);
  }

  TEST_CASE("fuse sums score files") {
    testutil::TempDir dir;
    write_scores({{"a", 1, 1.0}, {"b", -1, -0.5}}, dir / "x.csv");
    write_scores({{"a", 1, 0.2}, {"b", -1, 0.8}}, dir / "y.csv");
    REQUIRE(kinvid_cli("fuse --scores " + (dir / "x.csv").string() + " --scores " + (dir / "y.csv").string() +
                           " --out " + (dir / "f.csv").string(),
                       dir)
                .code == 0);
    const auto fused = read_scores(dir / "f.csv");
    REQUIRE(fused.size() == 2);
    CHECK(fused[0].score == doctest::Approx(1.2));
    CHECK(fused[1].score == doctest::Approx(0.3));
  }
}
