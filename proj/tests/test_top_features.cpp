#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "kinvid/feature_io.hpp"
#include "kinvid/rng.hpp"
#include "kinvid/top_features.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace kinvid;

namespace {

FaceVideo random_video(Rng& rng, int t, int h, int w) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(t) * h * w);
  for (auto& v : data) v = static_cast<std::uint8_t>(rng.index(256));
  return FaceVideo(t, h, w, std::move(data));
}

FaceVideo constant_video(int t, int h, int w, std::uint8_t v) {
  return FaceVideo(t, h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(t) * h * w, v));
}

std::shared_ptr<const FilterBank> random_bank(Rng& rng, int f, int W) {
  auto bank = std::make_shared<FilterBank>();
  bank->size = W;
  bank->filters = oracle::random_zero_mean_bank(rng, f, W);
  return bank;
}

// Normalized histogram of one slice set, computed straight from the oracle codes.
Eigen::VectorXd oracle_lbp_plane(const std::vector<GrayImage>& slices, int P, double R) {
  const int m = static_cast<int>(std::ceil(R));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(P * (P - 1) + 3);
  for (const auto& s : slices)
    for (int y = m; y < s.rows() - m; ++y)
      for (int x = m; x < s.cols() - m; ++x) h[oracle::uniform_bin(oracle::lbp(s, y, x, P, R), P)] += 1;
  return h / h.sum();
}

}  // namespace

TEST_SUITE("top_features") {
  TEST_CASE("plane slices of a 2x2x2 volume") {
    const FaceVideo v(2, 2, 2, {0, 1, 2, 3, 4, 5, 6, 7});  // value = 4t + 2y + x
    const PlaneSlices p = slice_planes(v);
    REQUIRE(p.xy.size() == 2);
    REQUIRE(p.xt.size() == 2);
    REQUIRE(p.yt.size() == 2);
    for (int t = 0; t < 2; ++t)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
          const int value = 4 * t + 2 * y + x;
          CHECK(p.xy[t](y, x) == value);
          CHECK(p.xt[y](t, x) == value);
          CHECK(p.yt[x](t, y) == value);
        }
  }

  TEST_CASE("slices of constant and random volumes") {
    const PlaneSlices c = slice_planes(constant_video(5, 6, 7, 33));
    for (const auto* set : {&c.xy, &c.xt, &c.yt})
      for (const auto& s : *set) CHECK((s.array() == 33).all());
    CHECK(c.xt.front().rows() == 5);
    CHECK(c.xt.front().cols() == 7);
    CHECK(c.yt.front().cols() == 6);

    Rng rng(2);
    const FaceVideo v = random_video(rng, 4, 5, 6);
    const PlaneSlices p = slice_planes(v);
    std::vector<std::uint8_t> back;
    for (const auto& s : p.xy) back.insert(back.end(), s.data(), s.data() + s.size());
    CHECK(back == v.gray());
  }

  TEST_CASE("plane histograms") {
    const std::vector<GrayImage> constant{GrayImage::Constant(6, 6, 9), GrayImage::Constant(5, 8, 200)};
    const PlaneHistogram full = plane_histogram(constant, TextureCoder::lbp(8, 1, LbpMapping::full));
    CHECK(full.values[255] == 1.0);
    CHECK(full.values.sum() == 1.0);

    const PlaneHistogram small = plane_histogram({GrayImage::Constant(4, 4, 1)}, TextureCoder::lbp(8, 1));
    CHECK(small.counts.sum() == 4u);

    Rng rng(3);
    const GrayImage a = oracle::random_image(rng, 9, 12), b = oracle::random_image(rng, 14, 7);
    const auto coder = TextureCoder::lbp(8, 1);
    const PlaneHistogram ha = plane_histogram({a}, coder), hb = plane_histogram({b}, coder);
    const PlaneHistogram both = plane_histogram({a, b}, coder);
    const double na = static_cast<double>(ha.counts.sum()), nb = static_cast<double>(hb.counts.sum());
    CHECK((both.values - (na * ha.values + nb * hb.values) / (na + nb)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((both.values - oracle_lbp_plane({a, b}, 8, 1)).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("small slices are skipped and an all-skipped plane is an error") {
    const auto coder = TextureCoder::lbp(24, 3);
    const PlaneHistogram h = plane_histogram({GrayImage::Constant(4, 20, 1), GrayImage::Constant(10, 10, 1)}, coder);
    CHECK(h.skipped_slices == 1);
    CHECK(h.used_slices == 1);
    try {
      plane_histogram({GrayImage::Constant(4, 20, 1)}, coder);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("7x7") != std::string::npos);
    }
    // A 4-frame video cannot feed any XT slice at radius 3.
    CHECK_THROWS_AS(extract_top_multiscale(constant_video(4, 20, 20, 1), default_lbp_scales()), ValidationError);
  }

  TEST_CASE("feature lengths are pure functions of the scales") {
    CHECK(top_feature_length(default_lbp_scales()) == 2571);
    CHECK(top_feature_length(default_lpq_scales()) == 6144);
    Rng rng(1);
    std::vector<TextureCoder> bsif;
    for (int W = 3; W <= 17; W += 2) bsif.push_back(TextureCoder::bsif(random_bank(rng, 8, W)));
    CHECK(top_feature_length(bsif) == 6144);
    const auto f = extract_top_multiscale(constant_video(8, 12, 12, 50), default_lbp_scales());
    CHECK(f.values.size() == 2571);
    CHECK(f.descriptor == "lbptop");
    CHECK(f.scales == std::vector<std::string>{"8:1", "16:2", "24:3"});
  }

  TEST_CASE("constant video with one bsif scale") {
    Rng rng(4);
    const auto f = extract_top_multiscale(constant_video(16, 16, 16, 120), {TextureCoder::bsif(random_bank(rng, 8, 3))});
    REQUIRE(f.values.size() == 3 * 256);
    CHECK((f.values.array() != 0).count() == 3);
    CHECK(f.values[0] == 1.0);
    CHECK(f.values[256] == 1.0);
    CHECK(f.values[512] == 1.0);
  }

  TEST_CASE("multiscale features decompose into independent plane histograms") {
    Rng rng(6);
    const FaceVideo v = random_video(rng, 9, 14, 13);
    const auto f = extract_top_multiscale(v, default_lbp_scales());
    const PlaneSlices p = slice_planes(v);
    Eigen::Index offset = 0;
    for (auto [P, R] : std::vector<std::pair<int, double>>{{8, 1}, {16, 2}, {24, 3}}) {
      const Eigen::Index bins = P * (P - 1) + 3;
      for (const auto* set : {&p.xy, &p.xt, &p.yt}) {
        CHECK((f.values.segment(offset, bins) - oracle_lbp_plane(*set, P, R)).cwiseAbs().maxCoeff() < 1e-15);
        offset += bins;
      }
    }
    CHECK(offset == f.values.size());
  }

  TEST_CASE("blocks sum to three and XY ignores frame order") {
    Rng rng(7);
    const FaceVideo v = random_video(rng, 8, 12, 12);
    const auto scales = parse_scales(Descriptor::lpq, "3,5");
    const auto f = extract_top_multiscale(v, scales);
    CHECK((f.values.array() >= 0).all());
    for (int s = 0; s < 2; ++s) CHECK(std::abs(f.values.segment(s * 768, 768).sum() - 3.0) < 1e-8);

    std::vector<Frame> frames = v.unstack();
    std::reverse(frames.begin(), frames.end());
    std::swap(frames[1], frames[5]);
    const auto g = extract_top_multiscale(FaceVideo::from_frames(frames), scales);
    for (int s = 0; s < 2; ++s) CHECK(f.values.segment(s * 768, 256) == g.values.segment(s * 768, 256));
  }

  TEST_CASE("spatial variant uses the XY histogram of one image") {
    Rng rng(9);
    const FaceVideo v = random_video(rng, 1, 20, 20);
    const auto scales = default_lbp_scales();
    const auto s = extract_spatial_multiscale(v.frame(0), scales);
    CHECK(s.values.size() == 857);
    CHECK(s.descriptor == "lbp");
    CHECK((s.values.head(59) - oracle_lbp_plane({GrayImage(v.frame(0))}, 8, 1)).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("scale parsing") {
    const auto lbp = parse_scales(Descriptor::lbp, "8:1,16:2");
    REQUIRE(lbp.size() == 2);
    CHECK(lbp[1].scale_label() == "16:2");
    CHECK(parse_scales(Descriptor::lpq, "3,5,7").size() == 3);
    CHECK_THROWS_AS(parse_scales(Descriptor::lbp, "8"), ValidationError);
    CHECK_THROWS_AS(parse_scales(Descriptor::lpq, "4"), ValidationError);
    CHECK_THROWS_AS(parse_scales(Descriptor::lpq, ""), ValidationError);
    CHECK_THROWS_AS(parse_scales(Descriptor::bsif, "7"), ValidationError);
  }

  TEST_CASE("feature files round-trip exactly") {
    testutil::TempDir dir;
    Rng rng(10);
    FeatureVector f{"vid_1", "lbptop", {"8:1"}, Eigen::VectorXd::Zero(5)};
    for (Eigen::Index i = 0; i < 5; ++i) f.values[i] = rng.uniform() / 3.0;
    f.values[4] = 1e-300;
    const auto path = feature_path(dir.path(), f.video_id, f.descriptor);
    write_feature(f, path);
    const FeatureVector back = read_feature(path);
    CHECK(back.video_id == f.video_id);
    CHECK(back.descriptor == f.descriptor);
    CHECK(back.scales == f.scales);
    CHECK(back.values == f.values);
    testutil::write_text(dir / "bad.json", R"({"video_id":"a","descriptor":"x","scales":[],"length":3,"values":[1,2]})");
    CHECK_THROWS_AS(read_feature(dir / "bad.json"), ValidationError);
  }
}
