#include <doctest.h>

#include <set>

#include "kinvid/rng.hpp"
#include "kinvid/texture_coders.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace kinvid;

namespace {

FilterBank random_bank(Rng& rng, int f, int W) {
  FilterBank bank;
  bank.size = W;
  bank.filters = oracle::random_zero_mean_bank(rng, f, W);
  return bank;
}

GrayImage constant_image(int h, int w, std::uint8_t v) { return GrayImage::Constant(h, w, v); }

}  // namespace

TEST_SUITE("texture_coders") {
  TEST_CASE("lbp matches the oracle") {
    Rng rng(21);
    const GrayImage img = oracle::random_image(rng, 24, 27);
    for (auto [P, R] : std::vector<std::pair<int, double>>{{8, 1}, {8, 1.5}, {16, 2}, {24, 3}, {4, 1}}) {
      for (LbpMapping mapping : {LbpMapping::full, LbpMapping::uniform}) {
        if (mapping == LbpMapping::full && P > 16) continue;
        const LbpParams params{P, R, mapping};
        const CodeImage c = lbp_code(img, params);
        CHECK(c.margin == static_cast<int>(std::ceil(R)));
        int mismatches = 0;
        for (int y = c.margin; y < img.rows() - c.margin; ++y)
          for (int x = c.margin; x < img.cols() - c.margin; ++x) {
            const std::uint32_t raw = oracle::lbp(img, y, x, P, R);
            const std::uint32_t want = mapping == LbpMapping::full ? raw : oracle::uniform_bin(raw, P);
            mismatches += c.codes(y, x) != want;
          }
        INFO("P=" << P << " R=" << R);
        CHECK(mismatches == 0);
      }
    }
  }

  TEST_CASE("lbp on constant and single-pixel images") {
    const CodeImage full = lbp_code(constant_image(9, 9, 40), {8, 1.0, LbpMapping::full});
    CHECK((full.valid().array() == 255u).all());
    const CodeImage uni = lbp_code(constant_image(9, 9, 40), {8, 1.0, LbpMapping::uniform});
    CHECK((uni.valid().array() == 57u).all());

    GrayImage dot = constant_image(9, 9, 0);
    dot(4, 4) = 100;
    const CodeImage d = lbp_code(dot, {8, 1.0, LbpMapping::full});
    CHECK(d.codes(4, 4) == 0u);
    // The east neighbor sees the dot at bit 4 (angle pi); everything else ties with zero.
    CHECK(d.codes(4, 5) == 255u);
    CHECK(d.codes(2, 2) == 255u);
  }

  TEST_CASE("lbp ties from cancelling neighbors count as set") {
    // The 45 degree neighbor weighs (y-1, x) and (y, x+1) equally, so +d and -d interpolate to the center exactly.
    for (int d : {5, -5, 17, -60}) {
      GrayImage img = constant_image(3, 3, 100);
      img(0, 1) = static_cast<std::uint8_t>(100 + d);
      img(1, 2) = static_cast<std::uint8_t>(100 - d);
      INFO("d=" << d);
      CHECK((lbp_code(img, {8, 1.0, LbpMapping::full}).codes(1, 1) >> 1 & 1u) == 1u);
      CHECK(lbp_code(img, {8, 1.0, LbpMapping::full}).codes(1, 1) == oracle::lbp(img, 1, 1, 8, 1.0));
    }
  }

  TEST_CASE("uniform mapping for eight neighbors") {
    const UniformMapping map(8);
    CHECK(map.bins() == 59u);
    std::set<std::uint32_t> uniform_bins;
    int uniform_codes = 0;
    for (std::uint32_t code = 0; code < 256; ++code) {
      const std::uint32_t bin = map(code);
      CHECK(bin == oracle::uniform_bin(code, 8));
      if (circular_transitions(code, 8) <= 2) {
        ++uniform_codes;
        uniform_bins.insert(bin);
      } else {
        CHECK(bin == 58u);
      }
    }
    CHECK(uniform_codes == 58);
    CHECK(uniform_bins.size() == 58);
    CHECK(*uniform_bins.rbegin() == 57u);
    CHECK(map(0b01010101u) == 58u);
    CHECK(map(0u) == 0u);
    CHECK(map(0b00000111u) == 1u + 2u * 8u + 0u);
    CHECK(map(0b10000001u) == 1u + 1u * 8u + 7u);
    CHECK(map.table().size() == 256);
  }

  TEST_CASE("lbp offsets snap to the grid") {
    const auto off = lbp_offsets(4, 1.0);
    REQUIRE(off.size() == 4);
    CHECK(off[0] == Eigen::Vector2d(1, 0));
    CHECK(off[1] == Eigen::Vector2d(0, -1));
    CHECK(off[2] == Eigen::Vector2d(-1, 0));
    CHECK(off[3] == Eigen::Vector2d(0, 1));
  }

  TEST_CASE("lpq matches the oracle") {
    Rng rng(5);
    for (int W : {3, 5, 7, 13}) {
      const GrayImage img = oracle::random_image(rng, W + 4, W + 6);
      const CodeImage c = lpq_code(img, {W});
      CHECK(c.code_range == 256u);
      int mismatches = 0;
      for (int y = c.margin; y < img.rows() - c.margin; ++y)
        for (int x = c.margin; x < img.cols() - c.margin; ++x) mismatches += c.codes(y, x) != oracle::lpq(img, y, x, W);
      INFO("W=" << W);
      CHECK(mismatches == 0);
    }
  }

  TEST_CASE("lpq on a constant image and size limits") {
    const CodeImage c = lpq_code(constant_image(12, 12, 90), {7});
    CHECK((c.valid().array() == 255u).all());
    CHECK_THROWS_AS(lpq_code(constant_image(12, 12, 90), {13}), ValidationError);
    CHECK_THROWS_AS(lpq_code(constant_image(12, 12, 90), {4}), ValidationError);
  }

  TEST_CASE("bsif matches the oracle") {
    Rng rng(8);
    for (auto [f, W] : std::vector<std::pair<int, int>>{{8, 7}, {5, 3}, {12, 9}}) {
      const FilterBank bank = random_bank(rng, f, W);
      const GrayImage img = oracle::random_image(rng, 20, 22);
      const CodeImage c = bsif_code(img, bank);
      CHECK(c.code_range == (1u << f));
      int mismatches = 0;
      for (int y = c.margin; y < img.rows() - c.margin; ++y)
        for (int x = c.margin; x < img.cols() - c.margin; ++x)
          mismatches += c.codes(y, x) != oracle::bsif(img, y, x, bank.filters);
      CHECK(mismatches == 0);
    }
  }

  TEST_CASE("bsif on a constant image and under filter negation") {
    Rng rng(2);
    const FilterBank bank = random_bank(rng, 8, 7);
    CHECK((bsif_code(constant_image(15, 15, 200), bank).valid().array() == 0u).all());

    FilterBank neg = bank;
    for (auto& m : neg.filters) m = -m;
    const GrayImage img = oracle::random_image(rng, 20, 20);
    const CodeImage a = bsif_code(img, bank), b = bsif_code(img, neg);
    int flipped = 0;
    for (int y = a.margin; y < a.height() - a.margin; ++y)
      for (int x = a.margin; x < a.width() - a.margin; ++x) flipped += (a.codes(y, x) ^ b.codes(y, x)) == 255u;
    CHECK(flipped == (20 - 6) * (20 - 6));
  }

  TEST_CASE("codes depend only on the local window") {
    Rng rng(13);
    GrayImage img = oracle::random_image(rng, 30, 30);
    const FilterBank bank = random_bank(rng, 8, 7);
    const CodeImage lbp0 = lbp_code(img, {8, 1.0, LbpMapping::uniform});
    const CodeImage lpq0 = lpq_code(img, {7});
    const CodeImage bsif0 = bsif_code(img, bank);
    img(25, 25) = static_cast<std::uint8_t>(255 - img(25, 25));
    const CodeImage lbp1 = lbp_code(img, {8, 1.0, LbpMapping::uniform});
    const CodeImage lpq1 = lpq_code(img, {7});
    const CodeImage bsif1 = bsif_code(img, bank);
    for (int y = 3; y < 20; ++y)
      for (int x = 3; x < 20; ++x) {
        CHECK(lbp0.codes(y, x) == lbp1.codes(y, x));
        CHECK(lpq0.codes(y, x) == lpq1.codes(y, x));
        CHECK(bsif0.codes(y, x) == bsif1.codes(y, x));
      }
  }

  TEST_CASE("adding a constant leaves the codes unchanged") {
    Rng rng(17);
    GrayImage img(25, 25);
    for (int y = 0; y < 25; ++y)
      for (int x = 0; x < 25; ++x) img(y, x) = static_cast<std::uint8_t>(rng.index(200));
    const GrayImage shifted = (img.cast<int>().array() + 50).cast<std::uint8_t>();
    const FilterBank bank = random_bank(rng, 8, 7);
    CHECK(lbp_code(img, {16, 2.0, LbpMapping::uniform}).codes == lbp_code(shifted, {16, 2.0, LbpMapping::uniform}).codes);
    CHECK(lpq_code(img, {5}).codes == lpq_code(shifted, {5}).codes);
    CHECK(bsif_code(img, bank).codes == bsif_code(shifted, bank).codes);
  }

  TEST_CASE("histograms count every valid pixel once") {
    Rng rng(4);
    const GrayImage img = oracle::random_image(rng, 19, 23);
    const CodeImage c = lbp_code(img, {8, 2.0, LbpMapping::full});
    const Histogram h = histogram(c);
    CHECK(h.size() == 256);
    CHECK(h.sum() == static_cast<std::uint64_t>((19 - 4) * (23 - 4)));
    Histogram twice = h;
    accumulate(c, twice);
    CHECK(twice == 2 * h);
  }

  TEST_CASE("filter bank files") {
    testutil::TempDir dir;
    Rng rng(6);
    const FilterBank bank = random_bank(rng, 8, 7);
    save_filter_bank(bank, dir / "bank.txt");
    CHECK(testutil::read_bytes(dir / "bank.txt").rfind("BSIF 8 7", 0) == 0);
    CHECK(load_filter_bank(dir / "bank.txt") == bank);

    testutil::write_text(dir / "short.txt", "BSIF 8 7\n1 2 3\n");
    try {
      load_filter_bank(dir / "short.txt");
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("expected 392 values") != std::string::npos);
    }
    testutil::write_text(dir / "header.txt", "LBP 8 7\n");
    CHECK_THROWS_AS(load_filter_bank(dir / "header.txt"), ValidationError);
  }
}
