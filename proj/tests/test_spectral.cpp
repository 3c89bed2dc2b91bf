#include <cmath>

#include "doctest.h"
#include "sbmeter/spectral.hpp"
#include "test_support.hpp"

using namespace sbmeter;
using namespace sbmeter::spectral;
using ndnum::ImageTensor;

TEST_CASE("band validation") {
  CHECK_THROWS_AS(validate_band({"x", 0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(validate_band({"x", -0.1, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(validate_band({"x", 0.2, 1.1}), std::invalid_argument);
  CHECK_THROWS_AS(validate_band({"x", 0.6, 0.4}), std::invalid_argument);
  CHECK_NOTHROW(validate_band({"x", 0.0, 1.0}));
}

TEST_CASE("BandSpec must be an ordered partition of [0, 1]") {
  CHECK_THROWS_AS(BandSpec({}), std::invalid_argument);
  CHECK_THROWS_AS(BandSpec({{"a", 0.0, 0.4}, {"b", 0.5, 1.0}}), std::invalid_argument);   // gap
  CHECK_THROWS_AS(BandSpec({{"a", 0.0, 0.6}, {"b", 0.5, 1.0}}), std::invalid_argument);   // overlap
  CHECK_THROWS_AS(BandSpec({{"a", 0.1, 1.0}}), std::invalid_argument);                    // misses 0
  CHECK_THROWS_AS(BandSpec({{"a", 0.0, 0.9}}), std::invalid_argument);                    // misses 1
  CHECK_THROWS_AS(BandSpec({{"a", 0.0, 0.5}, {"a", 0.5, 1.0}}), std::invalid_argument);   // duplicate
  CHECK_THROWS_AS(BandSpec({{"", 0.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(BandSpec::from_thresholds(0.8, 0.25), std::invalid_argument);

  const auto d = BandSpec::defaults();
  REQUIRE(d.size() == 3);
  CHECK(d[0].name == "l");
  CHECK(d[0].r_max == 0.25);
  CHECK(d[1].r_max == 0.8);
  CHECK(d.back().r_max == 1.0);
  CHECK(d.index_of("m") == 1);
  CHECK(d.at("h").r_min == 0.8);
  CHECK_THROWS_AS(d.index_of("nope"), std::out_of_range);
}

TEST_CASE("band membership is half-open except at radius 1") {
  const Band low{"l", 0.0, 0.25};
  const Band high{"h", 0.8, 1.0};
  CHECK(low.contains(0.0));
  CHECK_FALSE(low.contains(0.25));
  CHECK(high.contains(0.8));
  CHECK(high.contains(1.0));
  CHECK_FALSE(high.contains(0.79));
}

TEST_CASE("every spectrum bin falls in exactly one band") {
  const auto spec = BandSpec::defaults();
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {7, 9}, {32, 32}, {16, 10}}) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double r = ndnum::radial_distance(i, j, h, w);
        int hits = 0;
        for (const auto& b : spec.bands()) hits += b.contains(r) ? 1 : 0;
        CHECK(hits == 1);
      }
    }
  }
}

TEST_CASE("band components match a direct-transform oracle") {
  const auto spec = BandSpec::defaults();
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {6, 5}, {7, 10}}) {
    const auto x = testing::random_image(h + w, 2, h, w);
    const auto comps = band_components(x, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const auto oracle = testing::naive_band_component(x, spec[k]);
      CHECK(ndnum::max_abs_diff(comps[k], oracle) < 1e-10);
      CHECK(ndnum::max_abs_diff(band_component(x, spec[k]), comps[k]) < 1e-13);
    }
  }
}

TEST_CASE("components reconstruct the image and are mutually orthogonal") {
  const auto spec = BandSpec({{"a", 0.0, 0.1}, {"b", 0.1, 0.3}, {"c", 0.3, 0.7}, {"d", 0.7, 1.0}});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = testing::random_image(seed, 3, 12, 16);
    const auto comps = band_components(x, spec);
    ImageTensor sum(3, 12, 16);
    for (const auto& c : comps) sum += c;
    CHECK(ndnum::max_abs_diff(sum, x) < 1e-12);
    for (std::size_t a = 0; a < comps.size(); ++a) {
      for (std::size_t b = a + 1; b < comps.size(); ++b) {
        const double scale = ndnum::l2_norm(comps[a]) * ndnum::l2_norm(comps[b]) + 1e-300;
        CHECK(std::abs(ndnum::dot(comps[a], comps[b])) / scale < 1e-10);
      }
    }
  }
}

TEST_CASE("band filtering is linear and idempotent") {
  const auto spec = BandSpec::defaults();
  const auto x = testing::random_image(11, 1, 10, 10);
  const auto y = testing::random_image(12, 1, 10, 10);
  for (const auto& band : spec.bands()) {
    const auto lhs = band_component(2.0 * x + (-3.0) * y, band);
    const auto rhs = 2.0 * band_component(x, band) + (-3.0) * band_component(y, band);
    CHECK(ndnum::max_abs_diff(lhs, rhs) < 1e-12);
    const auto once = band_component(x, band);
    CHECK(ndnum::max_abs_diff(band_component(once, band), once) < 1e-12);
  }
}

TEST_CASE("a constant image lives entirely in the lowest band") {
  ImageTensor x(1, 8, 8, std::vector<double>(64, 0.7));
  const auto comps = band_components(x, BandSpec::defaults());
  CHECK(ndnum::max_abs_diff(comps[0], x) < 1e-14);
  CHECK(ndnum::l2_norm(comps[1]) < 1e-14);
  CHECK(ndnum::l2_norm(comps[2]) < 1e-14);
}

TEST_CASE("a single full band is the identity") {
  const auto x = testing::random_image(5, 2, 9, 6);
  CHECK(ndnum::max_abs_diff(band_component(x, {"all", 0.0, 1.0}), x) < 1e-13);
}

TEST_CASE("cumulative composition") {
  const auto spec = BandSpec::defaults();
  const auto x = testing::random_image(8, 3, 8, 8);
  const std::vector<std::string> none;
  CHECK(ndnum::l2_norm(cumulative_composition(x, spec, none)) == 0.0);
  const std::vector<std::string> l{"l"};
  CHECK(ndnum::max_abs_diff(cumulative_composition(x, spec, l), band_component(x, spec[0])) < 1e-14);
  const std::vector<std::string> all{"l", "m", "h"};
  CHECK(ndnum::max_abs_diff(cumulative_composition(x, spec, all), x) < 1e-12);
  const std::vector<std::string> skip{"l", "h"};
  CHECK_THROWS_AS(cumulative_composition(x, spec, skip), std::invalid_argument);
  const std::vector<std::string> wrong{"m"};
  CHECK_THROWS_AS(cumulative_composition(x, spec, wrong), std::invalid_argument);
  const std::vector<std::string> too_long{"l", "m", "h", "z"};
  CHECK_THROWS_AS(cumulative_composition(x, spec, too_long), std::invalid_argument);
}

TEST_CASE("lambda grid") {
  CHECK_THROWS_AS(lambda_grid(1), std::invalid_argument);
  CHECK_THROWS_AS(lambda_grid(0), std::invalid_argument);
  const auto g = lambda_grid(5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(g[2] == 0.5);
}

TEST_CASE("linear path") {
  const auto x1 = testing::random_image(1, 2, 4, 4);
  const auto x2 = testing::random_image(2, 2, 4, 4);
  const auto path = linear_path(x1, x2, 6, {"a", "b"});
  REQUIRE(path.steps.size() == 6);
  CHECK(path.pair.x1 == "a");
  CHECK(path.pair.x2 == "b");
  CHECK_FALSE(path.band.has_value());
  CHECK(path.endpoint_distance == doctest::Approx(ndnum::l2_distance(x1, x2)));
  CHECK(ndnum::max_abs_diff(path.steps.front().image, x1) == 0.0);
  CHECK(ndnum::max_abs_diff(path.steps.back().image, x2) == 0.0);
  CHECK(ndnum::max_abs_diff(path.steps[2].image, 0.6 * x1 + 0.4 * x2) < 1e-15);
  CHECK_THROWS_AS(linear_path(x1, ImageTensor(1, 4, 4), 4), std::invalid_argument);
  CHECK_THROWS_AS(linear_path(x1, x2, 1), std::invalid_argument);
}

TEST_CASE("anchored band path moves only the chosen band") {
  const auto spec = BandSpec::defaults();
  const auto x1 = testing::random_image(21, 3, 8, 8);
  const auto x2 = testing::random_image(22, 3, 8, 8);
  const auto c1 = band_components(x1, spec);
  const auto c2 = band_components(x2, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto path = band_path(x1, x2, spec[k], 5, PathForm::anchored, {"p", "q"});
    REQUIRE(path.steps.size() == 5);
    CHECK(path.band.value() == spec[k].name);
    CHECK(path.endpoint_distance == doctest::Approx(ndnum::l2_distance(c1[k], c2[k])).epsilon(1e-12));
    CHECK(ndnum::max_abs_diff(path.steps.front().image, x1) == 0.0);
    CHECK(ndnum::max_abs_diff(path.steps.back().image, x1 - c1[k] + c2[k]) < 1e-12);
    for (const auto& step : path.steps) {
      const auto sc = band_components(step.image, spec);
      for (std::size_t j = 0; j < spec.size(); ++j) {
        if (j == k) {
          const auto expect = (1.0 - step.lambda) * c1[k] + step.lambda * c2[k];
          CHECK(ndnum::max_abs_diff(sc[j], expect) < 1e-12);
        } else {
          CHECK(ndnum::max_abs_diff(sc[j], c1[j]) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("literal band path adds the band on top of x1") {
  const Band band{"l", 0.0, 0.25};
  const auto x1 = testing::random_image(31, 1, 8, 8);
  const auto x2 = testing::random_image(32, 1, 8, 8);
  const auto c1 = band_component(x1, band);
  const auto c2 = band_component(x2, band);
  const auto path = band_path(x1, x2, band, 3, PathForm::literal);
  CHECK(ndnum::max_abs_diff(path.steps.front().image, x1 + c1) < 1e-12);
  CHECK(ndnum::max_abs_diff(path.steps.back().image, x1 + c2) < 1e-12);
  // Both forms differ by the constant offset x1^k.
  const auto anchored = band_path(x1, x2, band, 3, PathForm::anchored);
  for (std::size_t q = 0; q < 3; ++q) {
    CHECK(ndnum::max_abs_diff(path.steps[q].image - anchored.steps[q].image, c1) < 1e-12);
  }
}

TEST_CASE("band path on identical images has zero distance") {
  const auto x = testing::random_image(41, 1, 8, 8);
  const auto path = band_path(x, x, {"h", 0.8, 1.0}, 4);
  CHECK(path.endpoint_distance == 0.0);
  for (const auto& s : path.steps) CHECK(ndnum::max_abs_diff(s.image, x) == 0.0);
}
