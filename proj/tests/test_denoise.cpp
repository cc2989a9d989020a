#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qtrack/denoise.hpp"

using namespace qtrack;

TEST_CASE("group_count follows the capped floor division") {
  CHECK(group_count(3) == 66);
  CHECK(group_count(0) == 0);
  CHECK(group_count(250) == 1);  // clamped below at one group
  CHECK(group_count(1) == 200);
  CHECK(group_count(200) == 1);
  // cap: total positives stay within the budget for num_gt <= cap
  for (int n = 1; n <= 200; ++n) CHECK(group_count(n) * n <= 200);
  CHECK_THROWS_AS(group_count(-1), std::domain_error);
}

TEST_CASE("perturb_category is uniform over [0, C]") {
  Rng rng = substream(31, 0);
  SUBCASE("degenerate range") {
    for (int i = 0; i < 100; ++i) CHECK(perturb_category(rng, 0) == 0);
  }
  SUBCASE("frequencies within 5 sigma of uniform") {
    const int C = 20, draws = 10000;
    std::vector<int> counts(C + 1, 0);
    for (int i = 0; i < draws; ++i) counts[perturb_category(rng, C)] += 1;
    const double mean = draws / 21.0;
    const double sigma = std::sqrt(draws * (1.0 / 21.0) * (20.0 / 21.0));
    for (int v = 0; v <= C; ++v) {
      CHECK(std::abs(counts[v] - mean) <= 5.0 * sigma);
    }
  }
  SUBCASE("fixed seed reproduces the sequence") {
    Rng a = substream(7, 1), b = substream(7, 1);
    for (int i = 0; i < 200; ++i) CHECK(perturb_category(a, 20) == perturb_category(b, 20));
  }
}

TEST_CASE("make_positive noise bands") {
  DenoiseParams params;
  // Box far from the frame edge so clamping never fires and the
  // pre-clamp band is observable directly.
  const BBox b{0.5, 0.5, 0.2, 0.2};
  SUBCASE("no neighbors: random kind within lambda_r") {
    Rng rng = substream(32, 0);
    for (int i = 0; i < 10000; ++i) {
      auto [out, kind] = make_positive(b, {}, params, rng);
      CHECK(kind == NoiseKind::Random);
      CHECK(std::abs(out.cx / b.cx - 1.0) <= params.lambda_r + 1e-12);
      CHECK(std::abs(out.cy / b.cy - 1.0) <= params.lambda_r + 1e-12);
      CHECK(std::abs(out.w / b.w - 1.0) <= params.lambda_r + 1e-12);
      CHECK(std::abs(out.h / b.h - 1.0) <= params.lambda_r + 1e-12);
    }
  }
  SUBCASE("qualifying neighbor with forced conditional path") {
    DenoiseParams forced = params;
    forced.p_cond = 1.0;
    const BBox nb{0.53, 0.53, 0.2, 0.2};  // IoU well above tau_c
    REQUIRE(iou(b, nb) > forced.tau_c);
    Rng rng = substream(33, 0);
    auto [out, kind] = make_positive(b, {{nb, iou(b, nb)}}, forced, rng);
    CHECK(kind == NoiseKind::Conditional);
    const BBox expect = apply_conditional_noise(b, nb, forced.lambda_c);
    CHECK(out.cx == doctest::Approx(expect.cx).epsilon(1e-12));
    CHECK(out.cy == doctest::Approx(expect.cy).epsilon(1e-12));
    CHECK(out.w == doctest::Approx(expect.w).epsilon(1e-12));
    CHECK(out.h == doctest::Approx(expect.h).epsilon(1e-12));
  }
  SUBCASE("p_cond zero forces the random path") {
    DenoiseParams never = params;
    never.p_cond = 0.0;
    const BBox nb{0.52, 0.5, 0.2, 0.2};
    Rng rng = substream(34, 0);
    for (int i = 0; i < 200; ++i) {
      auto [out, kind] = make_positive(b, {{nb, iou(b, nb)}}, never, rng);
      CHECK(kind == NoiseKind::Random);
    }
  }
}

TEST_CASE("make_negative magnitudes live in (lambda_r, lambda_n]") {
  DenoiseParams params;
  const BBox b{0.5, 0.5, 0.2, 0.2};
  Rng rng = substream(35, 0);
  for (int i = 0; i < 10000; ++i) {
    BBox out = make_negative(b, params, rng);
    for (double dev : {std::abs(out.cx / b.cx - 1.0), std::abs(out.cy / b.cy - 1.0),
                       std::abs(out.w / b.w - 1.0), std::abs(out.h / b.h - 1.0)}) {
      CHECK(dev > params.lambda_r);
      CHECK(dev <= params.lambda_n + 1e-12);
    }
  }
  SUBCASE("degenerate band concentrates at lambda_r") {
    DenoiseParams tight = params;
    tight.lambda_n = tight.lambda_r + 1e-9;
    for (int i = 0; i < 100; ++i) {
      BBox out = make_negative(b, tight, rng);
      CHECK(std::abs(out.cx / b.cx - 1.0) == doctest::Approx(tight.lambda_r).epsilon(1e-6));
    }
  }
  SUBCASE("fixed seed reproduces the output") {
    Rng a = substream(36, 0), b2 = substream(36, 0);
    BBox x = make_negative(b, params, a);
    BBox y = make_negative(b, params, b2);
    CHECK(x.cx == y.cx);
    CHECK(x.h == y.h);
  }
}

TEST_CASE("generate_denoise_set structure") {
  DenoiseParams params;
  SUBCASE("empty ground truth yields an empty set") {
    Rng rng = substream(37, 0);
    auto set = generate_denoise_set({}, {}, params, rng);
    CHECK(set.groups.empty());
    CHECK(set.total_queries() == 0);
  }
  SUBCASE("three objects, no tracks") {
    Rng rng = substream(38, 0);
    std::vector<BBox> gt{{0.2, 0.2, 0.1, 0.1}, {0.5, 0.5, 0.15, 0.15}, {0.8, 0.8, 0.1, 0.12}};
    auto set = generate_denoise_set(gt, {}, params, rng);
    REQUIRE(set.group_count() == 66);
    for (const auto& g : set.groups) {
      REQUIRE(g.specs.size() == 6);
      for (int i = 0; i < 3; ++i) {
        CHECK(g.specs[i].polarity == NoisePolarity::Positive);
        CHECK(g.specs[i].gt_index == i);
        CHECK(g.specs[i].content_source == ContentSource::MappedLabelEmbedding);
      }
      for (int i = 3; i < 6; ++i) {
        CHECK(g.specs[i].polarity == NoisePolarity::Negative);
        CHECK(g.specs[i].gt_index == i - 3);
      }
    }
  }
  SUBCASE("trajectory embedding substitution follows the correspondence") {
    Rng rng = substream(39, 0);
    std::vector<BBox> gt{{0.3, 0.3, 0.1, 0.1}, {0.7, 0.7, 0.1, 0.1}};
    std::vector<TrackCorrespondence> tracks{{5, 0}};
    auto set = generate_denoise_set(gt, tracks, params, rng);
    for (const auto& g : set.groups) {
      CHECK(g.specs[0].content_source == ContentSource::TrajectoryEmbedding);
      CHECK(g.specs[0].track_index == 5);
      CHECK(g.specs[1].content_source == ContentSource::MappedLabelEmbedding);
    }
  }
  SUBCASE("same seed yields an identical set") {
    std::vector<BBox> gt{{0.3, 0.3, 0.1, 0.1}, {0.34, 0.31, 0.1, 0.1}};
    Rng a = substream(40, 0), b = substream(40, 0);
    auto sa = generate_denoise_set(gt, {}, params, a);
    auto sb = generate_denoise_set(gt, {}, params, b);
    REQUIRE(sa.group_count() == sb.group_count());
    for (int g = 0; g < sa.group_count(); ++g) {
      for (std::size_t i = 0; i < sa.groups[g].specs.size(); ++i) {
        CHECK(sa.groups[g].specs[i].noised_box.cx == sb.groups[g].specs[i].noised_box.cx);
        CHECK(sa.groups[g].specs[i].noised_label == sb.groups[g].specs[i].noised_label);
        CHECK(sa.groups[g].specs[i].kind == sb.groups[g].specs[i].kind);
      }
    }
  }
  SUBCASE("conditional outputs stay between source and neighbor") {
    // Two heavily overlapping objects trigger the conditional path.
    DenoiseParams forced = params;
    forced.p_cond = 1.0;
    std::vector<BBox> gt{{0.5, 0.5, 0.2, 0.2}, {0.53, 0.52, 0.2, 0.2}};
    REQUIRE(iou(gt[0], gt[1]) > forced.tau_c);
    Rng rng = substream(41, 0);
    auto set = generate_denoise_set(gt, {}, forced, rng);
    for (const auto& g : set.groups) {
      for (int i = 0; i < 2; ++i) {
        const auto& spec = g.specs[i];
        REQUIRE(spec.kind == NoiseKind::Conditional);
        const BBox& a = gt[spec.gt_index];
        const BBox& b = gt[1 - spec.gt_index];
        CHECK(spec.noised_box.cx >= std::min(a.cx, b.cx) - 1e-12);
        CHECK(spec.noised_box.cx <= std::max(a.cx, b.cx) + 1e-12);
      }
    }
  }
  SUBCASE("out-of-range correspondence is rejected") {
    Rng rng = substream(42, 0);
    std::vector<BBox> gt{{0.3, 0.3, 0.1, 0.1}};
    CHECK_THROWS_AS(generate_denoise_set(gt, {{0, 3}}, params, rng), std::domain_error);
    CHECK_THROWS_AS(generate_denoise_set(gt, {{0, 0}, {1, 0}}, params, rng), std::domain_error);
  }
}
