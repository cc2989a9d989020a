#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qtrack/mask.hpp"
#include "qtrack/rng.hpp"

using namespace qtrack;

namespace {

QueryLayout random_layout(Rng& rng) {
  QueryLayout layout;
  const int n_groups = static_cast<int>(uniform_index(rng, 4));
  for (int g = 0; g < n_groups; ++g) {
    layout.dn_group_sizes.push_back(2 + 2 * static_cast<int>(uniform_index(rng, 3)));
  }
  layout.num_track = static_cast<int>(uniform_index(rng, 5));
  layout.num_det = 1 + static_cast<int>(uniform_index(rng, 6));
  return layout;
}

}  // namespace

TEST_CASE("detection-only layout is plain self-attention") {
  QueryLayout layout{{}, 0, 3};
  for (int l = 0; l < 6; ++l) {
    auto mask = build_mask(layout, l, 6);
    CHECK(mask.visible.rows() == 3);
    CHECK(mask.visible.all());
  }
}

TEST_CASE("early layer: groups isolated, track and det fully connected") {
  QueryLayout layout{{2, 2}, 2, 2};
  auto mask = build_mask(layout, 1, 6);  // 1 < 6/2, early
  // rows 0-1 see exactly columns {0,1}
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(mask.visible(i, j) == (j < 2));
  }
  // rows 2-3 see exactly columns {2,3}
  for (int i = 2; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(mask.visible(i, j) == (j >= 2 && j < 4));
  }
  // rows 4-7 see exactly columns {4,5,6,7}
  for (int i = 4; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(mask.visible(i, j) == (j >= 4));
  }
}

TEST_CASE("late layer: track rows collapse to the diagonal") {
  QueryLayout layout{{2, 2}, 2, 2};
  auto mask = build_mask(layout, 4, 6);  // 4 >= 3, late
  CHECK(mask.visible(4, 4));
  CHECK(!mask.visible(4, 5));
  CHECK(!mask.visible(4, 6));
  CHECK(mask.visible(5, 5));
  CHECK(!mask.visible(5, 4));
  // det rows unchanged
  for (int i = 6; i < 8; ++i) {
    for (int j = 4; j < 8; ++j) CHECK(mask.visible(i, j));
    for (int j = 0; j < 4; ++j) CHECK(!mask.visible(i, j));
  }
  // denoising rows unchanged
  for (int j = 0; j < 8; ++j) CHECK(mask.visible(0, j) == (j < 2));
}

TEST_CASE("validate_mask accepts build_mask output for random layouts") {
  Rng rng = substream(21, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    QueryLayout layout = random_layout(rng);
    const int total_layers = 2 + static_cast<int>(uniform_index(rng, 6));
    const int layer = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(total_layers)));
    auto mask = build_mask(layout, layer, total_layers);
    CHECK(validate_mask(mask, layout, layer, total_layers).empty());
    // softmax always well-defined: diagonal visible in every row
    for (int i = 0; i < layout.total(); ++i) CHECK(mask.visible(i, i));
  }
}

TEST_CASE("constructed violations are reported by name") {
  QueryLayout layout{{2}, 1, 1};
  auto mask = build_mask(layout, 0, 2);
  SUBCASE("track row seeing a denoising column") {
    mask.visible(2, 0) = true;
    auto v = validate_mask(mask, layout, 0, 2);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("(2,0)") != std::string::npos);
    CHECK(v[0].find("denoising") != std::string::npos);
  }
  SUBCASE("false diagonal entry") {
    mask.visible(3, 3) = false;
    auto v = validate_mask(mask, layout, 0, 2);
    REQUIRE(!v.empty());
    bool found = false;
    for (const auto& s : v) {
      if (s.find("cannot see itself") != std::string::npos) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("mask depends on the layer only through the late predicate") {
  QueryLayout layout{{4}, 3, 4};
  const int total_layers = 6;
  auto early = build_mask(layout, 0, total_layers);
  auto late = build_mask(layout, total_layers - 1, total_layers);
  for (int l = 0; l < total_layers; ++l) {
    auto m = build_mask(layout, l, total_layers);
    const auto& expect = l < mask_switch_layer(total_layers) ? early : late;
    CHECK((m.visible == expect.visible).all());
  }
  CHECK(!(early.visible == late.visible).all());
}

TEST_CASE("group permutation permutes mask blocks") {
  QueryLayout a{{2, 4}, 1, 1};
  QueryLayout b{{4, 2}, 1, 1};
  auto ma = build_mask(a, 0, 2);
  auto mb = build_mask(b, 0, 2);
  // a's group 0 block (2x2 at 0) matches b's group 1 block (2x2 at 4)
  CHECK((ma.visible.block(0, 0, 2, 2) == mb.visible.block(4, 4, 2, 2)).all());
  CHECK((ma.visible.block(2, 2, 4, 4) == mb.visible.block(0, 0, 4, 4)).all());
}

TEST_CASE("full-mask mode isolates track rows at every layer") {
  QueryLayout layout{{2}, 2, 2};
  for (int l = 0; l < 4; ++l) {
    auto m = build_mask(layout, l, 4, MaskMode::Full);
    CHECK(m.visible(2, 2));
    CHECK(!m.visible(2, 3));
    CHECK(!m.visible(2, 4));
    // det rows still see track columns
    CHECK(m.visible(4, 2));
  }
}

TEST_CASE("domain errors") {
  QueryLayout layout{{2}, 1, 1};
  CHECK_THROWS_AS(build_mask(layout, 6, 6), std::domain_error);
  CHECK_THROWS_AS(build_mask(layout, -1, 6), std::domain_error);
  auto mask = build_mask(layout, 0, 6);
  QueryLayout other{{2}, 2, 1};
  CHECK_THROWS_AS(validate_mask(mask, other, 0, 6), std::domain_error);
}
