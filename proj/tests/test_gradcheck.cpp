#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qtrack/gradcheck.hpp"

using namespace qtrack;

TEST_CASE("finite differences confirm the analytic gradients") {
  ModelConfig cfg;
  cfg.hidden_dim = 12;
  cfg.num_heads = 2;
  cfg.num_encoder_layers = 2;
  cfg.num_decoder_layers = 2;
  cfg.ffn_dim = 16;
  cfg.num_det_queries = 6;
  auto report = gradcheck(cfg, 17, /*samples_per_group=*/20);
  for (const auto& g : report.groups) {
    INFO(g.name, " rel err ", g.max_rel_err);
    CHECK(g.max_rel_err < report.threshold);
  }
  CHECK(report.passed());

  // the reserved no-object embedding row is never used by the loss
  bool saw_label_embed = false;
  for (const auto& g : report.groups) saw_label_embed |= g.name == "label_embed";
  CHECK(saw_label_embed);
}
