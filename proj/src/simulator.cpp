#include "qtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace qtrack {

namespace {

bool present(const Agent& a, int frame) {
  const BBox b = a.box_at(frame);
  return b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 && b.cy <= 1.0;
}

// Fraction of this agent's box hidden behind nearer agents, sampled on
// an 8x8 interior lattice.
double covered_fraction(const Scenario& sc, const Agent& agent, int frame) {
  const BBox b = agent.box_at(frame);
  std::vector<BBox> nearer;
  for (const auto& other : sc.agents) {
    if (other.id == agent.id || other.depth >= agent.depth) continue;
    if (!present(other, frame)) continue;
    nearer.push_back(other.box_at(frame));
  }
  if (nearer.empty()) return 0.0;
  constexpr int kSamples = 8;
  int covered = 0;
  for (int sy = 0; sy < kSamples; ++sy) {
    for (int sx = 0; sx < kSamples; ++sx) {
      const double px = b.left() + (sx + 0.5) / kSamples * b.w;
      const double py = b.top() + (sy + 0.5) / kSamples * b.h;
      for (const auto& nb : nearer) {
        if (px >= nb.left() && px <= nb.right() && py >= nb.top() && py <= nb.bottom()) {
          ++covered;
          break;
        }
      }
    }
  }
  return static_cast<double>(covered) / (kSamples * kSamples);
}

Eigen::VectorXd appearance_pattern(const Agent& agent, int channels) {
  Rng rng = substream(agent.appearance_seed, 0x617070ULL);
  Eigen::VectorXd a(channels);
  for (int c = 0; c < channels; ++c) a(c) = uniform_real(rng, 0.25, 1.0);
  return a;
}

bool centers_stay_inside(const Agent& a, int n_frames, double margin) {
  for (int f = 0; f < n_frames; ++f) {
    const BBox b = a.box_at(f);
    if (b.cx < margin || b.cx > 1.0 - margin || b.cy < margin || b.cy > 1.0 - margin) return false;
  }
  return true;
}

Agent sample_agent(Rng& rng, int id, int n_frames) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Agent a;
    a.id = id;
    a.w = uniform_real(rng, 0.12, 0.2);
    a.h = uniform_real(rng, 0.12, 0.2);
    a.cx0 = uniform_real(rng, 0.15, 0.85);
    a.cy0 = uniform_real(rng, 0.15, 0.85);
    const double speed = uniform_real(rng, 0.004, 0.016);
    const double angle = uniform_real(rng, 0.0, 2.0 * M_PI);
    a.vx = speed * std::cos(angle);
    a.vy = speed * std::sin(angle);
    a.appearance_seed = rng();
    if (centers_stay_inside(a, n_frames, 0.08)) return a;
  }
  throw std::runtime_error("generate_scenario: could not place an agent inside the frame");
}

// Two agents meeting at a common point mid-sequence from different
// directions, which produces a multi-frame high-IoU occlusion window.
std::pair<Agent, Agent> sample_crossing_pair(Rng& rng, int id0, int n_frames) {
  const double px = uniform_real(rng, 0.35, 0.65);
  const double py = uniform_real(rng, 0.35, 0.65);
  const int t_cross = static_cast<int>(uniform_real(rng, 0.4, 0.6) * n_frames);
  Agent a, b;
  a.id = id0;
  b.id = id0 + 1;
  a.w = uniform_real(rng, 0.14, 0.2);
  a.h = uniform_real(rng, 0.14, 0.2);
  b.w = a.w * uniform_real(rng, 0.9, 1.1);
  b.h = a.h * uniform_real(rng, 0.9, 1.1);
  const double speed_a = uniform_real(rng, 0.006, 0.014);
  const double speed_b = uniform_real(rng, 0.006, 0.014);
  const double ang_a = uniform_real(rng, 0.0, 2.0 * M_PI);
  const double sep = uniform_real(rng, M_PI / 2.0, 3.0 * M_PI / 2.0);
  const double ang_b = ang_a + sep;
  a.vx = speed_a * std::cos(ang_a);
  a.vy = speed_a * std::sin(ang_a);
  b.vx = speed_b * std::cos(ang_b);
  b.vy = speed_b * std::sin(ang_b);
  a.cx0 = px - a.vx * t_cross;
  a.cy0 = py - a.vy * t_cross;
  b.cx0 = px - b.vx * t_cross;
  b.cy0 = py - b.vy * t_cross;
  a.appearance_seed = rng();
  b.appearance_seed = rng();
  return {a, b};
}

int longest_occlusion_run(const Scenario& sc, int id_a, int id_b) {
  int best = 0, run = 0;
  const Agent* a = nullptr;
  const Agent* b = nullptr;
  for (const auto& ag : sc.agents) {
    if (ag.id == id_a) a = &ag;
    if (ag.id == id_b) b = &ag;
  }
  for (int f = 0; f < sc.n_frames; ++f) {
    bool hit = false;
    if (present(*a, f) && present(*b, f)) {
      hit = iou(a->box_at(f), b->box_at(f)) > sc.occlusion_iou_threshold;
    }
    run = hit ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

}  // namespace

Scenario generate_scenario(std::uint64_t seed, int n_agents, int n_frames, bool crossing,
                           const GridSpec& grid) {
  if (n_agents < 1) throw std::domain_error("generate_scenario: n_agents < 1");
  if (n_frames < 1) throw std::domain_error("generate_scenario: n_frames < 1");
  if (crossing && n_agents < 2) {
    throw std::domain_error("generate_scenario: crossing needs at least two agents");
  }
  Rng rng = substream(seed, 0x7363656eULL);

  for (int attempt = 0; attempt < 100; ++attempt) {
    Scenario sc;
    sc.seed = seed;
    sc.n_frames = n_frames;
    sc.grid = grid;

    int next_id = 1;
    if (crossing) {
      auto [a, b] = sample_crossing_pair(rng, next_id, n_frames);
      sc.agents.push_back(a);
      sc.agents.push_back(b);
      next_id += 2;
    }
    while (static_cast<int>(sc.agents.size()) < n_agents) {
      sc.agents.push_back(sample_agent(rng, next_id++, n_frames));
    }
    // Depth by shuffled rank so the occluder is not always the same id.
    std::vector<int> depth(sc.agents.size());
    std::iota(depth.begin(), depth.end(), 0);
    for (int i = static_cast<int>(depth.size()) - 1; i > 0; --i) {
      std::swap(depth[i], depth[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
    }
    for (std::size_t i = 0; i < sc.agents.size(); ++i) sc.agents[i].depth = depth[i];

    if (crossing) {
      const bool pair_inside = centers_stay_inside(sc.agents[0], n_frames, 0.05) &&
                               centers_stay_inside(sc.agents[1], n_frames, 0.05);
      if (!pair_inside || longest_occlusion_run(sc, 1, 2) < 3) continue;
    }
    return sc;
  }
  throw std::runtime_error("generate_scenario: no valid crossing found in 100 attempts");
}

std::vector<FrameTruth> ground_truth(const Scenario& scenario) {
  std::vector<FrameTruth> truth;
  truth.reserve(scenario.n_frames);
  for (int f = 0; f < scenario.n_frames; ++f) {
    FrameTruth ft;
    ft.frame = f;
    for (const auto& agent : scenario.agents) {
      if (!present(agent, f)) continue;
      TruthEntry e;
      e.agent_id = agent.id;
      e.box = agent.box_at(f);
      bool occluded = false;
      for (const auto& other : scenario.agents) {
        if (other.id == agent.id || other.depth >= agent.depth || !present(other, f)) continue;
        if (iou(e.box, other.box_at(f)) > scenario.occlusion_iou_threshold) {
          occluded = true;
          break;
        }
      }
      e.visibility = occluded ? Visibility::Occluded : Visibility::Visible;
      e.visible_fraction = 1.0 - covered_fraction(scenario, agent, f);
      ft.entries.push_back(e);
    }
    truth.push_back(std::move(ft));
  }
  return truth;
}

FeatureGrid render_features(const Scenario& scenario, int frame) {
  if (frame < 0 || frame >= scenario.n_frames) {
    throw std::domain_error("render_features: frame out of range");
  }
  FeatureGrid g;
  g.height = scenario.grid.height;
  g.width = scenario.grid.width;
  g.channels = scenario.grid.channels;
  g.data = Eigen::MatrixXd::Zero(g.tokens(), g.channels);

  for (const auto& agent : scenario.agents) {
    if (!present(agent, frame)) continue;
    const BBox b = agent.box_at(frame);
    const double vf = 1.0 - covered_fraction(scenario, agent, frame);
    if (vf <= 0.0) continue;
    const Eigen::VectorXd pattern = appearance_pattern(agent, g.channels);
    // Bump width chosen so neighboring cells still read appreciable
    // signal; sub-cell localization depends on that gradient.
    const double sx = b.w / 2.0;
    const double sy = b.h / 2.0;

    std::vector<BBox> nearer;
    for (const auto& other : scenario.agents) {
      if (other.id == agent.id || other.depth >= agent.depth || !present(other, frame)) continue;
      nearer.push_back(other.box_at(frame));
    }

    for (int cell = 0; cell < g.tokens(); ++cell) {
      const double px = g.cell_x(cell);
      const double py = g.cell_y(cell);
      const double dx = (px - b.cx) / sx;
      const double dy = (py - b.cy) / sy;
      if (std::abs(dx) > 4.0 || std::abs(dy) > 4.0) continue;
      bool hidden = false;
      for (const auto& nb : nearer) {
        if (px >= nb.left() && px <= nb.right() && py >= nb.top() && py <= nb.bottom()) {
          hidden = true;
          break;
        }
      }
      if (hidden) continue;
      const double bump = vf * std::exp(-0.5 * (dx * dx + dy * dy));
      g.data.row(cell) += bump * pattern.transpose();
    }
  }
  return g;
}

std::vector<Detection> oracle_detections(const Scenario& scenario, int frame, Rng& rng) {
  if (frame < 0 || frame >= scenario.n_frames) {
    throw std::domain_error("oracle_detections: frame out of range");
  }
  std::vector<Detection> dets;
  const auto truth = ground_truth(scenario);
  for (const auto& e : truth[frame].entries) {
    if (e.visibility == Visibility::Occluded && bernoulli(rng, scenario.miss_probability)) continue;
    Detection d;
    d.box = e.box;
    if (scenario.jitter_sigma > 0.0) {
      d.box.cx += normal(rng, 0.0, scenario.jitter_sigma);
      d.box.cy += normal(rng, 0.0, scenario.jitter_sigma);
      d.box.w = std::max(kMinBoxSize, d.box.w * (1.0 + normal(rng, 0.0, scenario.jitter_sigma)));
      d.box.h = std::max(kMinBoxSize, d.box.h * (1.0 + normal(rng, 0.0, scenario.jitter_sigma)));
      d.box = clamp_to_frame(d.box);
    }
    d.confidence = e.visible_fraction;
    dets.push_back(d);
  }
  return dets;
}

// ---- serialization ------------------------------------------------------

std::string scenario_to_json(const Scenario& sc) {
  nlohmann::ordered_json j;
  j["seed"] = sc.seed;
  j["n_frames"] = sc.n_frames;
  j["grid"] = {{"height", sc.grid.height}, {"width", sc.grid.width}, {"channels", sc.grid.channels}};
  j["occlusion_iou_threshold"] = sc.occlusion_iou_threshold;
  j["miss_probability"] = sc.miss_probability;
  j["jitter_sigma"] = sc.jitter_sigma;
  j["agents"] = nlohmann::ordered_json::array();
  for (const auto& a : sc.agents) {
    j["agents"].push_back({{"id", a.id},
                           {"cx0", a.cx0},
                           {"cy0", a.cy0},
                           {"vx", a.vx},
                           {"vy", a.vy},
                           {"w", a.w},
                           {"h", a.h},
                           {"depth", a.depth},
                           {"appearance_seed", a.appearance_seed}});
  }
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Scenario sc;
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.n_frames = j.at("n_frames").get<int>();
  sc.grid.height = j.at("grid").at("height").get<int>();
  sc.grid.width = j.at("grid").at("width").get<int>();
  sc.grid.channels = j.at("grid").at("channels").get<int>();
  sc.occlusion_iou_threshold = j.at("occlusion_iou_threshold").get<double>();
  sc.miss_probability = j.at("miss_probability").get<double>();
  sc.jitter_sigma = j.at("jitter_sigma").get<double>();
  for (const auto& ja : j.at("agents")) {
    Agent a;
    a.id = ja.at("id").get<int>();
    a.cx0 = ja.at("cx0").get<double>();
    a.cy0 = ja.at("cy0").get<double>();
    a.vx = ja.at("vx").get<double>();
    a.vy = ja.at("vy").get<double>();
    a.w = ja.at("w").get<double>();
    a.h = ja.at("h").get<double>();
    a.depth = ja.at("depth").get<int>();
    a.appearance_seed = ja.at("appearance_seed").get<std::uint64_t>();
    sc.agents.push_back(a);
  }
  if (sc.n_frames < 1) throw std::domain_error("scenario_from_json: n_frames < 1");
  return sc;
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_scenario: cannot open " + path);
  os << scenario_to_json(scenario);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_scenario: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return scenario_from_json(text);
}

}  // namespace qtrack
