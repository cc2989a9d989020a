#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtrack/gradcheck.hpp"
#include "qtrack/mot_io.hpp"
#include "qtrack/train.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace qtrack;

namespace {

constexpr const char* kToolVersion = "1.0.0";

// Exit codes: 0 ok, 1 usage, 2 validation, 3 check failure.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_manifest(const std::string& command, const Json& args, const std::string& out_path) {
  Json m;
  m["tool"] = "querytrack";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["args"] = args;
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write manifest " + out_path);
  os << m.dump(2) << "\n";
}

RunConfig load_config_arg(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return RunConfig::from_file(path);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// ---- simulate -------------------------------------------------------------

int run_simulate(const Json& a) {
  const auto seed = a.at("seed").get<std::uint64_t>();
  const int agents = a.at("agents").get<int>();
  const int frames = a.at("frames").get<int>();
  const bool crossing = a.at("crossing").get<bool>();
  GridSpec grid{a.at("grid_height").get<int>(), a.at("grid_width").get<int>(),
                a.at("grid_channels").get<int>()};
  const double fw = a.at("frame_width").get<double>();
  const double fh = a.at("frame_height").get<double>();
  const std::string out = a.at("out").get<std::string>();

  Scenario sc = generate_scenario(seed, agents, frames, crossing, grid);
  save_scenario(sc, out + ".scenario.json");
  write_gt_file(out + ".gt.txt", truth_to_gt(ground_truth(sc), fw, fh));
  write_manifest("simulate", a, out + ".manifest.json");
  std::printf("wrote %s.scenario.json and %s.gt.txt (%d agents, %d frames)\n", out.c_str(),
              out.c_str(), agents, frames);
  return 0;
}

// ---- train ----------------------------------------------------------------

int run_train(const Json& a) {
  RunConfig cfg = load_config_arg(a.value("config", ""));
  if (a.contains("seed")) cfg.seed = a.at("seed").get<std::uint64_t>();
  if (a.contains("steps")) cfg.train.steps = a.at("steps").get<int>();
  if (a.contains("off")) {
    const std::string off = a.at("off").get<std::string>();
    if (off == "denoising") {
      cfg.denoise_enabled = false;
    } else if (off == "cascaded-mask") {
      cfg.mask_mode = "full";
    } else if (!off.empty()) {
      throw std::invalid_argument("train: unknown --off value '" + off + "'");
    }
  }
  cfg.validate();
  const std::string out_model = a.at("out_model").get<std::string>();
  const std::string log_path = a.value("log", out_model + ".train.csv");

  std::vector<Scenario> dataset;
  const std::string data = a.value("data", "");
  if (!data.empty()) {
    for (const auto& entry : fs::directory_iterator(data)) {
      if (entry.path().extension() == ".json" &&
          entry.path().string().find("manifest") == std::string::npos) {
        dataset.push_back(load_scenario(entry.path().string()));
      }
    }
    std::sort(dataset.begin(), dataset.end(),
              [](const Scenario& x, const Scenario& y) { return x.seed < y.seed; });
    if (dataset.empty()) throw std::invalid_argument("train: no scenario files under " + data);
  }

  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot open training log " + log_path);
  if (cfg.precision == "f64") {
    auto result = train_model<double>(cfg, &log, dataset.empty() ? nullptr : &dataset);
    save_checkpoint(result.model, out_model);
  } else {
    auto result = train_model<float>(cfg, &log, dataset.empty() ? nullptr : &dataset);
    save_checkpoint(result.model, out_model);
  }
  Json args = a;
  args["resolved_config"] = Json::parse(cfg.to_json());
  write_manifest("train", args, out_model + ".manifest.json");
  std::printf("wrote %s and %s\n", out_model.c_str(), log_path.c_str());
  return 0;
}

// ---- track ----------------------------------------------------------------

template <typename S>
void track_with(const RunConfig& cfg, const std::string& model_path, const Scenario& sc,
                const std::string& out_path) {
  auto model = load_checkpoint<S>(model_path);
  std::vector<FeatureGrid> frames;
  for (int f = 0; f < sc.n_frames; ++f) frames.push_back(render_features(sc, f));
  TrackerConfig tc = cfg.tracker;
  tc.n_det = model.config.num_det_queries;
  const auto results = run_sequence(frames, model, tc, cfg.mask());
  write_mot_file(out_path, results_to_mot(results, cfg.sim.frame_width, cfg.sim.frame_height));
}

int run_track(const Json& a) {
  RunConfig cfg = load_config_arg(a.value("config", ""));
  const std::string model_path = a.at("model").get<std::string>();
  const std::string out_path = a.at("out").get<std::string>();
  Scenario sc = load_scenario(a.at("scenario").get<std::string>());
  if (cfg.precision == "f64") {
    track_with<double>(cfg, model_path, sc, out_path);
  } else {
    track_with<float>(cfg, model_path, sc, out_path);
  }
  write_manifest("track", a, out_path + ".manifest.json");
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

// ---- eval -----------------------------------------------------------------

int run_eval(const Json& a) {
  const auto gt_lines = parse_mot_gt_file(a.at("gt").get<std::string>());
  const auto pred_lines = parse_mot_file(a.at("pred").get<std::string>());
  GtFilter filter;
  filter.min_visibility = a.value("min_visibility", 0.0);
  auto gt = frames_from_gt(gt_lines, filter);
  auto pred = frames_from_mot(pred_lines);
  const std::size_t n = std::max(gt.size(), pred.size());
  gt.resize(n);
  pred.resize(n);
  auto report = evaluate_sequences({a.at("gt").get<std::string>()}, {gt}, {pred});
  std::printf("MOTA %.3f  IDF1 %.3f  FP %d  FN %d  IDSW %d  GT %ld\n", report.mota(),
              report.idf1(), report.clear.fp, report.clear.fn, report.clear.idsw,
              report.clear.total_gt);
  if (a.value("csv", false)) {
    std::printf("mota,idf1,fp,fn,idsw,gt\n%.6f,%.6f,%d,%d,%d,%ld\n", report.mota(), report.idf1(),
                report.clear.fp, report.clear.fn, report.clear.idsw, report.clear.total_gt);
  }
  return 0;
}

// ---- crowdedness ----------------------------------------------------------

int run_crowdedness(const Json& a) {
  std::vector<CrowdSequence> sequences;
  GtFilter filter;
  filter.require_consider = a.value("require_consider", true);
  filter.min_visibility = a.value("min_visibility", 0.0);
  for (int cls : a.value("classes", std::vector<int>{})) filter.classes.insert(cls);

  auto add_file = [&](const std::string& name, const std::string& path) {
    CrowdSequence seq;
    seq.name = name;
    seq.frames = frames_from_gt(parse_mot_gt_file(path), filter);
    sequences.push_back(std::move(seq));
  };

  const std::string dir = a.value("gt_dir", "");
  if (!dir.empty()) {
    std::vector<fs::path> roots;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "gt" / "gt.txt")) {
        roots.push_back(entry.path());
      } else if (entry.path().extension() == ".txt") {
        roots.push_back(entry.path());
      }
    }
    std::sort(roots.begin(), roots.end());
    for (const auto& r : roots) {
      if (fs::is_directory(r)) {
        add_file(r.filename().string(), (r / "gt" / "gt.txt").string());
      } else {
        add_file(r.stem().string(), r.string());
      }
    }
  }
  for (const auto& f : a.value("gt", std::vector<std::string>{})) {
    add_file(fs::path(f).stem().string(), f);
  }
  if (sequences.empty()) throw std::invalid_argument("crowdedness: no ground-truth files found");

  auto hist = crowdedness(sequences);
  std::printf("%-22s %9s %9s %9s %9s %9s %9s %9s\n", "Sequence", "0.1-0.4", "0.4-0.5", "0.5-0.6",
              "0.6-0.7", "0.7-0.8", "0.8-0.9", ">0.9");
  for (const auto& [name, counts] : hist.per_sequence) {
    std::printf("%-22s", name.c_str());
    for (long c : counts.bins) std::printf(" %9ld", c);
    std::printf("\n");
  }
  std::printf("%-22s", "Overall");
  for (long c : hist.overall.bins) std::printf(" %9ld", c);
  std::printf("\n%-22s", "Average per frame");
  for (double v : hist.overall.per_frame_average()) std::printf(" %9.4f", v);
  std::printf("\n");
  return 0;
}

// ---- gradcheck ------------------------------------------------------------

int run_gradcheck(const Json& a) {
  ModelConfig cfg;
  cfg.hidden_dim = a.value("dim", 12);
  cfg.num_heads = a.value("heads", 2);
  cfg.num_encoder_layers = a.value("encoder_layers", 2);
  cfg.num_decoder_layers = a.value("decoder_layers", 2);
  cfg.ffn_dim = a.value("ffn", 16);
  cfg.num_det_queries = a.value("det_queries", 6);
  auto report = gradcheck(cfg, a.value("seed", std::uint64_t{17}), a.value("samples", 100),
                          a.value("step", 1e-5));
  std::printf("%-28s %8s %14s\n", "parameter", "checked", "max rel err");
  for (const auto& g : report.groups) {
    std::printf("%-28s %8d %14.4e\n", g.name.c_str(), g.checked, g.max_rel_err);
  }
  std::printf("overall max rel err %.4e (threshold %.1e)\n", report.max_rel_err, report.threshold);
  if (!report.passed()) throw CheckFailure("gradient check failed");
  return 0;
}

// ---- denoise-demo ---------------------------------------------------------

int run_denoise_demo(const Json& a) {
  const auto seed = a.at("seed").get<std::uint64_t>();
  const int objects = a.value("objects", 3);
  DenoiseParams params;
  params.max_positive_total = a.value("max_denoise_queries", 200);
  Scenario sc = generate_scenario(seed, objects, 8, objects >= 2, GridSpec{});
  const auto truth = ground_truth(sc);
  std::vector<BBox> gt;
  for (const auto& e : truth[4].entries) gt.push_back(e.box);
  std::vector<TrackCorrespondence> tracks;
  if (!gt.empty()) tracks.push_back(TrackCorrespondence{0, 0});

  Rng rng = substream(seed, 0x64656d6fULL);
  auto set = generate_denoise_set(gt, tracks, params, rng);
  std::printf("objects %zu, groups %d, queries %d\n", gt.size(), set.group_count(),
              set.total_queries());
  for (int g = 0; g < set.group_count(); ++g) {
    std::printf("group %d\n", g);
    for (const auto& spec : set.groups[g].specs) {
      std::printf("  %-8s %-11s gt=%d label=%2d content=%-10s box=(%.4f, %.4f, %.4f, %.4f)\n",
                  spec.polarity == NoisePolarity::Positive ? "positive" : "negative",
                  spec.kind == NoiseKind::Conditional ? "conditional" : "random", spec.gt_index,
                  spec.noised_label,
                  spec.content_source == ContentSource::TrajectoryEmbedding ? "trajectory"
                                                                            : "label",
                  spec.noised_box.cx, spec.noised_box.cy, spec.noised_box.w, spec.noised_box.h);
    }
    if (g >= 2 && set.group_count() > 4) {
      std::printf("  ... (%d more groups)\n", set.group_count() - g - 1);
      break;
    }
  }
  return 0;
}

// ---- ablate -----------------------------------------------------------------

int run_ablate(const Json& a) {
  RunConfig cfg = load_config_arg(a.value("config", ""));
  cfg.validate();
  const std::string off = a.at("off").get<std::string>();
  ModelVariant variant;
  if (off == "denoising") {
    variant = ModelVariant::NoDenoising;
  } else if (off == "cascaded-mask") {
    variant = ModelVariant::FullMask;
  } else {
    throw std::invalid_argument("ablate: --off must be 'denoising' or 'cascaded-mask'");
  }
  const int seeds = a.value("seeds", 20);
  const int eval_seqs = a.value("eval_sequences", 20);
  const int threads = a.value("threads", 2);

  auto outcomes = run_ablation(cfg, {ModelVariant::Full, variant}, seeds, eval_seqs, threads,
                               [](const std::string& line) { std::printf("%s\n", line.c_str()); });

  int wins = 0;
  double mota_full = 0.0, mota_var = 0.0;
  std::printf("\n%-6s %12s %12s %10s %10s\n", "seed", "full IDSW", "ablate IDSW", "full MOTA",
              "ablate MOTA");
  for (const auto& o : outcomes) {
    const auto& f = o.get(ModelVariant::Full);
    const auto& v = o.get(variant);
    if (f.idsw <= v.idsw) ++wins;
    mota_full += f.mota / seeds;
    mota_var += v.mota / seeds;
    std::printf("%-6d %12d %12d %10.3f %10.3f\n", o.seed_index, f.idsw, v.idsw, f.mota, v.mota);
  }
  std::printf("\nfull model no worse on IDSW in %d / %d seeds; mean MOTA %.3f vs %.3f\n", wins,
              seeds, mota_full, mota_var);
  const std::string out = a.value("out", "");
  if (!out.empty()) {
    Json j;
    j["variant"] = variant_name(variant);
    j["seeds"] = Json::array();
    for (const auto& o : outcomes) {
      const auto& f = o.get(ModelVariant::Full);
      const auto& v = o.get(variant);
      j["seeds"].push_back({{"seed_index", o.seed_index},
                            {"run_seed", o.run_seed},
                            {"full", {{"mota", f.mota}, {"idf1", f.idf1}, {"idsw", f.idsw}, {"fp", f.fp}, {"fn", f.fn}}},
                            {"ablate", {{"mota", v.mota}, {"idf1", v.idf1}, {"idsw", v.idsw}, {"fp", v.fp}, {"fn", v.fn}}}});
    }
    j["full_no_worse_idsw"] = wins;
    std::ofstream os(out);
    os << j.dump(2) << "\n";
    write_manifest("ablate", a, out + ".manifest.json");
  }
  return 0;
}

// ---- rerun ------------------------------------------------------------------

int dispatch(const std::string& command, const Json& args);

int run_rerun(const Json& a) {
  const auto manifest = Json::parse(slurp(a.at("manifest").get<std::string>()));
  if (manifest.value("tool", "") != "querytrack") {
    throw std::invalid_argument("rerun: not a querytrack manifest");
  }
  return dispatch(manifest.at("command").get<std::string>(), manifest.at("args"));
}

int dispatch(const std::string& command, const Json& args) {
  if (command == "simulate") return run_simulate(args);
  if (command == "train") return run_train(args);
  if (command == "track") return run_track(args);
  if (command == "eval") return run_eval(args);
  if (command == "crowdedness") return run_crowdedness(args);
  if (command == "gradcheck") return run_gradcheck(args);
  if (command == "denoise-demo") return run_denoise_demo(args);
  if (command == "ablate") return run_ablate(args);
  if (command == "rerun") return run_rerun(args);
  throw std::invalid_argument("unknown command " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occlusion-robust multi-object tracking toolkit"};
  app.require_subcommand(1);

  Json args;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scenario and its ground truth");
  std::uint64_t sim_seed = 1;
  int sim_agents = 3, sim_frames = 24, gh = 16, gw = 16, gc = 4;
  bool crossing = true;
  double fw = 1000, fh = 1000;
  std::string sim_out = "scene";
  sim->add_option("--seed", sim_seed);
  sim->add_option("--agents", sim_agents);
  sim->add_option("--frames", sim_frames);
  sim->add_flag("--crossing,!--no-crossing", crossing, "guarantee an occlusion crossing");
  sim->add_option("--grid-height", gh);
  sim->add_option("--grid-width", gw);
  sim->add_option("--grid-channels", gc);
  sim->add_option("--frame-width", fw);
  sim->add_option("--frame-height", fh);
  sim->add_option("--out", sim_out, "output prefix");

  auto* train = app.add_subcommand("train", "Train a model on synthetic scenarios");
  std::string train_config, train_data, train_model_out = "model.qtck", train_log;
  std::uint64_t train_seed = 0;
  int train_steps = 0;
  std::string train_off;
  train->add_option("--config", train_config, "run-config JSON");
  train->add_option("--data", train_data, "directory of scenario JSON files");
  train->add_option("--out-model", train_model_out);
  train->add_option("--log", train_log);
  train->add_option("--seed", train_seed);
  train->add_option("--steps", train_steps);
  train->add_option("--off", train_off, "disable a component: denoising | cascaded-mask");

  auto* track = app.add_subcommand("track", "Run the online tracker over a scenario");
  std::string track_model, track_scenario, track_out = "results.txt", track_config;
  track->add_option("--model", track_model)->required();
  track->add_option("--scenario", track_scenario)->required();
  track->add_option("--out", track_out);
  track->add_option("--config", track_config);

  auto* eval = app.add_subcommand("eval", "CLEAR-MOT and IDF1 evaluation");
  std::string eval_gt, eval_pred;
  bool eval_csv = false;
  double eval_minvis = 0.0;
  eval->add_option("--gt", eval_gt)->required();
  eval->add_option("--pred", eval_pred)->required();
  eval->add_flag("--csv", eval_csv);
  eval->add_option("--min-visibility", eval_minvis);

  auto* crowd = app.add_subcommand("crowdedness", "Ground-truth IoU-pair histogram");
  std::string crowd_dir;
  std::vector<std::string> crowd_files;
  std::vector<int> crowd_classes;
  bool crowd_consider = true;
  double crowd_minvis = 0.0;
  crowd->add_option("--gt-dir", crowd_dir, "MOTChallenge train directory or directory of gt files");
  crowd->add_option("--gt", crowd_files, "individual gt files");
  crowd->add_option("--classes", crowd_classes, "keep only these class ids");
  crowd->add_flag("--require-consider,!--no-require-consider", crowd_consider);
  crowd->add_option("--min-visibility", crowd_minvis);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  std::uint64_t grad_seed = 17;
  int grad_samples = 100, grad_dim = 12, grad_heads = 2;
  grad->add_option("--seed", grad_seed);
  grad->add_option("--samples", grad_samples);
  grad->add_option("--dim", grad_dim);
  grad->add_option("--heads", grad_heads);

  auto* dn = app.add_subcommand("denoise-demo", "Dump a generated denoising query set");
  std::uint64_t dn_seed = 1;
  int dn_objects = 3, dn_cap = 200;
  dn->add_option("--seed", dn_seed);
  dn->add_option("--objects", dn_objects);
  dn->add_option("--max-denoise-queries", dn_cap);

  auto* abl = app.add_subcommand("ablate", "Paired train+eval runs against an ablation variant");
  std::string abl_config, abl_off, abl_out;
  int abl_seeds = 20, abl_eval = 20, abl_threads = 2;
  abl->add_option("--config", abl_config);
  abl->add_option("--off", abl_off, "denoising | cascaded-mask")->required();
  abl->add_option("--seeds", abl_seeds);
  abl->add_option("--eval-sequences", abl_eval);
  abl->add_option("--threads", abl_threads);
  abl->add_option("--out", abl_out, "write a JSON report here");

  auto* rerun = app.add_subcommand("rerun", "Re-execute a pipeline from its manifest");
  std::string rerun_manifest;
  rerun->add_option("--manifest", rerun_manifest)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    std::string command;
    if (sim->parsed()) {
      command = "simulate";
      args = {{"seed", sim_seed},     {"agents", sim_agents},      {"frames", sim_frames},
              {"crossing", crossing}, {"grid_height", gh},         {"grid_width", gw},
              {"grid_channels", gc},  {"frame_width", fw},         {"frame_height", fh},
              {"out", sim_out}};
    } else if (train->parsed()) {
      command = "train";
      args = {{"config", train_config}, {"data", train_data}, {"out_model", train_model_out}};
      if (!train_log.empty()) args["log"] = train_log;
      if (train->count("--seed") > 0) args["seed"] = train_seed;
      if (train->count("--steps") > 0) args["steps"] = train_steps;
      if (!train_off.empty()) args["off"] = train_off;
    } else if (track->parsed()) {
      command = "track";
      args = {{"model", track_model},
              {"scenario", track_scenario},
              {"out", track_out},
              {"config", track_config}};
    } else if (eval->parsed()) {
      command = "eval";
      args = {{"gt", eval_gt}, {"pred", eval_pred}, {"csv", eval_csv},
              {"min_visibility", eval_minvis}};
    } else if (crowd->parsed()) {
      command = "crowdedness";
      args = {{"gt_dir", crowd_dir},
              {"gt", crowd_files},
              {"classes", crowd_classes},
              {"require_consider", crowd_consider},
              {"min_visibility", crowd_minvis}};
    } else if (grad->parsed()) {
      command = "gradcheck";
      args = {{"seed", grad_seed}, {"samples", grad_samples}, {"dim", grad_dim},
              {"heads", grad_heads}};
    } else if (dn->parsed()) {
      command = "denoise-demo";
      args = {{"seed", dn_seed}, {"objects", dn_objects}, {"max_denoise_queries", dn_cap}};
    } else if (abl->parsed()) {
      command = "ablate";
      args = {{"config", abl_config},   {"off", abl_off},         {"seeds", abl_seeds},
              {"eval_sequences", abl_eval}, {"threads", abl_threads}, {"out", abl_out}};
    } else if (rerun->parsed()) {
      command = "rerun";
      args = {{"manifest", rerun_manifest}};
    }
    return dispatch(command, args);
  } catch (const CheckFailure& e) {
    std::fprintf(stderr, "check failed: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
