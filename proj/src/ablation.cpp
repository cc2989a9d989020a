#include <atomic>
#include <mutex>
#include <thread>

#include "qtrack/train.hpp"

namespace qtrack {

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Full: return "full";
    case ModelVariant::NoDenoising: return "no-denoising";
    case ModelVariant::FullMask: return "full-mask";
  }
  return "?";
}

namespace {

RunConfig variant_config(const RunConfig& base, ModelVariant v, std::uint64_t run_seed) {
  RunConfig cfg = base;
  cfg.seed = run_seed;
  switch (v) {
    case ModelVariant::Full:
      cfg.denoise_enabled = true;
      cfg.mask_mode = "cascaded";
      break;
    case ModelVariant::NoDenoising:
      cfg.denoise_enabled = false;
      cfg.mask_mode = "cascaded";
      break;
    case ModelVariant::FullMask:
      cfg.denoise_enabled = true;
      cfg.mask_mode = "full";
      break;
  }
  return cfg;
}

template <typename S>
VariantOutcome run_one(const RunConfig& base, ModelVariant v, std::uint64_t run_seed,
                       int n_eval_sequences) {
  const RunConfig cfg = variant_config(base, v, run_seed);
  auto trained = train_model<S>(cfg);
  const auto report =
      evaluate_model<S>(trained.model, cfg, n_eval_sequences, run_seed, cfg.mask());
  VariantOutcome out;
  out.variant = v;
  out.mota = report.mota();
  out.idf1 = report.idf1();
  out.idsw = report.clear.idsw;
  out.fp = report.clear.fp;
  out.fn = report.clear.fn;
  return out;
}

}  // namespace

std::vector<SeedOutcome> run_ablation(const RunConfig& base, const std::vector<ModelVariant>& variants,
                                      int n_seeds, int n_eval_sequences, int n_threads,
                                      const std::function<void(const std::string&)>& progress) {
  struct Job {
    int seed_index;
    std::size_t variant_index;
  };
  std::vector<Job> jobs;
  for (int s = 0; s < n_seeds; ++s) {
    for (std::size_t v = 0; v < variants.size(); ++v) jobs.push_back(Job{s, v});
  }

  std::vector<SeedOutcome> outcomes(static_cast<std::size_t>(n_seeds));
  for (int s = 0; s < n_seeds; ++s) {
    outcomes[s].seed_index = s;
    outcomes[s].run_seed = base.seed + 7919ULL * static_cast<std::uint64_t>(s + 1);
    outcomes[s].variants.resize(variants.size());
  }

  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) break;
      const Job job = jobs[j];
      const ModelVariant v = variants[job.variant_index];
      const std::uint64_t run_seed = outcomes[job.seed_index].run_seed;
      VariantOutcome out;
      if (base.precision == "f64") {
        out = run_one<double>(base, v, run_seed, n_eval_sequences);
      } else {
        out = run_one<float>(base, v, run_seed, n_eval_sequences);
      }
      outcomes[job.seed_index].variants[job.variant_index] = out;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        char buf[160];
        std::snprintf(buf, sizeof buf, "seed %02d %-12s MOTA %.3f IDF1 %.3f IDSW %d FP %d FN %d",
                      job.seed_index, variant_name(v).c_str(), out.mota, out.idf1, out.idsw, out.fp,
                      out.fn);
        progress(buf);
      }
    }
  };

  const int workers = std::max(1, n_threads);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return outcomes;
}

}  // namespace qtrack
