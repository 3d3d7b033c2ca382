// Command-line front end: classify MNIST IDX images with a .dlk.json
// model, diff the parallel kernels against the sequential oracle, bench
// worker counts, validate model files and generate random ones.
//
// Exit codes: 0 success, 1 internal assertion, 2 file/parse/shape errors,
// 3 oracle-diff tolerance breach. Results go to stdout, diagnostics to
// stderr.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dlk/errors.hpp"
#include "dlk/mnist.hpp"
#include "dlk/model.hpp"
#include "dlk/pipeline.hpp"

namespace {

constexpr const char* kDefaultTopology = "28x28; conv 1x5x5 pool; dense 64 tanh; softmax 10";

std::size_t default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

dlk::ModelSpec load_model_checked(const std::string& path) {
  try {
    return dlk::load_model_file(path);
  } catch (const dlk::IoError&) {
    throw;
  } catch (const dlk::InputError& e) {
    throw dlk::InputError("in '" + path + "': " + e.what());
  }
}

dlk::MnistImages load_images_checked(const std::string& path) {
  try {
    return dlk::load_idx_images(path);
  } catch (const dlk::IoError&) {
    throw;
  } catch (const dlk::InputError& e) {
    throw dlk::InputError("in '" + path + "': " + e.what());
  }
}

dlk::MnistLabels load_labels_checked(const std::string& path) {
  try {
    return dlk::load_idx_labels(path);
  } catch (const dlk::IoError&) {
    throw;
  } catch (const dlk::InputError& e) {
    throw dlk::InputError("in '" + path + "': " + e.what());
  }
}

std::size_t clamp_limit(std::optional<std::size_t> limit, std::size_t count) {
  return limit ? std::min(*limit, count) : count;
}

struct ClassifyOptions {
  std::string model_path;
  std::string images_path;
  std::string labels_path;
  std::optional<std::size_t> limit;
  std::size_t workers = default_workers();
  bool as_json = false;
};

int run_classify(const ClassifyOptions& opt) {
  const dlk::ModelSpec model = load_model_checked(opt.model_path);
  const dlk::MnistImages images = load_images_checked(opt.images_path);

  std::optional<dlk::MnistLabels> labels;
  if (!opt.labels_path.empty()) {
    labels = load_labels_checked(opt.labels_path);
    if (labels->labels.size() != images.images.size()) {
      throw dlk::ValueError("'" + opt.labels_path + "' has " +
                            std::to_string(labels->labels.size()) + " labels but '" +
                            opt.images_path + "' has " +
                            std::to_string(images.images.size()) + " images");
    }
  }

  const std::size_t n = clamp_limit(opt.limit, images.images.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const dlk::Classification c = dlk::classify(model, images.images[i], opt.workers);
    if (opt.as_json) {
      std::printf("{\"index\":%zu,\"label\":%zu,\"confidence\":%.9g}\n", i, c.label,
                  static_cast<double>(c.confidence));
    } else {
      std::printf("%zu %zu %.6f\n", i, c.label, static_cast<double>(c.confidence));
    }
    if (labels && c.label == (*labels).labels[i]) ++correct;
  }
  if (labels) {
    const double ratio = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
    if (opt.as_json) {
      std::printf("{\"correct\":%zu,\"total\":%zu,\"accuracy\":%.6f}\n", correct, n, ratio);
    } else {
      std::printf("accuracy %zu/%zu = %.4f\n", correct, n, ratio);
    }
  }
  return 0;
}

struct OracleDiffOptions {
  std::string model_path;
  std::string images_path;
  std::optional<std::size_t> limit;
  double tolerance = 1e-5;
  std::size_t workers = default_workers();
};

int run_oracle_diff(const OracleDiffOptions& opt) {
  const dlk::ModelSpec model = load_model_checked(opt.model_path);
  const dlk::MnistImages images = load_images_checked(opt.images_path);
  const std::size_t n = clamp_limit(opt.limit, images.images.size());

  double worst = 0.0;
  std::size_t worst_index = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [probs, trace] = dlk::forward(model, images.images[i], opt.workers);
    const auto ref = dlk::forward_oracle(model, images.images[i]);
    for (std::size_t j = 0; j < probs.size(); ++j) {
      const double dev = std::abs(static_cast<double>(probs[j]) - static_cast<double>(ref[j]));
      if (dev > worst) {
        worst = dev;
        worst_index = i;
      }
    }
  }
  std::printf("max deviation %.3e over %zu images\n", worst, n);
  if (worst > opt.tolerance) {
    std::fprintf(stderr, "tolerance breach: image %zu deviates %.3e > %.3e\n", worst_index,
                 worst, opt.tolerance);
    return 3;
  }
  return 0;
}

struct BenchOptions {
  std::string model_path;
  std::string images_path;
  std::optional<std::size_t> limit;
  std::size_t repeat = 3;
  std::vector<std::size_t> workers{1, 2, 4, 8};
};

int run_bench(const BenchOptions& opt) {
  const dlk::ModelSpec model = load_model_checked(opt.model_path);
  const dlk::MnistImages images = load_images_checked(opt.images_path);
  const std::size_t n = clamp_limit(opt.limit, images.images.size());
  if (n == 0) throw dlk::ValueError("bench needs at least one image");
  if (opt.repeat == 0) throw dlk::ValueError("bench needs at least one repeat");

  std::vector<std::vector<float>> baseline;  // probabilities under the first worker count
  for (std::size_t wi = 0; wi < opt.workers.size(); ++wi) {
    const std::size_t w = opt.workers[wi];
    double mean_us = 0.0;
    double min_us = 0.0;
    for (std::size_t rep = 0; rep < opt.repeat; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<std::vector<float>> all_probs;
      all_probs.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        all_probs.push_back(dlk::forward(model, images.images[i], w).first);
      }
      const auto stop = std::chrono::steady_clock::now();
      const double us =
          std::chrono::duration_cast<std::chrono::duration<double, std::micro>>(stop - start)
              .count() /
          static_cast<double>(n);
      mean_us += us;
      min_us = rep == 0 ? us : std::min(min_us, us);

      if (rep == 0) {
        if (wi == 0) {
          baseline = std::move(all_probs);
        } else {
          for (std::size_t i = 0; i < n; ++i) {
            if (std::memcmp(baseline[i].data(), all_probs[i].data(),
                            baseline[i].size() * sizeof(float)) != 0) {
              throw dlk::InternalError("probabilities for image " + std::to_string(i) +
                                       " differ between workers=" +
                                       std::to_string(opt.workers[0]) + " and workers=" +
                                       std::to_string(w));
            }
          }
        }
      }
    }
    mean_us /= static_cast<double>(opt.repeat);
    std::printf("workers=%zu mean_us=%.1f min_us=%.1f\n", w, mean_us, min_us);
  }
  return 0;
}

int run_validate(const std::string& model_path) {
  const dlk::ModelSpec model = load_model_checked(model_path);
  std::printf("OK: model '%s', %zu layers\n", model.name.c_str(), model.layers.size());
  return 0;
}

struct GenModelOptions {
  std::uint64_t seed = 0;
  std::string topology = kDefaultTopology;
  std::string out_path;
};

int run_gen_model(const GenModelOptions& opt) {
  const dlk::TopologySpec topo = dlk::parse_topology(opt.topology);
  const dlk::ModelSpec spec = dlk::generate_random_model(opt.seed, topo);
  dlk::save_model_file(spec, opt.out_path);
  std::printf("wrote %s (%zu layers, seed %llu)\n", opt.out_path.c_str(), spec.layers.size(),
              static_cast<unsigned long long>(opt.seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-parallel CNN inference on a simulated threadgroup executor", "dlk"};
  app.require_subcommand(1);

  ClassifyOptions classify_opt;
  CLI::App* classify = app.add_subcommand("classify", "predict a label per image");
  classify->add_option("--model", classify_opt.model_path, "model file (.dlk.json)")->required();
  classify->add_option("--images", classify_opt.images_path, "IDX image file")->required();
  classify->add_option("--labels", classify_opt.labels_path, "IDX label file; adds accuracy");
  classify->add_option("--limit", classify_opt.limit, "classify only the first N images");
  classify->add_option("--workers", classify_opt.workers, "executor worker threads");
  classify->add_flag("--json", classify_opt.as_json, "one JSON object per line");

  OracleDiffOptions diff_opt;
  CLI::App* diff = app.add_subcommand("oracle-diff", "compare kernels against the oracle");
  diff->add_option("--model", diff_opt.model_path, "model file (.dlk.json)")->required();
  diff->add_option("--images", diff_opt.images_path, "IDX image file")->required();
  diff->add_option("--limit", diff_opt.limit, "use only the first N images");
  diff->add_option("--tolerance", diff_opt.tolerance, "max element-wise deviation");
  diff->add_option("--workers", diff_opt.workers, "executor worker threads");

  BenchOptions bench_opt;
  CLI::App* bench = app.add_subcommand("bench", "time forward passes per worker count");
  bench->add_option("--model", bench_opt.model_path, "model file (.dlk.json)")->required();
  bench->add_option("--images", bench_opt.images_path, "IDX image file")->required();
  bench->add_option("--limit", bench_opt.limit, "use only the first N images");
  bench->add_option("--repeat", bench_opt.repeat, "repeats per worker count");
  bench->add_option("--workers", bench_opt.workers, "worker counts to bench")
      ->delimiter(',');

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "check a model file");
  validate->add_option("--model", validate_path, "model file (.dlk.json)")->required();

  GenModelOptions gen_opt;
  CLI::App* gen = app.add_subcommand("gen-model", "write a deterministic random model");
  gen->add_option("--seed", gen_opt.seed, "RNG seed")->required();
  gen->add_option("--topology", gen_opt.topology,
                  std::string("layer plan, default \"") + kDefaultTopology + "\"");
  gen->add_option("--out", gen_opt.out_path, "output path (.dlk.json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (classify->parsed()) return run_classify(classify_opt);
    if (diff->parsed()) return run_oracle_diff(diff_opt);
    if (bench->parsed()) return run_bench(bench_opt);
    if (validate->parsed()) return run_validate(validate_path);
    if (gen->parsed()) return run_gen_model(gen_opt);
    std::fprintf(stderr, "error: no subcommand\n");
    return 2;
  } catch (const dlk::InternalError& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  } catch (const dlk::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
