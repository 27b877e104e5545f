#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lpcsvrg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"low-precision distributed optimization simulator"};
  app.require_subcommand(1);

  lpcsvrg::GlobalOptions opt;
  uint64_t seed_override = 0;
  int threads = 0;
  app.add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { opt.seed = seed_override; });
  app.add_option("--threads", threads, "<=1 serial, >1 one thread per worker")
      ->each([&](const std::string&) { opt.threads = threads; });
  app.add_option("--output-dir", opt.output_dir, "directory for emitted files");

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute one run from a JSON config");
  run->add_option("config", config_path, "JSON config file")->required();

  int bench_bits = 4;
  std::size_t bench_dim = 1024;
  std::size_t bench_trials = 10000;
  std::vector<double> bench_lambdas{1.0, 0.9, 0.5, 0.25};
  uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("codec-bench",
                                   "measure quantization error against its bound");
  bench->add_option("--bits", bench_bits, "code width in bits");
  bench->add_option("--dim", bench_dim, "vector dimension");
  bench->add_option("--trials", bench_trials, "Monte Carlo trials per lambda");
  bench->add_option("--lambda", bench_lambdas, "clipping factors to test");
  bench->add_option("--bench-seed", bench_seed, "rng seed");

  std::string probe_config;
  int probe_points = 10;
  std::size_t probe_trials = 10000;
  auto* probe = app.add_subcommand("variance-probe",
                                   "measure exchange variance against its bound");
  probe->add_option("config", probe_config, "JSON config file")->required();
  probe->add_option("--points", probe_points, "probe pairs to test");
  probe->add_option("--trials", probe_trials, "Monte Carlo trials per pair");

  std::vector<std::string> compare_configs;
  double compare_threshold = 0.0;
  double bandwidth_gbps = 10.0;
  auto* compare = app.add_subcommand("compare", "run several configs on one dataset");
  compare->add_option("configs", compare_configs, "two or more JSON config files")
      ->required();
  compare->add_option("--threshold", compare_threshold,
                      "loss threshold for bits-to-loss (default: max final loss)");
  compare->add_option("--bandwidth-gbps", bandwidth_gbps,
                      "modeled link speed for transmission time");

  std::size_t gen_d = 10;
  std::size_t gen_n = 100;
  double gen_noise = 1.0;
  uint64_t gen_seed = 1;
  std::string gen_out = "data.libsvm";
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as LIBSVM text");
  gen->add_option("--d", gen_d, "features");
  gen->add_option("--n", gen_n, "samples");
  gen->add_option("--noise", gen_noise, "target noise level");
  gen->add_option("--gen-seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output file");

  std::string hist_config;
  int hist_bins = 32;
  int hist_samples = 8;
  auto* hist = app.add_subcommand("histogram",
                                  "histogram worker 0's exchanged gradient estimates");
  hist->add_option("config", hist_config, "JSON config file")->required();
  hist->add_option("--bins", hist_bins, "histogram bins");
  hist->add_option("--samples", hist_samples, "iterations to capture");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return lpcsvrg::cmd_run(config_path, opt);
  if (bench->parsed())
    return lpcsvrg::cmd_codec_bench(bench_bits, bench_dim, bench_trials, bench_lambdas,
                                    bench_seed);
  if (probe->parsed())
    return lpcsvrg::cmd_variance_probe(probe_config, probe_points, probe_trials, opt);
  if (compare->parsed())
    return lpcsvrg::cmd_compare(compare_configs, compare_threshold, bandwidth_gbps, opt);
  if (gen->parsed()) return lpcsvrg::cmd_gen_data(gen_d, gen_n, gen_noise, gen_seed, gen_out);
  if (hist->parsed()) return lpcsvrg::cmd_histogram(hist_config, hist_bins, hist_samples, opt);
  return 0;
}
