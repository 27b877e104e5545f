#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpcsvrg/optimizers.hpp"

namespace lpcsvrg {

enum class Algorithm { Sgd, Qsgd, Svrg, LpcSvrg, AlpcSvrg };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | libsvm
  std::size_t d = 0;
  std::size_t n = 0;
  double noise = 1.0;
  uint64_t seed = 1;
  std::string path;
};

struct HSpec {
  std::string kind = "zero";  // zero | l1 | l2sq | box
  double mu = 0.0;
  double sigma = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Full description of one run; serializes to/from the JSON config format and
// is echoed verbatim into the manifest so any run can be replayed from it.
struct RunConfig {
  Algorithm algorithm = Algorithm::LpcSvrg;
  DatasetSpec dataset;
  HSpec h;
  int workers = 1;
  CommScheme scheme = CommScheme::Broadcast;
  ExecMode exec = ExecMode::Serial;
  QuantizerConfig quant;
  bool has_quant = false;
  int epochs = 1;
  int inner = 0;
  int batch = 1;
  double rho = 0.3;
  double eta = 0.0;
  int steps = 100;
  double lr = 0.1;
  double decay = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.5;
  double alpha = 0.0;
  double alpha_lr = 0.0;
  AlpcMode alpc_mode = AlpcMode::StronglyConvex;
  XTildeRule x_tilde_rule = XTildeRule::WeightedAverage;
  int loss_stride = 1;
  std::string ledger_mode = "nominal";  // nominal | entropy
  uint64_t seed = 1;
  double x0 = 0.0;
  std::string tag = "run";

  static RunConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  void validate() const;  // throws ConfigInvalid naming the offending field
};

struct RunOutput {
  RunResult result;
  std::string metrics_csv;
  std::string ledger_csv;
  std::string manifest_json;
  uint64_t dataset_hash = 0;
};

// Builds the problem and cluster from the config and executes the run.
RunOutput execute_run(const RunConfig& cfg);

struct GlobalOptions {
  std::optional<uint64_t> seed;
  std::optional<int> threads;  // <= 1: serial, > 1: thread per worker
  std::string output_dir = ".";
};

// Subcommand bodies; each returns a process exit code
// (0 ok, 2 config error, 3 dataset error).
int cmd_run(const std::string& config_path, const GlobalOptions& opt);
int cmd_codec_bench(int bits, std::size_t dim, std::size_t trials,
                    const std::vector<double>& lambdas, uint64_t seed);
int cmd_variance_probe(const std::string& config_path, int points, std::size_t trials,
                       const GlobalOptions& opt);
int cmd_compare(const std::vector<std::string>& config_paths, double threshold,
                double bandwidth_gbps, const GlobalOptions& opt);
int cmd_gen_data(std::size_t d, std::size_t n, double noise, uint64_t seed,
                 const std::string& out_path);
int cmd_histogram(const std::string& config_path, int bins, int samples,
                  const GlobalOptions& opt);

}  // namespace lpcsvrg
