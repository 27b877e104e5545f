#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lpcsvrg/metrics.hpp"
#include "lpcsvrg/problem.hpp"
#include "lpcsvrg/simnet.hpp"

namespace lpcsvrg {

// Variance-coefficient decomposition for a quantized exchange:
//   a_term  d lambda^2 / (4 (2^(b-1)-1)^2)     grid resolution
//   b_term  d_lambda (1 - lambda)^2            clipping
//   c_term  1 / (N B)                          mini-batch sampling
// zeta is their sum with the measured running-max d_lambda.
struct ZetaDiagnostic {
  double a_term = 0.0;
  double b_term = 0.0;
  double c_term = 0.0;
  double zeta = 0.0;
  double tau2_theoretical = 0.0;  // 5 zeta / 3 + 1 / (2B)
  std::size_t d_lambda = 0;
};

struct RunTiming {
  uint64_t compute_ns = 0;
  uint64_t encode_ns = 0;
  uint64_t decode_ns = 0;
};

struct RunResult {
  std::vector<double> x_out;
  std::vector<double> x_final;
  std::vector<MetricsRecord> metrics;
  std::vector<std::string> warnings;
  ZetaDiagnostic zeta;
  double constraint_lhs = 0.0;  // 8 m^2 rho^2 zeta + rho, re-checked post-run
  bool constraint_ok = true;
  uint64_t grad_evals = 0;  // cluster-wide sample-gradient evaluations
  RunTiming timing;
  double final_loss = 0.0;
};

using StepHook = std::function<void(int epoch, int inner, std::span<const double> x)>;
using LocalGradHook =
    std::function<void(int epoch, int inner, int worker, std::span<const double> u)>;

struct LpcSvrgConfig {
  int epochs = 1;          // S
  int inner = 0;           // m; 0 means ceil(n / B)
  int batch = 1;           // B, sampled with replacement (B == n: full batch)
  double rho = 0.3;        // step = rho / L
  double eta = 0.0;        // explicit step overrides rho when > 0
  QuantizerConfig quant;
  bool bypass_quantization = false;
  int loss_stride = 1;
  StepHook on_step;
  LocalGradHook on_local_grad;
};

RunResult run_lpc_svrg(const CompositeProblem& p, ClusterState& cluster,
                       const LpcSvrgConfig& cfg);

enum class AlpcMode { StronglyConvex, GeneralConvex };
enum class XTildeRule { WeightedAverage, LastIterate };

struct AlpcConfig {
  int epochs = 1;
  int inner = 0;           // m; 0 means ceil(n / B)
  int batch = 1;
  AlpcMode mode = AlpcMode::StronglyConvex;
  double tau1 = 0.0;       // 0: sqrt(m sigma / 6L) (strongly convex) / 2/(s+4) (general)
  double tau2 = 0.5;       // clamped to <= 1/2 with a warning
  double alpha = 0.0;      // 0: 1 / (6 tau1 L)
  double alpha_lr = 0.0;   // general mode: alpha_s = alpha_lr / tau1_s when > 0
  XTildeRule x_tilde_rule = XTildeRule::WeightedAverage;
  QuantizerConfig quant;
  bool bypass_quantization = false;
  int loss_stride = 1;
  StepHook on_step;
  LocalGradHook on_local_grad;
};

RunResult run_alpc_svrg(const CompositeProblem& p, ClusterState& cluster, const AlpcConfig& cfg);

struct SgdConfig {
  int steps = 1;
  int batch = 1;
  double lr = 0.1;
  double decay = 0.0;      // eta_t = lr / (1 + decay t)
  bool quantize = false;   // quantized exchange of the raw stochastic gradient
  QuantizerConfig quant;
  int loss_stride = 1;
  StepHook on_step;
  LocalGradHook on_local_grad;
};

RunResult run_sgd(const CompositeProblem& p, ClusterState& cluster, const SgdConfig& cfg);

// Monte-Carlo check of the aggregated-estimate variance against its bound
//   E |v - grad f(x)|^2 <= 2 L^2 [A + d_lambda (1-lambda)^2 + 1/(NB)] |x - x_tilde|^2
// at fixed probe pairs (x, x_tilde); A uses 3 d lambda^2 / (8 (2^(b-1)-1)^2)
// under ParamServerRequant and d lambda^2 / (4 (2^(b-1)-1)^2) otherwise.
struct ProbeRow {
  double dist_sq = 0.0;
  double measured = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
  double mc_stderr = 0.0;  // std error of `measured`, relative to bound
  std::size_t d_lambda = 0;
};

struct ProbeConfig {
  CommScheme scheme = CommScheme::Broadcast;
  QuantizerConfig quant;
  int workers = 1;
  int batch = 1;
  int points = 10;
  std::size_t trials = 10000;
  uint64_t seed = 1;
};

std::vector<ProbeRow> variance_probe(const CompositeProblem& p, const ProbeConfig& cfg);

}  // namespace lpcsvrg
