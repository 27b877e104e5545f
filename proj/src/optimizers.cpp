#include "lpcsvrg/optimizers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "lpcsvrg/errors.hpp"
#include "lpcsvrg/vec.hpp"

namespace lpcsvrg {

namespace {

uint64_t now_ns() {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

int default_inner(int inner, std::size_t n, int batch) {
  if (inner > 0) return inner;
  return static_cast<int>((n + static_cast<std::size_t>(batch) - 1) /
                          static_cast<std::size_t>(batch));
}

void check_batch(int batch, std::size_t n) {
  if (batch < 1) throw ConfigInvalid("B: must be >= 1");
  if (static_cast<std::size_t>(batch) > n) throw ConfigInvalid("B: must be <= n");
}

// B == n switches to the deterministic full batch; otherwise B draws with
// replacement from the worker's own stream.
void sample_batch(WorkerState& w, RngStream& rng, int batch, std::size_t n) {
  w.batch.resize(static_cast<std::size_t>(batch));
  if (static_cast<std::size_t>(batch) == n) {
    for (std::size_t i = 0; i < n; ++i) w.batch[i] = i;
    return;
  }
  for (auto& idx : w.batch) idx = rng.next_index(n);
}

double grid_term(CommScheme scheme, const QuantizerConfig& q, std::size_t d) {
  const double mc = static_cast<double>(q.levels());
  const double base = static_cast<double>(d) * q.lambda * q.lambda / (4.0 * mc * mc);
  if (scheme == CommScheme::ParamServerRequant) return 1.5 * base;
  return base;
}

ZetaDiagnostic make_zeta(CommScheme scheme, const QuantizerConfig& q, bool bypass,
                         std::size_t d, int workers, int batch, std::size_t d_lambda) {
  ZetaDiagnostic z;
  if (!bypass) {
    z.a_term = grid_term(scheme, q, d);
    z.b_term = static_cast<double>(d_lambda) * (1.0 - q.lambda) * (1.0 - q.lambda);
  }
  z.c_term = 1.0 / (static_cast<double>(workers) * static_cast<double>(batch));
  z.zeta = z.a_term + z.b_term + z.c_term;
  z.tau2_theoretical = 5.0 * z.zeta / 3.0 + 1.0 / (2.0 * static_cast<double>(batch));
  z.d_lambda = d_lambda;
  return z;
}

struct Recorder {
  const CompositeProblem* p;
  ClusterState* cluster;
  const QuantizerConfig* quant;
  bool bypass;
  int batch;
  int stride;
  double eta_metric;
  uint64_t start_ns;
  std::vector<MetricsRecord> records;
  std::size_t d_lambda_max = 0;

  void maybe_record(int epoch, int inner, int k, int total, std::span<const double> x) {
    if ((k + 1) % stride != 0 && k + 1 != total) return;
    MetricsRecord r;
    r.epoch = epoch;
    r.inner = inner;
    r.loss = p->objective(x);
    const auto g = gradient_mapping(*p, x, eta_metric);
    r.grad_map_sq = vec::norm_sq(g);
    r.cum_bits = cluster->ledger.cumulative_bits();
    r.d_lambda_max = d_lambda_max;
    r.zeta = make_zeta(cluster->scheme, *quant, bypass, cluster->dim, cluster->workers, batch,
                       d_lambda_max)
                 .zeta;
    r.wall_ns = now_ns() - start_ns;
    records.push_back(r);
  }
};

std::span<const std::vector<double>> local_views(ClusterState& c,
                                                 std::vector<std::vector<double>>& storage) {
  storage.clear();
  storage.reserve(c.local.size());
  for (auto& w : c.local) storage.push_back(w.u);
  return storage;
}

}  // namespace

RunResult run_lpc_svrg(const CompositeProblem& p, ClusterState& cluster,
                       const LpcSvrgConfig& cfg) {
  const std::size_t n = p.n();
  const std::size_t d = p.d();
  if (cluster.dim != d) throw DimMismatch("cluster dim != problem dim");
  if (cfg.epochs < 1) throw ConfigInvalid("S: must be >= 1");
  check_batch(cfg.batch, n);
  const double L = p.smoothness();
  const double eta = cfg.eta > 0.0 ? cfg.eta : cfg.rho / L;
  if (eta <= 0.0) throw ConfigInvalid("eta: must be > 0");
  const double rho = eta * L;
  if (rho >= 0.5) throw ConfigInvalid("rho: must be in (0, 1/2)");
  if (!cfg.bypass_quantization &&
      (cfg.quant.lambda <= 0.0 || cfg.quant.lambda > 1.0))
    throw ConfigInvalid("lambda: must be in (0, 1]");
  const int m = default_inner(cfg.inner, n, cfg.batch);
  const int total = cfg.epochs * m;

  RunResult res;
  Recorder rec{&p,   &cluster, &cfg.quant, cfg.bypass_quantization, cfg.batch,
               std::max(1, cfg.loss_stride), eta, now_ns(), {}, 0};

  const uint64_t out_idx = cluster.output_rng.next_index(static_cast<uint64_t>(total));
  std::vector<double> x_tilde = cluster.local[0].x;
  std::vector<double> grad_tilde(d);
  std::vector<std::vector<double>> views;
  auto rngs = quant_streams(cluster);

  for (int s = 0; s < cfg.epochs; ++s) {
    uint64_t t0 = now_ns();
    p.full_grad_into(x_tilde, grad_tilde);
    res.timing.compute_ns += now_ns() - t0;
    cluster.ledger.charge_epoch_full_gradient(cluster.scheme, cluster.workers, d);
    res.grad_evals += n;

    for (int t = 0; t < m; ++t) {
      const int k = s * m + t;
      if (static_cast<uint64_t>(k) == out_idx) res.x_out = cluster.local[0].x;

      t0 = now_ns();
      barrier_step(cluster, [&](WorkerState& w) {
        sample_batch(w, w.batch_rng, cfg.batch, n);
        p.batch_grad_diff(w.batch, w.x, x_tilde, w.u);
        if (cfg.on_local_grad) cfg.on_local_grad(s, t, w.id, w.u);
      });
      res.timing.compute_ns += now_ns() - t0;
      res.grad_evals += 2ull * static_cast<uint64_t>(cfg.batch) *
                        static_cast<uint64_t>(cluster.workers);

      const auto local = local_views(cluster, views);
      const ExchangeResult ex =
          cfg.bypass_quantization
              ? exchange_full_precision(local, cluster.scheme, cluster.ledger)
              : exchange(local, cluster.scheme, cfg.quant, rngs, cluster.server_rng,
                         cluster.ledger);
      res.timing.encode_ns += ex.encode_ns;
      res.timing.decode_ns += ex.decode_ns;
      rec.d_lambda_max = std::max(rec.d_lambda_max, ex.d_lambda_max);

      t0 = now_ns();
      barrier_step(cluster, [&](WorkerState& w) {
        for (std::size_t j = 0; j < d; ++j)
          w.scratch[j] = w.x[j] - eta * (ex.mean[j] + grad_tilde[j]);
        p.h().prox_into(eta, w.scratch, w.x);
      });
      res.timing.compute_ns += now_ns() - t0;

      if (cfg.on_step) cfg.on_step(s, t, cluster.local[0].x);
      rec.maybe_record(s, t, k, total, cluster.local[0].x);
    }
    x_tilde = cluster.local[0].x;
  }

  res.x_final = cluster.local[0].x;
  if (res.x_out.empty()) res.x_out = res.x_final;
  res.metrics = std::move(rec.records);
  res.final_loss = res.metrics.empty() ? p.objective(res.x_final) : res.metrics.back().loss;
  res.zeta = make_zeta(cluster.scheme, cfg.quant, cfg.bypass_quantization, d, cluster.workers,
                       cfg.batch, rec.d_lambda_max);
  res.constraint_lhs = 8.0 * static_cast<double>(m) * static_cast<double>(m) * rho * rho *
                           res.zeta.zeta +
                       rho;
  res.constraint_ok = res.constraint_lhs <= 1.0;
  if (!res.constraint_ok) {
    std::ostringstream w;
    w << "step constraint violated: 8 m^2 rho^2 zeta + rho = " << res.constraint_lhs
      << " > 1 (m=" << m << ", rho=" << rho << ", zeta=" << res.zeta.zeta << ")";
    res.warnings.push_back(w.str());
  }
  return res;
}

RunResult run_alpc_svrg(const CompositeProblem& p, ClusterState& cluster,
                        const AlpcConfig& cfg) {
  const std::size_t n = p.n();
  const std::size_t d = p.d();
  if (cluster.dim != d) throw DimMismatch("cluster dim != problem dim");
  if (cfg.epochs < 1) throw ConfigInvalid("S: must be >= 1");
  check_batch(cfg.batch, n);
  if (!cfg.bypass_quantization &&
      (cfg.quant.lambda <= 0.0 || cfg.quant.lambda > 1.0))
    throw ConfigInvalid("lambda: must be in (0, 1]");
  const double L = p.smoothness();
  const double sigma = p.h().strong_convexity();
  const int m = default_inner(cfg.inner, n, cfg.batch);
  const int total = cfg.epochs * m;

  RunResult res;
  double tau2 = cfg.tau2;
  if (tau2 > 0.5) {
    res.warnings.push_back("tau2 clamped to 1/2 (configured " + format_double(cfg.tau2) + ")");
    tau2 = 0.5;
  }
  if (tau2 < 0.0) throw ConfigInvalid("tau2: must be >= 0");

  const bool strongly = cfg.mode == AlpcMode::StronglyConvex;
  if (strongly && sigma <= 0.0)
    throw ConfigInvalid("alpc_mode: strongly-convex mode needs h with sigma > 0");
  if (strongly && static_cast<double>(m) > 1.5 * L / sigma) {
    std::ostringstream w;
    w << "m = " << m << " exceeds 3L/(2 sigma) = " << 1.5 * L / sigma;
    res.warnings.push_back(w.str());
  }

  double tau1 = 0.0;
  double alpha = 0.0;
  if (strongly) {
    tau1 = cfg.tau1 > 0.0 ? cfg.tau1 : std::sqrt(static_cast<double>(m) * sigma / (6.0 * L));
    if (tau1 + tau2 > 1.0) {
      res.warnings.push_back("tau1 clamped to 1 - tau2 (was " + format_double(tau1) + ")");
      tau1 = 1.0 - tau2;
    }
    alpha = cfg.alpha > 0.0 ? cfg.alpha : 1.0 / (6.0 * tau1 * L);
  }

  Recorder rec{&p,   &cluster, &cfg.quant, cfg.bypass_quantization, cfg.batch,
               std::max(1, cfg.loss_stride), 1.0 / (4.0 * L), now_ns(), {}, 0};

  std::vector<double> x_tilde = cluster.local[0].x;
  barrier_step(cluster, [&](WorkerState& w) {
    w.y = w.x;
    w.z = w.x;
  });
  std::vector<double> grad_tilde(d);
  std::vector<double> y_acc(d);
  std::vector<std::vector<double>> views;
  auto rngs = quant_streams(cluster);

  for (int s = 0; s < cfg.epochs; ++s) {
    if (!strongly) {
      tau1 = cfg.tau1 > 0.0 ? cfg.tau1 : 2.0 / (s + 4.0);
      alpha = cfg.alpha > 0.0
                  ? cfg.alpha
                  : (cfg.alpha_lr > 0.0 ? cfg.alpha_lr / tau1 : 1.0 / (6.0 * L * tau1));
    }
    const double theta = strongly ? 1.0 + alpha * sigma : 1.0;

    uint64_t t0 = now_ns();
    p.full_grad_into(x_tilde, grad_tilde);
    res.timing.compute_ns += now_ns() - t0;
    cluster.ledger.charge_epoch_full_gradient(cluster.scheme, cluster.workers, d);
    res.grad_evals += n;

    vec::fill(y_acc, 0.0);
    double w_sum = 0.0;
    double w_t = 1.0;

    for (int t = 0; t < m; ++t) {
      const int k = s * m + t;

      t0 = now_ns();
      barrier_step(cluster, [&](WorkerState& w) {
        for (std::size_t j = 0; j < d; ++j)
          w.x[j] = tau1 * w.z[j] + tau2 * x_tilde[j] + (1.0 - tau1 - tau2) * w.y[j];
        sample_batch(w, w.batch_rng, cfg.batch, n);
        p.batch_grad_diff(w.batch, w.x, x_tilde, w.u);
        if (cfg.on_local_grad) cfg.on_local_grad(s, t, w.id, w.u);
      });
      res.timing.compute_ns += now_ns() - t0;
      res.grad_evals += 2ull * static_cast<uint64_t>(cfg.batch) *
                        static_cast<uint64_t>(cluster.workers);

      const auto local = local_views(cluster, views);
      const ExchangeResult ex =
          cfg.bypass_quantization
              ? exchange_full_precision(local, cluster.scheme, cluster.ledger)
              : exchange(local, cluster.scheme, cfg.quant, rngs, cluster.server_rng,
                         cluster.ledger);
      res.timing.encode_ns += ex.encode_ns;
      res.timing.decode_ns += ex.decode_ns;
      rec.d_lambda_max = std::max(rec.d_lambda_max, ex.d_lambda_max);

      t0 = now_ns();
      barrier_step(cluster, [&](WorkerState& w) {
        // y: quantized direction, fixed 1/(4L) step
        for (std::size_t j = 0; j < d; ++j)
          w.scratch[j] = w.x[j] - (ex.mean[j] + grad_tilde[j]) / (4.0 * L);
        p.h().prox_into(1.0 / (4.0 * L), w.scratch, w.y);
        // z: local full-precision direction from the shared second batch
        sample_batch(w, w.shared_batch_rng, cfg.batch, n);
        p.batch_grad_diff(w.batch, w.x, x_tilde, w.u);
        for (std::size_t j = 0; j < d; ++j)
          w.scratch[j] = w.z[j] - alpha * (w.u[j] + grad_tilde[j]);
        p.h().prox_into(alpha, w.scratch, w.z);
      });
      res.timing.compute_ns += now_ns() - t0;
      res.grad_evals += 2ull * static_cast<uint64_t>(cfg.batch) *
                        static_cast<uint64_t>(cluster.workers);

      vec::axpy(w_t, cluster.local[0].y, y_acc);
      w_sum += w_t;
      w_t *= theta;

      if (cfg.on_step) cfg.on_step(s, t, cluster.local[0].y);
      rec.maybe_record(s, t, k, total, cluster.local[0].y);
    }

    if (cfg.x_tilde_rule == XTildeRule::LastIterate) {
      x_tilde = cluster.local[0].y;
    } else {
      x_tilde = y_acc;
      vec::scale(x_tilde, 1.0 / w_sum);
    }
  }

  res.x_final = cluster.local[0].y;
  res.x_out = x_tilde;
  res.metrics = std::move(rec.records);
  res.final_loss = res.metrics.empty() ? p.objective(res.x_out) : res.metrics.back().loss;
  res.zeta = make_zeta(cluster.scheme, cfg.quant, cfg.bypass_quantization, d, cluster.workers,
                       cfg.batch, rec.d_lambda_max);
  if (res.zeta.tau2_theoretical > 0.5)
    res.warnings.push_back("theoretical tau2 = " + format_double(res.zeta.tau2_theoretical) +
                           " exceeds 1/2; using " + format_double(tau2));
  return res;
}

RunResult run_sgd(const CompositeProblem& p, ClusterState& cluster, const SgdConfig& cfg) {
  const std::size_t n = p.n();
  const std::size_t d = p.d();
  if (cluster.dim != d) throw DimMismatch("cluster dim != problem dim");
  if (cfg.steps < 1) throw ConfigInvalid("steps: must be >= 1");
  check_batch(cfg.batch, n);
  if (cfg.lr <= 0.0) throw ConfigInvalid("lr: must be > 0");
  if (cfg.decay < 0.0) throw ConfigInvalid("decay: must be >= 0");
  if (cfg.quantize && (cfg.quant.lambda <= 0.0 || cfg.quant.lambda > 1.0))
    throw ConfigInvalid("lambda: must be in (0, 1]");

  const int m_equiv = default_inner(0, n, cfg.batch);
  RunResult res;
  Recorder rec{&p,   &cluster, &cfg.quant, !cfg.quantize, cfg.batch,
               std::max(1, cfg.loss_stride), cfg.lr, now_ns(), {}, 0};
  std::vector<std::vector<double>> views;
  auto rngs = quant_streams(cluster);

  for (int t = 0; t < cfg.steps; ++t) {
    const double eta_t = cfg.lr / (1.0 + cfg.decay * t);

    uint64_t t0 = now_ns();
    barrier_step(cluster, [&](WorkerState& w) {
      sample_batch(w, w.batch_rng, cfg.batch, n);
      vec::fill(w.u, 0.0);
      const double wgt = 1.0 / static_cast<double>(cfg.batch);
      for (std::size_t i : w.batch) p.add_sample_grad(i, w.x, wgt, w.u);
      if (cfg.on_local_grad) cfg.on_local_grad(t / m_equiv, t % m_equiv, w.id, w.u);
    });
    res.timing.compute_ns += now_ns() - t0;
    res.grad_evals +=
        static_cast<uint64_t>(cfg.batch) * static_cast<uint64_t>(cluster.workers);

    const auto local = local_views(cluster, views);
    const ExchangeResult ex =
        cfg.quantize ? exchange(local, cluster.scheme, cfg.quant, rngs, cluster.server_rng,
                                cluster.ledger)
                     : exchange_full_precision(local, cluster.scheme, cluster.ledger);
    res.timing.encode_ns += ex.encode_ns;
    res.timing.decode_ns += ex.decode_ns;
    rec.d_lambda_max = std::max(rec.d_lambda_max, ex.d_lambda_max);

    t0 = now_ns();
    barrier_step(cluster, [&](WorkerState& w) {
      for (std::size_t j = 0; j < d; ++j) w.scratch[j] = w.x[j] - eta_t * ex.mean[j];
      p.h().prox_into(eta_t, w.scratch, w.x);
    });
    res.timing.compute_ns += now_ns() - t0;

    if (cfg.on_step) cfg.on_step(t / m_equiv, t % m_equiv, cluster.local[0].x);
    rec.eta_metric = eta_t;
    rec.maybe_record(t / m_equiv, t % m_equiv, t, cfg.steps, cluster.local[0].x);
  }

  res.x_final = cluster.local[0].x;
  res.x_out = res.x_final;
  res.metrics = std::move(rec.records);
  res.final_loss = res.metrics.empty() ? p.objective(res.x_out) : res.metrics.back().loss;
  res.zeta = make_zeta(cluster.scheme, cfg.quant, !cfg.quantize, d, cluster.workers, cfg.batch,
                       rec.d_lambda_max);
  return res;
}

std::vector<ProbeRow> variance_probe(const CompositeProblem& p, const ProbeConfig& cfg) {
  if (cfg.workers < 1) throw ConfigInvalid("workers: must be >= 1");
  check_batch(cfg.batch, p.n());
  if (cfg.trials < 2) throw ConfigInvalid("trials: must be >= 2");
  if (cfg.points < 1) throw ConfigInvalid("points: must be >= 1");
  const std::size_t d = p.d();
  const double L = p.smoothness();

  RngStream point_rng = derive_stream(cfg.seed, kSharedWorker, StreamPurpose::Probe);
  std::vector<RngStream> quant_rng;
  std::vector<RngStream> batch_rng;
  for (int i = 0; i < cfg.workers; ++i) {
    quant_rng.push_back(derive_stream(cfg.seed, static_cast<uint32_t>(i), StreamPurpose::Quantize));
    batch_rng.push_back(derive_stream(cfg.seed, static_cast<uint32_t>(i), StreamPurpose::Batch));
  }
  RngStream server_rng = derive_stream(cfg.seed, kSharedWorker, StreamPurpose::Server);

  std::vector<ProbeRow> rows;
  std::vector<double> x(d), x_tilde(d);
  std::vector<std::vector<double>> local(static_cast<std::size_t>(cfg.workers),
                                         std::vector<double>(d));
  std::vector<RngStream*> rng_ptrs;
  for (auto& r : quant_rng) rng_ptrs.push_back(&r);
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch));
  std::vector<double> v(d);

  for (int pt = 0; pt < cfg.points; ++pt) {
    for (std::size_t j = 0; j < d; ++j) x_tilde[j] = point_rng.next_gaussian();
    for (std::size_t j = 0; j < d; ++j) x[j] = x_tilde[j] + 0.5 * point_rng.next_gaussian();
    const auto grad_x = p.full_grad(x);
    const auto grad_tilde = p.full_grad(x_tilde);
    const double dist_sq = vec::norm_sq(vec::sub(x, x_tilde));

    double sum = 0.0, sum_sq = 0.0;
    std::size_t d_lambda = 0;
    BitLedger scratch_ledger;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      for (int i = 0; i < cfg.workers; ++i) {
        auto& bi = batch_rng[static_cast<std::size_t>(i)];
        for (auto& idx : batch) idx = bi.next_index(p.n());
        p.batch_grad_diff(batch, x, x_tilde, local[static_cast<std::size_t>(i)]);
      }
      const ExchangeResult ex =
          exchange(local, cfg.scheme, cfg.quant, rng_ptrs, server_rng, scratch_ledger);
      d_lambda = std::max(d_lambda, ex.d_lambda_max);
      double err = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double e = ex.mean[j] + grad_tilde[j] - grad_x[j];
        err += e * e;
      }
      sum += err;
      sum_sq += err * err;
    }
    const double trials = static_cast<double>(cfg.trials);
    const double measured = sum / trials;
    const double var = std::max(0.0, sum_sq / trials - measured * measured);

    ProbeRow row;
    row.dist_sq = dist_sq;
    row.measured = measured;
    row.d_lambda = d_lambda;
    const double coeff = grid_term(cfg.scheme, cfg.quant, d) +
                         static_cast<double>(d_lambda) * (1.0 - cfg.quant.lambda) *
                             (1.0 - cfg.quant.lambda) +
                         1.0 / (static_cast<double>(cfg.workers) *
                                static_cast<double>(cfg.batch));
    row.bound = 2.0 * L * L * coeff * dist_sq;
    row.ratio = row.measured / row.bound;
    row.mc_stderr = std::sqrt(var / trials) / row.bound;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lpcsvrg
