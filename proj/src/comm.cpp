#include "lpcsvrg/comm.hpp"

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

void check_cluster(std::span<const std::vector<double>> local) {
  if (local.empty()) throw ConfigInvalid("exchange: no workers");
  for (const auto& u : local)
    if (u.size() != local[0].size()) throw DimMismatch("exchange: worker dims differ");
}

}  // namespace

const char* scheme_name(CommScheme s) {
  switch (s) {
    case CommScheme::Broadcast:
      return "broadcast";
    case CommScheme::ParamServerNoRequant:
      return "ps";
    case CommScheme::ParamServerRequant:
      return "ps-requant";
  }
  return "?";
}

CommScheme scheme_from_name(const std::string& name) {
  if (name == "broadcast") return CommScheme::Broadcast;
  if (name == "ps") return CommScheme::ParamServerNoRequant;
  if (name == "ps-requant") return CommScheme::ParamServerRequant;
  throw ConfigInvalid("scheme: must be one of broadcast, ps, ps-requant (got \"" + name + "\")");
}

int overflow_bits_for(int workers) {
  if (workers < 1) throw ConfigInvalid("workers: must be >= 1");
  int b = 0;
  while ((1 << b) < workers) ++b;
  return b;
}

uint64_t bits_nominal(CommScheme s, int workers, int bits, std::size_t dim) {
  const auto n = static_cast<uint64_t>(workers);
  const auto b = static_cast<uint64_t>(bits);
  const auto d = static_cast<uint64_t>(dim);
  switch (s) {
    case CommScheme::Broadcast:
      return (32 + b * d) * n * (n - 1);
    case CommScheme::ParamServerNoRequant:
      return n * (64 + 2 * b * d + d * static_cast<uint64_t>(overflow_bits_for(workers)));
    case CommScheme::ParamServerRequant:
      return n * (64 + 2 * b * d);
  }
  return 0;
}

uint64_t bits_full_precision(CommScheme s, int workers, std::size_t dim) {
  const auto n = static_cast<uint64_t>(workers);
  const auto d = static_cast<uint64_t>(dim);
  if (s == CommScheme::Broadcast) return 32 * d * n * (n - 1);
  return 2 * 32 * d * n;
}

double reduction_factor(CommScheme s, int workers, int bits, std::size_t dim) {
  return static_cast<double>(bits_full_precision(s, workers, dim)) /
         static_cast<double>(bits_nominal(s, workers, bits, dim));
}

uint64_t bits_epoch_full_gradient(CommScheme s, int workers, std::size_t dim) {
  return bits_full_precision(s, workers, dim);
}

void BitLedger::charge(CommScheme s, uint64_t nominal, uint64_t measured,
                       std::size_t clipped_max) {
  rows_.push_back({rows_.size(), s, nominal, measured, clipped_max});
  cumulative_nominal_ += nominal;
  cumulative_measured_ += measured;
}

void BitLedger::charge_epoch_full_gradient(CommScheme s, int workers, std::size_t dim) {
  epoch_full_gradient_ += bits_epoch_full_gradient(s, workers, dim);
}

std::string BitLedger::to_csv() const {
  std::ostringstream os;
  os << "round,scheme,nominal_bits,measured_bits,clipped_count_max\n";
  for (const auto& r : rows_) {
    os << r.round << ',' << scheme_name(r.scheme) << ',' << r.nominal_bits << ','
       << r.measured_bits << ',' << r.clipped_count_max << '\n';
  }
  return os.str();
}

ExchangeResult exchange(std::span<const std::vector<double>> local, CommScheme scheme,
                        const QuantizerConfig& cfg, std::span<RngStream*> worker_rngs,
                        RngStream& server_rng, BitLedger& ledger) {
  check_cluster(local);
  const int n = static_cast<int>(local.size());
  if (worker_rngs.size() != local.size()) throw DimMismatch("exchange: one rng per worker");
  const std::size_t d = local[0].size();
  const bool measured = ledger.mode == BitLedger::Mode::EntropyMeasured;

  ExchangeResult res;
  res.mean.assign(d, 0.0);
  res.nominal_bits = bits_nominal(scheme, n, cfg.bits, d);

  LowPrecisionTensor msg;
  msg.bits = cfg.bits;
  msg.codes.resize(d);

  if (scheme == CommScheme::Broadcast) {
    for (int i = 0; i < n; ++i) {
      const QuantizeGrid grid =
          QuantizeGrid::from_max_abs(vec::inf_norm(local[static_cast<std::size_t>(i)]), cfg.bits,
                                     cfg.lambda);
      QuantizeStats stats;
      const uint64_t t0 = now_ns();
      quantize_on_grid(local[static_cast<std::size_t>(i)], grid,
                       *worker_rngs[static_cast<std::size_t>(i)], msg.codes, &stats);
      res.encode_ns += now_ns() - t0;
      msg.delta = grid.delta;
      res.d_lambda_max = std::max(res.d_lambda_max, stats.clipped_count);
      if (measured) res.measured_bits += entropy_cost(msg).total_bits() * (n - 1);
      const uint64_t t1 = now_ns();
      for (std::size_t j = 0; j < d; ++j)
        res.mean[j] += static_cast<double>(msg.codes[j]) * msg.delta;
      res.decode_ns += now_ns() - t1;
    }
    for (std::size_t j = 0; j < d; ++j) res.mean[j] /= n;
  } else {
    // shared scale: max-reduce the per-worker inf norms. Division by the same
    // positive constant is monotone, so this equals the max of per-worker
    // deltas bit for bit.
    double max_abs = 0.0;
    for (const auto& u : local) max_abs = std::max(max_abs, vec::inf_norm(u));
    const QuantizeGrid grid = QuantizeGrid::from_max_abs(max_abs, cfg.bits, cfg.lambda);
    std::vector<int64_t> sum(d, 0);
    for (int i = 0; i < n; ++i) {
      QuantizeStats stats;
      const uint64_t t0 = now_ns();
      quantize_on_grid(local[static_cast<std::size_t>(i)], grid,
                       *worker_rngs[static_cast<std::size_t>(i)], msg.codes, &stats);
      res.encode_ns += now_ns() - t0;
      res.d_lambda_max = std::max(res.d_lambda_max, stats.clipped_count);
      msg.delta = grid.delta;
      if (measured) res.measured_bits += entropy_cost(msg).total_bits();
      for (std::size_t j = 0; j < d; ++j) sum[j] += msg.codes[j];
    }
    const uint64_t t2 = now_ns();
    for (std::size_t j = 0; j < d; ++j)
      res.mean[j] = grid.delta * static_cast<double>(sum[j]) / n;
    res.decode_ns += now_ns() - t2;

    if (scheme == CommScheme::ParamServerNoRequant) {
      if (measured) {
        LowPrecisionTensor wide;
        wide.bits = cfg.bits + overflow_bits_for(n);
        wide.delta = grid.delta;
        wide.codes.resize(d);
        for (std::size_t j = 0; j < d; ++j) wide.codes[j] = static_cast<int32_t>(sum[j]);
        res.measured_bits += entropy_cost(wide).total_bits() * static_cast<uint64_t>(n);
      }
    } else {
      // server re-quantizes the average onto the same grid; the average lies
      // inside the hull, so this stays unbiased and never counts as clipping
      const uint64_t t3 = now_ns();
      quantize_on_grid(res.mean, grid, server_rng, msg.codes, nullptr);
      res.encode_ns += now_ns() - t3;
      for (std::size_t j = 0; j < d; ++j)
        res.mean[j] = static_cast<double>(msg.codes[j]) * grid.delta;
      if (measured) res.measured_bits += entropy_cost(msg).total_bits() * static_cast<uint64_t>(n);
    }
    if (measured) res.measured_bits += 64 * static_cast<uint64_t>(n);  // scale agreement
  }

  ledger.charge(scheme, res.nominal_bits, res.measured_bits, res.d_lambda_max);
  return res;
}

ExchangeResult exchange_full_precision(std::span<const std::vector<double>> local,
                                       CommScheme scheme, BitLedger& ledger) {
  check_cluster(local);
  const int n = static_cast<int>(local.size());
  const std::size_t d = local[0].size();
  ExchangeResult res;
  res.mean.assign(d, 0.0);
  for (int i = 0; i < n; ++i)
    vec::axpy(1.0, local[static_cast<std::size_t>(i)], res.mean);
  vec::scale(res.mean, 1.0 / n);
  res.nominal_bits = bits_full_precision(scheme, n, d);
  res.measured_bits = ledger.mode == BitLedger::Mode::EntropyMeasured ? res.nominal_bits : 0;
  ledger.charge(scheme, res.nominal_bits, res.measured_bits, 0);
  return res;
}

}  // namespace lpcsvrg
