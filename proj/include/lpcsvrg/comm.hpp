#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpcsvrg/lp_codec.hpp"

namespace lpcsvrg {

// Gradient-exchange topologies:
//   Broadcast            each worker sends its own-scale message to every peer
//   ParamServerNoRequant workers agree on a shared scale, server returns the
//                        summed codes widened by ceil(log2 N) bits
//   ParamServerRequant   as above, but the server re-quantizes the average
//                        back to b bits before the downlink
enum class CommScheme { Broadcast, ParamServerNoRequant, ParamServerRequant };

const char* scheme_name(CommScheme s);
CommScheme scheme_from_name(const std::string& name);

int overflow_bits_for(int workers);  // ceil(log2 N)

// One round of quantized exchange, nominal bit cost:
//   Broadcast            (32 + b d) N (N-1)
//   ParamServerNoRequant N (64 + 2 b d + d ceil(log2 N))
//   ParamServerRequant   N (64 + 2 b d)
uint64_t bits_nominal(CommScheme s, int workers, int bits, std::size_t dim);

// One round at 32-bit full precision over the same topology; the
// parameter-server baseline pays one uplink and one downlink per worker.
uint64_t bits_full_precision(CommScheme s, int workers, std::size_t dim);

double reduction_factor(CommScheme s, int workers, int bits, std::size_t dim);

// Once-per-epoch full-batch gradient share, tracked apart from per-round cost.
uint64_t bits_epoch_full_gradient(CommScheme s, int workers, std::size_t dim);

struct LedgerRow {
  uint64_t round = 0;
  CommScheme scheme = CommScheme::Broadcast;
  uint64_t nominal_bits = 0;
  uint64_t measured_bits = 0;  // populated only in EntropyMeasured mode
  std::size_t clipped_count_max = 0;
};

class BitLedger {
 public:
  enum class Mode { Nominal, EntropyMeasured };

  Mode mode = Mode::Nominal;

  void charge(CommScheme s, uint64_t nominal, uint64_t measured, std::size_t clipped_max);
  void charge_epoch_full_gradient(CommScheme s, int workers, std::size_t dim);

  uint64_t cumulative_bits() const { return cumulative_nominal_; }
  uint64_t cumulative_measured_bits() const { return cumulative_measured_; }
  uint64_t epoch_full_gradient_bits() const { return epoch_full_gradient_; }
  std::span<const LedgerRow> rows() const { return rows_; }

  // columns: round,scheme,nominal_bits,measured_bits,clipped_count_max
  std::string to_csv() const;

 private:
  std::vector<LedgerRow> rows_;
  uint64_t cumulative_nominal_ = 0;
  uint64_t cumulative_measured_ = 0;
  uint64_t epoch_full_gradient_ = 0;
};

struct ExchangeResult {
  std::vector<double> mean;  // identical on every worker after the round
  std::size_t d_lambda_max = 0;
  uint64_t nominal_bits = 0;
  uint64_t measured_bits = 0;
  uint64_t encode_ns = 0;
  uint64_t decode_ns = 0;
};

// Runs one exchange round over all workers' local vectors. Aggregation order
// is fixed (worker 0, 1, ...) and the shared scale is a max-reduction, so the
// result cannot depend on scheduling. worker_rngs[i] supplies worker i's
// rounding lanes; server_rng is used only by ParamServerRequant.
ExchangeResult exchange(std::span<const std::vector<double>> local, CommScheme scheme,
                        const QuantizerConfig& cfg, std::span<RngStream*> worker_rngs,
                        RngStream& server_rng, BitLedger& ledger);

// Quantization bypass: plain averaging charged at 32-bit full precision.
ExchangeResult exchange_full_precision(std::span<const std::vector<double>> local,
                                       CommScheme scheme, BitLedger& ledger);

}  // namespace lpcsvrg
