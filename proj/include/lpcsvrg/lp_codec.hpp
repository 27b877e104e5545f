#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lpcsvrg/rng.hpp"

namespace lpcsvrg {

// Signed b-bit code domain: {-2^(b-1), ..., -1, 0, 1, ..., 2^(b-1)-1} scaled
// by delta. "levels" counts the positive points, 2^(b-1)-1.
struct QuantizerConfig {
  int bits = 8;
  double lambda = 1.0;

  int levels() const { return (1 << (bits - 1)) - 1; }
  static int bits_for_levels(int levels);
};

struct LowPrecisionTensor {
  std::vector<int32_t> codes;
  double delta = 0.0;
  int bits = 2;

  std::size_t dim() const { return codes.size(); }
  bool operator==(const LowPrecisionTensor&) const = default;
};

struct QuantizeStats {
  std::size_t clipped_count = 0;
  double max_abs = 0.0;
};

// Precomputed scale + hull. hull_hi is kept as the exact product
// lambda * max_abs rather than delta * code_max so that lambda = 1 never
// misclassifies the extreme coordinate as clipped.
struct QuantizeGrid {
  double delta = 0.0;
  double hull_lo = 0.0;
  double hull_hi = 0.0;
  int bits = 2;

  int32_t code_min() const { return -(int32_t{1} << (bits - 1)); }
  int32_t code_max() const { return (int32_t{1} << (bits - 1)) - 1; }

  static QuantizeGrid from_max_abs(double max_abs, int bits, double lambda);
};

double scale_factor(std::span<const double> u, const QuantizerConfig& cfg);

// Stochastic rounding onto the grid: in-hull coordinates round to a neighbor
// with probability proportional to proximity (unbiased); out-of-hull
// coordinates clamp to the nearest endpoint and count as clipped. Coordinate j
// of each message draws its own Philox lane, so results are independent of
// evaluation order.
void quantize_on_grid(std::span<const double> u, const QuantizeGrid& grid, RngStream& rng,
                      std::span<int32_t> codes_out, QuantizeStats* stats);

std::pair<LowPrecisionTensor, QuantizeStats> quantize(std::span<const double> u,
                                                      const QuantizerConfig& cfg, RngStream& rng);

std::vector<double> decode(const LowPrecisionTensor& t);
void decode_into(const LowPrecisionTensor& t, std::span<double> out);

// Elementwise sum of two tensors sharing a scale; the result widens by
// overflow_bits. Throws ScaleMismatch / DimMismatch / Overflow.
LowPrecisionTensor add_lp(const LowPrecisionTensor& a, const LowPrecisionTensor& b,
                          int overflow_bits);

// Wire format: f32 delta, u16 bits, u32 dim, then dim codes packed bits each,
// two's-complement, little-endian bit order within bytes.
std::vector<uint8_t> serialize(const LowPrecisionTensor& t);
LowPrecisionTensor deserialize(std::span<const uint8_t> bytes);

// Measurement-mode Huffman coding of the code symbols. Header accounting uses
// the 32-bits-per-float convention for delta; the byte stream itself carries
// delta at full precision so decode restores the tensor exactly. Header and
// payload are reported separately.
struct EntropyReport {
  uint64_t header_bits = 0;
  uint64_t payload_bits = 0;
  uint64_t total_bits() const { return header_bits + payload_bits; }
};

EntropyReport entropy_cost(const LowPrecisionTensor& t);
std::vector<uint8_t> entropy_encode(const LowPrecisionTensor& t);
LowPrecisionTensor entropy_decode(std::span<const uint8_t> bytes);

}  // namespace lpcsvrg
