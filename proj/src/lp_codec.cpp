#include "lpcsvrg/lp_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "lpcsvrg/errors.hpp"
#include "lpcsvrg/vec.hpp"

namespace lpcsvrg {

namespace {

void check_bits(int bits) {
  if (bits < 2 || bits > 24) throw ConfigInvalid("bits: must be in [2, 24]");
}

class BitWriter {
 public:
  void write(uint32_t value, int nbits) {
    for (int i = 0; i < nbits; ++i) {
      if (pos_ == 0) bytes_.push_back(0);
      bytes_.back() |= static_cast<uint8_t>(((value >> i) & 1u) << pos_);
      pos_ = (pos_ + 1) & 7;
    }
  }
  std::vector<uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
  int pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}
  uint32_t read(int nbits) {
    uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) {
      if (byte_ >= bytes_.size()) throw ParseError(0, "bit stream truncated");
      v |= static_cast<uint32_t>((bytes_[byte_] >> pos_) & 1u) << i;
      pos_ = (pos_ + 1) & 7;
      if (pos_ == 0) ++byte_;
    }
    return v;
  }

 private:
  std::span<const uint8_t> bytes_;
  std::size_t byte_ = 0;
  int pos_ = 0;
};

void append_raw(std::vector<uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
T read_raw(std::span<const uint8_t> bytes, std::size_t& off) {
  if (off + sizeof(T) > bytes.size()) throw ParseError(0, "message truncated");
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

// Huffman code lengths with deterministic tie-breaking (frequency, then
// creation order with leaves first in symbol order). Alphabet <= 2^24 in
// principle but callers keep bits small; construction is O(k^2) over present
// symbols which stays tiny.
std::vector<int> huffman_lengths(const std::vector<uint64_t>& freq) {
  struct Node {
    uint64_t f;
    int order;
    int left, right;  // -1 for leaves
    int sym;
  };
  std::vector<Node> nodes;
  std::vector<int> active;
  for (std::size_t s = 0; s < freq.size(); ++s) {
    if (freq[s] == 0) continue;
    active.push_back(static_cast<int>(nodes.size()));
    nodes.push_back({freq[s], static_cast<int>(nodes.size()), -1, -1, static_cast<int>(s)});
  }
  std::vector<int> lengths(freq.size(), 0);
  if (nodes.empty()) return lengths;
  if (nodes.size() == 1) {
    lengths[static_cast<std::size_t>(nodes[0].sym)] = 1;
    return lengths;
  }
  auto better = [&](int a, int b) {
    if (nodes[a].f != nodes[b].f) return nodes[a].f < nodes[b].f;
    return nodes[a].order < nodes[b].order;
  };
  while (active.size() > 1) {
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < active.size(); ++i)
      if (better(active[i], active[i0])) i0 = i;
    const int a = active[i0];
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(i0));
    std::size_t i1 = 0;
    for (std::size_t i = 1; i < active.size(); ++i)
      if (better(active[i], active[i1])) i1 = i;
    const int b = active[i1];
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(i1));
    active.push_back(static_cast<int>(nodes.size()));
    nodes.push_back({nodes[a].f + nodes[b].f, static_cast<int>(nodes.size()), a, b, -1});
  }
  // depth-first depth assignment
  std::vector<std::pair<int, int>> stack{{active[0], 0}};
  while (!stack.empty()) {
    auto [idx, depth] = stack.back();
    stack.pop_back();
    if (nodes[idx].left < 0) {
      lengths[static_cast<std::size_t>(nodes[idx].sym)] = depth;
    } else {
      stack.emplace_back(nodes[idx].left, depth + 1);
      stack.emplace_back(nodes[idx].right, depth + 1);
    }
  }
  return lengths;
}

// Canonical codes from lengths: symbols sorted by (length, symbol).
std::vector<uint32_t> canonical_codes(const std::vector<int>& lengths) {
  std::vector<int> order;
  for (std::size_t s = 0; s < lengths.size(); ++s)
    if (lengths[s] > 0) order.push_back(static_cast<int>(s));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (lengths[static_cast<std::size_t>(a)] != lengths[static_cast<std::size_t>(b)])
      return lengths[static_cast<std::size_t>(a)] < lengths[static_cast<std::size_t>(b)];
    return a < b;
  });
  std::vector<uint32_t> codes(lengths.size(), 0);
  uint32_t code = 0;
  int prev_len = 0;
  for (int s : order) {
    const int len = lengths[static_cast<std::size_t>(s)];
    code <<= (len - prev_len);
    codes[static_cast<std::size_t>(s)] = code;
    ++code;
    prev_len = len;
  }
  return codes;
}

std::vector<uint64_t> symbol_freq(const LowPrecisionTensor& t) {
  const uint32_t offset = uint32_t{1} << (t.bits - 1);
  std::vector<uint64_t> freq(std::size_t{1} << t.bits, 0);
  for (int32_t c : t.codes) freq[static_cast<std::size_t>(c + static_cast<int32_t>(offset))]++;
  return freq;
}

uint64_t table_bits(int bits) { return (uint64_t{1} << bits) * 8; }

}  // namespace

int QuantizerConfig::bits_for_levels(int levels) {
  if (levels < 1) throw ConfigInvalid("levels: must be >= 1");
  const int b = static_cast<int>(std::lround(std::log2(levels + 1))) + 1;
  if (b < 2 || ((1 << (b - 1)) - 1) != levels)
    throw ConfigInvalid("levels: must be 2^(b-1)-1 for an integer bit width b >= 2");
  return b;
}

QuantizeGrid QuantizeGrid::from_max_abs(double max_abs, int bits, double lambda) {
  check_bits(bits);
  QuantizeGrid g;
  g.bits = bits;
  if (max_abs <= 0.0) return g;  // delta = 0: everything encodes to code 0
  g.hull_hi = lambda * max_abs;
  g.delta = g.hull_hi / static_cast<double>(g.code_max());
  g.hull_lo = -std::ldexp(g.delta, bits - 1);
  return g;
}

double scale_factor(std::span<const double> u, const QuantizerConfig& cfg) {
  return QuantizeGrid::from_max_abs(vec::inf_norm(u), cfg.bits, cfg.lambda).delta;
}

void quantize_on_grid(std::span<const double> u, const QuantizeGrid& grid, RngStream& rng,
                      std::span<int32_t> codes_out, QuantizeStats* stats) {
  if (codes_out.size() != u.size()) throw DimMismatch("quantize: output size != input size");
  const uint64_t msg = rng.begin_message();
  std::size_t clipped = 0;
  if (grid.delta == 0.0) {
    std::fill(codes_out.begin(), codes_out.end(), 0);
    if (stats) *stats = {0, 0.0};
    return;
  }
  const double delta = grid.delta;
  const int32_t cmin = grid.code_min();
  const int32_t cmax = grid.code_max();
  const std::size_t d = u.size();
  std::array<uint32_t, 4> lanes{};
  for (std::size_t j = 0; j < d; ++j) {
    if ((j & 3) == 0) lanes = rng.msg_block(msg, j >> 2);
    const double x = u[j];
    int32_t code;
    if (x > grid.hull_hi) {
      code = cmax;
      ++clipped;
    } else if (x < grid.hull_lo) {
      code = cmin;
      ++clipped;
    } else {
      const double t = x / delta;
      const double fl = std::floor(t);
      const double frac = t - fl;
      int64_t z = static_cast<int64_t>(fl);
      if (frac != 0.0) {
        const double r = static_cast<double>(lanes[j & 3]) * 0x1.0p-32;
        if (r < frac) ++z;
      }
      // in-hull by the tests above; clamp only absorbs 1-ulp wobble at the edges
      if (z > cmax) z = cmax;
      if (z < cmin) z = cmin;
      code = static_cast<int32_t>(z);
    }
    codes_out[j] = code;
  }
  if (stats) *stats = {clipped, vec::inf_norm(u)};
}

std::pair<LowPrecisionTensor, QuantizeStats> quantize(std::span<const double> u,
                                                      const QuantizerConfig& cfg, RngStream& rng) {
  if (cfg.lambda <= 0.0 || cfg.lambda > 1.0) throw ConfigInvalid("lambda: must be in (0, 1]");
  const QuantizeGrid grid = QuantizeGrid::from_max_abs(vec::inf_norm(u), cfg.bits, cfg.lambda);
  LowPrecisionTensor t;
  t.bits = cfg.bits;
  t.delta = grid.delta;
  t.codes.resize(u.size());
  QuantizeStats stats;
  quantize_on_grid(u, grid, rng, t.codes, &stats);
  return {std::move(t), stats};
}

std::vector<double> decode(const LowPrecisionTensor& t) {
  std::vector<double> out(t.dim());
  decode_into(t, out);
  return out;
}

void decode_into(const LowPrecisionTensor& t, std::span<double> out) {
  if (out.size() != t.dim()) throw DimMismatch("decode: output size != tensor dim");
  for (std::size_t j = 0; j < t.dim(); ++j) out[j] = static_cast<double>(t.codes[j]) * t.delta;
}

LowPrecisionTensor add_lp(const LowPrecisionTensor& a, const LowPrecisionTensor& b,
                          int overflow_bits) {
  if (a.dim() != b.dim()) throw DimMismatch("add_lp: dimensions differ");
  if (a.delta != b.delta) throw ScaleMismatch("add_lp: scales differ");
  if (overflow_bits < 0) throw ConfigInvalid("overflow_bits: must be >= 0");
  LowPrecisionTensor out;
  out.delta = a.delta;
  out.bits = std::max(a.bits, b.bits) + overflow_bits;
  if (out.bits > 31) throw Overflow("add_lp: widened width exceeds 31 bits");
  const int64_t cmin = -(int64_t{1} << (out.bits - 1));
  const int64_t cmax = (int64_t{1} << (out.bits - 1)) - 1;
  out.codes.resize(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) {
    const int64_t s = int64_t{a.codes[j]} + int64_t{b.codes[j]};
    if (s < cmin || s > cmax) throw Overflow("add_lp: code sum does not fit widened width");
    out.codes[j] = static_cast<int32_t>(s);
  }
  return out;
}

std::vector<uint8_t> serialize(const LowPrecisionTensor& t) {
  check_bits(t.bits);
  std::vector<uint8_t> out;
  const float delta32 = static_cast<float>(t.delta);
  const uint16_t bits16 = static_cast<uint16_t>(t.bits);
  const uint32_t dim32 = static_cast<uint32_t>(t.dim());
  append_raw(out, &delta32, 4);
  append_raw(out, &bits16, 2);
  append_raw(out, &dim32, 4);
  BitWriter w;
  const uint32_t mask = (t.bits == 32) ? 0xFFFFFFFFu : ((uint32_t{1} << t.bits) - 1);
  for (int32_t c : t.codes) w.write(static_cast<uint32_t>(c) & mask, t.bits);
  const auto packed = w.take();
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

LowPrecisionTensor deserialize(std::span<const uint8_t> bytes) {
  std::size_t off = 0;
  LowPrecisionTensor t;
  t.delta = static_cast<double>(read_raw<float>(bytes, off));
  t.bits = read_raw<uint16_t>(bytes, off);
  check_bits(t.bits);
  const uint32_t dim = read_raw<uint32_t>(bytes, off);
  BitReader r(bytes.subspan(off));
  t.codes.resize(dim);
  const uint32_t sign = uint32_t{1} << (t.bits - 1);
  for (uint32_t j = 0; j < dim; ++j) {
    uint32_t raw = r.read(t.bits);
    if (raw & sign) raw |= ~((uint32_t{1} << t.bits) - 1);  // sign-extend
    t.codes[j] = static_cast<int32_t>(raw);
  }
  return t;
}

EntropyReport entropy_cost(const LowPrecisionTensor& t) {
  const auto freq = symbol_freq(t);
  const auto lengths = huffman_lengths(freq);
  EntropyReport rep;
  rep.header_bits = 32 + 16 + 32 + table_bits(t.bits);
  for (std::size_t s = 0; s < freq.size(); ++s)
    rep.payload_bits += freq[s] * static_cast<uint64_t>(lengths[s]);
  return rep;
}

std::vector<uint8_t> entropy_encode(const LowPrecisionTensor& t) {
  check_bits(t.bits);
  const auto freq = symbol_freq(t);
  const auto lengths = huffman_lengths(freq);
  const auto codes = canonical_codes(lengths);
  std::vector<uint8_t> out;
  append_raw(out, &t.delta, 8);  // full precision in the stream; charged as 32 bits
  const uint16_t bits16 = static_cast<uint16_t>(t.bits);
  const uint32_t dim32 = static_cast<uint32_t>(t.dim());
  append_raw(out, &bits16, 2);
  append_raw(out, &dim32, 4);
  for (int len : lengths) {
    if (len > 255) throw Overflow("entropy_encode: code length exceeds 255");
    out.push_back(static_cast<uint8_t>(len));
  }
  BitWriter w;
  const uint32_t offset = uint32_t{1} << (t.bits - 1);
  for (int32_t c : t.codes) {
    const auto s = static_cast<std::size_t>(c + static_cast<int32_t>(offset));
    const int len = lengths[s];
    const uint32_t code = codes[s];
    for (int i = len - 1; i >= 0; --i) w.write((code >> i) & 1u, 1);  // MSB-first
  }
  const auto packed = w.take();
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

LowPrecisionTensor entropy_decode(std::span<const uint8_t> bytes) {
  std::size_t off = 0;
  LowPrecisionTensor t;
  t.delta = read_raw<double>(bytes, off);
  t.bits = read_raw<uint16_t>(bytes, off);
  check_bits(t.bits);
  const uint32_t dim = read_raw<uint32_t>(bytes, off);
  const std::size_t nsym = std::size_t{1} << t.bits;
  if (off + nsym > bytes.size()) throw ParseError(0, "entropy stream truncated");
  std::vector<int> lengths(nsym);
  for (std::size_t s = 0; s < nsym; ++s) lengths[s] = bytes[off + s];
  off += nsym;
  const auto codes = canonical_codes(lengths);
  // canonical decode: walk bits MSB-first, match (length, code) pairs
  int max_len = 0;
  for (std::size_t s = 0; s < nsym; ++s) max_len = std::max(max_len, lengths[s]);
  BitReader r(bytes.subspan(off));
  t.codes.resize(dim);
  const int32_t offset = int32_t{1} << (t.bits - 1);
  for (uint32_t j = 0; j < dim; ++j) {
    uint32_t acc = 0;
    int len = 0;
    bool found = false;
    while (len < max_len && !found) {
      acc = (acc << 1) | r.read(1);
      ++len;
      for (std::size_t s = 0; s < nsym; ++s) {
        if (lengths[s] == len && codes[s] == acc) {
          t.codes[j] = static_cast<int32_t>(s) - offset;
          found = true;
          break;
        }
      }
    }
    if (!found) throw ParseError(0, "entropy stream: no symbol matches");
  }
  return t;
}

}  // namespace lpcsvrg
