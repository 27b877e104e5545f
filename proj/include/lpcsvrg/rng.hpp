#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace lpcsvrg {

// Philox 4x32-10 counter-based generator. Stateless: every 128-bit counter
// maps to an independent 128-bit output block under a 64-bit key, so replays
// and thread schedules cannot change what any (stream, message, coordinate)
// tuple draws.
struct Philox {
  static constexpr uint32_t kMulA = 0xD2511F53u;
  static constexpr uint32_t kMulB = 0xCD9E8D57u;
  static constexpr uint32_t kWeylA = 0x9E3779B9u;
  static constexpr uint32_t kWeylB = 0xBB67AE85u;

  static std::array<uint32_t, 4> block(uint64_t key, std::array<uint32_t, 4> ctr) {
    uint32_t k0 = static_cast<uint32_t>(key);
    uint32_t k1 = static_cast<uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      const uint64_t p0 = uint64_t{kMulA} * ctr[0];
      const uint64_t p1 = uint64_t{kMulB} * ctr[2];
      ctr = {static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
             static_cast<uint32_t>(p1),
             static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
             static_cast<uint32_t>(p0)};
      k0 += kWeylA;
      k1 += kWeylB;
    }
    return ctr;
  }

  static uint64_t hash64(uint64_t key, uint64_t a, uint64_t b) {
    const auto out = block(key, {static_cast<uint32_t>(a), static_cast<uint32_t>(a >> 32),
                                 static_cast<uint32_t>(b), static_cast<uint32_t>(b >> 32)});
    return out[0] | (uint64_t{out[1]} << 32);
  }
};

// A logical stream = Philox key + counters. Sequential draws and per-message
// coordinate lanes live in disjoint counter subspaces (tag word), so index
// sampling can never collide with rounding randomness.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(uint64_t key) : key_(key) {}

  uint64_t key() const { return key_; }

  uint64_t next_u64() {
    const auto out = Philox::block(
        key_, {static_cast<uint32_t>(seq_), static_cast<uint32_t>(seq_ >> 32), 0u, kSeqTag});
    ++seq_;
    return out[0] | (uint64_t{out[1]} << 32);
  }

  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_gaussian() {
    double u1 = next_unit();
    const double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform index in [0, n) via multiply-shift; bias < n / 2^64.
  uint64_t next_index(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  // Reserves a fresh message id; coordinate lanes under it are addressed
  // statelessly via msg_block().
  uint64_t begin_message() { return msg_++; }

  // Block of four 32-bit lanes for coordinates [4*jblk, 4*jblk+3] of message msg.
  std::array<uint32_t, 4> msg_block(uint64_t msg, uint64_t jblk) const {
    return Philox::block(key_, {static_cast<uint32_t>(jblk), static_cast<uint32_t>(msg),
                                static_cast<uint32_t>(msg >> 32), kMsgTag});
  }

  double unit_lane(uint64_t msg, uint64_t j) const {
    return static_cast<double>(msg_block(msg, j >> 2)[j & 3]) * 0x1.0p-32;
  }

 private:
  static constexpr uint32_t kSeqTag = 0x5eedu;
  static constexpr uint32_t kMsgTag = 0xc0deu;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  uint64_t key_ = 0;
  uint64_t seq_ = 0;
  uint64_t msg_ = 0;
};

enum class StreamPurpose : uint32_t {
  Quantize = 1,
  Batch = 2,
  SharedBatch = 3,
  Server = 4,
  OutputChoice = 5,
  DataGen = 6,
  Probe = 7,
};

inline constexpr uint32_t kSharedWorker = 0xFFFFFFFFu;

inline RngStream derive_stream(uint64_t master_seed, uint32_t worker, StreamPurpose purpose) {
  const uint64_t tag = (uint64_t{worker} << 32) | static_cast<uint32_t>(purpose);
  return RngStream(Philox::hash64(master_seed, tag, 0x1bd11bdaa9fc1a22ull));
}

}  // namespace lpcsvrg
