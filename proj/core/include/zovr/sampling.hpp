#ifndef ZOVR_SAMPLING_HPP
#define ZOVR_SAMPLING_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace zovr {

// PCG64 (XSL-RR 128/64). One independent stream per (seed, stream_id)
// pair: the stream id selects the LCG increment, so two samplers with
// equal (seed, stream_id) replay the same sequence and distinct stream
// ids never share state.
class Pcg64 {
 public:
  Pcg64(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double next_double();
  // Uniform in [0, bound), bound >= 1. Lemire multiply-shift with
  // rejection, so the result is exactly uniform.
  std::uint64_t next_below(std::uint64_t bound);
  // Standard normal via Box-Muller (no cached spare; two uniforms per
  // draw keeps the stream position a pure function of the draw count).
  double next_gaussian();

 private:
  unsigned __int128 state_;
  unsigned __int128 inc_;
};

// Seeded sampler for mini-batches and coordinate blocks. Single-owner:
// each worker holds its own state on its own stream.
class SamplerState {
 public:
  SamplerState(std::uint64_t seed, std::uint64_t stream_id = 0);

  // Uniformly random size-b subset of {0..l-1}, sorted, no duplicates.
  std::vector<std::size_t> sample_minibatch(std::size_t l, std::size_t b);
  // Uniformly random size-Y subset of {0..N-1}, sorted.
  std::vector<std::size_t> sample_block(std::size_t n, std::size_t y);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t draws() const { return draws_; }

  Pcg64& rng() { return rng_; }

 private:
  std::vector<std::size_t> sample_subset(std::size_t n, std::size_t k,
                                         const char* what);

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t draws_ = 0;
  Pcg64 rng_;
};

}  // namespace zovr

#endif  // ZOVR_SAMPLING_HPP
