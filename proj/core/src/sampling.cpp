#include "zovr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "zovr/error.hpp"

namespace zovr {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Pcg64::Pcg64(std::uint64_t seed, std::uint64_t stream_id) {
  // Expand the 64-bit inputs to 128-bit state/increment via splitmix.
  std::uint64_t s = seed;
  unsigned __int128 init_state =
      (static_cast<unsigned __int128>(splitmix64(s)) << 64) | splitmix64(s);
  std::uint64_t t = stream_id;
  unsigned __int128 init_seq =
      (static_cast<unsigned __int128>(splitmix64(t)) << 64) | splitmix64(t);
  inc_ = (init_seq << 1) | 1;
  state_ = 0;
  next();
  state_ += init_state;
  next();
}

std::uint64_t Pcg64::next() {
  constexpr unsigned __int128 mult =
      (static_cast<unsigned __int128>(2549297995355413924ULL) << 64) |
      4865540595714422341ULL;
  state_ = state_ * mult + inc_;
  std::uint64_t hi = static_cast<std::uint64_t>(state_ >> 64);
  std::uint64_t lo = static_cast<std::uint64_t>(state_);
  std::uint64_t xored = hi ^ lo;
  unsigned rot = static_cast<unsigned>(state_ >> 122);
  return (xored >> rot) | (xored << ((64 - rot) & 63));
}

double Pcg64::next_double() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Pcg64::next_below(std::uint64_t bound) {
  if (bound == 0) throw ConfigError("next_below: bound must be positive");
  // Lemire's unbiased bounded generation.
  std::uint64_t x = next();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  std::uint64_t l = static_cast<std::uint64_t>(m);
  if (l < bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    while (l < threshold) {
      x = next();
      m = static_cast<unsigned __int128>(x) * bound;
      l = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Pcg64::next_gaussian() {
  // u1 in (0, 1]: shift-by-11 then add one ulp-scale offset so log() is
  // finite.
  double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

SamplerState::SamplerState(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), rng_(seed, stream_id) {}

std::vector<std::size_t> SamplerState::sample_subset(std::size_t n,
                                                     std::size_t k,
                                                     const char* what) {
  if (k < 1 || k > n) {
    throw ConfigError(std::string(what) + ": subset size " +
                      std::to_string(k) + " out of range [1, " +
                      std::to_string(n) + "]");
  }
  // Floyd's algorithm: uniform over all C(n, k) subsets.
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    std::size_t r = static_cast<std::size_t>(rng_.next_below(j + 1));
    if (std::find(out.begin(), out.end(), r) != out.end()) {
      out.push_back(j);
    } else {
      out.push_back(r);
    }
  }
  std::sort(out.begin(), out.end());
  ++draws_;
  return out;
}

std::vector<std::size_t> SamplerState::sample_minibatch(std::size_t l,
                                                        std::size_t b) {
  return sample_subset(l, b, "sample_minibatch");
}

std::vector<std::size_t> SamplerState::sample_block(std::size_t n,
                                                    std::size_t y) {
  return sample_subset(n, y, "sample_block");
}

}  // namespace zovr
