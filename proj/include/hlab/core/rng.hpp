#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hlab {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Independent engine for the stream addressed by (seed, ids...).
/// Streams are a pure function of their address, so results do not depend
/// on scheduling or on how many other streams exist.
inline Engine make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = detail::splitmix64(seed);
  for (auto id : ids) h = detail::splitmix64(h ^ detail::splitmix64(id + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

/// Standard normal sampler bound to one engine.
class NormalSource {
 public:
  explicit NormalSource(Engine engine) : engine_(std::move(engine)) {}
  double operator()() { return dist_(engine_); }
  double uniform() { return unif_(engine_); }
  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace hlab
