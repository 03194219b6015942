#pragma once

#include <cstdint>

namespace nlos {

/// Counter-based deterministic random stream.
///
/// Each draw hashes (key, counter) through the SplitMix64 finalizer, so a
/// stream is a pure function of its seed and position: substreams can be
/// derived per array element and consumed from any thread without shared
/// state, and outputs are identical across platforms and thread counts.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key), counter_(0) {}

    /// Independent stream for (seed, stream_id, lane). Lanes separate
    /// different uses of the same element (e.g. shot noise vs read noise).
    static CounterRng substream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t lane = 0);

    std::uint64_t next_u64();
    /// Uniform on (0, 1); never returns 0 so log(u) is safe.
    double uniform();
    /// Standard normal via the Box-Muller transform (two uniforms per draw).
    double normal();
    /// Poisson with the given mean. Sequential inversion for mean < 10,
    /// Hormann's PTRS transformed rejection otherwise. Returns a double so
    /// means up to ~1e15 keep exact integer counts.
    double poisson(double mean);

  private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace nlos
