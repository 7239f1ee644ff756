// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace sparsevit {

// Seeded generator producing the same stream on every platform. The
// standard distributions are implementation-defined, so the mapping from
// raw engine output to doubles is done by hand here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // 53-bit uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform in (-scale, scale).
    double symmetric(double scale) { return uniform(-scale, scale); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
    std::mt19937_64 engine_;
};

} // namespace sparsevit
