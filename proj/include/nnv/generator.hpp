#pragma once

#include <cstdint>
#include <string>

#include "nnv/network.hpp"

namespace nnv {

// Deterministic uniform sampling on top of a fixed-algorithm engine. The
// mapping from raw engine words to doubles is spelled out here so identical
// seeds give identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    double unit() { // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + unit() * (hi - lo); }
    int uniformInt(int lo, int hi) { // inclusive ends
        return lo + static_cast<int>(unit() * (hi - lo + 1));
    }
    bool chance(double p) { return unit() < p; }

private:
    std::uint64_t next();
    std::uint64_t state_;
};

struct GenShape {
    int inputs = 3;
    int reluCount = 6;
    int poolCount = 1;
    int poolFanInMax = 3; // pools draw 2..poolFanInMax predecessors
    int outputs = 2;
};

// Random test network with the property anchored at a sampled input point:
// weights in [-1, 1], biases in [-0.5, 0.5], inputs boxed to [0, 1], output
// constraints offset from the sampled point's outputs so both satisfiable and
// unsatisfiable instances occur.
VerificationProblem generateProblem(Rng& rng, const GenShape& shape);
VerificationProblem generateProblem(std::uint64_t seed, const GenShape& shape);

// Shape sampled within the fuzz-corpus caps (2-4 inputs, up to 10 ReLU, up to
// 2 MaxPool of fan-in <= 3, 2-3 outputs), then generated from the same stream.
VerificationProblem corpusProblem(std::uint64_t seed);

std::string generateText(std::uint64_t seed, const GenShape& shape);

} // namespace nnv
