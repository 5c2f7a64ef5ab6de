#pragma once

#include <vector>

#include "nnv/fixture_analysis.hpp"
#include "nnv/relaxation.hpp"
#include "nnv/sat_solver.hpp"

namespace nnv {

// Per-node value intervals under a partial phase fixture, always contained in
// the global bounds. `conflict` marks an interval that crossed, meaning the
// fixture cannot be realized.
struct FixtureIntervals {
    std::vector<double> lo, hi;
    std::vector<double> preLo, preHi; // ReLU weighted-sum intervals
    bool conflict = false;
    int conflictNode = -1;
    int sweeps = 0; // instrumentation: always 2
};

// One forward interval sweep in declaration order respecting the fixture's
// pins, then one backward sweep over MaxPool nodes: the pool interval caps
// every input from above, and when all inputs but one top out below the pool's
// floor, the surviving input inherits that floor.
FixtureIntervals propagateIntervals(const Network& net, const BoundsMap& bounds,
                                    const PhaseFixture& fixture);

struct InferenceOutcome {
    bool conflict = false;
    std::vector<std::vector<sat::Lit>> clauses;
    std::vector<std::pair<int, sat::Lit>> implied; // (node, forced literal)
};

// Interval-derived phase implications, each wrapped as a clause firing under
// the fixture's decision prefix: a ReLU with a strictly positive weighted-sum
// or value floor runs active, one with a strictly negative weighted-sum
// ceiling runs inactive, and a MaxPool follows a dominating input or the only
// input able to reach its floor. A crossed interval instead yields the clause
// rejecting the prefix. Nodes already in the fixture or pinned by bounds are
// skipped.
InferenceOutcome inferNodePhases(const Network& net, const BoundsMap& bounds,
                                 const PhaseFixture& fixture,
                                 const std::vector<sat::Lit>& prefix,
                                 const sat::PhaseVars& pv,
                                 const std::vector<bool>& phasePinned);

} // namespace nnv
