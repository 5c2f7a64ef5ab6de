#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nnv/linear_program.hpp"
#include "nnv/network.hpp"

namespace nnv {

struct NodeBounds {
    double lo = -kInf, hi = kInf;       // value interval
    double preLo = -kInf, preHi = kInf; // weighted-sum interval (ReLU only)
};

struct BoundsMap {
    std::vector<NodeBounds> node;
};

enum class ReluPhase { Leq0, Geq0 };

// Phase choices for a subset of the ReLU and MaxPool nodes. MaxPool entries
// name the chosen incoming edge by position.
struct PhaseFixture {
    std::map<int, ReluPhase> relu;
    std::map<int, int> pool;

    bool empty() const { return relu.empty() && pool.empty(); }
    std::size_t size() const { return relu.size() + pool.size(); }
    bool contains(int node) const { return relu.count(node) || pool.count(node); }
};

struct RelaxationVars {
    std::vector<int> value; // LP variable of each node's value
    std::vector<int> pre;   // LP variable of each ReLU's weighted sum, -1 otherwise
};

struct Relaxation {
    lp::LinearProgram lp;
    RelaxationVars vars;
    // Nodes whose phase is decided by the encoding itself: ReLU nodes with a
    // sign-definite weighted-sum interval and single-predecessor MaxPools.
    std::vector<bool> phasePinned;
};

// Interval sweep over the network in declaration order. Input intervals come
// from the box; ReLU intervals clamp the weighted-sum interval at zero and
// MaxPool intervals take the componentwise max.
BoundsMap computeInitialBounds(const VerificationProblem& problem);

// Linear outer approximation of the network plus the property constraints.
// Batch "net" holds the network rows, batch "property" the property rows.
Relaxation buildRelaxation(const VerificationProblem& problem, const BoundsMap& bounds);

struct RefineStats {
    int sweeps = 0;
    long long nodeUpdates = 0;
    int minNodeUpdates = 0;
    std::vector<double> sweepChange;
    bool stoppedOnSmallChange = false;
    bool stoppedOnUpdateCap = false;
    long long lpSolves = 0;
};

struct RefineResult {
    BoundsMap bounds;
    bool infeasible = false;
    RefineStats stats;
};

// Optimization-based bound tightening: minimize +v and -v for every node
// variable in declaration order, rebuild the relaxation after each full
// sweep, and stop when a sweep changes the bounds by less than 1.0 in total,
// or once 5000 node updates have accumulated and every node was updated at
// least three times. Bounds only ever tighten. An infeasible sub-solve means
// the whole problem is unsatisfiable.
RefineResult refineBounds(const VerificationProblem& problem, Relaxation& relax,
                          const BoundsMap& initial);

// Rows pinning the fixed nodes to their phases, tagged with the owning node.
// ReLU <=0 contributes {value = 0, pre <= 0}; ReLU >=0 contributes
// {value <= pre}; a MaxPool fixed to an edge contributes {value = pred value}.
std::vector<std::pair<int, lp::Row>> fixtureConstraints(const VerificationProblem& problem,
                                                        const RelaxationVars& vars,
                                                        const PhaseFixture& fixture);

// CPLEX-style LP text: Minimize / Subject To / Bounds / End with constraint
// names c1..cN in row order. Deterministic.
std::string exportLp(const lp::LinearProgram& program);

} // namespace nnv
