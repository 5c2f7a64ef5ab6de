#pragma once

#include <deque>
#include <vector>

#include "nnv/relaxation.hpp"
#include "nnv/sat_solver.hpp"

namespace nnv {

inline sat::Lit reluPhaseLit(const sat::PhaseVars& pv, int node, ReluPhase phase) {
    return sat::mkLit(phase == ReluPhase::Geq0 ? pv.reluGeq[node] : pv.reluLeq[node]);
}

inline sat::Lit poolEdgeLit(const sat::PhaseVars& pv, int node, int edge) {
    return sat::mkLit(pv.poolEdge[node][edge]);
}

// Sorted literal codes of every phase choice in the fixture.
std::vector<int> fixtureLitCodes(const sat::PhaseVars& pv, const PhaseFixture& fixture);

// Literal sets whose phase choices are known to admit a relaxation solution.
// A query hits when some stored set contains it; adding constraints only ever
// shrinks the feasible region, so subsets of a feasible set stay feasible.
class FeasibleCache {
public:
    explicit FeasibleCache(std::size_t capacity = 4096) : capacity_(capacity) {}

    bool contains(const std::vector<int>& sortedQuery) const;
    void insert(std::vector<int> sortedEntry); // skipped when already subsumed
    std::size_t size() const { return entries_.size(); }

private:
    std::size_t capacity_;
    std::deque<std::vector<int>> entries_;
};

// Minimization objective drawing every unfixed ReLU value toward its exact
// activation (weight 1) and every unfixed MaxPool value toward its largest
// input (weight 1/10).
std::vector<lp::Term> tightObjective(const Network& net, const RelaxationVars& vars,
                                     const PhaseFixture& fixture);

// Nodes whose LP value coincides with their exact activation output at the
// given solution, together with the phase that realizes it: for ReLU the sign
// of the weighted sum, for MaxPool the maximizing edge (lowest index on ties).
PhaseFixture tightSet(const Network& net, const RelaxationVars& vars,
                      const std::vector<double>& solution,
                      double tolerance = kSafetyMargin);

// Clause derivable from a feasible optimum of the tightness objective: when
// some unfixed ReLU keeps a value above tolerance even though the objective
// pushes all of them down, and every MaxPool value coincides with one of its
// inputs, then any completion of the fixture must run at least one
// not-fixed-inactive ReLU in its active phase. Empty result means the side
// conditions failed.
std::vector<sat::Lit> inferredClause(const Network& net, const RelaxationVars& vars,
                                     const sat::PhaseVars& pv, const PhaseFixture& fixture,
                                     const std::vector<sat::Lit>& prefix,
                                     const std::vector<double>& solution,
                                     double tolerance = kSafetyMargin);

struct FeasibilityReport {
    bool feasible = false;
    bool fromCache = false;
    std::vector<double> solution;        // LP point (empty on cache hits)
    std::vector<int> coreNodes;          // blamed nodes when infeasible
    std::vector<sat::Lit> conflictClause;
    std::vector<sat::Lit> inferred;      // optional clause when feasible
};

// LP-side analysis of phase fixtures: feasibility against the relaxation,
// blame shrinking by elastic filtering on infeasibility, and tightness
// bookkeeping plus caching on feasibility.
class FixtureAnalyzer {
public:
    FixtureAnalyzer(const VerificationProblem& problem, const sat::PhaseVars& pv,
                    bool cacheEnabled = true)
        : problem_(problem), pv_(pv), cacheEnabled_(cacheEnabled) {}

    // Pushes the fixture rows onto relax, solves with the tightness
    // objective, and pops them again. needSolution skips the cache so the
    // report always carries an LP point.
    FeasibilityReport check(Relaxation& relax, const PhaseFixture& fixture,
                            const std::vector<sat::Lit>& prefix, bool needSolution);

    // Shrinks an infeasible fixture to a small blamed subset: weaken every
    // fixture row by its node's slack, minimize the slack sum, harden the
    // worst slack (lowest node index on ties), and repeat until infeasible.
    // The result is re-verified by one strict solve; if that unexpectedly
    // succeeds the full fixture is blamed instead. Throws NotInfeasible when
    // the fixture turns out feasible (caller bug).
    std::vector<int> elasticFilter(Relaxation& relax, const PhaseFixture& fixture);

    long long lpSolves() const { return lpSolves_; }
    long long cacheHits() const { return cacheHits_; }
    long long inferredCount() const { return inferredCount_; }
    const std::vector<int>& conflictLengths() const { return conflictLengths_; }

private:
    const VerificationProblem& problem_;
    const sat::PhaseVars& pv_;
    bool cacheEnabled_;
    FeasibleCache cache_;
    long long lpSolves_ = 0;
    long long cacheHits_ = 0;
    long long inferredCount_ = 0;
    std::vector<int> conflictLengths_;
};

} // namespace nnv
