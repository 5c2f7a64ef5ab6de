#pragma once

#include <vector>

#include "nnv/fixture_analysis.hpp"
#include "nnv/network.hpp"
#include "nnv/relaxation.hpp"

namespace nnv {

struct VerifyConfig {
    double timeBudgetSec = 3600.0;
    long long conflictBudget = -1; // negative: unlimited
    bool useCache = true;
    bool useInference = true;
    bool useRefinement = true;
};

struct VerifyStats {
    long long lpSolves = 0;
    long long satConflicts = 0;
    long long decisions = 0;
    long long learnedClauses = 0;
    long long inferenceClauses = 0;
    long long cacheHits = 0;
    long long restarts = 0;
    long long idleIterations = 0; // progress guard; must stay zero
    int refineSweeps = 0;
    double wallMs = 0.0;
};

enum class Status { Satisfiable, Unsatisfiable };

struct VerificationResult {
    Status status = Status::Unsatisfiable;
    std::vector<double> witness; // input values, in input order (Satisfiable)
    Valuation valuation;         // full forward evaluation of the witness
    VerifyStats stats;
};

// Decides whether some input in the box satisfies the property: refines
// bounds, encodes phases one-hot, and interleaves clause-learning SAT steps
// with interval phase inference and LP feasibility checks until a complete
// feasible fixture yields a witness or the clause set collapses at the root.
VerificationResult verify(const VerificationProblem& problem, const VerifyConfig& config = {});

struct OracleResult {
    Status status = Status::Unsatisfiable;
    std::vector<double> witness;
    Valuation valuation;
    long long fixtureSpace = 0;
    long long fixturesTried = 0;
};

// Ground-truth decision procedure: enumerates every complete phase fixture
// over the initial bounds and solves the exact LP of each. Throws TooLarge
// when the fixture space exceeds `cap`.
OracleResult bruteForceOracle(const VerificationProblem& problem, long long cap = 1 << 20);

} // namespace nnv
