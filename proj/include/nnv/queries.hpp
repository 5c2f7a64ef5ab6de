#pragma once

#include <set>
#include <vector>

#include "nnv/verifier.hpp"

namespace nnv {

struct MarginQuery {
    std::vector<double> base;  // input point, in input order
    double lo = 0.0, hi = 0.05;
    double precision = 0.002;
    std::set<int> frozen;   // input positions pinned to their base value
    int expectedClass = 0;  // 1-based; 0 accepts whatever the network says
};

struct MarginResult {
    double epsilon = 0.0;  // largest radius shown robust
    bool robustAtHi = false;
    int baseClass = 0;
    long long queries = 0;  // individual verification calls issued
    VerifyStats stats;      // summed over all calls
};

// Bisection for the largest box radius around the base point that keeps its
// classification: at each candidate radius every competitor class gets one
// query asking whether it can reach the base class's score; robustness means
// all of them are unsatisfiable. Stops when the bracket is narrower than the
// precision and reports its feasible end.
MarginResult marginSearch(const VerificationProblem& problem, const MarginQuery& query,
                          const VerifyConfig& config = {});

struct StrongClassQuery {
    int targetClass = 1;  // 1-based
    double delta = 0.0;
};

// Asks for an input whose target score beats every other output by at least
// delta.
VerificationResult strongClassQuery(const VerificationProblem& problem,
                                    const StrongClassQuery& query,
                                    const VerifyConfig& config = {});

struct SmoothNoiseQuery {
    std::vector<double> base;  // width*height pixels, row-major
    int width = 0, height = 0;
    double bound = 0.05;  // max difference of noise on 4-neighbor pixels
    int border = 3;       // pixels this close to the edge carry no noise
    int targetClass = 1;  // 1-based adversarial target
};

// Asks for a smoothly-varying additive noise image that flips the base
// image's classification to the target class.
VerificationResult smoothNoiseQuery(const VerificationProblem& problem,
                                    const SmoothNoiseQuery& query,
                                    const VerifyConfig& config = {});

// The property builders behind the runners, exposed for tests and export.
VerificationProblem buildCompetitorProblem(const VerificationProblem& problem,
                                           const MarginQuery& query, double epsilon,
                                           int competitorClass);
VerificationProblem buildStrongClassProblem(const VerificationProblem& problem,
                                            const StrongClassQuery& query);
VerificationProblem buildSmoothNoiseProblem(const VerificationProblem& problem,
                                            const SmoothNoiseQuery& query);

} // namespace nnv
