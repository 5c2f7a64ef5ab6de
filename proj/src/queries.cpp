#include "nnv/queries.hpp"

#include <algorithm>
#include <cmath>

namespace nnv {

namespace {

void accumulate(VerifyStats& into, const VerifyStats& part) {
    into.lpSolves += part.lpSolves;
    into.satConflicts += part.satConflicts;
    into.decisions += part.decisions;
    into.learnedClauses += part.learnedClauses;
    into.inferenceClauses += part.inferenceClauses;
    into.cacheHits += part.cacheHits;
    into.restarts += part.restarts;
    into.idleIterations += part.idleIterations;
    into.wallMs += part.wallMs;
}

void pinInput(std::vector<LinearConstraint>& property, int node, double value) {
    property.push_back({Sense::GreaterEq, value, {{1.0, node}}});
    property.push_back({Sense::LessEq, value, {{1.0, node}}});
}

} // namespace

VerificationProblem buildCompetitorProblem(const VerificationProblem& problem,
                                           const MarginQuery& query, double epsilon,
                                           int competitorClass) {
    const Network& net = problem.net;
    VerificationProblem out = problem;
    for (int p = 0; p < net.inputCount(); ++p) {
        int node = net.inputs()[p];
        if (query.frozen.count(p)) {
            pinInput(out.property, node, query.base[p]);
        } else {
            out.property.push_back(
                {Sense::GreaterEq, query.base[p] - epsilon, {{1.0, node}}});
            out.property.push_back({Sense::LessEq, query.base[p] + epsilon, {{1.0, node}}});
        }
    }
    int yj = net.outputs()[competitorClass - 1];
    int yb = net.outputs()[(query.expectedClass > 0 ? query.expectedClass
                                                    : classify(net, query.base)) -
                           1];
    out.property.push_back({Sense::GreaterEq, 0.0, {{1.0, yj}, {-1.0, yb}}});
    return out;
}

MarginResult marginSearch(const VerificationProblem& problem, const MarginQuery& query,
                          const VerifyConfig& config) {
    const Network& net = problem.net;
    if (static_cast<int>(query.base.size()) != net.inputCount())
        throw Error(ErrorCode::InvalidQuery, "base point size differs from the input count");
    if (!(query.lo >= 0.0) || !(query.lo < query.hi) || !(query.precision > 0.0))
        throw Error(ErrorCode::InvalidQuery, "need 0 <= lo < hi and positive precision");
    for (int p : query.frozen)
        if (p < 0 || p >= net.inputCount())
            throw Error(ErrorCode::InvalidQuery, "frozen position out of range");

    MarginResult res;
    res.baseClass = classify(net, query.base);
    if (query.expectedClass > 0 && res.baseClass != query.expectedClass)
        throw Error(ErrorCode::MisclassifiedBase,
                    "the network classifies the base point differently");
    MarginQuery fixed = query;
    fixed.expectedClass = res.baseClass;

    auto robust = [&](double eps) {
        for (int j = 1; j <= net.outputCount(); ++j) {
            if (j == res.baseClass)
                continue;
            VerificationProblem sub = buildCompetitorProblem(problem, fixed, eps, j);
            VerificationResult r = verify(sub, config);
            ++res.queries;
            accumulate(res.stats, r.stats);
            if (r.status == Status::Satisfiable)
                return false;
        }
        return true;
    };

    if (robust(query.hi)) {
        res.robustAtHi = true;
        res.epsilon = query.hi;
        return res;
    }
    double lo = query.lo, hi = query.hi;
    while (hi - lo > query.precision) {
        double mid = 0.5 * (lo + hi);
        if (robust(mid))
            lo = mid;
        else
            hi = mid;
    }
    res.epsilon = lo;
    return res;
}

VerificationProblem buildStrongClassProblem(const VerificationProblem& problem,
                                            const StrongClassQuery& query) {
    const Network& net = problem.net;
    if (query.targetClass < 1 || query.targetClass > net.outputCount())
        throw Error(ErrorCode::InvalidQuery, "target class out of range");
    if (query.delta < 0.0)
        throw Error(ErrorCode::InvalidQuery, "negative margin");
    VerificationProblem out = problem;
    int yi = net.outputs()[query.targetClass - 1];
    for (int j = 1; j <= net.outputCount(); ++j) {
        if (j == query.targetClass)
            continue;
        int yj = net.outputs()[j - 1];
        out.property.push_back({Sense::GreaterEq, query.delta, {{1.0, yi}, {-1.0, yj}}});
    }
    return out;
}

VerificationResult strongClassQuery(const VerificationProblem& problem,
                                    const StrongClassQuery& query,
                                    const VerifyConfig& config) {
    return verify(buildStrongClassProblem(problem, query), config);
}

VerificationProblem buildSmoothNoiseProblem(const VerificationProblem& problem,
                                            const SmoothNoiseQuery& query) {
    const Network& net = problem.net;
    int w = query.width, h = query.height;
    if (w <= 0 || h <= 0 || w * h != net.inputCount())
        throw Error(ErrorCode::GridMismatch, "grid does not cover the network inputs");
    if (static_cast<int>(query.base.size()) != w * h)
        throw Error(ErrorCode::GridMismatch, "base image does not match the grid");
    if (query.bound < 0.0 || query.border < 0)
        throw Error(ErrorCode::InvalidQuery, "negative bound or border");

    int baseClass = classify(net, query.base);
    if (query.targetClass < 1 || query.targetClass > net.outputCount() ||
        query.targetClass == baseClass)
        throw Error(ErrorCode::InvalidQuery,
                    "target class out of range or equal to the base classification");

    VerificationProblem out = problem;
    auto at = [&](int r, int c) { return r * w + c; };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int p = at(r, c);
            if (std::min(std::min(r, c), std::min(h - 1 - r, w - 1 - c)) < query.border)
                pinInput(out.property, net.inputs()[p], query.base[p]);
        }
    }
    // noise(p) = x(p) - base(p); adjacent noise values stay within the bound
    auto smooth = [&](int p, int q) {
        int xp = net.inputs()[p], xq = net.inputs()[q];
        double shift = query.base[p] - query.base[q];
        out.property.push_back(
            {Sense::LessEq, shift + query.bound, {{1.0, xp}, {-1.0, xq}}});
        out.property.push_back(
            {Sense::LessEq, -shift + query.bound, {{1.0, xq}, {-1.0, xp}}});
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (c + 1 < w)
                smooth(at(r, c), at(r, c + 1));
            if (r + 1 < h)
                smooth(at(r, c), at(r + 1, c));
        }
    }
    int yt = net.outputs()[query.targetClass - 1];
    int yb = net.outputs()[baseClass - 1];
    out.property.push_back({Sense::GreaterEq, 0.0, {{1.0, yt}, {-1.0, yb}}});
    return out;
}

VerificationResult smoothNoiseQuery(const VerificationProblem& problem,
                                    const SmoothNoiseQuery& query,
                                    const VerifyConfig& config) {
    return verify(buildSmoothNoiseProblem(problem, query), config);
}

} // namespace nnv
