#include "nnv/phase_inference.hpp"

#include <algorithm>
#include <cmath>

namespace nnv {

namespace {

constexpr double kEps = kSafetyMargin;

} // namespace

FixtureIntervals propagateIntervals(const Network& net, const BoundsMap& bounds,
                                    const PhaseFixture& fixture) {
    FixtureIntervals iv;
    int n = net.size();
    iv.lo.resize(n);
    iv.hi.resize(n);
    iv.preLo.assign(n, -kInf);
    iv.preHi.assign(n, kInf);

    auto fail = [&](int node) {
        iv.conflict = true;
        iv.conflictNode = node;
    };
    auto clampToGlobal = [&](int i) {
        iv.lo[i] = std::max(iv.lo[i], bounds.node[i].lo);
        iv.hi[i] = std::min(iv.hi[i], bounds.node[i].hi);
        if (iv.lo[i] > iv.hi[i] + kEps)
            fail(i);
    };

    ++iv.sweeps;
    for (int i = 0; i < n && !iv.conflict; ++i) {
        const Node& nd = net.node(i);
        switch (nd.type) {
        case NodeType::Input:
            iv.lo[i] = bounds.node[i].lo;
            iv.hi[i] = bounds.node[i].hi;
            break;
        case NodeType::Linear:
        case NodeType::ReLU: {
            double lo = nd.bias, hi = nd.bias;
            for (const InEdge& e : nd.in) {
                if (e.weight >= 0) {
                    lo += e.weight * iv.lo[e.src];
                    hi += e.weight * iv.hi[e.src];
                } else {
                    lo += e.weight * iv.hi[e.src];
                    hi += e.weight * iv.lo[e.src];
                }
            }
            if (nd.type == NodeType::Linear) {
                iv.lo[i] = lo;
                iv.hi[i] = hi;
                clampToGlobal(i);
                break;
            }
            iv.preLo[i] = std::max(lo, bounds.node[i].preLo);
            iv.preHi[i] = std::min(hi, bounds.node[i].preHi);
            if (iv.preLo[i] > iv.preHi[i] + kEps) {
                fail(i);
                break;
            }
            auto it = fixture.relu.find(i);
            if (it != fixture.relu.end() && it->second == ReluPhase::Leq0) {
                if (iv.preLo[i] > kEps) {
                    fail(i);
                    break;
                }
                iv.preHi[i] = std::min(iv.preHi[i], 0.0);
                iv.lo[i] = iv.hi[i] = 0.0;
            } else if (it != fixture.relu.end()) { // fixed active: value equals the sum
                if (iv.preHi[i] < -kEps) {
                    fail(i);
                    break;
                }
                iv.preLo[i] = std::max(iv.preLo[i], 0.0);
                iv.lo[i] = iv.preLo[i];
                iv.hi[i] = std::max(iv.preHi[i], 0.0);
            } else {
                iv.lo[i] = std::max(iv.preLo[i], 0.0);
                iv.hi[i] = std::max(iv.preHi[i], 0.0);
            }
            clampToGlobal(i);
            break;
        }
        case NodeType::MaxPool: {
            double lo = -kInf, hi = -kInf;
            for (const InEdge& e : nd.in) {
                lo = std::max(lo, iv.lo[e.src]);
                hi = std::max(hi, iv.hi[e.src]);
            }
            auto it = fixture.pool.find(i);
            if (it != fixture.pool.end()) {
                int src = nd.in[it->second].src;
                lo = std::max(lo, iv.lo[src]);
                hi = std::min(hi, iv.hi[src]);
            }
            iv.lo[i] = lo;
            iv.hi[i] = hi;
            clampToGlobal(i);
            break;
        }
        }
    }
    if (iv.conflict)
        return iv;

    ++iv.sweeps;
    for (int i = n - 1; i >= 0 && !iv.conflict; --i) {
        const Node& nd = net.node(i);
        if (nd.type != NodeType::MaxPool)
            continue;
        for (const InEdge& e : nd.in) {
            iv.hi[e.src] = std::min(iv.hi[e.src], iv.hi[i]);
            if (iv.lo[e.src] > iv.hi[e.src] + kEps) {
                fail(e.src);
                break;
            }
        }
        if (iv.conflict)
            break;
        auto it = fixture.pool.find(i);
        if (it != fixture.pool.end()) {
            int src = nd.in[it->second].src;
            iv.lo[src] = std::max(iv.lo[src], iv.lo[i]);
            if (iv.lo[src] > iv.hi[src] + kEps)
                fail(src);
            continue;
        }
        int survivor = -1;
        int below = 0;
        for (std::size_t e = 0; e < nd.in.size(); ++e) {
            if (iv.hi[nd.in[e].src] < iv.lo[i] - kEps)
                ++below;
            else
                survivor = static_cast<int>(e);
        }
        if (below == static_cast<int>(nd.in.size()) - 1 && survivor >= 0) {
            int src = nd.in[survivor].src;
            iv.lo[src] = std::max(iv.lo[src], iv.lo[i]);
            if (iv.lo[src] > iv.hi[src] + kEps)
                fail(src);
        }
    }
    return iv;
}

InferenceOutcome inferNodePhases(const Network& net, const BoundsMap& bounds,
                                 const PhaseFixture& fixture,
                                 const std::vector<sat::Lit>& prefix,
                                 const sat::PhaseVars& pv,
                                 const std::vector<bool>& phasePinned) {
    InferenceOutcome out;
    FixtureIntervals iv = propagateIntervals(net, bounds, fixture);

    std::vector<sat::Lit> negPrefix;
    for (sat::Lit l : prefix)
        negPrefix.push_back(~l);

    if (iv.conflict) {
        out.conflict = true;
        out.clauses.push_back(negPrefix);
        return out;
    }

    auto emit = [&](int node, sat::Lit lit) {
        std::vector<sat::Lit> clause = negPrefix;
        clause.push_back(lit);
        out.clauses.push_back(std::move(clause));
        out.implied.push_back({node, lit});
    };

    for (int i = 0; i < net.size(); ++i) {
        if (fixture.contains(i) || phasePinned[i])
            continue;
        const Node& nd = net.node(i);
        if (nd.type == NodeType::ReLU) {
            if (iv.preLo[i] > kEps || iv.lo[i] > kEps)
                emit(i, reluPhaseLit(pv, i, ReluPhase::Geq0));
            else if (iv.preHi[i] < -kEps)
                emit(i, reluPhaseLit(pv, i, ReluPhase::Leq0));
        } else if (nd.type == NodeType::MaxPool) {
            int k = static_cast<int>(nd.in.size());
            int chosen = -1;
            for (int e = 0; e < k && chosen < 0; ++e) {
                bool dominates = true;
                for (int f = 0; f < k && dominates; ++f)
                    if (f != e && iv.lo[nd.in[e].src] <= iv.hi[nd.in[f].src] + kEps)
                        dominates = false;
                if (dominates)
                    chosen = e;
            }
            if (chosen < 0) {
                int survivor = -1;
                int below = 0;
                for (int e = 0; e < k; ++e) {
                    if (iv.hi[nd.in[e].src] < iv.lo[i] - kEps)
                        ++below;
                    else
                        survivor = e;
                }
                if (below == k - 1)
                    chosen = survivor;
            }
            if (chosen >= 0)
                emit(i, poolEdgeLit(pv, i, chosen));
        }
    }
    return out;
}

} // namespace nnv
