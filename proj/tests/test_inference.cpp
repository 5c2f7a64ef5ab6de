#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <vector>

#include "nnv/generator.hpp"
#include "nnv/phase_inference.hpp"

using namespace nnv;
using sat::Lit;

namespace {

// Two ReLUs feeding one MaxPool: r1 lands in [0, 1.5], r2 in [0.1, 2.0].
const char* kPoolNet =
    "Input a\nInput b\n"
    "ReLU r1 0 1 a\nReLU r2 0 1 b\n"
    "MaxPool m r1 r2\n"
    "Linear y 0 1 m\n"
    "Assert <= -1 1 a\nAssert >= 1.5 1 a\n"
    "Assert <= 0.1 1 b\nAssert >= 2 1 b\n";

struct Rig {
    VerificationProblem problem;
    BoundsMap bounds;
    sat::Solver solver;
    sat::PhaseVars pv;
    std::vector<bool> noPins;

    explicit Rig(const std::string& text)
        : problem(parseProblemText(text)),
          bounds(computeInitialBounds(problem)),
          pv(sat::initPhaseEncoding(problem.net, solver)),
          noPins(problem.net.size(), false) {}

    int idx(const std::string& name) const { return problem.net.indexOf(name); }
};

bool strictlyInfeasible(const VerificationProblem& p, Relaxation& relax,
                        const PhaseFixture& fx) {
    std::vector<lp::Row> rows;
    for (auto& [node, row] : fixtureConstraints(p, relax.vars, fx))
        rows.push_back(row);
    relax.lp.pushBatch("probe", rows);
    relax.lp.clearObjective();
    lp::Outcome out = relax.lp.solve();
    relax.lp.popBatch("probe");
    return out.status == lp::SolveStatus::Infeasible;
}

bool hasImplied(const InferenceOutcome& out, int node, Lit lit) {
    for (auto& [n, l] : out.implied)
        if (n == node && l == lit)
            return true;
    return false;
}

} // namespace

TEST_CASE("empty fixture reproduces the global bounds") {
    Rig rig(kPoolNet);
    FixtureIntervals iv = propagateIntervals(rig.problem.net, rig.bounds, {});
    CHECK_FALSE(iv.conflict);
    CHECK(iv.sweeps == 2);
    for (int i = 0; i < rig.problem.net.size(); ++i) {
        CHECK(iv.lo[i] == doctest::Approx(rig.bounds.node[i].lo));
        CHECK(iv.hi[i] == doctest::Approx(rig.bounds.node[i].hi));
    }
    int r1 = rig.idx("r1"), r2 = rig.idx("r2"), m = rig.idx("m");
    CHECK(iv.lo[r1] == doctest::Approx(0.0));
    CHECK(iv.hi[r1] == doctest::Approx(1.5));
    CHECK(iv.lo[r2] == doctest::Approx(0.1));
    CHECK(iv.hi[r2] == doctest::Approx(2.0));
    CHECK(iv.lo[m] == doctest::Approx(0.1));
    CHECK(iv.hi[m] == doctest::Approx(2.0));
}

TEST_CASE("a forced-inactive branch pins the value and the pool keeps flowing") {
    Rig rig(kPoolNet);
    int r1 = rig.idx("r1"), r2 = rig.idx("r2"), m = rig.idx("m");
    PhaseFixture fx;
    fx.relu[r1] = ReluPhase::Leq0;
    FixtureIntervals iv = propagateIntervals(rig.problem.net, rig.bounds, fx);
    CHECK_FALSE(iv.conflict);
    CHECK(iv.lo[r1] == doctest::Approx(0.0));
    CHECK(iv.hi[r1] == doctest::Approx(0.0));
    CHECK(iv.lo[m] == doctest::Approx(0.1));
    CHECK(iv.hi[m] == doctest::Approx(2.0));
    CHECK(iv.lo[r2] == doctest::Approx(0.1));
}

TEST_CASE("a capped pool output pushes bounds back onto its inputs") {
    Rig rig(kPoolNet);
    int r1 = rig.idx("r1"), r2 = rig.idx("r2"), m = rig.idx("m");
    rig.bounds.node[m].lo = 0.5;
    rig.bounds.node[m].hi = 0.7;
    PhaseFixture fx;
    fx.relu[r1] = ReluPhase::Leq0;
    FixtureIntervals iv = propagateIntervals(rig.problem.net, rig.bounds, fx);
    CHECK_FALSE(iv.conflict);
    // r1 sits at zero, so r2 alone must carry the pool's floor
    CHECK(iv.lo[r2] == doctest::Approx(0.5));
    CHECK(iv.hi[r2] == doctest::Approx(0.7));
}

TEST_CASE("an edge choice narrows the pool to that input") {
    Rig rig(kPoolNet);
    int r1 = rig.idx("r1"), m = rig.idx("m");
    PhaseFixture fx;
    fx.pool[m] = 0; // follow r1
    FixtureIntervals iv = propagateIntervals(rig.problem.net, rig.bounds, fx);
    CHECK_FALSE(iv.conflict);
    CHECK(iv.lo[m] == doctest::Approx(0.1));
    CHECK(iv.hi[m] == doctest::Approx(1.5));
    // and the chosen input inherits the pool's floor
    CHECK(iv.lo[r1] == doctest::Approx(0.1));
}

TEST_CASE("impossible fixtures surface as empty intervals") {
    Rig rig(kPoolNet);
    int r1 = rig.idx("r1"), r2 = rig.idx("r2"), m = rig.idx("m");

    PhaseFixture off; // r2's weighted sum is at least 0.1
    off.relu[r2] = ReluPhase::Leq0;
    FixtureIntervals iv = propagateIntervals(rig.problem.net, rig.bounds, off);
    CHECK(iv.conflict);
    CHECK(iv.conflictNode == r2);

    PhaseFixture starve; // pool must reach 0.5 but follows a zeroed input
    starve.relu[r1] = ReluPhase::Leq0;
    starve.pool[m] = 0;
    rig.bounds.node[m].lo = 0.5;
    rig.bounds.node[m].hi = 0.7;
    iv = propagateIntervals(rig.problem.net, rig.bounds, starve);
    CHECK(iv.conflict);
    CHECK(iv.conflictNode == m);
}

TEST_CASE("the three bound-driven phase deductions") {
    Rig rig(kPoolNet);
    int r1 = rig.idx("r1"), r2 = rig.idx("r2"), m = rig.idx("m");
    Lit r1Off = reluPhaseLit(rig.pv, r1, ReluPhase::Leq0);
    Lit r2On = reluPhaseLit(rig.pv, r2, ReluPhase::Geq0);

    // 1: r2's weighted sum stays positive, so it runs active unconditionally
    InferenceOutcome plain =
        inferNodePhases(rig.problem.net, rig.bounds, {}, {}, rig.pv, rig.noPins);
    CHECK_FALSE(plain.conflict);
    REQUIRE(plain.implied.size() == 1);
    CHECK(hasImplied(plain, r2, r2On));
    REQUIRE(plain.clauses.size() == 1);
    CHECK(plain.clauses[0] == std::vector<Lit>{r2On});

    // 2: with r1 shut off, the pool can only follow r2
    PhaseFixture fx;
    fx.relu[r1] = ReluPhase::Leq0;
    InferenceOutcome under =
        inferNodePhases(rig.problem.net, rig.bounds, fx, {r1Off}, rig.pv, rig.noPins);
    CHECK_FALSE(under.conflict);
    CHECK(hasImplied(under, m, poolEdgeLit(rig.pv, m, 1)));
    REQUIRE(under.clauses.size() == 2);
    for (const std::vector<Lit>& clause : under.clauses) {
        REQUIRE(clause.size() == 2);
        CHECK(clause[0] == ~r1Off);
    }

    // 3: a pool output pinned to [0.5, 0.7] forces r2 active to feed it
    rig.bounds.node[m].lo = 0.5;
    rig.bounds.node[m].hi = 0.7;
    InferenceOutcome fed =
        inferNodePhases(rig.problem.net, rig.bounds, fx, {r1Off}, rig.pv, rig.noPins);
    CHECK_FALSE(fed.conflict);
    CHECK(hasImplied(fed, r2, r2On));
}

TEST_CASE("the pool floor alone can activate a straddling branch") {
    // same shape but r2's sum straddles zero, so only the backward rule fires
    Rig rig("Input a\nInput b\n"
            "ReLU r1 0 1 a\nReLU r2 0 1 b\n"
            "MaxPool m r1 r2\n"
            "Linear y 0 1 m\n"
            "Assert <= -1 1 a\nAssert >= 1.5 1 a\n"
            "Assert <= -0.5 1 b\nAssert >= 2 1 b\n");
    int r1 = rig.idx("r1"), r2 = rig.idx("r2"), m = rig.idx("m");
    Lit r1Off = reluPhaseLit(rig.pv, r1, ReluPhase::Leq0);

    InferenceOutcome plain =
        inferNodePhases(rig.problem.net, rig.bounds, {}, {}, rig.pv, rig.noPins);
    CHECK(plain.implied.empty()); // nothing is determined up front

    rig.bounds.node[m].lo = 0.5;
    rig.bounds.node[m].hi = 0.7;
    PhaseFixture fx;
    fx.relu[r1] = ReluPhase::Leq0;
    FixtureIntervals iv = propagateIntervals(rig.problem.net, rig.bounds, fx);
    CHECK(iv.lo[r2] == doctest::Approx(0.5));
    InferenceOutcome fed =
        inferNodePhases(rig.problem.net, rig.bounds, fx, {r1Off}, rig.pv, rig.noPins);
    CHECK(hasImplied(fed, r2, reluPhaseLit(rig.pv, r2, ReluPhase::Geq0)));
}

TEST_CASE("negative sums shut a branch off") {
    Rig rig("Input a\nReLU r -1 1 a\nLinear y 0 1 r\n"
            "Assert <= -1 1 a\nAssert >= 0.5 1 a\n");
    int r = rig.idx("r"); // sum in [-2, -0.5]
    InferenceOutcome out =
        inferNodePhases(rig.problem.net, rig.bounds, {}, {}, rig.pv, rig.noPins);
    REQUIRE(out.implied.size() == 1);
    CHECK(hasImplied(out, r, reluPhaseLit(rig.pv, r, ReluPhase::Leq0)));
}

TEST_CASE("fixed and pinned nodes are left alone") {
    Rig rig(kPoolNet);
    int r2 = rig.idx("r2");

    PhaseFixture fx;
    fx.relu[r2] = ReluPhase::Geq0;
    InferenceOutcome fixed = inferNodePhases(rig.problem.net, rig.bounds, fx,
                                             {reluPhaseLit(rig.pv, r2, ReluPhase::Geq0)},
                                             rig.pv, rig.noPins);
    CHECK_FALSE(hasImplied(fixed, r2, reluPhaseLit(rig.pv, r2, ReluPhase::Geq0)));

    std::vector<bool> pins(rig.problem.net.size(), false);
    pins[r2] = true;
    InferenceOutcome pinned =
        inferNodePhases(rig.problem.net, rig.bounds, {}, {}, rig.pv, pins);
    CHECK(pinned.implied.empty());
}

TEST_CASE("a conflicting fixture yields the prefix rejection alone") {
    Rig rig(kPoolNet);
    int r2 = rig.idx("r2");
    Lit bad = reluPhaseLit(rig.pv, r2, ReluPhase::Leq0);
    PhaseFixture fx;
    fx.relu[r2] = ReluPhase::Leq0;
    InferenceOutcome out =
        inferNodePhases(rig.problem.net, rig.bounds, fx, {bad}, rig.pv, rig.noPins);
    CHECK(out.conflict);
    CHECK(out.implied.empty());
    REQUIRE(out.clauses.size() == 1);
    CHECK(out.clauses[0] == std::vector<Lit>{~bad});
}

TEST_CASE("deductions hold in every exactly-feasible completion") {
    int nontrivial = 0, completionsChecked = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        if (nontrivial >= 12 && completionsChecked >= 400)
            break;
        VerificationProblem p = corpusProblem(seed);
        std::vector<int> relus, pools;
        for (int i = 0; i < p.net.size(); ++i) {
            if (p.net.node(i).type == NodeType::ReLU)
                relus.push_back(i);
            else if (p.net.node(i).type == NodeType::MaxPool)
                pools.push_back(i);
        }
        long long space = 1;
        for (std::size_t k = 0; k < relus.size() && space <= 512; ++k)
            space *= 2;
        for (int node : pools)
            if (space <= 512)
                space *= static_cast<long long>(p.net.node(node).in.size());
        if (space > 512)
            continue;

        BoundsMap bounds = computeInitialBounds(p);
        Relaxation relax = buildRelaxation(p, bounds);
        sat::Solver solver;
        sat::PhaseVars pv = sat::initPhaseEncoding(p.net, solver);
        std::vector<bool> noPins(p.net.size(), false);

        Rng rng(seed * 977);
        PhaseFixture random; // roughly a third of the phase nodes, arbitrarily
        for (int node : relus)
            if (rng.unit() < 0.33)
                random.relu[node] = rng.unit() < 0.5 ? ReluPhase::Geq0 : ReluPhase::Leq0;
        for (int node : pools)
            if (rng.unit() < 0.33)
                random.pool[node] = static_cast<int>(
                    rng.uniformInt(0, static_cast<int>(p.net.node(node).in.size()) - 1));

        for (const PhaseFixture& fx : {PhaseFixture{}, random}) {
            InferenceOutcome out = inferNodePhases(p.net, bounds, fx, {}, pv, noPins);
            if (out.conflict || out.implied.empty())
                continue;

            // walk the complete assignments extending the fixture
            std::vector<int> free;
            std::vector<int> arity;
            for (int node : relus)
                if (!fx.contains(node)) {
                    free.push_back(node);
                    arity.push_back(2);
                }
            for (int node : pools)
                if (!fx.contains(node)) {
                    free.push_back(node);
                    arity.push_back(static_cast<int>(p.net.node(node).in.size()));
                }
            std::vector<int> choice(free.size(), 0);
            bool anyFeasible = false;
            while (true) {
                PhaseFixture full = fx;
                for (std::size_t i = 0; i < free.size(); ++i) {
                    if (p.net.node(free[i]).type == NodeType::ReLU)
                        full.relu[free[i]] = choice[i] ? ReluPhase::Geq0 : ReluPhase::Leq0;
                    else
                        full.pool[free[i]] = choice[i];
                }
                if (!strictlyInfeasible(p, relax, full)) {
                    anyFeasible = true;
                    ++completionsChecked;
                    for (auto& [node, lit] : out.implied) {
                        bool holds;
                        if (p.net.node(node).type == NodeType::ReLU) {
                            ReluPhase want =
                                (lit == reluPhaseLit(pv, node, ReluPhase::Geq0))
                                    ? ReluPhase::Geq0
                                    : ReluPhase::Leq0;
                            holds = full.relu.at(node) == want;
                        } else {
                            holds = lit == poolEdgeLit(pv, node, full.pool.at(node));
                        }
                        CHECK(holds);
                    }
                }
                std::size_t pos = 0;
                while (pos < choice.size() && ++choice[pos] == arity[pos])
                    choice[pos++] = 0;
                if (pos == choice.size())
                    break;
            }
            if (anyFeasible)
                ++nontrivial;
        }
    }
    CHECK(nontrivial >= 5);
    CHECK(completionsChecked >= 50);
}

TEST_CASE("inference is a pure function and re-running adds nothing") {
    for (std::uint64_t seed : {3ull, 11ull, 19ull}) {
        VerificationProblem p = corpusProblem(seed);
        BoundsMap bounds = computeInitialBounds(p);
        sat::Solver solver;
        sat::PhaseVars pv = sat::initPhaseEncoding(p.net, solver);
        std::vector<bool> noPins(p.net.size(), false);

        InferenceOutcome a = inferNodePhases(p.net, bounds, {}, {}, pv, noPins);
        InferenceOutcome b = inferNodePhases(p.net, bounds, {}, {}, pv, noPins);
        CHECK(a.conflict == b.conflict);
        CHECK(a.clauses == b.clauses);
        REQUIRE(a.implied.size() == b.implied.size());

        // absorbing the deductions into the fixture silences them
        PhaseFixture fx;
        for (auto& [node, lit] : a.implied) {
            if (p.net.node(node).type == NodeType::ReLU)
                fx.relu[node] = (lit == reluPhaseLit(pv, node, ReluPhase::Geq0))
                                    ? ReluPhase::Geq0
                                    : ReluPhase::Leq0;
            else
                for (std::size_t e = 0; e < p.net.node(node).in.size(); ++e)
                    if (lit == poolEdgeLit(pv, node, static_cast<int>(e)))
                        fx.pool[node] = static_cast<int>(e);
        }
        InferenceOutcome again = inferNodePhases(p.net, bounds, fx, {}, pv, noPins);
        if (!again.conflict)
            for (auto& [node, lit] : again.implied)
                CHECK_FALSE(fx.contains(node));
    }
}

TEST_CASE("intervals never escape the global bounds") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        VerificationProblem p = corpusProblem(seed);
        BoundsMap bounds = computeInitialBounds(p);
        Rng rng(seed * 31 + 7);
        PhaseFixture fx;
        for (int i = 0; i < p.net.size(); ++i) {
            const Node& nd = p.net.node(i);
            if (nd.type == NodeType::ReLU && rng.unit() < 0.25)
                fx.relu[i] = rng.unit() < 0.5 ? ReluPhase::Geq0 : ReluPhase::Leq0;
            else if (nd.type == NodeType::MaxPool && rng.unit() < 0.25)
                fx.pool[i] = static_cast<int>(
                    rng.uniformInt(0, static_cast<int>(nd.in.size()) - 1));
        }
        FixtureIntervals iv = propagateIntervals(p.net, bounds, fx);
        if (iv.conflict)
            continue;
        CHECK(iv.sweeps == 2);
        for (int i = 0; i < p.net.size(); ++i) {
            CHECK(iv.lo[i] >= bounds.node[i].lo - 1e-9);
            CHECK(iv.hi[i] <= bounds.node[i].hi + 1e-9);
            CHECK(iv.lo[i] <= iv.hi[i] + kSafetyMargin);
        }
    }
}
