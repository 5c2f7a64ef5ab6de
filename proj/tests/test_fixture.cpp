#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <vector>

#include "nnv/fixture_analysis.hpp"
#include "nnv/generator.hpp"

using namespace nnv;
using sat::Lit;
using sat::mkLit;

namespace {

struct Rig {
    VerificationProblem problem;
    BoundsMap bounds;
    Relaxation relax;
    sat::Solver solver;
    sat::PhaseVars pv;

    explicit Rig(const std::string& text)
        : problem(parseProblemText(text)),
          bounds(computeInitialBounds(problem)),
          relax(buildRelaxation(problem, bounds)),
          pv(sat::initPhaseEncoding(problem.net, solver)) {}
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

// Every minimal infeasible subset of the fixture, by exhaustive enumeration.
std::vector<PhaseFixture> minimalCores(const VerificationProblem& p, Relaxation& relax,
                                       const PhaseFixture& fx) {
    std::vector<std::pair<int, int>> items; // node, phase or edge
    for (auto& [node, phase] : fx.relu)
        items.push_back({node, phase == ReluPhase::Geq0 ? 1 : 0});
    for (auto& [node, edge] : fx.pool)
        items.push_back({node, edge});
    int n = static_cast<int>(items.size());
    REQUIRE(n <= 12);
    std::vector<unsigned> bad;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        PhaseFixture sub;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                auto [node, tag] = items[i];
                if (fx.relu.count(node))
                    sub.relu[node] = tag ? ReluPhase::Geq0 : ReluPhase::Leq0;
                else
                    sub.pool[node] = tag;
            }
        if (strictlyInfeasible(p, relax, sub))
            bad.push_back(mask);
    }
    std::vector<PhaseFixture> cores;
    for (unsigned mask : bad) {
        bool minimal = true;
        for (unsigned other : bad)
            if (other != mask && (other & mask) == other)
                minimal = false;
        if (!minimal)
            continue;
        PhaseFixture core;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                auto [node, tag] = items[i];
                if (fx.relu.count(node))
                    core.relu[node] = tag ? ReluPhase::Geq0 : ReluPhase::Leq0;
                else
                    core.pool[node] = tag;
            }
        cores.push_back(core);
    }
    return cores;
}

} // namespace

TEST_CASE("feasible cache answers by set containment") {
    FeasibleCache cache(8);
    cache.insert({1, 3, 5});
    CHECK(cache.contains({1, 3, 5}));
    CHECK(cache.contains({1, 3}));
    CHECK(cache.contains({5}));
    CHECK(cache.contains({}));
    CHECK_FALSE(cache.contains({1, 2}));
    CHECK_FALSE(cache.contains({1, 3, 5, 7}));

    cache.insert({1, 3}); // already covered, not stored
    CHECK(cache.size() == 1);
    cache.insert({2, 4});
    CHECK(cache.size() == 2);

    FeasibleCache tiny(2);
    tiny.insert({10});
    tiny.insert({11});
    tiny.insert({12}); // evicts the oldest entry
    CHECK(tiny.size() == 2);
    CHECK_FALSE(tiny.contains({10}));
    CHECK(tiny.contains({11}));
    CHECK(tiny.contains({12}));
}

TEST_CASE("fixture literal codes are the sorted phase choices") {
    Rig rig("Input x\nReLU r 0 1 x\nMaxPool m x r\nLinear y 0 1 m\n"
            "Assert <= -1 1 x\nAssert >= 1 1 x\n");
    int r = rig.problem.net.indexOf("r"), m = rig.problem.net.indexOf("m");
    PhaseFixture fx;
    fx.relu[r] = ReluPhase::Geq0;
    fx.pool[m] = 1;
    std::vector<int> codes = fixtureLitCodes(rig.pv, fx);
    REQUIRE(codes.size() == 2);
    CHECK(std::is_sorted(codes.begin(), codes.end()));
    CHECK(std::count(codes.begin(), codes.end(),
                     reluPhaseLit(rig.pv, r, ReluPhase::Geq0).code) == 1);
    CHECK(std::count(codes.begin(), codes.end(), poolEdgeLit(rig.pv, m, 1).code) == 1);
}

TEST_CASE("tightness witnesses the exact activation") {
    Rig rig("Input x\nReLU r 0 1 x\nLinear y 0 1 r\n"
            "Assert <= -1 1 x\nAssert >= 1 1 x\n");
    int r = rig.problem.net.indexOf("r");
    std::vector<double> sol(rig.relax.lp.variableCount(), 0.0);
    auto at = [&](int node) -> double& { return sol[rig.relax.vars.value[node]]; };
    auto pre = [&](int node) -> double& { return sol[rig.relax.vars.pre[node]]; };

    at(r) = 0.5;
    pre(r) = 0.5;
    PhaseFixture t = tightSet(rig.problem.net, rig.relax.vars, sol);
    REQUIRE(t.relu.count(r));
    CHECK(t.relu[r] == ReluPhase::Geq0);

    at(r) = 0.3;
    pre(r) = -0.2; // relaxation gap: value 0.3 vs exact 0
    t = tightSet(rig.problem.net, rig.relax.vars, sol);
    CHECK_FALSE(t.contains(r));

    at(r) = 0.0;
    pre(r) = -0.2;
    t = tightSet(rig.problem.net, rig.relax.vars, sol);
    REQUIRE(t.relu.count(r));
    CHECK(t.relu[r] == ReluPhase::Leq0);

    at(r) = 0.0;
    pre(r) = 0.0; // boundary counts as the inactive side
    t = tightSet(rig.problem.net, rig.relax.vars, sol);
    REQUIRE(t.relu.count(r));
    CHECK(t.relu[r] == ReluPhase::Leq0);

    Rig pool("Input a\nInput b\nMaxPool m a b\nLinear y 0 1 m\n"
             "Assert <= 0 1 a\nAssert >= 1 1 a\nAssert <= 0 1 b\nAssert >= 1 1 b\n");
    int m = pool.problem.net.indexOf("m");
    std::vector<double> ps(pool.relax.lp.variableCount(), 0.0);
    ps[pool.relax.vars.value[0]] = 0.3;
    ps[pool.relax.vars.value[1]] = 0.7;
    ps[pool.relax.vars.value[m]] = 0.7;
    t = tightSet(pool.problem.net, pool.relax.vars, ps);
    REQUIRE(t.pool.count(m));
    CHECK(t.pool[m] == 1);

    ps[pool.relax.vars.value[m]] = 0.9; // strictly above both inputs
    t = tightSet(pool.problem.net, pool.relax.vars, ps);
    CHECK_FALSE(t.contains(m));

    ps[pool.relax.vars.value[0]] = 0.7; // tie resolves to the first edge
    ps[pool.relax.vars.value[m]] = 0.7;
    t = tightSet(pool.problem.net, pool.relax.vars, ps);
    REQUIRE(t.pool.count(m));
    CHECK(t.pool[m] == 0);
}

TEST_CASE("tightness objective skips fixed nodes and weights pools lightly") {
    Rig rig("Input x\nReLU a 0 1 x\nReLU b 0.1 -1 x\nMaxPool m a b\nLinear y 0 1 m\n"
            "Assert <= -1 1 x\nAssert >= 1 1 x\n");
    int a = rig.problem.net.indexOf("a"), b = rig.problem.net.indexOf("b");
    int m = rig.problem.net.indexOf("m");
    PhaseFixture fx;
    fx.relu[a] = ReluPhase::Geq0;
    std::vector<lp::Term> obj = tightObjective(rig.problem.net, rig.relax.vars, fx);
    REQUIRE(obj.size() == 2);
    for (const lp::Term& term : obj) {
        CHECK(term.var != rig.relax.vars.value[a]);
        if (term.var == rig.relax.vars.value[b])
            CHECK(term.coeff == 1.0);
        if (term.var == rig.relax.vars.value[m])
            CHECK(term.coeff == doctest::Approx(0.1));
    }
}

TEST_CASE("feasibility checks cache by subset and bypass for witnesses") {
    Rig rig("Input x\nReLU r 0 1 x\nReLU s -0.2 1 x\nLinear y 0 1 r 1 s\n"
            "Assert <= -1 1 x\nAssert >= 1 1 x\n");
    FixtureAnalyzer analyzer(rig.problem, rig.pv, true);
    int batches = rig.relax.lp.batchCount();
    PhaseFixture empty;

    FeasibilityReport first = analyzer.check(rig.relax, empty, {}, false);
    CHECK(first.feasible);
    CHECK_FALSE(first.fromCache);
    REQUIRE_FALSE(first.solution.empty());
    CHECK(rig.relax.lp.batchCount() == batches);
    long long solvesAfterFirst = analyzer.lpSolves();
    CHECK(solvesAfterFirst >= 1);

    FeasibilityReport second = analyzer.check(rig.relax, empty, {}, false);
    CHECK(second.feasible);
    CHECK(second.fromCache);
    CHECK(second.solution.empty());
    CHECK(analyzer.lpSolves() == solvesAfterFirst); // no new solve
    CHECK(analyzer.cacheHits() == 1);

    // a witness request never trusts the cache, coming or going
    FeasibilityReport third = analyzer.check(rig.relax, empty, {}, true);
    CHECK(third.feasible);
    CHECK_FALSE(third.fromCache);
    CHECK_FALSE(third.solution.empty());
    CHECK(analyzer.lpSolves() > solvesAfterFirst);

    FixtureAnalyzer nocache(rig.problem, rig.pv, false);
    nocache.check(rig.relax, empty, {}, false);
    nocache.check(rig.relax, empty, {}, false);
    CHECK(nocache.cacheHits() == 0);
    CHECK(nocache.lpSolves() >= 2);
}

TEST_CASE("an impossible inactive phase is blamed precisely") {
    Rig rig("Input x\nReLU r 0 1 x\nLinear y 0 1 r\n"
            "Assert <= -1 1 x\nAssert >= 1 1 x\nAssert <= 0.5 1 y\n");
    int r = rig.problem.net.indexOf("r");
    FixtureAnalyzer analyzer(rig.problem, rig.pv);
    PhaseFixture fx;
    fx.relu[r] = ReluPhase::Leq0; // property needs y = r >= 0.5
    Lit lit = reluPhaseLit(rig.pv, r, ReluPhase::Leq0);

    FeasibilityReport rep = analyzer.check(rig.relax, fx, {lit}, false);
    CHECK_FALSE(rep.feasible);
    REQUIRE(rep.coreNodes == std::vector<int>{r});
    REQUIRE(rep.conflictClause.size() == 1);
    CHECK(rep.conflictClause[0] == ~lit);
    REQUIRE(analyzer.conflictLengths().size() == 1);
    CHECK(analyzer.conflictLengths()[0] == 1);
}

TEST_CASE("elastic filtering shrinks to a planted singleton core") {
    // f is forced active by its bounds; everything else matches x = 1/2
    Rig rig("Input x\n"
            "ReLU f 2 1 x\n"
            "ReLU r1 -0.3 1 x\n"
            "ReLU r2 -0.6 1 x\n"
            "ReLU r3 -0.45 1 x\n"
            "ReLU r4 0.2 -1 x\n"
            "Linear y 0 1 f 1 r1 1 r2 1 r3 1 r4\n"
            "Assert <= 0 1 x\nAssert >= 1 1 x\n");
    const Network& net = rig.problem.net;
    PhaseFixture fx;
    fx.relu[net.indexOf("f")] = ReluPhase::Leq0;
    fx.relu[net.indexOf("r1")] = ReluPhase::Geq0;
    fx.relu[net.indexOf("r2")] = ReluPhase::Leq0;
    fx.relu[net.indexOf("r3")] = ReluPhase::Geq0;
    fx.relu[net.indexOf("r4")] = ReluPhase::Leq0;

    auto cores = minimalCores(rig.problem, rig.relax, fx);
    REQUIRE(cores.size() == 1);
    CHECK(cores[0].size() == 1);
    CHECK(cores[0].relu.count(net.indexOf("f")));

    FixtureAnalyzer analyzer(rig.problem, rig.pv);
    std::vector<int> result = analyzer.elasticFilter(rig.relax, fx);
    CHECK(std::is_sorted(result.begin(), result.end()));
    CHECK(result.size() <= 2); // singleton core in a five-node fixture
    CHECK(std::count(result.begin(), result.end(), net.indexOf("f")) == 1);

    PhaseFixture blamed;
    for (int node : result)
        blamed.relu[node] = fx.relu.at(node);
    CHECK(strictlyInfeasible(rig.problem, rig.relax, blamed));
}

TEST_CASE("elastic filtering keeps exactly a two-node core") {
    // p wants x <= 0.3 while q wants x >= 0.6; u and v stay consistent
    Rig rig("Input x\n"
            "ReLU p -0.3 1 x\n"
            "ReLU q -0.6 1 x\n"
            "ReLU u -0.1 1 x\n"
            "ReLU v 0.9 -1 x\n"
            "Linear y 0 1 p 1 q 1 u 1 v\n"
            "Assert <= 0 1 x\nAssert >= 1 1 x\n");
    const Network& net = rig.problem.net;
    int p = net.indexOf("p"), q = net.indexOf("q");
    PhaseFixture fx;
    fx.relu[p] = ReluPhase::Leq0;
    fx.relu[q] = ReluPhase::Geq0;
    fx.relu[net.indexOf("u")] = ReluPhase::Geq0;
    fx.relu[net.indexOf("v")] = ReluPhase::Geq0;

    auto cores = minimalCores(rig.problem, rig.relax, fx);
    REQUIRE(cores.size() == 1);
    CHECK(cores[0].size() == 2);
    CHECK(cores[0].relu.count(p));
    CHECK(cores[0].relu.count(q));

    FixtureAnalyzer analyzer(rig.problem, rig.pv);
    std::vector<int> result = analyzer.elasticFilter(rig.relax, fx);
    CHECK(result.size() <= fx.size());
    CHECK(std::count(result.begin(), result.end(), p) == 1);
    CHECK(std::count(result.begin(), result.end(), q) == 1);
    PhaseFixture blamed;
    for (int node : result)
        blamed.relu[node] = fx.relu.at(node);
    CHECK(strictlyInfeasible(rig.problem, rig.relax, blamed));
}

TEST_CASE("elastic filtering refuses feasible fixtures") {
    Rig rig("Input x\nReLU r -0.3 1 x\nLinear y 0 1 r\n"
            "Assert <= 0 1 x\nAssert >= 1 1 x\n");
    FixtureAnalyzer analyzer(rig.problem, rig.pv);
    PhaseFixture fx;
    fx.relu[rig.problem.net.indexOf("r")] = ReluPhase::Geq0;
    try {
        analyzer.elasticFilter(rig.relax, fx);
        FAIL("expected NotInfeasible");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotInfeasible);
    }
}

TEST_CASE("a residual active value spawns the activation clause") {
    Rig rig("Input x\nReLU r 0 1 x\nLinear y 0 1 r\n"
            "Assert <= -1 1 x\nAssert >= 1 1 x\nAssert <= 0.5 1 y\n");
    int r = rig.problem.net.indexOf("r");
    FixtureAnalyzer analyzer(rig.problem, rig.pv);
    PhaseFixture empty;
    // the property keeps y = r at 0.5 or above, so the tightness optimum
    // cannot push r to zero
    FeasibilityReport rep = analyzer.check(rig.relax, empty, {}, false);
    REQUIRE(rep.feasible);
    REQUIRE(rep.inferred.size() == 1);
    CHECK(rep.inferred[0] == mkLit(rig.pv.reluGeq[r]));
    CHECK(analyzer.inferredCount() == 1);

    // a decision prefix rides along negated
    sat::Solver aux;
    sat::Var d = aux.newVar();
    FixtureAnalyzer analyzer2(rig.problem, rig.pv);
    FeasibilityReport rep2 = analyzer2.check(rig.relax, empty, {mkLit(d)}, false);
    REQUIRE(rep2.feasible);
    REQUIRE(rep2.inferred.size() == 2);
    CHECK(std::count(rep2.inferred.begin(), rep2.inferred.end(), mkLit(d, false)) == 1);
    CHECK(std::count(rep2.inferred.begin(), rep2.inferred.end(), mkLit(rig.pv.reluGeq[r])) == 1);
}

TEST_CASE("activation clauses are semantically forced") {
    int seen = 0;
    for (std::uint64_t seed = 1; seed <= 60 && seen < 12; ++seed) {
        VerificationProblem p = corpusProblem(seed);
        BoundsMap bounds = computeInitialBounds(p);
        Relaxation relax = buildRelaxation(p, bounds);
        sat::Solver solver;
        sat::PhaseVars pv = sat::initPhaseEncoding(p.net, solver);
        FixtureAnalyzer analyzer(p, pv);
        PhaseFixture empty;
        FeasibilityReport rep = analyzer.check(relax, empty, {}, true);
        if (!rep.feasible || rep.inferred.empty())
            continue;
        ++seen;
        // the clause claims some listed ReLU must run active: fixing them all
        // inactive has to be impossible
        PhaseFixture allOff;
        for (Lit l : rep.inferred) {
            int node = -1;
            for (int i = 0; i < p.net.size(); ++i)
                if (pv.reluGeq[i] == sat::var(l))
                    node = i;
            REQUIRE(node >= 0);
            REQUIRE(sat::sign(l));
            allOff.relu[node] = ReluPhase::Leq0;
        }
        CHECK(strictlyInfeasible(p, relax, allOff));
    }
    CHECK(seen >= 5);
}
