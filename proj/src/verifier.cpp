#include "nnv/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <set>

#include "nnv/phase_inference.hpp"
#include "nnv/sat_solver.hpp"

namespace nnv {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<double> witnessInputs(const Network& net, const RelaxationVars& vars,
                                  const std::vector<double>& solution) {
    std::vector<double> inputs;
    inputs.reserve(net.inputs().size());
    for (int node : net.inputs())
        inputs.push_back(solution[vars.value[node]]);
    return inputs;
}

} // namespace

VerificationResult verify(const VerificationProblem& problem, const VerifyConfig& config) {
    auto t0 = Clock::now();
    VerificationResult res;
    auto finish = [&](Status st) {
        res.status = st;
        res.stats.wallMs =
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        return res;
    };
    auto checkTime = [&] {
        double sec = std::chrono::duration<double>(Clock::now() - t0).count();
        if (sec > config.timeBudgetSec)
            throw Error(ErrorCode::Timeout, "time budget exhausted");
    };

    problem.inputBox(); // validates boundedness
    if (problem.boxEmpty())
        return finish(Status::Unsatisfiable);

    BoundsMap bounds = computeInitialBounds(problem);
    Relaxation relax = buildRelaxation(problem, bounds);
    if (config.useRefinement) {
        RefineResult rr = refineBounds(problem, relax, bounds);
        res.stats.lpSolves += rr.stats.lpSolves;
        res.stats.refineSweeps = rr.stats.sweeps;
        if (rr.infeasible)
            return finish(Status::Unsatisfiable);
        bounds = std::move(rr.bounds);
    }

    sat::Solver solver;
    sat::PhaseVars pv = sat::initPhaseEncoding(problem.net, solver);
    FixtureAnalyzer analyzer(problem, pv, config.useCache);
    auto harvestCounters = [&] {
        res.stats.lpSolves += analyzer.lpSolves();
        res.stats.cacheHits = analyzer.cacheHits();
    };

    try {
        // Phase-forced nodes become root facts so search never branches on them.
        for (int i = 0; i < problem.net.size(); ++i) {
            if (problem.net.node(i).type != NodeType::ReLU)
                continue;
            if (bounds.node[i].preHi <= 0.0)
                solver.addClauseRoot({reluPhaseLit(pv, i, ReluPhase::Leq0)});
            else if (bounds.node[i].preLo >= 0.0)
                solver.addClauseRoot({reluPhaseLit(pv, i, ReluPhase::Geq0)});
        }

        std::set<std::vector<int>> emittedInferred;
        long long conflictsToRestart = 100 * sat::lubySequence(1);
        int restartNo = 1;
        long long sinceRestart = 0;
        long long merges = 0, pushes = 0;

        auto handleConflict = [&](sat::ClauseRef confl) {
            ++res.stats.satConflicts;
            ++sinceRestart;
            if (config.conflictBudget >= 0 && res.stats.satConflicts > config.conflictBudget)
                throw Error(ErrorCode::Timeout, "conflict budget exhausted");
            std::vector<sat::Lit> learnt;
            int bt = 0;
            solver.analyze(confl, learnt, bt);
            solver.recordLearnt(learnt, bt);
            ++res.stats.learnedClauses;
            if (sinceRestart >= conflictsToRestart) {
                solver.cancelUntil(0);
                ++res.stats.restarts;
                sinceRestart = 0;
                conflictsToRestart = 100 * sat::lubySequence(++restartNo);
            }
        };

        auto step = [&]() -> std::optional<Status> {
            while (true) {
                sat::ClauseRef confl = solver.propagate();
                if (confl != sat::kNoClause) {
                    handleConflict(confl);
                    continue;
                }
                if (solver.hasPending()) {
                    ++merges;
                    confl = solver.mergeOnePending();
                    if (confl != sat::kNoClause)
                        handleConflict(confl);
                    continue;
                }
                break;
            }

            PhaseFixture fixture;
            std::vector<sat::Lit> prefix;
            int unpinnedPhaseNodes = 0;
            for (int i = 0; i < problem.net.size(); ++i) {
                if (!problem.net.isPhaseNode(i) || relax.phasePinned[i])
                    continue;
                ++unpinnedPhaseNodes;
                sat::Lit trueLit{-1};
                if (problem.net.node(i).type == NodeType::ReLU) {
                    if (solver.value(sat::mkLit(pv.reluGeq[i])) == sat::LBool::True) {
                        fixture.relu[i] = ReluPhase::Geq0;
                        trueLit = sat::mkLit(pv.reluGeq[i]);
                    } else if (solver.value(sat::mkLit(pv.reluLeq[i])) == sat::LBool::True) {
                        fixture.relu[i] = ReluPhase::Leq0;
                        trueLit = sat::mkLit(pv.reluLeq[i]);
                    }
                } else {
                    for (std::size_t e = 0; e < pv.poolEdge[i].size(); ++e) {
                        if (solver.value(sat::mkLit(pv.poolEdge[i][e])) == sat::LBool::True) {
                            fixture.pool[i] = static_cast<int>(e);
                            trueLit = sat::mkLit(pv.poolEdge[i][e]);
                            break;
                        }
                    }
                }
                if (trueLit.code >= 0 && solver.levelOf(sat::var(trueLit)) >= 1)
                    prefix.push_back(trueLit);
            }
            bool complete = static_cast<int>(fixture.size()) == unpinnedPhaseNodes;

            if (config.useInference) {
                InferenceOutcome inf = inferNodePhases(problem.net, bounds, fixture, prefix,
                                                       pv, relax.phasePinned);
                if (!inf.clauses.empty()) {
                    for (auto& clause : inf.clauses) {
                        solver.pushPending(std::move(clause));
                        ++pushes;
                    }
                    res.stats.inferenceClauses +=
                        static_cast<long long>(inf.clauses.size());
                    return std::nullopt;
                }
            }

            FeasibilityReport rep = analyzer.check(relax, fixture, prefix, complete);
            if (!rep.feasible) {
                solver.pushPending(rep.conflictClause);
                ++pushes;
                return std::nullopt;
            }

            if (!rep.inferred.empty()) {
                std::vector<int> key;
                for (sat::Lit l : rep.inferred)
                    key.push_back(l.code);
                std::sort(key.begin(), key.end());
                key.erase(std::unique(key.begin(), key.end()), key.end());
                if (!emittedInferred.count(key)) {
                    emittedInferred.insert(key);
                    solver.pushPending(rep.inferred);
                    ++pushes;
                    bool satisfiedNow = false;
                    for (sat::Lit l : rep.inferred)
                        if (solver.value(l) == sat::LBool::True)
                            satisfiedNow = true;
                    if (!satisfiedNow)
                        return std::nullopt;
                }
            }

            if (complete) {
                res.witness = witnessInputs(problem.net, relax.vars, rep.solution);
                res.valuation = evaluate(problem.net, res.witness);
                if (!checkWitness(problem, res.witness))
                    throw Error(ErrorCode::Numeric,
                                "complete-fixture solution fails exact replay");
                return Status::Satisfiable;
            }

            sat::Lit d = solver.decide();
            ++res.stats.decisions;
            solver.newDecision(d);
            if (!solver.extendable()) {
                solver.cancelUntil(solver.decisionLevel() - 1);
                solver.newDecision(~d);
            }
            return std::nullopt;
        };

        while (true) {
            checkTime();
            long long c0 = res.stats.satConflicts;
            long long d0 = res.stats.decisions;
            long long m0 = merges, p0 = pushes;
            std::size_t trail0 = solver.trailSize();
            std::optional<Status> done = step();
            if (done) {
                harvestCounters();
                return finish(*done);
            }
            if (res.stats.satConflicts == c0 && res.stats.decisions == d0 &&
                merges == m0 && pushes == p0 && solver.trailSize() == trail0)
                ++res.stats.idleIterations;
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::RootConflict)
            throw;
        harvestCounters();
        return finish(Status::Unsatisfiable);
    }
}

OracleResult bruteForceOracle(const VerificationProblem& problem, long long cap) {
    OracleResult res;
    problem.inputBox();
    if (problem.boxEmpty()) {
        res.fixtureSpace = 0;
        return res;
    }

    BoundsMap bounds = computeInitialBounds(problem);
    Relaxation relax = buildRelaxation(problem, bounds);

    std::vector<int> nodes;   // unpinned phase nodes, declaration order
    std::vector<int> options; // choice count per node
    for (int i = 0; i < problem.net.size(); ++i) {
        if (!problem.net.isPhaseNode(i) || relax.phasePinned[i])
            continue;
        nodes.push_back(i);
        options.push_back(problem.net.node(i).type == NodeType::ReLU
                              ? 2
                              : static_cast<int>(problem.net.node(i).in.size()));
    }
    res.fixtureSpace = 1;
    for (int k : options) {
        res.fixtureSpace *= k;
        if (res.fixtureSpace > cap)
            throw Error(ErrorCode::TooLarge, "phase fixture space exceeds the cap");
    }

    std::vector<int> odometer(nodes.size(), 0);
    while (true) {
        PhaseFixture fixture;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            int node = nodes[j];
            if (problem.net.node(node).type == NodeType::ReLU)
                fixture.relu[node] = odometer[j] == 0 ? ReluPhase::Leq0 : ReluPhase::Geq0;
            else
                fixture.pool[node] = odometer[j];
        }
        auto tagged = fixtureConstraints(problem, relax.vars, fixture);
        std::vector<lp::Row> rows;
        rows.reserve(tagged.size());
        for (auto& [node, row] : tagged)
            rows.push_back(std::move(row));
        relax.lp.pushBatch("oracle", std::move(rows));
        lp::Outcome out = relax.lp.solve();
        relax.lp.popBatch("oracle");
        ++res.fixturesTried;
        if (out.status == lp::SolveStatus::Optimal) {
            res.witness = witnessInputs(problem.net, relax.vars, out.solution);
            res.valuation = evaluate(problem.net, res.witness);
            if (!checkWitness(problem, res.witness))
                throw Error(ErrorCode::Numeric, "oracle fixture solution fails exact replay");
            res.status = Status::Satisfiable;
            return res;
        }

        if (nodes.empty())
            return res; // the single empty fixture was infeasible
        std::size_t j = nodes.size();
        while (j > 0) {
            --j;
            if (++odometer[j] < options[j])
                break;
            odometer[j] = 0;
            if (j == 0)
                return res; // exhausted: unsatisfiable
        }
    }
}

} // namespace nnv
