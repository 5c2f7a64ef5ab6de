#include "nnv/fixture_analysis.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace nnv {

std::vector<int> fixtureLitCodes(const sat::PhaseVars& pv, const PhaseFixture& fixture) {
    std::vector<int> codes;
    for (const auto& [node, phase] : fixture.relu)
        codes.push_back(reluPhaseLit(pv, node, phase).code);
    for (const auto& [node, edge] : fixture.pool)
        codes.push_back(poolEdgeLit(pv, node, edge).code);
    std::sort(codes.begin(), codes.end());
    return codes;
}

bool FeasibleCache::contains(const std::vector<int>& sortedQuery) const {
    for (const auto& entry : entries_)
        if (std::includes(entry.begin(), entry.end(), sortedQuery.begin(), sortedQuery.end()))
            return true;
    return false;
}

void FeasibleCache::insert(std::vector<int> sortedEntry) {
    if (contains(sortedEntry))
        return;
    if (entries_.size() >= capacity_)
        entries_.pop_front();
    entries_.push_back(std::move(sortedEntry));
}

std::vector<lp::Term> tightObjective(const Network& net, const RelaxationVars& vars,
                                     const PhaseFixture& fixture) {
    std::vector<lp::Term> terms;
    for (int i = 0; i < net.size(); ++i) {
        if (fixture.contains(i))
            continue;
        if (net.node(i).type == NodeType::ReLU)
            terms.push_back({1.0, vars.value[i]});
        else if (net.node(i).type == NodeType::MaxPool)
            terms.push_back({0.1, vars.value[i]});
    }
    return terms;
}

PhaseFixture tightSet(const Network& net, const RelaxationVars& vars,
                      const std::vector<double>& solution, double tolerance) {
    PhaseFixture tight;
    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        if (n.type == NodeType::ReLU) {
            double d = solution[vars.value[i]];
            double c = solution[vars.pre[i]];
            if (std::abs(d - std::max(c, 0.0)) <= tolerance)
                tight.relu[i] = c > 0 ? ReluPhase::Geq0 : ReluPhase::Leq0;
        } else if (n.type == NodeType::MaxPool) {
            double d = solution[vars.value[i]];
            int best = 0;
            for (std::size_t e = 1; e < n.in.size(); ++e)
                if (solution[vars.value[n.in[e].src]] >
                    solution[vars.value[n.in[best].src]])
                    best = static_cast<int>(e);
            if (std::abs(d - solution[vars.value[n.in[best].src]]) <= tolerance)
                tight.pool[i] = best;
        }
    }
    return tight;
}

std::vector<sat::Lit> inferredClause(const Network& net, const RelaxationVars& vars,
                                     const sat::PhaseVars& pv, const PhaseFixture& fixture,
                                     const std::vector<sat::Lit>& prefix,
                                     const std::vector<double>& solution, double tolerance) {
    bool residualActivity = false;
    for (int i = 0; i < net.size() && !residualActivity; ++i)
        if (net.node(i).type == NodeType::ReLU && !fixture.contains(i) &&
            solution[vars.value[i]] > tolerance)
            residualActivity = true;
    if (!residualActivity)
        return {};
    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        if (n.type != NodeType::MaxPool)
            continue;
        double best = -kInf;
        for (const InEdge& e : n.in)
            best = std::max(best, solution[vars.value[e.src]]);
        if (std::abs(solution[vars.value[i]] - best) > tolerance)
            return {}; // pool value off its inputs: the optimum proves nothing
    }
    std::vector<sat::Lit> clause;
    for (sat::Lit l : prefix)
        clause.push_back(~l);
    for (int i = 0; i < net.size(); ++i) {
        if (net.node(i).type != NodeType::ReLU)
            continue;
        auto it = fixture.relu.find(i);
        if (it != fixture.relu.end() && it->second == ReluPhase::Leq0)
            continue;
        clause.push_back(sat::mkLit(pv.reluGeq[i]));
    }
    return clause;
}

FeasibilityReport FixtureAnalyzer::check(Relaxation& relax, const PhaseFixture& fixture,
                                         const std::vector<sat::Lit>& prefix,
                                         bool needSolution) {
    FeasibilityReport rep;
    std::vector<int> key = fixtureLitCodes(pv_, fixture);
    if (cacheEnabled_ && !needSolution && cache_.contains(key)) {
        ++cacheHits_;
        rep.feasible = true;
        rep.fromCache = true;
        return rep;
    }

    auto tagged = fixtureConstraints(problem_, relax.vars, fixture);
    std::vector<lp::Row> rows;
    rows.reserve(tagged.size());
    for (auto& [node, row] : tagged)
        rows.push_back(std::move(row));
    relax.lp.pushBatch("fixture", std::move(rows));
    relax.lp.setObjective(tightObjective(problem_.net, relax.vars, fixture));
    lp::Outcome out = relax.lp.solve();
    ++lpSolves_;
    relax.lp.clearObjective();
    relax.lp.popBatch("fixture");

    if (out.status == lp::SolveStatus::Unbounded)
        throw Error(ErrorCode::Numeric, "tightness objective unbounded over bounded nodes");

    if (out.status == lp::SolveStatus::Infeasible) {
        rep.coreNodes = elasticFilter(relax, fixture);
        for (int node : rep.coreNodes) {
            auto it = fixture.relu.find(node);
            if (it != fixture.relu.end())
                rep.conflictClause.push_back(~reluPhaseLit(pv_, node, it->second));
            else
                rep.conflictClause.push_back(~poolEdgeLit(pv_, node, fixture.pool.at(node)));
        }
        conflictLengths_.push_back(static_cast<int>(rep.conflictClause.size()));
        return rep;
    }

    rep.feasible = true;
    rep.solution = std::move(out.solution);
    if (cacheEnabled_ && !needSolution) {
        PhaseFixture tight = tightSet(problem_.net, relax.vars, rep.solution);
        std::vector<int> entry = key;
        for (int code : fixtureLitCodes(pv_, tight))
            entry.push_back(code);
        std::sort(entry.begin(), entry.end());
        entry.erase(std::unique(entry.begin(), entry.end()), entry.end());
        cache_.insert(std::move(entry));
    }
    rep.inferred =
        inferredClause(problem_.net, relax.vars, pv_, fixture, prefix, rep.solution);
    if (!rep.inferred.empty())
        ++inferredCount_;
    return rep;
}

std::vector<int> FixtureAnalyzer::elasticFilter(Relaxation& relax,
                                                const PhaseFixture& fixture) {
    const Network& net = problem_.net;
    lp::LinearProgram elp = relax.lp;

    std::vector<int> nodes;
    for (const auto& [v, ph] : fixture.relu)
        nodes.push_back(v);
    for (const auto& [v, e] : fixture.pool)
        nodes.push_back(v);
    std::sort(nodes.begin(), nodes.end());

    std::map<int, int> slackOf;
    std::vector<lp::Term> objective;
    for (int v : nodes) {
        int s = elp.addVariable(net.node(v).name + "__slack", 0.0, kInf);
        slackOf[v] = s;
        objective.push_back({1.0, s});
    }

    std::vector<lp::Row> rows;
    for (const auto& [v, ph] : fixture.relu) {
        int d = relax.vars.value[v], c = relax.vars.pre[v], s = slackOf[v];
        if (ph == ReluPhase::Leq0) {
            rows.push_back({lp::RowSense::LessEq, 0.0, {{1.0, c}, {-1.0, s}}});
            rows.push_back({lp::RowSense::LessEq, 0.0, {{1.0, d}, {-1.0, s}}});
            rows.push_back({lp::RowSense::LessEq, 0.0, {{-1.0, d}, {-1.0, s}}});
        } else {
            rows.push_back({lp::RowSense::LessEq, 0.0, {{1.0, d}, {-1.0, c}, {-1.0, s}}});
        }
    }
    for (const auto& [v, e] : fixture.pool) {
        int d = relax.vars.value[v];
        int p = relax.vars.value[net.node(v).in[e].src];
        int s = slackOf[v];
        rows.push_back({lp::RowSense::LessEq, 0.0, {{1.0, d}, {-1.0, p}, {-1.0, s}}});
        rows.push_back({lp::RowSense::LessEq, 0.0, {{-1.0, d}, {1.0, p}, {-1.0, s}}});
    }
    elp.pushBatch("elastic", std::move(rows));
    elp.setObjective(objective);

    std::vector<int> hardened;
    std::set<int> hard;
    while (true) {
        lp::Outcome out = elp.solve();
        ++lpSolves_;
        if (out.status == lp::SolveStatus::Infeasible)
            break;
        if (out.status == lp::SolveStatus::Unbounded)
            throw Error(ErrorCode::Numeric, "slack minimization unbounded");
        if (out.objective <= kPivotTol)
            throw Error(ErrorCode::NotInfeasible,
                        "fixture admits a zero-slack point; nothing to blame");
        int best = -1;
        double bestVal = -kInf;
        for (int v : nodes) {
            if (hard.count(v))
                continue;
            double sv = out.solution[slackOf[v]];
            if (sv > bestVal) {
                bestVal = sv;
                best = v;
            }
        }
        if (best < 0)
            throw Error(ErrorCode::NotInfeasible,
                        "all slacks hardened yet the program stays feasible");
        elp.tightenBound(slackOf[best], lp::LinearProgram::BoundSide::Upper, 0.0);
        hard.insert(best);
        hardened.push_back(best);
    }
    std::sort(hardened.begin(), hardened.end());

    // One strict solve confirms the blamed subset really is infeasible.
    PhaseFixture sub;
    for (int v : hardened) {
        auto it = fixture.relu.find(v);
        if (it != fixture.relu.end())
            sub.relu[v] = it->second;
        else
            sub.pool[v] = fixture.pool.at(v);
    }
    auto tagged = fixtureConstraints(problem_, relax.vars, sub);
    std::vector<lp::Row> strict;
    strict.reserve(tagged.size());
    for (auto& [node, row] : tagged)
        strict.push_back(std::move(row));
    relax.lp.pushBatch("recheck", std::move(strict));
    relax.lp.clearObjective();
    lp::Outcome verdict = relax.lp.solve();
    ++lpSolves_;
    relax.lp.popBatch("recheck");
    if (verdict.status != lp::SolveStatus::Infeasible)
        return nodes; // numerics disagreed with the slack run; blame everything
    return hardened;
}

} // namespace nnv
