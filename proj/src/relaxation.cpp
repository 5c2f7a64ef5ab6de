#include "nnv/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace nnv {

BoundsMap computeInitialBounds(const VerificationProblem& problem) {
    const Network& net = problem.net;
    auto box = problem.inputBox();
    BoundsMap bounds;
    bounds.node.resize(net.size());

    int nextInput = 0;
    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        NodeBounds& nb = bounds.node[i];
        switch (n.type) {
        case NodeType::Input:
            nb.lo = box[nextInput].first;
            nb.hi = box[nextInput].second;
            ++nextInput;
            break;
        case NodeType::Linear:
        case NodeType::ReLU: {
            double lo = n.bias, hi = n.bias;
            for (const InEdge& e : n.in) {
                const NodeBounds& p = bounds.node[e.src];
                if (e.weight >= 0) {
                    lo += e.weight * p.lo;
                    hi += e.weight * p.hi;
                } else {
                    lo += e.weight * p.hi;
                    hi += e.weight * p.lo;
                }
            }
            if (n.type == NodeType::Linear) {
                nb.lo = lo;
                nb.hi = hi;
            } else {
                nb.preLo = lo;
                nb.preHi = hi;
                nb.lo = std::max(lo, 0.0);
                nb.hi = std::max(hi, 0.0);
            }
            break;
        }
        case NodeType::MaxPool: {
            double lo = -kInf, hi = -kInf;
            for (const InEdge& e : n.in) {
                lo = std::max(lo, bounds.node[e.src].lo);
                hi = std::max(hi, bounds.node[e.src].hi);
            }
            nb.lo = lo;
            nb.hi = hi;
            break;
        }
        }
    }
    return bounds;
}

Relaxation buildRelaxation(const VerificationProblem& problem, const BoundsMap& bounds) {
    const Network& net = problem.net;
    Relaxation relax;
    relax.vars.value.resize(net.size(), -1);
    relax.vars.pre.resize(net.size(), -1);
    relax.phasePinned.resize(net.size(), false);

    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        const NodeBounds& nb = bounds.node[i];
        relax.vars.value[i] = relax.lp.addVariable(n.name, nb.lo, nb.hi);
        if (n.type == NodeType::ReLU)
            relax.vars.pre[i] = relax.lp.addVariable(n.name + "__pre", nb.preLo, nb.preHi);
    }

    std::vector<lp::Row> netRows;
    auto weightedSumRow = [&](int i, int lhsVar) {
        // lhsVar - sum(w * value(src)) = bias
        lp::Row row{lp::RowSense::Equal, net.node(i).bias, {}};
        row.terms.push_back({1.0, lhsVar});
        std::map<int, double> acc;
        for (const InEdge& e : net.node(i).in)
            acc[relax.vars.value[e.src]] -= e.weight;
        for (const auto& [var, w] : acc)
            if (w != 0.0)
                row.terms.push_back({w, var});
        return row;
    };

    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        const NodeBounds& nb = bounds.node[i];
        int d = relax.vars.value[i];
        switch (n.type) {
        case NodeType::Input:
            break;
        case NodeType::Linear:
            netRows.push_back(weightedSumRow(i, d));
            break;
        case NodeType::ReLU: {
            int c = relax.vars.pre[i];
            netRows.push_back(weightedSumRow(i, c));
            if (nb.preHi <= nb.preLo) {
                // degenerate interval: the value is fully determined
                netRows.push_back({lp::RowSense::Equal, std::max(nb.preLo, 0.0), {{1.0, d}}});
                relax.phasePinned[i] = true;
            } else if (nb.preHi <= 0.0) {
                netRows.push_back({lp::RowSense::Equal, 0.0, {{1.0, d}}});
                relax.phasePinned[i] = true;
            } else if (nb.preLo >= 0.0) {
                netRows.push_back({lp::RowSense::Equal, 0.0, {{1.0, d}, {-1.0, c}}});
                relax.phasePinned[i] = true;
            } else {
                // d >= c, and d below the chord from (preLo,0) to (preHi,preHi)
                netRows.push_back({lp::RowSense::GreaterEq, 0.0, {{1.0, d}, {-1.0, c}}});
                double u = nb.preHi, l = nb.preLo;
                netRows.push_back({lp::RowSense::LessEq, -u * l, {{u - l, d}, {-u, c}}});
            }
            break;
        }
        case NodeType::MaxPool: {
            double sumLo = 0.0, maxLo = -kInf;
            for (const InEdge& e : n.in) {
                netRows.push_back({lp::RowSense::GreaterEq, 0.0,
                                   {{1.0, d}, {-1.0, relax.vars.value[e.src]}}});
                sumLo += bounds.node[e.src].lo;
                maxLo = std::max(maxLo, bounds.node[e.src].lo);
            }
            lp::Row sum{lp::RowSense::GreaterEq, sumLo - maxLo, {}};
            std::map<int, double> acc;
            for (const InEdge& e : n.in)
                acc[relax.vars.value[e.src]] += 1.0;
            for (const auto& [var, w] : acc)
                sum.terms.push_back({w, var});
            sum.terms.push_back({-1.0, d});
            netRows.push_back(std::move(sum));
            if (n.in.size() == 1)
                relax.phasePinned[i] = true;
            break;
        }
        }
    }
    relax.lp.pushBatch("net", std::move(netRows));

    std::vector<lp::Row> propRows;
    for (const LinearConstraint& c : problem.property) {
        lp::Row row;
        row.sense = c.sense == Sense::LessEq ? lp::RowSense::LessEq : lp::RowSense::GreaterEq;
        row.rhs = c.rhs;
        for (const ConstraintTerm& t : c.terms)
            row.terms.push_back({t.coeff, relax.vars.value[t.node]});
        propRows.push_back(std::move(row));
    }
    relax.lp.pushBatch("property", std::move(propRows));
    return relax;
}

RefineResult refineBounds(const VerificationProblem& problem, Relaxation& relax,
                          const BoundsMap& initial) {
    const Network& net = problem.net;
    RefineResult result;
    result.bounds = initial;
    std::vector<int> updateCount(net.size(), 0);

    const double kSweepStop = 1.0;
    const long long kUpdateCap = 5000;
    const int kMinUpdates = 3;

    bool capReached = false;
    while (!capReached) {
        double change = 0.0;
        for (int i = 0; i < net.size() && !capReached; ++i) {
            NodeBounds& nb = result.bounds.node[i];
            std::vector<std::pair<int, bool>> work; // (lp var, isPre)
            if (relax.vars.pre[i] >= 0)
                work.push_back({relax.vars.pre[i], true});
            work.push_back({relax.vars.value[i], false});

            for (auto [var, isPre] : work) {
                double& lo = isPre ? nb.preLo : nb.lo;
                double& hi = isPre ? nb.preHi : nb.hi;

                relax.lp.setObjective({{1.0, var}});
                lp::Outcome down = relax.lp.solve();
                ++result.stats.lpSolves;
                if (down.status == lp::SolveStatus::Infeasible) {
                    result.infeasible = true;
                    relax.lp.clearObjective();
                    return result;
                }
                if (down.status == lp::SolveStatus::Optimal) {
                    double newLo = std::min(std::max(lo, down.objective), hi);
                    change += newLo - lo;
                    lo = newLo;
                    relax.lp.tightenBound(var, lp::LinearProgram::BoundSide::Lower, newLo);
                }

                relax.lp.setObjective({{-1.0, var}});
                lp::Outcome up = relax.lp.solve();
                ++result.stats.lpSolves;
                if (up.status == lp::SolveStatus::Infeasible) {
                    result.infeasible = true;
                    relax.lp.clearObjective();
                    return result;
                }
                if (up.status == lp::SolveStatus::Optimal) {
                    double newHi = std::max(std::min(hi, -up.objective), lo);
                    change += hi - newHi;
                    hi = newHi;
                    relax.lp.tightenBound(var, lp::LinearProgram::BoundSide::Upper, newHi);
                }
            }

            ++result.stats.nodeUpdates;
            ++updateCount[i];
            if (result.stats.nodeUpdates >= kUpdateCap &&
                *std::min_element(updateCount.begin(), updateCount.end()) >= kMinUpdates)
                capReached = true;
        }
        ++result.stats.sweeps;
        result.stats.sweepChange.push_back(change);
        relax = buildRelaxation(problem, result.bounds);
        if (capReached) {
            result.stats.stoppedOnUpdateCap = true;
            break;
        }
        if (change < kSweepStop) {
            result.stats.stoppedOnSmallChange = true;
            break;
        }
    }
    result.stats.minNodeUpdates = *std::min_element(updateCount.begin(), updateCount.end());
    return result;
}

std::vector<std::pair<int, lp::Row>> fixtureConstraints(const VerificationProblem& problem,
                                                        const RelaxationVars& vars,
                                                        const PhaseFixture& fixture) {
    std::vector<std::pair<int, lp::Row>> rows;
    for (const auto& [node, phase] : fixture.relu) {
        if (problem.net.node(node).type != NodeType::ReLU)
            throw Error(ErrorCode::InvalidQuery, "fixture names a non-ReLU node");
        int d = vars.value[node];
        int c = vars.pre[node];
        if (phase == ReluPhase::Leq0) {
            rows.push_back({node, {lp::RowSense::Equal, 0.0, {{1.0, d}}}});
            rows.push_back({node, {lp::RowSense::LessEq, 0.0, {{1.0, c}}}});
        } else {
            rows.push_back({node, {lp::RowSense::LessEq, 0.0, {{1.0, d}, {-1.0, c}}}});
        }
    }
    for (const auto& [node, edge] : fixture.pool) {
        const Node& n = problem.net.node(node);
        if (n.type != NodeType::MaxPool || edge < 0 || edge >= static_cast<int>(n.in.size()))
            throw Error(ErrorCode::InvalidQuery, "fixture names an invalid MaxPool edge");
        int d = vars.value[node];
        int p = vars.value[n.in[edge].src];
        rows.push_back({node, {lp::RowSense::Equal, 0.0, {{1.0, d}, {-1.0, p}}}});
    }
    return rows;
}

namespace {

std::string lpNumber(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void writeTerms(std::ostringstream& out, const std::vector<lp::Term>& terms,
                const lp::LinearProgram& program) {
    for (const lp::Term& t : terms) {
        double c = t.coeff;
        out << (c < 0 ? " -" : " +") << lpNumber(std::fabs(c)) << " "
            << program.variableName(t.var);
    }
}

} // namespace

std::string exportLp(const lp::LinearProgram& program) {
    std::ostringstream out;
    out << "Minimize\n";
    if (program.objective().empty()) {
        out << " obj: 0 " << (program.variableCount() > 0 ? program.variableName(0) : "x")
            << "\n";
    } else {
        out << " obj:";
        writeTerms(out, program.objective(), program);
        out << "\n";
    }
    out << "Subject To\n";
    int name = 0;
    for (int b = 0; b < program.batchCount(); ++b) {
        for (const lp::Row& row : program.batchRows(b)) {
            out << " c" << ++name << ":";
            writeTerms(out, row.terms, program);
            switch (row.sense) {
            case lp::RowSense::LessEq:
                out << " <= ";
                break;
            case lp::RowSense::GreaterEq:
                out << " >= ";
                break;
            case lp::RowSense::Equal:
                out << " = ";
                break;
            }
            out << lpNumber(row.rhs) << "\n";
        }
    }
    out << "Bounds\n";
    for (int v = 0; v < program.variableCount(); ++v) {
        double lo = program.lowerBound(v), hi = program.upperBound(v);
        const std::string& n = program.variableName(v);
        if (lo == -kInf && hi == kInf)
            out << " " << n << " free\n";
        else if (lo == hi)
            out << " " << n << " = " << lpNumber(lo) << "\n";
        else if (lo == -kInf)
            out << " " << n << " <= " << lpNumber(hi) << "\n";
        else if (hi == kInf)
            out << " " << n << " >= " << lpNumber(lo) << "\n";
        else
            out << " " << lpNumber(lo) << " <= " << n << " <= " << lpNumber(hi) << "\n";
    }
    out << "End\n";
    return out.str();
}

} // namespace nnv
