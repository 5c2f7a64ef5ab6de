#include "nnv/sat_solver.hpp"

#include <algorithm>

namespace nnv::sat {

Var Solver::newVar() {
    Var v = varCount();
    assigns_.push_back(LBool::Undef);
    level_.push_back(0);
    reason_.push_back(kNoClause);
    activity_.push_back(0.0);
    savedPhase_.push_back(false);
    watches_.emplace_back();
    watches_.emplace_back();
    return v;
}

std::vector<Lit> Solver::decisionLiterals() const {
    std::vector<Lit> out;
    out.reserve(trailLim_.size());
    for (int lim : trailLim_)
        out.push_back(trail_[lim]);
    return out;
}

void Solver::enqueue(Lit p, ClauseRef from) {
    Var v = var(p);
    assigns_[v] = sign(p) ? LBool::True : LBool::False;
    level_[v] = decisionLevel();
    reason_[v] = from;
    trail_.push_back(p);
}

void Solver::attach(ClauseRef cr) {
    const Clause& c = clauses_[cr];
    watches_[c.lits[0].code].push_back(cr);
    watches_[c.lits[1].code].push_back(cr);
}

void Solver::addClauseRoot(std::vector<Lit> lits) {
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    for (std::size_t i = 1; i < lits.size(); ++i)
        if (lits[i] == ~lits[i - 1])
            return; // tautology
    std::vector<Lit> kept;
    for (Lit l : lits) {
        if (value(l) == LBool::True)
            return; // satisfied at the root for good
        if (value(l) == LBool::False)
            continue;
        kept.push_back(l);
    }
    if (kept.empty())
        throw Error(ErrorCode::RootConflict, "clause contradicts the root assignment");
    if (kept.size() == 1) {
        enqueue(kept[0], kNoClause);
        return;
    }
    clauses_.push_back({std::move(kept)});
    attach(static_cast<ClauseRef>(clauses_.size()) - 1);
}

ClauseRef Solver::propagate() {
    while (qhead_ < trail_.size()) {
        Lit p = trail_[qhead_++];
        Lit falseLit = ~p;
        std::vector<ClauseRef>& ws = watches_[falseLit.code];
        std::size_t i = 0, j = 0;
        while (i < ws.size()) {
            ClauseRef cr = ws[i++];
            Clause& c = clauses_[cr];
            if (c.lits[0] == falseLit)
                std::swap(c.lits[0], c.lits[1]);
            if (value(c.lits[0]) == LBool::True) {
                ws[j++] = cr;
                continue;
            }
            bool moved = false;
            for (std::size_t k = 2; k < c.lits.size(); ++k) {
                if (value(c.lits[k]) != LBool::False) {
                    std::swap(c.lits[1], c.lits[k]);
                    watches_[c.lits[1].code].push_back(cr);
                    moved = true;
                    break;
                }
            }
            if (moved)
                continue;
            ws[j++] = cr; // stays watched here
            if (value(c.lits[0]) == LBool::False) {
                while (i < ws.size())
                    ws[j++] = ws[i++];
                ws.resize(j);
                qhead_ = trail_.size();
                return cr;
            }
            enqueue(c.lits[0], cr);
        }
        ws.resize(j);
    }
    return kNoClause;
}

void Solver::bumpVar(Var v) {
    activity_[v] += varInc_;
    if (activity_[v] > 1e100) {
        for (double& a : activity_)
            a *= 1e-100;
        varInc_ *= 1e-100;
    }
}

void Solver::analyze(ClauseRef confl, std::vector<Lit>& outLearnt, int& outBtLevel) {
    if (decisionLevel() == 0)
        throw Error(ErrorCode::RootConflict, "conflict at the root level");
    std::vector<bool> seen(assigns_.size(), false);
    outLearnt.clear();
    outLearnt.push_back(Lit{-1}); // slot for the asserting literal
    int pathC = 0;
    Lit p{-1};
    std::size_t index = trail_.size();
    ClauseRef reasonRef = confl;
    do {
        const Clause& c = clauses_[reasonRef];
        for (std::size_t k = (p.code < 0 ? 0 : 1); k < c.lits.size(); ++k) {
            Lit q = c.lits[k];
            Var v = var(q);
            if (!seen[v] && level_[v] > 0) {
                seen[v] = true;
                bumpVar(v);
                if (level_[v] >= decisionLevel())
                    ++pathC;
                else
                    outLearnt.push_back(q);
            }
        }
        while (!seen[var(trail_[--index])]) {
        }
        p = trail_[index];
        seen[var(p)] = false;
        reasonRef = reason_[var(p)];
        --pathC;
    } while (pathC > 0);
    outLearnt[0] = ~p;

    if (outLearnt.size() == 1) {
        outBtLevel = 0;
    } else {
        std::size_t maxI = 1;
        for (std::size_t k = 2; k < outLearnt.size(); ++k)
            if (level_[var(outLearnt[k])] > level_[var(outLearnt[maxI])])
                maxI = k;
        std::swap(outLearnt[1], outLearnt[maxI]);
        outBtLevel = level_[var(outLearnt[1])];
    }
    varInc_ /= 0.95;
}

void Solver::recordLearnt(const std::vector<Lit>& lits, int btLevel) {
    cancelUntil(btLevel);
    if (lits.size() == 1) {
        enqueue(lits[0], kNoClause);
        return;
    }
    clauses_.push_back({lits});
    ClauseRef cr = static_cast<ClauseRef>(clauses_.size()) - 1;
    attach(cr);
    enqueue(lits[0], cr);
}

void Solver::newDecision(Lit p) {
    trailLim_.push_back(static_cast<int>(trail_.size()));
    enqueue(p, kNoClause);
}

void Solver::cancelUntil(int level) {
    if (decisionLevel() <= level)
        return;
    for (std::size_t i = trail_.size(); i > static_cast<std::size_t>(trailLim_[level]);) {
        Var v = var(trail_[--i]);
        savedPhase_[v] = assigns_[v] == LBool::True;
        assigns_[v] = LBool::Undef;
        reason_[v] = kNoClause;
        level_[v] = 0;
    }
    trail_.resize(trailLim_[level]);
    trailLim_.resize(level);
    qhead_ = trail_.size();
}

int Solver::pickBranchVar() const {
    int best = -1;
    for (int v = 0; v < varCount(); ++v)
        if (assigns_[v] == LBool::Undef && (best < 0 || activity_[v] > activity_[best]))
            best = v;
    return best;
}

Lit Solver::decide() {
    int v = pickBranchVar();
    if (v < 0)
        throw Error(ErrorCode::AllAssigned, "no unassigned variable to branch on");
    return mkLit(v, savedPhase_[v]);
}

void Solver::pushPending(std::vector<Lit> lits) { pending_.push_back(std::move(lits)); }

ClauseRef Solver::mergeOnePending() {
    std::vector<Lit> lits = std::move(pending_.front());
    pending_.pop_front();
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    for (std::size_t i = 1; i < lits.size(); ++i)
        if (lits[i] == ~lits[i - 1])
            return kNoClause;
    std::vector<Lit> kept;
    for (Lit l : lits) {
        if (value(l) == LBool::True && level_[var(l)] == 0)
            return kNoClause;
        if (value(l) == LBool::False && level_[var(l)] == 0)
            continue;
        kept.push_back(l);
    }
    if (kept.empty())
        throw Error(ErrorCode::RootConflict, "queued clause contradicts the root assignment");

    // Watch the two best literals: non-false before false, then by level.
    auto rank = [&](Lit l) {
        if (value(l) != LBool::False)
            return std::pair<int, int>(1, 0);
        return std::pair<int, int>(0, level_[var(l)]);
    };
    std::stable_sort(kept.begin(), kept.end(),
                     [&](Lit a, Lit b) { return rank(a) > rank(b); });

    if (kept.size() == 1) {
        Lit l = kept[0];
        if (value(l) == LBool::True)
            return kNoClause; // holds under stronger assumptions already
        clauses_.push_back({std::move(kept)});
        ClauseRef cr = static_cast<ClauseRef>(clauses_.size()) - 1;
        if (value(l) == LBool::Undef) {
            enqueue(l, cr);
            return kNoClause;
        }
        cancelUntil(level_[var(l)]);
        return cr;
    }

    bool allFalse = value(kept[0]) == LBool::False;
    int maxLvl = level_[var(kept[0])];
    bool unitImplied = value(kept[0]) == LBool::Undef && value(kept[1]) == LBool::False;
    clauses_.push_back({std::move(kept)});
    ClauseRef cr = static_cast<ClauseRef>(clauses_.size()) - 1;
    attach(cr);
    if (allFalse) {
        cancelUntil(maxLvl);
        return cr;
    }
    if (unitImplied)
        enqueue(clauses_[cr].lits[0], cr);
    return kNoClause;
}

bool Solver::solveWithAssumptions(const std::vector<Lit>& assumps) {
    pending_.clear();
    cancelUntil(0);
    try {
        while (true) {
            ClauseRef confl = propagate();
            if (confl != kNoClause) {
                std::vector<Lit> learnt;
                int bt = 0;
                analyze(confl, learnt, bt);
                recordLearnt(learnt, bt);
                continue;
            }
            bool advanced = false;
            for (Lit a : assumps) {
                if (value(a) == LBool::False)
                    return false;
                if (value(a) == LBool::Undef) {
                    newDecision(a);
                    advanced = true;
                    break;
                }
            }
            if (advanced)
                continue;
            int v = pickBranchVar();
            if (v < 0)
                return true;
            newDecision(mkLit(v, savedPhase_[v]));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::RootConflict)
            return false;
        throw;
    }
}

bool Solver::extendable() const {
    Solver probe(*this);
    return probe.solveWithAssumptions(decisionLiterals());
}

long long lubySequence(int i) {
    int k = 1;
    while ((1LL << k) - 1 < i)
        ++k;
    while ((1LL << k) - 1 != i) {
        i -= static_cast<int>((1LL << (k - 1))) - 1;
        k = 1;
        while ((1LL << k) - 1 < i)
            ++k;
    }
    return 1LL << (k - 1);
}

PhaseVars initPhaseEncoding(const Network& net, Solver& solver) {
    PhaseVars pv;
    pv.reluGeq.resize(net.size(), -1);
    pv.reluLeq.resize(net.size(), -1);
    pv.poolEdge.resize(net.size());
    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        if (n.type == NodeType::ReLU) {
            int geq = pv.reluGeq[i] = solver.newVar();
            int leq = pv.reluLeq[i] = solver.newVar();
            solver.addClauseRoot({mkLit(geq), mkLit(leq)});
            solver.addClauseRoot({~mkLit(geq), ~mkLit(leq)});
        } else if (n.type == NodeType::MaxPool) {
            std::vector<Lit> atLeastOne;
            for (std::size_t e = 0; e < n.in.size(); ++e) {
                pv.poolEdge[i].push_back(solver.newVar());
                atLeastOne.push_back(mkLit(pv.poolEdge[i].back()));
            }
            solver.addClauseRoot(atLeastOne);
            for (std::size_t a = 0; a < n.in.size(); ++a)
                for (std::size_t b = a + 1; b < n.in.size(); ++b)
                    solver.addClauseRoot({~mkLit(pv.poolEdge[i][a]), ~mkLit(pv.poolEdge[i][b])});
        }
    }
    return pv;
}

} // namespace nnv::sat
