#pragma once

#include <deque>
#include <vector>

#include "nnv/network.hpp"

namespace nnv::sat {

using Var = int;

// Literal packed as 2*var for the positive and 2*var+1 for the negated form.
struct Lit {
    int code = -1;

    bool operator==(const Lit& o) const { return code == o.code; }
    bool operator!=(const Lit& o) const { return code != o.code; }
    bool operator<(const Lit& o) const { return code < o.code; }
};

inline Lit mkLit(Var v, bool positive = true) { return Lit{2 * v + (positive ? 0 : 1)}; }
inline Lit operator~(Lit p) { return Lit{p.code ^ 1}; }
inline Var var(Lit p) { return p.code >> 1; }
inline bool sign(Lit p) { return (p.code & 1) == 0; } // true for the positive form

enum class LBool { False, True, Undef };
inline LBool operator!(LBool b) {
    return b == LBool::Undef ? b : (b == LBool::True ? LBool::False : LBool::True);
}

using ClauseRef = int;
constexpr ClauseRef kNoClause = -1;

// Conflict-driven clause learning over two-watched-literal propagation, with
// activity-based branching, phase saving, and a queue of externally supplied
// clauses merged one at a time mid-search. Clauses are never deleted.
class Solver {
public:
    Var newVar();
    int varCount() const { return static_cast<int>(assigns_.size()); }
    int clauseCount() const { return static_cast<int>(clauses_.size()); }

    // Root-level clause. Throws RootConflict if it is empty after
    // simplification or contradicts the root assignment.
    void addClauseRoot(std::vector<Lit> lits);

    LBool value(Var v) const { return assigns_[v]; }
    LBool value(Lit p) const {
        LBool b = assigns_[var(p)];
        return sign(p) ? b : !b;
    }
    int levelOf(Var v) const { return level_[v]; }
    int decisionLevel() const { return static_cast<int>(trailLim_.size()); }
    std::size_t trailSize() const { return trail_.size(); }
    std::vector<Lit> decisionLiterals() const;

    // Unit propagation; returns the conflicting clause or kNoClause.
    ClauseRef propagate();

    // First-unique-implication-point conflict analysis. Bumps activities and
    // decays them. Throws RootConflict when called at decision level zero.
    void analyze(ClauseRef confl, std::vector<Lit>& outLearnt, int& outBtLevel);

    // Backjump and attach the learnt clause from analyze, asserting its first
    // literal.
    void recordLearnt(const std::vector<Lit>& lits, int btLevel);

    void newDecision(Lit p);
    void cancelUntil(int level);

    // Highest-activity unassigned variable (lowest index on ties) with its
    // saved polarity; positive before the first assignment. Throws
    // AllAssigned when no variable is left.
    Lit decide();

    void pushPending(std::vector<Lit> lits);
    bool hasPending() const { return !pending_.empty(); }
    // Integrate one queued clause into the current search state. May backjump
    // (when the clause is falsified) and may enqueue an implied literal.
    // Returns the clause as a conflict when it is falsified, else kNoClause.
    ClauseRef mergeOnePending();

    // Whether the clause set permits some total assignment consistent with
    // the current decisions. Runs a full search on a copy of the solver with
    // the decision literals replayed as assumptions.
    bool extendable() const;

private:
    struct Clause {
        std::vector<Lit> lits;
    };

    void enqueue(Lit p, ClauseRef from);
    void attach(ClauseRef cr);
    int pickBranchVar() const;
    void bumpVar(Var v);
    bool solveWithAssumptions(const std::vector<Lit>& assumps);

    std::vector<Clause> clauses_;
    std::vector<std::vector<ClauseRef>> watches_; // by literal code
    std::vector<LBool> assigns_;
    std::vector<int> level_;
    std::vector<ClauseRef> reason_;
    std::vector<double> activity_;
    std::vector<bool> savedPhase_;
    std::vector<Lit> trail_;
    std::vector<int> trailLim_;
    std::deque<std::vector<Lit>> pending_;
    std::size_t qhead_ = 0;
    double varInc_ = 1.0;
};

// Luby restart sequence 1, 1, 2, 1, 1, 2, 4, ... (1-based index).
long long lubySequence(int i);

// SAT variables carrying the phase choice of each nonlinear node: per ReLU a
// "weighted sum >= 0" variable followed by a "<= 0" variable tied one-hot,
// per MaxPool one variable per incoming edge with at-least-one and pairwise
// exclusion clauses.
struct PhaseVars {
    std::vector<int> reluGeq, reluLeq;      // per node, -1 when not a ReLU
    std::vector<std::vector<int>> poolEdge; // per node, empty when not a MaxPool
};

PhaseVars initPhaseEncoding(const Network& net, Solver& solver);

} // namespace nnv::sat
