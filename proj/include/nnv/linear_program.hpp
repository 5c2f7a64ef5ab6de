#pragma once

#include <string>
#include <vector>

#include "nnv/common.hpp"

namespace nnv::lp {

enum class RowSense { LessEq, GreaterEq, Equal };

struct Term {
    double coeff;
    int var;
};

// sum(coeff * x[var])  <sense>  rhs
struct Row {
    RowSense sense;
    double rhs;
    std::vector<Term> terms;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

struct Outcome {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> solution; // per variable, valid when Optimal
    double objective = 0.0;
};

// Linear program over bounded variables with removable constraint batches.
// Constraints live in named batches forming a stack; the base batch holds
// permanent rows. Batches must be popped in reverse push order.
class LinearProgram {
public:
    LinearProgram() { batches_.push_back({"", {}}); }

    int addVariable(const std::string& name, double lower, double upper);
    int variableCount() const { return static_cast<int>(names_.size()); }
    const std::string& variableName(int v) const { return names_[v]; }
    int variableIndex(const std::string& name) const;
    double lowerBound(int v) const { return lower_[v]; }
    double upperBound(int v) const { return upper_[v]; }
    void setBounds(int v, double lower, double upper);

    enum class BoundSide { Lower, Upper };
    // Monotone tightening: a looser value than the current bound is ignored.
    // Crossing the opposite bound beyond the feasibility tolerance throws
    // BoundCross; crossings within tolerance are clamped.
    void tightenBound(int v, BoundSide side, double value);

    void setObjective(std::vector<Term> minimize);
    void clearObjective() { objective_.clear(); }
    const std::vector<Term>& objective() const { return objective_; }

    void addRow(Row row); // appends to the base batch
    void pushBatch(const std::string& label, std::vector<Row> rows);
    void popBatch(const std::string& label);
    int batchCount() const { return static_cast<int>(batches_.size()); }
    const std::string& batchLabel(int i) const { return batches_[i].label; }
    const std::vector<Row>& batchRows(int i) const { return batches_[i].rows; }
    int rowCount() const;

    // Primal simplex over the current batches. Deterministic; throws Numeric
    // when the pivot sequence fails to converge.
    Outcome solve() const;

private:
    struct Batch {
        std::string label;
        std::vector<Row> rows;
    };

    void validateRow(const Row& row) const;

    std::vector<std::string> names_;
    std::vector<double> lower_, upper_;
    std::vector<Term> objective_;
    std::vector<Batch> batches_;
};

} // namespace nnv::lp
