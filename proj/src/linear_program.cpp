#include "nnv/linear_program.hpp"

#include <algorithm>
#include <cmath>

namespace nnv::lp {

int LinearProgram::addVariable(const std::string& name, double lower, double upper) {
    if (lower > upper + kFeasTol)
        throw Error(ErrorCode::BoundCross, "variable '" + name + "' has crossing bounds");
    names_.push_back(name);
    lower_.push_back(std::min(lower, upper));
    upper_.push_back(upper);
    return static_cast<int>(names_.size()) - 1;
}

int LinearProgram::variableIndex(const std::string& name) const {
    for (int i = 0; i < variableCount(); ++i)
        if (names_[i] == name)
            return i;
    return -1;
}

void LinearProgram::setBounds(int v, double lower, double upper) {
    if (v < 0 || v >= variableCount())
        throw Error(ErrorCode::UnknownVar, "no such variable");
    if (lower > upper + kFeasTol)
        throw Error(ErrorCode::BoundCross, "variable '" + names_[v] + "' has crossing bounds");
    lower_[v] = std::min(lower, upper);
    upper_[v] = upper;
}

void LinearProgram::tightenBound(int v, BoundSide side, double value) {
    if (v < 0 || v >= variableCount())
        throw Error(ErrorCode::UnknownVar, "no such variable");
    if (side == BoundSide::Lower) {
        double next = std::max(lower_[v], value);
        if (next > upper_[v] + kFeasTol)
            throw Error(ErrorCode::BoundCross, "lower bound of '" + names_[v] + "' crosses its upper bound");
        lower_[v] = std::min(next, upper_[v]);
    } else {
        double next = std::min(upper_[v], value);
        if (next < lower_[v] - kFeasTol)
            throw Error(ErrorCode::BoundCross, "upper bound of '" + names_[v] + "' crosses its lower bound");
        upper_[v] = std::max(next, lower_[v]);
    }
}

void LinearProgram::setObjective(std::vector<Term> minimize) {
    for (const Term& t : minimize)
        if (t.var < 0 || t.var >= variableCount())
            throw Error(ErrorCode::UnknownVar, "objective references an unknown variable");
    objective_ = std::move(minimize);
}

void LinearProgram::validateRow(const Row& row) const {
    for (const Term& t : row.terms)
        if (t.var < 0 || t.var >= variableCount())
            throw Error(ErrorCode::UnknownVar, "row references an unknown variable");
}

void LinearProgram::addRow(Row row) {
    validateRow(row);
    batches_.front().rows.push_back(std::move(row));
}

void LinearProgram::pushBatch(const std::string& label, std::vector<Row> rows) {
    for (const Row& r : rows)
        validateRow(r);
    batches_.push_back({label, std::move(rows)});
}

void LinearProgram::popBatch(const std::string& label) {
    if (batches_.size() <= 1 || batches_.back().label != label)
        throw Error(ErrorCode::BatchOrder, "batch '" + label + "' is not on top of the stack");
    batches_.pop_back();
}

int LinearProgram::rowCount() const {
    int n = 0;
    for (const Batch& b : batches_)
        n += static_cast<int>(b.rows.size());
    return n;
}

} // namespace nnv::lp
