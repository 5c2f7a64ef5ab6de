#include <algorithm>
#include <cmath>
#include <vector>

#include "nnv/linear_program.hpp"

// Primal simplex over a dense tableau with individually bounded variables.
// Each constraint row gets one slack variable whose bounds encode the row
// sense. Infeasibility is resolved first by minimizing the sum of bound
// violations of the basic variables (composite objective); the real cost
// vector takes over once the basis is feasible. Pricing is Dantzig's rule
// with a switch to Bland's rule after a stall, which also guards against
// cycling on degenerate vertices.

namespace nnv::lp {

namespace {

enum class VarState { Basic, AtLower, AtUpper, Free };

constexpr double kDualTol = 1e-9;
constexpr double kRatioTieTol = 1e-12;

} // namespace

Outcome LinearProgram::solve() const {
    std::vector<const Row*> rows;
    for (const Batch& b : batches_)
        for (const Row& r : b.rows)
            rows.push_back(&r);

    const int ns = variableCount();
    const int m = static_cast<int>(rows.size());
    const int n = ns + m;
    const int rhsCol = n;

    std::vector<std::vector<double>> T(m, std::vector<double>(n + 1, 0.0));
    std::vector<double> lb(n), ub(n);
    for (int j = 0; j < ns; ++j) {
        lb[j] = lower_[j];
        ub[j] = upper_[j];
    }
    for (int i = 0; i < m; ++i) {
        const Row& r = *rows[i];
        for (const Term& t : r.terms)
            T[i][t.var] += t.coeff;
        T[i][ns + i] = 1.0;
        T[i][rhsCol] = r.rhs;
        switch (r.sense) {
        case RowSense::LessEq:
            lb[ns + i] = 0.0;
            ub[ns + i] = kInf;
            break;
        case RowSense::GreaterEq:
            lb[ns + i] = -kInf;
            ub[ns + i] = 0.0;
            break;
        case RowSense::Equal:
            lb[ns + i] = 0.0;
            ub[ns + i] = 0.0;
            break;
        }
    }

    std::vector<double> cost(n, 0.0);
    for (const Term& t : objective_)
        cost[t.var] += t.coeff;

    std::vector<VarState> st(n);
    std::vector<double> xval(n, 0.0); // nonbasic resting values
    for (int j = 0; j < ns; ++j) {
        if (lb[j] > -kInf) {
            st[j] = VarState::AtLower;
            xval[j] = lb[j];
        } else if (ub[j] < kInf) {
            st[j] = VarState::AtUpper;
            xval[j] = ub[j];
        } else {
            st[j] = VarState::Free;
            xval[j] = 0.0;
        }
    }
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
        basis[i] = ns + i;
        st[ns + i] = VarState::Basic;
    }

    std::vector<double> xB(m, 0.0);
    auto computeBasics = [&] {
        for (int i = 0; i < m; ++i) {
            double s = T[i][rhsCol];
            const std::vector<double>& row = T[i];
            for (int j = 0; j < n; ++j) {
                if (st[j] == VarState::Basic)
                    continue;
                double v = xval[j];
                if (v != 0.0 && row[j] != 0.0)
                    s -= row[j] * v;
            }
            xB[i] = s;
        }
    };

    const int maxIter = 10000 + 200 * (m + n);
    bool bland = false;
    int stall = 0;
    double lastMeasure = kInf;
    bool lastPhase1 = true;
    std::vector<double> mult(m, 0.0);

    for (int iter = 0; iter < maxIter; ++iter) {
        computeBasics();

        double infeasSum = 0.0;
        for (int i = 0; i < m; ++i) {
            int b = basis[i];
            if (xB[i] > ub[b] + kFeasTol)
                infeasSum += xB[i] - ub[b];
            else if (xB[i] < lb[b] - kFeasTol)
                infeasSum += lb[b] - xB[i];
        }
        const bool phase1 = infeasSum > 0.0;

        if (phase1) {
            for (int i = 0; i < m; ++i) {
                int b = basis[i];
                if (xB[i] > ub[b] + kFeasTol)
                    mult[i] = 1.0;
                else if (xB[i] < lb[b] - kFeasTol)
                    mult[i] = -1.0;
                else
                    mult[i] = 0.0;
            }
        } else {
            for (int i = 0; i < m; ++i)
                mult[i] = cost[basis[i]];
        }

        double measure = infeasSum;
        if (!phase1) {
            measure = 0.0;
            for (int i = 0; i < m; ++i)
                measure += cost[basis[i]] * xB[i];
            for (int j = 0; j < n; ++j)
                if (st[j] != VarState::Basic && cost[j] != 0.0)
                    measure += cost[j] * xval[j];
        }
        if (phase1 != lastPhase1) {
            lastMeasure = kInf;
            stall = 0;
        }
        lastPhase1 = phase1;
        if (measure < lastMeasure - 1e-12) {
            lastMeasure = measure;
            stall = 0;
        } else if (++stall > 2 * (m + n) + 200) {
            bland = true;
        }

        int enter = -1, dir = 0;
        double bestScore = kDualTol;
        for (int j = 0; j < n; ++j) {
            if (st[j] == VarState::Basic)
                continue;
            if (st[j] != VarState::Free && ub[j] - lb[j] < 1e-15)
                continue; // fixed variables never enter
            double d = phase1 ? 0.0 : cost[j];
            for (int i = 0; i < m; ++i)
                if (mult[i] != 0.0 && T[i][j] != 0.0)
                    d -= mult[i] * T[i][j];
            int dj = 0;
            if (st[j] == VarState::AtLower && d < -kDualTol)
                dj = +1;
            else if (st[j] == VarState::AtUpper && d > kDualTol)
                dj = -1;
            else if (st[j] == VarState::Free && std::fabs(d) > kDualTol)
                dj = d < 0 ? +1 : -1;
            if (dj == 0)
                continue;
            if (bland) {
                enter = j;
                dir = dj;
                break;
            }
            if (std::fabs(d) > bestScore) {
                bestScore = std::fabs(d);
                enter = j;
                dir = dj;
            }
        }

        if (enter < 0) {
            if (phase1)
                return Outcome{SolveStatus::Infeasible, {}, 0.0};
            Outcome out;
            out.status = SolveStatus::Optimal;
            out.solution.resize(ns);
            std::vector<int> rowOf(n, -1);
            for (int i = 0; i < m; ++i)
                rowOf[basis[i]] = i;
            for (int j = 0; j < ns; ++j) {
                double v = st[j] == VarState::Basic ? xB[rowOf[j]] : xval[j];
                v = std::max(v, lb[j]);
                v = std::min(v, ub[j]);
                out.solution[j] = v;
            }
            out.objective = 0.0;
            for (int j = 0; j < ns; ++j)
                if (cost[j] != 0.0)
                    out.objective += cost[j] * out.solution[j];
            return out;
        }

        // Ratio test: the entering variable moves by t in direction dir until
        // a basic variable hits a bound or the entering variable reaches its
        // own opposite bound. Infeasible basics block only at the bound they
        // violate, where the composite gradient changes.
        double span = kInf;
        if (st[enter] != VarState::Free && lb[enter] > -kInf && ub[enter] < kInf)
            span = ub[enter] - lb[enter];

        double tmin = kInf;
        int leaveRow = -1;
        bool leaveAtUpper = false;
        for (int i = 0; i < m; ++i) {
            double a = T[i][enter];
            if (std::fabs(a) <= kPivotTol)
                continue;
            double rate = -static_cast<double>(dir) * a;
            int b = basis[i];
            bool blocked = false;
            double t = 0.0;
            bool hitUpper = false;
            if (xB[i] > ub[b] + kFeasTol) {
                if (rate < 0.0) {
                    t = (xB[i] - ub[b]) / (-rate);
                    hitUpper = true;
                    blocked = true;
                }
            } else if (xB[i] < lb[b] - kFeasTol) {
                if (rate > 0.0) {
                    t = (lb[b] - xB[i]) / rate;
                    hitUpper = false;
                    blocked = true;
                }
            } else if (rate > 0.0) {
                if (ub[b] < kInf) {
                    t = (ub[b] - xB[i]) / rate;
                    hitUpper = true;
                    blocked = true;
                }
            } else {
                if (lb[b] > -kInf) {
                    t = (xB[i] - lb[b]) / (-rate);
                    hitUpper = false;
                    blocked = true;
                }
            }
            if (!blocked)
                continue;
            t = std::max(t, 0.0); // tolerance drift can give a tiny negative ratio
            if (leaveRow < 0 || t < tmin - kRatioTieTol) {
                tmin = t;
                leaveRow = i;
                leaveAtUpper = hitUpper;
            } else if (t <= tmin + kRatioTieTol) {
                bool better = bland ? basis[i] < basis[leaveRow]
                                    : std::fabs(a) > std::fabs(T[leaveRow][enter]);
                if (better) {
                    tmin = std::min(tmin, t);
                    leaveRow = i;
                    leaveAtUpper = hitUpper;
                }
            }
        }

        if (leaveRow < 0 && span == kInf) {
            if (phase1)
                throw Error(ErrorCode::Numeric, "simplex: unbounded infeasibility descent");
            return Outcome{SolveStatus::Unbounded, {}, 0.0};
        }

        if (leaveRow < 0 || span <= tmin) {
            st[enter] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
            xval[enter] = dir > 0 ? ub[enter] : lb[enter];
            continue;
        }

        double piv = T[leaveRow][enter];
        std::vector<double>& prow = T[leaveRow];
        double inv = 1.0 / piv;
        for (int j = 0; j <= rhsCol; ++j)
            prow[j] *= inv;
        prow[enter] = 1.0;
        for (int i = 0; i < m; ++i) {
            if (i == leaveRow)
                continue;
            double f = T[i][enter];
            if (f == 0.0)
                continue;
            std::vector<double>& row = T[i];
            for (int j = 0; j <= rhsCol; ++j)
                row[j] -= f * prow[j];
            row[enter] = 0.0;
        }
        int leaving = basis[leaveRow];
        st[leaving] = leaveAtUpper ? VarState::AtUpper : VarState::AtLower;
        xval[leaving] = leaveAtUpper ? ub[leaving] : lb[leaving];
        basis[leaveRow] = enter;
        st[enter] = VarState::Basic;
    }

    throw Error(ErrorCode::Numeric, "simplex: iteration limit exceeded");
}

} // namespace nnv::lp
