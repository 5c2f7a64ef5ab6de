#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nnv/common.hpp"

namespace nnv {

enum class NodeType { Input, Linear, ReLU, MaxPool };

struct InEdge {
    int src;
    double weight;
};

struct Node {
    std::string name;
    NodeType type = NodeType::Input;
    double bias = 0.0;
    std::vector<InEdge> in;
};

// Feed-forward network over a DAG of input, linear, ReLU and MaxPool nodes.
// Nodes are stored in declaration order, which is a topological order: every
// edge points from a lower index to a higher one.
class Network {
public:
    int addNode(Node node);
    void finalize();

    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_[i]; }
    int indexOf(const std::string& name) const;

    int inputCount() const { return static_cast<int>(inputs_.size()); }
    int outputCount() const { return static_cast<int>(outputs_.size()); }
    const std::vector<int>& inputs() const { return inputs_; }
    const std::vector<int>& outputs() const { return outputs_; }

    bool isPhaseNode(int i) const {
        NodeType t = nodes_[i].type;
        return t == NodeType::ReLU || t == NodeType::MaxPool;
    }

private:
    std::vector<Node> nodes_;
    std::vector<int> inputs_;
    std::vector<int> outputs_;
    std::map<std::string, int> byName_;
};

enum class Sense { LessEq, GreaterEq };

struct ConstraintTerm {
    double coeff;
    int node;
};

// sum(coeff * value(node))  <sense>  rhs
struct LinearConstraint {
    Sense sense;
    double rhs;
    std::vector<ConstraintTerm> terms;
};

struct VerificationProblem {
    Network net;
    std::vector<LinearConstraint> property;

    // Per-input (lower, upper) box derived from the single-variable property
    // constraints. Throws UnboundedInput when some input has no finite bound
    // on either side.
    std::vector<std::pair<double, double>> inputBox() const;
    bool boxEmpty() const;
};

using Valuation = std::vector<double>;

VerificationProblem parseProblem(std::istream& in);
VerificationProblem parseProblemText(const std::string& text);
VerificationProblem loadProblemFile(const std::string& path);

// Forward evaluation; inputs are in input declaration order.
Valuation evaluate(const Network& net, const std::vector<double>& inputs);

// Weighted input sum plus bias of a non-input node under a valuation.
double preActivation(const Network& net, const Valuation& val, int nodeIndex);

// 1-based index of the largest output; ties resolve to the lowest index.
int classify(const Network& net, const std::vector<double>& inputs);

// Signed satisfaction slack; nonnegative means satisfied.
double constraintSlack(const LinearConstraint& c, const Valuation& val);

// True when every property constraint holds on the forward evaluation of
// `inputs` up to `tolerance`.
bool checkWitness(const VerificationProblem& problem,
                  const std::vector<double>& inputs,
                  double tolerance = kSafetyMargin);

std::string formatDouble(double v);
std::string toText(const VerificationProblem& problem);

} // namespace nnv
