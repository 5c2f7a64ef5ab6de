#include "nnv/network.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nnv {

int Network::addNode(Node node) {
    if (byName_.count(node.name))
        throw Error(ErrorCode::DuplicateId, "duplicate node id '" + node.name + "'");
    int idx = static_cast<int>(nodes_.size());
    if (node.type == NodeType::Input) {
        if (!node.in.empty())
            throw Error(ErrorCode::Parse, "input node '" + node.name + "' cannot have incoming edges");
    } else if (node.in.empty()) {
        throw Error(ErrorCode::Parse, "node '" + node.name + "' has no incoming edges");
    }
    for (const InEdge& e : node.in) {
        if (e.src < 0 || e.src >= idx)
            throw Error(e.src >= idx ? ErrorCode::Cycle : ErrorCode::UnknownNode,
                        "edge into '" + node.name + "' references an invalid source");
    }
    byName_[node.name] = idx;
    nodes_.push_back(std::move(node));
    return idx;
}

void Network::finalize() {
    inputs_.clear();
    outputs_.clear();
    std::vector<bool> hasOut(nodes_.size(), false);
    for (const Node& n : nodes_)
        for (const InEdge& e : n.in)
            hasOut[e.src] = true;
    for (int i = 0; i < size(); ++i) {
        if (nodes_[i].type == NodeType::Input)
            inputs_.push_back(i);
        if (!hasOut[i])
            outputs_.push_back(i);
    }
}

int Network::indexOf(const std::string& name) const {
    auto it = byName_.find(name);
    return it == byName_.end() ? -1 : it->second;
}

namespace {

bool validId(const std::string& tok) {
    if (tok.empty())
        return false;
    for (char c : tok)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
            return false;
    return true;
}

double parseNumber(const std::string& tok, int lineNo) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(lineNo) + ": expected a number, got '" + tok + "'");
    return v;
}

int lookup(const Network& net, const std::string& tok, int lineNo) {
    if (!validId(tok))
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(lineNo) + ": invalid node id '" + tok + "'");
    int idx = net.indexOf(tok);
    if (idx < 0)
        throw Error(ErrorCode::UnknownNode,
                    "line " + std::to_string(lineNo) + ": unknown node '" + tok + "'");
    return idx;
}

} // namespace

VerificationProblem parseProblem(std::istream& in) {
    VerificationProblem problem;
    std::string line;
    int lineNo = 0;
    bool sawAnything = false;

    while (std::getline(in, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        std::string t;
        while (ls >> t)
            tok.push_back(t);
        if (tok.empty())
            continue;
        sawAnything = true;
        const std::string& kind = tok[0];

        if (kind == "Input") {
            if (tok.size() != 2)
                throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": Input takes exactly one id");
            if (!validId(tok[1]))
                throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": invalid node id '" + tok[1] + "'");
            problem.net.addNode({tok[1], NodeType::Input, 0.0, {}});
        } else if (kind == "Linear" || kind == "ReLU") {
            if (tok.size() < 5 || (tok.size() - 3) % 2 != 0)
                throw Error(ErrorCode::Parse,
                            "line " + std::to_string(lineNo) + ": expected '" + kind + " <id> <bias> (<weight> <src>)+'");
            if (!validId(tok[1]))
                throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": invalid node id '" + tok[1] + "'");
            Node n;
            n.name = tok[1];
            n.type = kind == "Linear" ? NodeType::Linear : NodeType::ReLU;
            n.bias = parseNumber(tok[2], lineNo);
            for (size_t i = 3; i + 1 < tok.size(); i += 2) {
                double w = parseNumber(tok[i], lineNo);
                int src = lookup(problem.net, tok[i + 1], lineNo);
                n.in.push_back({src, w});
            }
            problem.net.addNode(std::move(n));
        } else if (kind == "MaxPool") {
            if (tok.size() < 3)
                throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": expected 'MaxPool <id> <src>+'");
            if (!validId(tok[1]))
                throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": invalid node id '" + tok[1] + "'");
            Node n;
            n.name = tok[1];
            n.type = NodeType::MaxPool;
            for (size_t i = 2; i < tok.size(); ++i)
                n.in.push_back({lookup(problem.net, tok[i], lineNo), 1.0});
            problem.net.addNode(std::move(n));
        } else if (kind == "Assert") {
            if (tok.size() < 5 || (tok.size() - 3) % 2 != 0)
                throw Error(ErrorCode::Parse,
                            "line " + std::to_string(lineNo) + ": expected 'Assert <=|>= <c> (<coeff> <id>)+'");
            LinearConstraint c;
            // "Assert <= c terms" states c <= sum, i.e. sum >= c.
            if (tok[1] == "<=")
                c.sense = Sense::GreaterEq;
            else if (tok[1] == ">=")
                c.sense = Sense::LessEq;
            else
                throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": expected '<=' or '>='");
            c.rhs = parseNumber(tok[2], lineNo);
            std::vector<bool> seen(problem.net.size(), false);
            for (size_t i = 3; i + 1 < tok.size(); i += 2) {
                double coeff = parseNumber(tok[i], lineNo);
                int node = lookup(problem.net, tok[i + 1], lineNo);
                if (seen[node])
                    throw Error(ErrorCode::Parse,
                                "line " + std::to_string(lineNo) + ": node '" + tok[i + 1] + "' repeated in Assert");
                seen[node] = true;
                c.terms.push_back({coeff, node});
            }
            problem.property.push_back(std::move(c));
        } else {
            throw Error(ErrorCode::Parse, "line " + std::to_string(lineNo) + ": unknown directive '" + kind + "'");
        }
    }

    if (!sawAnything || problem.net.size() == 0)
        throw Error(ErrorCode::Parse, "no nodes declared");
    problem.net.finalize();
    problem.inputBox(); // validates that every input is boxed
    return problem;
}

VerificationProblem parseProblemText(const std::string& text) {
    std::istringstream in(text);
    return parseProblem(in);
}

VerificationProblem loadProblemFile(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return parseProblem(in);
}

std::vector<std::pair<double, double>> VerificationProblem::inputBox() const {
    std::vector<std::pair<double, double>> box(net.inputCount(), {-kInf, kInf});
    std::vector<int> position(net.size(), -1);
    for (int i = 0; i < net.inputCount(); ++i)
        position[net.inputs()[i]] = i;

    for (const LinearConstraint& c : property) {
        if (c.terms.size() != 1)
            continue;
        int node = c.terms[0].node;
        double k = c.terms[0].coeff;
        if (position[node] < 0 || k == 0.0)
            continue;
        int pos = position[node];
        double v = c.rhs / k;
        // sum >= rhs with a positive coefficient lower-bounds the input.
        bool lower = (c.sense == Sense::GreaterEq) == (k > 0);
        if (lower)
            box[pos].first = std::max(box[pos].first, v);
        else
            box[pos].second = std::min(box[pos].second, v);
    }
    for (int i = 0; i < net.inputCount(); ++i) {
        if (box[i].first == -kInf || box[i].second == kInf)
            throw Error(ErrorCode::UnboundedInput,
                        "input '" + net.node(net.inputs()[i]).name + "' has no finite box");
    }
    return box;
}

bool VerificationProblem::boxEmpty() const {
    for (const auto& [lo, hi] : inputBox())
        if (lo > hi)
            return true;
    return false;
}

Valuation evaluate(const Network& net, const std::vector<double>& inputs) {
    if (static_cast<int>(inputs.size()) != net.inputCount())
        throw Error(ErrorCode::Arity, "expected " + std::to_string(net.inputCount()) + " input values");
    Valuation val(net.size(), 0.0);
    int nextInput = 0;
    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        switch (n.type) {
        case NodeType::Input:
            val[i] = inputs[nextInput++];
            break;
        case NodeType::Linear:
            val[i] = preActivation(net, val, i);
            break;
        case NodeType::ReLU:
            val[i] = std::max(preActivation(net, val, i), 0.0);
            break;
        case NodeType::MaxPool: {
            double best = val[n.in[0].src];
            for (const InEdge& e : n.in)
                best = std::max(best, val[e.src]);
            val[i] = best;
            break;
        }
        }
    }
    return val;
}

double preActivation(const Network& net, const Valuation& val, int nodeIndex) {
    const Node& n = net.node(nodeIndex);
    double s = n.bias;
    for (const InEdge& e : n.in)
        s += e.weight * val[e.src];
    return s;
}

int classify(const Network& net, const std::vector<double>& inputs) {
    Valuation val = evaluate(net, inputs);
    const std::vector<int>& outs = net.outputs();
    int best = 0;
    for (int i = 1; i < static_cast<int>(outs.size()); ++i)
        if (val[outs[i]] > val[outs[best]])
            best = i;
    return best + 1;
}

double constraintSlack(const LinearConstraint& c, const Valuation& val) {
    double s = 0.0;
    for (const ConstraintTerm& t : c.terms)
        s += t.coeff * val[t.node];
    return c.sense == Sense::GreaterEq ? s - c.rhs : c.rhs - s;
}

bool checkWitness(const VerificationProblem& problem,
                  const std::vector<double>& inputs,
                  double tolerance) {
    Valuation val = evaluate(problem.net, inputs);
    for (const LinearConstraint& c : problem.property)
        if (constraintSlack(c, val) < -tolerance)
            return false;
    return true;
}

std::string formatDouble(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string toText(const VerificationProblem& problem) {
    std::ostringstream out;
    const Network& net = problem.net;
    for (int i = 0; i < net.size(); ++i) {
        const Node& n = net.node(i);
        switch (n.type) {
        case NodeType::Input:
            out << "Input " << n.name << "\n";
            break;
        case NodeType::Linear:
        case NodeType::ReLU:
            out << (n.type == NodeType::Linear ? "Linear " : "ReLU ") << n.name << " "
                << formatDouble(n.bias);
            for (const InEdge& e : n.in)
                out << " " << formatDouble(e.weight) << " " << net.node(e.src).name;
            out << "\n";
            break;
        case NodeType::MaxPool:
            out << "MaxPool " << n.name;
            for (const InEdge& e : n.in)
                out << " " << net.node(e.src).name;
            out << "\n";
            break;
        }
    }
    for (const LinearConstraint& c : problem.property) {
        out << "Assert " << (c.sense == Sense::GreaterEq ? "<= " : ">= ") << formatDouble(c.rhs);
        for (const ConstraintTerm& t : c.terms)
            out << " " << formatDouble(t.coeff) << " " << net.node(t.node).name;
        out << "\n";
    }
    return out.str();
}

} // namespace nnv
