#include "nnv/generator.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace nnv {

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

std::set<int> samplePreds(Rng& rng, int count, int below) {
    std::set<int> preds;
    while (static_cast<int>(preds.size()) < count)
        preds.insert(rng.uniformInt(0, below - 1));
    return preds;
}

} // namespace

VerificationProblem generateProblem(Rng& rng, const GenShape& shape) {
    std::vector<Node> nodes;
    for (int i = 0; i < shape.inputs; ++i)
        nodes.push_back({"x" + std::to_string(i), NodeType::Input, 0.0, {}});

    int reluLeft = shape.reluCount, poolLeft = shape.poolCount;
    int reluNo = 0, poolNo = 0;
    while (reluLeft + poolLeft > 0) {
        int idx = static_cast<int>(nodes.size());
        bool pickPool =
            poolLeft > 0 && (reluLeft == 0 || rng.chance(static_cast<double>(poolLeft) /
                                                         (poolLeft + reluLeft)));
        if (pickPool) {
            int k = rng.uniformInt(2, std::min(shape.poolFanInMax, idx));
            Node n{"m" + std::to_string(poolNo++), NodeType::MaxPool, 0.0, {}};
            // pools read activations when enough exist, as real nets do
            std::vector<int> relus;
            for (int i = 0; i < idx; ++i)
                if (nodes[i].type == NodeType::ReLU)
                    relus.push_back(i);
            std::set<int> preds;
            if (static_cast<int>(relus.size()) >= k)
                while (static_cast<int>(preds.size()) < k)
                    preds.insert(
                        relus[rng.uniformInt(0, static_cast<int>(relus.size()) - 1)]);
            else
                preds = samplePreds(rng, k, idx);
            for (int p : preds)
                n.in.push_back({p, 1.0});
            nodes.push_back(std::move(n));
            --poolLeft;
        } else {
            Node n{"r" + std::to_string(reluNo++), NodeType::ReLU,
                   rng.uniform(-0.5, 0.5), {}};
            {
                int k = rng.uniformInt(idx >= 2 ? 2 : 1, std::min(3, idx));
                std::set<int> preds = samplePreds(rng, k, idx);
                // bias the wiring toward chains through earlier hidden nodes
                if (idx > shape.inputs && rng.chance(0.8)) {
                    bool hasHidden = false;
                    for (int p : preds)
                        hasHidden = hasHidden || p >= shape.inputs;
                    if (!hasHidden) {
                        preds.erase(preds.begin());
                        while (static_cast<int>(preds.size()) < k)
                            preds.insert(rng.uniformInt(shape.inputs, idx - 1));
                    }
                }
                for (int p : preds)
                    n.in.push_back({p, rng.uniform(-1.25, 1.25)});
            }
            nodes.push_back(std::move(n));
            --reluLeft;
        }
    }

    int firstOut = static_cast<int>(nodes.size());
    for (int o = 0; o < shape.outputs; ++o) {
        int k = rng.uniformInt(2, std::min(6, firstOut));
        Node n{"y" + std::to_string(o), NodeType::Linear, rng.uniform(-0.5, 0.5), {}};
        for (int p : samplePreds(rng, k, firstOut))
            n.in.push_back({p, rng.uniform(-1.0, 1.0)});
        nodes.push_back(std::move(n));
    }

    // every non-output node must feed something, or it would read as an output
    std::set<int> referenced;
    for (const Node& n : nodes)
        for (const InEdge& e : n.in)
            referenced.insert(e.src);
    for (int i = 0; i < firstOut; ++i) {
        if (referenced.count(i))
            continue;
        int o = firstOut + rng.uniformInt(0, shape.outputs - 1);
        nodes[o].in.push_back({i, rng.uniform(-1.0, 1.0)});
    }

    VerificationProblem prob;
    for (Node& n : nodes)
        prob.net.addNode(std::move(n));
    prob.net.finalize();

    for (int node : prob.net.inputs()) {
        prob.property.push_back({Sense::GreaterEq, 0.0, {{1.0, node}}});
        prob.property.push_back({Sense::LessEq, 1.0, {{1.0, node}}});
    }

    std::vector<double> anchor;
    for (int i = 0; i < prob.net.inputCount(); ++i)
        anchor.push_back(rng.uniform(0.0, 1.0));
    Valuation val = evaluate(prob.net, anchor);

    // corridors around the anchor valuation keep the decision genuinely open
    int added = 0;
    for (int k = 0; k < prob.net.outputCount(); ++k) {
        int y = prob.net.outputs()[k];
        if (!rng.chance(0.8))
            continue;
        double floor = val[y] - rng.uniform(0.03, 0.3);
        double ceil = val[y] + rng.uniform(0.03, 0.3);
        if (rng.chance(0.3))
            floor = val[y] + rng.uniform(0.0, 0.2);
        prob.property.push_back({Sense::GreaterEq, floor, {{1.0, y}}});
        prob.property.push_back({Sense::LessEq, ceil, {{1.0, y}}});
        ++added;
    }
    if (prob.net.outputCount() >= 2 && rng.chance(0.5)) {
        int ya = prob.net.outputs()[0], yb = prob.net.outputs()[1];
        double t = rng.uniform(-0.1, 0.25);
        prob.property.push_back(
            {Sense::GreaterEq, val[ya] - val[yb] + t, {{1.0, ya}, {-1.0, yb}}});
        ++added;
    }
    if (added == 0) {
        int y = prob.net.outputs()[0];
        prob.property.push_back(
            {Sense::GreaterEq, val[y] + rng.uniform(-0.08, 0.28), {{1.0, y}}});
    }
    return prob;
}

VerificationProblem generateProblem(std::uint64_t seed, const GenShape& shape) {
    Rng rng(seed);
    return generateProblem(rng, shape);
}

VerificationProblem corpusProblem(std::uint64_t seed) {
    Rng rng(seed);
    GenShape shape;
    shape.inputs = rng.uniformInt(2, 4);
    shape.reluCount = rng.uniformInt(6, 10);
    shape.poolCount = 2;
    shape.poolFanInMax = 3;
    shape.outputs = rng.uniformInt(2, 3);
    return generateProblem(rng, shape);
}

std::string generateText(std::uint64_t seed, const GenShape& shape) {
    return toText(generateProblem(seed, shape));
}

} // namespace nnv
