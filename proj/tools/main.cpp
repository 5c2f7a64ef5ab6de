#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nnv/common.hpp"
#include "nnv/generator.hpp"
#include "nnv/network.hpp"
#include "nnv/queries.hpp"
#include "nnv/relaxation.hpp"
#include "nnv/verifier.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
    double timeBudget = 3600.0;
    long long conflictBudget = -1;
    bool noCache = false, noInference = false, noRefine = false;
    bool stats = false, jsonOut = false;

    nnv::VerifyConfig config() const {
        nnv::VerifyConfig c;
        c.timeBudgetSec = timeBudget;
        c.conflictBudget = conflictBudget;
        c.useCache = !noCache;
        c.useInference = !noInference;
        c.useRefinement = !noRefine;
        return c;
    }
};

void addCommon(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--time-budget", o.timeBudget, "wall-clock budget in seconds");
    cmd->add_option("--conflict-budget", o.conflictBudget,
                    "conflict budget, negative = unlimited");
    cmd->add_flag("--no-cache", o.noCache, "disable the feasible-fixture cache");
    cmd->add_flag("--no-inference", o.noInference, "disable interval phase inference");
    cmd->add_flag("--no-refine", o.noRefine, "disable optimization-based bound refinement");
    cmd->add_flag("--stats", o.stats, "print run statistics");
    cmd->add_flag("--json", o.jsonOut, "machine-readable report on stdout");
}

std::vector<double> parseNumberList(const std::string& text) {
    std::string s = text;
    for (char& c : s)
        if (c == ',')
            c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    double v;
    while (in >> v)
        out.push_back(v);
    if (!in.eof())
        throw nnv::Error(nnv::ErrorCode::InvalidQuery, "bad number list: " + text);
    return out;
}

std::set<int> parseIndexList(const std::string& text) {
    std::set<int> out;
    for (double v : parseNumberList(text))
        out.insert(static_cast<int>(v));
    return out;
}

json statsJson(const nnv::VerifyStats& s) {
    return json{{"lpSolves", s.lpSolves},
                {"satConflicts", s.satConflicts},
                {"decisions", s.decisions},
                {"learnedClauses", s.learnedClauses},
                {"inferenceClauses", s.inferenceClauses},
                {"cacheHits", s.cacheHits},
                {"restarts", s.restarts},
                {"idleIterations", s.idleIterations},
                {"refineSweeps", s.refineSweeps},
                {"wallMs", s.wallMs}};
}

void printStats(const nnv::VerifyStats& s) {
    std::cout << "lpSolves: " << s.lpSolves << "\n"
              << "satConflicts: " << s.satConflicts << "\n"
              << "decisions: " << s.decisions << "\n"
              << "learnedClauses: " << s.learnedClauses << "\n"
              << "inferenceClauses: " << s.inferenceClauses << "\n"
              << "cacheHits: " << s.cacheHits << "\n"
              << "restarts: " << s.restarts << "\n"
              << "idleIterations: " << s.idleIterations << "\n"
              << "refineSweeps: " << s.refineSweeps << "\n"
              << "wallMs: " << s.wallMs << "\n";
}

std::string joinNumbers(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ' ';
        out += nnv::formatDouble(v[i]);
    }
    return out;
}

int exitFor(nnv::Status s) { return s == nnv::Status::Satisfiable ? 10 : 20; }

int reportVerification(const nnv::VerificationResult& r, const CommonOpts& opts,
                       json extra = json::object()) {
    bool sat = r.status == nnv::Status::Satisfiable;
    if (opts.jsonOut) {
        json j{{"status", sat ? "SAT" : "UNSAT"}};
        if (sat)
            j["witness"] = r.witness;
        if (opts.stats)
            j["stats"] = statsJson(r.stats);
        j.update(extra);
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << (sat ? "SAT" : "UNSAT") << "\n";
        if (sat)
            std::cout << "witness: " << joinNumbers(r.witness) << "\n";
        if (opts.stats)
            printStats(r.stats);
        for (auto& [key, value] : extra.items())
            std::cout << key << ": "
                      << (value.is_string() ? value.get<std::string>() : value.dump())
                      << "\n";
    }
    return exitFor(r.status);
}

int runVerify(const std::string& path, const CommonOpts& opts, bool oracle,
              long long oracleCap) {
    nnv::VerificationProblem problem = nnv::loadProblemFile(path);
    nnv::VerificationResult result = nnv::verify(problem, opts.config());
    json extra = json::object();
    bool agree = true;
    if (oracle) {
        nnv::OracleResult ground = nnv::bruteForceOracle(problem, oracleCap);
        agree = ground.status == result.status;
        extra["agreement"] = agree ? "yes" : "no";
    }
    int rc = reportVerification(result, opts, extra);
    if (!agree) {
        std::cerr << "error: verifier disagrees with the enumeration oracle\n";
        return 1;
    }
    return rc;
}

int runOracle(const std::string& path, const CommonOpts& opts, long long cap) {
    nnv::VerificationProblem problem = nnv::loadProblemFile(path);
    nnv::OracleResult r = nnv::bruteForceOracle(problem, cap);
    bool sat = r.status == nnv::Status::Satisfiable;
    if (opts.jsonOut) {
        json j{{"status", sat ? "SAT" : "UNSAT"},
               {"fixtureSpace", r.fixtureSpace},
               {"fixturesTried", r.fixturesTried}};
        if (sat)
            j["witness"] = r.witness;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << (sat ? "SAT" : "UNSAT") << "\n";
        if (sat)
            std::cout << "witness: " << joinNumbers(r.witness) << "\n";
        std::cout << "fixtures: " << r.fixturesTried << " of " << r.fixtureSpace << "\n";
    }
    return exitFor(r.status);
}

int runMargin(const std::string& path, const nnv::MarginQuery& query,
              const CommonOpts& opts) {
    nnv::VerificationProblem problem = nnv::loadProblemFile(path);
    nnv::MarginResult r = nnv::marginSearch(problem, query, opts.config());
    if (opts.jsonOut) {
        json j{{"baseClass", r.baseClass},
               {"epsilon", r.epsilon},
               {"robustAtHi", r.robustAtHi},
               {"queries", r.queries}};
        if (opts.stats)
            j["stats"] = statsJson(r.stats);
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "class: " << r.baseClass << "\n";
        if (r.robustAtHi)
            std::cout << "robust at " << nnv::formatDouble(r.epsilon) << "\n";
        else
            std::cout << "margin: " << nnv::formatDouble(r.epsilon) << "\n";
        std::cout << "queries: " << r.queries << "\n";
        if (opts.stats)
            printStats(r.stats);
    }
    return 0;
}

int runExport(const std::string& path, const std::string& outPath, bool noRefine) {
    nnv::VerificationProblem problem = nnv::loadProblemFile(path);
    nnv::BoundsMap bounds = nnv::computeInitialBounds(problem);
    nnv::Relaxation relax = nnv::buildRelaxation(problem, bounds);
    if (!noRefine) {
        nnv::RefineResult rr = nnv::refineBounds(problem, relax, bounds);
        if (rr.infeasible)
            std::cerr << "note: relaxation is infeasible; exporting anyway\n";
    }
    std::string text = nnv::exportLp(relax.lp);
    if (outPath.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(outPath);
        if (!out)
            throw nnv::Error(nnv::ErrorCode::Io, "cannot write " + outPath);
        out << text;
    }
    std::cout << "constraints: " << relax.lp.rowCount() << "\n";
    return 0;
}

int runGen(std::uint64_t seed, const nnv::GenShape& shape, bool corpus,
           const std::string& outPath) {
    std::string text =
        corpus ? nnv::toText(nnv::corpusProblem(seed)) : nnv::generateText(seed, shape);
    if (outPath.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(outPath);
        if (!out)
            throw nnv::Error(nnv::ErrorCode::Io, "cannot write " + outPath);
        out << text;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"verifier for piecewise-linear feed-forward networks"};
    app.require_subcommand(1);

    std::string path, outPath, baseText, frozenText;
    CommonOpts opts;
    bool oracle = false, corpus = false;
    long long cap = 1 << 20;
    nnv::MarginQuery margin;
    nnv::StrongClassQuery strongclass;
    nnv::SmoothNoiseQuery smoothnoise;
    nnv::GenShape shape;
    std::uint64_t seed = 1;

    CLI::App* cmdVerify = app.add_subcommand("verify", "decide a problem file");
    cmdVerify->add_option("file", path, "problem file")->required();
    addCommon(cmdVerify, opts);
    cmdVerify->add_flag("--oracle", oracle, "cross-check against the enumeration oracle");
    cmdVerify->add_option("--cap", cap, "oracle fixture-space cap");

    CLI::App* cmdMargin =
        app.add_subcommand("margin", "largest robust box radius around a base point");
    cmdMargin->add_option("file", path, "problem file")->required();
    cmdMargin->add_option("--base", baseText, "base input point, comma-separated")
        ->required();
    cmdMargin->add_option("--lo", margin.lo, "search interval start");
    cmdMargin->add_option("--hi", margin.hi, "search interval end");
    cmdMargin->add_option("--precision", margin.precision, "bisection precision");
    cmdMargin->add_option("--frozen", frozenText, "input positions pinned to base");
    cmdMargin->add_option("--expected-class", margin.expectedClass,
                          "1-based class the base point must get");
    addCommon(cmdMargin, opts);

    CLI::App* cmdStrong = app.add_subcommand(
        "strongclass", "find an input one class wins by at least delta");
    cmdStrong->add_option("file", path, "problem file")->required();
    cmdStrong->add_option("--class", strongclass.targetClass, "1-based target class")
        ->required();
    cmdStrong->add_option("--delta", strongclass.delta, "required winning margin");
    addCommon(cmdStrong, opts);

    CLI::App* cmdSmooth = app.add_subcommand(
        "smoothnoise", "find smooth additive noise that flips the classification");
    cmdSmooth->add_option("file", path, "problem file")->required();
    cmdSmooth->add_option("--base", baseText, "base image pixels, row-major")->required();
    cmdSmooth->add_option("--width", smoothnoise.width, "grid width")->required();
    cmdSmooth->add_option("--height", smoothnoise.height, "grid height")->required();
    cmdSmooth->add_option("--bound", smoothnoise.bound, "adjacent noise difference bound");
    cmdSmooth->add_option("--border", smoothnoise.border, "frozen border width");
    cmdSmooth->add_option("--target", smoothnoise.targetClass, "1-based adversarial class")
        ->required();
    addCommon(cmdSmooth, opts);

    CLI::App* cmdOracle =
        app.add_subcommand("oracle", "decide by enumerating all phase fixtures");
    cmdOracle->add_option("file", path, "problem file")->required();
    cmdOracle->add_option("--cap", cap, "fixture-space cap");
    cmdOracle->add_flag("--json", opts.jsonOut, "machine-readable report");

    CLI::App* cmdExport =
        app.add_subcommand("export", "write the refined relaxation as an LP file");
    cmdExport->add_option("file", path, "problem file")->required();
    cmdExport->add_option("-o,--out", outPath, "output path (stdout when absent)");
    cmdExport->add_flag("--no-refine", opts.noRefine, "skip bound refinement");

    CLI::App* cmdGen = app.add_subcommand("gen", "emit a random problem file");
    cmdGen->add_option("--seed", seed, "generator seed");
    cmdGen->add_option("--inputs", shape.inputs, "input count");
    cmdGen->add_option("--relus", shape.reluCount, "ReLU count");
    cmdGen->add_option("--pools", shape.poolCount, "MaxPool count");
    cmdGen->add_option("--fanin", shape.poolFanInMax, "MaxPool max fan-in");
    cmdGen->add_option("--outputs", shape.outputs, "output count");
    cmdGen->add_flag("--corpus", corpus, "sample the shape from the seed instead");
    cmdGen->add_option("-o,--out", outPath, "output path (stdout when absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmdVerify->parsed())
            return runVerify(path, opts, oracle, cap);
        if (cmdMargin->parsed()) {
            margin.base = parseNumberList(baseText);
            if (!frozenText.empty())
                margin.frozen = parseIndexList(frozenText);
            return runMargin(path, margin, opts);
        }
        if (cmdStrong->parsed()) {
            nnv::VerificationProblem problem = nnv::loadProblemFile(path);
            return reportVerification(
                nnv::strongClassQuery(problem, strongclass, opts.config()), opts);
        }
        if (cmdSmooth->parsed()) {
            smoothnoise.base = parseNumberList(baseText);
            nnv::VerificationProblem problem = nnv::loadProblemFile(path);
            return reportVerification(
                nnv::smoothNoiseQuery(problem, smoothnoise, opts.config()), opts);
        }
        if (cmdOracle->parsed())
            return runOracle(path, opts, cap);
        if (cmdExport->parsed())
            return runExport(path, outPath, opts.noRefine);
        if (cmdGen->parsed())
            return runGen(seed, shape, corpus, outPath);
    } catch (const nnv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
