// Batch front-end: parse a chart spec file, run one named pipeline and emit a
// deterministic text report. Exit codes: 0 all requested checks pass, 1 check
// failure, 2 input error.

#include "estar/specfile.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw estar::input_error("cannot open spec file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonFlags {
    std::string spec_path;
    std::string kappa, kappa_prime;
    int nu_order = -1;
    int total_degree = -1;
    int trials = -1;
    unsigned seed = 1;
    bool seed_set = false;
    std::string f, g, u;
    int max_degree = -1;
    int max_order = -1;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& fl) {
    cmd->add_option("--spec", fl.spec_path, "chart spec file")->required();
    cmd->add_option("--kappa", fl.kappa, "ordering parameter (rational)");
    cmd->add_option("--kappa-prime", fl.kappa_prime, "target ordering parameter");
    cmd->add_option("--nu-order", fl.nu_order, "nu truncation L");
    cmd->add_option("--total-degree", fl.total_degree, "total degree truncation T");
    cmd->add_option("--trials", fl.trials, "number of random trials");
    cmd->add_option("--seed", fl.seed, "random seed");
    cmd->add_option("--f", fl.f, "first polynomial argument");
    cmd->add_option("--g", fl.g, "second polynomial argument");
    cmd->add_option("--u", fl.u, "base polynomial argument");
    cmd->add_option("--max-degree", fl.max_degree, "maximum fibre degree");
    cmd->add_option("--max-order", fl.max_order, "maximum nu order of the check");
    cmd->add_option("--threads", fl.threads, "worker threads for parallel pipelines");
}

estar::RunSpec assemble(const std::string& command, const CommonFlags& fl) {
    estar::RunSpec spec = estar::parse_spec(read_file(fl.spec_path));
    spec.command = command;
    if (!fl.kappa.empty()) spec.kappa = estar::Scalar::from_string(fl.kappa);
    if (!fl.kappa_prime.empty()) spec.kappa_prime = estar::Scalar::from_string(fl.kappa_prime);
    if (fl.nu_order >= 0) spec.L = fl.nu_order;
    if (fl.total_degree >= 0) spec.T = fl.total_degree;
    if (fl.trials >= 0) spec.trials = fl.trials;
    spec.seed = fl.seed;
    spec.arg_f = fl.f;
    spec.arg_g = fl.g;
    spec.arg_u = fl.u;
    if (fl.max_degree >= 0) spec.max_degree = fl.max_degree;
    if (fl.max_order >= 0) spec.max_order = fl.max_order;
    if (fl.threads < 1) throw estar::input_error("--threads must be >= 1");
    spec.threads = fl.threads;
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact star products on duals of Lie algebroid charts"};
    app.require_subcommand(1);

    const std::vector<std::string> commands = {
        "validate",   "d-e",          "curvature",        "solve-r",     "tau",
        "star",       "c-r",          "assoc-check",      "homog-check", "parity-check",
        "equiv-gauge", "equiv-connection", "equiv-kappa", "uea-check",   "gutt-compare",
        "modular",    "trace-check"};

    std::map<std::string, CommonFlags> flags;
    for (const auto& name : commands) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common(cmd, flags[name]);
    }
    int demo_threads = 1;
    CLI::App* demo = app.add_subcommand("demo", "run the fixture demonstration battery");
    demo->add_option("--threads", demo_threads, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (demo->parsed()) {
            std::cout << estar::run_demo_suite(demo_threads);
            return 0;
        }
        for (const auto& name : commands) {
            if (!app.get_subcommand(name)->parsed()) continue;
            estar::RunResult r = estar::run(assemble(name, flags[name]));
            std::cout << r.report;
            return r.exit_code;
        }
    } catch (const estar::input_error& e) {
        std::cout << "ERROR: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cout << "INTERNAL ERROR: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
