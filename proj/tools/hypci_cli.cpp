// hypci: analyze / schedule / run / dephase / verify / report
// exit 0: every check passed, 2: a check failed, 1: usage or configuration error

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "hypci/app.hpp"

using hypci::app::ConfigError;
using nlohmann::json;

namespace {

struct Flags {
    std::string config, flux, mode, phase, out, dump_path, dir;
    double eps = 0, r = 0, eps_amp = 0, c0 = 0, cstar = 0, lambda0 = 0, ratio0 = 0, tol = 0, radius = 0, Lx = 0, t0 = 0, t1 = 0;
    int K = 0, levels = 0, steps = 0, Nx = 0, Nt = 0, bank = 0;
    std::uint64_t seed = 0;
    bool no_dump = false;
};

// flags that were given on the command line override the config file
struct Overrides {
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> items;

    template <class T>
    void add(CLI::App* app, const std::string& name, T& target, const std::string& help, std::vector<std::string> path) {
        auto* o = app->add_option(name, target, help);
        items.emplace_back(o, [&target, path](json& j) {
            json* node = &j;
            for (std::size_t k = 0; k + 1 < path.size(); ++k) {
                if (!node->contains(path[k])) (*node)[path[k]] = json::object();
                node = &(*node)[path[k]];
            }
            (*node)[path.back()] = target;
        });
    }
    void apply(json& j) const {
        for (const auto& [o, f] : items)
            if (o->count() > 0) f(j);
    }
};

void add_flux(CLI::App* s, Flags& F, Overrides& ov) {
    ov.add(s, "--flux", F.flux, "builtin name (example61) or \"(f1, f2)\" in u, v", {"flux"});
    ov.add(s, "--radius", F.radius, "admissible state radius", {"radius"});
}

void add_schedule(CLI::App* s, Flags& F, Overrides& ov) {
    ov.add(s, "--mode", F.mode, "strict | relaxed", {"mode"});
    ov.add(s, "--r", F.r, "error-level decay rate r", {"schedule", "r"});
    ov.add(s, "--eps-amp", F.eps_amp, "amplitude scale epsilon", {"schedule", "eps_amp"});
    ov.add(s, "--c0", F.c0, "schedule constant C0 (0: calibrate)", {"schedule", "C0"});
    ov.add(s, "--cstar", F.cstar, "step bound constant (0: twice the first measured value)", {"schedule", "Cstar"});
    ov.add(s, "--lambda0", F.lambda0, "first frequency", {"schedule", "lambda0"});
    ov.add(s, "--K", F.K, "relaxed frequency ratio", {"schedule", "K"});
    ov.add(s, "--levels", F.levels, "number of schedule levels", {"schedule", "levels"});
}

void add_grid(CLI::App* s, Flags& F, Overrides& ov) {
    ov.add(s, "--Nx", F.Nx, "points per x-period (power of two)", {"grid", "Nx"});
    ov.add(s, "--Nt", F.Nt, "time rows", {"grid", "Nt"});
    ov.add(s, "--Lx", F.Lx, "x-period (0: reduced period)", {"grid", "Lx"});
    ov.add(s, "--t0", F.t0, "window start", {"grid", "t0"});
    ov.add(s, "--t1", F.t1, "window end", {"grid", "t1"});
}

void add_common(CLI::App* s, Flags& F, Overrides& ov) {
    s->add_option("--config", F.config, "JSON run configuration");
    ov.add(s, "--seed", F.seed, "seed for test banks and sampling (default 0)", {"seed"});
    ov.add(s, "--out", F.out, "output directory", {"out"});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypci: iterative construction of oscillatory solutions of 2x2 conservation laws"};
    app.require_subcommand(1);
    Flags F;
    Overrides ov;

    auto* an = app.add_subcommand("analyze", "structure constants and the curvature condition for a flux");
    add_common(an, F, ov);
    add_flux(an, F, ov);
    ov.add(an, "--eps", F.eps, "condition parameter epsilon", {"eps"});

    auto* sc = app.add_subcommand("schedule", "build and validate a parameter schedule");
    add_common(sc, F, ov);
    add_flux(sc, F, ov);
    add_schedule(sc, F, ov);
    ov.add(sc, "--n", F.steps, "steps the schedule must cover", {"steps"});

    auto* ru = app.add_subcommand("run", "iterate from the constant subsolution");
    add_common(ru, F, ov);
    add_flux(ru, F, ov);
    add_schedule(ru, F, ov);
    add_grid(ru, F, ov);
    ov.add(ru, "--n", F.steps, "number of steps", {"steps"});
    ov.add(ru, "--phase", F.phase, "time phase: zero | psi", {"phase"});
    ov.add(ru, "--ratio0", F.ratio0, "E_0 / F_0", {"ratio0"});
    ov.add(ru, "--bank", F.bank, "weak test functions per residual check", {"bank"});
    ru->add_flag("--no-dump", F.no_dump, "skip binary field dumps");

    auto* de = app.add_subcommand("dephase", "paired runs with phases 0 and psi");
    add_common(de, F, ov);
    add_flux(de, F, ov);
    add_schedule(de, F, ov);
    add_grid(de, F, ov);
    ov.add(de, "--n", F.steps, "levels per trajectory", {"steps"});
    ov.add(de, "--ratio0", F.ratio0, "E_0 / F_0", {"ratio0"});
    de->add_flag("--no-dump", F.no_dump, "skip binary field dumps");

    auto* ve = app.add_subcommand("verify", "weak-solution residuals of a dumped field");
    add_common(ve, F, ov);
    add_flux(ve, F, ov);
    ve->add_option("--dump", F.dump_path, "field dump written by run or dephase")->required();
    ov.add(ve, "--tol", F.tol, "accepted relative residual", {"tol"});
    ov.add(ve, "--bank", F.bank, "number of test functions", {"bank"});

    auto* re = app.add_subcommand("report", "summarize run/dephase outputs under a directory");
    re->add_option("--dir", F.dir, "directory to scan")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        json j = json::object();
        if (!F.config.empty()) j = hypci::app::read_json_file(F.config);
        ov.apply(j);
        if (F.no_dump) j["dump"] = false;
        hypci::app::Outcome o;
        if (*re) {
            o = hypci::app::report(F.dir);
        } else {
            auto c = hypci::app::from_json(j);
            if (*an) o = hypci::app::analyze(c);
            else if (*sc) o = hypci::app::schedule(c);
            else if (*ru) o = hypci::app::run(c);
            else if (*de) o = hypci::app::dephase_pair(c);
            else o = hypci::app::verify(c, F.dump_path);
        }
        std::cout << o.report.dump(1) << "\n";
        return o.pass ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const hypci::grid::GridError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const hypci::scheme::ScheduleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const hypci::flux::NotStrictlyHyperbolic& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return 2;
    } catch (const hypci::flux::SingularSystem& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return 2;
    } catch (const hypci::dsl::DomainError& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
