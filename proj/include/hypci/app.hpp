#pragma once
// Run configuration and the drivers behind the command-line tool.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypci/dephase.hpp"
#include "hypci/flux_core.hpp"
#include "hypci/flux_dsl.hpp"
#include "hypci/grid.hpp"
#include "hypci/residual.hpp"
#include "hypci/schedule.hpp"
#include "hypci/scheme.hpp"
#include "hypci/test_functions.hpp"

namespace hypci::app {

using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Command { Analyze, Schedule, Run, Dephase, Verify, Report };

struct GridSpec {
    int Nx = 0, Nt = 0;        // 0: command default
    double Lx = 0;             // 0: reduced period of the schedule
    double t0 = 0, t1 = 0;     // t0 == t1: command default
};

inline scheme::ScheduleParams uncalibrated(scheme::ScheduleParams p) {
    p.C0 = 0;
    return p;
}

struct RunConfig {
    std::string flux = "example61";
    double radius = 1.0;
    scheme::ScheduleParams sp = uncalibrated(scheme::ScheduleParams{});  // C0 == 0: calibrate, Cstar == 0: measure on the first step
    GridSpec grid;
    std::string phase = "zero";
    int steps = 1;
    double ratio0 = 1.0;
    std::uint64_t seed = 0;
    int bank = 10;
    double eps = 0.1;
    double tol = 1e-6;  // relative weak residual accepted by verify
    bool dump = true;
    std::string out = "hypci-out";
};

namespace detail {

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + where + key + "': " + e.what());
    }
}

inline void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("config: unknown key '" + where + it.key() + "'");
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    const auto& p = c.sp;
    return {{"flux", c.flux},
            {"radius", c.radius},
            {"mode", scheme::to_string(p.mode)},
            {"schedule",
             {{"eps_cond", p.eps_cond}, {"eps_amp", p.eps_amp}, {"r", p.r}, {"c_q", p.c_q}, {"beta_cut", p.beta_cut},
              {"gamma_cut", p.gamma_cut}, {"C0", p.C0}, {"Cstar", p.Cstar}, {"lambda0", p.lambda0}, {"K", p.K}, {"levels", p.levels}}},
            {"grid", {{"Nx", c.grid.Nx}, {"Nt", c.grid.Nt}, {"Lx", c.grid.Lx}, {"t0", c.grid.t0}, {"t1", c.grid.t1}}},
            {"phase", c.phase},
            {"steps", c.steps},
            {"ratio0", c.ratio0},
            {"seed", c.seed},
            {"bank", c.bank},
            {"eps", c.eps},
            {"tol", c.tol},
            {"dump", c.dump},
            {"out", c.out}};
}

// mode picks the base defaults, every other key overrides them
inline RunConfig from_json(const json& j) {
    using detail::get;
    detail::only_keys(j, {"flux", "radius", "mode", "schedule", "grid", "phase", "steps", "ratio0", "seed", "bank", "eps", "tol", "dump", "out"}, "");
    RunConfig c;
    const std::string mode = j.contains("mode") ? get<std::string>(j, "mode", "") : "strict";
    try {
        c.sp = scheme::mode_from_string(mode) == scheme::Mode::Strict ? scheme::ScheduleParams{} : scheme::relaxed_defaults();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.sp.C0 = 0;
    if (j.contains("flux")) c.flux = get<std::string>(j, "flux", "");
    if (j.contains("radius")) c.radius = get<double>(j, "radius", "");
    if (j.contains("phase")) c.phase = get<std::string>(j, "phase", "");
    if (j.contains("steps")) c.steps = get<int>(j, "steps", "");
    if (j.contains("ratio0")) c.ratio0 = get<double>(j, "ratio0", "");
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "");
    if (j.contains("bank")) c.bank = get<int>(j, "bank", "");
    if (j.contains("eps")) c.eps = get<double>(j, "eps", "");
    if (j.contains("tol")) c.tol = get<double>(j, "tol", "");
    if (j.contains("dump")) c.dump = get<bool>(j, "dump", "");
    if (j.contains("out")) c.out = get<std::string>(j, "out", "");
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        detail::only_keys(s, {"eps_cond", "eps_amp", "r", "c_q", "beta_cut", "gamma_cut", "C0", "Cstar", "lambda0", "K", "levels"}, "schedule.");
        auto& p = c.sp;
        const std::string w = "schedule.";
        if (s.contains("eps_cond")) p.eps_cond = get<double>(s, "eps_cond", w);
        if (s.contains("eps_amp")) p.eps_amp = get<double>(s, "eps_amp", w);
        if (s.contains("r")) p.r = get<double>(s, "r", w);
        if (s.contains("c_q")) p.c_q = get<double>(s, "c_q", w);
        if (s.contains("beta_cut")) p.beta_cut = get<double>(s, "beta_cut", w);
        if (s.contains("gamma_cut")) p.gamma_cut = get<double>(s, "gamma_cut", w);
        if (s.contains("C0")) p.C0 = get<double>(s, "C0", w);
        if (s.contains("Cstar")) p.Cstar = get<double>(s, "Cstar", w);
        if (s.contains("lambda0")) p.lambda0 = get<double>(s, "lambda0", w);
        if (s.contains("K")) p.K = get<int>(s, "K", w);
        if (s.contains("levels")) p.levels = get<int>(s, "levels", w);
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        detail::only_keys(g, {"Nx", "Nt", "Lx", "t0", "t1"}, "grid.");
        if (g.contains("Nx")) c.grid.Nx = get<int>(g, "Nx", "grid.");
        if (g.contains("Nt")) c.grid.Nt = get<int>(g, "Nt", "grid.");
        if (g.contains("Lx")) c.grid.Lx = get<double>(g, "Lx", "grid.");
        if (g.contains("t0")) c.grid.t0 = get<double>(g, "t0", "grid.");
        if (g.contains("t1")) c.grid.t1 = get<double>(g, "t1", "grid.");
    }
    if (c.steps < 0) throw ConfigError("config: steps must be >= 0");
    if (c.bank < 1) throw ConfigError("config: bank must be >= 1");
    if (!(c.radius > 0)) throw ConfigError("config: radius must be positive");
    if (c.sp.C0 < 0 || c.sp.Cstar < 0) throw ConfigError("config: C0 and Cstar must be >= 0");
    try {
        scheme::PhaseFn::from_string(c.phase);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------- shared setup

struct Context {
    std::shared_ptr<const dsl::FluxModel> flux;
    flux::StructureConstants sc;
    scheme::ParamSchedule sched;
    json calibration = nullptr;
    grid::SpaceTimeGrid grid;
};

inline std::shared_ptr<const dsl::FluxModel> load(const RunConfig& c) {
    try {
        return std::make_shared<const dsl::FluxModel>(dsl::load_flux(c.flux, c.radius));
    } catch (const dsl::DslError& e) {
        throw ConfigError(std::string("flux: ") + e.what());
    }
}

// fills C0 (calibration), levels and the grid defaults of the command; c is updated in place
inline Context make_context(RunConfig& c, Command cmd) {
    Context ctx;
    ctx.flux = load(c);
    ctx.sc = flux::structure_constants(*ctx.flux);
    if (cmd == Command::Dephase && c.steps < 1) c.steps = 1;
    c.sp.levels = std::max(c.sp.levels, c.steps + 1);
    if (c.sp.C0 == 0) {
        const auto cal = scheme::calibrate_C0(ctx.flux, ctx.sc, c.sp);
        c.sp.C0 = cal.C0;
        ctx.calibration = cal.to_json();
    }
    try {
        ctx.sched = scheme::build_schedule(c.sp);
    } catch (const scheme::ScheduleError& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    auto& g = c.grid;
    const bool strict = c.sp.mode == scheme::Mode::Strict;
    if (g.Lx == 0) g.Lx = ctx.sched.reduced_period();
    if (cmd == Command::Dephase) {
        if (g.Nx == 0) g.Nx = strict ? 64 : 1024;
        if (g.Nt == 0) g.Nt = 651;
        if (g.t0 == g.t1) {
            g.t0 = -3;
            g.t1 = 0.25;
        }
    } else {
        if (g.Nx == 0) g.Nx = strict ? 64 : 1024;
        if (g.Nt == 0) g.Nt = strict ? 256 : 513;
        if (g.t0 == g.t1) {
            g.t0 = 0;
            g.t1 = (strict ? 8 : 1) * g.Lx;
        }
    }
    ctx.grid.Nx = g.Nx;
    ctx.grid.Nt = g.Nt;
    ctx.grid.Lx = g.Lx;
    ctx.grid.t0 = g.t0;
    ctx.grid.t1 = g.t1;
    try {
        ctx.grid.validate();
    } catch (const grid::GridError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    return ctx;
}

// ---------------------------------------------------------------- output helpers

struct Outcome {
    json report;
    bool pass = false;
};

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw ConfigError("out: cannot create " + dir + ": " + ec.message());
    return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("out: cannot write " + p.string());
    os << s;
}

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- command drivers (src/app.cpp)

Outcome analyze(RunConfig& c);
Outcome schedule(RunConfig& c);
Outcome run(RunConfig& c, bool write = true);
Outcome dephase_pair(RunConfig& c, bool write = true);
Outcome verify(RunConfig& c, const std::string& path);
Outcome report(const std::string& dir);

}  // namespace hypci::app
