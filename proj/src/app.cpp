#include "hypci/app.hpp"

namespace hypci::app {

// ---------------------------------------------------------------- analyze

Outcome analyze(RunConfig& c) {
    Outcome o;
    const auto f = load(c);
    json j;
    j["flux"] = f->text();
    j["eps"] = c.eps;
    try {
        const auto sc = flux::structure_constants(*f);
        const auto cond = flux::check_condition(sc, c.eps);
        const auto& e = sc.frame0;
        j["hyperbolic"] = true;
        j["lambda_minus"] = e.lambda[flux::Minus];
        j["lambda_plus"] = e.lambda[flux::Plus];
        j["delta_lambda"] = sc.delta_lambda;
        j["p0"] = sc.p0;
        j["area"] = sc.area;
        j["kappa"] = sc.kappa;
        j["rate"] = sc.rate;
        j["alpha"] = sc.alpha;
        j["beta"] = sc.beta;
        j["b_minus"] = {sc.b[flux::Minus].x, sc.b[flux::Minus].y};
        j["b_plus"] = {sc.b[flux::Plus].x, sc.b[flux::Plus].y};
        j["d"] = {sc.d.x, sc.d.y};
        j["det_b"] = sc.det_b;
        j["condition"] = {{"holds", cond.holds}, {"lhs", sc.lhs}, {"rhs", {c.eps * sc.rhs_unit[0], c.eps * sc.rhs_unit[1]}},
                          {"margins", cond.margins}, {"eps_margin", sc.eps_margin}};
        o.pass = cond.holds;
        if (c.flux == "example61") {
            const auto ex = dephase::example_checks(*f, c.seed);
            j["example_checks"] = ex.to_json();
            o.pass = o.pass && ex.pass;
        }
    } catch (const flux::NotStrictlyHyperbolic& e) {
        j["hyperbolic"] = false;
        j["error"] = e.what();
    } catch (const flux::SingularSystem& e) {
        j["hyperbolic"] = true;
        j["error"] = e.what();
    }
    j["pass"] = o.pass;
    o.report = j;
    return o;
}

// ---------------------------------------------------------------- schedule

Outcome schedule(RunConfig& c) {
    Outcome o;
    const auto ctx = make_context(c, Command::Schedule);
    const auto rep = scheme::validate(ctx.sched, ctx.sc.delta_lambda,
                                      std::fmax(std::fabs(ctx.sc.frame0.lambda[0]), std::fabs(ctx.sc.frame0.lambda[1])));
    json items = json::array();
    for (const auto& it : rep.items)
        items.push_back({{"name", it.name}, {"level", it.level}, {"lhs", it.lhs}, {"rhs", it.rhs}, {"margin", it.rhs - it.lhs}, {"ok", it.ok}});
    json levels = json::array();
    for (int n = 0; n < ctx.sched.levels(); ++n) {
        const auto un = static_cast<std::size_t>(n);
        levels.push_back({{"n", n}, {"lambda", ctx.sched.lambda[un]}, {"N", ctx.sched.N[un]}, {"delta", ctx.sched.delta[un]}, {"F", ctx.sched.F[un]}});
    }
    o.report = {{"config", to_json(c)}, {"calibration", ctx.calibration}, {"levels", levels}, {"constraints", items},
                {"violations", rep.violations}, {"pass", rep.all_ok}};
    o.pass = rep.all_ok;
    return o;
}

// ---------------------------------------------------------------- run

static void dump_state(const std::filesystem::path& p, const scheme::IterationState& st, const RunConfig& c) {
    grid::dump(p.string(), {&st.u[0], &st.u[1], &st.E[flux::Minus], &st.E[flux::Plus]}, {"u0", "u1", "E_minus", "E_plus"},
               {{"level", st.n}, {"flux", c.flux}, {"phase", st.phase.name()}});
}

Outcome run(RunConfig& c, bool write) {
    Outcome o;
    auto ctx = make_context(c, Command::Run);
    const bool strict = c.sp.mode == scheme::Mode::Strict;
    std::filesystem::path dir;
    if (write) dir = ensure_dir(c.out);

    scheme::IterationState st;
    try {
        st = scheme::init_subsolution(ctx.sched, ctx.sc, ctx.grid, ctx.flux, scheme::PhaseFn::from_string(c.phase), c.ratio0);
    } catch (const grid::GridError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    if (write && c.dump) dump_state(dir / "state_0.bin", st, c);
    const auto bank = weak::TestFunctionBank::make(c.seed, c.bank, ctx.grid.t0, ctx.grid.t1, ctx.grid.Lx);

    std::string bands = "n,family,E_min,E_max,band_lo,band_hi,case1,case3,case2,case2_ratio,nonpositive,below_band,above_band\n";
    std::string ledger = "n,name,measured,predicted,ratio,pass\n";
    json steps = json::array();
    bool pass = true;
    double cstar_ref = c.sp.Cstar;
    std::string stopped;
    for (int n = 0; n < c.steps; ++n) {
        scheme::StepOptions opt;
        opt.enforce = 0;
        scheme::StepResult r;
        try {
            r = scheme::step(st, opt);
        } catch (const scheme::ResolutionError& e) {
            throw ConfigError(e.what());
        } catch (const dsl::DomainError& e) {
            stopped = "level " + std::to_string(n) + ": " + e.what();
            pass = false;
            break;
        }
        if (n == 0 && cstar_ref == 0) cstar_ref = 2 * r.cstar;
        json s = r.to_json();
        const bool positive = r.cases.positive();
        const bool band = r.cases.in_band();
        const bool cbound = r.cstar <= cstar_ref;
        const bool ledger_ok = r.ledger.all_pass();
        const auto pde = residual::pde_residual_check(r.next.u, r.next.E, *ctx.flux, ctx.sc, &bank);
        s["pde_residual"] = pde.to_json();
        s["Cstar_reference"] = cstar_ref;
        s["checks"] = {{"positive", positive}, {"in_band", band}, {"Cstar_bound", cbound}, {"ledger", ledger_ok}};
        bool ok = positive && cbound && ledger_ok && (band || !strict);
        if (!strict) {
            // Case-2 decay per step, relaxed runs only
            const double lo = 0.8 * c.sp.r * c.sp.r, hi = 1.25 * c.sp.r * c.sp.r;
            bool decay = true;
            for (int k = 0; k < 2; ++k) {
                const double q = r.cases.case2_ratio(k);
                if (!std::isnan(q)) decay = decay && q >= lo && q <= hi;
            }
            s["checks"]["case2_decay"] = decay;
            s["case2_window"] = {lo, hi};
            ok = ok && decay;
        }
        s["pass"] = ok;
        pass = pass && ok;
        for (int k = 0; k < 2; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            bands += std::to_string(n + 1) + "," + (k == flux::Minus ? "minus" : "plus") + "," + num(r.cases.Emin[uk]) + "," +
                     num(r.cases.Emax[uk]) + "," + num(r.cases.band_lo) + "," + num(r.cases.band_hi) + "," +
                     std::to_string(r.cases.counts[0]) + "," + std::to_string(r.cases.counts[1]) + "," + std::to_string(r.cases.counts[2]) +
                     "," + num(r.cases.case2_ratio(k)) + "," + std::to_string(r.cases.nonpositive) + "," +
                     std::to_string(r.cases.below_band) + "," + std::to_string(r.cases.above_band) + "\n";
        }
        for (const auto& e : r.ledger.entries)
            ledger += std::to_string(n) + "," + e.name + "," + num(e.measured) + "," + num(e.predicted) + "," + num(e.ratio()) + "," +
                      (e.pass ? "true" : "false") + "\n";
        steps.push_back(s);
        st = r.next;
        if (write && c.dump) dump_state(dir / ("state_" + std::to_string(n + 1) + ".bin"), st, c);
        if (!positive && strict) {
            stopped = "level " + std::to_string(n + 1) + ": positivity-violation";
            break;
        }
    }
    json rep{{"command", "run"},      {"config", to_json(c)},           {"calibration", ctx.calibration},
             {"schedule", scheme::to_json(ctx.sched)}, {"steps", steps}, {"pass", pass}};
    if (!stopped.empty()) rep["stopped"] = stopped;
    if (write) {
        write_text(dir / "run.json", rep.dump(1) + "\n");
        write_text(dir / "E_bands.csv", bands);
        write_text(dir / "ledger.csv", ledger);
    }
    o.report = rep;
    o.pass = pass;
    return o;
}

// ---------------------------------------------------------------- dephase

Outcome dephase_pair(RunConfig& c, bool write) {
    Outcome o;
    auto ctx = make_context(c, Command::Dephase);
    dephase::PairConfig cfg;
    cfg.flux = ctx.flux;
    cfg.sc = ctx.sc;
    cfg.sched = ctx.sched;
    cfg.grid = ctx.grid;
    cfg.n_max = c.steps;
    cfg.ratio0 = c.ratio0;
    dephase::PairRun pr;
    try {
        pr = dephase::run_pair(cfg);
    } catch (const scheme::ResolutionError& e) {
        throw ConfigError(e.what());
    }
    const auto agree = dephase::agreement_check(pr);
    const auto flip = dephase::phase_flip_check(pr);
    const auto sep = dephase::separation_check(pr);
    const auto psi = dephase::make_psi();
    const bool psi_ok = psi.value(-1.0) == 0.0 && psi.value(-0.5) == scheme::kPiL && psi.value(-2.0) == 0.0 && psi.value(0.0) == scheme::kPiL;
    o.pass = agree.pass && flip.pass && sep.pass && psi_ok;
    o.report = {{"command", "dephase"},
                {"config", to_json(c)},
                {"calibration", ctx.calibration},
                {"schedule", scheme::to_json(ctx.sched)},
                {"alpha0", pr.alpha0},
                {"psi_endpoints", psi_ok},
                {"agreement", agree.to_json()},
                {"phase_flip", flip.to_json()},
                {"separation", sep.to_json()},
                {"pass", o.pass}};
    if (write) {
        const auto dir = ensure_dir(c.out);
        write_text(dir / "dephase.json", o.report.dump(1) + "\n");
        std::string csv = "n,radius,C,probes,min_first_rminus,min_first_rplus,max_second_rminus,max_second_rplus,lower,upper,gap_origin,gap_need,pass\n";
        for (const auto& L : sep.levels)
            csv += std::to_string(L.n) + "," + num(L.radius) + "," + num(L.C) + "," + std::to_string(L.probes) + "," + num(L.min_first[0]) +
                   "," + num(L.min_first[1]) + "," + num(L.max_second[0]) + "," + num(L.max_second[1]) + "," + num(L.lower) + "," +
                   num(L.upper) + "," + num(L.gap_origin) + "," + num(L.gap_need) + "," + (L.pass ? "true" : "false") + "\n";
        write_text(dir / "separation.csv", csv);
        if (c.dump)
            for (std::size_t k = 0; k < 2; ++k)
                dump_state(dir / ("pair" + std::to_string(k + 1) + "_state_" + std::to_string(c.steps) + ".bin"), pr.traj[k].states.back(), c);
    }
    return o;
}

// ---------------------------------------------------------------- verify

// Weak residual of a dumped field. With E components present the subsolution system
// d_t u + d_x[f(u) + E_- b_- + E_+ b_+] = 0 is tested, otherwise the plain system.
Outcome verify(RunConfig& c, const std::string& path) {
    Outcome o;
    grid::Dump d;
    try {
        d = grid::load_dump(path);
    } catch (const grid::GridError& e) {
        throw ConfigError(std::string("verify: ") + e.what());
    }
    const auto names = d.header.value("names", std::vector<std::string>{});
    auto find = [&](const std::string& n) -> const grid::ScalarField* {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == n) return &d.comps[k];
        return nullptr;
    };
    const auto* u0 = find("u0");
    const auto* u1 = find("u1");
    if (!u0 || !u1) throw ConfigError("verify: dump has no u0/u1 components");
    const auto f = load(c);
    const grid::VecField u{*u0, *u1};
    const auto& g = u.grid();
    const auto* Em = find("E_minus");
    const auto* Ep = find("E_plus");
    const bool sub = Em && Ep;
    grid::VecField F;
    if (sub) {
        const auto sc = flux::structure_constants(*f);
        F = residual::total_flux(u, {*Em, *Ep}, *f, sc);
    } else {
        F = scheme::flux_field(u, *f);
    }
    const double ta = std::max(u0->valid0(), F[0].valid0()), tb = std::min(u0->valid1(), F[0].valid1());
    const auto bank = weak::TestFunctionBank::make(c.seed, c.bank, ta, tb, g.Lx);
    json rows = json::array();
    double worst_abs = 0, worst_rel = 0;
    std::array<grid::ScalarField, 2> uu{u[0], u[1]};
    for (auto& x : uu) x.set_valid(ta, tb);
    for (const auto& phi : bank.items) {
        double res = 0, scale = 0;
        for (int k = 0; k < 2; ++k) {
            const auto& uk = uu[static_cast<std::size_t>(k)];
            res = std::fmax(res, std::fabs(weak::pair(uk, F[k], phi)));
            // scale: the same pairing with absolute values
            double s = 0;
            for (int n = uk.first_valid_row(); n <= uk.last_valid_row(); ++n) {
                const double t = g.t(n);
                if (t <= phi.t_lo() || t >= phi.t_hi()) continue;
                for (int i = 0; i < g.Nx; ++i)
                    s += std::fabs(uk.at(n, i) * phi.dt(t, g.x(i))) + std::fabs(F[k].at(n, i) * phi.dx(t, g.x(i)));
            }
            scale = std::fmax(scale, s * g.dt() * g.dx());
        }
        const double rel = scale > 0 ? res / scale : 0.0;
        rows.push_back({{"tc", phi.tc}, {"xc", phi.xc}, {"wt", phi.wt}, {"wx", phi.wx}, {"residual", res}, {"relative", rel}});
        worst_abs = std::fmax(worst_abs, res);
        worst_rel = std::fmax(worst_rel, rel);
    }
    o.pass = worst_rel <= c.tol;
    o.report = {{"command", "verify"},   {"dump", path},           {"system", sub ? "subsolution" : "plain"}, {"seed", c.seed},
                {"tests", rows},          {"max_residual", worst_abs}, {"max_relative", worst_rel},              {"tol", c.tol},
                {"pass", o.pass}};
    return o;
}

// ---------------------------------------------------------------- report

// Collects run.json / dephase.json under a directory into one summary table.
Outcome report(const std::string& dir) {
    Outcome o;
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("report: no directory " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && (name == "run.json" || name == "dephase.json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string csv = "source,kind,n,Cstar_measured,w_max,E_minus_min,E_minus_max,E_plus_min,E_plus_max,case2_ratio_minus,case2_ratio_plus,pde_max,pass\n";
    json items = json::array();
    bool pass = !files.empty();
    for (const auto& p : files) {
        const json j = read_json_file(p.string());
        const std::string src = fs::relative(p, dir).generic_string();
        const bool ok = j.value("pass", false);
        pass = pass && ok;
        items.push_back({{"source", src}, {"command", j.value("command", "")}, {"pass", ok}});
        auto val = [](const json& x) { return x.is_number() ? num(x.get<double>()) : std::string("nan"); };
        if (j.value("command", "") == "run") {
            for (const auto& s : j["steps"]) {
                double wmax = 0;
                for (const auto& e : s["ledger"]["entries"])
                    if (e["name"] == "w+" || e["name"] == "w-") wmax = std::fmax(wmax, e["measured"].get<double>());
                const auto& cs = s["cases"];
                csv += src + ",run," + std::to_string(s["level"].get<int>()) + "," + val(s["Cstar_measured"]) + "," + num(wmax) + "," +
                       val(cs["E_minus_min"]) + "," + val(cs["E_minus_max"]) + "," + val(cs["E_plus_min"]) + "," + val(cs["E_plus_max"]) + "," +
                       val(cs["case2_ratio_minus"]) + "," + val(cs["case2_ratio_plus"]) + "," + val(s["pde_residual"]["max_norm"]) + "," +
                       (s.value("pass", false) ? "true" : "false") + "\n";
            }
        } else {
            for (const auto& L : j["separation"]["levels"])
                csv += src + ",dephase," + std::to_string(L["n"].get<int>()) + ",nan,nan,nan,nan,nan,nan,nan,nan,nan," +
                       (L.value("pass", false) ? "true" : "false") + "\n";
        }
    }
    write_text(fs::path(dir) / "summary.csv", csv);
    o.report = {{"command", "report"}, {"dir", dir}, {"sources", items}, {"pass", pass}};
    write_text(fs::path(dir) / "summary.json", o.report.dump(1) + "\n");
    o.pass = pass;
    return o;
}

}  // namespace hypci::app
