// Acceptance driver: runs the reference scenarios and prints one PASS/FAIL
// line per criterion, also written to acceptance_report.txt. The exit status
// is nonzero only when a criterion could not be evaluated; verdicts are in
// the report.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>

#include <vns/simulation.hpp>

#include "dense_oracle.hpp"

using namespace vns;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs a configuration without file output and keeps the finished simulation.
std::unique_ptr<Simulation> simulate(SimConfig cfg) {
    cfg.write_files = false;
    Simulation* raw = nullptr;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run(cfg, &raw);
    std::unique_ptr<Simulation> sim(raw);
    if (res.exit_code != 0) throw std::runtime_error("run '" + cfg.preset + "' failed: " + res.error);
    std::fprintf(stderr, "  ran %s (n=%d, dt=%g, T=%g, %zu particles) in %.1f s\n", cfg.preset.c_str(), cfg.n, cfg.dt,
                 cfg.t_end, sim->particles().size(), seconds_since(t0));
    return sim;
}

SimConfig preset(const std::string& name, const FlatConfig& extra = {}) { return make_config({extra}, name); }

double window_integral(const std::vector<DiagnosticsRow>& rows, double DiagnosticsRow::*col, double a, double b) {
    double s = 0.0;
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (rows[k - 1].t >= a - 1e-12 && rows[k].t <= b + 1e-12)
            s += 0.5 * (rows[k].t - rows[k - 1].t) * (rows[k].*col + rows[k - 1].*col);
    return s;
}

VectorField random_solenoidal(const TorusGrid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    Spectrum psi(g);
    for_each_mode(g, [&](int r, int c, std::size_t i) {
        if (g.kept(r, c) && c < g.n / 2 && r != g.n / 2) psi.c[i] = cplx(U(rng), U(rng)) / (1.0 + g.k2(r, c));
    });
    psi.c[0] = 0.0;
    const auto gp = gradient(inverse(psi));
    VectorField u(gp.y, gp.x);
    for (auto& v : u.y.v) v = -v;
    return u;
}

// Shared runs, computed on first use.
struct Runs {
    std::unique_ptr<Simulation> large, large_half, small, inhom, equil, equil_inhom, fluid, oracle;

    Simulation& get(std::unique_ptr<Simulation>& slot, const std::function<SimConfig()>& make) {
        if (!slot) slot = simulate(make());
        return *slot;
    }
    Simulation& homog_large() { return get(large, [] { return preset("homog-large"); }); }
    Simulation& homog_large_half() {
        return get(large_half, [] {
            auto c = preset("homog-large");
            c.dt *= 0.5;
            return c;
        });
    }
    Simulation& small_f0() { return get(small, [] { return preset("homog-small-f0"); }); }
    Simulation& inhomog() { return get(inhom, [] { return preset("inhomog-jump"); }); }
    Simulation& equilibrium() { return get(equil, [] { return preset("equilibrium"); }); }
    Simulation& equilibrium_inhomog() {
        return get(equil_inhom, [] {
            FlatConfig c;
            c["mode"] = std::string("inhomogeneous");
            c["density.rho0"] = std::string("piecewise");
            c["density.levels"] = std::vector<double>{1.0, 2.0};
            c["density.smoothing_cells"] = 2.0;
            c["time.dt"] = 2e-4;
            c["time.t_end"] = 0.2;
            return preset("equilibrium", c);
        });
    }
    Simulation& fluid_only() { return get(fluid, [] { return preset("fluid-only"); }); }
    Simulation& oracle_check() { return get(oracle, [] { return preset("oracle-check"); }); }
};

// ---------------------------------------------------------------- criteria

Verdict conservation(Runs& R) {
    Verdict v;
    auto& a = R.homog_large();
    auto& b = R.homog_large_half();
    const auto& ba = a.balance();
    const auto& bb = b.balance();
    const double E0 = a.rows().front().E;
    v.check(ba.mass_drift <= 1e-12 && bb.mass_drift <= 1e-12, fmt("mass drift %.2e", std::max(ba.mass_drift, bb.mass_drift)));
    v.check(ba.momentum_drift <= 1e-3 && bb.momentum_drift <= 1e-3,
            fmt("momentum drift %.2e", std::max(ba.momentum_drift, bb.momentum_drift)));
    v.check(ba.max_energy <= 0.01 * E0, fmt("energy residual %.3e of E0", ba.max_energy / E0));
    const double ratio = ba.max_energy / std::max(bb.max_energy, 1e-300);
    v.check(ratio >= 3.5, fmt("halving dt reduces it %.2fx", ratio));
    return v;
}

Verdict large_data_decay(Runs& R) {
    Verdict v;
    auto& s = R.homog_large();
    const auto& rows = s.rows();
    const auto& b = s.balance();
    v.check(b.h_monotone, fmt("H non-increasing (worst excess %.2e)", b.worst_h_increase));
    const double ratio = rows.back().H / rows.front().H;
    v.check(ratio <= 0.5, fmt("H(5)/H(0) = %.3e", ratio));
    std::vector<double> t, h;
    for (const auto& r : rows) {
        t.push_back(r.t);
        h.push_back(r.H);
    }
    const auto f = fit_decay(t, h, DecayModel::algebraic, 1.0, 5.0);
    v.check(f.slope < 0.0 && f.r2 >= 0.9, fmt("algebraic exponent %.3f, R2 %.4f", f.slope, f.r2));
    return v;
}

Verdict exponential_regime(Runs& R) {
    Verdict v;
    auto& s = R.small_f0();
    const auto& rows = s.rows();
    const auto& c = s.config();
    const double a = c.fit_window[0], b = c.fit_window[1];
    const double budget = window_integral(rows, &DiagnosticsRow::grad_u_Linf, a, b);
    v.check(budget <= 0.1, fmt("Lipschitz budget over fit window %.3e", budget));
    std::vector<double> t;
    for (const auto& r : rows) t.push_back(r.t);
    auto column = [&](double DiagnosticsRow::*col) {
        std::vector<double> y;
        for (const auto& r : rows) y.push_back(r.*col);
        return fit_decay(t, y, DecayModel::exponential, a, b);
    };
    const auto fh = column(&DiagnosticsRow::H);
    v.check(fh.rate > 0.0 && fh.r2 >= 0.95, fmt("H rate %.4f, R2 %.4f", fh.rate, fh.r2));
    const auto fu = column(&DiagnosticsRow::u_dev_L2);
    v.check(fu.rate > 0.0, fmt("|u-u_inf| rate %.4f", fu.rate));
    const auto fd = column(&DiagnosticsRow::udot_L2);
    v.check(fd.rate > 0.0, fmt("|udot| rate %.4f", fd.rate));
    const auto fw = column(&DiagnosticsRow::w1_bound);
    v.check(fw.rate > 0.0, fmt("W1 surrogate rate %.4f", fw.rate));
    v.detail += fmt("; lambda0 scale %.4f (H rate / scale %.3f, informational)", s.lambda0(), fh.rate / s.lambda0());
    return v;
}

Verdict limit_profile(Runs& R) {
    Verdict v;
    auto& s = R.small_f0();
    const auto summary = build_summary(s);
    const double dist = s.rows().back().nf_profile_Hm1;
    if (summary["truncation_estimate"].is_null()) {
        v.check(false, "no positive flux decay rate for the tail estimate");
    } else {
        const double tail = summary["truncation_estimate"];
        v.check(dist <= 10.0 * tail, fmt("|n(T)-n_inf|_H-1 = %.3e vs tail estimate %.3e", dist, tail));
    }
    auto& e = R.equilibrium();
    const auto& p = e.nf_profile();
    TorusGrid G = e.grid();
    const auto n0 = deposit_moments(sample_initial(e.f0(), e.config().count, e.config().seed, e.config().sampling,
                                                   e.config().velocity_classes),
                                    G, VectorField(G))
                        .n;
    double m = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) m = std::max(m, std::abs(p.v[i] - n0.v[i]));
    v.check(m <= 1e-12, fmt("equilibrium profile vs n_f0 max diff %.2e", m));
    return v;
}

Verdict appendix_suite(Runs& R) {
    Verdict v;
    {  // pusher against the closed form
        TorusGrid g(16, 1.0);
        VectorField u(g);
        for (auto& x : u.x.v) x = 0.3;
        for (auto& y : u.y.v) y = -0.7;
        ParticleEnsemble e;
        e.resize(3);
        e.x = {0.1, 0.5, 0.9};
        e.y = {0.2, 0.4, 0.8};
        e.vx = {1.0, -0.5, 0.0};
        e.vy = {0.0, 0.25, 2.0};
        e.w = {1, 1, 1};
        const auto e0 = e;
        const double dt = 0.01;
        for (int k = 0; k < 100; ++k) push_in_place(e, u, dt);
        double err = 0.0;
        const double d = std::exp(-1.0), om = -std::expm1(-1.0);
        for (std::size_t p = 0; p < 3; ++p) {
            err = std::max(err, std::abs(e.vx[p] - (0.3 + d * (e0.vx[p] - 0.3))));
            err = std::max(err, std::abs(e.vy[p] - (-0.7 + d * (e0.vy[p] + 0.7))));
            err = std::max(err, std::abs(std::remainder(e.x[p] - (e0.x[p] + 0.3 + om * (e0.vx[p] - 0.3)), 1.0)));
            err = std::max(err, std::abs(std::remainder(e.y[p] - (e0.y[p] - 0.7 + om * (e0.vy[p] + 0.7)), 1.0)));
        }
        v.check(err <= 1e-12, fmt("pusher vs closed form %.2e", err));
    }
    {  // probe in a resting fluid
        TorusGrid g(16, 1.0);
        VelocityHistory h;
        for (int k = 0; k <= 10; ++k) h.append(0.1 * k, VectorField(g));
        const double J = flow_jacobian_probe({0.3, 0.7}, {0.4, -0.2}, 0.0, 1.0, h, 1e-4);
        v.check(std::abs(J - std::exp(2.0)) <= 1e-4, fmt("probe at rest %.7f", J));
    }
    auto& s = R.small_f0();
    {  // probes inside the stored velocity window
        const auto& hist = s.history();
        const double a = hist.times.front(), b = hist.times.back();
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> U(0, 1);
        double worst = INFINITY;
        for (int k = 0; k < 20; ++k) {
            double t1 = a + (b - a) * U(rng), t2 = a + (b - a) * U(rng);
            if (t1 > t2) std::swap(t1, t2);
            const Vec2 x{U(rng), U(rng)}, w{2 * U(rng) - 1, 2 * U(rng) - 1};
            const double J = flow_jacobian_probe(x, w, t1, t2, hist);
            worst = std::min(worst, J / (0.5 * std::exp(2 * (t2 - t1))));
        }
        const double budget = window_integral(s.rows(), &DiagnosticsRow::grad_u_Linf, a, b);
        v.check(worst >= 1.0, fmt("20 probes in [%.1f, %.1f]", a, b) +
                                  fmt(": min det / (e^{2dt}/2) = %.4f, window budget %.2e", worst, budget));
    }
    {  // entropy bound
        bool ok = true;
        double margin = INFINITY;
        for (auto* sim : {&s, &R.homog_large()})
            for (const auto& r : sim->rows()) {
                ok = ok && r.entropy <= r.entropy_bound;
                margin = std::min(margin, r.entropy_bound - r.entropy);
            }
        v.check(ok, fmt("entropy below affine bound (min margin %.3e)", margin));
    }
    return v;
}

Verdict oracle_equivalence() {
    Verdict v;
    const auto cfg = preset("oracle-check");
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = compare_with_oracle(cfg);
    const double secs = seconds_since(t0);
    v.check(r.errors.n.l1 <= 0.05, fmt("n_f L1 %.4f", r.errors.n.l1));
    v.check(r.errors.j.l1 <= 0.08, fmt("j_f L1 %.4f", r.errors.j.l1));
    v.check(r.errors.e.l1 <= 0.08, fmt("e_f L1 %.4f", r.errors.e.l1));
    v.check(secs <= 120.0, fmt("runtime %.1f s", secs));
    v.detail += fmt("; oracle mass %.4f -> %.4f", r.oracle_mass0, r.oracle_mass1);
    v.detail += fmt(", boundary ring mass %.1e", r.boundary_mass_max);
    // same comparison with the finest velocity grid allowed at 16^2 in space
    auto fine = cfg;
    fine.oracle_nv = 64;
    const auto rf = compare_with_oracle(fine);
    v.detail += fmt("; nv 64 (informational): n_f %.4f, j_f %.4f", rf.errors.n.l1, rf.errors.j.l1) +
                fmt(", e_f %.4f, oracle mass -> %.4f", rf.errors.e.l1, rf.oracle_mass1);
    return v;
}

Verdict inhomogeneous_suite(Runs& R) {
    Verdict v;
    auto& s = R.inhomog();
    const auto [lo, hi] = s.rho_bounds0();
    double below = 0.0, above = 0.0, mean_dev = 0.0;
    const double m0 = s.rows().front().rho_mean;
    for (const auto& r : s.rows()) {
        below = std::max(below, lo - r.rho_min);
        above = std::max(above, r.rho_max - hi);
        mean_dev = std::max(mean_dev, std::abs(r.rho_mean - m0));
    }
    v.check(below <= 1e-10 && above <= 1e-10, fmt("rho bounds excess %.2e / %.2e", below, above));
    v.check(mean_dev <= 1e-12 * m0, fmt("mean rho drift %.2e", mean_dev));
    const double E0 = s.rows().front().E;
    v.check(s.balance().max_energy <= 0.01 * E0, fmt("energy residual %.3e of E0", s.balance().max_energy / E0));
    {  // unit density against the homogeneous solver, coupled to particles
        FlatConfig c;
        c["time.t_end"] = 0.02;
        c["density.rho0"] = std::string("constant");
        c["density.value"] = 1.0;
        c["particles.count"] = 4096.0;
        c["output.write"] = false;
        Simulation a(make_config({c}, "inhomog-jump"));
        c["mode"] = std::string("homogeneous");
        Simulation b(make_config({c}, "inhomog-jump"));
        double diff = 0.0;
        while (a.time() < 0.02 - 1e-12) {
            const double dt = a.next_dt();
            a.step(dt);
            b.step(dt);
            for (std::size_t i = 0; i < a.grid().size(); ++i) {
                diff = std::max(diff, std::abs(a.velocity().x.v[i] - b.velocity().x.v[i]));
                diff = std::max(diff, std::abs(a.velocity().y.v[i] - b.velocity().y.v[i]));
            }
            for (std::size_t p = 0; p < a.particles().size(); ++p)
                diff = std::max(diff, std::abs(a.particles().vx[p] - b.particles().vx[p]));
        }
        v.check(diff <= 1e-12, fmt("rho = 1 vs homogeneous, every step: %.2e", diff));
    }
    {
        auto& e = R.equilibrium_inhomog();
        const auto& p = *e.rho_profile();
        const auto rho0 = initial_density(e.config(), e.grid());
        double m = 0.0;
        for (std::size_t i = 0; i < p.v.size(); ++i) m = std::max(m, std::abs(p.v[i] - rho0.v[i]));
        v.check(m <= 1e-12, fmt("equilibrium rho profile vs rho0 %.2e", m));
    }
    return v;
}

Verdict fluid_controls(Runs& R) {
    Verdict v;
    auto& s = R.fluid_only();
    double worst = 0.0;
    const double k = 16.0 * std::numbers::pi * std::numbers::pi;
    for (const auto& r : s.rows()) worst = std::max(worst, std::abs(r.E / (0.25 * std::exp(-k * r.t)) - 1.0));
    v.check(worst <= 1e-6 && s.config().dt == 1e-4, fmt("Taylor-Green energy rel. error %.2e at dt 1e-4", worst));
    {  // Helmholtz split on 8^2 against the dense least-squares solution
        const int n = 8;
        TorusGrid g(n, 1.0);
        const auto sol = random_solenoidal(g, 5);
        const auto phi = sample(g, [](double x, double y) { return std::cos(two_pi * x) * std::sin(2 * two_pi * y); });
        VectorField f = sol;
        axpy(f, 1.0, gradient(phi));
        const Eigen::MatrixXd Dx = dense::dx(n, 1.0), Dy = dense::dy(n, 1.0);
        Eigen::MatrixXd Gm(2 * n * n, n * n);
        Gm << Dx, Dy;
        Eigen::VectorXd fv(2 * n * n);
        fv << dense::vec(f.x), dense::vec(f.y);
        const Eigen::VectorXd p = Gm.completeOrthogonalDecomposition().solve(fv);
        const Eigen::VectorXd rest = fv - Gm * p;
        const auto P = leray_project(f);
        Eigen::VectorXd pv(2 * n * n);
        pv << dense::vec(P.x), dense::vec(P.y);
        const double e = (rest - pv).cwiseAbs().maxCoeff();
        v.check(e <= 1e-10, fmt("Leray vs dense split (8^2) %.2e", e));
    }
    {  // pressure against the dense Poisson solve on 16^2
        const int n = 16;
        TorusGrid g(n, 1.0);
        const auto u = taylor_green(g, 1.0);
        const Eigen::MatrixXd Dx = dense::dx(n, 1.0), Dy = dense::dy(n, 1.0);
        const Eigen::VectorXd ux = dense::vec(u.x), uy = dense::vec(u.y);
        const Eigen::VectorXd ax = Dx * ux.cwiseProduct(ux) + Dy * ux.cwiseProduct(uy);
        const Eigen::VectorXd ay = Dx * ux.cwiseProduct(uy) + Dy * uy.cwiseProduct(uy);
        const Eigen::VectorXd p = dense::solve_mean_free(Dx * Dx + Dy * Dy, -(Dx * ax + Dy * ay));
        const double e = (p - dense::vec(recover_pressure(u, VectorField(g)))).cwiseAbs().maxCoeff();
        v.check(e <= 1e-10, fmt("Taylor-Green pressure vs dense Poisson (16^2) %.2e", e));
    }
    return v;
}

Verdict identities(Runs& R) {
    Verdict v;
    double worst = 0.0;
    for (auto* s : {&R.homog_large(), &R.homog_large_half(), &R.small_f0(), &R.inhomog(), &R.equilibrium(),
                    &R.equilibrium_inhomog(), &R.fluid_only(), &R.oracle_check()})
        worst = std::max(worst, s->balance().max_identity);
    v.check(worst <= 1e-8, fmt("u_inf relation residual, all presets %.2e", worst));
    TorusGrid g(32, 1.0);
    double tr = 0.0;
    for (unsigned k = 0; k < 50; ++k) {
        const auto u = random_solenoidal(g, 1000 + k);
        tr = std::max(tr, std::abs(pressure_trace_cubic(velocity_gradient(u), recover_pressure(u, VectorField(g)))));
    }
    v.check(tr <= 1e-10, fmt("int P Tr(grad u)^3 on 50 fields %.2e", tr));
    return v;
}

}  // namespace

int main() {
    Runs R;
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"conservation", [&] { return conservation(R); }},
        {"large-data modulated energy decay", [&] { return large_data_decay(R); }},
        {"small-data exponential regime", [&] { return exponential_regime(R); }},
        {"limit profile", [&] { return limit_profile(R); }},
        {"characteristics and entropy", [&] { return appendix_suite(R); }},
        {"phase-space grid equivalence", [] { return oracle_equivalence(); }},
        {"variable density", [&] { return inhomogeneous_suite(R); }},
        {"fluid-only controls", [&] { return fluid_controls(R); }},
        {"identities", [&] { return identities(R); }},
    };
    int failed = 0, errors = 0, k = 0;
    std::ofstream report("acceptance_report.txt");
    for (const auto& [name, fn] : criteria) {
        ++k;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            ++errors;
            v.pass = false;
            v.detail = std::string("error: ") + e.what();
        }
        failed += !v.pass;
        char line[4096];
        std::snprintf(line, sizeof line, "criterion %d (%s): %s : %s\n", k, name.c_str(), v.pass ? "PASS" : "FAIL",
                      v.detail.c_str());
        std::fputs(line, stdout);
        std::fflush(stdout);
        report << line << std::flush;
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    report << int(criteria.size()) - failed << " of " << criteria.size() << " criteria passed\n";
    return errors == 0 ? 0 : 2;
}
