#pragma once

/// Time-stepping orchestration for the coupled particle / fluid system, the
/// diagnostics recording loop, the phase-space comparison run and file output.

#include <cstdio>
#include <cstring>
#include <filesystem>

#include <json.hpp>

#include <vns/config.hpp>
#include <vns/diagnostics.hpp>
#include <vns/oracle.hpp>

namespace vns {

using json = nlohmann::json;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- file output

inline void write_timeseries(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw IoError("cannot write " + path);
    const bool rho = !rows.empty() && rows.front().has_rho;
    const auto& cols = csv_columns(rho);
    for (std::size_t i = 0; i < cols.size(); ++i) std::fprintf(fp, "%s%s", i ? "," : "", cols[i].c_str());
    std::fprintf(fp, "\n");
    for (const auto& r : rows) {
        const auto v = csv_values(r);
        for (std::size_t i = 0; i < v.size(); ++i) std::fprintf(fp, "%s%.17g", i ? "," : "", v[i]);
        std::fprintf(fp, "\n");
    }
    if (std::fclose(fp) != 0) throw IoError("error closing " + path);
}

/// Reads a numeric CSV with a header line into named columns.
inline std::map<std::string, std::vector<double>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) names.push_back(toml::trim(c));
    }
    std::map<std::string, std::vector<double>> out;
    for (const auto& n : names) out[n];
    while (std::getline(in, line)) {
        if (toml::trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string c;
        std::size_t k = 0;
        while (std::getline(ss, c, ',') && k < names.size()) out[names[k++]].push_back(std::stod(c));
    }
    return out;
}

/// Raw row-major little-endian doubles in <base>.bin with a JSON sidecar <base>.json.
inline void write_field_snapshot(const std::string& base, const std::vector<std::pair<std::string, ScalarField>>& fields,
                                 double t) {
    if (fields.empty()) throw std::invalid_argument("write_field_snapshot: no fields");
    const auto& G = fields.front().second.grid;
    std::ofstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + base + ".bin");
    json meta;
    meta["time"] = t;
    meta["grid_n"] = G.n;
    meta["length"] = G.length;
    meta["dtype"] = "f64le";
    meta["layout"] = "row-major";
    meta["field_names"] = json::array();
    for (const auto& [name, f] : fields) {
        meta["field_names"].push_back(name);
        for (double x : f.v) {
            unsigned char b[8];
            std::uint64_t u;
            std::memcpy(&u, &x, 8);
            for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xff;
            bin.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!bin) throw IoError("error writing " + base + ".bin");
    std::ofstream side(base + ".json");
    if (!side) throw IoError("cannot write " + base + ".json");
    side << meta.dump(2) << "\n";
}

struct Snapshot {
    double time = 0.0;
    TorusGrid grid;
    std::vector<std::pair<std::string, ScalarField>> fields;
};

inline Snapshot read_field_snapshot(const std::string& base) {
    std::ifstream side(base + ".json");
    if (!side) throw IoError("cannot read " + base + ".json");
    const auto meta = json::parse(side);
    Snapshot s;
    s.time = meta.at("time").get<double>();
    s.grid = TorusGrid(meta.at("grid_n").get<int>(), meta.at("length").get<double>());
    std::ifstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot read " + base + ".bin");
    for (const auto& name : meta.at("field_names")) {
        ScalarField f(s.grid);
        for (auto& x : f.v) {
            unsigned char b[8];
            if (!bin.read(reinterpret_cast<char*>(b), 8)) throw IoError(base + ".bin: truncated payload");
            std::uint64_t u = 0;
            for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
            std::memcpy(&x, &u, 8);
        }
        s.fields.emplace_back(name.get<std::string>(), std::move(f));
    }
    return s;
}

// ---------------------------------------------------------------- initial data

inline VectorField initial_velocity(const SimConfig& c, const TorusGrid& G) {
    VectorField u(G);
    const double A = c.u0_amplitude, w = two_pi / G.length;
    if (c.u0 == "taylor-green") u = taylor_green(G, A);
    else if (c.u0 == "shear") u.x = sample(G, [&](double, double y) { return A * std::sin(w * y); });
    for (auto& x : u.x.v) x += c.u0_mean[0];
    for (auto& y : u.y.v) y += c.u0_mean[1];
    u = leray_project(u);
    dealias(u);
    return u;
}

/// Smoothed two-level density in x1: high on (L/4, 3L/4), low elsewhere.
inline ScalarField initial_density(const SimConfig& c, const TorusGrid& G) {
    if (c.rho0 == "constant") return ScalarField(G, c.rho_value);
    const double lo = c.rho_levels[0], hi = c.rho_levels[1], L = G.length, d = c.smoothing_cells * G.h();
    return sample(G, [&](double x, double) {
        const double s = 0.5 * (std::tanh((x - 0.25 * L) / d) - std::tanh((x - 0.75 * L) / d));
        return lo + (hi - lo) * s;
    });
}

// ---------------------------------------------------------------- simulation

class Simulation {
public:
    explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)), G_(cfg_.n, cfg_.length) {
        u_ = initial_velocity(cfg_, G_);
        if (inhomogeneous()) rho_ = initial_density(cfg_, G_);
        f0_ = cfg_.initial_distribution();
        if (cfg_.has_particles())
            ens_ = sample_initial(f0_, cfg_.count, cfg_.seed, cfg_.sampling, cfg_.velocity_classes);
        ens_.length = G_.length;
        moments_ = deposit_moments(ens_, G_, u_);

        const auto b = bulk_totals(u_, ens_, rho_ ? &*rho_ : nullptr);
        mean_rho0_ = rho_ ? mean(*rho_) : 1.0;
        uinf_ = rho_ ? u_infinity_inhomogeneous({b.mean_u[0] * mean_rho0_, b.mean_u[1] * mean_rho0_}, mean_rho0_,
                                                b.mean_j, b.mean_n)
                     : u_infinity(b.mean_u, b.mean_j, b.mean_n);
        nf_acc_ = ParticleProfile(ens_, G_, uinf_);
        profile_accumulate(nf_acc_, ens_, t_);
        if (rho_) {
            rho_acc_ = ProfileAccumulator(*rho_, uinf_);
            profile_accumulate_density(*rho_acc_, *rho_, u_, t_);
            auto [lo, hi] = detail::minmax(*rho_);
            rho_bounds0_ = {lo, hi};
        }
        f0_log_norm_ = cfg_.has_particles() ? f0_log_f0_norm(f0_) : 0.0;
        lambda0_ = lambda0_scale(f0_, uinf_);
        M0_ = ens_.total_weight();
        if (cfg_.history_window[1] > cfg_.history_window[0] && cfg_.history_window[0] <= 0.0)
            history_.append(t_, u_);
    }

    bool inhomogeneous() const { return cfg_.mode == FlowMode::inhomogeneous; }
    const SimConfig& config() const { return cfg_; }
    const TorusGrid& grid() const { return G_; }
    double time() const { return t_; }
    long long steps() const { return step_; }
    const VectorField& velocity() const { return u_; }
    const std::optional<ScalarField>& density() const { return rho_; }
    const ParticleEnsemble& particles() const { return ens_; }
    const MomentFields& moments() const { return moments_; }
    const Vec2& u_inf() const { return uinf_; }
    const InitialDistribution& f0() const { return f0_; }
    const VelocityHistory& history() const { return history_; }
    const std::vector<DiagnosticsRow>& rows() const { return rows_; }
    double lambda0() const { return lambda0_; }
    std::array<double, 2> rho_bounds0() const { return rho_bounds0_; }

    double next_dt() const {
        double dt = cfg_.dt;
        if (cfg_.cfl > 0.0) dt = cfl_dt(u_, sup_norm(moments_.n), cfg_.cfl, cfg_.dt_max);
        return std::min(dt, cfg_.t_end - t_);
    }

    /// One coupled step: fluid predictor with the node drag, particle push in
    /// the averaged velocity, fluid corrector driven by the particles' exact
    /// momentum exchange.
    void step(double dt) {
        InhomogeneousOptions io{cfg_.poisson_tol, cfg_.poisson_max_iters, true};
        auto fluid_step = [&](const VectorField& B) {
            if (rho_) {
                auto s = step_inhomogeneous({*rho_, u_, t_}, B, dt, io);
                return std::pair{std::optional<ScalarField>(std::move(s.rho)), std::move(s.u)};
            }
            return std::pair{std::optional<ScalarField>(), step_homogeneous({u_, t_}, B, dt).u};
        };
        if (ens_.size() > 0) {
            const auto pred = fluid_step(moments_.brinkman).second;
            VectorField ueff = u_;
            for (std::size_t i = 0; i < G_.size(); ++i) {
                ueff.x.v[i] = 0.5 * (u_.x.v[i] + pred.x.v[i]);
                ueff.y.v[i] = 0.5 * (u_.y.v[i] + pred.y.v[i]);
            }
            VectorField impulse(G_);
            push_in_place(ens_, ueff, dt, &impulse);
            auto [r, u] = fluid_step(impulse);
            u_ = std::move(u);
            if (r) rho_ = std::move(*r);
        } else {
            auto [r, u] = fluid_step(VectorField(G_));
            u_ = std::move(u);
            if (r) rho_ = std::move(*r);
        }
        t_ += dt;
        ++step_;
        moments_ = deposit_moments(ens_, G_, u_);
        profile_accumulate(nf_acc_, ens_, t_);
        if (rho_) profile_accumulate_density(*rho_acc_, *rho_, u_, t_);
        const auto& hw = cfg_.history_window;
        if (hw[1] > hw[0] && t_ >= hw[0] - 0.5 * dt && t_ <= hw[1] + 0.5 * dt) history_.append(t_, u_);
        for (double x : u_.x.v)
            if (!std::isfinite(x)) throw NumericalError("non-finite velocity at t = " + std::to_string(t_));
    }

    /// Evaluates all diagnostics at the current state and appends a row.
    const DiagnosticsRow& record() {
        DiagnosticsRow r;
        const ScalarField* rp = rho_ ? &*rho_ : nullptr;
        r.t = t_;
        r.E = kinetic_energy(u_, ens_, rp);
        const auto lsq = [&] {
            ScalarField P;
            VectorField udot;
            if (rho_) {
                auto vp = recover_pressure_inhomogeneous(*rho_, u_, moments_.brinkman, cfg_.poisson_tol);
                P = std::move(vp.p);
                udot = std::move(vp.udot);
            } else {
                P = recover_pressure(u_, moments_.brinkman);
                udot = material_derivative(u_, moments_.brinkman);
            }
            return lyapunov_record(u_, P, udot, moments_, ens_);
        }();
        r.D = lsq.grad_u_sq + lsq.drag;
        r.drag = lsq.drag;
        r.H = modulated_energy(u_, ens_, rp);
        const auto b = bulk_totals(u_, ens_, rp);
        r.mass = b.mass;
        const auto pp = ens_.momentum();
        const double fm = b.fluid_mass;
        r.px = fm * b.mean_u[0] + pp[0];
        r.py = fm * b.mean_u[1] + pp[1];
        r.mean_ux = b.mean_u[0];
        r.mean_uy = b.mean_u[1];
        r.uinf_x = uinf_[0];
        r.uinf_y = uinf_[1];
        r.grad_u_L2 = std::sqrt(lsq.grad_u_sq);
        r.grad2_u_L2 = std::sqrt(lsq.grad2_u_sq);
        r.grad_P_L2 = std::sqrt(lsq.grad_P_sq);
        r.udot_L2 = std::sqrt(lsq.udot_sq);
        r.sqrt_n_udot_L2 = std::sqrt(lsq.sqrt_n_udot_sq);
        r.nf_Linf = lsq.nf_sup;
        r.jf_Linf = lsq.jf_sup;
        r.ef_Linf = lsq.ef_sup;
        r.grad_u_Linf = lsq.grad_u_sup;
        r.pressure_cross_term = lsq.cross_term;
        r.pressure_trace_cubic = lsq.trace_cubic;
        r.entropy = entropy(moments_.n);
        r.entropy_bound = entropy_bound(f0_log_norm_, t_, M0_, G_.area(), ens_);
        r.identity_residual = uinf_identity_residual(b, rho_ ? mean(*rho_) : 1.0, uinf_);
        {
            VectorField d = u_;
            for (auto& x : d.x.v) x -= uinf_[0];
            for (auto& y : d.y.v) y -= uinf_[1];
            r.u_dev_L2 = l2_norm(d);
            VectorField q(G_);
            for (std::size_t i = 0; i < G_.size(); ++i) {
                q.x.v[i] = moments_.j.x.v[i] - moments_.n.v[i] * uinf_[0];
                q.y.v[i] = moments_.j.y.v[i] - moments_.n.v[i] * uinf_[1];
            }
            r.flux_L2 = l2_norm(q);
        }
        r.particle_w1 = particle_w1(ens_, uinf_);
        // Lipschitz budget from the first time the dissipation falls below eta.
        if (!lip_started_) {
            const bool start = cfg_.lip_t_start >= 0.0 ? t_ >= cfg_.lip_t_start - 1e-12 : r.D <= cfg_.eta;
            if (start) {
                lip_started_ = true;
                lip_t_start_ = t_;
            }
        } else if (!rows_.empty()) {
            lip_budget_ += 0.5 * (t_ - rows_.back().t) * (r.grad_u_Linf + rows_.back().grad_u_Linf);
        }
        r.lip_budget = lip_budget_;
        if (rho_) {
            r.has_rho = true;
            const auto [lo, hi] = detail::minmax(*rho_);
            r.rho_min = lo;
            r.rho_max = hi;
            r.rho_mean = mean(*rho_);
            shifted_rho_.push_back(shifted_spectrum(*rho_, t_, uinf_));
        }
        shifted_nf_.push_back(forward(deposit_density_shifted(ens_, G_, {t_ * uinf_[0], t_ * uinf_[1]})));
        rows_.push_back(r);
        return rows_.back();
    }

    /// Limit profiles from the accumulated flux, and the post-pass columns.
    void finalize() {
        nf_profile_ = profile_finalize(nf_acc_);
        if (rho_acc_) rho_profile_ = profile_finalize(*rho_acc_);
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            auto& r = rows_[k];
            r.nf_profile_Hm1 = profile_distance(shifted_nf_[k], nf_profile_);
            r.w1_bound = r.particle_w1 + r.nf_profile_Hm1;
            if (rho_profile_) r.rho_profile_Hm1 = profile_distance(shifted_rho_[k], *rho_profile_);
        }
        balance_ = balance_residuals(rows_);
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            rows_[k].energy_residual = balance_.energy[k];
            rows_[k].modulated_residual = balance_.modulated[k];
        }
    }

    const ScalarField& nf_profile() const { return nf_profile_; }
    const std::optional<ScalarField>& rho_profile() const { return rho_profile_; }
    const BalanceReport& balance() const { return balance_; }
    double lip_t_start() const { return lip_started_ ? lip_t_start_ : NAN; }
    double t_truncation() const { return nf_acc_.t_truncation; }

    std::vector<std::pair<std::string, ScalarField>> snapshot_fields() const {
        std::vector<std::pair<std::string, ScalarField>> f = {
            {"ux", u_.x}, {"uy", u_.y}, {"nf", moments_.n}, {"jfx", moments_.j.x}, {"jfy", moments_.j.y},
            {"ef", moments_.e}};
        if (rho_) f.emplace_back("rho", *rho_);
        return f;
    }

private:
    SimConfig cfg_;
    TorusGrid G_;
    VectorField u_;
    std::optional<ScalarField> rho_;
    ParticleEnsemble ens_;
    MomentFields moments_;
    InitialDistribution f0_;
    Vec2 uinf_{0.0, 0.0};
    double mean_rho0_ = 1.0;
    double t_ = 0.0;
    long long step_ = 0;
    ParticleProfile nf_acc_;
    std::optional<ProfileAccumulator> rho_acc_;
    std::vector<Spectrum> shifted_nf_, shifted_rho_;
    ScalarField nf_profile_;
    std::optional<ScalarField> rho_profile_;
    std::vector<DiagnosticsRow> rows_;
    BalanceReport balance_;
    VelocityHistory history_;
    double f0_log_norm_ = 0.0, lambda0_ = 1.0, M0_ = 0.0;
    bool lip_started_ = false;
    double lip_t_start_ = 0.0, lip_budget_ = 0.0;
    std::array<double, 2> rho_bounds0_{0.0, 0.0};
};

// ---------------------------------------------------------------- run

struct RunResult {
    int exit_code = 0;
    std::string error;
    json summary;
};

namespace detail {

inline json fit_json(const std::vector<DiagnosticsRow>& rows, double DiagnosticsRow::*col, DecayModel m, Vec2 w) {
    std::vector<double> t, v;
    for (const auto& r : rows) {
        t.push_back(r.t);
        v.push_back(r.*col);
    }
    try {
        const auto f = fit_decay(t, v, m, w[0], w[1]);
        return {{"model", m == DecayModel::exponential ? "exponential" : "algebraic"},
                {"window", {w[0], w[1]}},
                {"slope", f.slope},
                {"rate", f.rate},
                {"intercept", f.intercept},
                {"r2", f.r2},
                {"points", f.points},
                {"floored", f.floored}};
    } catch (const std::exception& e) {
        return {{"error", e.what()}};
    }
}

}  // namespace detail

inline json build_summary(const Simulation& sim) {
    const auto& c = sim.config();
    const auto& rows = sim.rows();
    const auto& b = sim.balance();
    json s;
    s["preset"] = c.preset.empty() ? "custom" : c.preset;
    s["mode"] = sim.inhomogeneous() ? "inhomogeneous" : "homogeneous";
    s["u_inf"] = {sim.u_inf()[0], sim.u_inf()[1]};
    s["t_truncation"] = sim.t_truncation();
    s["t_end"] = sim.time();
    s["steps"] = sim.steps();
    s["particles"] = sim.particles().size();
    s["tolerances"] = {{"poisson_tol", c.poisson_tol},
                       {"poisson_max_iters", c.poisson_max_iters},
                       {"oracle_leak_tol", c.oracle_leak_tol},
                       {"h_monotone_slack", "dt_rec * |D_k+1 - D_k| + 1e-13 * H0"},
                       {"time_quadrature", "trapezoid with endpoint correction at the recording cadence"},
                       {"record_every", c.record_every},
                       {"eta", c.eta}};
    if (c.length != 1.0)
        s["note"] = "bulk coefficients in the modulated energy and the u_inf relation use mean values; "
                    "they coincide with total masses only on the unit torus";
    s["balance"] = {{"max_energy_residual", b.max_energy},
                    {"max_modulated_residual", b.max_modulated},
                    {"mass_drift", b.mass_drift},
                    {"momentum_drift", b.momentum_drift},
                    {"max_uinf_identity", b.max_identity},
                    {"h_monotone", b.h_monotone},
                    {"worst_h_increase", b.worst_h_increase}};
    if (!rows.empty()) {
        s["E0"] = rows.front().E;
        s["H0"] = rows.front().H;
        s["H_final"] = rows.back().H;
    }
    using R = DiagnosticsRow;
    const auto E = DecayModel::exponential, A = DecayModel::algebraic;
    s["fits"] = {{"H_exponential", detail::fit_json(rows, &R::H, E, c.fit_window)},
                 {"H_algebraic", detail::fit_json(rows, &R::H, A, c.algebraic_window)},
                 {"u_minus_uinf_L2", detail::fit_json(rows, &R::u_dev_L2, E, c.fit_window)},
                 {"udot_L2", detail::fit_json(rows, &R::udot_L2, E, c.fit_window)},
                 {"w1_bound", detail::fit_json(rows, &R::w1_bound, E, c.fit_window)},
                 {"flux_L2", detail::fit_json(rows, &R::flux_L2, E, c.fit_window)}};
    s["lambda0_scale"] = sim.lambda0();
    // Tail of int_t^inf ||j - n u_inf||_L2 beyond the truncation time: sup ||j~|| e^{-lam T} / lam
    // with lam the fitted flux decay rate.
    const auto& ff = s["fits"]["flux_L2"];
    if (ff.contains("rate") && ff["rate"].get<double>() > 0.0) {
        const double lam = ff["rate"], T = sim.t_truncation();
        double sup = 0.0;
        for (const auto& r : rows) sup = std::max(sup, r.flux_L2);
        s["truncation_estimate"] = sup * std::exp(-lam * T) / lam;
    } else {
        s["truncation_estimate"] = nullptr;
    }
    s["lip_t_start"] = std::isnan(sim.lip_t_start()) ? json(nullptr) : json(sim.lip_t_start());
    s["lip_budget_final"] = rows.empty() ? 0.0 : rows.back().lip_budget;
    bool ent_ok = true;
    for (const auto& r : rows) ent_ok = ent_ok && r.entropy <= r.entropy_bound;
    s["entropy_within_bound"] = ent_ok;
    if (!rows.empty()) s["nf_profile_Hm1_final"] = rows.back().nf_profile_Hm1;
    return s;
}

/// Runs a configuration to completion, writing the time series, snapshots and
/// summary under cfg.out_dir when file output is enabled. Returns the process
/// exit status (0 ok, 3 numerical failure, 4 I/O failure).
inline RunResult run(const SimConfig& cfg, Simulation** keep = nullptr) {
    RunResult res;
    std::unique_ptr<Simulation> owned;
    namespace fs = std::filesystem;
    try {
        if (cfg.write_files) {
            std::error_code ec;
            fs::create_directories(fs::path(cfg.out_dir) / "fields", ec);
            if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
        }
        owned = std::make_unique<Simulation>(cfg);
    } catch (const IoError& e) {
        res.exit_code = 4;
        res.error = e.what();
        return res;
    } catch (const NumericalError& e) {
        res.exit_code = 3;
        res.error = e.what();
        return res;
    }
    auto& sim = *owned;
    auto snapshot = [&] {
        if (!cfg.write_files || cfg.fields_every <= 0) return;
        char name[64];
        std::snprintf(name, sizeof name, "snap_%08lld", sim.steps());
        write_field_snapshot((fs::path(cfg.out_dir) / "fields" / name).string(), sim.snapshot_fields(), sim.time());
    };
    auto flush = [&] {
        sim.finalize();
        res.summary = build_summary(sim);
        if (!res.error.empty()) res.summary["error"] = res.error;
        res.summary["exit_code"] = res.exit_code;
        if (cfg.write_files) {
            write_timeseries((fs::path(cfg.out_dir) / "timeseries.csv").string(), sim.rows());
            std::ofstream out(fs::path(cfg.out_dir) / "summary.json");
            if (!out) throw IoError("cannot write summary.json");
            out << res.summary.dump(2) << "\n";
        }
    };
    try {
        sim.record();
        snapshot();
        const double eps = 1e-9 * std::max(cfg.dt, 1e-12);
        while (sim.time() < cfg.t_end - eps) {
            sim.step(sim.next_dt());
            const bool last = sim.time() >= cfg.t_end - eps;
            if (sim.steps() % cfg.record_every == 0 || last) sim.record();
            if (cfg.fields_every > 0 && (sim.steps() % cfg.fields_every == 0 || last)) snapshot();
        }
        flush();
    } catch (const NumericalError& e) {
        res.exit_code = 3;
        res.error = e.what();
        try {
            flush();
        } catch (const std::exception&) {
        }
    } catch (const IoError& e) {
        res.exit_code = 4;
        res.error = e.what();
    }
    if (keep) *keep = owned.release();
    return res;
}

// ---------------------------------------------------------------- particle vs phase-space grid

struct OracleComparison {
    MomentComparison errors;
    double oracle_mass0 = 0, oracle_mass1 = 0;
    double boundary_mass_max = 0;  ///< largest mass in the outer velocity ring over the run
    double v_max = 0;
    json report;
};

/// Evolves the same initial data with the particle method and with the
/// phase-space grid (on the fluid grid, cfg.oracle_nv^2 velocity nodes) to
/// cfg.t_end and compares the moments, taking the grid solver as reference.
inline OracleComparison compare_with_oracle(const SimConfig& cfg_in) {
    SimConfig cfg = cfg_in;
    cfg.write_files = false;
    cfg.history_window = {-1, -1};
    const TorusGrid G(cfg.n, cfg.length);
    const auto f0 = cfg.initial_distribution();
    const auto u0 = initial_velocity(cfg, G);
    const double vmax = cfg.oracle_v_max > 0 ? cfg.oracle_v_max : default_v_max(f0, sup_norm(u0));

    // phase-space grid with its own fluid, driven by the grid moments
    auto f = init_phase_space(f0, G, cfg.oracle_nv, vmax);
    OracleComparison out;
    out.v_max = vmax;
    out.oracle_mass0 = phase_space_mass(f);
    out.boundary_mass_max = phase_space_boundary_mass(f);
    VectorField u = u0;
    const int sub = cfg.oracle_substeps;
    const double dt = cfg.dt, dT = dt * sub;
    double t = 0.0;
    while (t < cfg.t_end - 1e-9 * dT) {
        const double step = std::min(dT, cfg.t_end - t);
        const int k = std::max(1, int(std::lround(step / dt)));
        const double h = step / k;
        const auto m = grid_moments(f, u);
        VectorField avg(G);
        for (int s = 0; s < k; ++s) {
            VectorField B(G);
            for (std::size_t i = 0; i < G.size(); ++i) {
                B.x.v[i] = m.n.v[i] * u.x.v[i] - m.j.x.v[i];
                B.y.v[i] = m.n.v[i] * u.y.v[i] - m.j.y.v[i];
            }
            const auto un = step_homogeneous({u, t}, B, h).u;
            for (std::size_t i = 0; i < G.size(); ++i) {
                avg.x.v[i] += 0.5 * (u.x.v[i] + un.x.v[i]) / k;
                avg.y.v[i] += 0.5 * (u.y.v[i] + un.y.v[i]) / k;
            }
            u = un;
        }
        f = sl_vlasov_step(f, avg, step, cfg.oracle_leak_tol);
        out.boundary_mass_max = std::max(out.boundary_mass_max, phase_space_boundary_mass(f));
        t += step;
    }
    out.oracle_mass1 = phase_space_mass(f);
    const auto grid_m = grid_moments(f, u);

    Simulation sim(cfg);
    while (sim.time() < cfg.t_end - 1e-9 * dt) sim.step(sim.next_dt());
    const auto part_m = deposit_moments(sim.particles(), G, sim.velocity());
    out.errors = compare_moments(grid_m, part_m);
    auto tri = [](const NormTriple& n) { return json{{"l1", n.l1}, {"l2", n.l2}, {"linf", n.linf}}; };
    out.report = {{"t", cfg.t_end},
                  {"grid", {{"nx", G.n}, {"nv", cfg.oracle_nv}, {"v_max", vmax}}},
                  {"particles", sim.particles().size()},
                  {"oracle_mass", {{"initial", out.oracle_mass0}, {"final", out.oracle_mass1}}},
                  {"boundary_mass_max", out.boundary_mass_max},
                  {"relative_error", {{"n_f", tri(out.errors.n)}, {"j_f", tri(out.errors.j)}, {"e_f", tri(out.errors.e)}}}};
    return out;
}

}  // namespace vns
