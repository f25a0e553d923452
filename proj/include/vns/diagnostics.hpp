#pragma once

/// Energy, dissipation, modulated energy, limit velocity, profile accumulation,
/// Lyapunov functionals, entropy and decay fits.

#include <optional>

#include <vns/density.hpp>

namespace vns {

// ---------------------------------------------------------------- energies

/// 1/2 int rho |u|^2 + 1/2 sum w |V|^2 (rho = 1 if absent).
inline double kinetic_energy(const VectorField& u, const ParticleEnsemble& e, const ScalarField* rho = nullptr) {
    const auto& G = u.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double r = rho ? rho->v[i] : 1.0;
        s += r * (u.x.v[i] * u.x.v[i] + u.y.v[i] * u.y.v[i]);
    }
    return 0.5 * s * G.area() / double(G.size()) + e.kinetic_energy();
}

inline double grad_sq(const VectorField& u) {
    const auto a = forward(u.x), b = forward(u.y);
    const auto& G = a.grid;
    double s = 0.0;
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        s += G.multiplicity(c) * G.k2(r, c) * (std::norm(a.c[i]) + std::norm(b.c[i]));
    });
    return s * G.area();
}

/// ||grad u||^2 + sum w |u(X) - V|^2.
inline double dissipation(const VectorField& u, const ParticleEnsemble& e) {
    return grad_sq(u) + drag_dissipation(e, u);
}

struct BulkTotals {
    double mass = 0.0;        ///< ||n_f||_L1 = sum w
    double mean_n = 0.0;      ///< <n_f>
    Vec2 mean_j{0.0, 0.0};    ///< <j_f>
    double fluid_mass = 0.0;  ///< ||rho||_L1 (area when homogeneous)
    Vec2 mean_u{0.0, 0.0};    ///< <rho u> / <rho>
};

inline BulkTotals bulk_totals(const VectorField& u, const ParticleEnsemble& e, const ScalarField* rho = nullptr) {
    const auto& G = u.grid();
    BulkTotals b;
    b.mass = e.total_weight();
    b.mean_n = b.mass / G.area();
    const auto p = e.momentum();
    b.mean_j = {p[0] / G.area(), p[1] / G.area()};
    if (rho) {
        const auto m = detail::mass_weighted_sum(*rho, u);
        double rs = 0.0;
        for (double r : rho->v) rs += r;
        b.fluid_mass = rs * G.area() / double(G.size());
        b.mean_u = {m[0] / rs, m[1] / rs};
    } else {
        b.fluid_mass = G.area();
        b.mean_u = mean(u);
    }
    return b;
}

/// Modulated energy: fluctuations of u about its (mass-weighted) mean, of V
/// about the particle mean velocity, and the relative bulk motion term.
inline double modulated_energy(const VectorField& u, const ParticleEnsemble& e, const ScalarField* rho = nullptr) {
    const auto& G = u.grid();
    const auto b = bulk_totals(u, e, rho);
    double fl = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double r = rho ? rho->v[i] : 1.0;
        const double dx = u.x.v[i] - b.mean_u[0], dy = u.y.v[i] - b.mean_u[1];
        fl += r * (dx * dx + dy * dy);
    }
    fl *= 0.5 * G.area() / double(G.size());
    if (b.mass <= 0.0) return fl;
    const Vec2 vb{b.mean_j[0] / b.mean_n, b.mean_j[1] / b.mean_n};
    double kin = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) {
        const double dx = e.vx[p] - vb[0], dy = e.vy[p] - vb[1];
        kin += e.w[p] * (dx * dx + dy * dy);
    }
    const double rel = std::pow(b.mean_u[0] - vb[0], 2) + std::pow(b.mean_u[1] - vb[1], 2);
    const double coef = rho ? b.mass * b.fluid_mass / (b.mass + b.fluid_mass) : b.mass / (b.mean_n + 1.0);
    return fl + 0.5 * kin + 0.5 * coef * rel;
}

/// Asymptotic common velocity from the initial bulk quantities.
inline Vec2 u_infinity(const Vec2& mean_u0, const Vec2& mean_j0, double mean_n0) {
    const double d = 1.0 + mean_n0;
    if (!(d > 0.0)) throw std::invalid_argument("u_infinity: zero denominator");
    return {(mean_u0[0] + mean_j0[0]) / d, (mean_u0[1] + mean_j0[1]) / d};
}

/// Variable-density version: (<rho u> + <j>) / (<n> + <rho>).
inline Vec2 u_infinity_inhomogeneous(const Vec2& mean_rho_u0, double mean_rho0, const Vec2& mean_j0, double mean_n0) {
    const double d = mean_rho0 + mean_n0;
    if (!(d > 0.0)) throw std::invalid_argument("u_infinity: zero denominator");
    return {(mean_rho_u0[0] + mean_j0[0]) / d, (mean_rho_u0[1] + mean_j0[1]) / d};
}

/// |ubar - u_inf - <n>/(<n> + <rho>) (ubar - <j>/<n>)|, the exact relation
/// between the current bulk velocity and the conserved limit.
inline double uinf_identity_residual(const BulkTotals& b, double mean_rho, const Vec2& uinf) {
    Vec2 r{b.mean_u[0] - uinf[0], b.mean_u[1] - uinf[1]};
    if (b.mean_n > 0.0) {
        const double c = b.mean_n / (b.mean_n + mean_rho);
        for (int d = 0; d < 2; ++d) r[d] -= c * (b.mean_u[d] - b.mean_j[d] / b.mean_n);
    }
    return std::hypot(r[0], r[1]);
}

// ---------------------------------------------------------------- rows and residuals

struct DiagnosticsRow {
    double t = 0, E = 0, D = 0, H = 0, mass = 0, px = 0, py = 0, mean_ux = 0, mean_uy = 0, uinf_x = 0, uinf_y = 0;
    double energy_residual = 0, modulated_residual = 0;
    double grad_u_L2 = 0, grad2_u_L2 = 0, grad_P_L2 = 0, udot_L2 = 0;
    double nf_Linf = 0, jf_Linf = 0, ef_Linf = 0, grad_u_Linf = 0, lip_budget = 0, entropy = 0;
    double w1_bound = 0, nf_profile_Hm1 = 0, pressure_cross_term = 0;
    bool has_rho = false;
    double rho_min = 0, rho_max = 0, rho_mean = 0, rho_profile_Hm1 = 0;

    // Auxiliary quantities used by fits and checks; not part of the CSV.
    double identity_residual = 0;  ///< u_infinity relation residual
    double u_dev_L2 = 0;           ///< ||u - u_inf||_L2
    double sqrt_n_udot_L2 = 0;     ///< ||sqrt(n_f) udot||_L2
    double drag = 0;               ///< sum w |u(X) - V|^2
    double flux_L2 = 0;            ///< ||j_f - n_f u_inf||_L2
    double particle_w1 = 0;        ///< sum w |V - u_inf|
    double entropy_bound = 0;
    double pressure_trace_cubic = 0;
};

inline const std::vector<std::string>& csv_columns(bool with_rho) {
    static const std::vector<std::string> base = {
        "t", "E", "D", "H", "mass", "px", "py", "mean_ux", "mean_uy", "uinf_x", "uinf_y", "energy_residual",
        "modulated_residual", "grad_u_L2", "grad2_u_L2", "grad_P_L2", "udot_L2", "nf_Linf", "jf_Linf", "ef_Linf",
        "grad_u_Linf", "lip_budget", "entropy", "w1_bound", "nf_profile_Hm1", "pressure_cross_term"};
    static const std::vector<std::string> full = [] {
        auto v = base;
        for (auto s : {"rho_min", "rho_max", "rho_mean", "rho_profile_Hm1"}) v.push_back(s);
        return v;
    }();
    return with_rho ? full : base;
}

inline std::vector<double> csv_values(const DiagnosticsRow& r) {
    std::vector<double> v = {r.t, r.E, r.D, r.H, r.mass, r.px, r.py, r.mean_ux, r.mean_uy, r.uinf_x, r.uinf_y,
                             r.energy_residual, r.modulated_residual, r.grad_u_L2, r.grad2_u_L2, r.grad_P_L2,
                             r.udot_L2, r.nf_Linf, r.jf_Linf, r.ef_Linf, r.grad_u_Linf, r.lip_budget, r.entropy,
                             r.w1_bound, r.nf_profile_Hm1, r.pressure_cross_term};
    if (r.has_rho)
        for (double x : {r.rho_min, r.rho_max, r.rho_mean, r.rho_profile_Hm1}) v.push_back(x);
    return v;
}

namespace detail {

/// dy/dt at every sample of a uniformly spaced series: five-point stencils
/// (centred where possible, shifted near the ends), three-point when fewer
/// than five samples exist.
inline std::vector<double> sample_derivatives(const std::vector<double>& y, double h) {
    static const double w5[5][5] = {{-25, 48, -36, 16, -3}, {-3, -10, 18, -6, 1}, {1, -8, 0, 8, -1},
                                    {-1, 6, -18, 10, 3},     {3, -16, 36, -48, 25}};
    static const double w3[3][3] = {{-3, 4, -1}, {-1, 0, 1}, {1, -4, 3}};
    const std::size_t N = y.size();
    std::vector<double> d(N, 0.0);
    const std::size_t m = N >= 5 ? 5 : 3;
    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t s = std::min(k >= m / 2 ? k - m / 2 : 0, N - m);
        double acc = 0.0;
        for (std::size_t q = 0; q < m; ++q) acc += (m == 5 ? w5[k - s][q] : w3[k - s][q]) * y[s + q];
        d[k] = acc / ((m == 5 ? 12.0 : 2.0) * h);
    }
    return d;
}

}  // namespace detail

/// Cumulative trapezoid integral of y(t), with the Euler-Maclaurin endpoint
/// correction -h^2/12 (y'(t_k) - y'(t_0)) on uniform spacing, the derivatives
/// taken from finite-difference stencils over the whole series (omitted with
/// fewer than three samples or non-uniform spacing).
inline std::vector<double> cumulative_integral(const std::vector<double>& t, const std::vector<double>& y,
                                               bool endpoint_correction = true) {
    std::vector<double> out(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) out[k] = out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
    if (!endpoint_correction || t.size() < 3) return out;
    const double h = t[1] - t[0];
    for (std::size_t k = 2; k < t.size(); ++k)
        if (std::abs((t[k] - t[k - 1]) - h) > 1e-9 * std::abs(h)) return out;
    const auto d = detail::sample_derivatives(y, h);
    for (std::size_t k = 1; k < t.size(); ++k) out[k] -= h * h / 12.0 * (d[k] - d[0]);
    return out;
}

struct BalanceReport {
    std::vector<double> energy;     ///< |E(t) + int D - E0|
    std::vector<double> modulated;  ///< |H(t) + int D - H0|
    double max_energy = 0, max_modulated = 0;
    double mass_drift = 0;          ///< max relative change of the particle mass
    double momentum_drift = 0;      ///< max |p(t) - p(0)| / (|p(0)| + 1)
    double max_identity = 0;        ///< max u_infinity relation residual
    bool h_monotone = true;         ///< H non-increasing within quadrature tolerance
    double worst_h_increase = 0;    ///< max of H_{k+1} - H_k - tolerance_k
};

/// Balance residuals from recorded rows (times need not be uniform).
inline BalanceReport balance_residuals(const std::vector<DiagnosticsRow>& rows) {
    BalanceReport r;
    if (rows.empty()) return r;
    std::vector<double> t, D;
    for (const auto& row : rows) {
        t.push_back(row.t);
        D.push_back(row.D);
    }
    const auto I = cumulative_integral(t, D);
    const auto& a = rows.front();
    const double p0 = std::hypot(a.px, a.py);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& row = rows[k];
        r.energy.push_back(std::abs(row.E + I[k] - a.E));
        r.modulated.push_back(std::abs(row.H + I[k] - a.H));
        r.max_energy = std::max(r.max_energy, r.energy.back());
        r.max_modulated = std::max(r.max_modulated, r.modulated.back());
        if (a.mass > 0.0) r.mass_drift = std::max(r.mass_drift, std::abs(row.mass - a.mass) / a.mass);
        r.momentum_drift = std::max(r.momentum_drift, std::hypot(row.px - a.px, row.py - a.py) / (p0 + 1.0));
        r.max_identity = std::max(r.max_identity, row.identity_residual);
        if (k > 0) {
            const auto& b = rows[k - 1];
            const double tol = 2.0 * 0.5 * (row.t - b.t) * std::abs(row.D - b.D) + 1e-13 * std::abs(a.H);
            const double excess = (row.H - b.H) - tol;
            r.worst_h_increase = std::max(r.worst_h_increase, excess);
            if (excess > 0.0) r.h_monotone = false;
        }
    }
    return r;
}

// ---------------------------------------------------------------- limit profiles

/// Accumulates int_0^t (j - n u_inf)(tau, x + tau u_inf) dtau in spectral form
/// by the trapezoid rule over successive calls, so that finalize returns
/// base - div(flux), the translated limit profile.
struct ProfileAccumulator {
    TorusGrid grid;
    Vec2 u_inf{0.0, 0.0};
    ScalarField base;
    std::array<Spectrum, 2> flux;
    std::array<Spectrum, 2> last;
    double t_last = 0.0;
    bool started = false;
    double t_truncation = 0.0;

    ProfileAccumulator() = default;
    ProfileAccumulator(ScalarField base_, const Vec2& uinf)
        : grid(base_.grid), u_inf(uinf), base(std::move(base_)), flux{Spectrum(grid), Spectrum(grid)},
          last{Spectrum(grid), Spectrum(grid)} {}
};

namespace detail {

/// Multiplies a spectrum by the phase of a shift by `offset` (g -> g(. + offset)).
inline void shift_spectrum(Spectrum& s, const Vec2& offset) {
    const auto& G = s.grid;
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        const double th = two_pi * (c * offset[0] + G.row_k(r) * offset[1]) / G.length;
        if (c == G.n / 2 || r == G.n / 2)
            s.c[i] *= std::cos(th);
        else
            s.c[i] *= cplx(std::cos(th), std::sin(th));
    });
}

}  // namespace detail

/// Adds the flux (density `n`, momentum `j`) at time t to the accumulator.
inline void profile_accumulate(ProfileAccumulator& acc, const ScalarField& n, const VectorField& j, double t) {
    const auto& G = acc.grid;
    VectorField q(G);
    for (std::size_t i = 0; i < G.size(); ++i) {
        q.x.v[i] = j.x.v[i] - n.v[i] * acc.u_inf[0];
        q.y.v[i] = j.y.v[i] - n.v[i] * acc.u_inf[1];
    }
    std::array<Spectrum, 2> s{forward(q.x), forward(q.y)};
    const Vec2 off{t * acc.u_inf[0], t * acc.u_inf[1]};
    for (auto& c : s) detail::shift_spectrum(c, off);
    if (acc.started) {
        const double h = 0.5 * (t - acc.t_last);
        for (int d = 0; d < 2; ++d)
            for (std::size_t i = 0; i < s[d].c.size(); ++i) acc.flux[d].c[i] += h * (acc.last[d].c[i] + s[d].c[i]);
    }
    acc.last = std::move(s);
    acc.t_last = t;
    acc.t_truncation = t;
    acc.started = true;
}

/// Homogeneous case: the flux is j_f - n_f u_inf.
inline void profile_accumulate(ProfileAccumulator& acc, const MomentFields& m, double t) {
    profile_accumulate(acc, m.n, m.j, t);
}

/// Variable-density case: the flux is rho (u - u_inf).
inline void profile_accumulate_density(ProfileAccumulator& acc, const ScalarField& rho, const VectorField& u, double t) {
    VectorField ru(rho.grid);
    for (std::size_t i = 0; i < rho.v.size(); ++i) {
        ru.x.v[i] = rho.v[i] * u.x.v[i];
        ru.y.v[i] = rho.v[i] * u.y.v[i];
    }
    profile_accumulate(acc, rho, ru, t);
}

inline ScalarField profile_finalize(const ProfileAccumulator& acc) {
    if (!acc.started) throw std::logic_error("profile_finalize: nothing accumulated");
    const auto& G = acc.grid;
    auto s = forward(acc.base);
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        s.c[i] -= cplx(0.0, G.kx(c)) * acc.flux[0].c[i] + cplx(0.0, G.ky(r)) * acc.flux[1].c[i];
    });
    return inverse(s);
}

/// Particle version of the limit profile: accumulates int_0^t of the kernel
/// transport rate (minus the divergence of the translated momentum deficit,
/// see deposit_transport_rate) by the trapezoid rule, so that the profile and
/// the translated deposit share one discretization of the continuity equation.
struct ParticleProfile {
    TorusGrid grid;
    Vec2 u_inf{0.0, 0.0};
    ScalarField base;
    ScalarField integral;
    ScalarField last;
    double t_last = 0.0;
    bool started = false;
    double t_truncation = 0.0;

    ParticleProfile() = default;
    ParticleProfile(const ParticleEnsemble& e, const TorusGrid& g, const Vec2& uinf)
        : grid(g), u_inf(uinf), base(deposit_density_shifted(e, g, {0.0, 0.0})), integral(g), last(g) {}
};

inline void profile_accumulate(ParticleProfile& acc, const ParticleEnsemble& e, double t) {
    auto r = deposit_transport_rate(e, acc.grid, {t * acc.u_inf[0], t * acc.u_inf[1]}, acc.u_inf);
    if (acc.started) {
        const double h = 0.5 * (t - acc.t_last);
        axpy(acc.integral, h, acc.last);
        axpy(acc.integral, h, r);
    }
    acc.last = std::move(r);
    acc.t_last = t;
    acc.t_truncation = t;
    acc.started = true;
}

inline ScalarField profile_finalize(const ParticleProfile& acc) {
    if (!acc.started) throw std::logic_error("profile_finalize: nothing accumulated");
    auto out = acc.base;
    axpy(out, 1.0, acc.integral);
    return out;
}

/// g(. + t u_inf) as a spectrum; the form in which profile distances are taken.
inline Spectrum shifted_spectrum(const ScalarField& g, double t, const Vec2& u_inf) {
    auto s = forward(g);
    detail::shift_spectrum(s, {t * u_inf[0], t * u_inf[1]});
    return s;
}

inline double profile_distance(const Spectrum& shifted, const ScalarField& profile) {
    auto s = shifted;
    const auto p = forward(profile);
    for (std::size_t i = 0; i < s.c.size(); ++i) s.c[i] -= p.c[i];
    return sobolev_norm(s, -1.0);
}

inline double particle_w1(const ParticleEnsemble& e, const Vec2& u_inf) {
    double s = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) s += e.w[p] * std::hypot(e.vx[p] - u_inf[0], e.vy[p] - u_inf[1]);
    return s;
}

/// Surrogate upper bound for W1(f(t), n_inf(. - u_inf t) (x) delta_{u_inf}).
inline double w1_upper_bound(const ParticleEnsemble& e, const Vec2& u_inf, const Spectrum& shifted_nf,
                             const ScalarField& profile) {
    return particle_w1(e, u_inf) + profile_distance(shifted_nf, profile);
}

// ---------------------------------------------------------------- Lyapunov functionals

struct VelocityGradient {
    ScalarField a11, a12, a21, a22;  ///< a_ij = d_j u_i
};

inline VelocityGradient velocity_gradient(const VectorField& u) {
    const auto gx = gradient(u.x), gy = gradient(u.y);
    return {gx.x, gx.y, gy.x, gy.y};
}

/// int (P - <P>) grad u : (grad u)^T.
inline double pressure_cross_term(const VelocityGradient& A, const ScalarField& P) {
    const double pm = mean(P);
    double s = 0.0;
    for (std::size_t i = 0; i < P.v.size(); ++i) {
        const double c = A.a11.v[i] * A.a11.v[i] + 2.0 * A.a12.v[i] * A.a21.v[i] + A.a22.v[i] * A.a22.v[i];
        s += (P.v[i] - pm) * c;
    }
    return s * P.grid.area() / double(P.v.size());
}

/// int (P - <P>) Tr((grad u)^3); for a 2x2 matrix Tr(A^3) = (a+d)(a^2 - ad + d^2 + 3bc),
/// so it vanishes for divergence-free u.
inline double pressure_trace_cubic(const VelocityGradient& A, const ScalarField& P) {
    const double pm = mean(P);
    double s = 0.0;
    for (std::size_t i = 0; i < P.v.size(); ++i) {
        const double a = A.a11.v[i], b = A.a12.v[i], c = A.a21.v[i], d = A.a22.v[i];
        // Tr(M^3) for M = [[a,b],[c,d]]
        const double tr3 = a * a * a + d * d * d + 3.0 * b * c * (a + d);
        s += (P.v[i] - pm) * tr3;
    }
    return s * P.grid.area() / double(P.v.size());
}

inline double grad_sup(const VelocityGradient& A) {
    // Frobenius magnitude at each node
    double m = 0.0;
    for (std::size_t i = 0; i < A.a11.v.size(); ++i)
        m = std::max(m, std::sqrt(A.a11.v[i] * A.a11.v[i] + A.a12.v[i] * A.a12.v[i] + A.a21.v[i] * A.a21.v[i] +
                                  A.a22.v[i] * A.a22.v[i]));
    return m;
}

struct LyapunovSet {
    double grad_u_sq = 0, grad2_u_sq = 0, grad_P_sq = 0, udot_sq = 0, sqrt_n_udot_sq = 0, drag = 0;
    double cross_term = 0, trace_cubic = 0, grad_u_sup = 0;
    double nf_sup = 0, jf_sup = 0, ef_sup = 0;
};

/// Functionals of the higher-order energy estimates at one time.
/// `udot` is the material derivative u_t + u.grad u.
inline LyapunovSet lyapunov_record(const VectorField& u, const ScalarField& P, const VectorField& udot,
                                   const MomentFields& m, const ParticleEnsemble& e) {
    LyapunovSet s;
    s.grad_u_sq = grad_sq(u);
    s.grad2_u_sq = l2_norm_sq(laplacian(u));
    s.grad_P_sq = l2_norm_sq(gradient(P));
    s.udot_sq = l2_norm_sq(udot);
    double a = 0.0;
    for (std::size_t i = 0; i < P.v.size(); ++i)
        a += std::max(m.n.v[i], 0.0) * (udot.x.v[i] * udot.x.v[i] + udot.y.v[i] * udot.y.v[i]);
    s.sqrt_n_udot_sq = a * P.grid.area() / double(P.v.size());
    s.drag = drag_dissipation(e, u);
    const auto A = velocity_gradient(u);
    s.cross_term = pressure_cross_term(A, P);
    s.trace_cubic = pressure_trace_cubic(A, P);
    s.grad_u_sup = grad_sup(A);
    s.nf_sup = sup_norm(m.n);
    s.jf_sup = sup_norm(m.j);
    s.ef_sup = sup_norm(m.e);
    return s;
}

// ---------------------------------------------------------------- entropy

/// int n |log n| dx with 0 log 0 = 0.
inline double entropy(const ScalarField& n) {
    double s = 0.0;
    for (double x : n.v)
        if (x > 0.0) s += x * std::abs(std::log(x));
    return s * n.grid.area() / double(n.v.size());
}

/// || f0 log f0 ||_{L^1_{x,v}} for the product initial datum, by quadrature in
/// x1 and in the speed |v - vbar| (infinite for a cold beam).
inline double f0_log_f0_norm(const InitialDistribution& f) {
    if (f.mass <= 0.0) return 0.0;
    if (f.temperature <= 0.0) return INFINITY;
    const double th = f.temperature, L = f.length;
    const int nx = 512, nr = 4000;
    const double rmax = 14.0 * std::sqrt(th), dr = rmax / nr;
    double total = 0.0;
    for (int i = 0; i < nx; ++i) {
        const double n0 = f.spatial_density((i + 0.5) * L / nx);
        double row = 0.0;
        for (int k = 0; k < nr; ++k) {
            const double r = (k + 0.5) * dr;
            const double g = std::exp(-r * r / (2 * th)) / (two_pi * th);
            const double val = n0 * g;
            if (val > 0.0) row += std::abs(val * std::log(val)) * two_pi * r * dr;
        }
        total += row * (L / nx) * L;
    }
    return total;
}

/// Affine-in-time entropy bound ||f0 log f0|| + (t + log 2 pi) M0 + 2 |T^2| / e + 1/2 sum w |V - vbar|^2.
inline double entropy_bound(double f0_log_norm, double t, double M0, double area, const ParticleEnsemble& e) {
    const double W = e.total_weight();
    double spread = 0.0;
    if (W > 0.0) {
        const auto p = e.momentum();
        const Vec2 vb{p[0] / W, p[1] / W};
        for (std::size_t q = 0; q < e.size(); ++q)
            spread += e.w[q] * (std::pow(e.vx[q] - vb[0], 2) + std::pow(e.vy[q] - vb[1], 2));
    }
    return f0_log_norm + (t + std::log(two_pi)) * M0 + 2.0 * area / std::numbers::e + 0.5 * spread;
}

/// (1 + M0 log(1 + || |v - u_inf|^3 f0 ||_inf))^{-1}.
inline double lambda0_scale(const InitialDistribution& f, const Vec2& u_inf) {
    const double M0 = f.mass;
    double sup = 0.0;
    if (f.temperature > 0.0 && M0 > 0.0) {
        const double nmax = f.f0_sup() * two_pi * f.temperature;
        // The maximiser lies on the line through vbar and u_inf.
        const Vec2 d{f.mean_velocity[0] - u_inf[0], f.mean_velocity[1] - u_inf[1]};
        const double dn = std::hypot(d[0], d[1]);
        const double sd = std::sqrt(f.temperature), span = dn + 12.0 * sd;
        const int K = 40001;
        for (int k = 0; k < K; ++k) {
            const double s = -span + 2.0 * span * k / (K - 1);  // position along e relative to vbar
            const double g = std::exp(-s * s / (2 * f.temperature)) / (two_pi * f.temperature);
            sup = std::max(sup, std::pow(std::abs(dn + s), 3) * nmax * g);
        }
    }
    return 1.0 / (1.0 + M0 * std::log1p(sup));
}

// ---------------------------------------------------------------- fits

enum class DecayModel { exponential, algebraic };

struct DecayFit {
    double slope = 0.0;      ///< d log(value) / d t or / d log(1+t)
    double rate = 0.0;       ///< -slope
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
    bool floored = false;    ///< some values were <= 0 and clamped to 1e-300
};

/// Least-squares fit of log(value) against t (exponential) or log(1+t)
/// (algebraic) over samples with t in [t0, t1].
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& value, DecayModel model, double t0,
                          double t1) {
    DecayFit f;
    std::vector<double> X, Y;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < t0 || t[k] > t1) continue;
        double v = value[k];
        if (!(v > 0.0)) {
            v = 1e-300;
            f.floored = true;
        }
        X.push_back(model == DecayModel::exponential ? t[k] : std::log1p(t[k]));
        Y.push_back(std::log(v));
    }
    f.points = X.size();
    if (X.size() < 2) throw std::invalid_argument("fit_decay: fewer than two samples in the window");
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < X.size(); ++k) {
        mx += X[k];
        my += Y[k];
    }
    mx /= double(X.size());
    my /= double(X.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < X.size(); ++k) {
        sxx += (X[k] - mx) * (X[k] - mx);
        sxy += (X[k] - mx) * (Y[k] - my);
        syy += (Y[k] - my) * (Y[k] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_decay: degenerate window");
    f.slope = sxy / sxx;
    f.rate = -f.slope;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

}  // namespace vns
