#pragma once

/// Incompressible Navier-Stokes (unit viscosity) with a Brinkman forcing term,
/// pseudospectral in space, integrating-factor RK2 in time.

#include <vns/spectral.hpp>

namespace vns {

struct FluidState {
    VectorField u;
    double t = 0.0;
};

namespace detail {

/// Spectra of div(u (x) u), 2/3-dealiased. For divergence-free u this is u.grad u.
inline std::array<Spectrum, 2> advection_spectra(const VectorField& u) {
    const auto& G = u.grid();
    ScalarField uxx(G), uxy(G), uyy(G);
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double a = u.x.v[i], b = u.y.v[i];
        uxx.v[i] = a * a;
        uxy.v[i] = a * b;
        uyy.v[i] = b * b;
    }
    const auto sxx = forward(uxx), sxy = forward(uxy), syy = forward(uyy);
    std::array<Spectrum, 2> out{Spectrum(G), Spectrum(G)};
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        if (!G.kept(r, c)) return;
        const cplx ikx(0.0, G.kx(c)), iky(0.0, G.ky(r));
        out[0].c[i] = ikx * sxx.c[i] + iky * sxy.c[i];
        out[1].c[i] = ikx * sxy.c[i] + iky * syy.c[i];
    });
    return out;
}

inline std::array<Spectrum, 2> spectra(const VectorField& u) { return {forward(u.x), forward(u.y)}; }

inline VectorField physical(const std::array<Spectrum, 2>& s) { return {inverse(s[0]), inverse(s[1])}; }

/// P(-div(u (x) u) - B) in spectral form; B given as dealiased spectra.
inline std::array<Spectrum, 2> ns_rhs_spectra(const VectorField& u, const std::array<Spectrum, 2>& B) {
    auto a = advection_spectra(u);
    for (int d = 0; d < 2; ++d)
        for (std::size_t i = 0; i < a[d].c.size(); ++i) a[d].c[i] = -a[d].c[i] - B[d].c[i];
    leray_project(a[0], a[1]);
    return a;
}

inline std::array<Spectrum, 2> masked_spectra(const VectorField& f) {
    auto s = spectra(f);
    dealias(s[0]);
    dealias(s[1]);
    return s;
}

}  // namespace detail

/// Leray projection of (-u.grad u - brinkman), dealiased.
inline VectorField ns_rhs(const VectorField& u, const VectorField& brinkman) {
    return detail::physical(detail::ns_rhs_spectra(u, detail::masked_spectra(brinkman)));
}

/// One IF-RK2 (Heun) step of u_t + u.grad u + grad P = Delta u - brinkman,
/// with brinkman held fixed over the step.
inline FluidState step_homogeneous(const FluidState& s, const VectorField& brinkman, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_homogeneous: dt must be positive");
    const auto& G = s.u.grid();
    const auto B = detail::masked_spectra(brinkman);
    auto u0 = detail::spectra(s.u);
    for (auto& c : u0) dealias(c);

    std::vector<double> E(G.spec_size());
    for_each_mode(G, [&](int r, int c, std::size_t i) { E[i] = std::exp(-G.k2(r, c) * dt); });

    const auto N0 = detail::ns_rhs_spectra(s.u, B);
    std::array<Spectrum, 2> u1{Spectrum(G), Spectrum(G)};
    for (int d = 0; d < 2; ++d)
        for (std::size_t i = 0; i < E.size(); ++i) u1[d].c[i] = E[i] * (u0[d].c[i] + dt * N0[d].c[i]);
    const auto N1 = detail::ns_rhs_spectra(detail::physical(u1), B);
    for (int d = 0; d < 2; ++d)
        for (std::size_t i = 0; i < E.size(); ++i)
            u1[d].c[i] = E[i] * (u0[d].c[i] + 0.5 * dt * N0[d].c[i]) + 0.5 * dt * N1[d].c[i];

    FluidState out{detail::physical(u1), s.t + dt};
    for (double x : out.u.x.v)
        if (!std::isfinite(x)) throw NumericalError("step_homogeneous: non-finite velocity");
    return out;
}

/// Pressure from Delta P = div(-u.grad u - brinkman), zero mean.
inline ScalarField recover_pressure(const VectorField& u, const VectorField& brinkman) {
    const auto& G = u.grid();
    const auto a = detail::advection_spectra(u);
    const auto B = detail::masked_spectra(brinkman);
    Spectrum p(G);
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        const double kx = G.kx(c), ky = G.ky(r), kk = kx * kx + ky * ky;
        if (kk == 0.0) return;
        const cplx div = cplx(0.0, kx) * (-a[0].c[i] - B[0].c[i]) + cplx(0.0, ky) * (-a[1].c[i] - B[1].c[i]);
        p.c[i] = -div / kk;
    });
    return inverse(p);
}

/// u_t + u.grad u evaluated from the momentum equation: Delta u - grad P - brinkman.
inline VectorField material_derivative(const VectorField& u, const VectorField& brinkman) {
    const auto P = recover_pressure(u, brinkman);
    auto out = laplacian(u);
    const auto gp = gradient(P);
    axpy(out, -1.0, gp);
    axpy(out, -1.0, brinkman);
    return out;
}

/// Adaptive step: min(cfl h / max(|u|_inf, eps), 0.5 / max(n_f_max, 1), dt_max).
inline double cfl_dt(const VectorField& u, double nf_max, double cfl, double dt_max) {
    if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("cfl must lie in (0,1]");
    const double umax = std::max(sup_norm(u), 1e-12);
    return std::min({cfl * u.grid().h() / umax, 0.5 / std::max(nf_max, 1.0), dt_max});
}

/// Taylor-Green vortex u = A (sin 2pi x cos 2pi y, -cos 2pi x sin 2pi y) on a unit-period box.
inline VectorField taylor_green(const TorusGrid& G, double amp) {
    const double w = two_pi / G.length;
    return {sample(G, [&](double x, double y) { return amp * std::sin(w * x) * std::cos(w * y); }),
            sample(G, [&](double x, double y) { return -amp * std::cos(w * x) * std::sin(w * y); })};
}

}  // namespace vns
