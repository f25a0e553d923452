#pragma once

/// Variable-density incompressible flow: semi-Lagrangian density transport,
/// the div((1/rho) grad P) = r pressure solve and the semi-implicit momentum step.

#include <vns/fluid.hpp>
#include <vns/particles.hpp>

namespace vns {

namespace detail {

inline double interp(const ScalarField& f, double x, double y) {
    return gather(f, cic(f.grid, wrap(x, f.grid.length), wrap(y, f.grid.length)));
}

inline std::pair<double, double> minmax(const ScalarField& f) {
    const auto [a, b] = std::minmax_element(f.v.begin(), f.v.end());
    return {*a, *b};
}

}  // namespace detail

/// Semi-Lagrangian transport with RK2 departure points and bilinear
/// interpolation, followed by a bound-preserving correction that restores the
/// mean exactly: a deficit is filled in proportion to the room below max(rho),
/// an excess removed in proportion to the room above min(rho).
inline ScalarField advect_density(const ScalarField& rho, const VectorField& u, double dt) {
    const auto& G = rho.grid;
    const auto [lo, hi] = detail::minmax(rho);
    ScalarField out(G);
    const double h = G.h();
    for (int j = 0; j < G.n; ++j)
        for (int i = 0; i < G.n; ++i) {
            const double x = i * h, y = j * h;
            const std::size_t k = std::size_t(j) * G.n + i;
            const double xm = x - 0.5 * dt * u.x.v[k], ym = y - 0.5 * dt * u.y.v[k];
            const double umx = detail::interp(u.x, xm, ym), umy = detail::interp(u.y, xm, ym);
            out(i, j) = detail::interp(rho, x - dt * umx, y - dt * umy);
        }
    const double target = mean(rho), now = mean(out);
    double room = 0.0;
    if (now < target) {
        for (double r : out.v) room += hi - r;
        if (room > 0.0) {
            const double a = (target - now) * double(out.v.size()) / room;
            for (auto& r : out.v) r += a * (hi - r);
        }
    } else if (now > target) {
        for (double r : out.v) room += r - lo;
        if (room > 0.0) {
            const double a = (now - target) * double(out.v.size()) / room;
            for (auto& r : out.v) r -= a * (r - lo);
        }
    }
    return out;
}

struct PoissonResult {
    ScalarField p;
    int iterations = 0;
    double residual = 0.0;  ///< relative L2 residual
};

namespace detail {

/// Inverse of div(grad) with the same Nyquist-zeroed derivative symbols as
/// gradient/divergence; modes where that symbol vanishes are set to zero.
inline ScalarField inverse_discrete_laplacian(const ScalarField& r) {
    const auto& G = r.grid;
    auto s = forward(r);
    for_each_mode(G, [&](int row, int c, std::size_t i) {
        const double kx = G.kx(c), ky = G.ky(row), kk = kx * kx + ky * ky;
        s.c[i] = kk > 0.0 ? -s.c[i] / kk : cplx(0.0);
    });
    return inverse(s);
}

}  // namespace detail

/// Solves div((1/rho) grad P) = rhs (rhs mean-free) by preconditioned
/// Richardson iteration P += L^{-1}(rhs - div(beta grad P)) / beta_mid,
/// with L = div grad, beta = 1/rho and beta_mid the midrange of beta.
inline PoissonResult varcoef_poisson_solve(const ScalarField& rho, const ScalarField& rhs, double tol = 1e-8,
                                           int max_iters = 200, const ScalarField* guess = nullptr) {
    const auto& G = rho.grid;
    const auto [lo, hi] = detail::minmax(rho);
    if (!(lo > 0.0)) throw NumericalError("varcoef_poisson_solve: density must stay positive");
    ScalarField beta(G);
    for (std::size_t i = 0; i < G.size(); ++i) beta.v[i] = 1.0 / rho.v[i];
    const double bmid = 0.5 * (1.0 / lo + 1.0 / hi);

    ScalarField r = rhs;
    const double m = mean(r);
    for (auto& x : r.v) x -= m;
    const double rnorm = std::max(l2_norm(r), 1e-300);

    PoissonResult out{guess ? *guess : ScalarField(G), 0, 0.0};
    auto apply = [&](const ScalarField& p) {
        auto g = gradient(p);
        for (std::size_t i = 0; i < G.size(); ++i) {
            g.x.v[i] *= beta.v[i];
            g.y.v[i] *= beta.v[i];
        }
        return divergence(g);
    };
    for (int it = 0; it <= max_iters; ++it) {
        auto res = apply(out.p);
        for (std::size_t i = 0; i < G.size(); ++i) res.v[i] = r.v[i] - res.v[i];
        out.residual = l2_norm(res) / rnorm;
        out.iterations = it;
        if (out.residual <= tol || l2_norm(res) < 1e-14) return out;
        axpy(out.p, 1.0 / bmid, detail::inverse_discrete_laplacian(res));
    }
    throw NumericalError("varcoef_poisson_solve: no convergence");
}

struct InhomogeneousState {
    ScalarField rho;
    VectorField u;
    double t = 0.0;
};

/// Largest dt for which the explicit part of the split viscous term is stable.
inline double inhomogeneous_dt_cap(const ScalarField& rho) {
    const auto [lo, hi] = detail::minmax(rho);
    const double h = rho.grid.h();
    return h * h * lo / (8.0 * (1.0 - lo / hi) + 1e-300);
}

struct InhomogeneousOptions {
    double poisson_tol = 1e-8;
    int poisson_max_iters = 200;
    /// Net momentum sink over the step (integral of the forcing times dt is
    /// subtracted from integral rho u); used to keep total momentum exact.
    bool momentum_correction = true;
};

namespace detail {

/// u_t - (1/rho_max) Delta u for the variable-density momentum equation, dealiased.
inline std::array<Spectrum, 2> inhomogeneous_remainder(const ScalarField& rho, double rho_hi, const VectorField& u,
                                                      const VectorField& B, const InhomogeneousOptions& o) {
    const auto& G = rho.grid;
    const auto A = physical(advection_spectra(u));
    const auto lap = laplacian(u);
    VectorField q(G);  // -A + beta (lap - B)
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double b = 1.0 / rho.v[i];
        q.x.v[i] = -A.x.v[i] + b * (lap.x.v[i] - B.x.v[i]);
        q.y.v[i] = -A.y.v[i] + b * (lap.y.v[i] - B.y.v[i]);
    }
    const auto P = varcoef_poisson_solve(rho, divergence(q), o.poisson_tol, o.poisson_max_iters).p;
    const auto gp = gradient(P);
    VectorField N(G);
    const double bstar = 1.0 / rho_hi;
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double b = 1.0 / rho.v[i];
        N.x.v[i] = (b - bstar) * lap.x.v[i] - A.x.v[i] - b * (gp.x.v[i] + B.x.v[i]);
        N.y.v[i] = (b - bstar) * lap.y.v[i] - A.y.v[i] - b * (gp.y.v[i] + B.y.v[i]);
    }
    return masked_spectra(N);
}

inline Vec2 mass_weighted_sum(const ScalarField& rho, const VectorField& u) {
    Vec2 s{0.0, 0.0};
    for (std::size_t i = 0; i < rho.v.size(); ++i) {
        s[0] += rho.v[i] * u.x.v[i];
        s[1] += rho.v[i] * u.y.v[i];
    }
    return s;
}

}  // namespace detail

struct VariableDensityPressure {
    ScalarField p;
    VectorField udot;  ///< (Delta u - grad P - B) / rho
};

/// Pressure and material derivative for rho (u_t + u.grad u) = Delta u - grad P - B.
inline VariableDensityPressure recover_pressure_inhomogeneous(const ScalarField& rho, const VectorField& u,
                                                              const VectorField& B, double tol = 1e-8) {
    const auto& G = rho.grid;
    const auto A = detail::physical(detail::advection_spectra(u));
    const auto lap = laplacian(u);
    VectorField q(G);
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double b = 1.0 / rho.v[i];
        q.x.v[i] = -A.x.v[i] + b * (lap.x.v[i] - B.x.v[i]);
        q.y.v[i] = -A.y.v[i] + b * (lap.y.v[i] - B.y.v[i]);
    }
    VariableDensityPressure out{varcoef_poisson_solve(rho, divergence(q), tol).p, VectorField(G)};
    const auto gp = gradient(out.p);
    for (std::size_t i = 0; i < G.size(); ++i) {
        const double b = 1.0 / rho.v[i];
        out.udot.x.v[i] = b * (lap.x.v[i] - gp.x.v[i] - B.x.v[i]);
        out.udot.y.v[i] = b * (lap.y.v[i] - gp.y.v[i] - B.y.v[i]);
    }
    return out;
}

/// One step of rho (u_t + u.grad u) = Delta u - grad P - B, div u = 0, rho_t + u.grad rho = 0.
/// The stiff part (1/rho_max) Delta u is integrated exactly in Fourier space;
/// the remainder is explicit Heun with the pressure from the variable-coefficient
/// solve at each stage. Reduces to step_homogeneous for rho = 1.
inline InhomogeneousState step_inhomogeneous(const InhomogeneousState& s, const VectorField& B, double dt,
                                             const InhomogeneousOptions& o = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_inhomogeneous: dt must be positive");
    const auto& G = s.rho.grid;
    const auto [lo, hi] = detail::minmax(s.rho);
    if (!(lo > 0.0)) throw NumericalError("step_inhomogeneous: density must stay positive");
    const double cap = inhomogeneous_dt_cap(s.rho);
    if (dt > cap) throw std::invalid_argument("step_inhomogeneous: dt exceeds the stability cap " + std::to_string(cap));

    InhomogeneousState out;
    out.rho = advect_density(s.rho, s.u, dt);
    out.t = s.t + dt;

    std::vector<double> E(G.spec_size());
    for_each_mode(G, [&](int r, int c, std::size_t i) { E[i] = std::exp(-G.k2(r, c) * dt / hi); });
    auto u0 = detail::spectra(s.u);
    for (auto& c : u0) dealias(c);

    const auto N0 = detail::inhomogeneous_remainder(s.rho, hi, s.u, B, o);
    std::array<Spectrum, 2> u1{Spectrum(G), Spectrum(G)};
    for (int d = 0; d < 2; ++d)
        for (std::size_t i = 0; i < E.size(); ++i) u1[d].c[i] = E[i] * (u0[d].c[i] + dt * N0[d].c[i]);
    leray_project(u1[0], u1[1]);
    const auto N1 = detail::inhomogeneous_remainder(out.rho, hi, detail::physical(u1), B, o);
    for (int d = 0; d < 2; ++d)
        for (std::size_t i = 0; i < E.size(); ++i)
            u1[d].c[i] = E[i] * (u0[d].c[i] + 0.5 * dt * N0[d].c[i]) + 0.5 * dt * N1[d].c[i];
    leray_project(u1[0], u1[1]);
    out.u = detail::physical(u1);

    if (o.momentum_correction) {
        const auto m0 = detail::mass_weighted_sum(s.rho, s.u);
        const auto m1 = detail::mass_weighted_sum(out.rho, out.u);
        const Vec2 fb = {mean(B.x) * double(G.size()), mean(B.y) * double(G.size())};
        double rsum = 0.0;
        for (double r : out.rho.v) rsum += r;
        const double cx = (m0[0] - dt * fb[0] - m1[0]) / rsum, cy = (m0[1] - dt * fb[1] - m1[1]) / rsum;
        for (std::size_t i = 0; i < G.size(); ++i) {
            out.u.x.v[i] += cx;
            out.u.y.v[i] += cy;
        }
    }
    for (double x : out.u.x.v)
        if (!std::isfinite(x)) throw NumericalError("step_inhomogeneous: non-finite velocity");
    return out;
}

}  // namespace vns
