#pragma once

/// Phase-space grid solver for the kinetic equation f_t + v.grad_x f + div_v((u - v) f) = 0,
/// advanced with the exact characteristics of a frozen drag velocity.
/// Low order and slow; used as an independent cross-check of the particle method.

#include <vns/particles.hpp>

namespace vns {

struct PhaseSpaceGrid {
    TorusGrid xgrid;
    int nv = 16;
    double v_max = 1.0;
    std::vector<double> f;  ///< index ((iy * nx + ix) * nv + jy) * nv + jx

    PhaseSpaceGrid() = default;
    PhaseSpaceGrid(const TorusGrid& g, int nv_, double v_max_)
        : xgrid(g), nv(nv_), v_max(v_max_), f(g.size() * std::size_t(nv_) * nv_, 0.0) {
        if (nv < 2) throw std::invalid_argument("phase-space grid needs at least two velocity nodes");
        if (!(v_max > 0.0)) throw std::invalid_argument("velocity box half-width must be positive");
    }
    double hv() const { return 2.0 * v_max / nv; }
    double vnode(int j) const { return -v_max + (j + 0.5) * hv(); }
    std::size_t index(int ix, int iy, int jx, int jy) const {
        return ((std::size_t(iy) * xgrid.n + ix) * nv + jy) * nv + jx;
    }
};

/// Samples f0 = M n0(x) G_theta(v - vbar) at the nodes.
inline PhaseSpaceGrid init_phase_space(const InitialDistribution& d, const TorusGrid& g, int nv, double v_max) {
    d.validate();
    if (!(d.temperature > 0.0)) throw std::invalid_argument("phase-space grid needs a positive temperature");
    PhaseSpaceGrid f(g, nv, v_max);
    const double th = d.temperature;
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
            const double n0 = d.spatial_density(ix * g.h());
            for (int jy = 0; jy < nv; ++jy)
                for (int jx = 0; jx < nv; ++jx) {
                    const double a = f.vnode(jx) - d.mean_velocity[0], b = f.vnode(jy) - d.mean_velocity[1];
                    f.f[f.index(ix, iy, jx, jy)] = n0 * std::exp(-(a * a + b * b) / (2 * th)) / (two_pi * th);
                }
        }
    return f;
}

/// Default box half-width 6 sqrt(theta) + |vbar| + sup|u0|.
inline double default_v_max(const InitialDistribution& d, double u_sup) {
    return 6.0 * std::sqrt(d.temperature) + std::hypot(d.mean_velocity[0], d.mean_velocity[1]) + u_sup;
}

namespace detail {

/// Multilinear interpolation: periodic in x, zero outside the node range in v.
inline double interp_phase(const PhaseSpaceGrid& f, double x, double y, double vx, double vy) {
    const auto s = cic(f.xgrid, wrap(x, f.xgrid.length), wrap(y, f.xgrid.length));
    const double hv = f.hv();
    const double px = (vx + f.v_max) / hv - 0.5, py = (vy + f.v_max) / hv - 0.5;
    const double bx = std::floor(px), by = std::floor(py);
    const int jx0 = int(bx), jy0 = int(by);
    const double ax = px - bx, ay = py - by;
    const int ix[2] = {s.i0, s.i1}, iy[2] = {s.j0, s.j1};
    const double wx[2] = {1 - s.fx, s.fx}, wy[2] = {1 - s.fy, s.fy};
    const double vwx[2] = {1 - ax, ax}, vwy[2] = {1 - ay, ay};
    double acc = 0.0;
    for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a) {
            const double wxy = wx[a] * wy[b];
            if (wxy == 0.0) continue;
            for (int d = 0; d < 2; ++d) {
                const int jy = jy0 + d;
                if (jy < 0 || jy >= f.nv) continue;
                for (int c = 0; c < 2; ++c) {
                    const int jx = jx0 + c;
                    if (jx < 0 || jx >= f.nv) continue;
                    acc += wxy * vwx[c] * vwy[d] * f.f[f.index(ix[a], iy[b], jx, jy)];
                }
            }
        }
    return acc;
}

}  // namespace detail

/// One step with u frozen: each node (x, v) is traced back along the exact
/// characteristic for constant u* = u(x - dt v / 2),
///   V = u* + e^{dt}(v - u*),  X = x - dt u* - (e^{dt} - 1)(v - u*),
/// and f_new = e^{2 dt} f(X, V). Throws when a foot leaves the velocity box at
/// a node whose current value exceeds leak_tol * max f.
inline PhaseSpaceGrid sl_vlasov_step(const PhaseSpaceGrid& f, const VectorField& u, double dt, double leak_tol = 1e-3) {
    if (!(dt > 0.0)) throw std::invalid_argument("sl_vlasov_step: dt must be positive");
    PhaseSpaceGrid out(f.xgrid, f.nv, f.v_max);
    const double fmax = *std::max_element(f.f.begin(), f.f.end());
    const double ed = std::exp(dt), em = std::expm1(dt), gain = std::exp(2 * dt);
    const auto& G = f.xgrid;
    for (int iy = 0; iy < G.n; ++iy)
        for (int ix = 0; ix < G.n; ++ix) {
            const double x = ix * G.h(), y = iy * G.h();
            for (int jy = 0; jy < f.nv; ++jy)
                for (int jx = 0; jx < f.nv; ++jx) {
                    const double vx = f.vnode(jx), vy = f.vnode(jy);
                    const auto us = gather(u, detail::wrap(x - 0.5 * dt * vx, G.length), detail::wrap(y - 0.5 * dt * vy, G.length));
                    const double Vx = us[0] + ed * (vx - us[0]), Vy = us[1] + ed * (vy - us[1]);
                    const double Xx = x - dt * us[0] - em * (vx - us[0]), Xy = y - dt * us[1] - em * (vy - us[1]);
                    const std::size_t k = f.index(ix, iy, jx, jy);
                    if (std::abs(Vx) > f.v_max || std::abs(Vy) > f.v_max) {
                        if (f.f[k] > leak_tol * fmax)
                            throw NumericalError("sl_vlasov_step: characteristic leaves the velocity box");
                        continue;
                    }
                    out.f[k] = gain * detail::interp_phase(f, Xx, Xy, Vx, Vy);
                }
        }
    return out;
}

/// Midpoint-rule velocity moments; brinkman uses the given u.
inline MomentFields grid_moments(const PhaseSpaceGrid& f, const VectorField& u) {
    const auto& G = f.xgrid;
    MomentFields m{ScalarField(G), VectorField(G), ScalarField(G), VectorField(G)};
    const double dv2 = f.hv() * f.hv();
    for (int iy = 0; iy < G.n; ++iy)
        for (int ix = 0; ix < G.n; ++ix) {
            double n = 0, jx = 0, jy = 0, e = 0;
            for (int b = 0; b < f.nv; ++b)
                for (int a = 0; a < f.nv; ++a) {
                    const double val = f.f[f.index(ix, iy, a, b)], vx = f.vnode(a), vy = f.vnode(b);
                    n += val;
                    jx += val * vx;
                    jy += val * vy;
                    e += 0.5 * val * (vx * vx + vy * vy);
                }
            const std::size_t k = std::size_t(iy) * G.n + ix;
            m.n.v[k] = n * dv2;
            m.j.x.v[k] = jx * dv2;
            m.j.y.v[k] = jy * dv2;
            m.e.v[k] = e * dv2;
        }
    for (std::size_t i = 0; i < G.size(); ++i) {
        m.brinkman.x.v[i] = m.n.v[i] * u.x.v[i] - m.j.x.v[i];
        m.brinkman.y.v[i] = m.n.v[i] * u.y.v[i] - m.j.y.v[i];
    }
    return m;
}

inline double phase_space_mass(const PhaseSpaceGrid& f) {
    double s = 0.0;
    for (double x : f.f) s += x;
    return s * f.hv() * f.hv() * f.xgrid.h() * f.xgrid.h();
}

/// Mass held in the outermost ring of velocity cells, a measure of leakage
/// through the edge of the velocity box.
inline double phase_space_boundary_mass(const PhaseSpaceGrid& f) {
    double s = 0.0;
    const int last = f.nv - 1;
    for (int iy = 0; iy < f.xgrid.n; ++iy)
        for (int ix = 0; ix < f.xgrid.n; ++ix)
            for (int jy = 0; jy < f.nv; ++jy)
                for (int jx = 0; jx < f.nv; ++jx)
                    if (jx == 0 || jy == 0 || jx == last || jy == last) s += f.f[f.index(ix, iy, jx, jy)];
    return s * f.hv() * f.hv() * f.xgrid.h() * f.xgrid.h();
}

struct NormTriple {
    double l1 = 0, l2 = 0, linf = 0;  ///< relative to the reference field
};

struct MomentComparison {
    NormTriple n, j, e;
};

namespace detail {

inline NormTriple relative_errors(const std::vector<double>& da, const std::vector<double>& ref) {
    double s1 = 0, s2 = 0, si = 0, r1 = 0, r2 = 0, ri = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        s1 += std::abs(da[i]);
        s2 += da[i] * da[i];
        si = std::max(si, std::abs(da[i]));
        r1 += std::abs(ref[i]);
        r2 += ref[i] * ref[i];
        ri = std::max(ri, std::abs(ref[i]));
    }
    auto div = [](double a, double b) { return b > 0.0 ? a / b : a; };
    return {div(s1, r1), div(std::sqrt(s2), std::sqrt(r2)), div(si, ri)};
}

}  // namespace detail

/// Relative L1 / L2 / Linf differences of b against the reference a (vector
/// moments compared through the pointwise Euclidean magnitude).
inline MomentComparison compare_moments(const MomentFields& a, const MomentFields& b) {
    if (!(a.n.grid == b.n.grid)) throw std::invalid_argument("compare_moments: grids differ");
    const std::size_t N = a.n.v.size();
    std::vector<double> dn(N), de(N), dj(N), jr(N);
    for (std::size_t i = 0; i < N; ++i) {
        dn[i] = a.n.v[i] - b.n.v[i];
        de[i] = a.e.v[i] - b.e.v[i];
        dj[i] = std::hypot(a.j.x.v[i] - b.j.x.v[i], a.j.y.v[i] - b.j.y.v[i]);
        jr[i] = std::hypot(a.j.x.v[i], a.j.y.v[i]);
    }
    return {detail::relative_errors(dn, a.n.v), detail::relative_errors(dj, jr), detail::relative_errors(de, a.e.v)};
}

}  // namespace vns
