#pragma once

/// Weighted particle ensemble for the kinetic phase: sampling, cloud-in-cell
/// gather/scatter, the exponential drag pusher and the characteristic-flow probe.

#include <cstdint>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include <vns/spectral.hpp>

namespace vns {

namespace detail {

/// Neumaier compensated summation.
struct CompensatedSum {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

}  // namespace detail

struct ParticleEnsemble {
    std::vector<double> x, y, vx, vy, w;
    double length = 1.0;

    std::size_t size() const { return x.size(); }
    void resize(std::size_t n) {
        x.resize(n);
        y.resize(n);
        vx.resize(n);
        vy.resize(n);
        w.resize(n);
    }
    double total_weight() const {
        detail::CompensatedSum s;
        for (double a : w) s.add(a);
        return s.value();
    }
    Vec2 momentum() const {
        detail::CompensatedSum a, b;
        for (std::size_t i = 0; i < size(); ++i) {
            a.add(w[i] * vx[i]);
            b.add(w[i] * vy[i]);
        }
        return {a.value(), b.value()};
    }
    double kinetic_energy() const {
        detail::CompensatedSum e;
        for (std::size_t i = 0; i < size(); ++i) e.add(0.5 * w[i] * (vx[i] * vx[i] + vy[i] * vy[i]));
        return e.value();
    }
};

enum class SpatialProfile { uniform, cosine };
enum class Sampling { stratified, lattice };

/// f0(x,v) = M n0(x) G_theta(v - vbar), n0 = (1 + eps cos(2 pi x1 / L)) / L^2.
struct InitialDistribution {
    SpatialProfile spatial = SpatialProfile::uniform;
    double epsilon = 0.0;
    Vec2 mean_velocity{0.0, 0.0};
    double temperature = 0.0;
    double mass = 1.0;
    double length = 1.0;

    double spatial_density(double x1) const {
        const double shape = spatial == SpatialProfile::cosine ? 1.0 + epsilon * std::cos(two_pi * x1 / length) : 1.0;
        return mass * shape / (length * length);
    }
    /// Peak value of f0 in phase space (infinite for a cold beam).
    double f0_sup() const {
        const double nmax = mass * (1.0 + (spatial == SpatialProfile::cosine ? std::abs(epsilon) : 0.0)) / (length * length);
        return temperature > 0.0 ? nmax / (two_pi * temperature) : INFINITY;
    }
    void validate() const {
        if (spatial == SpatialProfile::cosine && !(std::abs(epsilon) < 1.0))
            throw std::invalid_argument("cosine profile needs |epsilon| < 1");
        if (temperature < 0.0) throw std::invalid_argument("temperature must be nonnegative");
        if (!(mass >= 0.0)) throw std::invalid_argument("particle mass must be nonnegative");
    }
};

namespace detail {

inline double uniform01(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

inline std::array<double, 2> box_muller(std::mt19937_64& g) {
    double a = uniform01(g);
    while (a <= 0.0) a = uniform01(g);
    const double b = uniform01(g), r = std::sqrt(-2.0 * std::log(a));
    return {r * std::cos(two_pi * b), r * std::sin(two_pi * b)};
}

/// Inverse CDF of the x1-marginal of n0 (Newton on a monotone function).
inline double inverse_profile(const InitialDistribution& f, double q) {
    const double L = f.length;
    if (f.spatial == SpatialProfile::uniform || f.epsilon == 0.0) return q * L;
    const double e = f.epsilon, k = two_pi / L;
    double x = q * L;
    for (int it = 0; it < 60; ++it) {
        const double F = (x + e * std::sin(k * x) / k) / L - q;
        const double dF = (1.0 + e * std::cos(k * x)) / L;
        const double step = F / dF;
        x -= step;
        if (std::abs(step) < 1e-15 * L) break;
    }
    return x;
}

inline double wrap(double x, double L) {
    double r = std::fmod(x, L);
    if (r < 0.0) r += L;
    if (r >= L) r -= L;
    return r;
}

struct CicStencil {
    int i0, i1, j0, j1;
    double fx, fy;
};

inline CicStencil cic(const TorusGrid& G, double x, double y) {
    const double sx = x / G.h(), sy = y / G.h();
    const double bx = std::floor(sx), by = std::floor(sy);
    CicStencil s;
    s.fx = sx - bx;
    s.fy = sy - by;
    s.i0 = int(bx) % G.n;
    if (s.i0 < 0) s.i0 += G.n;
    s.j0 = int(by) % G.n;
    if (s.j0 < 0) s.j0 += G.n;
    s.i1 = s.i0 + 1 == G.n ? 0 : s.i0 + 1;
    s.j1 = s.j0 + 1 == G.n ? 0 : s.j0 + 1;
    return s;
}

inline double gather(const ScalarField& f, const CicStencil& s) {
    const int n = f.grid.n;
    const auto& v = f.v;
    return (1 - s.fy) * ((1 - s.fx) * v[s.j0 * n + s.i0] + s.fx * v[s.j0 * n + s.i1]) +
           s.fy * ((1 - s.fx) * v[s.j1 * n + s.i0] + s.fx * v[s.j1 * n + s.i1]);
}

inline void scatter(ScalarField& f, const CicStencil& s, double q) {
    const int n = f.grid.n;
    auto& v = f.v;
    v[s.j0 * n + s.i0] += q * (1 - s.fx) * (1 - s.fy);
    v[s.j0 * n + s.i1] += q * s.fx * (1 - s.fy);
    v[s.j1 * n + s.i0] += q * (1 - s.fx) * s.fy;
    v[s.j1 * n + s.i1] += q * s.fx * s.fy;
}

}  // namespace detail

/// Equal-weight sample of f0. "stratified" jitters one particle per cell of an
/// m x m partition of the unit square of quantiles (remainder drawn at random)
/// and draws Gaussian velocities; "lattice" is a quiet start: a P x P lattice
/// of quantile sites, each carrying all c x c velocity classes built from
/// symmetric normal quantile nodes rescaled to the exact variance.
inline ParticleEnsemble sample_initial(const InitialDistribution& f, std::size_t count, std::uint64_t seed,
                                       Sampling mode = Sampling::stratified, int velocity_classes = 4) {
    f.validate();
    if (count == 0) throw std::invalid_argument("particle count must be positive");
    ParticleEnsemble e;
    e.length = f.length;
    e.resize(count);
    const double w = f.mass / double(count), sd = std::sqrt(f.temperature);
    std::fill(e.w.begin(), e.w.end(), w);

    if (mode == Sampling::stratified) {
        std::mt19937_64 rng(seed);
        const std::size_t m = std::size_t(std::floor(std::sqrt(double(count))));
        for (std::size_t p = 0; p < count; ++p) {
            double q1, q2;
            if (p < m * m) {
                q1 = (double(p % m) + detail::uniform01(rng)) / double(m);
                q2 = (double(p / m) + detail::uniform01(rng)) / double(m);
            } else {
                q1 = detail::uniform01(rng);
                q2 = detail::uniform01(rng);
            }
            e.x[p] = detail::wrap(detail::inverse_profile(f, q1), f.length);
            e.y[p] = detail::wrap(q2 * f.length, f.length);
            const auto z = detail::box_muller(rng);
            e.vx[p] = f.mean_velocity[0] + sd * z[0];
            e.vy[p] = f.mean_velocity[1] + sd * z[1];
        }
        return e;
    }

    const int c = std::max(1, velocity_classes);
    const std::size_t per_site = std::size_t(c) * c;
    const std::size_t sites = count / per_site;
    const std::size_t P = std::size_t(std::llround(std::sqrt(double(sites))));
    if (sites * per_site != count || P * P != sites)
        throw std::invalid_argument("lattice sampling needs count = P^2 * classes^2");
    std::vector<double> z(c, 0.0);
    if (c > 1) {
        boost::math::normal_distribution<double> nd;
        double var = 0.0;
        for (int a = 0; a < c; ++a) {
            z[a] = boost::math::quantile(nd, (a + 0.5) / c);
            var += z[a] * z[a];
        }
        const double s = 1.0 / std::sqrt(var / c);
        for (auto& a : z) a *= s;
    }
    std::size_t p = 0;
    for (std::size_t j = 0; j < P; ++j)
        for (std::size_t i = 0; i < P; ++i) {
            const double x = detail::wrap(detail::inverse_profile(f, (i + 0.5) / double(P)), f.length);
            const double y = (j + 0.5) / double(P) * f.length;
            for (int b = 0; b < c; ++b)
                for (int a = 0; a < c; ++a, ++p) {
                    e.x[p] = x;
                    e.y[p] = y;
                    e.vx[p] = f.mean_velocity[0] + sd * z[a];
                    e.vy[p] = f.mean_velocity[1] + sd * z[b];
                }
        }
    return e;
}

/// Bilinear (cloud-in-cell) interpolation of u at a point.
inline Vec2 gather(const VectorField& u, double x, double y) {
    const auto s = detail::cic(u.grid(), x, y);
    return {detail::gather(u.x, s), detail::gather(u.y, s)};
}

inline std::vector<Vec2> gather_velocity(const VectorField& u, const ParticleEnsemble& e) {
    std::vector<Vec2> out(e.size());
    for (std::size_t p = 0; p < e.size(); ++p) out[p] = gather(u, e.x[p], e.y[p]);
    return out;
}

/// Exponential-midpoint drag push: u* is u gathered at X + dt V / 2, then
/// V <- u* + e^{-dt}(V - u*), X <- X + dt u* + (1 - e^{-dt})(V_old - u*).
/// Exact when u is constant. If `impulse` is given, w (V_new - V_old) / (h^2 dt)
/// is scattered at the midpoint, i.e. the drag force the fluid feels.
inline void push_in_place(ParticleEnsemble& e, const VectorField& u, double dt, VectorField* impulse = nullptr) {
    if (!(dt > 0.0)) throw std::invalid_argument("push: dt must be positive");
    const auto& G = u.grid();
    const double L = e.length, ed = std::exp(-dt), om = -std::expm1(-dt);
    const double scale = 1.0 / (G.h() * G.h() * dt);
    for (std::size_t p = 0; p < e.size(); ++p) {
        const double xm = detail::wrap(e.x[p] + 0.5 * dt * e.vx[p], L);
        const double ym = detail::wrap(e.y[p] + 0.5 * dt * e.vy[p], L);
        const auto s = detail::cic(G, xm, ym);
        const double ux = detail::gather(u.x, s), uy = detail::gather(u.y, s);
        const double dvx = e.vx[p] - ux, dvy = e.vy[p] - uy;
        const double nvx = ux + ed * dvx, nvy = uy + ed * dvy;
        e.x[p] = detail::wrap(e.x[p] + dt * ux + om * dvx, L);
        e.y[p] = detail::wrap(e.y[p] + dt * uy + om * dvy, L);
        if (impulse) {
            detail::scatter(impulse->x, s, e.w[p] * (nvx - e.vx[p]) * scale);
            detail::scatter(impulse->y, s, e.w[p] * (nvy - e.vy[p]) * scale);
        }
        e.vx[p] = nvx;
        e.vy[p] = nvy;
    }
}

inline ParticleEnsemble push(ParticleEnsemble e, const VectorField& u, double dt) {
    push_in_place(e, u, dt);
    return e;
}

struct MomentFields {
    ScalarField n;
    VectorField j;
    ScalarField e;
    VectorField brinkman;  ///< n u - j
};

/// CIC deposit of n, j, e (per unit area) and the Brinkman term n u - j.
inline MomentFields deposit_moments(const ParticleEnsemble& ens, const TorusGrid& G, const VectorField& u) {
    MomentFields m{ScalarField(G), VectorField(G), ScalarField(G), VectorField(G)};
    const double inv_area = 1.0 / (G.h() * G.h());
    for (std::size_t p = 0; p < ens.size(); ++p) {
        const auto s = detail::cic(G, ens.x[p], ens.y[p]);
        const double q = ens.w[p] * inv_area;
        detail::scatter(m.n, s, q);
        detail::scatter(m.j.x, s, q * ens.vx[p]);
        detail::scatter(m.j.y, s, q * ens.vy[p]);
        detail::scatter(m.e, s, 0.5 * q * (ens.vx[p] * ens.vx[p] + ens.vy[p] * ens.vy[p]));
    }
    for (std::size_t i = 0; i < G.size(); ++i) {
        m.brinkman.x.v[i] = m.n.v[i] * u.x.v[i] - m.j.x.v[i];
        m.brinkman.y.v[i] = m.n.v[i] * u.y.v[i] - m.j.y.v[i];
    }
    return m;
}

/// Density deposited at the translated positions X_p - offset, i.e. n(x + offset).
inline ScalarField deposit_density_shifted(const ParticleEnsemble& ens, const TorusGrid& G, const Vec2& offset) {
    ScalarField n(G);
    const double inv_area = 1.0 / (G.h() * G.h());
    for (std::size_t p = 0; p < ens.size(); ++p)
        detail::scatter(n, detail::cic(G, detail::wrap(ens.x[p] - offset[0], G.length),
                                       detail::wrap(ens.y[p] - offset[1], G.length)),
                        ens.w[p] * inv_area);
    return n;
}

/// sum_p w_p grad_X W(x - X_p + offset) . (V_p - c): minus the divergence of
/// the flux (j - n c)(x + offset), with the divergence taken on the CIC kernel
/// before sampling. It is the exact time derivative of deposit_density_shifted
/// for particles moving at V_p while offset moves at c, and has zero mean.
inline ScalarField deposit_transport_rate(const ParticleEnsemble& ens, const TorusGrid& G, const Vec2& offset,
                                          const Vec2& c) {
    ScalarField r(G);
    const int n = G.n;
    const double q0 = 1.0 / (G.h() * G.h() * G.h());
    auto& v = r.v;
    for (std::size_t p = 0; p < ens.size(); ++p) {
        const auto s = detail::cic(G, detail::wrap(ens.x[p] - offset[0], G.length),
                                   detail::wrap(ens.y[p] - offset[1], G.length));
        const double ax = ens.w[p] * q0 * (ens.vx[p] - c[0]), ay = ens.w[p] * q0 * (ens.vy[p] - c[1]);
        v[s.j0 * n + s.i0] += -ax * (1 - s.fy) - ay * (1 - s.fx);
        v[s.j0 * n + s.i1] += ax * (1 - s.fy) - ay * s.fx;
        v[s.j1 * n + s.i0] += -ax * s.fy + ay * (1 - s.fx);
        v[s.j1 * n + s.i1] += ax * s.fy + ay * s.fx;
    }
    return r;
}

/// Drag dissipation sum_p w |u(X_p) - V_p|^2 with u gathered at the particles.
inline double drag_dissipation(const ParticleEnsemble& e, const VectorField& u) {
    double d = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) {
        const auto a = gather(u, e.x[p], e.y[p]);
        const double bx = a[0] - e.vx[p], by = a[1] - e.vy[p];
        d += e.w[p] * (bx * bx + by * by);
    }
    return d;
}

/// Velocity fields stored at increasing times, linearly interpolated in time.
struct VelocityHistory {
    std::vector<double> times;
    std::vector<VectorField> u;

    void append(double t, VectorField f) {
        if (!times.empty() && !(t > times.back())) throw std::invalid_argument("history times must increase");
        times.push_back(t);
        u.push_back(std::move(f));
    }
    bool covers(double a, double b) const {
        const double tol = 1e-12 * std::max(1.0, std::abs(b));
        return !times.empty() && times.front() <= a + tol && times.back() >= b - tol;
    }
    Vec2 at(double t, double x, double y) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t k = it == times.begin() ? 0 : std::size_t(it - times.begin()) - 1;
        if (k + 1 >= times.size()) k = times.size() >= 2 ? times.size() - 2 : 0;
        if (times.size() == 1) return gather(u[0], x, y);
        const double a = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
        const auto p = gather(u[k], x, y), q = gather(u[k + 1], x, y);
        return {(1 - a) * p[0] + a * q[0], (1 - a) * p[1] + a * q[1]};
    }
};

/// Follows the characteristic through (t, x, v) back to t_star (RK4) and returns V(t_star).
inline Vec2 trace_back(const Vec2& x, const Vec2& v, double t_star, double t, const VelocityHistory& hist, int steps) {
    std::array<double, 4> s{x[0], x[1], v[0], v[1]};
    const double h = (t_star - t) / steps;
    auto rhs = [&](double tau, const std::array<double, 4>& z) {
        const auto u = hist.at(tau, z[0], z[1]);
        return std::array<double, 4>{z[2], z[3], u[0] - z[2], u[1] - z[3]};
    };
    double tau = t;
    for (int k = 0; k < steps; ++k) {
        auto add = [&](const std::array<double, 4>& a, const std::array<double, 4>& b, double c) {
            std::array<double, 4> r;
            for (int i = 0; i < 4; ++i) r[i] = a[i] + c * b[i];
            return r;
        };
        const auto k1 = rhs(tau, s);
        const auto k2 = rhs(tau + 0.5 * h, add(s, k1, 0.5 * h));
        const auto k3 = rhs(tau + 0.5 * h, add(s, k2, 0.5 * h));
        const auto k4 = rhs(tau + h, add(s, k3, h));
        for (int i = 0; i < 4; ++i) s[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        tau += h;
    }
    return {s[2], s[3]};
}

/// det D_v V(t_star; t, x, v) by central differences of step delta.
inline double flow_jacobian_probe(const Vec2& x, const Vec2& v, double t_star, double t, const VelocityHistory& hist,
                                  double delta = 1e-4) {
    if (t < t_star) throw std::invalid_argument("flow_jacobian_probe: t must not precede t_star");
    if (t == t_star) return 1.0;
    if (!hist.covers(t_star, t)) throw std::invalid_argument("flow_jacobian_probe: velocity history gap");
    double spacing = t - t_star;
    for (std::size_t k = 1; k < hist.times.size(); ++k) spacing = std::min(spacing, hist.times[k] - hist.times[k - 1]);
    const int steps = std::max(64, int(std::ceil(4.0 * (t - t_star) / spacing)));
    std::array<Vec2, 2> col;
    for (int b = 0; b < 2; ++b) {
        Vec2 vp = v, vm = v;
        vp[b] += delta;
        vm[b] -= delta;
        const auto P = trace_back(x, vp, t_star, t, hist, steps), M = trace_back(x, vm, t_star, t, hist, steps);
        col[b] = {(P[0] - M[0]) / (2 * delta), (P[1] - M[1]) / (2 * delta)};
    }
    return col[0][0] * col[1][1] - col[1][0] * col[0][1];
}

}  // namespace vns
