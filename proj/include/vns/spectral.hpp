#pragma once

/// Periodic 2D grid fields and FFT-based operators on the torus [0,L)^2.
///
/// Fourier convention: g_hat(k) = mean(g * exp(-2 pi i k.x / L)), so the k = 0
/// coefficient is the mean. Spectra are stored in FFTW's r2c half layout:
/// n rows (k2) by n/2+1 columns (k1 >= 0).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace vns {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>;

constexpr double two_pi = 2.0 * std::numbers::pi;

/// Raised when a computation produced NaN, diverged, or failed to converge.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TorusGrid {
    int n = 0;
    double length = 1.0;

    TorusGrid() = default;
    TorusGrid(int n_, double length_) : n(n_), length(length_) {
        if (n < 4 || n % 2 != 0)
            throw std::invalid_argument("grid size must be even and >= 4");
        if (!(length > 0.0))
            throw std::invalid_argument("domain length must be positive");
    }

    double h() const { return length / n; }
    double area() const { return length * length; }
    std::size_t size() const { return std::size_t(n) * n; }
    int half() const { return n / 2 + 1; }
    std::size_t spec_size() const { return std::size_t(n) * half(); }

    /// Signed integer wavenumber of spectral row r.
    int row_k(int r) const { return r <= n / 2 ? r : r - n; }
    /// Angular wavenumbers for spectral entry (row r, column c); Nyquist zeroed.
    double kx(int c) const { return c == n / 2 ? 0.0 : two_pi * c / length; }
    double ky(int r) const { return r == n / 2 ? 0.0 : two_pi * row_k(r) / length; }
    /// |2 pi k / L|^2 including Nyquist components (used for Laplacian-type symbols).
    double k2(int r, int c) const {
        const double a = two_pi * c / length, b = two_pi * row_k(r) / length;
        return a * a + b * b;
    }
    /// 2/3-rule box mask: keep |k1|, |k2| < n/3.
    bool kept(int r, int c) const {
        const int k1 = c, k2a = std::abs(row_k(r));
        return 3 * k1 < n && 3 * k2a < n;
    }
    /// Number of times entry (r,c) appears in the full Hermitian spectrum.
    double multiplicity(int c) const { return (c == 0 || c == n / 2) ? 1.0 : 2.0; }

    bool operator==(const TorusGrid& o) const { return n == o.n && length == o.length; }
};

struct ScalarField {
    TorusGrid grid;
    std::vector<double> v;  ///< value at (i1 h, i2 h) stored at i2*n + i1

    ScalarField() = default;
    explicit ScalarField(const TorusGrid& g, double fill = 0.0) : grid(g), v(g.size(), fill) {}

    double& operator()(int i1, int i2) { return v[std::size_t(i2) * grid.n + i1]; }
    double operator()(int i1, int i2) const { return v[std::size_t(i2) * grid.n + i1]; }
};

struct VectorField {
    ScalarField x, y;

    VectorField() = default;
    explicit VectorField(const TorusGrid& g) : x(g), y(g) {}
    VectorField(ScalarField a, ScalarField b) : x(std::move(a)), y(std::move(b)) {}
    const TorusGrid& grid() const { return x.grid; }
};

struct Spectrum {
    TorusGrid grid;
    std::vector<cplx> c;  ///< row r (k2) * (n/2+1) + column (k1)

    Spectrum() = default;
    explicit Spectrum(const TorusGrid& g) : grid(g), c(g.spec_size(), cplx(0.0, 0.0)) {}
    cplx& at(int r, int col) { return c[std::size_t(r) * grid.half() + col]; }
    cplx at(int r, int col) const { return c[std::size_t(r) * grid.half() + col]; }
};

namespace detail {

// One r2c/c2r plan pair per grid size and thread. FFTW_ESTIMATE keeps the
// chosen algorithm (and hence the bits of every result) run-independent.
class FftPlan {
public:
    explicit FftPlan(int n) : n_(n) {
        real_ = fftw_alloc_real(std::size_t(n) * n);
        spec_ = fftw_alloc_complex(std::size_t(n) * (n / 2 + 1));
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
    }
    ~FftPlan() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    void forward(const double* in, cplx* out) {
        const std::size_t N = std::size_t(n_) * n_, M = std::size_t(n_) * (n_ / 2 + 1);
        std::copy(in, in + N, real_);
        fftw_execute(fwd_);
        const double s = 1.0 / double(N);
        for (std::size_t i = 0; i < M; ++i) out[i] = cplx(spec_[i][0] * s, spec_[i][1] * s);
    }
    void inverse(const cplx* in, double* out) {
        const std::size_t N = std::size_t(n_) * n_, M = std::size_t(n_) * (n_ / 2 + 1);
        for (std::size_t i = 0; i < M; ++i) {
            spec_[i][0] = in[i].real();
            spec_[i][1] = in[i].imag();
        }
        fftw_execute(inv_);
        std::copy(real_, real_ + N, out);
    }

    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

private:
    int n_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

inline FftPlan& plan_for(int n) {
    thread_local std::map<int, std::unique_ptr<FftPlan>> cache;
    auto& p = cache[n];
    if (!p) p = std::make_unique<FftPlan>(n);
    return *p;
}

}  // namespace detail

// ---------------------------------------------------------------- transforms

inline Spectrum forward(const ScalarField& g) {
    Spectrum s(g.grid);
    detail::plan_for(g.grid.n).forward(g.v.data(), s.c.data());
    return s;
}

inline ScalarField inverse(const Spectrum& s) {
    ScalarField g(s.grid);
    detail::plan_for(s.grid.n).inverse(s.c.data(), g.v.data());
    return g;
}

template <class Fn>
inline void for_each_mode(const TorusGrid& g, Fn&& fn) {
    const int H = g.half();
    for (int r = 0; r < g.n; ++r)
        for (int c = 0; c < H; ++c) fn(r, c, std::size_t(r) * H + c);
}

inline void dealias(Spectrum& s) {
    for_each_mode(s.grid, [&](int r, int c, std::size_t i) {
        if (!s.grid.kept(r, c)) s.c[i] = 0.0;
    });
}

inline void dealias(ScalarField& g) {
    auto s = forward(g);
    dealias(s);
    g = inverse(s);
}

inline void dealias(VectorField& u) {
    dealias(u.x);
    dealias(u.y);
}

// ---------------------------------------------------------------- pointwise helpers

inline double mean(const ScalarField& g) {
    double s = 0.0;
    for (double x : g.v) s += x;
    return s / double(g.v.size());
}

inline Vec2 mean(const VectorField& u) { return {mean(u.x), mean(u.y)}; }

inline double integral(const ScalarField& g) { return mean(g) * g.grid.area(); }

inline double sup_norm(const ScalarField& g) {
    double m = 0.0;
    for (double x : g.v) m = std::max(m, std::abs(x));
    return m;
}

/// max over nodes of the Euclidean magnitude.
inline double sup_norm(const VectorField& u) {
    double m = 0.0;
    for (std::size_t i = 0; i < u.x.v.size(); ++i) m = std::max(m, std::hypot(u.x.v[i], u.y.v[i]));
    return m;
}

inline double l2_norm_sq(const ScalarField& g) {
    double s = 0.0;
    for (double x : g.v) s += x * x;
    return s * g.grid.area() / double(g.v.size());
}
inline double l2_norm_sq(const VectorField& u) { return l2_norm_sq(u.x) + l2_norm_sq(u.y); }
inline double l2_norm(const ScalarField& g) { return std::sqrt(l2_norm_sq(g)); }
inline double l2_norm(const VectorField& u) { return std::sqrt(l2_norm_sq(u)); }

inline double l1_norm(const ScalarField& g) {
    double s = 0.0;
    for (double x : g.v) s += std::abs(x);
    return s * g.grid.area() / double(g.v.size());
}

inline ScalarField& axpy(ScalarField& y, double a, const ScalarField& x) {
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += a * x.v[i];
    return y;
}
inline VectorField& axpy(VectorField& y, double a, const VectorField& x) {
    axpy(y.x, a, x.x);
    axpy(y.y, a, x.y);
    return y;
}

inline ScalarField sample(const TorusGrid& g, auto&& fn) {
    ScalarField f(g);
    const double h = g.h();
    for (int j = 0; j < g.n; ++j)
        for (int i = 0; i < g.n; ++i) f(i, j) = fn(i * h, j * h);
    return f;
}

// ---------------------------------------------------------------- differential operators

inline Spectrum spectral_dx(const Spectrum& s, int dir) {
    Spectrum d(s.grid);
    for_each_mode(s.grid, [&](int r, int c, std::size_t i) {
        const double k = dir == 0 ? s.grid.kx(c) : s.grid.ky(r);
        d.c[i] = cplx(0.0, k) * s.c[i];
    });
    return d;
}

inline VectorField gradient(const ScalarField& g) {
    const auto s = forward(g);
    return {inverse(spectral_dx(s, 0)), inverse(spectral_dx(s, 1))};
}

inline ScalarField divergence(const VectorField& u) {
    const auto a = forward(u.x), b = forward(u.y);
    Spectrum d(a.grid);
    for_each_mode(a.grid, [&](int r, int c, std::size_t i) {
        d.c[i] = cplx(0.0, a.grid.kx(c)) * a.c[i] + cplx(0.0, a.grid.ky(r)) * b.c[i];
    });
    return inverse(d);
}

inline ScalarField laplacian(const ScalarField& g) {
    auto s = forward(g);
    for_each_mode(s.grid, [&](int r, int c, std::size_t i) { s.c[i] *= -s.grid.k2(r, c); });
    return inverse(s);
}

inline VectorField laplacian(const VectorField& u) { return {laplacian(u.x), laplacian(u.y)}; }

/// Leray projection of a pair of spectra in place: a - k (k.a)/|k|^2.
inline void leray_project(Spectrum& a, Spectrum& b) {
    for_each_mode(a.grid, [&](int r, int c, std::size_t i) {
        const double kx = a.grid.kx(c), ky = a.grid.ky(r), kk = kx * kx + ky * ky;
        if (kk == 0.0) {
            // Nyquist lines carry no derivative; only the mean and the
            // pure-Nyquist components survive untouched.
            return;
        }
        const cplx dot = kx * a.c[i] + ky * b.c[i];
        a.c[i] -= kx * dot / kk;
        b.c[i] -= ky * dot / kk;
    });
}

/// Solenoidal part of g (mean preserved).
inline VectorField leray_project(const VectorField& g) {
    auto a = forward(g.x), b = forward(g.y);
    leray_project(a, b);
    return {inverse(a), inverse(b)};
}

/// Solves Delta p = g for mean-free g; the result has zero mean.
inline ScalarField invert_laplacian(const ScalarField& g) {
    const double m = mean(g), nrm = l2_norm(g);
    if (std::abs(m) > 1e-10 * std::max(nrm, 1e-300) && std::abs(m) > 1e-300)
        throw std::invalid_argument("invert_laplacian: input is not mean-free");
    auto s = forward(g);
    for_each_mode(s.grid, [&](int r, int c, std::size_t i) {
        const double kk = s.grid.k2(r, c);
        s.c[i] = kk == 0.0 ? cplx(0.0, 0.0) : -s.c[i] / kk;
    });
    return inverse(s);
}

/// Returns g(. + offset). Exact for trigonometric polynomials without
/// Nyquist content; Nyquist coefficients keep only the real phase factor.
inline ScalarField phase_shift(const ScalarField& g, const Vec2& offset) {
    auto s = forward(g);
    const auto& G = s.grid;
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        const double th = two_pi * (c * offset[0] + G.row_k(r) * offset[1]) / G.length;
        if (c == G.n / 2 || r == G.n / 2)
            s.c[i] *= std::cos(th);
        else
            s.c[i] *= cplx(std::cos(th), std::sin(th));
    });
    return inverse(s);
}

/// Homogeneous Sobolev norm sqrt(|T^2| sum_{k != 0} |2 pi k/L|^{2s} |g_hat_k|^2).
/// s = 0 gives the L2 norm of the mean-free part.
inline double sobolev_norm(const Spectrum& s, double order) {
    const auto& G = s.grid;
    double acc = 0.0;
    for_each_mode(G, [&](int r, int c, std::size_t i) {
        const double kk = G.k2(r, c);
        if (kk == 0.0) return;
        acc += G.multiplicity(c) * std::norm(s.c[i]) * std::pow(kk, order);
    });
    return std::sqrt(acc * G.area());
}

inline double sobolev_norm(const ScalarField& g, double order) {
    return sobolev_norm(forward(g), order);
}

inline double hminus1_norm(const ScalarField& g) { return sobolev_norm(g, -1.0); }

}  // namespace vns
