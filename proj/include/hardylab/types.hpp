#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hardylab {

using real = double;

/// Spatial dimension N >= 2 of the radial model.
class Dimension {
public:
    explicit Dimension(int n) : n_(n) {
        if (n_ < 2)
            throw std::domain_error("Dimension: need n >= 2, got " + std::to_string(n_));
    }
    int value() const noexcept { return n_; }

    friend bool operator==(Dimension a, Dimension b) noexcept { return a.n_ == b.n_; }

private:
    int n_;
};

/// Bottom of the spectrum of the Laplacian on the constant-curvature model: ((N-1)/2)^2.
inline real lambda_one(Dimension dim) noexcept {
    const real m = (dim.value() - 1) / 2.0;
    return m * m;
}

/// Euclidean Hardy constant ((N-2)/2)^2.
inline real hardy_constant(Dimension dim) noexcept {
    const real m = (dim.value() - 2) / 2.0;
    return m * m;
}

/// Large-r behavior tag of a radial profile.
enum class AsymptoticClass { constant, inverse_r, inverse_r2, exp_decay, custom };

/// Scalar function of the geodesic radius r > 0 together with numeric metadata:
/// the switch radius below which a small-r series branch is used, the large-r
/// behavior tag, and whether the profile is singular at zero (in which case
/// r^2 * eval(r) has a finite limit as r -> 0+).
class RadialProfile {
public:
    RadialProfile() = default;
    RadialProfile(std::function<real(real)> eval, real series_radius, AsymptoticClass asym,
                  bool singular_at_zero)
        : eval_(std::move(eval)),
          series_radius_(series_radius),
          asym_(asym),
          singular_at_zero_(singular_at_zero) {}

    real operator()(real r) const { return eval_(r); }
    real series_radius() const noexcept { return series_radius_; }
    AsymptoticClass asymptotic_class() const noexcept { return asym_; }
    bool singular_at_zero() const noexcept { return singular_at_zero_; }
    bool valid() const noexcept { return static_cast<bool>(eval_); }

private:
    std::function<real(real)> eval_;
    real series_radius_ = 0.0;
    AsymptoticClass asym_ = AsymptoticClass::custom;
    bool singular_at_zero_ = false;
};

/// Pointwise sum of two profiles; metadata merges conservatively.
inline RadialProfile operator+(const RadialProfile& p, const RadialProfile& q) {
    const AsymptoticClass asym = (p.asymptotic_class() == q.asymptotic_class())
                                     ? p.asymptotic_class()
                                     : AsymptoticClass::custom;
    return RadialProfile([p, q](real r) { return p(r) + q(r); },
                         std::max(p.series_radius(), q.series_radius()), asym,
                         p.singular_at_zero() || q.singular_at_zero());
}

/// Profile scaled by a constant.
inline RadialProfile operator*(real c, const RadialProfile& p) {
    return RadialProfile([c, p](real r) { return c * p(r); }, p.series_radius(),
                         p.asymptotic_class(), c != 0.0 && p.singular_at_zero());
}

/// Profile shifted by an additive constant.
inline RadialProfile operator+(const RadialProfile& p, real c) {
    const AsymptoticClass asym =
        (c == 0.0) ? p.asymptotic_class() : AsymptoticClass::constant;
    return RadialProfile([c, p](real r) { return p(r) + c; }, p.series_radius(), asym,
                         p.singular_at_zero());
}

inline RadialProfile constant_profile(real c) {
    return RadialProfile([c](real) { return c; }, 0.0, AsymptoticClass::constant, false);
}

/// Logarithmically spaced sample radii, the evaluation grid convention.
inline std::vector<real> log_grid(real r_min, real r_max, int samples) {
    if (!(r_min > 0.0) || !(r_max > r_min) || samples < 2)
        throw std::invalid_argument("log_grid: need 0 < r_min < r_max and samples >= 2");
    std::vector<real> g(static_cast<std::size_t>(samples));
    const real l0 = std::log(r_min), l1 = std::log(r_max);
    for (int i = 0; i < samples; ++i)
        g[static_cast<std::size_t>(i)] = std::exp(l0 + (l1 - l0) * i / (samples - 1));
    g.front() = r_min;
    g.back() = r_max;
    return g;
}

/// ODE integration failed (step underflow); carries the radius reached.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, real radius)
        : std::runtime_error(what + " (radius reached: " + std::to_string(radius) + ")"),
          radius_reached(radius) {}
    real radius_reached;
};

/// A half-line integral whose convergence cannot be certified.
class NonIntegrableError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Adaptive quadrature failed to converge; carries the worst subinterval.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, real lo, real hi)
        : std::runtime_error(what + " (worst subinterval [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "])"),
          worst_lo(lo),
          worst_hi(hi) {}
    real worst_lo, worst_hi;
};

/// Eigensolver did not converge; carries the last iterate and residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, real last, real res)
        : std::runtime_error(what + " (last iterate " + std::to_string(last) +
                             ", residual " + std::to_string(res) + ")"),
          last_iterate(last),
          residual(res) {}
    real last_iterate, residual;
};

}  // namespace hardylab
