#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "types.hpp"

namespace hardylab {

namespace detail {

// coth r = 1 + 2/(e^{2r} - 1), exact identity; expm1 keeps small r accurate and
// overflow of expm1 (2r > ~709) collapses gracefully to coth = 1.
inline real coth(real r) { return 1.0 + 2.0 / std::expm1(2.0 * r); }

// csch r = 2 e^{-r} / (1 - e^{-2r}); stable for all r > 0, no overflow.
inline real csch(real r) { return 2.0 * std::exp(-r) / (-std::expm1(-2.0 * r)); }

inline real csch2(real r) {
    const real c = csch(r);
    return c * c;
}

// log tanh(r/2) = log1p(-e^{-r}) - log1p(e^{-r}); stable for all r > 0.
// Both terms must go through log1p: forming 1 - e^{-r} first rounds to 1.0
// once e^{-r} < eps/2 (r > ~36.7) and halves the result.
inline real log_tanh_half(real r) {
    const real q = std::exp(-r);
    return std::log1p(-q) - std::log1p(q);
}

// Taylor coefficients of g(r) = (r coth r - 1)/r^2 = sum c_k r^{2k}.
inline constexpr std::array<real, 11> kGSeries = {
    1.0 / 3.0,
    -1.0 / 45.0,
    2.0 / 945.0,
    -1.0 / 4725.0,
    2.0 / 93555.0,
    -1382.0 / 638512875.0,
    4.0 / 18243225.0,
    -3617.0 / 162820783125.0,
    87734.0 / 38979295480125.0,
    -349222.0 / 1531329465290625.0,
    310732.0 / 13447856940643125.0,
};

// Taylor coefficients of 1/r^2 - 1/sinh^2 r = sum b_k r^{2k}.
inline constexpr std::array<real, 11> kBracketSeries = {
    1.0 / 3.0,
    -1.0 / 15.0,
    2.0 / 189.0,
    -1.0 / 675.0,
    2.0 / 10395.0,
    -1382.0 / 58046625.0,
    4.0 / 1403325.0,
    -3617.0 / 10854718875.0,
    87734.0 / 2292899734125.0,
    -349222.0 / 80596287646875.0,
    310732.0 / 640374140030625.0,
};

// log tanh(r/2) - log(r/2) = sum l_k r^{2k}, k >= 1.
inline constexpr std::array<real, 7> kLogTanhSeries = {
    -1.0 / 12.0,
    7.0 / 1440.0,
    -31.0 / 90720.0,
    127.0 / 4838400.0,
    -73.0 / 34214400.0,
    1414477.0 / 7846046208000.0,
    -8191.0 / 523069747200.0,
};

// sinh^2 r / r^2 = sum s_k r^{2k}.
inline constexpr std::array<real, 8> kSinh2Series = {
    1.0,
    1.0 / 3.0,
    2.0 / 45.0,
    1.0 / 315.0,
    2.0 / 14175.0,
    2.0 / 467775.0,
    4.0 / 42567525.0,
    1.0 / 638512875.0,
};

template <std::size_t K>
inline real horner_even(const std::array<real, K>& c, real r) {
    const real x = r * r;
    real acc = c[K - 1];
    for (std::size_t k = K - 1; k-- > 0;) acc = acc * x + c[k];
    return acc;
}

inline constexpr real kGSeriesRadius = 0.5;
inline constexpr real kBracketSeriesRadius = 0.5;
inline constexpr real kWLogTanhSeriesRadius = 0.05;

inline real g_series(real r) { return horner_even(kGSeries, r); }
inline real g_direct(real r) { return (r * coth(r) - 1.0) / (r * r); }

inline real bracket_series(real r) { return horner_even(kBracketSeries, r); }
inline real bracket_direct(real r) { return 1.0 / (r * r) - csch2(r); }

inline real w_logtanh_direct(real r) {
    // sinh(r) * log tanh(r/2) -> -1 as r -> infinity; squaring the product
    // keeps the expression finite long after sinh^2 alone would overflow.
    const real p = log_tanh_half(r) / csch(r);
    return 1.0 / (4.0 * p * p);
}

inline real w_logtanh_series(real r) {
    const real L = std::log(0.5 * r) + r * r * horner_even(kLogTanhSeries, r);
    const real sinh2 = r * r * horner_even(kSinh2Series, r);
    return 1.0 / (4.0 * sinh2 * L * L);
}

}  // namespace detail

/// g(r) = (r coth r - 1)/r^2: strictly decreasing, 1/3 at 0+, ~1/r at infinity.
inline real g_func(real r) {
    if (!(r > 0.0)) throw std::domain_error("g_func: need r > 0");
    return r <= detail::kGSeriesRadius ? detail::g_series(r) : detail::g_direct(r);
}

/// 1/r^2 - 1/sinh^2 r: positive, 1/3 at 0+, ~1/r^2 at infinity.
inline real inv_r2_minus_csch2(real r) {
    if (!(r > 0.0)) throw std::domain_error("inv_r2_minus_csch2: need r > 0");
    return r <= detail::kBracketSeriesRadius ? detail::bracket_series(r)
                                             : detail::bracket_direct(r);
}

inline RadialProfile g_profile() {
    return RadialProfile([](real r) { return g_func(r); }, detail::kGSeriesRadius,
                         AsymptoticClass::inverse_r, false);
}

inline RadialProfile gap_weight_profile() {
    return RadialProfile([](real r) { return inv_r2_minus_csch2(r); },
                         detail::kBracketSeriesRadius, AsymptoticClass::inverse_r2, false);
}

inline RadialProfile inv_r2_profile() {
    return RadialProfile([](real r) { return 1.0 / (r * r); }, 0.0,
                         AsymptoticClass::inverse_r2, true);
}

inline RadialProfile csch2_profile() {
    return RadialProfile([](real r) { return detail::csch2(r); }, 0.0,
                         AsymptoticClass::exp_decay, true);
}

/// gamma_N(lambda) = sqrt((N-1)^2 - 4 lambda), real for lambda <= ((N-1)/2)^2.
inline real gamma_n(Dimension dim, real lambda) {
    const real n1 = static_cast<real>(dim.value() - 1);
    const real radicand = n1 * n1 - 4.0 * lambda;
    if (radicand < -1e-12 * std::max(1.0, std::abs(lambda)))
        throw std::domain_error("gamma_n: lambda exceeds ((N-1)/2)^2");
    return std::sqrt(std::max(radicand, 0.0));
}

/// The three named coefficients of the shifted-Hardy potential at (N, lambda).
struct VLambdaCoeffs {
    real gamma;        // gamma_N(lambda)
    real c_hardy;      // (gamma+1)^2/4, multiplies 1/r^2
    real c_g;          // gamma(gamma+1)/2, multiplies g(r)
    real c_csch2;      // (N-1+gamma)(N-3-gamma)/4, multiplies 1/sinh^2 r
    real csch2_total;  // c_hardy + c_csch2 = ((N-2)/2)^2, used by the stable regrouping
};

inline VLambdaCoeffs v_lambda_coeffs(Dimension dim, real lambda) {
    const real n = static_cast<real>(dim.value());
    const real ga = gamma_n(dim, lambda);
    VLambdaCoeffs c;
    c.gamma = ga;
    c.c_hardy = 0.25 * (ga + 1.0) * (ga + 1.0);
    c.c_g = 0.5 * ga * (ga + 1.0);
    c.c_csch2 = 0.25 * (n - 1.0 + ga) * (n - 3.0 - ga);
    c.csch2_total = c.c_hardy + c.c_csch2;
    return c;
}

/// V_lambda(r) = c_hardy/r^2 + c_g g(r) + c_csch2/sinh^2 r, assembled in the
/// cancellation-free regrouping c_hardy (1/r^2 - 1/sinh^2 r)
///   + (c_hardy + c_csch2)/sinh^2 r + c_g g(r).
inline RadialProfile v_lambda(Dimension dim, real lambda) {
    const VLambdaCoeffs c = v_lambda_coeffs(dim, lambda);
    const bool at_top = c.gamma == 0.0;
    const bool singular = dim.value() >= 3;
    return RadialProfile(
        [c](real r) {
            return c.c_hardy * inv_r2_minus_csch2(r) + c.csch2_total * detail::csch2(r) +
                   c.c_g * g_func(r);
        },
        detail::kBracketSeriesRadius,
        at_top ? AsymptoticClass::inverse_r2 : AsymptoticClass::inverse_r, singular);
}

/// Vbar_lambda(r) = (lambda1 - lambda) + V_{lambda1}(r).
inline RadialProfile v_bar_lambda(Dimension dim, real lambda) {
    if (dim.value() < 3) throw std::domain_error("v_bar_lambda: need N >= 3");
    const real l1 = lambda_one(dim);
    if (lambda > l1 + 1e-12) throw std::domain_error("v_bar_lambda: lambda exceeds lambda1");
    return v_lambda(dim, l1) + (l1 - lambda);
}

/// R_N(lambda) = (lambda1 - lambda) + (2/3) sqrt(lambda1 - lambda) - (N-1)(N-3)/12,
/// the small-r constant term of V_lambda; strictly decreasing in lambda.
inline real r_n_asymptotic(Dimension dim, real lambda) {
    const real n = static_cast<real>(dim.value());
    const real gap = lambda_one(dim) - lambda;
    if (gap < -1e-12) throw std::domain_error("r_n_asymptotic: lambda exceeds lambda1");
    return gap + (2.0 / 3.0) * std::sqrt(std::max(gap, 0.0)) - (n - 1.0) * (n - 3.0) / 12.0;
}

/// W(r) = 1/(4 sinh^2 r (log tanh(r/2))^2): ~1/(4 r^2 log^2(r/2)) near 0,
/// tends to 1/4 at infinity.
inline RadialProfile w_logtanh(Dimension dim) {
    if (dim.value() < 3) throw std::domain_error("w_logtanh: need N >= 3");
    return RadialProfile(
        [](real r) {
            if (!(r > 0.0)) throw std::domain_error("w_logtanh: need r > 0");
            return r <= detail::kWLogTanhSeriesRadius ? detail::w_logtanh_series(r)
                                                      : detail::w_logtanh_direct(r);
        },
        detail::kWLogTanhSeriesRadius, AsymptoticClass::constant, true);
}

/// alpha(r) = 1/(1 + (2(N-1)/N^2) r^2 (N g(r) - 2/sinh^2 r)): >= 1 up to the
/// crossover root of N g = 2 csch^2, < 1 beyond it.
inline RadialProfile alpha_hpw(Dimension dim) {
    const real n = static_cast<real>(dim.value());
    return RadialProfile(
        [n](real r) {
            if (!(r > 0.0)) throw std::domain_error("alpha_hpw: need r > 0");
            const real rcsch = r * detail::csch(r);
            const real bracket = n * r * r * g_func(r) - 2.0 * rcsch * rcsch;
            return 1.0 / (1.0 + 2.0 * (n - 1.0) / (n * n) * bracket);
        },
        0.0, AsymptoticClass::custom, false);
}

/// V0(r) = N^2/4 (1/r^2 - 1/sinh^2 r) + (N-2)^2/4 csch^2 r + N(N-1)/2 g(r);
/// coincides with v_lambda(dim, 0) and satisfies 4 V0 r^2 = N^2 / alpha(r).
inline RadialProfile v_zero_hpw(Dimension dim) {
    const real n = static_cast<real>(dim.value());
    return RadialProfile(
        [n](real r) {
            return 0.25 * n * n * inv_r2_minus_csch2(r) +
                   0.25 * (n - 2.0) * (n - 2.0) * detail::csch2(r) +
                   0.5 * n * (n - 1.0) * g_func(r);
        },
        detail::kBracketSeriesRadius, AsymptoticClass::inverse_r, dim.value() >= 3);
}

/// Geodesic distance from (x, y) in the upper half-plane model to the pole (0, 1).
inline real halfspace_distance(real x, real y) {
    if (!(y > 0.0)) throw std::domain_error("halfspace_distance: need y > 0");
    return std::acosh(1.0 + ((y - 1.0) * (y - 1.0) + x * x) / (2.0 * y));
}

/// Geodesic distance of a point at Euclidean radius s in the unit-disc model.
inline real ball_distance(real s) {
    if (!(s >= 0.0 && s < 1.0)) throw std::domain_error("ball_distance: need 0 <= s < 1");
    return std::log1p(s) - std::log1p(-s);
}

/// Coefficients of the radial-Laplacian action on r^a sinh^b r:
///   -Lap u = (inv_r2/r^2 + coth_over_r coth(r)/r + csch2/sinh^2 r + constant) u.
struct RadialLaplacianCoeffs {
    real inv_r2, coth_over_r, csch2, constant;
};

inline RadialLaplacianCoeffs minus_laplacian_coeffs(Dimension dim, real a, real b) {
    const real n = static_cast<real>(dim.value());
    return {-a * (a - 1.0), -(2.0 * a * b + (n - 1.0) * a), -b * (b + n - 2.0),
            -(b * b + (n - 1.0) * b)};
}

/// Minimal-growth positive solution r^{-(N-2)/2} (sinh r / r)^{-(N-1+gamma)/2}
/// = r^{(1+gamma)/2} sinh^{-(N-1+gamma)/2} r, with closed-form derivatives.
class GroundState {
public:
    GroundState(Dimension dim, real lambda)
        : dim_(dim), lambda_(lambda), gamma_(gamma_n(dim, lambda)) {
        alpha_ = 0.5 * (1.0 + gamma_);
        beta_ = -0.5 * (static_cast<real>(dim.value()) - 1.0 + gamma_);
    }

    real operator()(real r) const {
        return std::exp(alpha_ * std::log(r) + beta_ * log_sinh(r));
    }
    /// d/dr: value * (alpha/r + beta coth r).
    real d1(real r) const { return (*this)(r) * (alpha_ / r + beta_ * detail::coth(r)); }
    /// d2/dr2: value * (a(a-1)/r^2 + 2ab coth(r)/r + (b^2-b) csch^2 r + b^2).
    real d2(real r) const {
        const real a = alpha_, b = beta_;
        return (*this)(r) * (a * (a - 1.0) / (r * r) + 2.0 * a * b * detail::coth(r) / r +
                             (b * b - b) * detail::csch2(r) + b * b);
    }

    Dimension dim() const noexcept { return dim_; }
    real lambda() const noexcept { return lambda_; }
    real gamma() const noexcept { return gamma_; }
    real power_r() const noexcept { return alpha_; }
    real power_sinh() const noexcept { return beta_; }

private:
    static real log_sinh(real r) {
        return r > 1.0 ? r + std::log1p(-std::exp(-2.0 * r)) - std::log(2.0)
                       : std::log(std::sinh(r));
    }
    Dimension dim_;
    real lambda_, gamma_, alpha_, beta_;
};

}  // namespace hardylab
