#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "detail/quad_core.hpp"
#include "manifold.hpp"
#include "scalar.hpp"
#include "types.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Weighted integration against the radial volume density psi^{N-1} dr.  The
// sphere-measure constant is omitted throughout: every quantity of interest
// here is a quotient in which it cancels.
// ---------------------------------------------------------------------------
struct WeightedIntegral {
    real value = 0.0;
    real abs_error_estimate = 0.0;
    bool singular_flag = false;
};

/// integral_a^b f(r) psi(r)^{N-1} dr.  Pass b = infinity to integrate to the
/// model horizon with a geometric tail estimate; a non-decaying tail raises
/// NonIntegrableError.
inline WeightedIntegral integrate(const ManifoldModel& model,
                                  const std::function<real(real)>& f, real a, real b) {
    if (!(a >= 0.0)) throw std::domain_error("integrate: need a >= 0");
    const bool to_infinity = std::isinf(b);
    real b_eff = to_infinity ? model.r_max() : b;
    if (!(b_eff > a)) throw std::domain_error("integrate: need b > a");
    if (!model.closed_form() && b_eff > model.r_max() * (1.0 + 1e-12))
        throw std::domain_error("integrate: b beyond the numeric solve horizon");

    // Zero test first: hat/bump tails multiply an astronomically large measure
    // at far radii; 0 * huge must stay 0, not become NaN near overflow.
    const auto g = [&](real r) -> real {
        const real fv = f(r);
        if (fv == 0.0) return 0.0;
        return fv * model.measure(r);
    };

    WeightedIntegral out;
    const real span = b_eff - a;

    // Singularity probe near the lower endpoint (diagnostic flag only).
    try {
        const real p1 = a + 1e-9 * span, p2 = a + 0.5 * span;
        const real v1 = std::abs(g(p1)), v2 = std::abs(g(p2));
        out.singular_flag = std::isfinite(v1) ? (v1 > 1e6 * (1.0 + v2)) : true;
    } catch (const std::exception&) {
        out.singular_flag = true;
    }

    if (!to_infinity) {
        const auto q = detail::adaptive_gk(g, a, b_eff, 1e-13, 1e-11);
        out.value = q.value;
        out.abs_error_estimate = q.error;
        return out;
    }

    // Infinite upper limit: integrate to the horizon, then certify decay by
    // comparing the last two octaves and attach a geometric tail estimate.
    const real m1 = 0.5 * (a + b_eff), m2 = 0.5 * (m1 + b_eff);
    const auto head = detail::adaptive_gk(g, a, m1, 1e-13, 1e-11);
    const auto oct1 = detail::adaptive_gk(g, m1, m2, 1e-13, 1e-11);
    const auto oct2 = detail::adaptive_gk(g, m2, b_eff, 1e-13, 1e-11);
    const real tiny = 1e-300;
    const real decay = oct2.abs_value / std::max(oct1.abs_value, tiny);
    const real scale = head.abs_value + oct1.abs_value + oct2.abs_value;
    if (oct2.abs_value > 1e-14 * std::max(scale, 1.0) && decay >= 0.95)
        throw NonIntegrableError("integrate: integrand does not decay at the upper end");
    out.value = head.value + oct1.value + oct2.value;
    const real tail = (decay < 0.95) ? 3.0 * oct2.abs_value * decay / (1.0 - decay) : 0.0;
    out.abs_error_estimate = head.error + oct1.error + oct2.error + tail;
    return out;
}

inline WeightedIntegral integrate(const ManifoldModel& model, const RadialProfile& f, real a,
                                  real b) {
    return integrate(model, [f](real r) { return f(r); }, a, b);
}

// ---------------------------------------------------------------------------
// Smooth compactly-supported test functions with closed-form derivatives.
// ---------------------------------------------------------------------------
struct Support {
    real a = 0.0, b = 0.0;
};

struct FamilyTag {
    enum class Kind { bump, cutoff_power, near_extremal, far_bump };
    Kind kind = Kind::bump;
    real p1 = 0.0, p2 = 0.0;  // near_extremal: (lambda); far_bump: (rho, w); cutoff_power: (p)

    std::string label(const Support& s) const {
        char buf[96];
        switch (kind) {
            case Kind::bump:
                std::snprintf(buf, sizeof buf, "bump[%.3g,%.3g]", s.a, s.b);
                break;
            case Kind::cutoff_power:
                std::snprintf(buf, sizeof buf, "cutoff_power(p=%.3g)[%.3g,%.3g]", p1, s.a, s.b);
                break;
            case Kind::near_extremal:
                std::snprintf(buf, sizeof buf, "near_extremal(lambda=%.4g)[%.3g,%.3g]", p1, s.a,
                              s.b);
                break;
            case Kind::far_bump:
                std::snprintf(buf, sizeof buf, "far_bump(rho=%.3g,w=%.3g)", p1, p2);
                break;
        }
        return buf;
    }
};

struct TestFunction {
    RadialProfile profile, d1, d2;
    Support support;
    FamilyTag tag;

    std::string label() const { return tag.label(support); }
};

namespace detail {

struct C2Value {
    real v = 0.0, d1 = 0.0, d2 = 0.0;
};

/// Classic bump exp(-1/(1-t^2)) on (-1,1), with first two derivatives.
inline C2Value bump_core(real t) {
    const real one_mt2 = 1.0 - t * t;
    if (!(one_mt2 > 1e-6)) return {};  // cut where the value is < e^{-1e6}
    const real v = std::exp(-1.0 / one_mt2);
    const real w1 = -2.0 * t / (one_mt2 * one_mt2);
    const real w2 = -2.0 / (one_mt2 * one_mt2) - 8.0 * t * t / (one_mt2 * one_mt2 * one_mt2);
    return {v, v * w1, v * (w1 * w1 + w2)};
}

/// Smooth step S(x) = f(x)/(f(x)+f(1-x)) with f(x) = e^{-1/x}; S(<=0)=0, S(>=1)=1.
inline C2Value smooth_step(real x) {
    if (x <= 0.01) return {0.0, 0.0, 0.0};   // truncation below e^{-100}
    if (x >= 0.99) return {1.0, 0.0, 0.0};
    const auto fe = [](real t) { return std::exp(-1.0 / t); };
    const real fx = fe(x), fy = fe(1.0 - x);
    const real dfx = fx / (x * x), dfy = fy / ((1.0 - x) * (1.0 - x));
    const real d2fx = fx * (1.0 / (x * x * x * x) - 2.0 / (x * x * x));
    const real d2fy = fy * (1.0 / std::pow(1.0 - x, 4) - 2.0 / std::pow(1.0 - x, 3));
    const real D = fx + fy;
    const real D1 = dfx - dfy;
    const real D2 = d2fx + d2fy;
    const real S = fx / D;
    const real S1 = (dfx * D - fx * D1) / (D * D);
    const real S2 = (d2fx * D * D - fx * D * D2 - 2.0 * D1 * dfx * D + 2.0 * fx * D1 * D1) /
                    (D * D * D);
    return {S, S1, S2};
}

/// Plateau window: rises smoothly on [a, a+w], equals 1 on [a+w, b-w], falls on [b-w, b].
inline C2Value plateau_window(real r, real a, real b, real w) {
    const real x1 = (r - a) / w, x2 = (b - r) / w;
    const C2Value s1 = smooth_step(x1), s2 = smooth_step(x2);
    const real k1 = 1.0 / w, k2 = -1.0 / w;
    C2Value out;
    out.v = s1.v * s2.v;
    out.d1 = s1.d1 * k1 * s2.v + s1.v * s2.d1 * k2;
    out.d2 = s1.d2 * k1 * k1 * s2.v + 2.0 * s1.d1 * k1 * s2.d1 * k2 + s1.v * s2.d2 * k2 * k2;
    return out;
}

inline TestFunction make_c2_function(std::function<C2Value(real)> core, Support sup,
                                     FamilyTag tag) {
    auto guard = [core = std::move(core), sup](real r) -> C2Value {
        if (r <= sup.a || r >= sup.b) return {};
        return core(r);
    };
    TestFunction tf;
    tf.support = sup;
    tf.tag = tag;
    tf.profile = RadialProfile([guard](real r) { return guard(r).v; }, 0.0,
                               AsymptoticClass::custom, false);
    tf.d1 = RadialProfile([guard](real r) { return guard(r).d1; }, 0.0, AsymptoticClass::custom,
                          false);
    tf.d2 = RadialProfile([guard](real r) { return guard(r).d2; }, 0.0, AsymptoticClass::custom,
                          false);
    return tf;
}

}  // namespace detail

/// Smooth bump supported on [a, b].
inline TestFunction bump_function(real a, real b) {
    if (!(0.0 <= a && a < b)) throw std::domain_error("bump_function: need 0 <= a < b");
    const real mid = 0.5 * (a + b), half = 0.5 * (b - a);
    auto core = [mid, half](real r) {
        auto c = detail::bump_core((r - mid) / half);
        c.d1 /= half;
        c.d2 /= half * half;
        return c;
    };
    return detail::make_c2_function(core, {a, b}, {FamilyTag::Kind::bump, 0.0, 0.0});
}

/// Bump of width 2w centered at rho (support [rho-w, rho+w]).
inline TestFunction far_bump_function(real rho, real w) {
    if (!(w > 0.0) || !(rho - w >= 0.0))
        throw std::domain_error("far_bump_function: need w > 0 and rho >= w");
    TestFunction tf = bump_function(rho - w, rho + w);
    tf.tag = {FamilyTag::Kind::far_bump, rho, w};
    return tf;
}

/// r^p times a plateau window on [a, b] (edge fraction of the span on each side).
inline TestFunction cutoff_power_function(real p, real a, real b, real edge_frac = 0.25) {
    if (!(0.0 < a && a < b)) throw std::domain_error("cutoff_power_function: need 0 < a < b");
    if (!(edge_frac > 0.0 && edge_frac <= 0.5))
        throw std::domain_error("cutoff_power_function: edge_frac in (0, 1/2]");
    const real w = edge_frac * (b - a);
    auto core = [p, a, b, w](real r) {
        const auto win = detail::plateau_window(r, a, b, w);
        const real P = std::pow(r, p);
        const real P1 = p * P / r;
        const real P2 = p * (p - 1.0) * P / (r * r);
        detail::C2Value out;
        out.v = P * win.v;
        out.d1 = P1 * win.v + P * win.d1;
        out.d2 = P2 * win.v + 2.0 * P1 * win.d1 + P * win.d2;
        return out;
    };
    return detail::make_c2_function(core, {a, b}, {FamilyTag::Kind::cutoff_power, p, 0.0});
}

/// Ground-state shape r^{(1+gamma)/2} sinh^{-(N-1+gamma)/2} r times a plateau window.
inline TestFunction near_extremal_function(Dimension dim, real lambda, real a, real b,
                                           real edge_frac = 0.25) {
    if (!(0.0 < a && a < b)) throw std::domain_error("near_extremal_function: need 0 < a < b");
    const GroundState gs(dim, lambda);
    const real w = edge_frac * (b - a);
    auto core = [gs, a, b, w](real r) {
        const auto win = detail::plateau_window(r, a, b, w);
        const real v = gs(r), v1 = gs.d1(r), v2 = gs.d2(r);
        detail::C2Value out;
        out.v = v * win.v;
        out.d1 = v1 * win.v + v * win.d1;
        out.d2 = v2 * win.v + 2.0 * v1 * win.d1 + v * win.d2;
        return out;
    };
    return detail::make_c2_function(core, {a, b},
                                    {FamilyTag::Kind::near_extremal, lambda, 0.0});
}

// ---------------------------------------------------------------------------
// Deterministic test suites.
// ---------------------------------------------------------------------------
struct SuiteSpec {
    bool bumps = true;
    bool cutoff_powers = true;
    bool near_extremals = true;
    bool far_bumps = true;
    std::vector<real> near_extremal_lambdas;  // defaults to {0, l1/2, 3l1/4, l1}
    std::vector<real> far_centers = {5.0, 10.0, 20.0, 40.0};
    real min_support = 0.05;  // all functions supported in [min_support, max_b]
    real max_b = 0.0;         // 0 -> 0.9 * model r_max
};

inline std::vector<TestFunction> make_test_suite(const ManifoldModel& model,
                                                 SuiteSpec spec = {}) {
    const real max_b = spec.max_b > 0.0 ? spec.max_b : 0.9 * model.r_max();
    std::vector<TestFunction> suite;

    if (spec.bumps) {
        static constexpr std::pair<real, real> kWindows[] = {
            {0.1, 1.0}, {0.1, 2.0},  {0.2, 0.8}, {0.3, 1.5}, {0.5, 2.0},
            {0.5, 4.0}, {1.0, 3.0},  {1.0, 6.0}, {2.0, 5.0}, {2.0, 10.0},
            {3.0, 12.0}, {4.0, 9.0}, {5.0, 15.0}, {6.0, 14.0}};
        for (const auto& [a, b] : kWindows)
            if (a >= spec.min_support && b <= max_b) suite.push_back(bump_function(a, b));
    }
    if (spec.cutoff_powers) {
        const auto n = static_cast<real>(model.dim().value());
        const real powers[] = {-0.5, -1.0, (2.0 - n) / 2.0, -(n - 1.0) / 2.0};
        for (const real p : powers) {
            if (0.2 >= spec.min_support && 5.0 <= max_b)
                suite.push_back(cutoff_power_function(p, 0.2, 5.0));
            if (0.5 >= spec.min_support && 10.0 <= max_b)
                suite.push_back(cutoff_power_function(p, 0.5, 10.0));
        }
    }
    if (spec.near_extremals) {
        std::vector<real> lambdas = spec.near_extremal_lambdas;
        if (lambdas.empty()) {
            const real l1 = lambda_one(model.dim());
            lambdas = {0.0, 0.5 * l1, 0.75 * l1, l1};
        }
        static constexpr std::pair<real, real> kWindows[] = {{0.05, 10.0}, {0.2, 20.0}, {0.5, 5.0}};
        for (const real lam : lambdas)
            for (const auto& [a, b] : kWindows)
                if (a >= spec.min_support && b <= max_b)
                    suite.push_back(near_extremal_function(model.dim(), lam, a, b));
    }
    if (spec.far_bumps) {
        for (const real rho : spec.far_centers)
            for (const real w : {1.0, 2.0})
                if (rho - w >= spec.min_support && rho + w <= max_b)
                    suite.push_back(far_bump_function(rho, w));
    }
    if (suite.empty()) throw std::domain_error("make_test_suite: degenerate ranges, empty suite");
    return suite;
}

// ---------------------------------------------------------------------------
// Radial quadratic forms and operators.
// ---------------------------------------------------------------------------
inline WeightedIntegral dirichlet_form_integral(const ManifoldModel& model,
                                                const TestFunction& u, real lambda) {
    if (!(u.support.b <= model.r_max() * (1.0 + 1e-12)))
        throw std::domain_error("dirichlet_form: support exceeds the model horizon");
    auto f = [&u, lambda](real r) {
        const real d = u.d1(r), v = u.profile(r);
        return d * d - lambda * v * v;
    };
    return integrate(model, f, u.support.a, u.support.b);
}

/// integral (u'^2 - lambda u^2) psi^{N-1} dr.
inline real dirichlet_form(const ManifoldModel& model, const TestFunction& u, real lambda) {
    return dirichlet_form_integral(model, u, lambda).value;
}

/// r -> u''(r) + (N-1) (psi'/psi) u'(r), the radial Laplacian through the model.
inline RadialProfile radial_laplacian(const ManifoldModel& model, const TestFunction& u) {
    const auto n = static_cast<real>(model.dim().value());
    auto m = model;
    auto d1 = u.d1, d2 = u.d2;
    auto eval = [m, d1, d2, n](real r) {
        return d2(r) + (n - 1.0) * (m.dpsi(r) / m.psi(r)) * d1(r);
    };
    return RadialProfile(std::move(eval), 0.0, AsymptoticClass::custom, false);
}

}  // namespace hardylab
