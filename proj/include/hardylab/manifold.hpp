#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "detail/quad_core.hpp"
#include "scalar.hpp"
#include "types.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// CurvatureProfile: radial curvature-magnitude bound G(r) >= 0, so the model
// has sectional curvature <= -G(r) <= 0.
// ---------------------------------------------------------------------------
class CurvatureProfile {
  public:
    enum class Kind { zero, constant, power, tabulated };

    static CurvatureProfile zero() { return CurvatureProfile(Kind::zero); }

    /// G(r) = c with c > 0.
    static CurvatureProfile constant(real c) {
        if (!(c > 0.0)) throw std::domain_error("CurvatureProfile::constant: need c > 0");
        CurvatureProfile p(Kind::constant);
        p.c_ = c;
        return p;
    }

    /// G(r) = C * r^{2a} with C > 0, a > -1 (so that psi'(0) = 1 is meaningful).
    static CurvatureProfile power(real C, real a) {
        if (!(C > 0.0)) throw std::domain_error("CurvatureProfile::power: need C > 0");
        if (!(a > -1.0)) throw std::domain_error("CurvatureProfile::power: need a > -1");
        CurvatureProfile p(Kind::power);
        p.C_ = C;
        p.a_ = a;
        return p;
    }

    /// Piecewise-linear G from (r, G(r)) samples; constant extension beyond the
    /// last node and before the first.
    static CurvatureProfile tabulated(std::vector<std::pair<real, real>> samples) {
        if (samples.size() < 2)
            throw std::domain_error("CurvatureProfile::tabulated: need at least 2 samples");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!std::isfinite(samples[i].first) || !std::isfinite(samples[i].second))
                throw std::domain_error("CurvatureProfile::tabulated: non-finite sample");
            if (samples[i].first < 0.0)
                throw std::domain_error("CurvatureProfile::tabulated: need r >= 0");
            if (samples[i].second < 0.0)
                throw std::domain_error("CurvatureProfile::tabulated: need G >= 0");
            if (i > 0 && !(samples[i].first > samples[i - 1].first))
                throw std::domain_error("CurvatureProfile::tabulated: radii must be strictly increasing");
        }
        CurvatureProfile p(Kind::tabulated);
        p.table_ = std::move(samples);
        return p;
    }

    /// Two-column text file (r, G); '#' starts a comment, blank lines ignored.
    static CurvatureProfile tabulated_from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open curvature file: " + path);
        std::vector<std::pair<real, real>> samples;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            real r = 0.0, g = 0.0;
            if (!(ls >> r)) continue;  // blank / comment-only line
            if (!(ls >> g))
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected two numeric columns");
            std::string extra;
            if (ls >> extra)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": trailing content after two columns");
            samples.emplace_back(r, g);
        }
        return tabulated(std::move(samples));
    }

    Kind kind() const { return kind_; }
    real constant_value() const { return c_; }
    real power_coeff() const { return C_; }
    real power_exponent() const { return a_; }
    const std::vector<std::pair<real, real>>& table() const { return table_; }

    real operator()(real r) const {
        switch (kind_) {
            case Kind::zero:
                return 0.0;
            case Kind::constant:
                return c_;
            case Kind::power:
                return C_ * std::pow(r, 2.0 * a_);
            case Kind::tabulated: {
                if (r <= table_.front().first) return table_.front().second;
                if (r >= table_.back().first) return table_.back().second;
                auto it = std::upper_bound(
                    table_.begin(), table_.end(), r,
                    [](real x, const std::pair<real, real>& s) { return x < s.first; });
                const auto& hi = *it;
                const auto& lo = *(it - 1);
                const real t = (r - lo.first) / (hi.first - lo.first);
                return lo.second + t * (hi.second - lo.second);
            }
        }
        return 0.0;
    }

  private:
    explicit CurvatureProfile(Kind k) : kind_(k) {}
    Kind kind_;
    real c_ = 0.0, C_ = 0.0, a_ = 0.0;
    std::vector<std::pair<real, real>> table_;
};

namespace detail {

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with 4th-order dense output, specialized to the linear
// system  psi'' = G(r) psi,  psi(0) = 0, psi'(0) = 1.
// ---------------------------------------------------------------------------
struct DenseStep {
    real r0, h;
    std::array<std::array<real, 5>, 2> rc;  // dense coefficients per component
};

struct PsiTable {
    real r_begin = 0.0;
    real r_end = 0.0;
    std::vector<DenseStep> steps;
    std::vector<real> ends;  // right endpoint per step (sorted)

    // (psi, dpsi) at r; below r_begin the series start psi ~ r, psi' ~ 1 is exact
    // to well below integrator tolerance.
    std::array<real, 2> eval(real r) const {
        if (r <= r_begin) return {r, 1.0};
        if (r > r_end * (1.0 + 1e-12))
            throw std::domain_error("ManifoldModel: evaluation beyond r_max of the numeric solve");
        auto it = std::lower_bound(ends.begin(), ends.end(), r);
        if (it == ends.end()) --it;
        const DenseStep& s = steps[static_cast<std::size_t>(it - ends.begin())];
        real th = (r - s.r0) / s.h;
        th = std::clamp(th, 0.0, 1.0);
        const real th1 = 1.0 - th;
        std::array<real, 2> out{};
        for (int i = 0; i < 2; ++i) {
            const auto& c = s.rc[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(i)] =
                c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])));
        }
        return out;
    }
};

inline PsiTable integrate_psi(const CurvatureProfile& G, real r_max, real tol) {
    if (!(r_max > 0.0)) throw std::domain_error("solve_psi: need r_max > 0");
    if (!(tol > 0.0)) throw std::domain_error("solve_psi: need tol > 0");

    // Butcher tableau (Dormand-Prince 5(4)).
    constexpr real a21 = 1.0 / 5;
    constexpr real a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr real a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr real a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
    constexpr real a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr real b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                   b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr real c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr real e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr real d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    using Vec = std::array<real, 2>;
    const auto f = [&G](real r, const Vec& y) -> Vec { return {y[1], G(r) * y[0]}; };
    const auto axpy = [](const Vec& y, real h, std::initializer_list<std::pair<real, const Vec*>> terms) {
        Vec out = y;
        for (const auto& [coef, k] : terms) {
            out[0] += h * coef * (*k)[0];
            out[1] += h * coef * (*k)[1];
        }
        return out;
    };

    PsiTable table;
    const real r0 = std::min(1e-8, r_max * 1e-6);
    table.r_begin = r0;
    table.r_end = r_max;

    real r = r0;
    Vec y = {r0, 1.0};  // series start: psi(r0) = r0 + O(G r0^3)
    Vec k1 = f(r, y);
    real h = std::min(1e-3, (r_max - r0) / 16.0);
    const real rtol = tol, atol = tol * 1e-6;
    long steps_taken = 0;

    while (r < r_max) {
        if (++steps_taken > 2000000)
            throw IntegrationError("solve_psi: step budget exhausted", r);
        h = std::min(h, r_max - r);
        const Vec k2 = f(r + c2 * h, axpy(y, h, {{a21, &k1}}));
        const Vec k3 = f(r + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
        const Vec k4 = f(r + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const Vec k5 = f(r + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const Vec k6 = f(r + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const Vec y1 = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const Vec k7 = f(r + h, y1);

        real err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const auto u = static_cast<std::size_t>(i);
            const real e = h * (e1 * k1[u] + e3 * k3[u] + e4 * k4[u] + e5 * k5[u] +
                                e6 * k6[u] + e7 * k7[u]);
            const real sc = atol + rtol * std::max(std::abs(y[u]), std::abs(y1[u]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(0.5 * err);

        if (err <= 1.0) {
            DenseStep ds;
            ds.r0 = r;
            ds.h = h;
            for (int i = 0; i < 2; ++i) {
                const auto u = static_cast<std::size_t>(i);
                const real ydiff = y1[u] - y[u];
                const real bspl = h * k1[u] - ydiff;
                ds.rc[u][0] = y[u];
                ds.rc[u][1] = ydiff;
                ds.rc[u][2] = bspl;
                ds.rc[u][3] = ydiff - h * k7[u] - bspl;
                ds.rc[u][4] = h * (d1 * k1[u] + d3 * k3[u] + d4 * k4[u] + d5 * k5[u] +
                                   d6 * k6[u] + d7 * k7[u]);
            }
            table.steps.push_back(ds);
            table.ends.push_back(r + h);
            r += h;
            y = y1;
            k1 = k7;  // first-same-as-last
            if (!(std::abs(y[0]) < 1e290))
                throw IntegrationError("solve_psi: psi overflow (reduce r_max)", r);
        }
        const real factor = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h *= factor;
        if (!(h > r * std::numeric_limits<real>::epsilon() * 4.0) && r < r_max)
            throw IntegrationError("solve_psi: step size underflow", r);
    }
    table.ends.back() = r_max;  // guard against roundoff drift
    return table;
}

/// integral_0^inf dt / (A cosh t + B sinh t) for A > 0, B > 0.
inline real inv_cosh_sinh_tail(real A, real B) {
    if (!(A > 0.0) || !(B > 0.0))
        throw NonIntegrableError("tail estimate requires positive psi and dpsi at r_max");
    if (B > A) {
        const real m = std::sqrt((B - A) / (B + A));
        return 2.0 * std::atanh(m) / std::sqrt((B - A) * (B + A));
    }
    if (A > B) {
        const real m = std::sqrt((A - B) / (A + B));
        return 2.0 * std::atan(m) / std::sqrt((A - B) * (A + B));
    }
    return 1.0 / A;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ManifoldModel: immutable bundle (psi, dpsi, ddpsi) + curvature source.
// Copies share the underlying dense table; all evaluation is re-entrant.
// ---------------------------------------------------------------------------
class ManifoldModel {
  public:
    ManifoldModel(Dimension dim, CurvatureProfile source, real r_max, bool closed_form,
                  std::shared_ptr<const detail::PsiTable> table)
        : dim_(dim),
          source_(std::move(source)),
          r_max_(r_max),
          closed_form_(closed_form),
          table_(std::move(table)) {}

    Dimension dim() const { return dim_; }
    const CurvatureProfile& source() const { return source_; }
    bool closed_form() const { return closed_form_; }
    real r_max() const { return r_max_; }

    real psi(real r) const {
        if (closed_form_) {
            switch (source_.kind()) {
                case CurvatureProfile::Kind::zero:
                    return r;
                case CurvatureProfile::Kind::constant: {
                    const real q = std::sqrt(source_.constant_value());
                    return std::sinh(q * r) / q;
                }
                default:
                    break;
            }
        }
        return table_->eval(r)[0];
    }

    real dpsi(real r) const {
        if (closed_form_) {
            switch (source_.kind()) {
                case CurvatureProfile::Kind::zero:
                    return 1.0;
                case CurvatureProfile::Kind::constant:
                    return std::cosh(std::sqrt(source_.constant_value()) * r);
                default:
                    break;
            }
        }
        return table_->eval(r)[1];
    }

    /// psi'' recovered through the ODE as G * psi (exact, no numerical differentiation).
    real ddpsi(real r) const { return source_(r) * psi(r); }

    /// psi^{N-1}, the radial volume density.
    real measure(real r) const {
        const real p = psi(r);
        real out = 1.0;
        for (int k = 0; k + 1 < dim_.value(); ++k) out *= p;
        return out;
    }

    /// (r psi'/psi - 1)/r^2, series-stable for the closed forms.
    real g_like(real r) const {
        if (closed_form_) {
            switch (source_.kind()) {
                case CurvatureProfile::Kind::zero:
                    return 0.0;
                case CurvatureProfile::Kind::constant: {
                    const real c = source_.constant_value();
                    return c * g_func(std::sqrt(c) * r);
                }
                default:
                    break;
            }
        }
        const auto v = table_->eval(r);
        return (r * v[1] / v[0] - 1.0) / (r * r);
    }

    RadialProfile psi_profile() const {
        auto self = *this;
        return RadialProfile([self](real r) { return self.psi(r); }, 0.0,
                             AsymptoticClass::custom, false);
    }
    RadialProfile dpsi_profile() const {
        auto self = *this;
        return RadialProfile([self](real r) { return self.dpsi(r); }, 0.0,
                             AsymptoticClass::custom, false);
    }
    RadialProfile ddpsi_profile() const {
        auto self = *this;
        return RadialProfile([self](real r) { return self.ddpsi(r); }, 0.0,
                             AsymptoticClass::custom, false);
    }

  private:
    Dimension dim_;
    CurvatureProfile source_;
    real r_max_;
    bool closed_form_;
    std::shared_ptr<const detail::PsiTable> table_;
};

/// Solve psi'' = G psi, psi(0) = 0, psi'(0) = 1 on (0, r_max]. Closed forms are
/// used for the zero and constant kinds unless force_numeric is set.
inline ManifoldModel solve_psi(Dimension dim, const CurvatureProfile& curv, real r_max,
                               real tol = 1e-10, bool force_numeric = false) {
    if (!(r_max > 0.0)) throw std::domain_error("solve_psi: need r_max > 0");
    const bool closed = !force_numeric && (curv.kind() == CurvatureProfile::Kind::zero ||
                                           curv.kind() == CurvatureProfile::Kind::constant);
    std::shared_ptr<const detail::PsiTable> table;
    if (!closed)
        table = std::make_shared<const detail::PsiTable>(detail::integrate_psi(curv, r_max, tol));
    return ManifoldModel(dim, curv, r_max, closed, std::move(table));
}

namespace detail {

struct TailInfo {
    real value, error;
};

/// integral_{r_max}^inf psi^{-1}: continue the solution with G frozen at G(r_max),
/// which gives psi(r_max + t) = A cosh(q t) + (B/q) sinh(q t) exactly under that
/// extension; exact for the constant kind, conservative bracket otherwise.
inline TailInfo theta_tail(const ManifoldModel& m) {
    const real q2 = m.source()(m.r_max());
    if (!(q2 > 0.0))
        throw NonIntegrableError("theta: curvature vanishes at r_max; 1/psi tail not certified");
    const real q = std::sqrt(q2);
    const real A = m.psi(m.r_max());
    const real B = m.dpsi(m.r_max()) / q;
    const real t = inv_cosh_sinh_tail(A, B) / q;
    switch (m.source().kind()) {
        case CurvatureProfile::Kind::constant:
            return {t, 4.0 * std::numeric_limits<real>::epsilon() * t};
        default:
            return {t, t};  // conservative: count the whole tail as uncertainty
    }
}

}  // namespace detail

/// Theta(r) = 1 / integral_r^inf ds/psi(s).
inline real theta(const ManifoldModel& model, real r) {
    if (!(r > 0.0)) throw std::domain_error("theta: need r > 0");
    if (model.source().kind() == CurvatureProfile::Kind::zero)
        throw NonIntegrableError("theta: 1/psi is not integrable for the flat model");
    constexpr real kGrowthMargin = 0.02;
    if (!(model.dpsi(model.r_max()) > 1.0 + kGrowthMargin))
        throw NonIntegrableError("theta: dpsi(r_max) too close to 1; integrability not certified");
    const detail::TailInfo tail = detail::theta_tail(model);
    const real rmax = model.r_max();
    const real rr = std::min(r, rmax);
    const auto result = detail::adaptive_gk([&model](real s) { return 1.0 / model.psi(s); }, rr,
                                            rmax, 1e-13, 1e-12);
    const real total = result.value + tail.value;
    if (!(total > 0.0)) throw NonIntegrableError("theta: degenerate integral");
    return 1.0 / total;
}

inline RadialProfile theta_profile(const ManifoldModel& model) {
    auto m = model;
    return RadialProfile([m](real r) { return theta(m, r); }, 0.0, AsymptoticClass::custom,
                         false);
}

/// U_psi = (N-2)^2/4 * (psi'^2 - 1)/psi^2 + (N-2)/2 * psi''/psi.
inline RadialProfile u_psi(const ManifoldModel& model) {
    const auto n = static_cast<real>(model.dim().value());
    const real c1 = (n - 2.0) * (n - 2.0) / 4.0;
    const real c2 = (n - 2.0) / 2.0;
    auto m = model;
    auto eval = [m, c1, c2](real r) {
        const real p = m.psi(r), dp = m.dpsi(r);
        return c1 * (dp * dp - 1.0) / (p * p) + c2 * m.source()(r);
    };
    AsymptoticClass cls = AsymptoticClass::custom;
    if (model.source().kind() == CurvatureProfile::Kind::zero ||
        model.source().kind() == CurvatureProfile::Kind::constant)
        cls = AsymptoticClass::constant;
    const bool singular = model.source().kind() == CurvatureProfile::Kind::power &&
                          model.source().power_exponent() < 0.0;
    return RadialProfile(std::move(eval), 0.0, cls, singular);
}

/// V_psi^lambda = (N-1+g)/2 * psi''/psi + g(g+1)/2 * (r psi'/psi - 1)/r^2
///              + (N-1+g)(N-3-g)/4 * (psi'/psi)^2,   g = gamma_n(lambda).
inline RadialProfile v_psi_lambda(const ManifoldModel& model, real lambda) {
    const auto n = static_cast<real>(model.dim().value());
    const real gamma = gamma_n(model.dim(), lambda);
    const real cg = gamma * (gamma + 1.0) / 2.0;
    const real c_ode = (n - 1.0 + gamma) / 2.0;
    const real c_ratio = (n - 1.0 + gamma) * (n - 3.0 - gamma) / 4.0;
    auto m = model;
    auto eval = [m, cg, c_ode, c_ratio](real r) {
        const real ratio = m.dpsi(r) / m.psi(r);
        return c_ode * m.source()(r) + cg * m.g_like(r) + c_ratio * ratio * ratio;
    };
    const bool singular = c_ratio != 0.0 ||
                          (model.source().kind() == CurvatureProfile::Kind::power &&
                           model.source().power_exponent() < 0.0);
    return RadialProfile(std::move(eval), 0.0, AsymptoticClass::custom, singular);
}

/// W-tilde = 1/4 * (psi(r)^{1-N} / integral_r^inf psi^{1-N})^2.
inline real w_tilde(const ManifoldModel& model, real r) {
    if (!(r > 0.0)) throw std::domain_error("w_tilde: need r > 0");
    const auto n = static_cast<real>(model.dim().value());
    if (model.source().kind() == CurvatureProfile::Kind::zero && model.closed_form()) {
        if (model.dim().value() < 3)
            throw NonIntegrableError("w_tilde: flat model needs N >= 3");
        const real c = (n - 2.0) * (n - 2.0) / 4.0;
        return c / (r * r);
    }
    constexpr real kGrowthMargin = 0.02;
    if (!(model.dpsi(model.r_max()) > 1.0 + kGrowthMargin))
        throw NonIntegrableError("w_tilde: dpsi(r_max) too close to 1; integrability not certified");
    const real q2 = model.source()(model.r_max());
    if (!(q2 > 0.0))
        throw NonIntegrableError("w_tilde: curvature vanishes at r_max; tail not certified");
    const real rmax = model.r_max();
    auto integrand = [&model, n](real s) {
        return std::exp((1.0 - n) * std::log(model.psi(s)));
    };
    const real rr = std::min(r, rmax);
    const auto body = detail::adaptive_gk(integrand, rr, rmax, 1e-300, 1e-11);
    // Tail bracket under the frozen-G extension: the local log-slope kappa and the
    // asymptotic slope q bound psi between A e^{q t} and A e^{kappa t}.
    const real A = model.psi(rmax);
    const real kappa = model.dpsi(rmax) / A;
    const real q = std::sqrt(q2);
    const real a1nk = integrand(rmax);
    const real lo = a1nk / ((n - 1.0) * std::max(kappa, q));
    const real hi = a1nk / ((n - 1.0) * std::min(kappa, q));
    const real total = body.value + 0.5 * (lo + hi);
    if (!(total > 0.0)) throw NonIntegrableError("w_tilde: degenerate integral");
    const real ratio = integrand(r) / total;
    return 0.25 * ratio * ratio;
}

inline RadialProfile w_tilde_profile(const ManifoldModel& model) {
    auto m = model;
    return RadialProfile([m](real r) { return w_tilde(m, r); }, 0.0,
                         AsymptoticClass::inverse_r2, true);
}

/// g_c(r) = (sqrt(c) r coth(sqrt(c) r) - 1)/r^2 = c * g(sqrt(c) r).
inline real g_scaled(real c, real r) {
    if (!(c >= 0.0)) throw std::domain_error("g_scaled: need c >= 0");
    if (c == 0.0) return 0.0;
    return c * g_func(std::sqrt(c) * r);
}

}  // namespace hardylab
