#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "manifold.hpp"
#include "quadrature.hpp"
#include "types.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Grids: piecewise-linear conforming elements on [a, R], Dirichlet at R,
// Dirichlet at a when a > 0 and natural when a = 0.  Graded grids place a
// geometric section near a (spacing ~ a/10 there) and a uniform section
// toward R, so both the r~0 singularity and the far field refine under M.
// ---------------------------------------------------------------------------
struct RadialGrid {
    enum class Grading { uniform, geometric };

    std::vector<real> nodes;  // includes both endpoints a and R
    real a = 0.0, R = 0.0;
    Grading grading = Grading::uniform;
    real q = 1.0;  // geometric ratio of the graded section

    int cells() const { return static_cast<int>(nodes.size()) - 1; }

    static RadialGrid uniform_grid(real a, real R, int cells) {
        check_params(a, R, cells);
        RadialGrid g;
        g.a = a;
        g.R = R;
        g.grading = Grading::uniform;
        g.nodes.resize(static_cast<std::size_t>(cells) + 1);
        for (int i = 0; i <= cells; ++i)
            g.nodes[static_cast<std::size_t>(i)] = a + (R - a) * i / cells;
        g.nodes.front() = a;
        g.nodes.back() = R;
        return g;
    }

    static RadialGrid graded_grid(real a, real R, int cells) {
        check_params(a, R, cells);
        if (!(a > 0.0)) throw std::domain_error("RadialGrid: graded grid needs a > 0");
        const real s = std::min(1.0, R / 4.0);
        if (a >= 0.5 * s) return uniform_grid(a, R, cells);
        const int k_log = std::max(16, cells / 4);
        const int k_uni = cells - k_log;
        if (k_uni < 8) throw std::domain_error("RadialGrid: too few cells for grading");
        RadialGrid g;
        g.a = a;
        g.R = R;
        g.grading = Grading::geometric;
        g.q = std::pow(s / a, 1.0 / k_log);
        g.nodes.reserve(static_cast<std::size_t>(cells) + 1);
        for (int i = 0; i <= k_log; ++i)
            g.nodes.push_back(a * std::pow(s / a, static_cast<real>(i) / k_log));
        for (int j = 1; j <= k_uni; ++j)
            g.nodes.push_back(s + (R - s) * j / k_uni);
        g.nodes.front() = a;
        g.nodes.back() = R;
        return g;
    }

  private:
    static void check_params(real a, real R, int cells) {
        if (!(a >= 0.0) || !(R > a)) throw std::domain_error("RadialGrid: need 0 <= a < R");
        if (cells < 16) throw std::domain_error("RadialGrid: need at least 16 cells");
    }
};

// ---------------------------------------------------------------------------
// Discretized pencil: energy = stiffness - lambda * mass (- folded potential),
// mass_weight = weighted mass; both symmetric tridiagonal over the free DOFs.
// ---------------------------------------------------------------------------
struct DiscretizedForms {
    std::vector<real> energy_d, energy_e;  // diagonal, sub/super-diagonal
    std::vector<real> weight_d, weight_e;  // weighted mass
    std::vector<real> mass_d, mass_e;      // plain mass (diagnostics)
    RadialGrid grid;
    real lambda = 0.0;
    std::string weight_tag;
    bool include_left = false;  // DOF at node 0 (natural boundary when a == 0)

    int n_dof() const { return static_cast<int>(energy_d.size()); }
    int node_of_dof(int i) const { return include_left ? i : i + 1; }
};

/// Assemble P1 elements with 4-point Gauss per element against psi^{N-1} dr.
/// energy = integral (u'v' - lambda uv - [potential] uv) psi^{N-1};
/// mass_weight = integral weight uv psi^{N-1}.
inline DiscretizedForms assemble(const ManifoldModel& model, const RadialGrid& grid, real lambda,
                                 const RadialProfile& weight,
                                 const RadialProfile* potential = nullptr) {
    // 4-point Gauss-Legendre on [-1, 1].
    static constexpr real gx[4] = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
    static constexpr real gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                   0.3478548451374538};

    const int n_nodes = static_cast<int>(grid.nodes.size());
    const int n_cells = n_nodes - 1;
    DiscretizedForms F;
    F.grid = grid;
    F.lambda = lambda;
    F.include_left = (grid.a == 0.0);

    // Assemble over all nodes first, then restrict to free DOFs.
    std::vector<real> Ed(static_cast<std::size_t>(n_nodes), 0.0),
        Ee(static_cast<std::size_t>(n_cells), 0.0), Wd = Ed, We = Ee, Md = Ed, Me = Ee;

    for (int c = 0; c < n_cells; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const real rl = grid.nodes[cu], rr = grid.nodes[cu + 1];
        const real h = rr - rl;
        real k_el = 0.0;                      // integral psi^{N-1} over the element
        real m00 = 0, m01 = 0, m11 = 0;       // plain mass block
        real w00 = 0, w01 = 0, w11 = 0;       // weighted mass block
        real p00 = 0, p01 = 0, p11 = 0;       // potential block
        for (int g = 0; g < 4; ++g) {
            const real t = 0.5 * (gx[g] + 1.0);  // in (0,1)
            const real r = rl + h * t;
            const real mu = model.measure(r);
            if (!std::isfinite(mu))
                throw std::overflow_error(
                    "assemble: psi^{N-1} overflows on the grid; reduce R or N");
            const real wq = 0.5 * h * gw[g] * mu;
            const real phiL = 1.0 - t, phiR = t;
            k_el += wq;
            m00 += wq * phiL * phiL;
            m01 += wq * phiL * phiR;
            m11 += wq * phiR * phiR;
            const real wv = weight(r);
            if (!(wv > 0.0) || !std::isfinite(wv))
                throw std::domain_error("assemble: weight must be positive and finite on the grid");
            w00 += wv * wq * phiL * phiL;
            w01 += wv * wq * phiL * phiR;
            w11 += wv * wq * phiR * phiR;
            if (potential) {
                const real pv = (*potential)(r);
                if (!std::isfinite(pv))
                    throw std::domain_error("assemble: potential not finite on the grid");
                p00 += pv * wq * phiL * phiL;
                p01 += pv * wq * phiL * phiR;
                p11 += pv * wq * phiR * phiR;
            }
        }
        const real stiff = k_el / (h * h);
        Ed[cu] += stiff - lambda * m00 - p00;
        Ed[cu + 1] += stiff - lambda * m11 - p11;
        Ee[cu] += -stiff - lambda * m01 - p01;
        Wd[cu] += w00;
        Wd[cu + 1] += w11;
        We[cu] += w01;
        Md[cu] += m00;
        Md[cu + 1] += m11;
        Me[cu] += m01;
    }

    // Restrict: drop the last node (Dirichlet at R) and, unless natural at a,
    // the first node as well.
    const int lo = F.include_left ? 0 : 1;
    const int hi = n_nodes - 2;  // last free node index
    if (hi < lo + 1) throw std::domain_error("assemble: no interior degrees of freedom");
    for (int i = lo; i <= hi; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        F.energy_d.push_back(Ed[iu]);
        F.weight_d.push_back(Wd[iu]);
        F.mass_d.push_back(Md[iu]);
        if (i < hi) {
            F.energy_e.push_back(Ee[iu]);
            F.weight_e.push_back(We[iu]);
            F.mass_e.push_back(Me[iu]);
        }
    }
    return F;
}

// ---------------------------------------------------------------------------
// Symmetric tridiagonal generalized eigensolver: Sturm bisection + inverse
// iteration on the pencil (K, M), deterministic throughout.
// ---------------------------------------------------------------------------
namespace detail {

/// Number of eigenvalues of the pencil strictly below sigma (LDL^T sign count).
inline int sturm_count(const std::vector<real>& kd, const std::vector<real>& ke,
                       const std::vector<real>& md, const std::vector<real>& me, real sigma,
                       real pivmin) {
    const std::size_t n = kd.size();
    int cnt = 0;
    real d = kd[0] - sigma * md[0];
    if (std::abs(d) < pivmin) d = -pivmin;
    if (d < 0.0) ++cnt;
    for (std::size_t i = 1; i < n; ++i) {
        const real e = ke[i - 1] - sigma * me[i - 1];
        d = (kd[i] - sigma * md[i]) - e * e / d;
        if (std::abs(d) < pivmin) d = -pivmin;
        if (d < 0.0) ++cnt;
    }
    return cnt;
}

/// Solve (K - sigma M) x = b by LDL^T (valid when the shifted pencil is
/// positive definite, i.e. sturm_count(sigma) == 0).
inline void ldlt_solve(const std::vector<real>& kd, const std::vector<real>& ke,
                       const std::vector<real>& md, const std::vector<real>& me, real sigma,
                       real pivmin, std::vector<real>& x) {
    const std::size_t n = kd.size();
    std::vector<real> d(n), l(n > 0 ? n - 1 : 0);
    d[0] = kd[0] - sigma * md[0];
    if (std::abs(d[0]) < pivmin) d[0] = pivmin;
    for (std::size_t i = 1; i < n; ++i) {
        const real e = ke[i - 1] - sigma * me[i - 1];
        l[i - 1] = e / d[i - 1];
        d[i] = (kd[i] - sigma * md[i]) - l[i - 1] * e;
        if (std::abs(d[i]) < pivmin) d[i] = pivmin;
    }
    for (std::size_t i = 1; i < n; ++i) x[i] -= l[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i) x[i] /= d[i];
    for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= l[i - 1] * x[i];
}

inline void tri_mul(const std::vector<real>& d, const std::vector<real>& e,
                    const std::vector<real>& x, std::vector<real>& y) {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
        real v = d[i] * x[i];
        if (i > 0) v += e[i - 1] * x[i - 1];
        if (i + 1 < n) v += e[i] * x[i + 1];
        y[i] = v;
    }
}

/// |A||x| per row: the scale against which a residual is a backward error.
inline void tri_mul_abs(const std::vector<real>& d, const std::vector<real>& e,
                        const std::vector<real>& x, std::vector<real>& y) {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
        real v = std::abs(d[i] * x[i]);
        if (i > 0) v += std::abs(e[i - 1] * x[i - 1]);
        if (i + 1 < n) v += std::abs(e[i] * x[i + 1]);
        y[i] = v;
    }
}

inline real dot(const std::vector<real>& a, const std::vector<real>& b) {
    real s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline real norm2(const std::vector<real>& a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

struct QuotientEstimate {
    real value = 0.0;
    int cells = 0;
    real R = 0.0, a = 0.0;
    std::string grading;
    std::vector<real> eigenvector;   // DOF values, unit weighted mass, positive sign
    std::vector<real> eigen_nodes;   // node radii matching eigenvector entries
    real extrapolated = 0.0;
    real error_estimate = 0.0;
};

/// Smallest mu with  energy x = mu mass_weight x, plus its eigenvector.
inline QuotientEstimate bottom_eigenpair(const DiscretizedForms& F) {
    const std::size_t n = F.energy_d.size();
    if (n == 0) throw std::domain_error("bottom_eigenpair: empty pencil");

    // Diagonal congruence rescaling (row/col i divided by sqrt(M_ii)): the
    // eigenvalues and Sturm counts of the pencil are invariant, while the
    // dynamic range collapses from measure-factor scale (e^{(N-1)R}) to
    // O(1/h^2), so the quadratic forms below stay clear of overflow.
    std::vector<real> dsc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const real mdi = F.weight_d[i];
        if (mdi > 0.0 && std::isfinite(mdi))
            dsc[i] = 1.0 / std::sqrt(mdi);
        else if (std::abs(F.energy_d[i]) > 0.0 && std::isfinite(F.energy_d[i]))
            dsc[i] = 1.0 / std::sqrt(std::abs(F.energy_d[i]));
        else
            dsc[i] = 1.0;
    }
    std::vector<real> kd(n), md(n), ke(n ? n - 1 : 0), me(n ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
        kd[i] = F.energy_d[i] * dsc[i] * dsc[i];
        md[i] = F.weight_d[i] * dsc[i] * dsc[i];
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        ke[i] = F.energy_e[i] * dsc[i] * dsc[i + 1];
        me[i] = F.weight_e[i] * dsc[i] * dsc[i + 1];
    }

    real scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        scale = std::max({scale, std::abs(kd[i]), std::abs(md[i])});
    const real pivmin = scale * 1e-280 + 1e-300;

    // Bracket the bottom eigenvalue by Sturm counts alone.  Rayleigh quotients
    // of trial vectors are useless as initial bounds here: in the rescaled
    // pencil their scale reflects stiffness rows, not the bottom eigenvalue.
    const auto count_at = [&](real s) {
        return detail::sturm_count(kd, ke, md, me, s, pivmin);
    };
    real lo, hi;
    if (count_at(0.0) == 0) {
        lo = 0.0;
        hi = 1.0;
        while (count_at(hi) < 1) {
            lo = hi;
            hi *= 2.0;
            if (!std::isfinite(hi))
                throw ConvergenceError("bottom_eigenpair: no finite upper bracket", hi, 0.0);
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        while (count_at(lo) > 0) {
            hi = lo;
            lo *= 2.0;
            if (!std::isfinite(lo))
                throw ConvergenceError("bottom_eigenpair: pencil unbounded below", lo, 0.0);
        }
    }
    // Bisect to relative width 1e-12 of the current bracket magnitude; the
    // tolerance is recomputed as the bracket shrinks, so a huge initial upper
    // bound cannot freeze the bisection at a huge absolute width.
    for (;;) {
        const real width_tol =
            std::max(1e-12 * std::max(std::abs(lo), std::abs(hi)), 1e-300);
        if (!(hi - lo > width_tol)) break;
        const real mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        if (count_at(mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    const real mid = 0.5 * (lo + hi);

    // The bracket (count(lo) = 0, count(hi) >= 1) certifies the eigenvalue;
    // inverse iteration at sigma = lo only has to supply the eigenvector.
    real sigma = lo;
    std::vector<real> x(n, 1.0 / std::sqrt(static_cast<real>(n))), y(n), Kx(n), Mx(n);
    int bad_solves = 0;
    for (int it = 0; it < 40; ++it) {
        y = x;
        detail::ldlt_solve(kd, ke, md, me, sigma, pivmin, y);
        const real nrm = detail::norm2(y);
        if (!(nrm > 0.0) || !std::isfinite(nrm)) {
            // Solve hit a rounding-singular factorization: nudge the shift
            // further below the bracket and retry.
            if (++bad_solves > 3)
                throw ConvergenceError("bottom_eigenpair: inverse iteration broke down", mid,
                                       0.0);
            sigma -= std::max(4.0 * (hi - lo), 1e-9 * std::max(std::abs(mid), 1.0));
            continue;
        }
        real inv = 1.0 / nrm;
        if (detail::dot(x, y) < 0.0) inv = -inv;
        real change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const real yi = y[i] * inv;
            change = std::max(change, std::abs(yi - x[i]));
            x[i] = yi;
        }
        if (change <= 1e-10 && it > 0) break;
    }
    // Rayleigh quotient of the final vector, as a cross-check on the bracket.
    detail::tri_mul(kd, ke, x, Kx);
    detail::tri_mul(md, me, x, Mx);
    const real den = detail::dot(x, Mx);
    if (!(den > 0.0))
        throw ConvergenceError("bottom_eigenpair: indefinite weighted mass", mid, 0.0);
    real ray = detail::dot(x, Kx) / den;
    if (!std::isfinite(ray)) ray = mid;

    real s = 1.0 / std::sqrt(den);
    real pos = 0.0;
    for (const real v : x) pos += v;
    if (pos < 0.0) s = -s;
    for (auto& v : x) v *= s;
    // Undo the congruence scaling: nodal values of the FEM eigenfunction.
    for (std::size_t i = 0; i < n; ++i) x[i] *= dsc[i];

    QuotientEstimate est;
    est.value = mid;
    est.cells = F.grid.cells();
    est.R = F.grid.R;
    est.a = F.grid.a;
    est.grading = F.grid.grading == RadialGrid::Grading::uniform ? "uniform" : "geometric";
    est.eigenvector = std::move(x);
    est.eigen_nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        est.eigen_nodes.push_back(F.grid.nodes[static_cast<std::size_t>(
            F.node_of_dof(static_cast<int>(i)))]);
    est.extrapolated = mid;
    est.error_estimate = (hi - lo) + std::abs(ray - mid);
    return est;
}

/// Rayleigh quotient of nodal values interpolated on the DOFs (diagnostics).
inline real rayleigh_quotient(const DiscretizedForms& F, const std::vector<real>& dof_values) {
    if (dof_values.size() != static_cast<std::size_t>(F.n_dof()))
        throw std::domain_error("rayleigh_quotient: size mismatch");
    std::vector<real> t(dof_values.size());
    detail::tri_mul(F.energy_d, F.energy_e, dof_values, t);
    const real num = detail::dot(dof_values, t);
    detail::tri_mul(F.weight_d, F.weight_e, dof_values, t);
    const real den = detail::dot(dof_values, t);
    if (!(den > 0.0)) throw std::domain_error("rayleigh_quotient: nonpositive denominator");
    return num / den;
}

// ---------------------------------------------------------------------------
// (M, R) ladder extrapolation: Richardson in h = 1/M per R (order 2), then a
// model-selected limit in R (geometric via Aitken when the decay ratio is
// clearly geometric, otherwise an algebraic 1/R^2 two-point limit).
// ---------------------------------------------------------------------------
inline QuotientEstimate extrapolate(const std::vector<QuotientEstimate>& estimates) {
    if (estimates.size() < 2) throw std::domain_error("extrapolate: need at least 2 estimates");
    std::map<real, std::vector<std::pair<int, const QuotientEstimate*>>> by_R;
    for (const auto& e : estimates) by_R[e.R].push_back({e.cells, &e});
    if (by_R.size() < 2) throw std::domain_error("extrapolate: need at least 2 values of R");

    std::vector<real> Rs, vals;
    real h_residual = 0.0, solver_err = 0.0;
    const QuotientEstimate* best_raw = nullptr;
    for (auto& [R, list] : by_R) {
        std::sort(list.begin(), list.end(),
                  [](const auto& p, const auto& q) { return p.first < q.first; });
        if (list.size() < 2) throw std::domain_error("extrapolate: need >= 2 mesh levels per R");
        const auto rich = [](const std::pair<int, const QuotientEstimate*>& A,
                             const std::pair<int, const QuotientEstimate*>& B) {
            const real ratio = static_cast<real>(B.first) / static_cast<real>(A.first);
            return B.second->value + (B.second->value - A.second->value) / (ratio * ratio - 1.0);
        };
        const std::size_t m = list.size();
        const real mu_R = rich(list[m - 2], list[m - 1]);
        if (m >= 3) h_residual = std::max(h_residual, std::abs(mu_R - rich(list[m - 3], list[m - 2])));
        Rs.push_back(R);
        vals.push_back(mu_R);
        solver_err = std::max(solver_err, list[m - 1].second->error_estimate);
        best_raw = list[m - 1].second;
    }

    const std::size_t k = Rs.size();
    const real v_last = vals[k - 1], v_prev = vals[k - 2];
    real limit;
    bool flagged = false;
    const real tol_band = 4.0 * (h_residual + solver_err) + 1e-13 * std::abs(v_last);
    if (v_last > v_prev + tol_band) {
        // Dirichlet bracketing says larger R cannot raise the bottom: flag and
        // fall back to the most trustworthy raw value with an inflated bar.
        flagged = true;
        limit = std::min(v_last, v_prev);
    } else if (k >= 3 &&
               std::abs((Rs[k - 1] - Rs[k - 2]) - (Rs[k - 2] - Rs[k - 3])) <
                   1e-9 * (Rs[k - 1] - Rs[k - 2])) {
        const real d1 = vals[k - 2] - vals[k - 3];
        const real d2 = v_last - v_prev;
        const real qr = (std::abs(d1) > 0.0) ? d2 / d1 : 0.0;
        if (qr > 1e-14 && qr < 0.1) {
            limit = v_last + d2 * qr / (1.0 - qr);  // Aitken (geometric tail)
        } else {
            const real R1 = Rs[k - 2], R2 = Rs[k - 1];
            limit = (R2 * R2 * v_last - R1 * R1 * v_prev) / (R2 * R2 - R1 * R1);
        }
    } else {
        const real R1 = Rs[k - 2], R2 = Rs[k - 1];
        limit = (R2 * R2 * v_last - R1 * R1 * v_prev) / (R2 * R2 - R1 * R1);
    }

    QuotientEstimate out = *best_raw;  // carries eigenvector of the finest solve
    out.value = v_last;
    out.extrapolated = limit;
    out.error_estimate = 0.5 * std::abs(v_last - v_prev) + h_residual + solver_err;
    if (flagged) out.error_estimate = 5.0 * (std::abs(v_last - v_prev) + h_residual + solver_err);
    return out;
}

/// Bottom of (u'^2 - lambda u^2 - potential u^2) / u^2 on [a, R], Dirichlet ends.
inline QuotientEstimate operator_bottom(const ManifoldModel& model, real lambda,
                                        const RadialProfile& potential, real a, real R,
                                        int cells = 2000) {
    const RadialGrid grid = (a > 0.0) ? RadialGrid::graded_grid(a, R, cells)
                                      : RadialGrid::uniform_grid(a, R, cells);
    const DiscretizedForms F =
        assemble(model, grid, lambda, constant_profile(1.0), &potential);
    return bottom_eigenpair(F);
}

}  // namespace hardylab
