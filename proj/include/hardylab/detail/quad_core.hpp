#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "../types.hpp"

namespace hardylab::detail {

// Gauss-Kronrod 7-15 abscissae/weights on [-1, 1] (positive half; QUADPACK dqk15).
inline constexpr std::array<real, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<real, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<real, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
    real kronrod, kronrod_abs, error;
};

template <class F>
PanelResult gk15_panel(const F& f, real a, real b) {
    const real c = 0.5 * (a + b), h = 0.5 * (b - a);
    const real fc = f(c);
    real resk = kWgk[7] * fc;
    real reska = kWgk[7] * std::abs(fc);
    real resg = kWg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const auto u = static_cast<std::size_t>(j);
        const real x = h * kXgk[u];
        const real f1 = f(c - x), f2 = f(c + x);
        resk += kWgk[u] * (f1 + f2);
        reska += kWgk[u] * (std::abs(f1) + std::abs(f2));
        if (j % 2 == 1) resg += kWg[static_cast<std::size_t>(j / 2)] * (f1 + f2);
    }
    return {resk * h, reska * h, std::abs((resk - resg) * h)};
}

struct QuadResult {
    real value = 0.0;
    real error = 0.0;
    real abs_value = 0.0;  // integral of |f|, for scale-aware stopping
};

/// Globally adaptive GK15 bisection. Stops when the summed error estimate is
/// below max(abs_tol, rel_tol * integral of |f|) — the relative criterion keys
/// on the integrand's scale, so cancelling integrands still terminate.
template <class F>
QuadResult adaptive_gk(const F& f, real a, real b, real abs_tol, real rel_tol,
                       int max_panels = 4000) {
    struct Panel {
        real a, b, value, abs_value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };
    if (!(b > a)) return {0.0, 0.0, 0.0};

    std::priority_queue<Panel> heap;
    // Seed with several panels so features away from the midpoint are seen.
    const int seed = 8;
    real total = 0.0, total_abs = 0.0, err = 0.0;
    for (int i = 0; i < seed; ++i) {
        const real lo = a + (b - a) * i / seed, hi = a + (b - a) * (i + 1) / seed;
        const PanelResult p = gk15_panel(f, lo, hi);
        heap.push({lo, hi, p.kronrod, p.kronrod_abs, p.error});
        total += p.kronrod;
        total_abs += p.kronrod_abs;
        err += p.error;
    }
    int panels = seed;
    const auto target = [&] { return std::max(abs_tol, rel_tol * total_abs); };
    while (err > target() && panels < max_panels) {
        const Panel worst = heap.top();
        heap.pop();
        const real mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {  // interval at roundoff floor
            heap.push(worst);
            break;
        }
        const PanelResult l = gk15_panel(f, worst.a, mid);
        const PanelResult r = gk15_panel(f, mid, worst.b);
        total += l.kronrod + r.kronrod - worst.value;
        total_abs += l.kronrod_abs + r.kronrod_abs - worst.abs_value;
        err += l.error + r.error - worst.error;
        heap.push({worst.a, mid, l.kronrod, l.kronrod_abs, l.error});
        heap.push({mid, worst.b, r.kronrod, r.kronrod_abs, r.error});
        ++panels;
    }
    if (err > target() && panels >= max_panels) {
        const auto& worst = heap.top();
        throw QuadratureError("adaptive_gk: panel budget exhausted", worst.a, worst.b);
    }
    return {total, err, total_abs};
}

}  // namespace hardylab::detail
