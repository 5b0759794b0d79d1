#pragma once

// Discrete plurisubharmonicity diagnostics: eigenvalue reports, the
// uniformly-strictly-psh test (complex Hessian >= identity), barrier
// construction and verification, the smallest psh-restoring multiple of a
// defining function, and mollification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "grid.hpp"
#include "operators.hpp"

namespace cma {

enum class NodeSet {
    AllInterior,   // every Interior node
    DeepInterior,  // Interior nodes whose full stencil neighborhood is Interior
};

inline bool is_deep_interior(const GridDomain& g, std::int64_t node) {
    if (g.node_class(node) != NodeClass::Interior) return false;
    for (const auto& off : g.offsets) {
        std::int64_t j = g.neighbor(node, off);
        if (j < 0 || g.node_class(j) != NodeClass::Interior) return false;
    }
    return true;
}

struct PshReport {
    std::int64_t violating_node_count = 0;
    double worst_eigenvalue = std::numeric_limits<double>::infinity();
    std::int64_t worst_node = -1;
    std::vector<std::int64_t> violating_nodes;  // capped
    std::int64_t nodes_checked = 0;

    bool clean() const { return violating_node_count == 0; }
};

inline PshReport psh_report(const ScalarField& u, double tol,
                            NodeSet set = NodeSet::AllInterior,
                            std::size_t keep_violators = 1u << 20) {
    const GridDomain& g = *u.dom;
    PshReport rep;
    rep.worst_eigenvalue = std::numeric_limits<double>::infinity();
    for (std::int64_t node : g.interior_list) {
        if (set == NodeSet::DeepInterior && !is_deep_interior(g, node)) continue;
        ++rep.nodes_checked;
        double ev = complex_hessian(u, node).min_eigenvalue();
        if (ev < rep.worst_eigenvalue) {
            rep.worst_eigenvalue = ev;
            rep.worst_node = node;
        }
        if (ev < -tol) {
            ++rep.violating_node_count;
            if (rep.violating_nodes.size() < keep_violators) rep.violating_nodes.push_back(node);
        }
    }
    if (rep.nodes_checked == 0) rep.worst_eigenvalue = 0.0;
    return rep;
}

// Hessian-minus-identity report: rho is uniformly strictly psh iff
// rho - |z|^2 is psh, i.e. H_C(rho) >= I.  Expects a plain-sampled rho.
inline PshReport uniformly_strictly_psh_report(const ScalarField& rho, double tol,
                                               NodeSet set = NodeSet::AllInterior) {
    const GridDomain& g = *rho.dom;
    ScalarField diff = rho;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.classes[i] != NodeClass::Exterior)
            diff.v[i] -= norm2(g.position(static_cast<std::int64_t>(i)), g.dims);
    return psh_report(diff, tol, set);
}

inline bool uniformly_strictly_psh(const ScalarField& rho, double tol,
                                   NodeSet set = NodeSet::AllInterior) {
    return uniformly_strictly_psh_report(rho, tol, set).clean();
}

// v_zeta(z) = -|z - zeta|^2 + rho(z).  The distance term is evaluated at
// closure positions so the field represents a function on the closed domain;
// pass rho sampled the same way (sample_anchored) for consistent values.
inline ScalarField barrier(const ScalarField& rho, const Point& zeta) {
    const GridDomain& g = *rho.dom;
    double f_at = std::fabs(g.defining_fn(zeta));
    if (f_at > 1e-6)
        throw GridError("barrier: point is not on the defining function's zero set");
    ScalarField v(rho.dom);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.classes[i] == NodeClass::Exterior) continue;
        auto node = static_cast<std::int64_t>(i);
        Point p = g.closure_position(node);
        double d2 = 0;
        for (int d = 0; d < g.dims; ++d) d2 += (p[d] - zeta[d]) * (p[d] - zeta[d]);
        v.v[i] = -d2 + rho[node];
    }
    return v;
}

struct BarrierReport {
    bool value_at_zeta_ok = false;
    double value_at_zeta = 0.0;
    double nearest_node_dist = 0.0;
    bool negative_away = false;
    double sup_away = 0.0;
    bool psh_ok = false;
    double worst_eigenvalue = 0.0;
    bool pass() const { return value_at_zeta_ok && negative_away && psh_ok; }
};

// Strong-barrier test: v vanishes at zeta (limit along the grid), stays
// strictly negative on the closure outside B(zeta, delta), and is psh on the
// deep interior (shallow nodes mix anchored and lattice positions, so the
// central-difference Hessian is only meaningful one stencil layer in).
inline BarrierReport verify_barrier(const ScalarField& v, const Point& zeta, double delta,
                                    double psh_tol = 1e-8) {
    const GridDomain& g = *v.dom;
    if (!(delta > 2 * g.h)) throw GridError("verify_barrier: delta must exceed 2h");
    BarrierReport rep;

    double best = std::numeric_limits<double>::infinity();
    std::int64_t nearest = -1;
    double sup_away = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.classes[i] == NodeClass::Exterior) continue;
        auto node = static_cast<std::int64_t>(i);
        double d = dist(g.closure_position(node), zeta, g.dims);
        if (d < best) {
            best = d;
            nearest = node;
        }
        if (d >= delta) sup_away = std::max(sup_away, v[node]);
    }
    rep.nearest_node_dist = best;
    rep.value_at_zeta = nearest >= 0 ? v[nearest] : 0.0;
    rep.value_at_zeta_ok = std::fabs(rep.value_at_zeta) <= std::max(1e-8, 10.0 * best);
    rep.sup_away = sup_away;
    rep.negative_away = sup_away < 0.0;

    PshReport psh = psh_report(v, psh_tol, NodeSet::DeepInterior);
    rep.psh_ok = psh.clean();
    rep.worst_eigenvalue = psh.worst_eigenvalue;
    return rep;
}

// Smallest K on {0, 2^-4 doubling..., then bisection to relative width 1e-3}
// with psi + K*rho psh at tolerance 1e-8 everywhere Interior.  The returned
// constant is always one that passed the test.
inline double find_psh_K(const ScalarField& psi, const ScalarField& rho, double K_max,
                         double tol = 1e-8) {
    psi.check_same(rho);
    auto clean = [&](double K) {
        ScalarField w = psi;
        for (std::size_t i = 0; i < w.v.size(); ++i) w.v[i] += K * rho.v[i];
        return psh_report(w, tol).clean();
    };
    if (clean(0.0)) return 0.0;
    double lo = 0.0, hi = 1.0 / 16.0;
    bool found = false;
    while (hi <= K_max * (1 + 1e-12)) {
        if (clean(hi)) {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if (!found) {
        ScalarField w = psi;
        for (std::size_t i = 0; i < w.v.size(); ++i) w.v[i] += K_max * rho.v[i];
        PshReport rep = psh_report(w, tol);
        std::ostringstream msg;
        msg << "find_psh_K: no constant <= " << K_max << " works; worst eigenvalue "
            << rep.worst_eigenvalue << " at node " << rep.worst_node;
        throw GridError(msg.str());
    }
    while (hi - lo > 1e-3 * hi) {
        double mid = 0.5 * (lo + hi);
        if (clean(mid)) hi = mid;
        else            lo = mid;
    }
    return hi;
}

// Convolution with the normalized bump (1 - (r/eps)^2)^3 truncated to the
// lattice; nodes whose eps-ball leaves the non-Exterior hull keep their
// original value.
inline ScalarField mollify(const ScalarField& u, double eps) {
    const GridDomain& g = *u.dom;
    if (eps < g.h) throw GridError("mollify: radius must be at least h");
    int w = static_cast<int>(std::floor(eps / g.h));
    std::vector<std::array<int, 4>> offs;
    std::vector<double> weights;
    double wsum = 0;
    std::array<int, 4> off{0, 0, 0, 0};
    std::function<void(int)> rec = [&](int d) {
        if (d == g.dims) {
            double r2 = 0;
            for (int k = 0; k < g.dims; ++k) r2 += (off[k] * g.h) * (off[k] * g.h);
            double t = 1.0 - r2 / (eps * eps);
            if (t <= 0) return;
            offs.push_back(off);
            weights.push_back(t * t * t);
            wsum += t * t * t;
            return;
        }
        for (int s = -w; s <= w; ++s) { off[d] = s; rec(d + 1); }
        off[d] = 0;
    };
    rec(0);
    for (double& x : weights) x /= wsum;

    ScalarField out = u;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.classes[i] == NodeClass::Exterior) continue;
        auto node = static_cast<std::int64_t>(i);
        double acc = 0;
        bool ok = true;
        for (std::size_t k = 0; k < offs.size(); ++k) {
            std::int64_t j = g.neighbor(node, offs[k]);
            if (j < 0 || g.node_class(j) == NodeClass::Exterior) {
                ok = false;
                break;
            }
            acc += weights[k] * u[j];
        }
        if (ok) out.v[i] = acc;
    }
    return out;
}

}  // namespace cma
