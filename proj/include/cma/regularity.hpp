#pragma once

// Quantitative regularity machinery for solved envelopes: the explicit
// constants of the translation-function argument, the construction and
// verification of the shifted competitors v_tau and their Walsh gluings, the
// boundary and global modulus bounds, empirical Holder-exponent fitting, and
// the extraction of a defining function from the solution with boundary data
// -|z|^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "grid.hpp"
#include "modulus.hpp"
#include "operators.hpp"
#include "psh.hpp"
#include "sampling.hpp"
#include "solver.hpp"

namespace cma {

// Constant bundle threading the modulus-of-continuity estimate.  K sizes the
// sandwich, K1 the boundary modulus, c_f the modulus constant of f^{1/n},
// C_f the density perturbation constant, and Kp the interior offset that
// makes the shifted competitor drop below u near the overlap rim.
struct RegularityConstants {
    int n = 0;
    double A_n = 0;
    double K = 0;
    double K1 = 0;
    double Kp = 0;
    double c_f = 0;
    double C_f = 0;

    void validate(double max_closure_norm_sq) const {
        if (!(n >= 1 && n <= 3)) throw GridError("constants: dimension out of range");
        if (!(K >= 0 && K1 >= 0 && c_f >= 0))
            throw GridError("constants: negative constant");
        if (!(C_f > 0)) throw GridError("constants: C_f must be positive");
        if (!(Kp > C_f * max_closure_norm_sq))
            throw GridError("constants: interior offset does not dominate C_f sup |z|^2");
        // C_f must strictly exceed every binomial comparison term.
        for (int k = 1; k <= n; ++k) {
            double binom = 1;
            for (int j = 0; j < k; ++j) binom = binom * (n - j) / (j + 1);
            double bound = std::pow(binom, 1.0 / k) * std::pow(ma_normalization(n), -1.0 / n) * c_f;
            if (!(C_f > bound))
                throw GridError("constants: C_f does not strictly dominate the k-th term");
        }
    }
};

// Largest observed ratio |f^{1/n}(x) - f^{1/n}(y)| / omega(|x - y|) over a
// deterministic pair sample, padded 5%.
inline double estimate_cf(const RealFn& f, const ModulusOfContinuity& omega,
                          const GridPtr& dom, std::size_t n_pairs) {
    const GridDomain& g = *dom;
    PairBudget budget;
    budget.random_pairs = n_pairs;
    double inv_n = 1.0 / g.n;
    double worst = 0;
    detail::for_each_pair(g, budget, [&](std::int64_t a, std::int64_t b) {
        Point pa = g.closure_position(a), pb = g.closure_position(b);
        double r = dist(pa, pb, g.dims);
        if (r < 1e-12) return;
        double fa = std::max(f(pa), 0.0), fb = std::max(f(pb), 0.0);
        double num = std::fabs(std::pow(fa, inv_n) - std::pow(fb, inv_n));
        double w = omega.eval(r);
        if (!(w > 0)) throw ModulusError("estimate_cf: omega vanishes at a positive radius");
        worst = std::max(worst, num / w);
    });
    return worst == 0 ? 0.0 : 1.05 * worst;
}

// Density perturbation constant: 1% above the largest binomial comparison
// term; any positive value works when c_f = 0.
inline double compute_Cf(int n, double c_f) {
    if (!(c_f >= 0)) throw GridError("compute_Cf: c_f must be nonnegative");
    if (c_f == 0) return 1e-6;
    double best = 0;
    double binom = 1;
    for (int k = 1; k <= n; ++k) {
        binom = binom * (n - k + 1) / k;  // n choose k
        best = std::max(best, std::pow(binom, 1.0 / k) * c_f);
    }
    return 1.01 * best * std::pow(ma_normalization(n), -1.0 / n);
}

namespace detail {

inline double max_closure_norm_sq(const GridDomain& g) {
    double m = 0;
    for (std::size_t node = 0; node < g.size(); ++node) {
        if (g.node_class(node) == NodeClass::Exterior) continue;
        Point p = g.closure_position(node);
        m = std::max(m, norm2(p, g.dims));
    }
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Boundary modulus and sandwich.

// Smallest padded constant with |u(z) - u(b)| <= K1 omega(|z - b|) over
// node/boundary-node pairs (exhaustive when affordable, otherwise a
// deterministic sample of at least 10^4), after verifying the sandwich
// subsolution <= u <= supersolution nodewise.
inline double verify_boundary_modulus(const ScalarField& u, const DirichletData& data,
                                      const ScalarField& rho, const ModulusOfContinuity& omega) {
    const GridPtr& dom = u.dom;
    const GridDomain& g = *dom;

    Step2Member sub = subsolution(data, rho);
    Step2Member super = supersolution(data, rho);
    double slack = 10.0 * g.h;
    for (std::int64_t node : g.interior_list) {
        if (u[node] < sub.field[node] - slack || u[node] > super.field[node] + slack) {
            std::ostringstream msg;
            msg << "boundary modulus: sandwich violated at node " << node << " (sub "
                << sub.field[node] << ", u " << u[node] << ", super " << super.field[node]
                << ")";
            throw GridError(msg.str());
        }
    }
    for (std::int64_t b : g.boundary_list)
        if (std::fabs(u[b] - data.phi(g.anchor(b))) > slack)
            throw GridError("boundary modulus: boundary trace strays from the data");

    std::vector<std::int64_t> nodes;
    for (std::size_t node = 0; node < g.size(); ++node)
        if (g.node_class(node) != NodeClass::Exterior) nodes.push_back(node);
    const std::vector<std::int64_t>& bdry = g.boundary_list;

    double worst = 0;
    auto consider = [&](std::int64_t z, std::int64_t b) {
        double r = dist(g.closure_position(z), g.closure_position(b), g.dims);
        if (r < 1e-12) return;
        double w = omega.eval(r);
        if (!(w > 0)) throw ModulusError("boundary modulus: omega vanishes at a positive radius");
        worst = std::max(worst, std::fabs(u[z] - u[b]) / w);
    };

    std::size_t total = nodes.size() * bdry.size();
    if (total <= 20000000) {
        for (std::int64_t z : nodes)
            for (std::int64_t b : bdry) consider(z, b);
    } else {
        std::size_t budget = std::max<std::size_t>(10000, total / 1000);
        budget = std::min<std::size_t>(budget, 2000000);
        WeylScalar sx(detail::splitmix64(global_seed() ^ 0x4b31ull));
        WeylScalar sy(detail::splitmix64(global_seed() ^ 0x4b32ull));
        for (std::size_t s = 0; s < budget; ++s) {
            consider(nodes[static_cast<std::size_t>(sx.next() * static_cast<double>(nodes.size()))],
                     bdry[static_cast<std::size_t>(sy.next() * static_cast<double>(bdry.size()))]);
        }
    }
    return 1.05 * worst;
}

// Assemble the full constant bundle from a solve result.
inline RegularityConstants compute_constants(const SolveResult& result,
                                             const DirichletData& data, const ScalarField& rho,
                                             const ModulusOfContinuity& omega,
                                             std::size_t cf_pairs = 200000) {
    const GridDomain& g = *result.u.dom;
    RegularityConstants consts;
    consts.n = g.n;
    consts.A_n = ma_normalization(g.n);
    consts.K = std::max(result.K_sub, result.K_super);
    consts.K1 = verify_boundary_modulus(result.u, data, rho, omega);
    consts.c_f = estimate_cf(data.f, omega, result.u.dom, cf_pairs);
    consts.C_f = compute_Cf(g.n, consts.c_f);
    double mns = detail::max_closure_norm_sq(g);
    consts.Kp = 1.01 * consts.C_f * mns;
    consts.validate(mns);
    return consts;
}

// ---------------------------------------------------------------------------
// Translation competitors.

// A field defined only on the translation overlap: nodes of the closure whose
// shifted position still interpolates inside the closure.
struct OverlapField {
    ScalarField field;
    std::vector<char> valid;  // per flat node
    std::int64_t valid_count = 0;
};

namespace detail {

// Multilinear interpolation of u at p, refusing to touch Exterior corners;
// returns false when p leaves the hull or its cell.
inline bool try_interpolate(const ScalarField& u, const Point& p, double& out) {
    try {
        out = interpolate(u, p);
        return true;
    } catch (const GridError&) {
        return false;
    }
}

}  // namespace detail

// v_tau(z) = u(z + tau) + C_f omega(|tau|) |z|^2 - (K1 + Kp) omega(|tau|),
// defined where z + tau still samples the closure.  Boundary nodes enter
// through their anchors, matching the closure semantics of u.
inline OverlapField build_vtau(const ScalarField& u, const Point& tau,
                               const RegularityConstants& consts,
                               const ModulusOfContinuity& omega) {
    const GridDomain& g = *u.dom;
    double tnorm = 0;
    for (int d = 0; d < g.dims; ++d) tnorm += tau[d] * tau[d];
    tnorm = std::sqrt(tnorm);
    if (tnorm > 4.0 * g.h + 1e-12)
        throw GridError("build_vtau: translation exceeds the 4h trust region");

    OverlapField out{ScalarField(u.dom), std::vector<char>(g.size(), 0), 0};
    if (tnorm == 0) {  // omega(0) = 0 collapses the formula to u itself
        out.field = u;
        for (std::size_t node = 0; node < g.size(); ++node)
            if (g.node_class(node) != NodeClass::Exterior) {
                out.valid[static_cast<std::size_t>(node)] = 1;
                ++out.valid_count;
            }
        return out;
    }

    const double w = omega.eval(tnorm);
    for (std::size_t node = 0; node < g.size(); ++node) {
        if (g.node_class(node) == NodeClass::Exterior) continue;
        Point z = g.closure_position(node);
        Point zs = z;
        for (int d = 0; d < g.dims; ++d) zs[d] += tau[d];
        double shifted;
        if (!detail::try_interpolate(u, zs, shifted)) continue;
        out.field[node] =
            shifted + consts.C_f * w * norm2(z, g.dims) - (consts.K1 + consts.Kp) * w;
        out.valid[static_cast<std::size_t>(node)] = 1;
        ++out.valid_count;
    }
    if (out.valid_count == 0) throw GridError("build_vtau: empty translation overlap");
    return out;
}

// Walsh gluing: max(u, v_tau) on the overlap, u elsewhere.
inline ScalarField glue_Vtau(const ScalarField& u, const OverlapField& vtau) {
    u.check_same(vtau.field);
    ScalarField out = u;
    const GridDomain& g = *u.dom;
    for (std::size_t node = 0; node < g.size(); ++node)
        if (vtau.valid[static_cast<std::size_t>(node)])
            out[node] = std::max(u[node], vtau.field[node]);
    return out;
}

// ---------------------------------------------------------------------------
// Step-3 verification.

struct Step3TauReport {
    Point tau{};
    double tau_norm = 0;
    bool density_ok = false;     // pointwise MA of v_tau >= shifted f
    bool chain_ok = false;       // binomial density chain with c_f, C_f
    bool membership_ok = false;  // glued V_tau stays in the solution family
    bool rim_ok = false;         // v_tau <= u near the overlap rim
    double worst_density_gap = 0;
    double worst_chain_gap = 0;
    double worst_rim_excess = 0;
    std::int64_t worst_density_node = -1, worst_chain_node = -1, worst_rim_node = -1;
    std::int64_t overlap_nodes = 0, checked_nodes = 0;
    MembershipReport membership;
    bool pass() const { return density_ok && chain_ok && membership_ok && rim_ok; }
};

struct Step3Report {
    bool coefficients_ok = false;  // strict k-term domination by C_f
    double tol = 0;
    double rim_tol = 0;
    std::vector<Step3TauReport> taus;
    bool pass() const {
        if (!coefficients_ok) return false;
        for (const auto& t : taus)
            if (!t.pass()) return false;
        return true;
    }
};

inline Step3Report verify_step3(const ScalarField& u, const DirichletData& data,
                                const ScalarField& rho, const ModulusOfContinuity& omega,
                                const std::vector<Point>& tau_list,
                                std::optional<RegularityConstants> consts_in = std::nullopt) {
    const GridPtr& dom = u.dom;
    const GridDomain& g = *dom;

    RegularityConstants consts;
    if (consts_in) {
        consts = *consts_in;
    } else {
        Step2Member sub = subsolution(data, rho);
        Step2Member super = supersolution(data, rho);
        consts.n = g.n;
        consts.A_n = ma_normalization(g.n);
        consts.K = std::max(sub.K, super.K);
        consts.K1 = verify_boundary_modulus(u, data, rho, omega);
        consts.c_f = estimate_cf(data.f, omega, dom, PairBudget{}.random_pairs);
        consts.C_f = compute_Cf(g.n, consts.c_f);
        consts.Kp = 1.01 * consts.C_f * detail::max_closure_norm_sq(g);
        // Only self-computed constants get the sanity screen; caller-supplied
        // ones are taken at face value so that a bad choice shows up as failed
        // checks below rather than as a thrown error.
        consts.validate(detail::max_closure_norm_sq(g));
    }

    ScalarField f_field = ScalarField::sample(dom, data.f);
    double max_f = 0;
    for (std::int64_t node : g.interior_list) max_f = std::max(max_f, f_field[node]);

    Step3Report rep;
    rep.tol = 20.0 * g.h * (1.0 + max_f);
    // Discrete overlap-rim nodes sit within a Moore diameter of the true rim,
    // where u itself may move by its boundary modulus over that distance.
    rep.rim_tol = (consts.K1 + consts.Kp) *
                  omega.eval(4.0 * g.h * std::sqrt(static_cast<double>(g.dims)));

    rep.coefficients_ok = true;
    {
        double binom = 1;
        for (int k = 1; k <= g.n; ++k) {
            binom = binom * (g.n - k + 1) / k;
            double bound =
                std::pow(binom, 1.0 / k) * std::pow(consts.A_n, -1.0 / g.n) * consts.c_f;
            if (!(consts.C_f > bound)) rep.coefficients_ok = false;
        }
    }

    MongeAmpereScheme scheme(dom, data.phi, 1);

    for (const Point& tau : tau_list) {
        Step3TauReport tr;
        tr.tau = tau;
        for (int d = 0; d < g.dims; ++d) tr.tau_norm += tau[d] * tau[d];
        tr.tau_norm = std::sqrt(tr.tau_norm);
        double w = omega.eval(tr.tau_norm);

        OverlapField vtau = build_vtau(u, tau, consts, omega);
        tr.overlap_nodes = vtau.valid_count;

        // (i) and (ii) run where the full second-difference stencil lives in
        // the deep overlap, so no anchored boundary value contaminates the
        // Hessian.
        double worst_density = std::numeric_limits<double>::infinity();
        double worst_chain = std::numeric_limits<double>::infinity();
        for (std::int64_t node : g.interior_list) {
            if (!is_deep_interior(g, node)) continue;
            bool covered = vtau.valid[static_cast<std::size_t>(node)] != 0;
            for (const auto& off : g.offsets) {
                if (!covered) break;
                std::int64_t nb = g.neighbor(node, off);
                covered = nb >= 0 && vtau.valid[static_cast<std::size_t>(nb)] != 0;
            }
            if (!covered) continue;
            ++tr.checked_nodes;

            Point zs = g.position(node);
            for (int d = 0; d < g.dims; ++d) zs[d] += tau[d];
            double f_here = f_field[node];
            double f_shift = std::max(data.f(zs), 0.0);

            double gap = ma_pointwise(vtau.field, node) - f_shift;
            if (gap < worst_density) {
                worst_density = gap;
                tr.worst_density_node = node;
            }

            // Density chain: f(z) <= (f(z+tau)^{1/n} + c_f w)^n <= f(z+tau)
            // plus the A_n-weighted C_f series.
            double mid = std::pow(std::pow(f_shift, 1.0 / g.n) + consts.c_f * w,
                                  static_cast<double>(g.n));
            double series = f_shift;
            for (int k = 1; k <= g.n; ++k)
                series += consts.A_n * std::pow(consts.A_n, static_cast<double>(k) / g.n - 1.0) *
                          std::pow(consts.C_f * w, k) *
                          std::pow(f_shift, static_cast<double>(g.n - k) / g.n);
            double cgap = std::min(mid - f_here, series - mid);
            if (cgap < worst_chain) {
                worst_chain = cgap;
                tr.worst_chain_node = node;
            }
        }
        tr.worst_density_gap = worst_density;
        tr.worst_chain_gap = worst_chain;
        tr.density_ok = tr.checked_nodes > 0 && worst_density >= -rep.tol;
        tr.chain_ok = tr.checked_nodes > 0 && worst_chain >= -rep.tol;

        // Overlap-rim estimate: the competitor must sit below u where the
        // overlap frays (valid nodes with an invalid or off-hull neighbor).
        double worst_rim = -std::numeric_limits<double>::infinity();
        for (std::size_t node = 0; node < g.size(); ++node) {
            if (!vtau.valid[static_cast<std::size_t>(node)]) continue;
            bool rim = false;
            for (const auto& off : g.offsets) {
                std::int64_t nb = g.neighbor(node, off);
                if (nb < 0 || (g.node_class(nb) != NodeClass::Exterior &&
                               !vtau.valid[static_cast<std::size_t>(nb)])) {
                    rim = true;
                    break;
                }
            }
            if (!rim) continue;
            double excess = vtau.field[node] - u[node];
            if (excess > worst_rim) {
                worst_rim = excess;
                tr.worst_rim_node = node;
            }
        }
        tr.worst_rim_excess = worst_rim;
        tr.rim_ok = worst_rim <= rep.rim_tol;

        ScalarField Vtau = glue_Vtau(u, vtau);
        tr.membership = family_membership(Vtau, data, rep.tol, scheme);
        tr.membership_ok = tr.membership.in_family();

        rep.taus.push_back(std::move(tr));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Global modulus.

struct GlobalModulusReport {
    double max_ratio = 0;
    double bound = 0;
    std::size_t pairs = 0;
    bool pass = false;
};

// Largest |u(z') - u(z)| / omega(|z' - z|) over deterministic pairs, against
// the (K1 + Kp)-sized budget with an O(h) discretization allowance.
inline GlobalModulusReport verify_global_modulus(const ScalarField& u,
                                                 const RegularityConstants& consts,
                                                 const ModulusOfContinuity& omega) {
    const GridDomain& g = *u.dom;
    GlobalModulusReport rep;
    PairBudget budget;
    detail::for_each_pair(g, budget, [&](std::int64_t a, std::int64_t b) {
        double r = dist(g.closure_position(a), g.closure_position(b), g.dims);
        if (r < 1e-12) return;
        double w = omega.eval(r);
        if (!(w > 0)) throw ModulusError("global modulus: omega vanishes at a positive radius");
        rep.max_ratio = std::max(rep.max_ratio, std::fabs(u[a] - u[b]) / w);
        ++rep.pairs;
    });
    rep.bound = (consts.K1 + consts.Kp) * (1.0 + 10.0 * g.h);
    rep.pass = rep.max_ratio <= rep.bound;
    return rep;
}

// ---------------------------------------------------------------------------
// Holder fit.

struct HolderFit {
    double eps = 0;       // clamped exponent in (0, 1]
    double C = 0;         // coefficient exp(intercept)
    double residual = 0;  // max |log M - fit|
    double raw_slope = 0; // unclamped least-squares slope
    std::size_t pair_count = 0;
};

// Fits log max|u(x)-u(y)| against log r on cumulative dyadic radii r = h 2^k,
// restricted to the unsaturated range M(r) <= 0.3 osc(u) where the growth
// rate is visible (with the three smallest radii as fallback).
inline HolderFit holder_fit(const ScalarField& u, const PairBudget& budget = {}) {
    const GridDomain& g = *u.dom;
    double diam = g.diameter_hull();
    std::vector<double> radii;
    for (double r = g.h; radii.empty() || radii.back() < diam; r *= 2)
        radii.push_back(std::min(r, diam));

    std::vector<double> maxdev(radii.size(), 0.0);
    std::vector<std::size_t> count(radii.size(), 0);
    HolderFit fit;
    detail::for_each_pair(g, budget, [&](std::int64_t a, std::int64_t b) {
        double r = dist(g.closure_position(a), g.closure_position(b), g.dims);
        if (r < 1e-12) return;
        ++fit.pair_count;
        double dev = std::fabs(u[a] - u[b]);
        auto it = std::lower_bound(radii.begin(), radii.end(), r - 1e-12);
        for (std::size_t k = static_cast<std::size_t>(it - radii.begin()); k < radii.size(); ++k) {
            maxdev[k] = std::max(maxdev[k], dev);
            ++count[k];
        }
    });

    double osc = maxdev.empty() ? 0.0 : maxdev.back();
    if (osc == 0) {  // constant field: degenerate by convention
        fit.eps = 1.0;
        fit.C = 1e-13;
        fit.residual = 0;
        fit.raw_slope = 0;
        return fit;
    }

    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < radii.size(); ++k)
        if (count[k] > 0 && maxdev[k] > 0 && maxdev[k] <= 0.3 * osc) keep.push_back(k);
    if (keep.size() < 3) {
        keep.clear();
        for (std::size_t k = 0; k < radii.size() && keep.size() < 3; ++k)
            if (count[k] > 0 && maxdev[k] > 0) keep.push_back(k);
    }
    if (keep.size() < 3)
        throw GridError("holder_fit: fewer than three usable radii for the log-log fit");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k : keep) {
        double x = std::log(radii[k]);
        double y = std::log(std::max(maxdev[k], 1e-30));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double m = static_cast<double>(keep.size());
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    double intercept = (sy - slope * sx) / m;
    fit.raw_slope = slope;
    fit.eps = std::min(std::max(slope, 1e-6), 1.0);
    fit.C = std::exp(intercept);
    for (std::size_t k : keep) {
        double pred = intercept + slope * std::log(radii[k]);
        fit.residual =
            std::max(fit.residual, std::fabs(std::log(std::max(maxdev[k], 1e-30)) - pred));
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Defining-function extraction (boundary data -|z|^2, zero density).

struct RhoExtractionReport {
    bool interior_negative = false;
    bool boundary_small = false;
    bool psh_ok = false;
    double worst_interior = 0;  // max over Interior of rho_new (want < 0)
    double worst_boundary = 0;  // max over Boundary of |rho_new|
    PshReport psh;              // of rho_new - |z|^2 = u, on deep nodes
    int sweeps = 0;
    bool pass() const { return interior_negative && boundary_small && psh_ok; }
};

inline std::pair<ScalarField, RhoExtractionReport> defining_function_from_solution(
    const GridPtr& dom, const ScalarField& rho_ref, const SolveConfig& cfg = {}) {
    const GridDomain& g = *dom;
    DirichletData data{[&g](const Point& p) { return -norm2(p, g.dims); },
                       [](const Point&) { return 0.0; }, std::nullopt};
    SolveResult R = solve(dom, data, rho_ref, cfg);

    ScalarField rho_new(dom);
    for (std::size_t node = 0; node < g.size(); ++node) {
        if (g.node_class(node) == NodeClass::Exterior) continue;
        rho_new[node] = R.u[node] + norm2(g.closure_position(node), g.dims);
    }

    RhoExtractionReport rep;
    rep.sweeps = R.sweeps;
    double tol = 10.0 * g.h;
    double worst_int = -std::numeric_limits<double>::infinity();
    for (std::int64_t node : g.interior_list) worst_int = std::max(worst_int, rho_new[node]);
    rep.worst_interior = worst_int;
    rep.interior_negative = worst_int < 0;
    double worst_b = 0;
    for (std::int64_t b : g.boundary_list) worst_b = std::max(worst_b, std::fabs(rho_new[b]));
    rep.worst_boundary = worst_b;
    rep.boundary_small = worst_b <= tol;
    // rho_new - |z|^2 is u itself; its plurisubharmonicity is checked away
    // from the rim, where the anchored boundary values would pollute the
    // central Hessian.
    rep.psh = psh_report(R.u, tol, NodeSet::DeepInterior);
    rep.psh_ok = rep.psh.clean();
    return {std::move(rho_new), rep};
}

}  // namespace cma
