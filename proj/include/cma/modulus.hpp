#pragma once

// Moduli of continuity as piecewise-linear concave polylines, the empirical
// modulus of a grid field, its least concave majorant (upper hull), and
// C_omega-class membership constants.  All pairwise scans measure distances
// between closure positions (Boundary nodes sit at their anchors), so fields
// are treated as functions on the closed domain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "grid.hpp"
#include "sampling.hpp"

namespace cma {

struct ModulusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ModulusOfContinuity {
  public:
    // Breakpoints (r, w) with r strictly increasing from (0,0); the polyline
    // must be nondecreasing and concave.  Constant extension past the last r.
    explicit ModulusOfContinuity(std::vector<std::pair<double, double>> pts)
        : bp(std::move(pts)) {
        if (bp.empty() || bp.front().first != 0.0 || bp.front().second != 0.0)
            throw ModulusError("modulus: breakpoints must start at (0,0)");
        for (std::size_t i = 1; i < bp.size(); ++i) {
            if (!(bp[i].first > bp[i - 1].first))
                throw ModulusError("modulus: radii must be strictly increasing");
            if (bp[i].second < bp[i - 1].second - 1e-12)
                throw ModulusError("modulus: values must be nondecreasing");
        }
        // Concavity: slopes nonincreasing (tolerate tiny FP slack).
        for (std::size_t i = 2; i < bp.size(); ++i) {
            double s1 = slope(i - 1), s2 = slope(i);
            if (s2 > s1 + 1e-9 * (1.0 + std::fabs(s1)))
                throw ModulusError("modulus: polyline is not concave");
        }
    }

    const std::vector<std::pair<double, double>>& breakpoints() const { return bp; }

    double operator()(double r) const { return eval(r); }

    double eval(double r) const {
        if (r < 0) throw ModulusError("modulus eval: negative radius");
        if (r == 0.0) return 0.0;
        if (r >= bp.back().first) return bp.back().second;
        // bp.front() is (0,0), so r lands strictly inside some segment.
        auto it = std::upper_bound(bp.begin(), bp.end(), r,
                                   [](double x, const std::pair<double, double>& p) {
                                       return x < p.first;
                                   });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        double t = (r - lo.first) / (hi.first - lo.first);
        return lo.second + t * (hi.second - lo.second);
    }

  private:
    std::vector<std::pair<double, double>> bp;

    double slope(std::size_t i) const {
        return (bp[i].second - bp[i - 1].second) / (bp[i].first - bp[i - 1].first);
    }
};

// t^eps sampled on a fixed 64-point half-octave grid (factor sqrt(2) spacing
// keeps the chord error under 1% for every eps in (0,1]).
inline ModulusOfContinuity holder_modulus(double eps) {
    if (!(eps > 0.0) || eps > 1.0)
        throw ModulusError("holder_modulus: exponent must lie in (0,1]");
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    for (int k = 0; k < 64; ++k) {
        double r = std::pow(2.0, 0.5 * k - 16.0);
        pts.emplace_back(r, std::pow(r, eps));
    }
    return ModulusOfContinuity(std::move(pts));
}

inline ModulusOfContinuity identity_modulus() {
    return ModulusOfContinuity({{0.0, 0.0}, {1 << 15, 1 << 15}});
}

// Least concave majorant of nondecreasing samples (r_i, s_i): the upper
// concave hull through (0,0), with collinear vertices merged.
inline ModulusOfContinuity least_concave_majorant(
    const std::vector<std::pair<double, double>>& samples) {
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    for (const auto& s : samples) {
        if (s.second < 0) throw ModulusError("least_concave_majorant: negative sample");
        if (s.first <= 0) {
            if (std::fabs(s.second) > 1e-15)
                throw ModulusError("least_concave_majorant: nonzero sample at r = 0");
            continue;
        }
        pts.push_back(s);
    }
    std::sort(pts.begin(), pts.end());
    // Monotone-chain upper hull: pop while the middle point lies on or below
    // the segment joining its neighbors.
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : pts) {
        if (!hull.empty() && p.first == hull.back().first) {
            if (p.second <= hull.back().second) continue;
            hull.pop_back();
        }
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull.back();
            double cross = (b.first - a.first) * (p.second - a.second) -
                           (b.second - a.second) * (p.first - a.first);
            // Keep b only if it is strictly above the chord a--p.
            if (cross >= -1e-12 * (1.0 + std::fabs(p.second)) * (p.first - a.first))
                hull.pop_back();
            else
                break;
        }
        hull.push_back(p);
    }
    return ModulusOfContinuity(std::move(hull));
}

// ---------------------------------------------------------------------------
// Deterministic pair scans over non-Exterior nodes.

struct PairBudget {
    std::size_t exhaustive_limit = 3000;  // all pairs when node count <= this
    std::size_t structured_ops = 50000000;  // node x offset enumeration budget
    std::size_t random_pairs = 200000;      // Weyl supplement for long range
};

namespace detail {

// Visit deterministic node pairs (flat indices, unordered).  Exhaustive on
// small grids; otherwise every node paired with its lattice neighbors out to
// a budget-determined offset radius, plus a quasi-random long-range stream.
template <typename F>
void for_each_pair(const GridDomain& g, const PairBudget& budget, F&& fn) {
    std::vector<std::int64_t> nodes;
    nodes.reserve(g.interior_list.size() + g.boundary_list.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.classes[i] != NodeClass::Exterior) nodes.push_back(static_cast<std::int64_t>(i));

    const std::size_t m = nodes.size();
    if (m < 2) return;

    if (m <= budget.exhaustive_limit) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) fn(nodes[i], nodes[j]);
        return;
    }

    // Offset reach: largest box half-width w with (2w+1)^dims * m within budget.
    int w = 1;
    int w_cap = *std::max_element(g.npts.begin(), g.npts.end());
    auto box_count = [&](int hw) {
        double c = 1;
        for (int d = 0; d < g.dims; ++d) c *= 2.0 * hw + 1.0;
        return c;
    };
    while (w < w_cap && box_count(w + 1) * static_cast<double>(m) <=
                            static_cast<double>(budget.structured_ops))
        ++w;

    // Lexicographically-positive offsets only (each unordered pair once).
    std::vector<std::array<int, 4>> offs;
    std::array<int, 4> off{0, 0, 0, 0};
    std::function<void(int, bool)> rec = [&](int d, bool positive_seen) {
        if (d == g.dims) {
            if (positive_seen) offs.push_back(off);
            return;
        }
        int lo = positive_seen ? -w : 0;  // leading components must be >= 0
        for (int s = lo; s <= w; ++s) {
            off[d] = s;
            rec(d + 1, positive_seen || s > 0);
        }
        off[d] = 0;
    };
    rec(0, false);

    for (std::int64_t a : nodes) {
        for (const auto& o : offs) {
            std::int64_t b = g.neighbor(a, o);
            if (b >= 0 && g.node_class(b) != NodeClass::Exterior) fn(a, b);
        }
    }

    WeylPairSampler sampler(m);
    for (std::size_t k = 0; k < budget.random_pairs; ++k) {
        auto [i, j] = sampler.next();
        if (i == j) continue;
        fn(nodes[i], nodes[j]);
    }
}

}  // namespace detail

// Radii grid used when the caller does not supply one: every attained pair
// distance on exhaustive grids, otherwise dyadic multiples of h.
inline std::vector<double> default_radius_grid(const ScalarField& rho,
                                               const PairBudget& budget = {}) {
    const GridDomain& g = *rho.dom;
    std::size_t count = g.interior_list.size() + g.boundary_list.size();
    if (count <= budget.exhaustive_limit) {
        std::set<std::int64_t> quant;
        std::vector<double> out;
        detail::for_each_pair(g, budget, [&](std::int64_t a, std::int64_t b) {
            double d = dist(g.closure_position(a), g.closure_position(b), g.dims);
            auto q = static_cast<std::int64_t>(std::llround(d / 1e-9));
            if (quant.insert(q).second) out.push_back(d);
        });
        std::sort(out.begin(), out.end());
        return out;
    }
    std::vector<double> out;
    double diam = g.diameter_hull();
    for (double r = g.h; r < diam * 2; r *= 2) out.push_back(r);
    return out;
}

// Empirical modulus samples: for each radius r in the grid, the max of
// |rho(x)-rho(y)| over scanned pairs with closure distance <= r (cumulative,
// hence nondecreasing by construction).
inline std::vector<std::pair<double, double>> empirical_modulus(
    const ScalarField& rho, const std::vector<double>& r_grid,
    const PairBudget& budget = {}) {
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        if (!(r_grid[i] > 0)) throw ModulusError("empirical_modulus: radii must be positive");
        if (i > 0 && !(r_grid[i] > r_grid[i - 1]))
            throw ModulusError("empirical_modulus: radii must be increasing");
    }
    const GridDomain& g = *rho.dom;
    std::vector<double> bucket(r_grid.size(), 0.0);
    detail::for_each_pair(g, budget, [&](std::int64_t a, std::int64_t b) {
        double d = dist(g.closure_position(a), g.closure_position(b), g.dims);
        auto it = std::lower_bound(r_grid.begin(), r_grid.end(), d - 1e-12);
        if (it == r_grid.end()) return;
        double v = std::fabs(rho[a] - rho[b]);
        std::size_t k = static_cast<std::size_t>(it - r_grid.begin());
        if (v > bucket[k]) bucket[k] = v;
    });
    std::vector<std::pair<double, double>> out(r_grid.size());
    double run = 0.0;
    for (std::size_t k = 0; k < r_grid.size(); ++k) {
        run = std::max(run, bucket[k]);
        out[k] = {r_grid[k], run};
    }
    return out;
}

struct ComegaResult {
    double C = 0.0;   // least constant over the scanned pairs
    bool within = true;  // C <= C_max
    double worst_dist = 0.0;
};

// Least C with |psi(x)-psi(y)| <= C * omega(|x-y|) over the deterministic
// pair scan.  Uses the same scan as empirical_modulus, so a field tested
// against (the hull of) its own empirical modulus yields C <= 1.
inline ComegaResult comega_membership(const ScalarField& psi, const ModulusOfContinuity& omega,
                                      const PairBudget& budget = {},
                                      double C_max = std::numeric_limits<double>::infinity()) {
    const GridDomain& g = *psi.dom;
    ComegaResult res;
    detail::for_each_pair(g, budget, [&](std::int64_t a, std::int64_t b) {
        double d = dist(g.closure_position(a), g.closure_position(b), g.dims);
        if (d < 1e-14) return;
        double w = omega.eval(d);
        if (!(w > 0)) throw ModulusError("comega_membership: omega vanishes at attained distance");
        double ratio = std::fabs(psi[a] - psi[b]) / w;
        if (ratio > res.C) {
            res.C = ratio;
            res.worst_dist = d;
        }
    });
    res.within = res.C <= C_max;
    return res;
}

// Two-column CSV of breakpoints.
inline void write_modulus_csv(std::ostream& os, const ModulusOfContinuity& omega) {
    char buf[64];
    os << "r,omega\n";
    for (const auto& p : omega.breakpoints()) {
        std::snprintf(buf, sizeof buf, "%.17g", p.first);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", p.second);
        os << buf << '\n';
    }
}

}  // namespace cma
