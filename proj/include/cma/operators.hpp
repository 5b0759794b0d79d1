#pragma once

// Discrete complex Hessian, the pointwise Monge-Ampere density with the
// A_n = 4^n n! normalization, and the clamped wide-stencil variant whose
// minimum over unitary frames is monotone in the center value.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "grid.hpp"
#include "hermitian.hpp"

namespace cma {

inline double ma_normalization(int n) {
    double a = 1;
    for (int k = 1; k <= n; ++k) a *= 4.0 * k;  // 4^n * n!
    return a;
}

// Complex direction vector in C^n (n <= 2) and its real displacement.
using CVec = std::array<Complex, 2>;

inline Point real_displacement(const CVec& v, int n, double scale) {
    Point p{0, 0, 0, 0};
    for (int j = 0; j < n; ++j) {
        p[2 * j] = scale * v[j].real();
        p[2 * j + 1] = scale * v[j].imag();
    }
    return p;
}

inline CVec times_i(const CVec& v) {
    return {Complex{0, 1} * v[0], Complex{0, 1} * v[1]};
}

struct Frame {
    std::array<CVec, 2> vecs;  // first n entries used
};

// All unitary frames whose first vector is a normalized nonzero integer
// complex direction with coordinates in [-r, r], deduplicated modulo the
// units {1, i, -1, -i} and positive scaling, each completed deterministically
// by Gram-Schmidt against the canonical basis.
class FrameSet {
  public:
    FrameSet(int n_, int r_) : n(n_), r(r_) {
        if (n < 1 || n > 2) throw GridError("FrameSet: complex dimension must be 1 or 2");
        if (r < 1) throw GridError("FrameSet: lattice radius must be >= 1");
        build();
    }

    int n, r;
    std::vector<Frame> frames;
    std::vector<CVec> directions;  // distinct direction classes (frame firsts)

  private:
    void build() {
        std::vector<CVec> dirs;
        auto seen = std::vector<std::array<std::int64_t, 4>>{};
        auto canonical_key = [&](CVec v) {
            // Normalize, rotate by the unit that puts the first nonzero
            // component's argument into [0, pi/2), then quantize.
            double norm = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
            for (int j = 0; j < n; ++j) v[j] /= norm;
            Complex lead{0, 0};
            for (int j = 0; j < n; ++j)
                if (std::abs(v[j]) > 1e-12) { lead = v[j]; break; }
            Complex unit{1, 0};
            for (int q = 0; q < 4; ++q) {
                Complex c = unit * lead;
                if (c.real() > 1e-12 && c.imag() > -1e-12) break;
                unit *= Complex{0, 1};
            }
            std::array<std::int64_t, 4> key{0, 0, 0, 0};
            for (int j = 0; j < n; ++j) {
                Complex c = unit * v[j];
                key[2 * j] = std::llround(c.real() * 1e9);
                key[2 * j + 1] = std::llround(c.imag() * 1e9);
            }
            return key;
        };

        const int R = r;
        std::array<int, 4> c{0, 0, 0, 0};
        std::function<void(int)> rec = [&](int d) {
            if (d == 2 * n) {
                bool zero = true;
                for (int k = 0; k < 2 * n; ++k)
                    if (c[k] != 0) { zero = false; break; }
                if (zero) return;
                CVec w{Complex{0, 0}, Complex{0, 0}};
                for (int j = 0; j < n; ++j) w[j] = Complex(c[2 * j], c[2 * j + 1]);
                auto key = canonical_key(w);
                for (const auto& k : seen)
                    if (k == key) return;
                seen.push_back(key);
                double norm = std::sqrt(std::norm(w[0]) + std::norm(w[1]));
                for (int j = 0; j < n; ++j) w[j] /= norm;
                dirs.push_back(w);
                return;
            }
            for (int s = -R; s <= R; ++s) { c[d] = s; rec(d + 1); }
            c[d] = 0;
        };
        rec(0);

        // Put the canonical coordinate direction first for determinism.
        std::stable_sort(dirs.begin(), dirs.end(), [](const CVec& a, const CVec& b) {
            auto score = [](const CVec& v) {
                return -(std::fabs(v[0].real()));  // e1-like first
            };
            return score(a) < score(b);
        });

        for (const auto& v : dirs) {
            Frame f;
            f.vecs[0] = v;
            if (n == 2) {
                // Gram-Schmidt the first canonical vector not parallel to v.
                CVec w{Complex{0, 0}, Complex{0, 0}};
                for (int cand = 0; cand < 2; ++cand) {
                    CVec e{Complex{0, 0}, Complex{0, 0}};
                    e[cand] = Complex{1, 0};
                    Complex proj = std::conj(v[0]) * e[0] + std::conj(v[1]) * e[1];
                    CVec res{e[0] - proj * v[0], e[1] - proj * v[1]};
                    double norm = std::sqrt(std::norm(res[0]) + std::norm(res[1]));
                    if (norm > 1e-6) {
                        w = {res[0] / norm, res[1] / norm};
                        break;
                    }
                }
                f.vecs[1] = w;
            }
            frames.push_back(f);
            directions.push_back(v);
        }
    }
};

// d^2u/dz_p dzbar_q via second-order central differences.
inline HermitianForm complex_hessian(const ScalarField& u, std::int64_t node) {
    const GridDomain& g = *u.dom;
    if (g.node_class(node) != NodeClass::Interior)
        throw GridError("complex_hessian: node is not Interior");
    const double h2 = g.h * g.h;
    auto at = [&](int dx0, int dx1, int dx2, int dx3) {
        std::array<int, 4> off{dx0, dx1, dx2, dx3};
        std::int64_t j = g.neighbor(node, off);
        if (j < 0 || g.node_class(j) == NodeClass::Exterior)
            throw GridError("complex_hessian: stencil touches an Exterior node");
        return u[j];
    };
    double center = u[node];
    // Real-coordinate second partials on dims d, e.
    auto second = [&](int d, int e) {
        std::array<int, 4> op{0, 0, 0, 0}, om{0, 0, 0, 0};
        if (d == e) {
            op[d] = 1;
            om[d] = -1;
            return (at(op[0], op[1], op[2], op[3]) - 2.0 * center +
                    at(om[0], om[1], om[2], om[3])) /
                   h2;
        }
        std::array<int, 4> pp{0, 0, 0, 0}, mm{0, 0, 0, 0}, pm{0, 0, 0, 0}, mp{0, 0, 0, 0};
        pp[d] = 1; pp[e] = 1;
        mm[d] = -1; mm[e] = -1;
        pm[d] = 1; pm[e] = -1;
        mp[d] = -1; mp[e] = 1;
        return (at(pp[0], pp[1], pp[2], pp[3]) + at(mm[0], mm[1], mm[2], mm[3]) -
                at(pm[0], pm[1], pm[2], pm[3]) - at(mp[0], mp[1], mp[2], mp[3])) /
               (4.0 * h2);
    };
    HermitianForm H(g.n);
    for (int p = 0; p < g.n; ++p) {
        for (int q = 0; q < g.n; ++q) {
            int xp = 2 * p, yp = 2 * p + 1, xq = 2 * q, yq = 2 * q + 1;
            double re = 0.25 * (second(xp, xq) + second(yp, yq));
            double im = 0.25 * (second(xp, yq) - second(yp, xq));
            H.at(p, q) = Complex{re, im};
        }
    }
    H.symmetrize();
    return H;
}

inline double ma_pointwise(const ScalarField& u, std::int64_t node) {
    return ma_normalization(u.dom->n) * complex_hessian(u, node).det();
}

// [u(z+hv)+u(z-hv)+u(z+ihv)+u(z-ihv)-4u(z)]/(4h^2); off-lattice samples by
// multilinear interpolation.  Exact equal to v* H_C(u) v on real quadratics
// when the samples are lattice points.
inline double directional_second_difference(const ScalarField& u, std::int64_t node,
                                            const CVec& v) {
    const GridDomain& g = *u.dom;
    if (g.node_class(node) != NodeClass::Interior)
        throw GridError("directional_second_difference: node is not Interior");
    Point z = g.position(node);
    const CVec iv = times_i(v);
    double s = 0;
    for (const CVec* dir : {&v, &iv}) {
        for (double sign : {1.0, -1.0}) {
            Point p = z;
            Point d = real_displacement(*dir, g.n, sign * g.h);
            for (int k = 0; k < g.dims; ++k) p[k] += d[k];
            s += interpolate(u, p);
        }
    }
    return (s - 4.0 * u[node]) / (4.0 * g.h * g.h);
}

// A_n * min over frames of prod_j max(directional difference, 0): the
// monotone wide-stencil Monge-Ampere density.
inline double ma_monotone(const ScalarField& u, std::int64_t node, const FrameSet& frames) {
    const GridDomain& g = *u.dom;
    double best = std::numeric_limits<double>::infinity();
    for (const Frame& f : frames.frames) {
        double prod = 1.0;
        for (int j = 0; j < g.n; ++j)
            prod *= std::max(directional_second_difference(u, node, f.vecs[j]), 0.0);
        best = std::min(best, prod);
    }
    return ma_normalization(g.n) * best;
}

}  // namespace cma
