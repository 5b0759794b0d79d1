#pragma once

// Uniform lattice discretization of a bounded domain in C^n (n = 1 or 2),
// identified with R^{2n}.  A GridDomain classifies lattice nodes against an
// analytic defining function and carries, for every Boundary node, an anchor
// point on the zero set of that defining function.  ScalarField holds one
// double per non-Exterior node.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cma {

// Real coordinates (x1, y1, x2, y2); only the first 2n entries are used.
using Point = std::array<double, 4>;

using DefiningFn = std::function<double(const Point&)>;
using RealFn = std::function<double(const Point&)>;

enum class NodeClass : std::uint8_t { Exterior = 0, Boundary = 1, Interior = 2 };

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Offsets of the full classification/stencil neighborhood: every nonzero
// offset in {-1,0,1}^{2n}.  This covers axis neighbors, the diagonal corners
// of the mixed second-difference stencils and every multilinear interpolation
// corner of points within distance h of a node.
inline std::vector<std::array<int, 4>> moore_offsets(int dims) {
    std::vector<std::array<int, 4>> out;
    std::array<int, 4> off{0, 0, 0, 0};
    std::function<void(int)> rec = [&](int d) {
        if (d == dims) {
            for (int k = 0; k < dims; ++k)
                if (off[k] != 0) { out.push_back(off); return; }
            return;  // skip the zero offset
        }
        for (int s = -1; s <= 1; ++s) { off[d] = s; rec(d + 1); }
        off[d] = 0;
    };
    rec(0);
    return out;
}

// Bisect fn along [a, b] assuming fn(a) and fn(b) straddle zero; returns a
// point where |fn| <= 1e-12 * scale (or the midpoint after 200 halvings).
inline Point bisect_zero(const DefiningFn& fn, Point a, double fa, Point b, double fb,
                         int dims) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0))
        throw GridError("boundary anchor: segment does not bracket a sign change");
    const double scale = std::max({1.0, std::fabs(fa), std::fabs(fb)});
    Point mid = a;
    for (int it = 0; it < 200; ++it) {
        for (int d = 0; d < dims; ++d) mid[d] = 0.5 * (a[d] + b[d]);
        double fm = fn(mid);
        if (std::fabs(fm) <= 1e-12 * scale) return mid;
        if ((fm > 0) == (fa > 0)) { a = mid; fa = fm; }
        else                      { b = mid; fb = fm; }
    }
    return mid;
}

}  // namespace detail

class GridDomain {
  public:
    // Classify every lattice node of the axis-aligned box [lo, hi]^{2n} with
    // spacing h against `fn` (< 0 inside).  Nodes with fn >= 0 adjacent to an
    // inside node become Boundary carriers; inside nodes whose stencil would
    // leave the lattice or touch an Exterior node are reclassified Boundary.
    GridDomain(int n_, DefiningFn fn, Point lo_, Point hi_, double h_)
        : n(n_), dims(2 * n_), h(h_), lo(lo_), hi(hi_), defining_fn(std::move(fn)) {
        if (n != 1 && n != 2) throw GridError("GridDomain: complex dimension must be 1 or 2");
        if (!(h > 0)) throw GridError("GridDomain: spacing must be positive");
        std::size_t total = 1;
        for (int d = 0; d < dims; ++d) {
            if (!(hi[d] > lo[d])) throw GridError("GridDomain: empty bounding box");
            npts[d] = static_cast<int>(std::floor((hi[d] - lo[d]) / h + 1e-9)) + 1;
            total *= static_cast<std::size_t>(npts[d]);
        }
        stride[0] = 1;
        for (int d = 1; d < 4; ++d) stride[d] = stride[d - 1] * (d <= dims - 1 ? npts[d - 1] : 1);
        classes.assign(total, NodeClass::Exterior);
        fn_values.resize(total);
        offsets = detail::moore_offsets(dims);

        // Pass 1: sign scan.
        std::vector<std::uint8_t> inside(total, 0);
        for (std::size_t i = 0; i < total; ++i) {
            fn_values[i] = defining_fn(position(static_cast<std::int64_t>(i)));
            inside[i] = fn_values[i] < 0.0 ? 1 : 0;
        }

        // Pass 2: nonnegative nodes adjacent to an inside node carry boundary data.
        for (std::size_t i = 0; i < total; ++i) {
            if (inside[i]) { classes[i] = NodeClass::Interior; continue; }
            for (const auto& off : offsets) {
                std::int64_t j = neighbor(static_cast<std::int64_t>(i), off);
                if (j >= 0 && inside[j]) { classes[i] = NodeClass::Boundary; break; }
            }
        }

        // Pass 3: inside nodes whose stencil leaves the hull become Boundary.
        reclassified = 0;
        for (std::size_t i = 0; i < total; ++i) {
            if (classes[i] != NodeClass::Interior) continue;
            for (const auto& off : offsets) {
                std::int64_t j = neighbor(static_cast<std::int64_t>(i), off);
                if (j < 0 || classes[j] == NodeClass::Exterior) {
                    classes[i] = NodeClass::Boundary;
                    ++reclassified;
                    break;
                }
            }
        }

        for (std::size_t i = 0; i < total; ++i) {
            if (classes[i] == NodeClass::Interior) interior_list.push_back(static_cast<std::int64_t>(i));
            else if (classes[i] == NodeClass::Boundary) boundary_list.push_back(static_cast<std::int64_t>(i));
        }
        if (interior_list.empty())
            throw GridError("GridDomain: no Interior node; lattice too coarse for this domain");

        compute_anchors();
    }

    int n;         // complex dimension
    int dims;      // 2n
    double h;
    Point lo, hi;
    std::array<int, 4> npts{1, 1, 1, 1};
    std::array<std::int64_t, 4> stride{1, 1, 1, 1};
    DefiningFn defining_fn;
    std::vector<NodeClass> classes;
    std::vector<double> fn_values;
    std::vector<std::int64_t> interior_list, boundary_list;
    std::vector<std::array<int, 4>> offsets;  // full stencil neighborhood
    std::int64_t reclassified = 0;

    std::size_t size() const { return classes.size(); }
    NodeClass node_class(std::int64_t i) const { return classes[static_cast<std::size_t>(i)]; }

    Point position(std::int64_t flat) const {
        Point p{0, 0, 0, 0};
        for (int d = 0; d < dims; ++d) {
            std::int64_t q = (flat / stride[d]) % npts[d];
            p[d] = lo[d] + static_cast<double>(q) * h;
        }
        return p;
    }

    std::array<int, 4> index_of(std::int64_t flat) const {
        std::array<int, 4> ix{0, 0, 0, 0};
        for (int d = 0; d < dims; ++d) ix[d] = static_cast<int>((flat / stride[d]) % npts[d]);
        return ix;
    }

    std::int64_t flat_of(const std::array<int, 4>& ix) const {
        std::int64_t f = 0;
        for (int d = 0; d < dims; ++d) f += static_cast<std::int64_t>(ix[d]) * stride[d];
        return f;
    }

    // Flat index of a neighbor, or -1 when the offset leaves the lattice.
    std::int64_t neighbor(std::int64_t flat, const std::array<int, 4>& off) const {
        std::int64_t f = 0;
        for (int d = 0; d < dims; ++d) {
            int q = static_cast<int>((flat / stride[d]) % npts[d]) + off[d];
            if (q < 0 || q >= npts[d]) return -1;
            f += static_cast<std::int64_t>(q) * stride[d];
        }
        return f;
    }

    // Anchor on the zero set of the defining function for a Boundary node.
    const Point& anchor(std::int64_t flat) const {
        if (node_class(flat) != NodeClass::Boundary)
            throw GridError("boundary_anchor: node is not a Boundary node");
        return anchors[static_cast<std::size_t>(flat)];
    }

    // Representative position of a node on the closed domain: Boundary nodes
    // are represented by their anchors, other nodes by their lattice position.
    Point closure_position(std::int64_t flat) const {
        return node_class(flat) == NodeClass::Boundary ? anchor(flat) : position(flat);
    }

    double diameter_hull() const {
        // Diameter of the bounding box of non-Exterior nodes (cheap upper
        // proxy used for modulus radius grids).
        Point mn{0, 0, 0, 0}, mx{0, 0, 0, 0};
        bool first = true;
        for (std::size_t i = 0; i < size(); ++i) {
            if (classes[i] == NodeClass::Exterior) continue;
            Point p = position(static_cast<std::int64_t>(i));
            if (first) { mn = mx = p; first = false; continue; }
            for (int d = 0; d < dims; ++d) {
                mn[d] = std::min(mn[d], p[d]);
                mx[d] = std::max(mx[d], p[d]);
            }
        }
        double s = 0;
        for (int d = 0; d < dims; ++d) s += (mx[d] - mn[d]) * (mx[d] - mn[d]);
        return std::sqrt(s);
    }

  private:
    std::vector<Point> anchors;

    void compute_anchors() {
        anchors.assign(size(), Point{0, 0, 0, 0});
        const double tol_on = 1e-12;
        for (std::int64_t b : boundary_list) {
            Point pb = position(b);
            double fb = fn_values[static_cast<std::size_t>(b)];
            if (std::fabs(fb) <= tol_on) { anchors[static_cast<std::size_t>(b)] = pb; continue; }
            // Find the nearest neighbor position (possibly beyond the lattice
            // edge; the defining function is an analytic closure) whose sign
            // differs, then bisect.  Ties break on the fixed offset order.
            double best_d2 = std::numeric_limits<double>::infinity();
            Point best{0, 0, 0, 0};
            double best_f = 0;
            for (const auto& off : offsets) {
                Point q = pb;
                double d2 = 0;
                for (int d = 0; d < dims; ++d) {
                    q[d] += off[d] * h;
                    d2 += (off[d] * h) * (off[d] * h);
                }
                if (d2 >= best_d2) continue;
                double fq = defining_fn(q);
                if ((fq < 0) != (fb < 0)) { best_d2 = d2; best = q; best_f = fq; }
            }
            if (!std::isfinite(best_d2))
                throw GridError("boundary_anchor: no bracketing direction; inconsistent classification");
            anchors[static_cast<std::size_t>(b)] =
                detail::bisect_zero(defining_fn, pb, fb, best, best_f, dims);
        }
    }
};

using GridPtr = std::shared_ptr<const GridDomain>;

inline GridPtr make_grid(int n, DefiningFn fn, Point lo, Point hi, double h) {
    return std::make_shared<GridDomain>(n, std::move(fn), lo, hi, h);
}

// ---------------------------------------------------------------------------

class ScalarField {
  public:
    explicit ScalarField(GridPtr dom_, double fill = 0.0)
        : dom(std::move(dom_)), v(dom->size(), fill) {}

    // Plain sampling: evaluate at lattice positions of all non-Exterior nodes.
    static ScalarField sample(const GridPtr& dom, const RealFn& f) {
        ScalarField out(dom);
        for (std::size_t i = 0; i < dom->size(); ++i)
            if (dom->classes[i] != NodeClass::Exterior)
                out.v[i] = f(dom->position(static_cast<std::int64_t>(i)));
        return out;
    }

    // Closure-of-domain sampling: Boundary nodes are evaluated at their
    // anchors, so the field represents a function on the closed domain.
    static ScalarField sample_anchored(const GridPtr& dom, const RealFn& f) {
        ScalarField out(dom);
        for (std::size_t i = 0; i < dom->size(); ++i) {
            if (dom->classes[i] == NodeClass::Interior)
                out.v[i] = f(dom->position(static_cast<std::int64_t>(i)));
            else if (dom->classes[i] == NodeClass::Boundary)
                out.v[i] = f(dom->anchor(static_cast<std::int64_t>(i)));
        }
        return out;
    }

    GridPtr dom;
    std::vector<double> v;

    double operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }
    double& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }

    void check_same(const ScalarField& o) const {
        if (dom != o.dom) throw GridError("field arithmetic: mismatched domains");
    }

    ScalarField& operator+=(const ScalarField& o) {
        check_same(o);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        check_same(o);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
    }
    ScalarField& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }
    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

    friend ScalarField max(const ScalarField& a, const ScalarField& b) {
        a.check_same(b);
        ScalarField out(a.dom);
        for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = std::max(a.v[i], b.v[i]);
        return out;
    }
};

// Max over non-Exterior nodes of |a - b|.
inline double sup_norm_diff(const ScalarField& a, const ScalarField& b) {
    a.check_same(b);
    double m = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i)
        if (a.dom->classes[i] != NodeClass::Exterior)
            m = std::max(m, std::fabs(a.v[i] - b.v[i]));
    return m;
}

// Multilinear interpolation of a field at an arbitrary point.  Corners with
// weight below 1e-14 are skipped; any needed corner that is Exterior or off
// the lattice raises an error.
inline double interpolate(const ScalarField& u, const Point& p) {
    const GridDomain& g = *u.dom;
    std::array<int, 4> base{0, 0, 0, 0};
    std::array<double, 4> t{0, 0, 0, 0};
    for (int d = 0; d < g.dims; ++d) {
        double s = (p[d] - g.lo[d]) / g.h;
        double fl = std::floor(s);
        base[d] = static_cast<int>(fl);
        t[d] = s - fl;
        if (t[d] < 1e-12) t[d] = 0.0;
        if (t[d] > 1.0 - 1e-12) { t[d] = 0.0; base[d] += 1; }
    }
    double acc = 0.0, wsum = 0.0;
    int corners = 1 << g.dims;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::array<int, 4> ix = base;
        for (int d = 0; d < g.dims; ++d) {
            if (c & (1 << d)) { w *= t[d]; ix[d] += 1; }
            else               w *= 1.0 - t[d];
        }
        if (w < 1e-14) continue;
        bool ok = true;
        for (int d = 0; d < g.dims; ++d)
            if (ix[d] < 0 || ix[d] >= g.npts[d]) { ok = false; break; }
        if (!ok) throw GridError("interpolate: point outside the lattice");
        std::int64_t f = g.flat_of(ix);
        if (g.node_class(f) == NodeClass::Exterior)
            throw GridError("interpolate: stencil touches an Exterior node");
        acc += w * u[f];
        wsum += w;
    }
    return acc / wsum;
}

inline double norm2(const Point& p, int dims) {
    double s = 0;
    for (int d = 0; d < dims; ++d) s += p[d] * p[d];
    return s;
}

inline double dist(const Point& a, const Point& b, int dims) {
    double s = 0;
    for (int d = 0; d < dims; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

// CSV export: one row per non-Exterior node in lexicographic lattice order
// (flat index order), 17 significant digits.
inline void write_field_csv(std::ostream& os, const ScalarField& u) {
    const GridDomain& g = *u.dom;
    if (g.n == 1) os << "x1,y1,value\n";
    else          os << "x1,y1,x2,y2,value\n";
    char buf[64];
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.classes[i] == NodeClass::Exterior) continue;
        Point p = g.position(static_cast<std::int64_t>(i));
        for (int d = 0; d < g.dims; ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", p[d]);
            os << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", u.v[i]);
        os << buf << '\n';
    }
}

}  // namespace cma
