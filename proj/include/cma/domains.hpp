#pragma once

// Canonical test domains: balls, ellipsoids, egg domains |z1|^2 + |z2|^(2m) < 1,
// and the bidisc.  Each carries an analytic defining function, a bounding box
// with 25% margin, and (when one exists) a candidate defining function meant
// to have complex Hessian >= identity.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "grid.hpp"

namespace cma {

struct DomainDef {
    std::string name;
    int n = 2;
    DefiningFn fn;
    std::optional<DefiningFn> rho;  // candidate with H_C(rho) >= I, if any
    bool rho_expected_ok = false;   // whether the candidate should pass
    // Best available psh function vanishing on the boundary, for barrier
    // diagnostics; equals rho where one is shipped.
    std::optional<DefiningFn> barrier_candidate;
    Point lo{0, 0, 0, 0};
    Point hi{0, 0, 0, 0};

    GridPtr grid(double h) const { return make_grid(n, fn, lo, hi, h); }
};

inline DomainDef make_ball(int n, double R, Point center = {0, 0, 0, 0}) {
    if (!(R > 0)) throw GridError("make_ball: radius must be positive");
    DomainDef d;
    d.name = "ball";
    d.n = n;
    int dims = 2 * n;
    d.fn = [dims, R, center](const Point& p) {
        double s = -R * R;
        for (int k = 0; k < dims; ++k) s += (p[k] - center[k]) * (p[k] - center[k]);
        return s;
    };
    d.rho = d.fn;  // complex Hessian is exactly the identity
    d.rho_expected_ok = true;
    d.barrier_candidate = d.rho;
    for (int k = 0; k < dims; ++k) {
        d.lo[k] = center[k] - 1.25 * R;
        d.hi[k] = center[k] + 1.25 * R;
    }
    return d;
}

inline DomainDef make_ellipsoid(int n, std::array<double, 2> a) {
    for (int j = 0; j < n; ++j)
        if (!(a[j] > 0)) throw GridError("make_ellipsoid: semiaxes must be positive");
    DomainDef d;
    d.name = "ellipsoid";
    d.n = n;
    d.fn = [n, a](const Point& p) {
        double s = -1.0;
        for (int j = 0; j < n; ++j)
            s += (p[2 * j] * p[2 * j] + p[2 * j + 1] * p[2 * j + 1]) / (a[j] * a[j]);
        return s;
    };
    // Scaling by the largest squared semiaxis lifts the smallest Hessian
    // eigenvalue max(a)^2/max(a)^2 = 1 up to the identity threshold.
    double amax2 = 0;
    for (int j = 0; j < n; ++j) amax2 = std::max(amax2, a[j] * a[j]);
    DefiningFn base = d.fn;
    d.rho = [base, amax2](const Point& p) { return amax2 * base(p); };
    d.rho_expected_ok = true;
    d.barrier_candidate = d.rho;
    for (int j = 0; j < n; ++j) {
        d.lo[2 * j] = d.lo[2 * j + 1] = -1.25 * a[j];
        d.hi[2 * j] = d.hi[2 * j + 1] = 1.25 * a[j];
    }
    return d;
}

// Pseudoconvex but not strongly pseudoconvex at z2 = 0: the naive candidate
// |z1|^2 + |z2|^(2m) - 1 is psh yet its Hessian degenerates along z2 = 0, so
// it is shipped flagged as expected to fail the >= identity test.
inline DomainDef make_egg(int m) {
    if (m < 2) throw GridError("make_egg: exponent must be at least 2");
    DomainDef d;
    d.name = "egg";
    d.n = 2;
    d.fn = [m](const Point& p) {
        double r1 = p[0] * p[0] + p[1] * p[1];
        double r2 = p[2] * p[2] + p[3] * p[3];
        return r1 + std::pow(r2, m) - 1.0;
    };
    d.rho = d.fn;
    d.rho_expected_ok = false;
    d.barrier_candidate = d.rho;
    for (int k = 0; k < 4; ++k) {
        d.lo[k] = -1.25;
        d.hi[k] = 1.25;
    }
    return d;
}

// Product domain; its boundary contains analytic disks, so no defining
// function with positive-definite complex Hessian exists and none is shipped.
inline DomainDef make_bidisc() {
    DomainDef d;
    d.name = "bidisc";
    d.n = 2;
    d.fn = [](const Point& p) {
        double r1 = std::sqrt(p[0] * p[0] + p[1] * p[1]);
        double r2 = std::sqrt(p[2] * p[2] + p[3] * p[3]);
        return std::max(r1, r2) - 1.0;
    };
    d.rho_expected_ok = false;
    // max(|z1|^2, |z2|^2) - 1 is psh, vanishes on the whole boundary, and is
    // the natural candidate whose barrier at a face point must fail.
    d.barrier_candidate = [](const Point& p) {
        double r1 = p[0] * p[0] + p[1] * p[1];
        double r2 = p[2] * p[2] + p[3] * p[3];
        return std::max(r1, r2) - 1.0;
    };
    for (int k = 0; k < 4; ++k) {
        d.lo[k] = -1.25;
        d.hi[k] = 1.25;
    }
    return d;
}

struct DomainParams {
    int n = 2;
    double radius = 1.0;
    Point center{0, 0, 0, 0};
    std::array<double, 2> semiaxes{1.0, 1.0};
    int egg_exponent = 2;
};

inline DomainDef domain_by_name(const std::string& name, const DomainParams& p = {}) {
    if (name == "ball") return make_ball(p.n, p.radius, p.center);
    if (name == "ellipsoid") return make_ellipsoid(p.n, p.semiaxes);
    if (name == "egg") return make_egg(p.egg_exponent);
    if (name == "bidisc") return make_bidisc();
    throw GridError("unknown domain '" + name + "' (expected ball, ellipsoid, egg, or bidisc)");
}

}  // namespace cma
