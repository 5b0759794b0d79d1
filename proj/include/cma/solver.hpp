#pragma once

// Monotone nonlinear Gauss-Seidel solver for the Dirichlet problem of the
// complex Monge-Ampere equation, sandwiched between the psh subsolution
// phi + K*rho and the supersolution phi - K'*rho.  The discrete operator is
// the clamped wide-stencil minimum over unitary frames; stencil lines that
// cross the boundary are shortened to the crossing point (found by sign
// bisection of the defining function) and sample the boundary data there,
// with the usual unequal-arm second-difference weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "grid.hpp"
#include "modulus.hpp"
#include "operators.hpp"
#include "psh.hpp"

namespace cma {

struct DirichletData {
    RealFn phi;  // boundary data, evaluable on the closed hull
    RealFn f;    // nonnegative density on the closure
    std::optional<ModulusOfContinuity> f_root_modulus;  // asserted for f^{1/n}
};

enum class SweepOrder { Lexicographic, RedBlack };

struct SolveConfig {
    int frame_radius = 1;
    double tol_res = 1e-6;
    int max_sweeps = 500;
    SweepOrder order = SweepOrder::Lexicographic;
    int threads = 1;  // used by the red-black order and the residual pass
    std::ostream* sweep_log = nullptr;  // CSV: sweep,index,max_update,max_residual
    std::function<void(int, double, double, const ScalarField&)> on_sweep;
};

class SolveError : public GridError {
  public:
    SolveError(const std::string& msg, int sweeps_, double residual_)
        : GridError(msg), sweeps(sweeps_), residual(residual_) {}
    int sweeps;
    double residual;
};

// ---------------------------------------------------------------------------
// Discrete operator with boundary-crossing stencils.
//
// For an Interior node z and a unit direction w, the four stencil rays
// z +- h w, z +- h (iw) are resolved once, geometrically:
//   - if the sample point leaves the domain (defining function >= 0 there),
//     the ray is cut at the sign change and samples phi at the crossing;
//   - if the sample point stays inside and every multilinear interpolation
//     corner is an Interior node, it is sampled by interpolation;
//   - if it lands exactly on a lattice node, it reads that node;
//   - otherwise the sample cannot be formed cleanly and the whole frame is
//     skipped at this node (the coordinate frame never is: its samples are
//     lattice nodes or cut rays).
// Each line contributes the unequal-arm weights, so for arms theta+ h and
// theta- h the second difference along the line is
//   2/h^2 * [ s+ / (th+ (th+ + th-)) + s- / (th- (th+ + th-)) - t / (th+ th-) ]
// and the directional value is the average of the w-line and the (iw)-line.
// With both arms uncut this reduces exactly to (S - 4t) / (4 h^2).
class MongeAmpereScheme {
  public:
    MongeAmpereScheme(GridPtr grid, RealFn boundary_data, int frame_radius)
        : g(std::move(grid)),
          phi(std::move(boundary_data)),
          fs(g->n, frame_radius),
          An(ma_normalization(g->n)) {
        if (fs.frames.size() > 64)
            throw GridError("scheme: frame set too large for the usability mask");
        build_ray_tables();
        classify_nodes();
    }

    const GridDomain& grid() const { return *g; }
    const FrameSet& frames() const { return fs; }
    double normalization() const { return An; }

    static constexpr int kMaxFrames = 64;

    struct FrameVals {
        double A[2];
        double B[2];
    };

    // Fill per-frame linear coefficients at `node`: direction j of frame F
    // contributes A - B t.  Returns the usable-frame mask.
    std::uint64_t eval(const ScalarField& u, std::int64_t node,
                       std::vector<FrameVals>& out) const {
        out.resize(fs.frames.size());
        const double inv2h2 = 1.0 / (2.0 * g->h * g->h);
        std::int64_t rim = rim_index[static_cast<std::size_t>(node)];
        std::uint64_t mask = rim < 0 ? all_frames_mask : rim_info[rim].usable;
        const RimInfo* info = rim < 0 ? nullptr : &rim_info[rim];
        for (std::size_t f = 0; f < fs.frames.size(); ++f) {
            if (!(mask >> f & 1)) continue;
            FrameVals& fv = out[f];
            for (int j = 0; j < g->n; ++j) {
                double a = 0, b = 0;
                for (int line = 0; line < 2; ++line) {
                    double th[2] = {1.0, 1.0};
                    double s[2] = {0.0, 0.0};
                    for (int side = 0; side < 2; ++side) {
                        int ray = ray_id(static_cast<int>(f), j, line, side);
                        if (info) {
                            const RaySample& rs = info->rays[ray];
                            th[side] = rs.theta;
                            s[side] = rs.cut ? rs.value : table_read(u, node, ray);
                        } else {
                            s[side] = table_read(u, node, ray);
                        }
                    }
                    double tsum = th[0] + th[1];
                    a += inv2h2 * (s[0] / (th[0] * tsum) + s[1] / (th[1] * tsum));
                    b += inv2h2 / (th[0] * th[1]);
                }
                fv.A[j] = a;
                fv.B[j] = b;
            }
        }
        return mask;
    }

    // min over usable frames of prod_j max(A_j - B_j t, 0)
    double G(const std::vector<FrameVals>& vals, std::uint64_t mask, double t) const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < vals.size(); ++f) {
            if (!(mask >> f & 1)) continue;
            double prod = 1.0;
            for (int j = 0; j < g->n; ++j)
                prod *= std::max(vals[f].A[j] - vals[f].B[j] * t, 0.0);
            best = std::min(best, prod);
        }
        return best;
    }

    // A_n * G at the node's own value: the discrete Monge-Ampere density the
    // solver drives to f.
    double operator_value(const ScalarField& u, std::int64_t node) const {
        std::vector<FrameVals> vals;
        std::uint64_t mask = eval(u, node, vals);
        return An * G(vals, mask, u[node]);
    }

    // Smallest directional second difference over usable frames: the
    // stencil-consistent plurisubharmonicity measure.
    double min_directional(const ScalarField& u, std::int64_t node) const {
        std::vector<FrameVals> vals;
        std::uint64_t mask = eval(u, node, vals);
        double t = u[node];
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < vals.size(); ++f) {
            if (!(mask >> f & 1)) continue;
            for (int j = 0; j < g->n; ++j)
                m = std::min(m, vals[f].A[j] - vals[f].B[j] * t);
        }
        return m;
    }

    // Scalar update: the t solving A_n G(t) = f_value, bisected to machine
    // width and clamped by the supersolution.
    double update(const std::vector<FrameVals>& vals, std::uint64_t mask, double t_cur,
                  double f_value, double super_value) const {
        double t_new;
        if (f_value <= 0.0) {
            // Product vanishes as soon as its smallest factor does.
            t_new = std::numeric_limits<double>::infinity();
            for (std::size_t f = 0; f < vals.size(); ++f) {
                if (!(mask >> f & 1)) continue;
                for (int j = 0; j < g->n; ++j)
                    t_new = std::min(t_new, vals[f].A[j] / vals[f].B[j]);
            }
        } else {
            const double target = f_value / An;
            double lo = t_cur, hi = super_value + 1.0;
            double step = g->h * g->h;
            while (G(vals, mask, lo) < target) {
                lo -= step;
                step *= 2.0;
                if (!(step < 1e300)) throw GridError("update: cannot bracket the root from below");
            }
            step = 1.0;
            while (G(vals, mask, hi) > target) {
                hi += step;
                step *= 2.0;
                if (!(step < 1e300)) throw GridError("update: cannot bracket the root from above");
            }
            if (hi < lo) hi = lo;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                if (G(vals, mask, mid) >= target) lo = mid;
                else                              hi = mid;
            }
            t_new = lo;  // G(lo) >= target keeps the density from dipping under f
        }
        return std::min(t_new, super_value);
    }

  private:
    GridPtr g;
    RealFn phi;
    FrameSet fs;
    double An;

    struct TableEntry {
        std::int64_t delta;
        double w;
    };
    // Shared multilinear stencils per ray (translation invariant).
    std::vector<std::vector<TableEntry>> ray_tables;

    struct RaySample {
        bool cut = false;
        double theta = 1.0;
        double value = 0.0;  // phi at the crossing when cut
    };
    struct RimInfo {
        std::uint64_t usable = 0;
        std::vector<RaySample> rays;
    };
    std::vector<std::int64_t> rim_index;  // node -> rim_info slot, -1 for deep
    std::vector<RimInfo> rim_info;
    std::uint64_t all_frames_mask = 0;

    int ray_id(int frame, int dir, int line, int side) const {
        return ((frame * g->n + dir) * 2 + line) * 2 + side;
    }

    double table_read(const ScalarField& u, std::int64_t node, int ray) const {
        double acc = 0;
        for (const TableEntry& e : ray_tables[ray]) acc += e.w * u[node + e.delta];
        return acc;
    }

    // Corner offsets and weights of the sample at displacement `disp` from a
    // node, mirroring `interpolate` (snap tolerance, weight cutoff, weight
    // renormalization).  Also reports the integer corner offsets for the
    // cleanliness check.
    void sample_stencil(const Point& disp, std::vector<TableEntry>& entries,
                        std::vector<std::array<int, 4>>& corners) const {
        entries.clear();
        corners.clear();
        std::array<int, 4> base{0, 0, 0, 0};
        std::array<double, 4> t{0, 0, 0, 0};
        for (int d = 0; d < g->dims; ++d) {
            double s = disp[d] / g->h;
            double fl = std::floor(s);
            base[d] = static_cast<int>(fl);
            t[d] = s - fl;
            if (t[d] < 1e-12) t[d] = 0.0;
            if (t[d] > 1.0 - 1e-12) { t[d] = 0.0; base[d] += 1; }
        }
        double wsum = 0;
        int ncorners = 1 << g->dims;
        for (int c = 0; c < ncorners; ++c) {
            double w = 1.0;
            std::array<int, 4> off = base;
            for (int d = 0; d < g->dims; ++d) {
                if (c & (1 << d)) { w *= t[d]; off[d] += 1; }
                else               w *= 1.0 - t[d];
            }
            if (w < 1e-14) continue;
            std::int64_t delta = 0;
            for (int d = 0; d < g->dims; ++d) delta += static_cast<std::int64_t>(off[d]) * g->stride[d];
            entries.push_back({delta, w});
            corners.push_back(off);
            wsum += w;
        }
        for (TableEntry& e : entries) e.w /= wsum;
    }

    Point ray_displacement(int frame, int dir, int line, int side) const {
        CVec v = fs.frames[frame].vecs[dir];
        if (line == 1) v = times_i(v);
        return real_displacement(v, g->n, side == 0 ? g->h : -g->h);
    }

    void build_ray_tables() {
        int nrays = static_cast<int>(fs.frames.size()) * g->n * 4;
        ray_tables.resize(nrays);
        std::vector<std::array<int, 4>> corners;
        for (std::size_t f = 0; f < fs.frames.size(); ++f)
            for (int j = 0; j < g->n; ++j)
                for (int line = 0; line < 2; ++line)
                    for (int side = 0; side < 2; ++side)
                        sample_stencil(ray_displacement(static_cast<int>(f), j, line, side),
                                       ray_tables[ray_id(static_cast<int>(f), j, line, side)],
                                       corners);
        all_frames_mask = fs.frames.size() == 64
                              ? ~std::uint64_t{0}
                              : (std::uint64_t{1} << fs.frames.size()) - 1;
    }

    void classify_nodes() {
        rim_index.assign(g->size(), -1);
        std::vector<TableEntry> entries;
        std::vector<std::array<int, 4>> corners;
        for (std::int64_t node : g->interior_list) {
            bool deep = true;
            for (const auto& off : g->offsets) {
                std::int64_t nb = g->neighbor(node, off);
                if (nb < 0 || g->node_class(nb) != NodeClass::Interior) {
                    deep = false;
                    break;
                }
            }
            if (deep) continue;

            RimInfo info;
            info.rays.resize(ray_tables.size());
            Point z = g->position(node);
            double fz = g->fn_values[static_cast<std::size_t>(node)];
            for (std::size_t f = 0; f < fs.frames.size(); ++f) {
                bool usable = true;
                for (int j = 0; j < g->n && usable; ++j)
                    for (int line = 0; line < 2 && usable; ++line)
                        for (int side = 0; side < 2 && usable; ++side) {
                            int ray = ray_id(static_cast<int>(f), j, line, side);
                            usable = resolve_ray(node, z, fz,
                                                 ray_displacement(static_cast<int>(f), j,
                                                                  line, side),
                                                 ray, info, entries, corners);
                        }
                if (usable) info.usable |= std::uint64_t{1} << f;
            }
            if (!(info.usable & 1))
                throw GridError("scheme: coordinate frame unusable at an Interior node");
            rim_index[static_cast<std::size_t>(node)] = static_cast<std::int64_t>(rim_info.size());
            rim_info.push_back(std::move(info));
        }
    }

    // Resolve one ray at a rim node; false means the frame must be skipped.
    bool resolve_ray(std::int64_t node, const Point& z, double fz, const Point& disp,
                     int ray, RimInfo& info, std::vector<TableEntry>& entries,
                     std::vector<std::array<int, 4>>& corners) {
        Point p = z;
        for (int d = 0; d < g->dims; ++d) p[d] += disp[d];
        double fp = g->defining_fn(p);
        RaySample& rs = info.rays[ray];
        if (fp >= 0.0) {
            // Cut: bisect the sign change of the defining function along the ray.
            double scale = std::max({1.0, std::fabs(fz), std::fabs(fp)});
            double lo = 0.0, hi = 1.0, mid = 1.0;
            for (int it = 0; it < 80; ++it) {
                mid = 0.5 * (lo + hi);
                Point q = z;
                for (int d = 0; d < g->dims; ++d) q[d] += mid * disp[d];
                double fq = g->defining_fn(q);
                if (std::fabs(fq) <= 1e-12 * scale) break;
                if (fq < 0) lo = mid;
                else        hi = mid;
            }
            rs.cut = true;
            rs.theta = std::max(mid, 1e-9);
            Point q = z;
            for (int d = 0; d < g->dims; ++d) q[d] += rs.theta * disp[d];
            rs.value = phi(q);
            if (!std::isfinite(rs.value))
                throw GridError("scheme: boundary data not finite at a crossing point");
            return true;
        }
        // Inside: usable only when every interpolation corner is Interior, or
        // the sample is exactly a lattice node (then its stored value is the
        // discrete datum there, Boundary-carried or not).
        sample_stencil(disp, entries, corners);
        if (entries.size() == 1) {
            std::int64_t nb = g->neighbor(node, corners[0]);
            return nb >= 0 && g->node_class(nb) != NodeClass::Exterior;
        }
        for (const auto& off : corners) {
            std::int64_t nb = g->neighbor(node, off);
            if (nb < 0 || g->node_class(nb) != NodeClass::Interior) return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Step-2 sandwich members.

struct Step2Member {
    ScalarField field;  // plain-sampled closed form phi_ext +- K rho
    double K = 0;
};

namespace detail {

// Shared search skeleton: 0, then 2^-4 doubling, then bisection to relative
// width 1e-3; returns the smallest verified constant.
template <typename Check>
double smallest_constant(Check&& ok, double K_max, const char* who) {
    if (ok(0.0)) return 0.0;
    double lo = 0.0, hi = 1.0 / 16.0;
    bool found = false;
    while (hi <= K_max * (1 + 1e-12)) {
        if (ok(hi)) { found = true; break; }
        lo = hi;
        hi *= 2.0;
    }
    if (!found) {
        std::ostringstream msg;
        msg << who << ": no admissible constant up to " << K_max;
        throw GridError(msg.str());
    }
    while (hi - lo > 1e-3 * hi) {
        double mid = 0.5 * (lo + hi);
        if (ok(mid)) hi = mid;
        else         lo = mid;
    }
    return hi;
}

}  // namespace detail

// v = phi_ext + K rho with the smallest searched K making v psh and its
// pointwise Monge-Ampere density at least f everywhere Interior.
inline Step2Member subsolution(const DirichletData& data, const ScalarField& rho,
                               double K_max = 1048576.0) {
    const GridPtr& dom = rho.dom;
    if (!uniformly_strictly_psh(rho, 1e-8))
        throw GridError(
            "subsolution: candidate defining function fails the Hessian >= identity test");
    ScalarField phi_ext = ScalarField::sample(dom, data.phi);
    ScalarField f_field = ScalarField::sample(dom, data.f);
    auto ok = [&](double K) {
        ScalarField w = phi_ext;
        for (std::size_t i = 0; i < w.v.size(); ++i) w.v[i] += K * rho.v[i];
        if (!psh_report(w, 1e-8).clean()) return false;
        for (std::int64_t node : dom->interior_list)
            if (ma_pointwise(w, node) < f_field[node] - 1e-8) return false;
        return true;
    };
    double K = detail::smallest_constant(ok, K_max, "subsolution");
    Step2Member out{phi_ext, K};
    for (std::size_t i = 0; i < out.field.v.size(); ++i) out.field.v[i] += K * rho.v[i];
    return out;
}

// phi_ext - K rho with the smallest K making -phi_ext + K rho psh; dominates
// every member of the subsolution family.
inline Step2Member supersolution(const DirichletData& data, const ScalarField& rho,
                                 double K_max = 1048576.0) {
    const GridPtr& dom = rho.dom;
    ScalarField phi_ext = ScalarField::sample(dom, data.phi);
    ScalarField neg = phi_ext;
    for (double& x : neg.v) x = -x;
    double K = find_psh_K(neg, rho, K_max);
    Step2Member out{phi_ext, K};
    for (std::size_t i = 0; i < out.field.v.size(); ++i) out.field.v[i] -= K * rho.v[i];
    return out;
}

// ---------------------------------------------------------------------------

struct SolveResult {
    ScalarField u;
    ScalarField sub, super;
    double K_sub = 0, K_super = 0;
    int sweeps = 0;
    double final_update = 0;
    double final_residual = 0;
};

namespace detail {

template <typename Fn>
void parallel_over(const std::vector<std::int64_t>& nodes, int threads, Fn&& fn) {
    std::size_t m = nodes.size();
    if (threads <= 1 || m < 2048) {
        fn(0, 0, m);
        return;
    }
    int nt = std::min<std::size_t>(threads, m);
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) {
        std::size_t a = m * t / nt, b = m * (t + 1) / nt;
        pool.emplace_back([&fn, t, a, b] { fn(t, a, b); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

inline SolveResult solve(const GridPtr& dom, const DirichletData& data, const ScalarField& rho,
                         const SolveConfig& cfg = {}) {
    if (!(cfg.tol_res > 0)) throw GridError("solve: residual tolerance must be positive");
    if (cfg.max_sweeps < 1) throw GridError("solve: max sweeps must be at least 1");
    if (rho.dom != dom) throw GridError("solve: rho sampled on a different grid");

    ScalarField f_field = ScalarField::sample(dom, data.f);
    for (std::int64_t node : dom->interior_list)
        if (f_field[node] < 0)
            throw GridError("solve: density f is negative at an Interior node");

    Step2Member sub = subsolution(data, rho);
    Step2Member super = supersolution(data, rho);

    ScalarField u(dom);
    for (std::int64_t node : dom->interior_list)
        u[node] = std::min(sub.field[node], super.field[node]);
    for (std::int64_t node : dom->boundary_list) {
        u[node] = data.phi(dom->anchor(node));
        if (!std::isfinite(u[node]))
            throw GridError("solve: boundary data not finite at an anchor");
    }

    MongeAmpereScheme scheme(dom, data.phi, cfg.frame_radius);
    const double An = scheme.normalization();
    const std::vector<std::int64_t>& nodes = dom->interior_list;

    // Red-black split by lattice-coordinate parity.
    std::vector<std::int64_t> colors[2];
    if (cfg.order == SweepOrder::RedBlack) {
        for (std::int64_t node : nodes) {
            auto ix = dom->index_of(node);
            int par = 0;
            for (int d = 0; d < dom->dims; ++d) par += ix[d];
            colors[par & 1].push_back(node);
        }
    }

    if (cfg.sweep_log) *cfg.sweep_log << "sweep,index,max_update,max_residual\n";

    struct Extremum {
        double value = -std::numeric_limits<double>::infinity();
        std::int64_t index = -1;
    };
    auto merge = [](Extremum& into, const Extremum& from) {
        if (from.value > into.value) into = from;
    };

    std::vector<MongeAmpereScheme::FrameVals> scratch;
    int sweeps = 0;
    double max_update = 0, max_residual = 0;
    bool converged = false;
    for (sweeps = 1; sweeps <= cfg.max_sweeps; ++sweeps) {
        Extremum upd;
        if (cfg.order == SweepOrder::Lexicographic) {
            for (std::int64_t node : nodes) {
                std::uint64_t mask = scheme.eval(u, node, scratch);
                double t_new = scheme.update(scratch, mask, u[node], f_field[node],
                                             super.field[node]);
                double d = std::fabs(t_new - u[node]);
                if (d > upd.value) upd = {d, node};
                u[node] = t_new;
            }
        } else {
            // Jacobi within each color: every new value reads the pre-color
            // field, so the result is independent of the thread count.
            for (const auto& color : colors) {
                std::vector<double> fresh(color.size());
                std::vector<Extremum> part(std::max<std::size_t>(1, cfg.threads));
                detail::parallel_over(color, cfg.threads,
                                      [&](int t, std::size_t a, std::size_t b) {
                    std::vector<MongeAmpereScheme::FrameVals> local;
                    Extremum ex;
                    for (std::size_t k = a; k < b; ++k) {
                        std::int64_t node = color[k];
                        std::uint64_t mask = scheme.eval(u, node, local);
                        fresh[k] = scheme.update(local, mask, u[node], f_field[node],
                                                 super.field[node]);
                        double d = std::fabs(fresh[k] - u[node]);
                        if (d > ex.value) ex = {d, node};
                    }
                    part[t] = ex;
                });
                for (const Extremum& ex : part) merge(upd, ex);
                for (std::size_t k = 0; k < color.size(); ++k) u[color[k]] = fresh[k];
            }
        }

        Extremum res;
        {
            std::vector<Extremum> part(std::max<std::size_t>(1, cfg.threads));
            detail::parallel_over(nodes, cfg.threads, [&](int t, std::size_t a, std::size_t b) {
                std::vector<MongeAmpereScheme::FrameVals> local;
                Extremum ex;
                for (std::size_t k = a; k < b; ++k) {
                    std::int64_t node = nodes[k];
                    std::uint64_t mask = scheme.eval(u, node, local);
                    double r = std::fabs(An * scheme.G(local, mask, u[node]) - f_field[node]);
                    if (r > ex.value) ex = {r, node};
                }
                part[t] = ex;
            });
            for (const Extremum& ex : part) merge(res, ex);
        }

        max_update = std::max(upd.value, 0.0);
        max_residual = std::max(res.value, 0.0);
        if (cfg.sweep_log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g\n", sweeps,
                          static_cast<long long>(upd.index), max_update, max_residual);
            *cfg.sweep_log << buf;
        }
        if (cfg.on_sweep) cfg.on_sweep(sweeps, max_update, max_residual, u);
        if (max_update < cfg.tol_res * dom->h * dom->h && max_residual <= cfg.tol_res) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "solve: no convergence in " << cfg.max_sweeps
            << " sweeps; last max update " << max_update << ", residual " << max_residual;
        throw SolveError(msg.str(), cfg.max_sweeps, max_residual);
    }

    SolveResult out{std::move(u), std::move(sub.field), std::move(super.field),
                    sub.K, super.K, sweeps, max_update, max_residual};
    return out;
}

// ---------------------------------------------------------------------------
// Family membership and envelope dominance.

enum class BoundaryMode {
    Equal,    // |v - phi(anchor)| <= tol  (the solution family)
    AtMost,   // v - phi(anchor) <= tol    (members merely dominated by phi)
};

struct MembershipReport {
    bool psh_ok = false;
    bool boundary_ok = false;
    bool density_ok = false;
    double worst_directional = 0;   // min over nodes/directions
    double worst_boundary = 0;      // max deviation (signed for AtMost)
    double worst_density_gap = 0;   // min of operator - f
    std::int64_t worst_psh_node = -1, worst_boundary_node = -1, worst_density_node = -1;
    bool in_family() const { return psh_ok && boundary_ok && density_ok; }
};

inline MembershipReport family_membership(const ScalarField& v, const DirichletData& data,
                                          double tol, const MongeAmpereScheme& scheme,
                                          BoundaryMode mode = BoundaryMode::Equal) {
    const GridDomain& g = scheme.grid();
    MembershipReport rep;

    double worst_dir = std::numeric_limits<double>::infinity();
    double worst_gap = std::numeric_limits<double>::infinity();
    for (std::int64_t node : g.interior_list) {
        double md = scheme.min_directional(v, node);
        if (md < worst_dir) {
            worst_dir = md;
            rep.worst_psh_node = node;
        }
        double gap = scheme.operator_value(v, node) - data.f(g.position(node));
        if (gap < worst_gap) {
            worst_gap = gap;
            rep.worst_density_node = node;
        }
    }
    rep.worst_directional = worst_dir;
    rep.worst_density_gap = worst_gap;
    rep.psh_ok = worst_dir >= -tol;
    rep.density_ok = worst_gap >= -tol;

    double worst_b = -std::numeric_limits<double>::infinity();
    for (std::int64_t node : g.boundary_list) {
        double dev = v[node] - data.phi(g.anchor(node));
        double score = mode == BoundaryMode::Equal ? std::fabs(dev) : dev;
        if (score > worst_b) {
            worst_b = score;
            rep.worst_boundary_node = node;
        }
    }
    rep.worst_boundary = worst_b;
    rep.boundary_ok = worst_b <= tol;
    return rep;
}

inline MembershipReport family_membership(const ScalarField& v, const DirichletData& data,
                                          double tol, int frame_radius = 1,
                                          BoundaryMode mode = BoundaryMode::Equal) {
    MongeAmpereScheme scheme(v.dom, data.phi, frame_radius);
    return family_membership(v, data, tol, scheme, mode);
}

struct DominanceReport {
    double max_defect = -std::numeric_limits<double>::infinity();
    int samples = 0;
    int rejected = 0;  // candidates that failed the membership screen
    bool pass = false;
};

// Samples members of the Perron-Bremermann family lying under phi at the
// boundary -- scalings phi_ext + K rho - c, pairwise maxima, and mollified
// variants pushed down by their boundary defect -- checks each for discrete
// membership, and reports the largest excess over u.
inline DominanceReport envelope_dominance(const ScalarField& u, const DirichletData& data,
                                          const ScalarField& rho, int n_samples,
                                          double K_min) {
    const GridPtr& dom = u.dom;
    const GridDomain& g = *dom;
    MongeAmpereScheme scheme(dom, data.phi, 1);
    const double member_tol = 10.0 * g.h;

    ScalarField phi_plain = ScalarField::sample(dom, data.phi);
    ScalarField phi_anch = ScalarField::sample_anchored(dom, data.phi);
    // The anchored trace of any defining function is zero.
    ScalarField rho_anch = rho;
    for (std::int64_t b : g.boundary_list) rho_anch[b] = 0.0;

    WeylScalar kw(detail::splitmix64(global_seed() ^ 0x646f6d696eull));
    WeylScalar cw(detail::splitmix64(global_seed() ^ 0x7368696674ull));

    auto scaled_member = [&](double K, double c) {
        ScalarField m = phi_anch;
        for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] += K * rho_anch.v[i] - c;
        return m;
    };

    DominanceReport rep;
    for (int s = 0; s < n_samples; ++s) {
        double K1 = K_min + 3.0 * kw.next(), c1 = cw.next();
        ScalarField member = scaled_member(K1, c1);
        switch (s % 3) {
            case 0:
                break;
            case 1: {
                double K2 = K_min + 3.0 * kw.next(), c2 = cw.next();
                member = max(member, scaled_member(K2, c2));
                break;
            }
            case 2: {
                // Mollify the smooth extension, then push below phi by the
                // boundary defect.
                ScalarField plain = phi_plain;
                for (std::size_t i = 0; i < plain.v.size(); ++i)
                    plain.v[i] += K1 * rho.v[i] - c1;
                ScalarField moll = mollify(plain, 2.0 * g.h);
                double defect = 0;
                for (std::int64_t b : g.boundary_list)
                    defect = std::max(defect, moll[b] - data.phi(g.anchor(b)));
                for (double& x : moll.v) x -= defect;
                member = std::move(moll);
                break;
            }
        }
        MembershipReport mr =
            family_membership(member, data, member_tol, scheme, BoundaryMode::AtMost);
        if (!mr.in_family()) {
            ++rep.rejected;
            continue;
        }
        ++rep.samples;
        for (std::size_t i = 0; i < member.v.size(); ++i)
            if (g.classes[i] != NodeClass::Exterior)
                rep.max_defect = std::max(rep.max_defect, member.v[i] - u.v[i]);
    }
    rep.pass = rep.samples > 0 && rep.max_defect <= 10.0 * g.h;
    return rep;
}

}  // namespace cma
