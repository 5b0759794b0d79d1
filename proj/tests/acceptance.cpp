// End-to-end acceptance gate.  Ten checks, one [PASS]/[FAIL] line each, ASCII
// details, nonzero exit when anything fails.  Criteria 1-8 exercise the
// library in-process; 9 and 10 drive the installed CLI through /bin/sh and
// inspect the files it leaves behind.
//
// Compile-time configuration (set by the build):
//   CMA_CLI_PATH    absolute path of the cma executable
//   CMA_CONFIG_DIR  directory with the shipped run configs
//   CMA_SCHEMA_PATH the report schema to validate emitted reports against

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cma/domains.hpp"
#include "cma/lemma_suite.hpp"
#include "cma/modulus.hpp"
#include "cma/regularity.hpp"
#include "cma/reports.hpp"
#include "cma/solver.hpp"

namespace {

int failures = 0;

struct Outcome {
    bool ok = false;
    std::string detail;
};

std::string fmt(double x) {
    std::ostringstream ss;
    ss << std::setprecision(4) << x;
    return ss.str();
}

void run(int k, double limit_s, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail = std::string("unexpected exception: ") + e.what();
    }
    double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << out.detail;
    if (limit_s > 0 && el > limit_s) {
        out.ok = false;
        msg << "; exceeded the " << limit_s << " s budget";
    }
    msg << "  [" << std::fixed << std::setprecision(1) << el << " s]";
    std::printf("[%s] criterion %d — %s\n", out.ok ? "PASS" : "FAIL", k, msg.str().c_str());
    std::fflush(stdout);
    if (!out.ok) ++failures;
}

struct SolvedCase {
    cma::GridPtr g;
    cma::ScalarField rho;
    cma::DirichletData data;
    cma::SolveResult res;
};

SolvedCase solve_ball(int n, double h, const cma::RealFn& phi, double f_val) {
    cma::DomainDef d = cma::make_ball(n, 1.0);
    cma::GridPtr g = d.grid(h);
    cma::ScalarField rho = cma::ScalarField::sample(g, *d.rho);
    cma::DirichletData data{phi, [f_val](const cma::Point&) { return f_val; }, std::nullopt};
    cma::SolveResult res = cma::solve(g, data, rho, {});
    return {g, std::move(rho), std::move(data), std::move(res)};
}

// Sup deviation from `exact` at the lattice positions of interior and
// boundary nodes (boundary nodes carry anchored data, so this is the honest
// "error at grid points" number, not the smaller anchored one).
double sup_error(const SolvedCase& c, const std::function<double(const cma::Point&)>& exact) {
    const cma::GridDomain& g = *c.g;
    double worst = 0;
    for (std::int64_t node : g.interior_list)
        worst = std::max(worst, std::fabs(c.res.u[node] - exact(g.position(node))));
    for (std::int64_t node : g.boundary_list)
        worst = std::max(worst, std::fabs(c.res.u[node] - exact(g.position(node))));
    return worst;
}

int shell(const std::string& command) {
    int rc = std::system(command.c_str());
    if (rc == -1) throw std::runtime_error("system() failed for: " + command);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

cma::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return cma::json::parse(in);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    const auto zero = [](const cma::Point&) { return 0.0; };

    std::optional<SolvedCase> ball32_store, maxi_store;
    auto ball32 = [&]() -> const SolvedCase& {
        if (!ball32_store) ball32_store = solve_ball(2, 0.25, zero, 32.0);
        return *ball32_store;
    };
    auto maximality = [&]() -> const SolvedCase& {
        if (!maxi_store)
            maxi_store = solve_ball(2, 0.25, [](const cma::Point& p) { return p[0]; }, 0.0);
        return *maxi_store;
    };

    // 1. Exact quadratic on the ball, plus first-order convergence under grid
    //    refinement.
    run(1, 300, [&]() -> Outcome {
        const SolvedCase& coarse = ball32();
        SolvedCase fine = solve_ball(2, 0.125, zero, 32.0);
        auto exact = [](const cma::Point& p) { return cma::norm2(p, 4) - 1.0; };
        double e_coarse = sup_error(coarse, exact);
        double e_fine = sup_error(fine, exact);
        double ratio = e_fine > 0 ? e_coarse / e_fine : std::numeric_limits<double>::infinity();
        Outcome out;
        out.ok = e_coarse <= 2.5 && ratio >= 1.5;
        out.detail = "ball n=2, f=32: sup error " + fmt(e_coarse) + " (limit 2.5) at h=0.25, " +
                     fmt(e_fine) + " at h=0.125, ratio " + fmt(ratio) + " (need >= 1.5)";
        return out;
    });

    // 2. Maximality: pluriharmonic data with f = 0 is reproduced.
    run(2, 300, [&]() -> Outcome {
        double err = sup_error(maximality(), [](const cma::Point& p) { return p[0]; });
        Outcome out;
        out.ok = err <= 2.5;
        out.detail = "ball n=2, f=0, phi=Re z1: sup error " + fmt(err) + " (limit 2.5)";
        return out;
    });

    // 3. One complex variable: the disc with constant density.
    run(3, 30, [&]() -> Outcome {
        SolvedCase disc = solve_ball(1, 0.05, zero, 4.0);
        double err = sup_error(disc, [](const cma::Point& p) { return cma::norm2(p, 2) - 1.0; });
        Outcome out;
        out.ok = err <= 0.5;
        out.detail = "disc n=1, f=4: sup error " + fmt(err) + " (limit 0.5)";
        return out;
    });

    // 4. Randomized determinant perturbation inequality.
    run(4, 10, [&]() -> Outcome {
        cma::DetPerturbSuite suite = cma::run_det_perturb_suite(3400);
        double worst_slack = std::numeric_limits<double>::infinity();
        double worst_gap = 0;
        for (const cma::DetPerturbRow& r : suite.rows) {
            worst_slack = std::min(worst_slack, r.worst_rel_slack);
            worst_gap = std::max(worst_gap, r.max_equality_gap);
        }
        Outcome out;
        out.ok = suite.total_trials >= 10000 && suite.pass(1e-9);
        out.detail = std::to_string(suite.total_trials) + " trials over n=1..3, worst slack " +
                     fmt(worst_slack) + ", equality gap " + fmt(worst_gap) + " (tol 1e-9)";
        return out;
    });

    // 5. Regularity pipeline on the solved ball: sandwich, boundary modulus,
    //    translation step, global modulus.
    run(5, 600, [&]() -> Outcome {
        const SolvedCase& c = ball32();
        cma::ModulusOfContinuity omega = cma::identity_modulus();

        cma::Step2Member sub = cma::subsolution(c.data, c.rho);
        cma::Step2Member super = cma::supersolution(c.data, c.rho);
        double worst_lo = 0, worst_hi = 0;
        for (std::int64_t node : c.g->interior_list) {
            worst_lo = std::max(worst_lo, sub.field[node] - c.res.u[node]);
            worst_hi = std::max(worst_hi, c.res.u[node] - super.field[node]);
        }
        bool sandwich = worst_lo <= 1e-9 && worst_hi <= 1e-9;

        cma::RegularityConstants consts = cma::compute_constants(c.res, c.data, c.rho, omega);
        bool k1_ok = consts.K1 <= 2.2;

        double h = c.g->h;
        std::vector<cma::Point> taus = {
            {h, 0, 0, 0}, {-h, 0, 0, 0}, {0, 0, h, 0}, {0, 0, -h, 0}};
        cma::Step3Report s3 = cma::verify_step3(c.res.u, c.data, c.rho, omega, taus, consts);
        bool tol_ok = std::fabs(s3.tol - 165.0) <= 1e-9;

        cma::GlobalModulusReport gm = cma::verify_global_modulus(c.res.u, consts, omega);

        Outcome out;
        out.ok = sandwich && k1_ok && s3.pass() && tol_ok && gm.pass;
        out.detail = "sandwich slack (" + fmt(worst_lo) + ", " + fmt(worst_hi) + "), K1 " +
                     fmt(consts.K1) + " (limit 2.2), translation step " +
                     std::string(s3.pass() ? "holds" : "FAILS") + " for 4 shifts at tol " +
                     fmt(s3.tol) + ", global ratio " + fmt(gm.max_ratio) + " <= bound " +
                     fmt(gm.bound);
        return out;
    });

    // 6. Defining-function extraction on the ball.
    run(6, 0, [&]() -> Outcome {
        const SolvedCase& c = ball32();
        auto [rho_new, rep] = cma::defining_function_from_solution(c.g, c.rho);
        const cma::GridDomain& g = *c.g;
        double tol = 10.0 * g.h;
        double dev = 0;
        for (std::size_t node = 0; node < g.size(); ++node) {
            if (g.node_class(node) == cma::NodeClass::Exterior) continue;
            cma::Point p = g.closure_position(node);
            dev = std::max(dev, std::fabs(rho_new[node] - (cma::norm2(p, 4) - 1.0)));
        }
        Outcome out;
        out.ok = rep.pass() && dev <= tol && rep.worst_interior < 0 && rep.worst_boundary <= tol;
        out.detail = "recovered rho within " + fmt(dev) + " of |z|^2-1 (limit " + fmt(tol) +
                     "), max interior value " + fmt(rep.worst_interior) +
                     " (need < 0), boundary magnitude " + fmt(rep.worst_boundary);
        return out;
    });

    // 7. Empirical modulus of the ball quadratic: closed form, concavity,
    //    membership against its own hull.
    run(7, 0, [&]() -> Outcome {
        auto fn = [](const cma::Point& p) { return cma::norm2(p, 4) - 1.0; };
        cma::GridPtr g =
            cma::make_grid(2, fn, {-1, -1, -1, -1}, {1, 1, 1, 1}, 0.25);
        cma::ScalarField rho = cma::ScalarField::sample_anchored(g, fn);
        // 4585 non-Exterior nodes, just over the default exhaustive cutoff;
        // raise it so every pair scan below really visits all pairs.
        cma::PairBudget ex{8000, 50000000, 200000};
        double h = g->h;
        auto closed = [](double r) { return std::min(r * (2.0 - r), 1.0); };

        // Closure points never lie farther than the ball diameter apart, so
        // sampled radii stop at 2.
        std::vector<double> radii;
        for (double r = h; r <= 2.0 + h / 2; r += h) radii.push_back(r);
        auto samples = cma::empirical_modulus(rho, radii, ex);
        double worst_off = 0;
        for (const auto& [r, m] : samples) worst_off = std::max(worst_off, std::fabs(m - closed(r)));
        bool match = !samples.empty() && worst_off <= 10.0 * h;

        cma::ModulusOfContinuity hull = cma::least_concave_majorant(samples);
        double worst_change = 0;
        for (const auto& [r, m] : samples)
            worst_change = std::max(worst_change, std::fabs(hull.eval(r) - m));
        bool concave = worst_change <= 1e-9;

        auto fine = cma::empirical_modulus(rho, cma::default_radius_grid(rho, ex), ex);
        cma::ModulusOfContinuity fine_hull = cma::least_concave_majorant(fine);
        cma::ComegaResult cw = cma::comega_membership(rho, fine_hull, ex);
        bool member = cw.C <= 1.0 + 1e-9;

        Outcome out;
        out.ok = match && concave && member;
        out.detail = "closed-form gap " + fmt(worst_off) + " (limit " + fmt(10.0 * h) +
                     "), majorant change " + fmt(worst_change) + " (limit 1e-9), membership C " +
                     fmt(cw.C) + " (limit 1+1e-9)";
        return out;
    });

    // 8. Holder exponent recovery: a sqrt-type boundary profile and a smooth
    //    solution.
    run(8, 0, [&]() -> Outcome {
        cma::GridPtr g = cma::make_ball(1, 1.0).grid(0.05);
        cma::ScalarField prof = cma::ScalarField::sample_anchored(g, [](const cma::Point& p) {
            return -std::sqrt(std::max(1.0 - cma::norm2(p, 2), 0.0));
        });
        cma::HolderFit rough = cma::holder_fit(prof);
        cma::HolderFit smooth = cma::holder_fit(maximality().res.u);
        Outcome out;
        bool rough_ok = rough.eps >= 0.4 && rough.eps <= 0.6;
        bool smooth_ok = smooth.eps >= 0.9 && smooth.eps <= 1.0;
        out.ok = rough_ok && smooth_ok;
        out.detail = "sqrt profile exponent " + fmt(rough.eps) +
                     " (want [0.4, 0.6]), smooth solution exponent " + fmt(smooth.eps) +
                     " (want [0.9, 1.0])";
        return out;
    });

    // 9. Negative controls through the CLI: the egg fails the psh screen with
    //    violations hugging the z2 axis, the bidisc fails the barrier probe at
    //    the face center, and both reports validate against the schema.
    run(9, 0, [&]() -> Outcome {
        const std::string cli = CMA_CLI_PATH;
        const std::string cfg = CMA_CONFIG_DIR;
        int rc_egg = shell(cli + " check-domain " + cfg +
                           "/egg_check.json --outdir acceptance_out/egg > /dev/null 2>&1");
        int rc_bi = shell(cli + " check-domain " + cfg +
                          "/bidisc_check.json --outdir acceptance_out/bidisc > /dev/null 2>&1");

        cma::json egg = load_json("acceptance_out/egg/domain_report.json");
        cma::json bi = load_json("acceptance_out/bidisc/domain_report.json");
        cma::json schema = load_json(CMA_SCHEMA_PATH);
        std::string err;
        bool egg_valid = cma::validate_json(egg, schema, &err);
        bool bi_valid = cma::validate_json(bi, schema, &err);

        bool egg_usp_failed = false;
        for (const auto& ch : egg["checks"])
            if (ch["name"] == "uniformly_strictly_psh" && ch["pass"] == false)
                egg_usp_failed = true;
        std::size_t n_viol = 0;
        bool localized = true;
        for (const auto& v : egg["outputs"]["usp_violations"]) {
            ++n_viol;
            double x2 = v[2].get<double>(), y2 = v[3].get<double>();
            if (x2 * x2 + y2 * y2 >= 0.25) localized = false;
        }

        bool bi_barrier_failed = false;
        for (const auto& ch : bi["checks"]) {
            if (ch["name"] != "barrier" || !ch["worst_node"].is_array()) continue;
            const auto& w = ch["worst_node"];
            if (w.size() == 4 && std::fabs(w[0].get<double>() - 1.0) < 1e-12 &&
                std::fabs(w[1].get<double>()) < 1e-12 && std::fabs(w[2].get<double>()) < 1e-12 &&
                std::fabs(w[3].get<double>()) < 1e-12 && ch["pass"] == false)
                bi_barrier_failed = true;
        }

        Outcome out;
        out.ok = rc_egg == 1 && rc_bi == 1 && egg_usp_failed && n_viol > 0 && localized &&
                 bi_barrier_failed && egg_valid && bi_valid;
        out.detail = "egg exit " + std::to_string(rc_egg) + " with " + std::to_string(n_viol) +
                     " psh violations" + (localized ? " all near the z2 axis" : " (STRAY ONES)") +
                     ", bidisc exit " + std::to_string(rc_bi) + ", barrier at (1,0,0,0) " +
                     (bi_barrier_failed ? "rejected" : "NOT rejected") + ", schema " +
                     (egg_valid && bi_valid ? "valid" : std::string("invalid: ") + err);
        return out;
    });

    // 10. Determinism: two seeded CLI solves produce byte-identical fields.
    run(10, 0, [&]() -> Outcome {
        const std::string cli = CMA_CLI_PATH;
        const std::string cfg = CMA_CONFIG_DIR;
        int rc_a = shell("CMA_SEED=7 " + cli + " solve " + cfg +
                         "/ball_f32.json --outdir acceptance_out/det_a > /dev/null 2>&1");
        int rc_b = shell("CMA_SEED=7 " + cli + " solve " + cfg +
                         "/ball_f32.json --outdir acceptance_out/det_b > /dev/null 2>&1");
        std::string ua = slurp("acceptance_out/det_a/u.csv");
        std::string ub = slurp("acceptance_out/det_b/u.csv");
        Outcome out;
        out.ok = rc_a == 0 && rc_b == 0 && !ua.empty() && ua == ub;
        out.detail = "two seeded runs wrote " + std::to_string(ua.size()) + " bytes each, " +
                     (ua == ub ? "byte-identical" : "DIFFERENT");
        return out;
    });

    std::printf("acceptance: %d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
