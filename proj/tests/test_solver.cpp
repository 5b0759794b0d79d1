#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cma/domains.hpp"
#include "cma/solver.hpp"

using namespace cma;

namespace {

struct BallSetup {
    GridPtr g;
    ScalarField rho;
};

BallSetup ball_setup(int n, double h) {
    DomainDef d = make_ball(n, 1.0);
    GridPtr g = d.grid(h);
    return {g, ScalarField::sample(g, *d.rho)};
}

DirichletData const_data(double phi, double f) {
    return {[phi](const Point&) { return phi; }, [f](const Point&) { return f; }, {}};
}

// Errors of a computed field against an exact solution: over Interior nodes,
// and over all occupied nodes against the plain lattice sampling (Boundary
// nodes carry anchored data, so the latter measures the geometric gap).
struct Errors {
    double interior = 0;
    double plain = 0;
};

Errors errors_against(const ScalarField& u, const RealFn& exact) {
    const GridDomain& g = *u.dom;
    Errors e;
    for (std::int64_t node : g.interior_list)
        e.interior = std::max(e.interior, std::fabs(u[node] - exact(g.position(node))));
    e.plain = e.interior;
    for (std::int64_t node : g.boundary_list)
        e.plain = std::max(e.plain, std::fabs(u[node] - exact(g.position(node))));
    return e;
}

}  // namespace

TEST_CASE("constant density on the ball reproduces the quadratic solution") {
    auto [g, rho] = ball_setup(2, 0.25);
    DirichletData data = const_data(0.0, 32.0);
    SolveResult res = solve(g, data, rho);

    // phi + K rho is already the solution, so the sandwich is tight ...
    REQUIRE(res.K_sub >= 1.0);
    REQUIRE(res.K_sub <= 1.001);
    REQUIRE(res.K_super == 0.0);
    REQUIRE(res.sweeps == 1);

    // ... and the discrete operator is exact on quadratics.
    auto exact = [](const Point& p) { return norm2(p, 4) - 1.0; };
    Errors e = errors_against(res.u, exact);
    REQUIRE(e.interior <= 1e-9);
    // Boundary nodes store anchored data; the worst lattice-vs-anchor gap on
    // this grid is a fixed geometric quantity.
    REQUIRE(e.plain == Catch::Approx(1.0625).margin(1e-9));

    // Halving h halves nothing in the interior (still exact) but shrinks the
    // boundary-node geometric gap roughly linearly.
    auto [g2, rho2] = ball_setup(2, 0.125);
    SolveResult fine = solve(g2, data, rho2);
    Errors e2 = errors_against(fine.u, exact);
    REQUIRE(e2.interior <= 1e-9);
    REQUIRE(e2.plain == Catch::Approx(0.515625).margin(1e-9));
    REQUIRE(e.plain / e2.plain >= 1.5);
}

TEST_CASE("solutions pass the discrete membership screen") {
    auto [g, rho] = ball_setup(2, 0.25);
    SolveResult res = solve(g, const_data(0.0, 32.0), rho);
    DirichletData data = const_data(0.0, 32.0);

    MembershipReport rep = family_membership(res.u, data, 1e-6);
    REQUIRE(rep.in_family());
    REQUIRE(rep.worst_directional >= -1e-6);
    REQUIRE(rep.worst_density_gap >= -1e-6);

    // Shifting down leaves the boundary equality but keeps domination.
    ScalarField low = res.u;
    for (double& x : low.v) x -= 0.1;
    REQUIRE_FALSE(family_membership(low, data, 1e-6).in_family());
    MembershipReport atmost = family_membership(low, data, 1e-6, 1, BoundaryMode::AtMost);
    REQUIRE(atmost.in_family());
    REQUIRE(atmost.worst_boundary == Catch::Approx(-0.1).margin(1e-9));
}

TEST_CASE("sampled family members stay below the computed solution") {
    auto [g, rho] = ball_setup(2, 0.25);
    DirichletData data = const_data(0.0, 32.0);
    SolveResult res = solve(g, data, rho);
    DominanceReport rep = envelope_dominance(res.u, data, rho, 30, res.K_sub);
    REQUIRE(rep.samples + rep.rejected == 30);
    REQUIRE(rep.rejected == 0);
    REQUIRE(rep.max_defect <= 1e-9);
    REQUIRE(rep.pass);
}

TEST_CASE("vanishing density recovers the pluriharmonic extension") {
    auto [g, rho] = ball_setup(2, 0.25);
    DirichletData data{[](const Point& p) { return p[0]; },
                       [](const Point&) { return 0.0; },
                       {}};
    SolveResult res = solve(g, data, rho);
    REQUIRE(res.K_sub == 0.0);
    REQUIRE(res.K_super == 0.0);
    Errors e = errors_against(res.u, [](const Point& p) { return p[0]; });
    REQUIRE(e.interior <= 1e-9);

    // Boundary nodes carry the anchored data exactly, by assignment.
    for (std::int64_t b : g->boundary_list) REQUIRE(res.u[b] == g->anchor(b)[0]);
}

TEST_CASE("one complex variable works through the same pipeline") {
    auto [g, rho] = ball_setup(1, 0.05);
    SolveResult res = solve(g, const_data(0.0, 4.0), rho);
    Errors e = errors_against(res.u, [](const Point& p) { return norm2(p, 2) - 1.0; });
    REQUIRE(e.interior <= 1e-9);
    REQUIRE(res.K_sub >= 1.0);
    REQUIRE(res.K_sub <= 1.001);
}

TEST_CASE("non-exact densities iterate monotonically up to convergence") {
    auto [g, rho] = ball_setup(2, 0.25);
    DirichletData data = const_data(0.0, 20.0);

    std::ostringstream log;
    double worst_drop = 0.0;
    ScalarField prev(g);
    bool have_prev = false;
    SolveConfig cfg;
    cfg.sweep_log = &log;
    cfg.on_sweep = [&](int, double, double, const ScalarField& u) {
        if (have_prev)
            for (std::int64_t node : g->interior_list)
                worst_drop = std::max(worst_drop, prev[node] - u[node]);
        prev = u;
        have_prev = true;
    };
    SolveResult res = solve(g, data, rho, cfg);

    // sqrt(20/32) is the exact scaling constant for the subsolution.
    REQUIRE(res.K_sub == Catch::Approx(std::sqrt(20.0 / 32.0)).epsilon(2e-3));
    REQUIRE(res.sweeps >= 10);
    REQUIRE(res.sweeps <= 200);
    REQUIRE(res.final_residual <= 1e-6);
    REQUIRE(worst_drop <= 1e-12);  // Perron iteration climbs from below

    // The sandwich brackets the result at every occupied node.
    for (std::int64_t node : g->interior_list) {
        REQUIRE(res.u[node] >= res.sub[node] - 1e-9);
        REQUIRE(res.u[node] <= res.super[node] + 1e-9);
    }

    // One CSV row per sweep, after the header.
    std::istringstream is(log.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    REQUIRE(line == "sweep,index,max_update,max_residual");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    REQUIRE(rows == res.sweeps);
}

TEST_CASE("red-black sweeps are independent of the thread count") {
    auto [g, rho] = ball_setup(2, 0.25);
    DirichletData data = const_data(0.0, 20.0);

    SolveConfig rb1;
    rb1.order = SweepOrder::RedBlack;
    rb1.threads = 1;
    SolveConfig rb4 = rb1;
    rb4.threads = 4;

    SolveResult a = solve(g, data, rho, rb1);
    SolveResult b = solve(g, data, rho, rb4);
    REQUIRE(a.sweeps == b.sweeps);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < a.u.v.size(); ++i)
        if (a.u.v[i] != b.u.v[i]) ++mismatches;
    REQUIRE(mismatches == 0);  // bitwise equal, not merely close

    // Lexicographic and red-black agree to solver tolerance.
    SolveResult lex = solve(g, data, rho);
    REQUIRE(sup_norm_diff(a.u, lex.u) <= 1e-4);
}

TEST_CASE("densities scale as the determinant: four times f doubles the profile") {
    auto [g, rho] = ball_setup(2, 0.25);
    SolveResult res = solve(g, const_data(0.0, 128.0), rho);
    Errors e = errors_against(res.u, [](const Point& p) { return 2.0 * (norm2(p, 4) - 1.0); });
    REQUIRE(e.interior <= 1e-6);
    REQUIRE(res.K_sub == Catch::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("a heavier density pushes the solution further down") {
    auto [g, rho] = ball_setup(2, 0.25);
    SolveResult u32 = solve(g, const_data(0.0, 32.0), rho);
    SolveResult u50 = solve(g, const_data(0.0, 50.0), rho);
    double worst = -1e300;
    for (std::int64_t node : g->interior_list)
        worst = std::max(worst, u50.u[node] - u32.u[node]);
    REQUIRE(worst <= 1e-9);
}

TEST_CASE("non-convergence surfaces as a typed error with diagnostics") {
    auto [g, rho] = ball_setup(2, 0.25);
    SolveConfig cfg;
    cfg.max_sweeps = 1;
    try {
        solve(g, const_data(0.0, 20.0), rho, cfg);
        FAIL("expected SolveError");
    } catch (const SolveError& e) {
        REQUIRE(e.sweeps == 1);
        REQUIRE(e.residual > 0.0);
        REQUIRE(std::string(e.what()).find("no convergence") != std::string::npos);
    }
}

TEST_CASE("solver inputs are validated before any work happens") {
    auto [g, rho] = ball_setup(2, 0.25);

    SolveConfig bad_tol;
    bad_tol.tol_res = 0.0;
    REQUIRE_THROWS_AS(solve(g, const_data(0, 32), rho, bad_tol), GridError);

    SolveConfig bad_sweeps;
    bad_sweeps.max_sweeps = 0;
    REQUIRE_THROWS_AS(solve(g, const_data(0, 32), rho, bad_sweeps), GridError);

    // x1 is negative on half the ball.
    DirichletData signed_f{[](const Point&) { return 0.0; },
                           [](const Point& p) { return p[0]; },
                           {}};
    REQUIRE_THROWS_AS(solve(g, signed_f, rho), GridError);

    // rho must live on the solve grid.
    auto [g2, rho2] = ball_setup(2, 0.125);
    REQUIRE_THROWS_AS(solve(g, const_data(0, 32), rho2), GridError);

    // A candidate below the identity threshold is rejected by the sandwich.
    ScalarField weak = rho;
    for (double& x : weak.v) x *= 0.5;
    REQUIRE_THROWS_AS(subsolution(const_data(0, 32), weak), GridError);
}
