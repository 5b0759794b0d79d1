#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cma/domains.hpp"
#include "cma/psh.hpp"
#include "cma/sampling.hpp"

using namespace cma;

namespace {

GridPtr ball_grid(int n, double h) { return make_ball(n, 1.0).grid(h); }

}  // namespace

TEST_CASE("plurisubharmonicity reports on model fields") {
    GridPtr g = ball_grid(2, 0.25);
    ScalarField sq = ScalarField::sample(g, [](const Point& p) { return norm2(p, 4); });
    PshReport ok = psh_report(sq, 1e-8);
    REQUIRE(ok.clean());
    REQUIRE(ok.nodes_checked == static_cast<std::int64_t>(g->interior_list.size()));
    REQUIRE(ok.worst_eigenvalue == Catch::Approx(1.0).margin(1e-9));

    ScalarField bad = ScalarField::sample(g, [](const Point& p) { return -norm2(p, 4); });
    PshReport fail = psh_report(bad, 1e-8);
    REQUIRE_FALSE(fail.clean());
    REQUIRE(fail.violating_node_count == fail.nodes_checked);
    REQUIRE(fail.worst_eigenvalue == Catch::Approx(-1.0).margin(1e-9));
    REQUIRE(fail.worst_node >= 0);

    // Pluriharmonic: complex Hessian is zero, so it passes at any tolerance.
    ScalarField ph = ScalarField::sample(g, [](const Point& p) { return p[0] * p[0] - p[1] * p[1]; });
    REQUIRE(psh_report(ph, 1e-10).clean());
}

TEST_CASE("deep interior restriction skips the shallow stencil ring") {
    GridPtr g = ball_grid(2, 0.25);
    ScalarField sq = ScalarField::sample(g, [](const Point& p) { return norm2(p, 4); });
    PshReport all = psh_report(sq, 1e-8, NodeSet::AllInterior);
    PshReport deep = psh_report(sq, 1e-8, NodeSet::DeepInterior);
    REQUIRE(deep.nodes_checked > 0);
    REQUIRE(deep.nodes_checked < all.nodes_checked);
    for (std::int64_t node : g->interior_list)
        if (is_deep_interior(*g, node))
            for (const auto& off : g->offsets) {
                std::int64_t j = g->neighbor(node, off);
                REQUIRE(j >= 0);
                REQUIRE(g->node_class(j) == NodeClass::Interior);
            }
}

TEST_CASE("uniform strict plurisubharmonicity compares the hessian against identity") {
    GridPtr g = ball_grid(2, 0.25);
    ScalarField rho = ScalarField::sample(g, [](const Point& p) { return norm2(p, 4) - 1.0; });
    REQUIRE(uniformly_strictly_psh(rho, 1e-8));

    // Halving the candidate halves its Hessian below the identity threshold.
    ScalarField half = ScalarField::sample(g, [](const Point& p) { return 0.5 * (norm2(p, 4) - 1.0); });
    PshReport rep = uniformly_strictly_psh_report(half, 1e-8);
    REQUIRE_FALSE(rep.clean());
    REQUIRE(rep.worst_eigenvalue == Catch::Approx(-0.5).margin(1e-9));
}

TEST_CASE("barriers from a strictly psh defining candidate pass at every probed point") {
    DomainDef ball = make_ball(2, 1.0);
    GridPtr g = ball.grid(0.25);
    ScalarField cand = ScalarField::sample_anchored(g, *ball.rho);

    // A deterministic spread of anchors over the whole boundary list.
    std::size_t m = g->boundary_list.size();
    WeylScalar picker(7);
    for (int k = 0; k < 20; ++k) {
        std::int64_t b = g->boundary_list[static_cast<std::size_t>(picker.next() * m) % m];
        Point zeta = g->anchor(b);
        ScalarField v = barrier(cand, zeta);
        BarrierReport rep = verify_barrier(v, zeta, 4 * g->h);
        INFO("anchor (" << zeta[0] << ", " << zeta[1] << ", " << zeta[2] << ", " << zeta[3] << ")");
        REQUIRE(rep.value_at_zeta_ok);
        REQUIRE(rep.negative_away);
        REQUIRE(rep.psh_ok);
        REQUIRE(rep.pass());
    }
}

TEST_CASE("barrier construction rejects points off the zero set") {
    DomainDef ball = make_ball(2, 1.0);
    GridPtr g = ball.grid(0.25);
    ScalarField cand = ScalarField::sample_anchored(g, *ball.rho);
    REQUIRE_THROWS_AS(barrier(cand, Point{0.5, 0, 0, 0}), GridError);
    ScalarField v = barrier(cand, Point{1, 0, 0, 0});
    REQUIRE_THROWS_AS(verify_barrier(v, Point{1, 0, 0, 0}, 1.5 * g->h), GridError);
}

TEST_CASE("product domain candidate fails the barrier test on a face") {
    DomainDef bd = make_bidisc();
    GridPtr g = bd.grid(0.25);
    ScalarField cand = ScalarField::sample_anchored(g, *bd.barrier_candidate);
    Point zeta{1, 0, 0, 0};  // center of the face |z1| = 1
    ScalarField v = barrier(cand, zeta);
    BarrierReport rep = verify_barrier(v, zeta, 4 * g->h);
    REQUIRE_FALSE(rep.pass());
    // The failure is curvature, not boundary values: along the analytic disk
    // {z1 = zeta} the candidate is flat in z2, so subtracting |z - zeta|^2
    // leaves a strictly negative Hessian eigenvalue.
    REQUIRE_FALSE(rep.psh_ok);
    REQUIRE(rep.worst_eigenvalue < -0.5);
}

TEST_CASE("smallest psh-restoring multiple is found by bisection") {
    GridPtr g = ball_grid(2, 0.25);
    ScalarField rho = ScalarField::sample(g, [](const Point& p) { return norm2(p, 4) - 1.0; });

    // -|z|^2 needs exactly K = 1 to become psh against H_C(rho) = I.
    ScalarField psi = ScalarField::sample(g, [](const Point& p) { return -norm2(p, 4); });
    double K = find_psh_K(psi, rho, 1024.0);
    REQUIRE(K >= 1.0);
    REQUIRE(K <= 1.001);

    // Already psh data needs no help.
    ScalarField good = ScalarField::sample(g, [](const Point& p) { return norm2(p, 4); });
    REQUIRE(find_psh_K(good, rho, 1024.0) == 0.0);

    // A cap below the true constant is reported, not silently clamped.
    ScalarField steep = ScalarField::sample(g, [](const Point& p) { return -3.0 * norm2(p, 4); });
    REQUIRE_THROWS_AS(find_psh_K(steep, rho, 2.0), GridError);
    REQUIRE(find_psh_K(steep, rho, 16.0) == Catch::Approx(3.0).epsilon(2e-3));
}

TEST_CASE("mollification is exact on constants and shifts quadratics uniformly") {
    GridPtr g = ball_grid(2, 0.25);
    double eps = 2 * g->h;

    ScalarField c = ScalarField::sample(g, [](const Point&) { return 3.25; });
    ScalarField mc = mollify(c, eps);
    REQUIRE(sup_norm_diff(mc, c) < 1e-12);

    // Convolving |z|^2 with a radial bump adds the same constant at every
    // node whose averaging ball stays inside the occupied lattice.
    ScalarField q = ScalarField::sample(g, [](const Point& p) { return norm2(p, 4); });
    ScalarField mq = mollify(q, eps);
    double shift_min = 1e300, shift_max = -1e300;
    for (std::int64_t node : g->interior_list) {
        if (!is_deep_interior(*g, node)) continue;
        Point p = g->position(node);
        if (norm2(p, 4) > 0.5 * 0.5) continue;  // stay clear of the rim
        double s = mq[node] - q[node];
        shift_min = std::min(shift_min, s);
        shift_max = std::max(shift_max, s);
    }
    REQUIRE(shift_min > 0.0);
    REQUIRE(shift_max - shift_min < 1e-10);

    // Averaging preserves plurisubharmonicity where the full ball was seen.
    PshReport rep = psh_report(mq, 1e-8, NodeSet::DeepInterior);
    REQUIRE(rep.clean());
}
