#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cma/domains.hpp"
#include "cma/psh.hpp"

using namespace cma;

TEST_CASE("ball and ellipsoid ship candidates with hessian at least identity") {
    for (DomainDef d : {make_ball(2, 1.0), make_ellipsoid(2, {1.0, 0.5})}) {
        INFO("domain " << d.name);
        REQUIRE(d.rho.has_value());
        REQUIRE(d.rho_expected_ok);
        GridPtr g = d.grid(0.25);
        ScalarField rho = ScalarField::sample(g, *d.rho);
        REQUIRE(uniformly_strictly_psh(rho, 1e-8));
    }
}

TEST_CASE("ball accepts centers and scales, in one or two variables") {
    DomainDef off = make_ball(2, 0.5, Point{0.25, 0, -0.25, 0});
    REQUIRE(off.fn(Point{0.25, 0, -0.25, 0}) == Catch::Approx(-0.25));
    REQUIRE(off.fn(Point{0.75, 0, -0.25, 0}) == Catch::Approx(0.0).margin(1e-15));

    DomainDef disc = make_ball(1, 1.0);
    GridPtr g = disc.grid(0.25);
    REQUIRE(g->n == 1);
    REQUIRE(g->dims == 2);
}

TEST_CASE("ellipsoid candidate is the scaled defining function") {
    DomainDef d = make_ellipsoid(2, {1.0, 0.5});
    // Largest squared semiaxis is 1, so the candidate equals fn here; its
    // weakest Hessian direction (along z1) sits exactly at the identity.
    GridPtr g = d.grid(0.25);
    ScalarField rho = ScalarField::sample(g, *d.rho);
    PshReport rep = uniformly_strictly_psh_report(rho, 1e-8);
    REQUIRE(rep.clean());
    REQUIRE(rep.worst_eigenvalue == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("egg candidate degenerates exactly near the flat circle") {
    DomainDef d = make_egg(2);
    REQUIRE_FALSE(d.rho_expected_ok);
    REQUIRE(d.rho.has_value());
    GridPtr g = d.grid(0.25);
    ScalarField rho = ScalarField::sample(g, *d.rho);

    // The candidate is psh (it is a valid defining function) ...
    REQUIRE(psh_report(rho, 1e-8).clean());

    // ... but |z2|^4 contributes Hessian 4|z2|^2 in the second variable, so
    // the >= identity test fails precisely where 4|z2|^2 + h^2 < 1.
    PshReport rep = uniformly_strictly_psh_report(rho, 1e-8, NodeSet::AllInterior);
    REQUIRE_FALSE(rep.clean());
    REQUIRE(rep.worst_eigenvalue <= -0.9);
    REQUIRE(rep.violating_node_count > 0);
    REQUIRE(rep.violating_nodes.size() == static_cast<std::size_t>(rep.violating_node_count));
    for (std::int64_t node : rep.violating_nodes) {
        Point p = g->position(node);
        REQUIRE(p[2] * p[2] + p[3] * p[3] < 0.25);
    }
}

TEST_CASE("bidisc ships a barrier candidate but no strict defining function") {
    DomainDef d = make_bidisc();
    REQUIRE_FALSE(d.rho.has_value());
    REQUIRE_FALSE(d.rho_expected_ok);
    REQUIRE(d.barrier_candidate.has_value());

    GridPtr g = d.grid(0.25);
    ScalarField cand = ScalarField::sample(g, *d.barrier_candidate);
    // max(|z1|^2, |z2|^2) - 1 vanishes on the distinguished boundary but is
    // flat in the other variable on each face, so it is nowhere near >= I.
    REQUIRE_FALSE(uniformly_strictly_psh(cand, 1e-8));

    // The defining function max(|z1|, |z2|) - 1 really carves out the bidisc.
    REQUIRE(d.fn(Point{0.9, 0, 0.9, 0}) < 0);
    REQUIRE(d.fn(Point{1.1, 0, 0, 0}) > 0);
    REQUIRE(d.fn(Point{0, 0, 0, 1.1}) > 0);
}

TEST_CASE("domains resolve by name with parameters") {
    DomainParams p;
    p.n = 2;
    p.radius = 2.0;
    REQUIRE(domain_by_name("ball", p).fn(Point{2, 0, 0, 0}) == Catch::Approx(0.0).margin(1e-15));
    p.semiaxes = {1.0, 0.5};
    REQUIRE(domain_by_name("ellipsoid", p).name == "ellipsoid");
    p.egg_exponent = 3;
    REQUIRE(domain_by_name("egg", p).fn(Point{0, 0, 1, 0}) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(domain_by_name("bidisc").name == "bidisc");
    REQUIRE_THROWS_AS(domain_by_name("polydisc"), GridError);
}

TEST_CASE("domain constructors reject degenerate parameters") {
    REQUIRE_THROWS_AS(make_ball(2, 0.0), GridError);
    REQUIRE_THROWS_AS(make_ball(2, -1.0), GridError);
    REQUIRE_THROWS_AS(make_ellipsoid(2, {1.0, 0.0}), GridError);
    REQUIRE_THROWS_AS(make_ellipsoid(2, {-1.0, 1.0}), GridError);
    REQUIRE_THROWS_AS(make_egg(1), GridError);
}
