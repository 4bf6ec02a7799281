#include "doctest.h"

#include "hjblab/discretize.hpp"

#include <cmath>
#include <random>

using namespace hjb;

namespace {

GridPtr interval_grid(double lo, double hi, int n) {
    GridSpec spec;
    spec.dim = 1;
    spec.lo = {lo, 0.0};
    spec.hi = {hi, 0.0};
    spec.n = {n, 1};
    return build_grid(spec);
}

} // namespace

TEST_CASE("grid spacing is (hi-lo)/(n+1) exactly") {
    const GridPtr g = interval_grid(0.0, M_PI, 200);
    CHECK(g->h[0] == M_PI / 201.0);
    CHECK(g->num_active() == 200);
    CHECK(g->coord(0).x == doctest::Approx(M_PI / 201.0));
}

TEST_CASE("centered square hole excises about a tenth of the unit square") {
    GridSpec spec;
    spec.dim = 2;
    spec.lo = {0.0, 0.0};
    spec.hi = {1.0, 1.0};
    spec.n = {50, 50};
    HoleShape hole;
    hole.kind = HoleShape::Kind::box;
    const double side = 0.316;
    hole.lo = {0.5 - side / 2, 0.5 - side / 2};
    hole.hi = {0.5 + side / 2, 0.5 + side / 2};
    spec.holes = {hole};
    const GridPtr g = build_grid(spec);
    const int excised = 50 * 50 - g->num_active();
    const double area = excised * g->h[0] * g->h[1];
    // within a one-cell rim of the 0.0999 target
    CHECK(std::abs(area - side * side) <= 4.0 * side * g->h[0] + g->h[0] * g->h[1]);
    CHECK(g->connected_to_boundary);
}

TEST_CASE("hole spanning every node is rejected") {
    GridSpec spec;
    spec.dim = 1;
    spec.lo = {0.0, 0.0};
    spec.hi = {1.0, 0.0};
    spec.n = {5, 1};
    HoleShape hole;
    hole.kind = HoleShape::Kind::box;
    hole.lo = {0.0, 0.0};
    hole.hi = {1.0, 0.0};
    spec.holes = {hole};
    CHECK_THROWS_AS(build_grid(spec), std::invalid_argument);
    spec.holes.clear();
    spec.n = {2, 1};
    CHECK_THROWS_AS(build_grid(spec), std::invalid_argument);
    spec.n = {5, 1};
    spec.hi = {0.0, 0.0};
    CHECK_THROWS_AS(build_grid(spec), std::invalid_argument);
}

TEST_CASE("1D Laplacian stencil rows are (1,-2,1)/h^2") {
    const GridPtr g = interval_grid(0.0, 4.0, 3);  // h = 1
    const DiscreteHJB d = discretize(linear_operator(1.0, 0.0), g);
    const Eigen::MatrixXd L = Eigen::MatrixXd(d.L[0]);
    CHECK(L(0, 0) == doctest::Approx(-2.0));
    CHECK(L(0, 1) == doctest::Approx(1.0));
    CHECK(L(1, 0) == doctest::Approx(1.0));
    CHECK(L(1, 1) == doctest::Approx(-2.0));
    CHECK(L(1, 2) == doctest::Approx(1.0));
    CHECK(L(2, 1) == doctest::Approx(1.0));
}

TEST_CASE("positive drift selects the forward difference") {
    const double gamma = 0.5;
    ControlledOperator op = linear_operator(1.0, 0.0);
    op.controls[0].bx = constant_field(gamma);
    op.gamma = gamma;
    const GridPtr g = interval_grid(0.0, 4.0, 3);  // h = 1
    const DiscreteHJB d = discretize(op, g);
    const Eigen::MatrixXd L = Eigen::MatrixXd(d.L[0]);
    CHECK(L(1, 0) == doctest::Approx(1.0));          // backward neighbor: diffusion only
    CHECK(L(1, 1) == doctest::Approx(-2.0 - gamma));
    CHECK(L(1, 2) == doctest::Approx(1.0 + gamma));  // forward neighbor carries the drift
}

TEST_CASE("negative drift selects the backward difference and keeps off-diagonals nonnegative") {
    ControlledOperator op = linear_operator(1.0, 0.0);
    op.controls[0].bx = constant_field(-0.5);
    op.gamma = 0.5;
    const GridPtr g = interval_grid(0.0, 4.0, 3);
    const DiscreteHJB d = discretize(op, g);
    const Eigen::MatrixXd L = Eigen::MatrixXd(d.L[0]);
    CHECK(L(1, 0) == doctest::Approx(1.5));
    CHECK(L(1, 1) == doctest::Approx(-2.5));
    CHECK(L(1, 2) == doctest::Approx(1.0));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(L(i, j) >= 0.0);
}

TEST_CASE("apply_Fh of the Fucik scheme at sine samples matches the analytic value") {
    const GridPtr g = interval_grid(0.0, M_PI, 200);
    const DiscreteHJB d = discretize(fucik_operator(0.5, 1.5), g);
    const Field u = sample_field(g, [](double x, double) { return std::sin(x); });
    const Field Fu = apply_Fh(d, u);
    // F[sin] = sin'' + 1.5 sin = 0.5 sin on (0,pi); central differences are O(h^2)
    double err = 0.0;
    for (int k = 0; k < u.size(); ++k)
        err = std::max(err, std::abs(Fu.values[k] - 0.5 * u.values[k]));
    CHECK(err <= 2.5e-4);
}

TEST_CASE("apply_Fh(0) = 0 and single-control apply is the bare matrix") {
    const GridPtr g = interval_grid(0.0, 1.0, 16);
    ControlledOperator op = linear_operator(1.0, 0.3);
    op.controls[0].f = compile_expression("cos(3*x)");
    op.a0 = 2.0;
    const DiscreteHJB d = discretize(op, g);
    const Field zero(g);
    CHECK(apply_Fh(d, zero).sup_norm() == 0.0);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Field u(g);
    for (int k = 0; k < u.size(); ++k) u.values[k] = unit(rng);
    const Eigen::VectorXd direct = d.L[0] * u.values;  // source cancels under normalization
    CHECK((apply_Fh(d, u).values - direct).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("apply_Fh agrees with eval_F through finite differences on a smooth field") {
    const GridPtr g = interval_grid(0.0, M_PI, 200);
    ControlledOperator op = fucik_operator(0.5, 1.5);
    const DiscreteHJB d = discretize(op, g);
    const Field u = sample_field(g, [](double x, double) { return std::sin(x) * (1.0 + 0.3 * x); });
    const Field Fu = apply_Fh(d, u);
    double err = 0.0;
    for (int k = 1; k + 1 < u.size(); ++k) {
        const Point p = g->coord(k);
        PointState s;
        const double h = g->h[0];
        s.M = SymMat::diag((u.values[k - 1] - 2.0 * u.values[k] + u.values[k + 1]) / (h * h));
        s.p = Vec{1, (u.values[k + 1] - u.values[k - 1]) / (2.0 * h), 0.0};
        s.u = u.values[k];
        s.pos = p;
        err = std::max(err, std::abs(Fu.values[k] - eval_F(op, s)));
    }
    CHECK(err <= 1e-10);  // no drift: the discrete operator is exactly the FD composition
}

TEST_CASE("distance field on the interval") {
    const GridPtr g = interval_grid(0.0, M_PI, 201);  // odd count puts a node at pi/2
    const Field dist = distance_field(g);
    CHECK(dist.values[100] == doctest::Approx(M_PI / 2.0));
    CHECK(dist.values[0] == doctest::Approx(g->h[0]));
    CHECK(dist.values[200] == doctest::Approx(g->h[0]));
}

TEST_CASE("distance field with a hole matches a brute-force boundary scan") {
    GridSpec spec;
    spec.dim = 2;
    spec.lo = {0.0, 0.0};
    spec.hi = {1.0, 1.0};
    spec.n = {24, 24};
    HoleShape hole;
    hole.kind = HoleShape::Kind::disk;
    hole.center = Point{0.4, 0.55};
    hole.radius = 0.15;
    spec.holes = {hole};
    const GridPtr g = build_grid(spec);
    const Field dist = distance_field(g);

    // brute force: min distance over densely sampled outer edges and circle
    const int S = 4000;
    for (int k = 0; k < g->num_active(); k += 7) {
        const Point p = g->coord(k);
        double best = 1e300;
        for (int i = 0; i <= S; ++i) {
            const double s = static_cast<double>(i) / S;
            best = std::min(best, std::hypot(p.x - s, p.y - 0.0));
            best = std::min(best, std::hypot(p.x - s, p.y - 1.0));
            best = std::min(best, std::hypot(p.x - 0.0, p.y - s));
            best = std::min(best, std::hypot(p.x - 1.0, p.y - s));
            const double th = 2.0 * M_PI * s;
            best = std::min(best, std::hypot(p.x - (0.4 + 0.15 * std::cos(th)),
                                             p.y - (0.55 + 0.15 * std::sin(th))));
        }
        CHECK(dist.values[k] == doctest::Approx(best).epsilon(1e-6));
    }
}

TEST_CASE("restrict_domain with an empty set is the identity, halving works") {
    const GridPtr g = interval_grid(0.0, 1.0, 9);
    HoleShape empty;
    empty.kind = HoleShape::Kind::box;
    empty.lo = {2.0, 0.0};
    empty.hi = {3.0, 0.0};  // outside the domain
    const GridPtr same = restrict_domain(g, empty);
    CHECK(same->num_active() == g->num_active());

    HoleShape left;
    left.kind = HoleShape::Kind::box;
    left.lo = {0.0, 0.0};
    left.hi = {0.5, 0.0};
    const GridPtr right = restrict_domain(g, left);
    for (int k = 0; k < right->num_active(); ++k) CHECK(right->coord(k).x > 0.5);
    // excised measure within one cell of the request
    const double excised = (g->num_active() - right->num_active()) * g->h[0];
    CHECK(std::abs(excised - 0.5) <= g->h[0]);

    HoleShape all;
    all.kind = HoleShape::Kind::box;
    all.lo = {0.0, 0.0};
    all.hi = {1.0, 0.0};
    CHECK_THROWS_AS(restrict_domain(g, all), std::invalid_argument);
}

TEST_CASE("discrete comparison principle at an interior maximum") {
    const GridPtr g = interval_grid(0.0, M_PI, 40);
    ControlledOperator op = fucik_operator(0.5, 1.5);
    op.controls[0].bx = constant_field(0.2);
    op.controls[1].bx = constant_field(-0.2);
    op.gamma = 0.2;
    const DiscreteHJB d = discretize(op, g);
    const double dprime = d.delta + 0.5;

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> node(0, g->num_active() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd u(g->num_active());
        for (int k = 0; k < u.size(); ++k) u[k] = unif(rng);
        const int j = node(rng);
        u[j] = u.maxCoeff() + 0.25;  // force the interior max at node j
        for (int a = 0; a < d.num_controls(); ++a) {
            const double row = (d.L[a] * u)(j) - dprime * u[j];
            CHECK(row <= 1e-12);
        }
    }
}

TEST_CASE("the scheme is monotone in off-diagonal entries") {
    const GridPtr g = interval_grid(0.0, M_PI, 40);
    ControlledOperator op = fucik_operator(0.5, 1.5);
    op.controls[0].bx = constant_field(0.3);
    op.gamma = 0.3;
    const DiscreteHJB d = discretize(op, g);

    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_int_distribution<int> node(0, g->num_active() - 1);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd u(g->num_active()), v;
        for (int k = 0; k < u.size(); ++k) u[k] = unif(rng);
        v = u;
        const int j = node(rng);
        // raise v away from j while keeping v_j = u_j
        for (int k = 0; k < v.size(); ++k)
            if (k != j) v[k] += std::abs(unif(rng));
        const double fu = apply_Fh(d, u)(j);
        const double fv = apply_Fh(d, v)(j);
        CHECK(fu <= fv + 1e-12);
    }
}

TEST_CASE("consistency orders on a refinement ladder") {
    // second order with pure diffusion; first order once upwinding is active
    auto error_for = [](int n, double drift) {
        GridSpec spec;
        spec.dim = 1;
        spec.lo = {0.0, 0.0};
        spec.hi = {M_PI, 0.0};
        spec.n = {n, 1};
        const GridPtr g = build_grid(spec);
        ControlledOperator op = linear_operator(1.0, 0.0);
        op.controls[0].bx = constant_field(drift);
        op.gamma = std::abs(drift);
        const DiscreteHJB d = discretize(op, g);
        const Field u = sample_field(g, [](double x, double) { return std::sin(x); });
        double err = 0.0;
        for (int k = 0; k < u.size(); ++k) {
            const double x = g->coord(k).x;
            const double exact = -std::sin(x) + drift * std::cos(x);
            err = std::max(err, std::abs(apply_Fh(d, u).values[k] - exact));
        }
        return err;
    };

    for (double drift : {0.0, 0.4}) {
        const double nominal = drift == 0.0 ? 2.0 : 1.0;
        const double e1 = error_for(50, drift);
        const double e2 = error_for(100, drift);
        const double e3 = error_for(200, drift);
        const double h1 = M_PI / 51, h2 = M_PI / 101, h3 = M_PI / 201;
        const double order_a = std::log(e1 / e2) / std::log(h1 / h2);
        const double order_b = std::log(e2 / e3) / std::log(h2 / h3);
        CHECK(order_a >= 0.9 * nominal);
        CHECK(order_b >= 0.9 * nominal);
    }
}

TEST_CASE("2D rejects off-diagonal diffusion and out-of-range ellipticity") {
    GridSpec spec;
    spec.dim = 2;
    spec.lo = {0.0, 0.0};
    spec.hi = {1.0, 1.0};
    spec.n = {8, 8};
    const GridPtr g = build_grid(spec);

    ControlledOperator op = linear_operator(1.0, 0.0, 2);
    op.controls[0].axy = constant_field(0.1);
    CHECK_THROWS_AS(discretize(op, g), std::invalid_argument);

    ControlledOperator bad = linear_operator(1.0, 0.0, 2);
    bad.controls[0].axx = compile_expression("1 + 3*x");  // exceeds Lambda inside
    CHECK_THROWS_AS(discretize(bad, g), std::invalid_argument);
}

TEST_CASE("table-backed coefficients reproduce the sampled expression") {
    const GridPtr g = interval_grid(0.0, M_PI, 50);
    const Field table = sample_field(g, [](double x, double) { return 1.2 + 0.1 * std::sin(x); });
    ControlledOperator op = linear_operator(1.0, 0.0);
    op.controls[0].axx = table_coefficient(table);
    op.lambda = 1.1;
    op.Lambda = 1.3;
    const DiscreteHJB d_table = discretize(op, g);

    ControlledOperator op_expr = op;
    op_expr.controls[0].axx = compile_expression("1.2 + 0.1*sin(x)");
    const DiscreteHJB d_expr = discretize(op_expr, g);
    const Field u = sample_field(g, [](double x, double) { return std::sin(2.0 * x); });
    CHECK((apply_Fh(d_table, u).values - apply_Fh(d_expr, u).values).cwiseAbs().maxCoeff()
          <= 1e-13);
}

TEST_CASE("apply_Fh rejects fields from a different grid") {
    const GridPtr g1 = interval_grid(0.0, M_PI, 20);
    const GridPtr g2 = interval_grid(0.0, M_PI, 20);
    const DiscreteHJB d = discretize(fucik_operator(0.5, 1.5), g1);
    CHECK_THROWS_AS(apply_Fh(d, Field(g2)), std::invalid_argument);
}
