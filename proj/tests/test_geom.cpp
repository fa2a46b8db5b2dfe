#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "formfind/geom.hpp"
#include "formfind/util.hpp"

using namespace formfind;
using geom::Vec3;

namespace {

// Independent oracle: textbook Cox-de Boor recursion evaluated naively, with
// the 0/0 := 0 convention.
double naive_basis(int i, int p, double u, const std::vector<double>& U) {
    if (p == 0) {
        // right-continuous spans; the last nonzero span is closed on the right
        if (U[i] <= u && u < U[i + 1]) return 1.0;
        if (u == U.back() && U[i] < U[i + 1] && u == U[i + 1]) return 1.0;
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    if (U[i + p] > U[i]) left = (u - U[i]) / (U[i + p] - U[i]) * naive_basis(i, p - 1, u, U);
    if (U[i + p + 1] > U[i + 1])
        right = (U[i + p + 1] - u) / (U[i + p + 1] - U[i + 1]) * naive_basis(i + 1, p - 1, u, U);
    return left + right;
}

// Independent oracle: rational de Casteljau on a single-segment Bezier curve
// (clamped knots, no interior knots).
Vec3 rational_de_casteljau(const geom::NurbsCurve& c, double u) {
    const std::size_t n = c.control_points.size();
    std::vector<Eigen::Vector4d> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i].head<3>() = c.weights[i] * c.control_points[i];
        pts[i](3) = c.weights[i];
    }
    for (std::size_t r = 1; r < n; ++r)
        for (std::size_t i = 0; i + r < n; ++i) pts[i] = (1 - u) * pts[i] + u * pts[i + 1];
    return pts[0].head<3>() / pts[0](3);
}

geom::NurbsCurve random_curve(util::Rng& rng) {
    geom::NurbsCurve c;
    c.degree = 1 + static_cast<int>(rng.index(5));
    const int n_ctrl = c.degree + 1 + static_cast<int>(rng.index(5));
    for (int i = 0; i < n_ctrl; ++i) {
        c.control_points.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
        c.weights.push_back(rng.uniform(0.3, 3.0));
    }
    c.knots = geom::uniform_clamped_knots(c.degree, n_ctrl);
    return c;
}

geom::NurbsCurve quarter_circle() {
    geom::NurbsCurve c;
    c.degree = 2;
    c.control_points = {Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
    c.weights = {1.0, std::sqrt(2.0) / 2.0, 1.0};
    c.knots.values = {0, 0, 0, 1, 1, 1};
    return c;
}

}  // namespace

TEST_CASE("basis functions: linear and clamped endpoint cases") {
    geom::KnotVector kv{{0, 0, 1, 1}};
    const auto lin = geom::basis_functions(0.5, 1, kv);
    REQUIRE(lin.size() == 2);
    CHECK(lin[0] == std::pair<int, double>{0, 0.5});
    CHECK(lin[1] == std::pair<int, double>{1, 0.5});

    geom::KnotVector kv2{{0, 0, 0, 1, 1, 1}};
    const auto quad = geom::basis_functions(0.0, 2, kv2);
    REQUIRE(quad.size() == 3);
    CHECK(quad[0].second == 1.0);
    CHECK(quad[1].second == 0.0);
    CHECK(quad[2].second == 0.0);
}

TEST_CASE("basis functions match naive Cox-de Boor recursion") {
    util::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = random_curve(rng);
        const double u = rng.uniform(c.domain_begin(), c.domain_end());
        double sum = 0.0;
        for (const auto& [i, v] : geom::basis_functions(u, c.degree, c.knots)) {
            CHECK(v == Catch::Approx(naive_basis(i, c.degree, u, c.knots.values)).margin(1e-12));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("basis functions reject out-of-domain parameters") {
    geom::KnotVector kv{{0, 0, 1, 1}};
    CHECK_THROWS_AS(geom::basis_functions(-0.1, 1, kv), std::domain_error);
    CHECK_THROWS_AS(geom::basis_functions(1.1, 1, kv), std::domain_error);
}

TEST_CASE("curve_point: straight segment midpoint") {
    geom::NurbsCurve c;
    c.degree = 1;
    c.control_points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    c.weights = {1, 1};
    c.knots.values = {0, 0, 1, 1};
    CHECK((geom::curve_point(c, 0.5) - Vec3(0.5, 0, 0)).norm() < 1e-15);
}

TEST_CASE("curve_point: weight scaling cancels") {
    util::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto c = random_curve(rng);
        const double u = rng.uniform(c.domain_begin(), c.domain_end());
        const Vec3 p = geom::curve_point(c, u);
        auto scaled = c;
        for (auto& w : scaled.weights) w *= 2.0;
        CHECK((geom::curve_point(scaled, u) - p).norm() < 1e-12);
    }
}

TEST_CASE("curve_point: quarter circle lies on the unit circle") {
    const auto c = quarter_circle();
    const Vec3 p = geom::curve_point(c, 0.5);
    CHECK(p.norm() == Catch::Approx(1.0).margin(1e-12));
    // de Casteljau oracle agreement across the parameter range
    for (double u : {0.0, 0.1, 0.3, 0.5, 0.77, 1.0})
        CHECK((geom::curve_point(c, u) - rational_de_casteljau(c, u)).norm() < 1e-12);
}

TEST_CASE("curve_derivatives: line, finite differences, weight scaling") {
    geom::NurbsCurve line;
    line.degree = 1;
    line.control_points = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
    line.weights = {1, 1};
    line.knots.values = {0, 0, 1, 1};
    for (double u : {0.0, 0.25, 0.9})
        CHECK((geom::curve_derivatives(line, u, 1)[0] - Vec3(2, 0, 0)).norm() < 1e-12);

    CHECK_THROWS(geom::curve_derivatives(line, 0.5, 3));

    util::Rng rng(23);
    for (int trial = 0; trial < 60; ++trial) {
        const auto c = random_curve(rng);
        const double u = rng.uniform(c.domain_begin() + 0.05, c.domain_end() - 0.05);
        const double h = 1e-6;
        const Vec3 fd = (geom::curve_point(c, u + h) - geom::curve_point(c, u - h)) / (2 * h);
        const auto d = geom::curve_derivatives(c, u, 2);
        CHECK((d[0] - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));

        auto scaled = c;
        for (auto& w : scaled.weights) w *= 3.7;
        const auto ds = geom::curve_derivatives(scaled, u, 2);
        CHECK((d[0] - ds[0]).norm() < 1e-9 * std::max(1.0, d[0].norm()));
        CHECK((d[1] - ds[1]).norm() < 1e-9 * std::max(1.0, d[1].norm()));
    }
}

TEST_CASE("curvature: line, circle, hand-computed parabola") {
    geom::NurbsCurve line;
    line.degree = 1;
    line.control_points = {Vec3(0, 0, 0), Vec3(3, 1, 2)};
    line.weights = {1, 1};
    line.knots.values = {0, 0, 1, 1};
    for (double u : {0.1, 0.5, 0.8}) CHECK(geom::curvature_and_tangent(line, u).first < 1e-12);

    const auto arc = quarter_circle();
    for (double u : {0.0, 0.2, 0.5, 0.9, 1.0})
        CHECK(geom::curvature_and_tangent(arc, u).first == Catch::Approx(1.0).margin(1e-9));

    // quadratic through (0,0),(1,1),(2,0): C'(0.5)=(2,0,0), C''=(0,-4,0), kappa=1
    geom::NurbsCurve quad;
    quad.degree = 2;
    quad.control_points = {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(2, 0, 0)};
    quad.weights = {1, 1, 1};
    quad.knots.values = {0, 0, 0, 1, 1, 1};
    const auto d = geom::curve_derivatives(quad, 0.5, 2);
    CHECK((d[0] - Vec3(2, 0, 0)).norm() < 1e-12);
    CHECK((d[1] - Vec3(0, -4, 0)).norm() < 1e-12);
    CHECK(geom::curvature_and_tangent(quad, 0.5).first == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("curvature: singular parametrization is an error") {
    geom::NurbsCurve c;
    c.degree = 2;
    c.control_points = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0)};
    c.weights = {1, 1, 1};
    c.knots.values = {0, 0, 0, 1, 1, 1};
    CHECK_THROWS(geom::curvature_and_tangent(c, 0.0));
}

TEST_CASE("sample_curve: counts, endpoints, straight segment") {
    geom::NurbsCurve line;
    line.degree = 1;
    line.control_points = {Vec3(0, 0, 0), Vec3(4, 0, 0)};
    line.weights = {1, 1};
    line.knots.values = {0, 0, 1, 1};

    const auto s20 = geom::sample_curve(line, 20);
    REQUIRE(s20.size() == 21);
    CHECK(s20.front().u == 0.0);
    CHECK(s20.back().u == 1.0);
    for (const auto& s : s20) {
        CHECK(s.curvature == 0.0);
        CHECK((s.tangent - Vec3(1, 0, 0)).norm() < 1e-12);
    }
    CHECK(geom::sample_curve(line, 1).size() == 2);
    CHECK_THROWS(geom::sample_curve(line, 0));
}

TEST_CASE("surface_point: bilinear patch and weight scaling") {
    geom::NurbsSurface s;
    s.degree_u = s.degree_v = 1;
    s.control_net = {{Vec3(0, 0, 0), Vec3(0, 1, 0)}, {Vec3(1, 0, 0), Vec3(1, 1, 0)}};
    s.weights = {{1, 1}, {1, 1}};
    s.knots_u.values = {0, 0, 1, 1};
    s.knots_v.values = {0, 0, 1, 1};
    CHECK((geom::surface_point(s, 0.5, 0.5) - Vec3(0.5, 0.5, 0)).norm() < 1e-15);

    auto scaled = s;
    for (auto& row : scaled.weights)
        for (auto& w : row) w *= 5.0;
    CHECK((geom::surface_point(scaled, 0.3, 0.8) - geom::surface_point(s, 0.3, 0.8)).norm() <
          1e-12);
}

TEST_CASE("loft: planar sections, boundary reproduction, ruled midpoint") {
    auto make_line = [](double z) {
        geom::NurbsCurve c;
        c.degree = 1;
        c.control_points = {Vec3(0, 0, z), Vec3(1, 0, z)};
        c.weights = {1, 1};
        c.knots.values = {0, 0, 1, 1};
        return c;
    };
    const auto surf = geom::loft_surface({make_line(0), make_line(1), make_line(2)}, 2);
    double zprev = -1;
    for (double v : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Vec3 p = geom::surface_point(surf, 0.4, v);
        CHECK(p.x() == Catch::Approx(0.4).margin(1e-12));
        CHECK(std::abs(p.y()) < 1e-12);
        CHECK(p.z() > zprev);
        zprev = p.z();
    }
    CHECK(geom::surface_point(surf, 0.3, 0.0).z() == Catch::Approx(0.0).margin(1e-9));
    CHECK(geom::surface_point(surf, 0.3, 1.0).z() == Catch::Approx(2.0).margin(1e-9));

    // clamped skinning boundary equals the first section along u
    util::Rng rng(3);
    std::vector<geom::NurbsCurve> sections;
    for (int k = 0; k < 3; ++k) {
        geom::NurbsCurve c;
        c.degree = 3;
        for (int i = 0; i < 6; ++i) {
            c.control_points.emplace_back(i + rng.uniform(-0.2, 0.2), 2.0 * k,
                                          rng.uniform(0, 1));
            c.weights.push_back(rng.uniform(0.8, 1.25));
        }
        c.knots = geom::uniform_clamped_knots(3, 6);
        sections.push_back(c);
    }
    const auto skin = geom::loft_surface(sections, 2);
    for (int i = 0; i <= 20; ++i) {
        const double u = i / 20.0;
        CHECK((geom::surface_point(skin, u, 0.0) - geom::curve_point(sections[0], u)).norm() <
              1e-9);
        CHECK((geom::surface_point(skin, u, 1.0) - geom::curve_point(sections[2], u)).norm() <
              1e-9);
    }

    // two sections, q=1: ruled surface, unit-weight midpoint is the average
    const auto ruled = geom::loft_surface({make_line(0), make_line(3)}, 1);
    CHECK((geom::surface_point(ruled, 0.5, 0.5) - Vec3(0.5, 0, 1.5)).norm() < 1e-12);
}

TEST_CASE("loft: incompatible sections rejected") {
    geom::NurbsCurve a;
    a.degree = 1;
    a.control_points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    a.weights = {1, 1};
    a.knots.values = {0, 0, 1, 1};
    geom::NurbsCurve b;
    b.degree = 2;
    b.control_points = {Vec3(0, 1, 0), Vec3(0.5, 1, 0), Vec3(1, 1, 0)};
    b.weights = {1, 1, 1};
    b.knots.values = {0, 0, 0, 1, 1, 1};
    CHECK_THROWS(geom::loft_surface({a, b}, 1));
}

TEST_CASE("extract_grid: counts, boundaries, node positions") {
    geom::NurbsSurface s;
    s.degree_u = s.degree_v = 1;
    s.control_net = {{Vec3(0, 0, 0), Vec3(0, 2, 0)}, {Vec3(2, 0, 0), Vec3(2, 2, 1)}};
    s.weights = {{1, 1}, {1, 1}};
    s.knots_u.values = {0, 0, 1, 1};
    s.knots_v.values = {0, 0, 1, 1};

    const auto g2 = geom::extract_grid(s, 2, 2);
    CHECK(g2.nodes.size() == 9);
    CHECK(g2.edges.size() == 12);

    const auto g1 = geom::extract_grid(s, 1, 1);
    CHECK(g1.nodes.size() == 4);
    CHECK(g1.edges.size() == 4);
    for (bool b : g1.boundary) CHECK(b);

    for (int i = 0; i <= 2; ++i)
        for (int j = 0; j <= 2; ++j)
            CHECK((g2.nodes[g2.node_index(i, j)] -
                   geom::surface_point(s, i / 2.0, j / 2.0)).norm() < 1e-12);
}

TEST_CASE("extract_grid: degenerate surface rejected") {
    geom::NurbsSurface s;
    s.degree_u = s.degree_v = 1;
    const Vec3 p(1, 1, 1);
    s.control_net = {{p, p}, {p, p}};
    s.weights = {{1, 1}, {1, 1}};
    s.knots_u.values = {0, 0, 1, 1};
    s.knots_v.values = {0, 0, 1, 1};
    CHECK_THROWS(geom::extract_grid(s, 2, 2));
}

TEST_CASE("property: endpoint interpolation and convex hull") {
    util::Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        auto c = random_curve(rng);
        CHECK((geom::curve_point(c, c.domain_begin()) - c.control_points.front()).norm() < 1e-12);
        CHECK((geom::curve_point(c, c.domain_end()) - c.control_points.back()).norm() < 1e-12);

        // unit weights: points stay inside the control-point convex hull.
        // Hull membership is checked with a support-function bound over random
        // directions: max over control points >= value at the curve point.
        for (auto& w : c.weights) w = 1.0;
        const double u = rng.uniform(c.domain_begin(), c.domain_end());
        const Vec3 p = geom::curve_point(c, u);
        for (int d = 0; d < 20; ++d) {
            Vec3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            if (dir.norm() < 1e-6) continue;
            dir.normalize();
            double support = -1e300;
            for (const auto& cp : c.control_points) support = std::max(support, dir.dot(cp));
            CHECK(dir.dot(p) <= support + 1e-9);
        }
    }
}

TEST_CASE("property: weight pull moves the curve toward the control point") {
    util::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = random_curve(rng);
        const double u = rng.uniform(c.domain_begin() + 1e-3, c.domain_end() - 1e-3);
        // pick a control point with nonzero basis at u
        const auto basis = geom::basis_functions(u, c.degree, c.knots);
        int target = -1;
        for (const auto& [i, v] : basis)
            if (v > 0.05) target = i;
        REQUIRE(target >= 0);
        double prev = 1e300;
        for (double w : {0.5, 1.0, 2.0, 4.0}) {
            c.weights[target] = w;
            const double dist = (geom::curve_point(c, u) - c.control_points[target]).norm();
            CHECK(dist < prev);
            prev = dist;
        }
    }
}
