#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vhmpc/setalgebra.hpp"

using namespace vhmpc;

namespace
{

Zonotope random_zonotope(std::mt19937_64& g, int max_gens)
{
    std::uniform_int_distribution<int> md(1, max_gens);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const int m = md(g);
    Vector c(2);
    c << u(g), u(g);
    Matrix G(2, m);
    for (int j = 0; j < m; ++j)
    {
        G(0, j) = u(g);
        G(1, j) = u(g);
    }
    // occasionally duplicate a direction to exercise parallel merging
    if (m >= 2 && std::uniform_int_distribution<int>(0, 3)(g) == 0)
    {
        G.col(1) = -0.5 * G.col(0);
    }
    return Zonotope(c, G);
}

}  // namespace

TEST_CASE("vertices_2d matches the brute-force hull on 200 random zonotopes")
{
    std::mt19937_64 g(11);
    for (int t = 0; t < 200; ++t)
    {
        const Zonotope z = random_zonotope(g, 7);
        const auto hull = oracle::convex_hull(oracle::zonotope_corners(z));
        const auto got = vertices_2d(z);
        CAPTURE(t);
        CHECK(oracle::same_polygon(got, hull, 1e-9));
        double area = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i)
        {
            area += oracle::cross(got[0], got[i], got[(i + 1) % got.size()]);
        }
        // CCW orientation; segments have zero area
        const bool flat = Eigen::FullPivLU<Matrix>(z.generators()).rank() < 2;
        if (flat)
        {
            CHECK(std::abs(area) <= 1e-12);
        }
        else
        {
            CHECK(area > 0.0);
        }
    }
}

TEST_CASE("support, sums and linear maps agree with corner enumeration on 200 instances")
{
    std::mt19937_64 g(12);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int t = 0; t < 200; ++t)
    {
        const Zonotope a = random_zonotope(g, 5);
        const Zonotope b = random_zonotope(g, 4);
        const auto ca = oracle::zonotope_corners(a);
        const auto cb = oracle::zonotope_corners(b);
        const Vector d = oracle::random_unit(g, 2);
        double ref = -1e300;
        for (const Vector& p : ca)
        {
            ref = std::max(ref, d.dot(p));
        }
        CHECK(support(a, d) == doctest::Approx(ref).epsilon(1e-12));

        std::vector<Vector> sums;
        for (const Vector& p : ca)
        {
            for (const Vector& q : cb)
            {
                sums.push_back(p + q);
            }
        }
        CHECK(oracle::same_polygon(vertices_2d(minkowski_sum(a, b)), oracle::convex_hull(sums), 1e-9));

        Matrix M(2, 2);
        M << u(g), u(g), u(g), u(g);
        std::vector<Vector> mapped;
        for (const Vector& p : ca)
        {
            mapped.push_back(M * p);
        }
        const auto hull = oracle::convex_hull(mapped, 1e-12);
        if (std::abs(M.determinant()) > 1e-3)
        {
            CHECK(oracle::same_polygon(vertices_2d(linear_map_zonotope(M, a)), hull, 1e-9));
        }
    }
}

TEST_CASE("membership and gauge agree with the polygon oracle")
{
    std::mt19937_64 g(13);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    int inside = 0, outside = 0;
    for (int t = 0; t < 200; ++t)
    {
        const Zonotope z = random_zonotope(g, 6);
        const auto hull = oracle::convex_hull(oracle::zonotope_corners(z));
        if (hull.size() < 3)
        {
            continue;
        }
        Vector x(2);
        x << u(g), u(g);
        const double margin = oracle::polygon_margin(hull, x);
        CAPTURE(t);
        if (std::abs(margin) > 1e-6)
        {
            const bool in = margin < 0.0;
            CHECK(zonotope_contains(z, x, 0.0) == in);
            (in ? inside : outside) += 1;
        }
        // gauge: x - c scaled onto the boundary of the centered polygon
        double rho = 0.0;
        for (std::size_t i = 0; i < hull.size(); ++i)
        {
            const Vector a = hull[i] - z.center();
            const Vector b = hull[(i + 1) % hull.size()] - z.center();
            Vector nrm(2);
            nrm << b[1] - a[1], a[0] - b[0];
            rho = std::max(rho, nrm.dot(x - z.center()) / nrm.dot(a));
        }
        CHECK(zonotope_gauge(z, x) == doctest::Approx(rho).epsilon(1e-8));
    }
    CHECK(inside > 10);
    CHECK(outside > 10);
}

TEST_CASE("Pontryagin difference of a box: translate test on sampled points")
{
    std::mt19937_64 g(14);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int t = 0; t < 200; ++t)
    {
        Zonotope z = random_zonotope(g, 4).scaled(0.5);
        z = Zonotope(Vector::Zero(2), z.generators());
        const HPolytope P = HPolytope::from_box(Box(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0)));
        const HPolytope D = pontryagin_diff(P, z);
        const auto corners = oracle::zonotope_corners(z);
        Vector y(2);
        y << u(g), u(g);
        // y is in P minus Z exactly when every translate y + corner stays in P
        double worst = -1e300;
        for (const Vector& c : corners)
        {
            worst = std::max(worst, (P.normals() * (y + c) - P.offsets()).maxCoeff());
        }
        if (std::abs(worst) > 1e-9)
        {
            CHECK(D.contains(y, 0.0) == (worst < 0.0));
        }
    }
}

TEST_CASE("emptiness by LP")
{
    const HPolytope box = HPolytope::from_box(Box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)));
    CHECK_FALSE(is_empty(box));
    Matrix G(2, 1);
    G << 2.0, 0.0;
    CHECK(is_empty(pontryagin_diff(box, Zonotope(Vector::Zero(2), G))));

    // a triangle and a half-plane that misses it
    Matrix N(4, 2);
    N << -1, 0, 0, -1, 1, 1, -1, -1;
    Vector b(4);
    b << 0, 0, 1, -1.5;
    CHECK(is_empty(HPolytope(N, b)));
    b[3] = -0.5;
    CHECK_FALSE(is_empty(HPolytope(N, b)));
}

TEST_CASE("degenerate zonotopes")
{
    const Zonotope pt = Zonotope::point(Vector::Constant(2, 0.25));
    const auto v = vertices_2d(pt);
    REQUIRE(v.size() == 1);
    CHECK(v[0].isApprox(Vector::Constant(2, 0.25)));
    CHECK(zonotope_contains(pt, Vector::Constant(2, 0.25)));
    CHECK_FALSE(zonotope_contains(pt, Vector::Constant(2, 0.3)));

    Matrix G(2, 2);
    G << 1, 2, 1, 2;  // a segment
    const Zonotope seg(Vector::Zero(2), G);
    CHECK(vertices_2d(seg).size() == 2);
    Vector on(2), off(2);
    on << 2.5, 2.5;
    off << 2.5, 2.4;
    CHECK(zonotope_contains(seg, on));
    CHECK_FALSE(zonotope_contains(seg, off));
    CHECK(std::isinf(zonotope_gauge(seg, off)));
    CHECK(zonotope_gauge(seg, on) == doctest::Approx(2.5 / 3.0));
}

TEST_CASE("box conversions and row deduplication")
{
    Vector lo(3), hi(3);
    lo << -1, 0, 2;
    hi << 1, 0, 5;
    const Zonotope z = Zonotope::from_box(Box(lo, hi));
    CHECK(z.num_generators() == 2);
    CHECK(z.center().isApprox((lo + hi) / 2));
    const HPolytope p = HPolytope::from_box(Box(lo, hi));
    CHECK(p.num_rows() == 6);
    CHECK(p.contains(Vector((lo + hi) / 2)));

    Matrix N(3, 2);
    N << 1, 0, 2, 0, 0, 1;
    Vector b(3);
    b << 1, 2, 1;
    CHECK(remove_duplicate_rows(HPolytope(N, b)).num_rows() == 2);

    const Zonotope w = Zonotope::from_box(Box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)));
    CHECK(minkowski_sum(w, Zonotope(Vector::Zero(2), Matrix::Constant(2, 1, 1e-16))).num_generators() == 2);
    Vector d(2);
    d << 0.6, -0.8;
    CHECK(support(w.scaled(3.0), d) == doctest::Approx(3.0 * 1.4));
}
