#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "vhmpc/scenarios.hpp"

using namespace vhmpc;

namespace
{

const double kPi = 3.14159265358979323846;

std::string scenario_path(const std::string& name)
{
    return std::string(VHMPC_SOURCE_DIR) + "/scenarios/" + name;
}

/// Cone membership straight from the definition: the lateral offset from the
/// docking axis, measured along the square's two planes, is bounded by
/// tan(alpha)/sqrt(2) times the axial distance beyond the port.
bool in_cone(const RendezvousParams& p, int k, const Vector& pos, double& margin)
{
    const double phi = p.docking_phase + p.spin_sign * p.omega_n() * p.theta_s * k;
    Vector a(3), b(3), e(3);
    a << std::cos(phi), std::sin(phi), 0.0;
    b << -std::sin(phi), std::cos(phi), 0.0;
    e << 0.0, 0.0, 1.0;
    const Vector lateral = pos - pos.dot(a) * a;
    const Vector port = (p.docking_radius_m / p.length_scale()) * a;
    const double lhs = std::max(std::abs(b.dot(lateral)), std::abs(e.dot(lateral)));
    const double rhs = std::tan(p.cone_half_angle) / std::sqrt(2.0) * (pos - port).dot(a);
    margin = rhs - lhs;
    return lhs <= rhs;
}

}  // namespace

TEST_CASE("double integrator constants")
{
    const Scenario s = make_double_integrator();
    const Problem& p = s.problem;
    Matrix A(2, 2), B(2, 1), K(1, 2);
    A << 1, 1, 0, 1;
    B << 0, 1;
    K << -0.06, -0.5;
    CHECK(p.A == A);
    CHECK(p.B == B);
    CHECK(p.K == K);
    CHECK(p.W.upper() == Vector((Vector(2) << 0.1, 0.4).finished()));
    CHECK(p.W.lower() == Vector((Vector(2) << -0.1, -0.4).finished()));
    CHECK(p.config.gamma_z == 0.02);
    CHECK(p.config.gamma_v == 1.0);
    const HPolytope X = p.state_constraints(7);
    CHECK(X.contains(Vector((Vector(2) << 25, -2).finished()), 0.0));
    CHECK_FALSE(X.contains(Vector((Vector(2) << 25.01, 0).finished()), 0.0));
    CHECK(p.input_constraints(3).contains(Vector::Constant(1, -2.0), 0.0));
    CHECK_FALSE(p.input_constraints(3).contains(Vector::Constant(1, 2.01), 0.0));
    CHECK(p.reference(11).isZero());
    const Eigen::VectorXcd eig = p.closed_loop().eigenvalues();
    std::vector<double> re{eig[0].real(), eig[1].real()};
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(re[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("shipped scenario files match the built-in constructions")
{
    const Scenario a = load_scenario(scenario_path("double_integrator.json"));
    const Scenario b = make_double_integrator();
    CHECK(a.problem.A == b.problem.A);
    CHECK(a.problem.K == b.problem.K);
    CHECK(a.problem.lambda_bar == b.problem.lambda_bar);
    CHECK(a.x0 == b.x0);
    CHECK(a.problem.config.N_max == b.problem.config.N_max);

    const Scenario r = load_scenario(scenario_path("rendezvous.json"));
    const Scenario q = make_rendezvous(default_rendezvous_params(), default_rendezvous_gain(), default_rendezvous_x0());
    CHECK((r.problem.A - q.problem.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.problem.K == q.problem.K);
    CHECK(r.x0 == q.x0);
    CHECK(r.distance_unit == "m");
    REQUIRE(r.rendezvous.has_value());
    CHECK(r.rendezvous->docking_phase == doctest::Approx(std::atan2(r.x0[1], r.x0[0])));
    CHECK_FALSE(r.report_notes.empty());
}

TEST_CASE("scenario loading errors")
{
    CHECK_THROWS_AS(load_scenario("/nonexistent/file.json"), ScenarioError);
    const std::string bad = "/tmp/vhmpc_bad_scenario.json";
    {
        std::ofstream(bad) << "{\"name\": \"x\", \"dynamics\": {\"model\": \"warp\"}}";
    }
    CHECK_THROWS_AS(load_scenario(bad), ScenarioError);
    {
        std::ofstream(bad) << "{ not json";
    }
    CHECK_THROWS_AS(load_scenario(bad), ScenarioError);
}

TEST_CASE("rendezvous discretization equals the HCW transition")
{
    const Scenario s = make_rendezvous(default_rendezvous_params(), default_rendezvous_gain(), default_rendezvous_x0());
    const double t = s.rendezvous->theta_s;
    const double sn = std::sin(t), c = std::cos(t);
    Matrix P(6, 6);
    P << 4 - 3 * c, 0, 0, sn, 2 * (1 - c), 0, 6 * (sn - t), 1, 0, -2 * (1 - c), 4 * sn - 3 * t, 0, 0, 0, c, 0, 0, sn,
        3 * sn, 0, 0, c, 2 * sn, 0, -6 * (1 - c), 0, 0, -2 * sn, 4 * c - 3, 0, 0, 0, -sn, 0, 0, c;
    CHECK((s.problem.A - P).cwiseAbs().maxCoeff() <= 1e-9);
    // closed-loop poles
    Eigen::VectorXd mags = s.problem.closed_loop().eigenvalues().cwiseAbs();
    std::sort(mags.data(), mags.data() + mags.size());
    for (int i = 0; i < 3; ++i)
    {
        CHECK(mags[i] == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(mags[i + 3] == doctest::Approx(0.6).epsilon(1e-6));
    }
}

TEST_CASE("rendezvous unit scales")
{
    const RendezvousParams p = default_rendezvous_params();
    const double r = (6378.137 + 800.0) * 1e3;
    const double eta = std::sqrt(398600.4418e9 / (r * r * r));
    CHECK(p.eta() == doctest::Approx(eta).epsilon(1e-12));
    CHECK(p.length_scale() == doctest::Approx(0.02 / (eta * eta)).epsilon(1e-12));
    CHECK(p.velocity_scale() == doctest::Approx(0.02 / eta).epsilon(1e-12));
    CHECK(p.omega_n() == doctest::Approx(2 * kPi / 500.0 / eta).epsilon(1e-12));
    // the stated initial state is roughly 40 m behind and 10 m above
    const Vector x0 = default_rendezvous_x0();
    CHECK(std::abs(x0[0]) * p.length_scale() == doctest::Approx(40.0).epsilon(0.05));
    CHECK(std::abs(x0[1]) * p.length_scale() == doctest::Approx(10.0).epsilon(0.05));
    RendezvousParams bad = p;
    bad.theta_s = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("reference trajectory follows rigid rotation")
{
    const RendezvousParams p = default_rendezvous_params();
    const double wn = p.omega_n() * p.spin_sign;
    const double R = p.capture_radius_m / p.length_scale();
    for (int k : {0, 1, 17, 40, 91})
    {
        const Vector r = reference_trajectory(p, k);
        CHECK(r.head(3).norm() == doctest::Approx(R).epsilon(1e-12));
        CHECK(r[2] == 0.0);
        // v = omega x p with omega along the orbit normal
        CHECK(r[3] == doctest::Approx(-wn * r[1]).epsilon(1e-12));
        CHECK(r[4] == doctest::Approx(wn * r[0]).epsilon(1e-12));
        for (int m : {1, 5, 13})
        {
            const double ang = wn * p.theta_s * m;
            const Vector rm = reference_trajectory(p, k + m);
            CHECK(rm[0] == doctest::Approx(std::cos(ang) * r[0] - std::sin(ang) * r[1]).epsilon(1e-10));
            CHECK(rm[1] == doctest::Approx(std::sin(ang) * r[0] + std::cos(ang) * r[1]).epsilon(1e-10));
        }
    }
    const double period = 2 * kPi / p.omega_n();
    CHECK((reference_at(p, period) - reference_at(p, 0.0)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("cone rows agree with the cone definition on sampled points")
{
    const RendezvousParams p = default_rendezvous_params();
    std::mt19937_64 g(41);
    std::uniform_real_distribution<double> u(-3e-3, 3e-3);
    int in = 0, out = 0;
    for (int t = 0; t < 2000; ++t)
    {
        const int k = t % 60;
        Vector x = Vector::Zero(6);
        x[0] = u(g);
        x[1] = u(g);
        x[2] = u(g) * 0.3;
        double margin = 0.0;
        const bool ref = in_cone(p, k, x.head(3), margin);
        if (std::abs(margin) < 1e-12)
        {
            continue;
        }
        CHECK(cone_constraint(p, k).contains(x, 0.0) == ref);
        (ref ? in : out) += 1;
    }
    CHECK(in > 100);
    CHECK(out > 100);
}

TEST_CASE("cone contains the capture point over a spin period and rotates rigidly")
{
    const RendezvousParams p = default_rendezvous_params();
    const int steps = static_cast<int>(std::ceil(2 * kPi / p.omega_n() / p.theta_s));
    for (int k = 0; k <= steps; ++k)
    {
        CHECK(cone_constraint(p, k).contains(reference_trajectory(p, k), 0.0));
        CHECK(cone_constraint(p, k).num_rows() == 4);
    }
    // a quarter period later the normals are the old ones turned by 90 degrees
    RendezvousParams q = p;
    q.docking_phase = p.docking_phase + kPi / 2;
    const HPolytope c0 = cone_constraint(p, 0);
    const HPolytope c1 = cone_constraint(q, 0);
    Matrix R = Matrix::Identity(6, 6);
    R(0, 0) = 0;
    R(0, 1) = -1;
    R(1, 0) = 1;
    R(1, 1) = 0;
    for (int i = 0; i < 4; ++i)
    {
        const Vector turned = R * c0.normals().row(i).transpose();
        bool found = false;
        for (int j = 0; j < 4 && !found; ++j)
        {
            found = (c1.normals().row(j).transpose() - turned).norm() <= 1e-12 &&
                    std::abs(c1.offsets()[j] - c0.offsets()[i]) <= 1e-15;
        }
        CHECK(found);
    }
}

TEST_CASE("rendezvous gain validation")
{
    Matrix K = default_rendezvous_gain();
    K *= 0.1;
    CHECK_THROWS_AS(make_rendezvous(default_rendezvous_params(), K, default_rendezvous_x0()), std::invalid_argument);
}

TEST_CASE("final distance metrics")
{
    const Scenario d = make_double_integrator();
    Vector x(2), r(2);
    x << 1.0, -2.0;
    r << 0.5, 0.0;
    CHECK(d.final_distance(x, r) == doctest::Approx(2.5));
    const Scenario s = make_rendezvous(default_rendezvous_params(), default_rendezvous_gain(), default_rendezvous_x0());
    Vector a = Vector::Zero(6), b = Vector::Zero(6);
    a[0] = 3e-6;
    a[1] = 4e-6;
    a[3] = 1.0;  // velocity error does not count
    CHECK(s.final_distance(a, b) == doctest::Approx(5e-6 * s.rendezvous->length_scale()));
}
