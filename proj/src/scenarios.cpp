#include "vhmpc/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace vhmpc
{

namespace
{
constexpr double kPi = 3.14159265358979323846;
constexpr double kPoleRateSlack = 0.05;

Matrix to_matrix(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty() || rows.front().empty())
    {
        throw std::invalid_argument("matrix must be nonempty");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        if (rows[i].size() != rows.front().size())
        {
            throw std::invalid_argument("ragged matrix rows");
        }
        for (std::size_t j = 0; j < rows[i].size(); ++j)
        {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

Vector to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Scenario linear_box_scenario(std::string name, Matrix A, Matrix B, Matrix K, Box W, Box X, Box U, Vector ref,
                             MpcConfig config, Vector x0, Box sampling)
{
    Scenario s;
    s.name = std::move(name);
    Problem& p = s.problem;
    p.A = std::move(A);
    p.B = std::move(B);
    p.K = std::move(K);
    p.W = std::move(W);
    const HPolytope xh = HPolytope::from_box(X);
    const HPolytope uh = HPolytope::from_box(U);
    p.state_constraints = [xh](int) { return xh; };
    p.input_constraints = [uh](int) { return uh; };
    p.reference = [ref](int) { return ref; };
    p.config = config;
    prepare(p);
    s.x0 = std::move(x0);
    s.sampling = std::move(sampling);
    s.metric = Metric::one_norm;
    s.distance_unit = "1-norm";
    for (int i = 0; i < p.state_dim(); ++i)
    {
        s.state_labels.push_back("x" + std::to_string(i + 1));
    }
    return s;
}
}  // namespace

void RendezvousParams::validate() const
{
    const bool positive = altitude_km > 0 && spin_period_s > 0 && u_max > 0 && theta_s > 0 && cone_half_angle > 0 &&
                          capture_radius_m > 0 && docking_radius_m > 0 && w_bar_p > 0 && w_bar_v > 0 &&
                          mu_km3_s2 > 0 && earth_radius_km > 0;
    if (!positive)
    {
        throw std::invalid_argument("RendezvousParams: all physical parameters must be positive");
    }
    if (cone_half_angle >= kPi / 2)
    {
        throw std::invalid_argument("RendezvousParams: cone half angle must be below pi/2");
    }
    if (spin_sign != 1.0 && spin_sign != -1.0)
    {
        throw std::invalid_argument("RendezvousParams: spin_sign must be +1 or -1");
    }
    if (pole_set.size() != 6)
    {
        throw std::invalid_argument("RendezvousParams: six poles required");
    }
    for (double z : pole_set)
    {
        if (!(std::abs(z) < 1.0))
        {
            throw std::invalid_argument("RendezvousParams: invalid pole set (pole " + std::to_string(z) +
                                        " not strictly inside the unit disk)");
        }
    }
}

double RendezvousParams::eta() const
{
    const double a = earth_radius_km + altitude_km;
    return std::sqrt(mu_km3_s2 / (a * a * a));
}

double RendezvousParams::length_scale() const
{
    return u_max / (eta() * eta());
}

double RendezvousParams::velocity_scale() const
{
    return u_max / eta();
}

double RendezvousParams::omega_n() const
{
    return (2.0 * kPi / spin_period_s) / eta();
}

double docking_angle(const RendezvousParams& p, double theta)
{
    return p.docking_phase + p.spin_sign * p.omega_n() * theta;
}

Vector reference_at(const RendezvousParams& p, double theta)
{
    const double phi = docking_angle(p, theta);
    const double rc = p.capture_radius_m / p.length_scale();
    const double w = p.spin_sign * p.omega_n();
    Vector r(6);
    r << rc * std::cos(phi), rc * std::sin(phi), 0.0, -w * rc * std::sin(phi), w * rc * std::cos(phi), 0.0;
    return r;
}

Vector reference_trajectory(const RendezvousParams& p, int k)
{
    return reference_at(p, k * p.theta_s);
}

HPolytope cone_constraint(const RendezvousParams& p, int k)
{
    const double phi = docking_angle(p, k * p.theta_s);
    const Eigen::Vector3d axis(std::cos(phi), std::sin(phi), 0.0);
    const Eigen::Vector3d t1(-std::sin(phi), std::cos(phi), 0.0);
    const Eigen::Vector3d normal(0.0, 0.0, 1.0);
    const double c = std::tan(p.cone_half_angle) / std::sqrt(2.0);
    const double rd = p.docking_radius_m / p.length_scale();

    // |T (x_p - (x_p . a) a)|_inf <= c (x_p . a - r_d), T rows = {t1, normal}
    Matrix a = Matrix::Zero(4, 6);
    Vector b = Vector::Constant(4, -c * rd);
    const Eigen::Vector3d dirs[4] = {t1, -t1, normal, -normal};
    for (int i = 0; i < 4; ++i)
    {
        a.row(i).head<3>() = (dirs[i] - c * axis).transpose();
    }
    return HPolytope(std::move(a), std::move(b));
}

Matrix hcw_a_c()
{
    Matrix a = Matrix::Zero(6, 6);
    a(0, 3) = a(1, 4) = a(2, 5) = 1.0;
    a(3, 0) = 3.0;
    a(3, 4) = 2.0;
    a(4, 3) = -2.0;
    a(5, 2) = -1.0;
    return a;
}

Matrix hcw_b_c()
{
    Matrix b = Matrix::Zero(6, 3);
    b.bottomRows(3).setIdentity();
    return b;
}

double Scenario::final_distance(const Vector& x, const Vector& r) const
{
    if (metric == Metric::one_norm)
    {
        return (x - r).cwiseAbs().sum() * distance_scale;
    }
    return (x.head(3) - r.head(3)).norm() * distance_scale;
}

Scenario make_double_integrator()
{
    Matrix A(2, 2);
    A << 1.0, 1.0, 0.0, 1.0;
    Matrix B(2, 1);
    B << 0.0, 1.0;
    Matrix K(1, 2);
    K << -0.06, -0.5;
    MpcConfig cfg;
    cfg.gamma_z = 0.02;
    cfg.gamma_v = 1.0;
    cfg.N_max = 120;
    const Box X(Eigen::Vector2d(-25.0, -2.0), Eigen::Vector2d(25.0, 2.0));
    Scenario s = linear_box_scenario("double_integrator", A, B, K, Box(Eigen::Vector2d(-0.1, -0.4), Eigen::Vector2d(0.1, 0.4)), X,
                                     Box(Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)), Vector::Zero(2), cfg,
                                     Eigen::Vector2d(20.0, 0.0), X);
    s.state_labels = {"position", "velocity"};
    return s;
}

MpcConfig rendezvous_config()
{
    MpcConfig cfg;
    cfg.gamma_z = 100.0;
    cfg.gamma_v = 1.0;
    cfg.N_max = 60;
    return cfg;
}

Vector default_rendezvous_x0()
{
    Vector x0(6);
    x0 << -2.1857e-3, 0.5464e-3, 0.0, 0.0, 0.0, 0.0;
    return x0;
}

RendezvousParams default_rendezvous_params()
{
    RendezvousParams p;
    const Vector x0 = default_rendezvous_x0();
    p.docking_phase = std::atan2(x0[1], x0[0]);
    return p;
}

Matrix default_rendezvous_gain()
{
    // unique diagonalizable placement of {0.6 x3, 0.5 x3} for the default step
    Matrix K(3, 6);
    K << -1324.8477719435925, 16.25954762333539, 0.0, -65.05130997128327, -1.2333594719469285, 0.0,
        -16.26016260163462, -1321.8977748432453, 0.0, 1.2332863510408312, -65.03778050781459, 0.0, 0.0, 0.0,
        -1320.9811059493293, 0.0, 0.0, -65.03614035791404;
    return K;
}

Scenario make_rendezvous(const RendezvousParams& params, const Matrix& K, const Vector& x0, const MpcConfig& config,
                         const Vector& sampling_halfwidth)
{
    params.validate();
    if (K.rows() != 3 || K.cols() != 6 || x0.size() != 6)
    {
        throw std::invalid_argument("make_rendezvous: K must be 3x6 and x0 of length 6");
    }
    const Discretization d = expm_with_integral(hcw_a_c(), hcw_b_c(), params.theta_s);
    const Matrix a_k = d.A + d.B * K;
    double max_pole = 0.0;
    for (double z : params.pole_set)
    {
        max_pole = std::max(max_pole, std::abs(z));
    }
    if (!verify_schur(a_k))
    {
        throw std::invalid_argument("make_rendezvous: A + BK is not Schur");
    }
    const double rate = spectral_radius_bound(a_k);
    if (rate > max_pole + kPoleRateSlack)
    {
        throw std::invalid_argument("make_rendezvous: gain decays at rate " + std::to_string(rate) +
                                    ", slower than the pole set allows");
    }

    Scenario s;
    s.name = "rendezvous";
    s.rendezvous = params;
    Problem& p = s.problem;
    p.A = d.A;
    p.B = d.B;
    p.K = K;
    Vector wb(6);
    wb << params.w_bar_p, params.w_bar_p, params.w_bar_p, params.w_bar_v, params.w_bar_v, params.w_bar_v;
    p.W = Box(-wb, wb);
    const HPolytope uh = HPolytope::from_box(Box(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0)));
    p.state_constraints = [params](int k) { return cone_constraint(params, k); };
    p.input_constraints = [uh](int) { return uh; };
    p.reference = [params](int k) { return reference_trajectory(params, k); };
    p.config = config;
    prepare(p);

    s.x0 = x0;
    Vector half = sampling_halfwidth;
    if (half.size() == 0)
    {
        half.resize(6);
        half << 4.0, 4.0, 2.0, 0.01, 0.01, 0.01;
    }
    if (half.size() != 6 || (half.array() < 0.0).any())
    {
        throw std::invalid_argument("make_rendezvous: sampling half widths must be six nonnegative values");
    }
    half.head(3) /= params.length_scale();
    half.tail(3) /= params.velocity_scale();
    s.sampling = Box(x0 - half, x0 + half);
    s.metric = Metric::position_euclidean;
    s.distance_scale = params.length_scale();
    s.distance_unit = "m";
    s.state_labels = {"radial", "transverse", "normal", "v_radial", "v_transverse", "v_normal"};
    return s;
}

namespace
{
using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

MpcConfig read_cost(const json& j, MpcConfig cfg)
{
    cfg.gamma_z = get_or(j, "gamma_z", cfg.gamma_z);
    cfg.gamma_v = get_or(j, "gamma_v", cfg.gamma_v);
    cfg.N_max = get_or(j, "N_max", cfg.N_max);
    cfg.sinf_tol = get_or(j, "sinf_tol", cfg.sinf_tol);
    cfg.lambda_tail_tol = get_or(j, "lambda_tail_tol", cfg.lambda_tail_tol);
    if (j.contains("lambda") && !j.at("lambda").is_null())
    {
        cfg.lambda = j.at("lambda").get<double>();
    }
    return cfg;
}

Box read_box(const json& j)
{
    return Box(to_vector(j.at("lower").get<std::vector<double>>()), to_vector(j.at("upper").get<std::vector<double>>()));
}

Scenario load_linear(const json& doc)
{
    const json& dyn = doc.at("dynamics");
    const json& con = doc.at("constraints");
    const Matrix A = to_matrix(dyn.at("A").get<std::vector<std::vector<double>>>());
    const Matrix B = to_matrix(dyn.at("B").get<std::vector<std::vector<double>>>());
    const Matrix K = to_matrix(doc.at("gain").at("K").get<std::vector<std::vector<double>>>());
    const Box X = read_box(con.at("state"));
    Vector ref = Vector::Zero(A.rows());
    if (doc.contains("reference"))
    {
        const json& r = doc.at("reference");
        const std::string type = r.at("type").get<std::string>();
        if (type == "constant")
        {
            ref = to_vector(r.at("value").get<std::vector<double>>());
        }
        else if (type != "origin")
        {
            throw std::invalid_argument("unknown reference type '" + type + "'");
        }
    }
    const Box sampling = doc.contains("sampling") ? read_box(doc.at("sampling")) : X;
    Scenario s = linear_box_scenario(doc.at("name").get<std::string>(), A, B, K, read_box(doc.at("disturbance")), X,
                                     read_box(con.at("input")), ref, read_cost(doc.at("cost"), MpcConfig{}),
                                     to_vector(doc.at("initial_state").get<std::vector<double>>()), sampling);
    if (doc.contains("state_labels"))
    {
        s.state_labels = doc.at("state_labels").get<std::vector<std::string>>();
    }
    return s;
}

Scenario load_hcw(const json& doc)
{
    const json& rj = doc.at("rendezvous");
    const Vector x0 = doc.contains("initial_state")
                          ? to_vector(doc.at("initial_state").get<std::vector<double>>())
                          : default_rendezvous_x0();
    RendezvousParams p;
    p.altitude_km = get_or(rj, "altitude_km", p.altitude_km);
    p.spin_period_s = get_or(rj, "spin_period_s", p.spin_period_s);
    p.u_max = get_or(rj, "u_max_m_s2", p.u_max);
    p.theta_s = get_or(rj, "theta_s", p.theta_s);
    if (rj.contains("cone_half_angle_deg"))
    {
        p.cone_half_angle = rj.at("cone_half_angle_deg").get<double>() * kPi / 180.0;
    }
    p.capture_radius_m = get_or(rj, "capture_radius_m", p.capture_radius_m);
    p.docking_radius_m = get_or(rj, "docking_radius_m", p.docking_radius_m);
    p.w_bar_p = get_or(rj, "w_bar_p", p.w_bar_p);
    p.w_bar_v = get_or(rj, "w_bar_v", p.w_bar_v);
    p.pole_set = get_or(rj, "pole_set", p.pole_set);
    p.spin_sign = get_or(rj, "spin_sign", p.spin_sign);
    p.mu_km3_s2 = get_or(rj, "mu_km3_s2", p.mu_km3_s2);
    p.earth_radius_km = get_or(rj, "earth_radius_km", p.earth_radius_km);
    // null phase: the docking axis points at the initial position
    p.docking_phase = rj.contains("docking_phase_rad") && !rj.at("docking_phase_rad").is_null()
                          ? rj.at("docking_phase_rad").get<double>()
                          : std::atan2(x0[1], x0[0]);

    const Matrix K = doc.contains("gain")
                         ? to_matrix(doc.at("gain").at("K").get<std::vector<std::vector<double>>>())
                         : default_rendezvous_gain();
    const MpcConfig cfg = doc.contains("cost") ? read_cost(doc.at("cost"), rendezvous_config()) : rendezvous_config();
    Vector half;
    if (doc.contains("sampling"))
    {
        const json& sj = doc.at("sampling");
        const auto pos = sj.at("position_halfwidth_m").get<std::vector<double>>();
        const auto vel = sj.at("velocity_halfwidth_m_s").get<std::vector<double>>();
        if (pos.size() != 3 || vel.size() != 3)
        {
            throw std::invalid_argument("sampling half widths need three entries each");
        }
        half.resize(6);
        half << pos[0], pos[1], pos[2], vel[0], vel[1], vel[2];
    }
    Scenario s = make_rendezvous(p, K, x0, cfg, half);
    s.name = get_or<std::string>(doc, "name", s.name);
    return s;
}
}  // namespace

Scenario load_scenario(const std::string& path)
{
    if (!std::filesystem::is_regular_file(path))
    {
        throw ScenarioError("scenario file not found: " + path);
    }
    std::ifstream in(path);
    if (!in)
    {
        throw ScenarioError("cannot open scenario file: " + path);
    }
    try
    {
        const json doc = json::parse(in);
        const std::string model = doc.at("dynamics").at("model").get<std::string>();
        Scenario s;
        if (model == "linear")
        {
            s = load_linear(doc);
        }
        else if (model == "hcw")
        {
            s = load_hcw(doc);
        }
        else
        {
            throw std::invalid_argument("unknown dynamics model '" + model + "'");
        }
        if (s.x0.size() != s.problem.state_dim())
        {
            throw std::invalid_argument("initial_state has the wrong dimension");
        }
        s.report_notes = get_or(doc, "report_notes", std::vector<std::string>{});
        return s;
    }
    catch (const ScenarioError&)
    {
        throw;
    }
    catch (const std::exception& e)
    {
        throw ScenarioError(path + ": " + e.what());
    }
}

}  // namespace vhmpc
