#ifndef VHMPC_SCENARIOS_HPP
#define VHMPC_SCENARIOS_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vhmpc/controller.hpp"

namespace vhmpc
{

/// Tumbling-target rendezvous data. Dynamics are normalized: time by the
/// orbital rate eta, lengths by u_max / eta^2, velocities by u_max / eta.
struct RendezvousParams
{
    double altitude_km = 800.0;
    double spin_period_s = 500.0;
    double u_max = 0.02;  ///< m/s^2
    double theta_s = 0.0123;
    double cone_half_angle = 3.14159265358979323846 / 6.0;
    double capture_radius_m = 1.7;
    double docking_radius_m = 1.5;
    double w_bar_p = 1e-6;
    double w_bar_v = 5e-4;
    std::vector<double> pole_set{0.6, 0.6, 0.6, 0.5, 0.5, 0.5};
    double docking_phase = 0.0;  ///< angle of the docking axis at k = 0 (rad)
    double spin_sign = 1.0;      ///< +1: radial toward transverse
    double mu_km3_s2 = 398600.4418;
    double earth_radius_km = 6378.137;

    /// Throws std::invalid_argument on nonpositive or out-of-range values.
    void validate() const;

    double eta() const;            ///< mean motion, rad/s
    double length_scale() const;   ///< meters per normalized length unit
    double velocity_scale() const; ///< m/s per normalized velocity unit
    double omega_n() const;        ///< normalized spin rate
};

/// Angle of the docking axis at continuous normalized time theta.
double docking_angle(const RendezvousParams& p, double theta);
/// Capture point state (position, velocity) at continuous normalized time.
Vector reference_at(const RendezvousParams& p, double theta);
/// r(k) = reference_at(k theta_s).
Vector reference_trajectory(const RendezvousParams& p, int k);
/// Square-section inner approximation of the visibility cone at step k.
HPolytope cone_constraint(const RendezvousParams& p, int k);

/// HCW drift matrices in normalized units.
Matrix hcw_a_c();
Matrix hcw_b_c();

enum class Metric
{
    one_norm,           ///< |x - r|_1 in scenario units
    position_euclidean  ///< |x_p - r_p|_2 times a length scale
};

struct Scenario
{
    std::string name;
    Problem problem;  ///< prepared
    Vector x0;
    Box sampling{Vector::Zero(1), Vector::Zero(1)};  ///< proposal box for initial states
    Metric metric = Metric::one_norm;
    double distance_scale = 1.0;
    std::string distance_unit;
    std::optional<RendezvousParams> rendezvous;
    std::vector<std::string> state_labels;
    std::vector<std::string> report_notes;

    double final_distance(const Vector& x, const Vector& r) const;
};

class ScenarioError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

Scenario make_double_integrator();
/// Weights and horizon cap used by the rendezvous case.
MpcConfig rendezvous_config();
/// Default parameters; the docking phase points at the default initial state.
RendezvousParams default_rendezvous_params();
/// The gain shipped with the rendezvous scenario file.
Matrix default_rendezvous_gain();
Vector default_rendezvous_x0();

/// K is checked against the pole set: Schur and a decay-rate bound no larger
/// than max |pole| + 0.05. sampling_halfwidth holds the initial-state proposal
/// box half widths in physical units (m for position, m/s for velocity).
Scenario make_rendezvous(const RendezvousParams& params, const Matrix& K, const Vector& x0,
                         const MpcConfig& config = rendezvous_config(), const Vector& sampling_halfwidth = {});

/// Loads a scenario JSON file. Throws ScenarioError (missing file, bad schema).
Scenario load_scenario(const std::string& path);

}  // namespace vhmpc

#endif
