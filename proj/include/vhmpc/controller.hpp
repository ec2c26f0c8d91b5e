#ifndef VHMPC_CONTROLLER_HPP
#define VHMPC_CONTROLLER_HPP

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vhmpc/lpsolver.hpp"
#include "vhmpc/setalgebra.hpp"
#include "vhmpc/tube.hpp"

namespace vhmpc
{

/// Costs within this margin count as ties; the smaller horizon wins.
inline constexpr double kSweepTieTol = 1e-7;
/// Slack added to the previous horizon when bounding the C1 sweep.
inline constexpr int kC1HorizonSlack = 10;
/// Cost-decrease and containment checks allow this much numerical slack.
inline constexpr double kInvariantTol = 1e-6;

using ConstraintSchedule = std::function<HPolytope(int)>;
using ReferenceSchedule = std::function<Vector(int)>;

struct MpcConfig
{
    double gamma_z = 0.0;
    double gamma_v = 0.0;
    /// Decrease margin. Unset means the computed lambda-bar; an explicit value
    /// may only be lower.
    std::optional<double> lambda;
    int N_max = 100;
    double sinf_tol = 0.05;
    double lambda_tail_tol = 1e-9;
};

/// Everything the controller needs about one plant. prepare() fills the
/// derived members (tubes, S(inf), lambda-bar, FTCS schedule).
struct Problem
{
    Matrix A, B, K;
    Box W{Vector::Zero(1), Vector::Zero(1)};
    ConstraintSchedule state_constraints;
    ConstraintSchedule input_constraints;
    ReferenceSchedule reference;
    MpcConfig config;

    std::shared_ptr<const TubeCache> tubes;
    SinfApprox sinf;
    double lambda_bar = 0.0;
    int lambda_truncation = 0;
    /// ftcs_bounds[N] holds the coefficient bounds of Q's generators for the
    /// FTCS terminal set at horizon N, or is empty when that set is empty.
    std::vector<std::optional<Vector>> ftcs_bounds;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const { return static_cast<int>(B.cols()); }
    Matrix closed_loop() const { return A + B * K; }
    double lambda() const { return config.lambda.value_or(lambda_bar); }
};

/// Validates dimensions and the gain, then builds the derived data.
void prepare(Problem& p);

struct TerminalSpec
{
    enum class Kind
    {
        exact,
        zonotope
    };
    Kind kind = Kind::exact;
    Zonotope set;
    /// Per-generator coefficient bounds |xi_j| <= b_j; empty means all ones.
    Vector coeff_bounds;

    static TerminalSpec exact() { return {}; }
    static TerminalSpec zonotope_set(Zonotope z, Vector bounds = {})
    {
        return {Kind::zonotope, std::move(z), std::move(bounds)};
    }
    int num_generators() const { return kind == Kind::exact ? 0 : set.num_generators(); }
};

struct SolveResult
{
    bool feasible = false;
    double cost = 0.0;  ///< N + LP value + gamma_z |x - r(k)|_1
    int horizon = 0;
    std::vector<Vector> inputs;  ///< v(0..N-1)
    std::vector<Vector> states;  ///< z(0..N)
    int lp_solves = 0;
};

/// Fixed-horizon LP plus the map from its variables back to (z, v).
///
/// Deviation from a plain epigraph form: z(j) = r(k+j) + p(j) - n(j) and
/// v(j) = v+(j) - v-(j) with all parts nonnegative, so the 1-norm costs are
/// linear and axis-aligned constraint rows become variable bounds.
struct HorizonLp
{
    lp::LinearProgram program;
    bool infeasible_by_construction = false;
    int horizon = 0;
    double constant_cost = 0.0;  ///< gamma_z |x - r(k)|_1
    int state_dim = 0, input_dim = 0, num_xi = 0;

    int p_index(int j, int i) const { return (j - 1) * 2 * state_dim + i; }
    int n_index(int j, int i) const { return (j - 1) * 2 * state_dim + state_dim + i; }
    int vp_index(int j, int i) const { return horizon * 2 * state_dim + j * 2 * input_dim + i; }
    int vm_index(int j, int i) const { return horizon * 2 * state_dim + j * 2 * input_dim + input_dim + i; }
    int xi_index(int l) const { return horizon * 2 * (state_dim + input_dim) + l; }
    int num_vars() const { return horizon * 2 * (state_dim + input_dim) + num_xi; }
};

HorizonLp build_fixed_horizon_lp(const Problem& p, const Vector& x, int k, int N, const TerminalSpec& terminal);

/// Solves one fixed-horizon problem. Infeasible results have feasible = false.
SolveResult solve_fixed_horizon(const Problem& p, const Vector& x, int k, int N, const TerminalSpec& terminal);

/// Raised when the LP solver hits its iteration cap.
class SolverStall : public std::runtime_error
{
public:
    SolverStall(int horizon, int step)
        : std::runtime_error("LP solver stalled at horizon N = " + std::to_string(horizon) + ", step k = " +
                             std::to_string(step)),
          horizon_(horizon)
    {
    }
    int horizon() const { return horizon_; }

private:
    int horizon_;
};

/// Terminal set per horizon; nullopt skips that N.
using TerminalProvider = std::function<std::optional<TerminalSpec>(int)>;

struct SweepOptions
{
    /// Stop once N >= best cost (J(N) >= N makes this exact).
    bool early_stop = true;
};

/// Minimizes J(N) over N in [N_low, N_high]; ties go to the smaller N.
SolveResult solve_pk(const Problem& p, const Vector& x, int k, const TerminalProvider& terminal, int N_low,
                     int N_high, const SweepOptions& options = {});
SolveResult solve_pk(const Problem& p, const Vector& x, int k, const TerminalSpec& terminal, int N_low, int N_high,
                     const SweepOptions& options = {});

struct LambdaBar
{
    double value = 1.0;
    int truncation = 0;  ///< terms summed before the tail bound took over
};

/// 1 - max over the vertices of W of the truncated sums plus a certified tail
/// bound. Vertices are enumerated over coordinates with nonzero width (at most
/// kLambdaMaxCoords). The vertex loop runs under OpenMP.
inline constexpr int kLambdaMaxCoords = 20;
LambdaBar compute_lambda_bar(double gamma_z, double gamma_v, const Matrix& k_gain, const Matrix& a_k, const Box& w,
                             double tail_tol);
/// Same computation without OpenMP; used as the test reference.
LambdaBar compute_lambda_bar_serial(double gamma_z, double gamma_v, const Matrix& k_gain, const Matrix& a_k,
                                    const Box& w, double tail_tol);

/// Per-generator allocation for the FTCS terminal set Q minus S(N),
/// N = 0..N_max. Returned entry N is 1 - s(N) or nullopt once some s_j > 1.
std::vector<std::optional<Vector>> ftcs_schedule(const TubeCache& tubes, const SinfApprox& sinf, int N_max);

enum class Mode
{
    atcs,
    ftcs,
    mintime
};
std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

enum class Branch
{
    C1,
    C2,
    Fixed
};
std::string to_string(Branch b);

struct ControllerState
{
    TerminalSpec terminal;
    SolveResult last;
    int N_bar = 0;
    double J0 = 0.0;
    int step = 0;
    std::vector<Branch> branch_log;
};

/// Reported when a provably feasible problem comes back infeasible.
class InvariantBreach : public std::runtime_error
{
public:
    InvariantBreach(int step, const std::string& what)
        : std::runtime_error("invariant breach at k = " + std::to_string(step) + ": " + what), step_(step)
    {
    }
    int step() const { return step_; }

private:
    int step_;
};

/// P_0 infeasible at the initial state.
class InfeasibleStart : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Problem with gamma_z = gamma_v = 0 and lambda = 1.
Problem mintime_problem(const Problem& p);

/// k = 0 solve; throws InfeasibleStart.
ControllerState initialize(const Problem& p, Mode mode, const Vector& x0);
/// One step k >= 1 of the adaptive scheme; updates ctrl. Throws InvariantBreach.
void atcs_step(ControllerState& ctrl, const Problem& p, const Vector& x, int k, bool mintime = false);
/// One step of the fixed-sequence baseline.
void ftcs_step(ControllerState& ctrl, const Problem& p, const Vector& x, int k);

struct StepRecord
{
    int k = 0;
    Vector x, u, w, r;
    double J = 0.0;
    int N = 0;
    Branch branch = Branch::C1;
    int terminal_generators = 0;
};

struct SimTrace
{
    Mode mode = Mode::atcs;
    std::vector<StepRecord> records;
    Vector x_final, r_final;
    int N_ct = 0;
    int N_bar = 0;
    double J0 = 0.0;
    double lambda = 0.0;
    bool feasible_throughout = true;
    std::string breach;  ///< set when the loop stopped on an invariant breach
};

using DisturbanceFn = std::function<Vector(int)>;

/// Closed loop until the horizon-1 input has been applied. `p` must be
/// prepared; for MINTIME pass the original problem (weights are dropped here).
SimTrace run_controller(const Problem& p, const Vector& x0, Mode mode, const DisturbanceFn& disturbance);

}  // namespace vhmpc

#endif
