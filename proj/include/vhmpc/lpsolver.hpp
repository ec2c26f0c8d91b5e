#ifndef VHMPC_LPSOLVER_HPP
#define VHMPC_LPSOLVER_HPP

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vhmpc/matrixcore.hpp"

namespace vhmpc::lp
{

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Solver constants, surfaced in one place.
struct SolverConfig
{
    double feasibility_tol = 1e-8;   ///< primal feasibility on the original problem
    double pivot_tol = 1e-10;        ///< smallest admissible pivot element
    double optimality_tol = 1e-9;    ///< reduced-cost threshold (scaled problem)
    int iteration_cap = 50000;
    int refactor_interval = 50;        ///< floor; the solver uses max(this, 2 * rows)
    int degenerate_before_bland = 50;  ///< consecutive degenerate pivots before Bland's rule
    bool scale = true;
};

/// One sparse constraint row a^T x (<= or =) b.
using Terms = std::vector<std::pair<int, double>>;

struct Row
{
    std::vector<std::pair<int, double>> entries;
    double rhs = 0.0;
};

/// minimize c^T x  s.t.  ineq rows <= rhs,  eq rows = rhs,  lower <= x <= upper.
struct LinearProgram
{
    Vector objective;
    std::vector<Row> inequalities;
    std::vector<Row> equalities;
    std::vector<double> lower;
    std::vector<double> upper;

    LinearProgram() = default;
    /// num_vars variables, zero cost, bounds [0, +inf).
    explicit LinearProgram(int num_vars);

    int num_vars() const { return static_cast<int>(objective.size()); }

    /// Appends a variable and returns its index.
    int add_variable(double lo, double hi, double cost = 0.0);

    void add_inequality(std::vector<std::pair<int, double>> entries, double rhs);
    void add_equality(std::vector<std::pair<int, double>> entries, double rhs);
    /// Dense-row convenience overloads; zero coefficients are dropped.
    void add_inequality(const Vector& normal, double rhs);
    void add_equality(const Vector& normal, double rhs);

    /// Throws std::invalid_argument if indices, sizes, or bounds are inconsistent.
    void validate() const;
};

enum class Status
{
    optimal,
    infeasible,
    unbounded,
    stalled
};

std::string to_string(Status s);

struct LpOutcome
{
    Status status = Status::infeasible;
    Vector point;                ///< present iff optimal
    double objective_value = 0;  ///< meaningful iff optimal
    int iterations = 0;

    bool optimal() const { return status == Status::optimal; }
};

/// Two-phase bounded-variable revised simplex with Dantzig pricing and a
/// Bland fallback after a run of degenerate pivots. Deterministic.
LpOutcome solve(const LinearProgram& lp, const SolverConfig& config = {});

/// Largest violation of any constraint or bound at x (0 if feasible).
double max_violation(const LinearProgram& lp, const Vector& x);

}  // namespace vhmpc::lp

#endif
