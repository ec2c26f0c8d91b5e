#ifndef VHMPC_MATRIXCORE_HPP
#define VHMPC_MATRIXCORE_HPP

#include <Eigen/Dense>

namespace vhmpc
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative tolerance at which the exponential series is truncated.
inline constexpr double kExpmSeriesTol = 1e-12;
/// Squaring depth beyond which the step is considered pathological.
inline constexpr int kExpmMaxSquarings = 64;
/// Default power bound used by the Schur guard.
inline constexpr int kSchurMaxPower = 64;

/// M^i for a square M; M^0 is the identity. Throws std::invalid_argument on
/// non-square input.
Matrix mat_power(const Matrix& m, int i);

/// Zero-order-hold discretization of x' = A_c x + B_c u.
struct Discretization
{
    Matrix A;  ///< e^{A_c step}
    Matrix B;  ///< (int_0^step e^{A_c s} ds) B_c
};

/// Evaluates both factors through the exponential of the augmented matrix
/// [[A_c, B_c], [0, 0]] * step using scaling and squaring of a truncated
/// Taylor series. Throws std::runtime_error if more than kExpmMaxSquarings
/// squarings would be needed.
Discretization expm_with_integral(const Matrix& a_c, const Matrix& b_c, double step);

/// Sufficient test for spectral radius < 1: some power m <= max_power has
/// infinity-norm below one. Returns false when no such power is found.
bool verify_schur(const Matrix& m, int max_power = kSchurMaxPower);

/// Smallest m <= max_power with ||M^m||_inf < 1, or 0 if none.
int schur_decay_power(const Matrix& m, int max_power = kSchurMaxPower);

/// Upper bound on the spectral radius from norm decay: min over m of
/// ||M^m||_inf^(1/m), m = 1..max_power.
double spectral_radius_bound(const Matrix& m, int max_power = kSchurMaxPower);

bool all_finite(const Matrix& m);

}  // namespace vhmpc

#endif
