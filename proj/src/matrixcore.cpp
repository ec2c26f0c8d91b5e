#include "vhmpc/matrixcore.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vhmpc
{

namespace
{
void require_square(const Matrix& m, const char* what)
{
    if (m.rows() != m.cols())
    {
        throw std::invalid_argument(std::string(what) + ": matrix must be square");
    }
}

double inf_norm(const Matrix& m)
{
    if (m.size() == 0)
    {
        return 0.0;
    }
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}
}  // namespace

Matrix mat_power(const Matrix& m, int i)
{
    require_square(m, "mat_power");
    if (i < 0)
    {
        throw std::invalid_argument("mat_power: negative exponent");
    }
    // binary exponentiation
    Matrix result = Matrix::Identity(m.rows(), m.cols());
    Matrix base = m;
    while (i > 0)
    {
        if (i & 1)
        {
            result = result * base;
        }
        i >>= 1;
        if (i > 0)
        {
            base = base * base;
        }
    }
    return result;
}

Discretization expm_with_integral(const Matrix& a_c, const Matrix& b_c, double step)
{
    require_square(a_c, "expm_with_integral");
    if (b_c.rows() != a_c.rows())
    {
        throw std::invalid_argument("expm_with_integral: B_c row count must match A_c");
    }
    if (!(step >= 0.0) || !std::isfinite(step))
    {
        throw std::invalid_argument("expm_with_integral: step must be finite and nonnegative");
    }
    if (!all_finite(a_c) || !all_finite(b_c))
    {
        throw std::invalid_argument("expm_with_integral: non-finite entries");
    }

    const Eigen::Index n = a_c.rows();
    const Eigen::Index m = b_c.cols();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = a_c * step;
    aug.topRightCorner(n, m) = b_c * step;

    // scale so that the series argument has norm <= 1/2
    int squarings = 0;
    double norm = inf_norm(aug);
    while (norm > 0.5)
    {
        norm *= 0.5;
        ++squarings;
        if (squarings > kExpmMaxSquarings)
        {
            throw std::runtime_error("expm_with_integral: squaring depth exceeded (pathological step)");
        }
    }
    const Matrix scaled = aug * std::ldexp(1.0, -squarings);

    Matrix sum = Matrix::Identity(n + m, n + m);
    Matrix term = Matrix::Identity(n + m, n + m);
    for (int k = 1; k < 64; ++k)
    {
        term = term * scaled / static_cast<double>(k);
        sum += term;
        if (inf_norm(term) <= kExpmSeriesTol * inf_norm(sum))
        {
            break;
        }
    }
    for (int s = 0; s < squarings; ++s)
    {
        sum = sum * sum;
    }

    return Discretization{sum.topLeftCorner(n, n), sum.topRightCorner(n, m)};
}

int schur_decay_power(const Matrix& m, int max_power)
{
    require_square(m, "verify_schur");
    Matrix p = m;
    for (int k = 1; k <= max_power; ++k)
    {
        if (inf_norm(p) < 1.0)
        {
            return k;
        }
        p = p * m;
    }
    return 0;
}

bool verify_schur(const Matrix& m, int max_power)
{
    return schur_decay_power(m, max_power) > 0;
}

double spectral_radius_bound(const Matrix& m, int max_power)
{
    require_square(m, "spectral_radius_bound");
    double best = std::numeric_limits<double>::infinity();
    Matrix p = m;
    for (int k = 1; k <= max_power; ++k)
    {
        best = std::min(best, std::pow(inf_norm(p), 1.0 / k));
        p = p * m;
    }
    return best;
}

bool all_finite(const Matrix& m)
{
    return m.allFinite();
}

}  // namespace vhmpc
