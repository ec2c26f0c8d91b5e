#ifndef VHMPC_SETALGEBRA_HPP
#define VHMPC_SETALGEBRA_HPP

#include <vector>

#include "vhmpc/matrixcore.hpp"

namespace vhmpc
{

/// Generators with infinity-norm below this are dropped during sums.
inline constexpr double kGeneratorPruneTol = 1e-14;

/// Axis-aligned box [lower, upper].
class Box
{
public:
    Box(Vector lower, Vector upper);

    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    int dim() const { return static_cast<int>(lower_.size()); }

    Vector center() const { return 0.5 * (lower_ + upper_); }
    Vector half_widths() const { return 0.5 * (upper_ - lower_); }
    bool contains(const Vector& x, double tol = 0.0) const;

private:
    Vector lower_;
    Vector upper_;
};

/// Center plus generator columns: { c + G xi : |xi|_inf <= 1 }. An empty
/// generator matrix is the singleton {c}.
class Zonotope
{
public:
    Zonotope() = default;
    Zonotope(Vector center, Matrix generators);

    static Zonotope point(const Vector& c);
    static Zonotope origin(int dim);
    /// One generator per coordinate with nonzero width.
    static Zonotope from_box(const Box& box);

    const Vector& center() const { return center_; }
    const Matrix& generators() const { return generators_; }
    int dim() const { return static_cast<int>(center_.size()); }
    int num_generators() const { return static_cast<int>(generators_.cols()); }

    Zonotope scaled(double s) const;

private:
    Vector center_;
    Matrix generators_;
};

/// { x : a_i^T x <= b_i }, normals stored as rows.
class HPolytope
{
public:
    HPolytope() = default;
    HPolytope(Matrix normals, Vector offsets);

    static HPolytope from_box(const Box& box);

    const Matrix& normals() const { return normals_; }
    const Vector& offsets() const { return offsets_; }
    int dim() const { return static_cast<int>(normals_.cols()); }
    int num_rows() const { return static_cast<int>(normals_.rows()); }

    bool contains(const Vector& x, double tol = 1e-9) const;
    /// Residuals a_i^T x - b_i.
    Vector residuals(const Vector& x) const;

private:
    Matrix normals_;
    Vector offsets_;
};

Zonotope linear_map_zonotope(const Matrix& m, const Zonotope& z);

/// Centers add, generator lists concatenate (tiny generators pruned).
Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b);

/// h_Z(d) = d^T c + sum_j |d^T g_j|.
double support(const Zonotope& z, const Vector& direction);

/// Offsets shrink by the support of Z along each normal.
HPolytope pontryagin_diff(const HPolytope& p, const Zonotope& z);

/// One LP feasibility solve; throws if the solver stalls.
bool is_empty(const HPolytope& p);

/// Counterclockwise boundary of a 2D zonotope, by angular sort of the
/// generators. A singleton gives one point.
std::vector<Vector> vertices_2d(const Zonotope& z);

/// Smallest rho with x in c + rho * G[-1,1]^m, or +inf if x - c is outside
/// the generator span. Solved as an LP.
double zonotope_gauge(const Zonotope& z, const Vector& x);

/// Membership as an LP feasibility problem with |xi_j| <= 1 + tol.
bool zonotope_contains(const Zonotope& z, const Vector& x, double tol = 1e-7);

/// Drops rows that duplicate an earlier row exactly (after normalization).
HPolytope remove_duplicate_rows(const HPolytope& p);

}  // namespace vhmpc

#endif
