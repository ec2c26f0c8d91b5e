#include "vhmpc/setalgebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vhmpc/lpsolver.hpp"

namespace vhmpc
{

Box::Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper))
{
    if (lower_.size() != upper_.size() || lower_.size() == 0)
    {
        throw std::invalid_argument("Box: lower and upper must share a positive dimension");
    }
    if (!lower_.allFinite() || !upper_.allFinite() || (lower_.array() > upper_.array()).any())
    {
        throw std::invalid_argument("Box: requires finite lower <= upper");
    }
}

bool Box::contains(const Vector& x, double tol) const
{
    return x.size() == lower_.size() && (x.array() >= lower_.array() - tol).all() &&
           (x.array() <= upper_.array() + tol).all();
}

Zonotope::Zonotope(Vector center, Matrix generators)
    : center_(std::move(center)), generators_(std::move(generators))
{
    if (generators_.cols() == 0)
    {
        generators_.resize(center_.size(), 0);
    }
    if (generators_.rows() != center_.size())
    {
        throw std::invalid_argument("Zonotope: generator dimension must match the center");
    }
}

Zonotope Zonotope::point(const Vector& c)
{
    return Zonotope(c, Matrix(c.size(), 0));
}

Zonotope Zonotope::origin(int dim)
{
    return point(Vector::Zero(dim));
}

Zonotope Zonotope::from_box(const Box& box)
{
    const Vector hw = box.half_widths();
    std::vector<int> active;
    for (int i = 0; i < box.dim(); ++i)
    {
        if (hw[i] > 0.0)
        {
            active.push_back(i);
        }
    }
    Matrix g = Matrix::Zero(box.dim(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k)
    {
        g(active[k], static_cast<Eigen::Index>(k)) = hw[active[k]];
    }
    return Zonotope(box.center(), std::move(g));
}

Zonotope Zonotope::scaled(double s) const
{
    return Zonotope(center_ * s, generators_ * s);
}

HPolytope::HPolytope(Matrix normals, Vector offsets) : normals_(std::move(normals)), offsets_(std::move(offsets))
{
    if (normals_.rows() != offsets_.size())
    {
        throw std::invalid_argument("HPolytope: one offset per normal required");
    }
    if (normals_.rows() == 0)
    {
        throw std::invalid_argument("HPolytope: at least one constraint required");
    }
    for (Eigen::Index i = 0; i < normals_.rows(); ++i)
    {
        if (normals_.row(i).cwiseAbs().maxCoeff() == 0.0)
        {
            throw std::invalid_argument("HPolytope: zero normal");
        }
    }
}

HPolytope HPolytope::from_box(const Box& box)
{
    const int n = box.dim();
    Matrix a = Matrix::Zero(2 * n, n);
    Vector b(2 * n);
    for (int i = 0; i < n; ++i)
    {
        a(2 * i, i) = 1.0;
        b[2 * i] = box.upper()[i];
        a(2 * i + 1, i) = -1.0;
        b[2 * i + 1] = -box.lower()[i];
    }
    return HPolytope(std::move(a), std::move(b));
}

Vector HPolytope::residuals(const Vector& x) const
{
    if (x.size() != dim())
    {
        throw std::invalid_argument("HPolytope::residuals: dimension mismatch");
    }
    return normals_ * x - offsets_;
}

bool HPolytope::contains(const Vector& x, double tol) const
{
    return residuals(x).maxCoeff() <= tol;
}

Zonotope linear_map_zonotope(const Matrix& m, const Zonotope& z)
{
    if (m.cols() != z.dim())
    {
        throw std::invalid_argument("linear_map_zonotope: dimension mismatch");
    }
    return Zonotope(m * z.center(), m * z.generators());
}

Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b)
{
    if (a.dim() != b.dim())
    {
        throw std::invalid_argument("minkowski_sum: dimension mismatch");
    }
    std::vector<Eigen::Index> keep_a, keep_b;
    for (Eigen::Index j = 0; j < a.generators().cols(); ++j)
    {
        if (a.generators().col(j).cwiseAbs().maxCoeff() >= kGeneratorPruneTol)
        {
            keep_a.push_back(j);
        }
    }
    for (Eigen::Index j = 0; j < b.generators().cols(); ++j)
    {
        if (b.generators().col(j).cwiseAbs().maxCoeff() >= kGeneratorPruneTol)
        {
            keep_b.push_back(j);
        }
    }
    Matrix g(a.dim(), static_cast<Eigen::Index>(keep_a.size() + keep_b.size()));
    Eigen::Index col = 0;
    for (Eigen::Index j : keep_a)
    {
        g.col(col++) = a.generators().col(j);
    }
    for (Eigen::Index j : keep_b)
    {
        g.col(col++) = b.generators().col(j);
    }
    return Zonotope(a.center() + b.center(), std::move(g));
}

double support(const Zonotope& z, const Vector& direction)
{
    if (direction.size() != z.dim())
    {
        throw std::invalid_argument("support: dimension mismatch");
    }
    double s = direction.dot(z.center());
    if (z.num_generators() > 0)
    {
        s += (direction.transpose() * z.generators()).cwiseAbs().sum();
    }
    return s;
}

HPolytope pontryagin_diff(const HPolytope& p, const Zonotope& z)
{
    if (p.dim() != z.dim())
    {
        throw std::invalid_argument("pontryagin_diff: dimension mismatch");
    }
    Vector b = p.offsets();
    for (int i = 0; i < p.num_rows(); ++i)
    {
        b[i] -= support(z, p.normals().row(i).transpose());
    }
    return HPolytope(p.normals(), std::move(b));
}

bool is_empty(const HPolytope& p)
{
    lp::LinearProgram prog(p.dim());
    for (int j = 0; j < p.dim(); ++j)
    {
        prog.lower[j] = -lp::kInf;
    }
    for (int i = 0; i < p.num_rows(); ++i)
    {
        prog.add_inequality(Vector(p.normals().row(i).transpose()), p.offsets()[i]);
    }
    const lp::LpOutcome out = lp::solve(prog);
    switch (out.status)
    {
        case lp::Status::infeasible:
            return true;
        case lp::Status::optimal:
        case lp::Status::unbounded:
            return false;
        case lp::Status::stalled:
            break;
    }
    throw std::runtime_error("is_empty: LP solver stalled");
}

std::vector<Vector> vertices_2d(const Zonotope& z)
{
    if (z.dim() != 2)
    {
        throw std::invalid_argument("vertices_2d: zonotope must be two-dimensional");
    }
    // orient every generator into the upper half plane, merge parallel ones
    std::vector<Vector> gens;
    for (int j = 0; j < z.num_generators(); ++j)
    {
        Vector g = z.generators().col(j);
        if (g.cwiseAbs().maxCoeff() < kGeneratorPruneTol)
        {
            continue;
        }
        if (g[1] < 0.0 || (g[1] == 0.0 && g[0] < 0.0))
        {
            g = -g;
        }
        gens.push_back(g);
    }
    std::sort(gens.begin(), gens.end(),
              [](const Vector& a, const Vector& b) { return std::atan2(a[1], a[0]) < std::atan2(b[1], b[0]); });
    std::vector<Vector> merged;
    for (const Vector& g : gens)
    {
        if (!merged.empty())
        {
            const Vector& h = merged.back();
            const double cross = h[0] * g[1] - h[1] * g[0];
            if (std::abs(cross) <= 1e-12 * h.norm() * g.norm())
            {
                merged.back() += g;
                continue;
            }
        }
        merged.push_back(g);
    }

    std::vector<Vector> verts;
    Vector v = z.center();
    for (const Vector& g : merged)
    {
        v -= g;
    }
    verts.push_back(v);
    if (merged.empty())
    {
        return verts;
    }
    for (const Vector& g : merged)
    {
        v += 2.0 * g;
        verts.push_back(v);
    }
    for (std::size_t i = 0; i + 1 < merged.size(); ++i)
    {
        v -= 2.0 * merged[i];
        verts.push_back(v);
    }
    return verts;
}

double zonotope_gauge(const Zonotope& z, const Vector& x)
{
    if (x.size() != z.dim())
    {
        throw std::invalid_argument("zonotope_gauge: dimension mismatch");
    }
    const Vector d = x - z.center();
    const int m = z.num_generators();
    if (m == 0)
    {
        return d.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + z.center().cwiseAbs().maxCoeff()) ? 0.0
                                                                                           : lp::kInf;
    }
    lp::LinearProgram prog(m + 1);
    for (int j = 0; j < m; ++j)
    {
        prog.lower[j] = -lp::kInf;
    }
    const int rho = m;
    prog.objective[rho] = 1.0;
    for (int i = 0; i < z.dim(); ++i)
    {
        std::vector<std::pair<int, double>> row;
        for (int j = 0; j < m; ++j)
        {
            if (z.generators()(i, j) != 0.0)
            {
                row.emplace_back(j, z.generators()(i, j));
            }
        }
        if (row.empty())
        {
            if (std::abs(d[i]) > 1e-12)
            {
                return lp::kInf;
            }
            continue;
        }
        prog.add_equality(std::move(row), d[i]);
    }
    for (int j = 0; j < m; ++j)
    {
        prog.add_inequality(lp::Terms{{j, 1.0}, {rho, -1.0}}, 0.0);
        prog.add_inequality(lp::Terms{{j, -1.0}, {rho, -1.0}}, 0.0);
    }
    const lp::LpOutcome out = lp::solve(prog);
    if (out.status == lp::Status::stalled)
    {
        throw std::runtime_error("zonotope_gauge: LP solver stalled");
    }
    return out.optimal() ? out.objective_value : lp::kInf;
}

bool zonotope_contains(const Zonotope& z, const Vector& x, double tol)
{
    if (x.size() != z.dim())
    {
        throw std::invalid_argument("zonotope_contains: dimension mismatch");
    }
    const Vector d = x - z.center();
    const int m = z.num_generators();
    const double reach = 1.0 + tol;
    lp::LinearProgram prog(m);
    for (int j = 0; j < m; ++j)
    {
        prog.lower[j] = -reach;
        prog.upper[j] = reach;
    }
    for (int i = 0; i < z.dim(); ++i)
    {
        std::vector<std::pair<int, double>> row;
        for (int j = 0; j < m; ++j)
        {
            if (z.generators()(i, j) != 0.0)
            {
                row.emplace_back(j, z.generators()(i, j));
            }
        }
        if (row.empty())
        {
            if (std::abs(d[i]) > 1e-12 * (1.0 + std::abs(z.center()[i])))
            {
                return false;
            }
            continue;
        }
        prog.add_equality(std::move(row), d[i]);
    }
    if (prog.equalities.empty())
    {
        return true;
    }
    const lp::LpOutcome out = lp::solve(prog);
    if (out.status == lp::Status::stalled)
    {
        throw std::runtime_error("zonotope_contains: LP solver stalled");
    }
    return out.optimal();
}

HPolytope remove_duplicate_rows(const HPolytope& p)
{
    std::vector<Eigen::Index> keep;
    std::vector<Vector> seen;
    for (Eigen::Index i = 0; i < p.normals().rows(); ++i)
    {
        const double scale = p.normals().row(i).norm();
        Vector key(p.dim() + 1);
        key.head(p.dim()) = p.normals().row(i).transpose() / scale;
        key[p.dim()] = p.offsets()[i] / scale;
        const bool dup = std::any_of(seen.begin(), seen.end(), [&](const Vector& s) { return s == key; });
        if (!dup)
        {
            seen.push_back(key);
            keep.push_back(i);
        }
    }
    Matrix a(static_cast<Eigen::Index>(keep.size()), p.dim());
    Vector b(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
    {
        a.row(static_cast<Eigen::Index>(k)) = p.normals().row(keep[k]);
        b[static_cast<Eigen::Index>(k)] = p.offsets()[keep[k]];
    }
    return HPolytope(std::move(a), std::move(b));
}

}  // namespace vhmpc
