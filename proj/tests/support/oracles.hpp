#ifndef VHMPC_TEST_ORACLES_HPP
#define VHMPC_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vhmpc/setalgebra.hpp"

namespace oracle
{

using vhmpc::Matrix;
using vhmpc::Vector;

inline double cross(const Vector& o, const Vector& a, const Vector& b)
{
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Andrew's monotone chain, counterclockwise, collinear points dropped.
inline std::vector<Vector> convex_hull(std::vector<Vector> pts, double tol = 1e-10)
{
    std::sort(pts.begin(), pts.end(), [](const Vector& a, const Vector& b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    if (pts.size() < 3)
    {
        return pts;
    }
    std::vector<Vector> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= tol)
        {
            --k;
        }
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;)
    {
        while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= tol)
        {
            --k;
        }
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

/// Every sign combination of the generators.
inline std::vector<Vector> zonotope_corners(const vhmpc::Zonotope& z)
{
    const int m = z.num_generators();
    std::vector<Vector> out;
    for (long mask = 0; mask < (1L << m); ++mask)
    {
        Vector p = z.center();
        for (int j = 0; j < m; ++j)
        {
            p += ((mask >> j) & 1 ? 1.0 : -1.0) * z.generators().col(j);
        }
        out.push_back(p);
    }
    return out;
}

/// Signed distance to a CCW polygon: negative inside.
inline double polygon_margin(const std::vector<Vector>& poly, const Vector& x)
{
    if (poly.size() < 3)
    {
        return 1.0;
    }
    double worst = -1e300;
    for (std::size_t i = 0; i < poly.size(); ++i)
    {
        const Vector& a = poly[i];
        const Vector& b = poly[(i + 1) % poly.size()];
        const double len = (b - a).norm();
        worst = std::max(worst, -cross(a, b, x) / len);
    }
    return worst;
}

/// Same polygon up to a cyclic shift, vertex by vertex.
inline bool same_polygon(const std::vector<Vector>& a, const std::vector<Vector>& b, double tol)
{
    if (a.size() != b.size())
    {
        return false;
    }
    if (a.empty())
    {
        return true;
    }
    for (std::size_t s = 0; s < b.size(); ++s)
    {
        bool ok = true;
        for (std::size_t i = 0; i < a.size() && ok; ++i)
        {
            ok = (a[i] - b[(i + s) % b.size()]).norm() <= tol;
        }
        if (ok)
        {
            return true;
        }
    }
    return false;
}

inline Vector random_unit(std::mt19937_64& g, int n)
{
    std::normal_distribution<double> nd;
    Vector v(n);
    for (int i = 0; i < n; ++i)
    {
        v[i] = nd(g);
    }
    return v / v.norm();
}

}  // namespace oracle

#endif
