#include "vhmpc/tube.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace vhmpc
{

TubeCache::TubeCache(Matrix closed_loop, Box disturbance, int capacity)
    : a_k_(std::move(closed_loop)), w_(std::move(disturbance)), w_zono_(Zonotope::from_box(w_))
{
    if (a_k_.rows() != a_k_.cols() || a_k_.rows() != w_.dim())
    {
        throw std::invalid_argument("TubeCache: A_K must be square and match W");
    }
    // the error starts at zero, so the box center must be too
    if (w_zono_.center().cwiseAbs().maxCoeff() > 0.0)
    {
        throw std::invalid_argument("TubeCache: W must be centered at the origin");
    }
    powers_.push_back(Matrix::Identity(a_k_.rows(), a_k_.cols()));
    tubes_.push_back(Zonotope::origin(dim()));
    extend(capacity);
}

void TubeCache::extend(int k)
{
    while (capacity() < k)
    {
        const Matrix& p = powers_.back();
        tubes_.push_back(minkowski_sum(tubes_.back(), Zonotope(Vector::Zero(dim()), p * w_zono_.generators())));
        powers_.push_back(p * a_k_);
    }
}

Matrix TubeCache::power(int i) const
{
    if (i < 0)
    {
        throw std::invalid_argument("TubeCache::power: negative index");
    }
    if (i < static_cast<int>(powers_.size()))
    {
        return powers_[static_cast<std::size_t>(i)];
    }
    return powers_.back() * mat_power(a_k_, i - static_cast<int>(powers_.size()) + 1);
}

Matrix TubeCache::block(int i) const
{
    return power(i) * w_zono_.generators();
}

Zonotope TubeCache::tube_at(int k) const
{
    if (k < 0)
    {
        throw std::invalid_argument("tube_at: negative index");
    }
    if (k <= capacity())
    {
        return tubes_[static_cast<std::size_t>(k)];
    }
    Zonotope s = tubes_.back();
    Matrix p = powers_.back();
    for (int i = capacity(); i < k; ++i)
    {
        s = minkowski_sum(s, Zonotope(Vector::Zero(dim()), p * w_zono_.generators()));
        p = p * a_k_;
    }
    return s;
}

namespace
{
std::vector<Vector> contraction_directions(int n)
{
    std::vector<Vector> dirs;
    for (int i = 0; i < n; ++i)
    {
        dirs.push_back(Vector::Unit(n, i));
        dirs.push_back(-Vector::Unit(n, i));
    }
    std::mt19937_64 gen(kSinfDirectionSeed);
    for (int r = 0; r < kSinfRandomDirections; ++r)
    {
        Vector d(n);
        for (int i = 0; i < n; ++i)
        {
            d[i] = 2.0 * std::ldexp(static_cast<double>(gen() >> 11), -53) - 1.0;
        }
        const double nrm = d.norm();
        if (nrm > 0.0)
        {
            dirs.push_back(d / nrm);
        }
    }
    return dirs;
}
}  // namespace

SinfApprox approximate_sinf(const Matrix& a_k, const Box& w, double contraction_tol)
{
    if (!(contraction_tol > 0.0 && contraction_tol < 1.0))
    {
        throw std::invalid_argument("approximate_sinf: contraction_tol must lie in (0, 1)");
    }
    if (a_k.rows() != a_k.cols() || a_k.rows() != w.dim())
    {
        throw std::invalid_argument("approximate_sinf: dimension mismatch");
    }
    const Zonotope wz = Zonotope::from_box(w);
    const int n = w.dim();
    const std::vector<Vector> dirs = contraction_directions(n);
    std::vector<double> h_w;
    for (const Vector& d : dirs)
    {
        h_w.push_back(support(wz, d));
    }

    Matrix p = a_k;
    Matrix gens = wz.generators();
    for (int order = 1; order <= kSinfMaxOrder; ++order)
    {
        const Zonotope image(Vector::Zero(n), p * wz.generators());
        double alpha = 0.0;
        for (std::size_t i = 0; i < dirs.size(); ++i)
        {
            const double h = support(image, dirs[i]);
            if (h_w[i] > 0.0)
            {
                alpha = std::max(alpha, h / h_w[i]);
            }
            else if (h > 0.0)
            {
                alpha = std::numeric_limits<double>::infinity();
            }
        }
        if (alpha <= contraction_tol)
        {
            SinfApprox out;
            out.order = order;
            out.alpha = alpha;
            out.block_width = wz.num_generators();
            out.set = Zonotope(Vector::Zero(n), gens / (1.0 - alpha));
            return out;
        }
        Matrix grown(n, gens.cols() + wz.num_generators());
        grown << gens, image.generators();
        gens = std::move(grown);
        p = p * a_k;
    }
    throw std::runtime_error("approximate_sinf: no contraction within " + std::to_string(kSinfMaxOrder) +
                             " steps (spectral radius too close to 1)");
}

bool has_crossed_rows(const HPolytope& p, double tol)
{
    const Matrix& a = p.normals();
    for (int i = 0; i < p.num_rows(); ++i)
    {
        const double ni = a.row(i).norm();
        for (int j = i + 1; j < p.num_rows(); ++j)
        {
            const double nj = a.row(j).norm();
            if ((a.row(i) / ni + a.row(j) / nj).cwiseAbs().maxCoeff() <= 1e-12 &&
                p.offsets()[i] / ni + p.offsets()[j] / nj < -tol)
            {
                return true;
            }
        }
    }
    return false;
}

Tightened tighten(const HPolytope& x_kj, const HPolytope& u_kj, const Matrix& k_gain, const Zonotope& s_j,
                  bool lp_check)
{
    Tightened t{pontryagin_diff(x_kj, s_j), pontryagin_diff(u_kj, linear_map_zonotope(k_gain, s_j)), false};
    t.empty = has_crossed_rows(t.state) || has_crossed_rows(t.input);
    if (!t.empty && lp_check)
    {
        t.empty = is_empty(t.state) || is_empty(t.input);
    }
    return t;
}

}  // namespace vhmpc
