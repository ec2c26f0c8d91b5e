#include "vhmpc/lpsolver.hpp"

#include <algorithm>
#include <cmath>

namespace vhmpc::lp
{

LinearProgram::LinearProgram(int num_vars)
    : objective(Vector::Zero(num_vars)), lower(num_vars, 0.0), upper(num_vars, kInf)
{
}

int LinearProgram::add_variable(double lo, double hi, double cost)
{
    const int idx = num_vars();
    objective.conservativeResize(idx + 1);
    objective[idx] = cost;
    lower.push_back(lo);
    upper.push_back(hi);
    return idx;
}

void LinearProgram::add_inequality(std::vector<std::pair<int, double>> entries, double rhs)
{
    inequalities.push_back(Row{std::move(entries), rhs});
}

void LinearProgram::add_equality(std::vector<std::pair<int, double>> entries, double rhs)
{
    equalities.push_back(Row{std::move(entries), rhs});
}

namespace
{
std::vector<std::pair<int, double>> sparse_of(const Vector& v)
{
    std::vector<std::pair<int, double>> out;
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        if (v[i] != 0.0)
        {
            out.emplace_back(static_cast<int>(i), v[i]);
        }
    }
    return out;
}
}  // namespace

void LinearProgram::add_inequality(const Vector& normal, double rhs)
{
    add_inequality(sparse_of(normal), rhs);
}

void LinearProgram::add_equality(const Vector& normal, double rhs)
{
    add_equality(sparse_of(normal), rhs);
}

void LinearProgram::validate() const
{
    const int n = num_vars();
    if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n)
    {
        throw std::invalid_argument("LinearProgram: bound arrays do not match the objective dimension");
    }
    for (int j = 0; j < n; ++j)
    {
        if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] || lower[j] == kInf ||
            upper[j] == -kInf)
        {
            throw std::invalid_argument("LinearProgram: invalid bounds on variable " + std::to_string(j));
        }
    }
    if (!objective.allFinite())
    {
        throw std::invalid_argument("LinearProgram: non-finite objective");
    }
    auto check_rows = [n](const std::vector<Row>& rows) {
        for (const Row& r : rows)
        {
            if (!std::isfinite(r.rhs))
            {
                throw std::invalid_argument("LinearProgram: non-finite right-hand side");
            }
            for (const auto& [j, a] : r.entries)
            {
                if (j < 0 || j >= n || !std::isfinite(a))
                {
                    throw std::invalid_argument("LinearProgram: row entry out of range or non-finite");
                }
            }
        }
    };
    check_rows(inequalities);
    check_rows(equalities);
}

std::string to_string(Status s)
{
    switch (s)
    {
        case Status::optimal:
            return "optimal";
        case Status::infeasible:
            return "infeasible";
        case Status::unbounded:
            return "unbounded";
        case Status::stalled:
            return "stalled";
    }
    return "unknown";
}

double max_violation(const LinearProgram& lp, const Vector& x)
{
    double worst = 0.0;
    for (int j = 0; j < lp.num_vars(); ++j)
    {
        worst = std::max({worst, lp.lower[j] - x[j], x[j] - lp.upper[j]});
    }
    for (const Row& r : lp.inequalities)
    {
        double s = 0.0;
        for (const auto& [j, a] : r.entries)
        {
            s += a * x[j];
        }
        worst = std::max(worst, s - r.rhs);
    }
    for (const Row& r : lp.equalities)
    {
        double s = 0.0;
        for (const auto& [j, a] : r.entries)
        {
            s += a * x[j];
        }
        worst = std::max(worst, std::abs(s - r.rhs));
    }
    return worst;
}

namespace
{

enum class VarState : unsigned char
{
    basic,
    at_lower,
    at_upper,
    free_zero,
    fixed
};

double pow2_round(double v)
{
    if (!(v > 0.0) || !std::isfinite(v))
    {
        return 1.0;
    }
    return std::ldexp(1.0, static_cast<int>(std::lround(std::log2(v))));
}

/// Working copy of the problem in computational form A x = b, l <= x <= u,
/// with columns ordered [structural | slacks | artificials].
class Simplex
{
public:
    Simplex(const LinearProgram& lp, const SolverConfig& cfg) : lp_(lp), cfg_(cfg)
    {
        n_ = lp.num_vars();
        m1_ = static_cast<int>(lp.inequalities.size());
        m_ = m1_ + static_cast<int>(lp.equalities.size());
        // an O(m^3) refresh every 2m pivots costs about as much as the O(m^2) updates in between
        refactor_every_ = std::max(cfg.refactor_interval, 2 * m_);
        build();
    }

    LpOutcome run()
    {
        LpOutcome out;
        initial_basis();

        if (artificials_in_use_ > 0)
        {
            set_phase_cost(true);
            const Status s1 = iterate();
            if (s1 == Status::stalled)
            {
                out.status = Status::stalled;
                out.iterations = iterations_;
                return out;
            }
            refactor();
            double infeas = 0.0;
            for (int a = art_begin(); a < total_cols(); ++a)
            {
                if (art_used_[a - art_begin()])
                {
                    infeas += std::max(0.0, x_[a]);
                }
            }
            double bscale = 1.0;
            for (int i = 0; i < m_; ++i)
            {
                bscale = std::max(bscale, std::abs(b_[i]));
            }
            if (infeas > 1e-9 * bscale)
            {
                out.status = Status::infeasible;
                out.iterations = iterations_;
                return out;
            }
            // artificials are pinned at zero from here on
            for (int a = art_begin(); a < total_cols(); ++a)
            {
                upper_[a] = 0.0;
                lower_[a] = 0.0;
                if (state_[a] != VarState::basic)
                {
                    state_[a] = VarState::fixed;
                    x_[a] = 0.0;
                }
            }
        }

        set_phase_cost(false);
        const Status s2 = iterate();
        out.iterations = iterations_;
        if (s2 != Status::optimal)
        {
            out.status = s2;
            return out;
        }
        refactor();

        out.status = Status::optimal;
        out.point.resize(n_);
        for (int j = 0; j < n_; ++j)
        {
            double v = x_[j] * col_scale_[j];
            // snap to the original bounds (nonbasic values are exact; basic ones may drift by rounding)
            v = std::clamp(v, lp_.lower[j], lp_.upper[j]);
            out.point[j] = v;
        }
        out.objective_value = lp_.objective.dot(out.point);
        return out;
    }

private:
    int struct_end() const { return n_; }
    int slack_begin() const { return n_; }
    int art_begin() const { return n_ + m1_; }
    int total_cols() const { return n_ + m1_ + m_; }

    void build()
    {
        // gather rows
        std::vector<const Row*> rows;
        rows.reserve(m_);
        for (const Row& r : lp_.inequalities)
        {
            rows.push_back(&r);
        }
        for (const Row& r : lp_.equalities)
        {
            rows.push_back(&r);
        }

        row_scale_.assign(m_, 1.0);
        col_scale_.assign(n_, 1.0);
        if (cfg_.scale)
        {
            compute_scaling(rows);
        }

        // structural columns in CSC form
        std::vector<int> counts(n_, 0);
        for (const Row* r : rows)
        {
            for (const auto& [j, a] : r->entries)
            {
                if (a != 0.0)
                {
                    ++counts[j];
                }
            }
        }
        const int nc = total_cols();
        col_start_.assign(nc + 1, 0);
        for (int j = 0; j < n_; ++j)
        {
            col_start_[j + 1] = col_start_[j] + counts[j];
        }
        for (int j = n_; j < nc; ++j)
        {
            col_start_[j + 1] = col_start_[j] + 1;
        }
        row_idx_.assign(col_start_[nc], 0);
        val_.assign(col_start_[nc], 0.0);
        std::vector<int> fill(col_start_.begin(), col_start_.begin() + n_);
        for (int i = 0; i < m_; ++i)
        {
            for (const auto& [j, a] : rows[i]->entries)
            {
                if (a != 0.0)
                {
                    row_idx_[fill[j]] = i;
                    val_[fill[j]] = a * row_scale_[i] * col_scale_[j];
                    ++fill[j];
                }
            }
        }
        for (int s = 0; s < m1_; ++s)
        {
            row_idx_[col_start_[slack_begin() + s]] = s;
            val_[col_start_[slack_begin() + s]] = 1.0;
        }
        for (int a = 0; a < m_; ++a)
        {
            row_idx_[col_start_[art_begin() + a]] = a;
            val_[col_start_[art_begin() + a]] = 1.0;  // sign fixed in initial_basis
        }

        b_.resize(m_);
        for (int i = 0; i < m_; ++i)
        {
            b_[i] = rows[i]->rhs * row_scale_[i];
        }

        lower_.assign(nc, 0.0);
        upper_.assign(nc, kInf);
        for (int j = 0; j < n_; ++j)
        {
            lower_[j] = lp_.lower[j] / col_scale_[j];
            upper_[j] = lp_.upper[j] / col_scale_[j];
        }

        double cmax = 0.0;
        for (int j = 0; j < n_; ++j)
        {
            cmax = std::max(cmax, std::abs(lp_.objective[j] * col_scale_[j]));
        }
        obj_scale_ = cmax > 0.0 ? pow2_round(1.0 / cmax) : 1.0;
        cost2_.assign(nc, 0.0);
        for (int j = 0; j < n_; ++j)
        {
            cost2_[j] = lp_.objective[j] * col_scale_[j] * obj_scale_;
        }
    }

    void compute_scaling(const std::vector<const Row*>& rows)
    {
        // alternating geometric-mean passes, rounded to powers of two
        for (int pass = 0; pass < 6; ++pass)
        {
            for (int i = 0; i < m_; ++i)
            {
                double lo = kInf, hi = 0.0;
                for (const auto& [j, a] : rows[i]->entries)
                {
                    const double v = std::abs(a) * col_scale_[j];
                    if (v > 0.0)
                    {
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                }
                if (hi > 0.0)
                {
                    row_scale_[i] = pow2_round(1.0 / std::sqrt(lo * hi));
                }
            }
            std::vector<double> lo(n_, kInf), hi(n_, 0.0);
            for (int i = 0; i < m_; ++i)
            {
                for (const auto& [j, a] : rows[i]->entries)
                {
                    const double v = std::abs(a) * row_scale_[i];
                    if (v > 0.0)
                    {
                        lo[j] = std::min(lo[j], v);
                        hi[j] = std::max(hi[j], v);
                    }
                }
            }
            for (int j = 0; j < n_; ++j)
            {
                if (hi[j] > 0.0)
                {
                    col_scale_[j] = pow2_round(1.0 / std::sqrt(lo[j] * hi[j]));
                }
            }
        }
    }

    void initial_basis()
    {
        const int nc = total_cols();
        x_.assign(nc, 0.0);
        state_.assign(nc, VarState::at_lower);
        basis_.assign(m_, -1);
        art_used_.assign(m_, false);
        artificials_in_use_ = 0;

        for (int j = 0; j < art_begin(); ++j)
        {
            if (lower_[j] == upper_[j])
            {
                state_[j] = VarState::fixed;
                x_[j] = lower_[j];
            }
            else if (std::isfinite(lower_[j]))
            {
                state_[j] = VarState::at_lower;
                x_[j] = lower_[j];
            }
            else if (std::isfinite(upper_[j]))
            {
                state_[j] = VarState::at_upper;
                x_[j] = upper_[j];
            }
            else
            {
                state_[j] = VarState::free_zero;
                x_[j] = 0.0;
            }
        }

        std::vector<double> resid(b_.begin(), b_.end());
        for (int j = 0; j < n_; ++j)
        {
            if (x_[j] != 0.0)
            {
                for (int p = col_start_[j]; p < col_start_[j + 1]; ++p)
                {
                    resid[row_idx_[p]] -= val_[p] * x_[j];
                }
            }
        }

        Binv_ = Matrix::Zero(m_, m_);
        for (int i = 0; i < m_; ++i)
        {
            const int art = art_begin() + i;
            if (i < m1_ && resid[i] >= 0.0)
            {
                const int s = slack_begin() + i;
                basis_[i] = s;
                state_[s] = VarState::basic;
                x_[s] = resid[i];
                Binv_(i, i) = 1.0;
                lower_[art] = upper_[art] = 0.0;
                state_[art] = VarState::fixed;
            }
            else
            {
                const double sign = resid[i] >= 0.0 ? 1.0 : -1.0;
                val_[col_start_[art]] = sign;
                basis_[i] = art;
                state_[art] = VarState::basic;
                x_[art] = std::abs(resid[i]);
                Binv_(i, i) = sign;
                lower_[art] = 0.0;
                upper_[art] = kInf;
                art_used_[i] = true;
                ++artificials_in_use_;
            }
        }
    }

    void set_phase_cost(bool phase_one)
    {
        cost_.assign(total_cols(), 0.0);
        if (phase_one)
        {
            for (int i = 0; i < m_; ++i)
            {
                if (art_used_[i])
                {
                    cost_[art_begin() + i] = 1.0;
                }
            }
        }
        else
        {
            cost_ = cost2_;
        }
        degenerate_run_ = 0;
        bland_ = false;
    }

    void refactor()
    {
        Matrix B = Matrix::Zero(m_, m_);
        for (int i = 0; i < m_; ++i)
        {
            const int j = basis_[i];
            for (int p = col_start_[j]; p < col_start_[j + 1]; ++p)
            {
                B(row_idx_[p], i) = val_[p];
            }
        }
        Binv_ = B.partialPivLu().inverse();

        Vector rhs = Eigen::Map<const Vector>(b_.data(), m_);
        for (int j = 0; j < total_cols(); ++j)
        {
            if (state_[j] != VarState::basic && x_[j] != 0.0)
            {
                for (int p = col_start_[j]; p < col_start_[j + 1]; ++p)
                {
                    rhs[row_idx_[p]] -= val_[p] * x_[j];
                }
            }
        }
        const Vector xb = Binv_ * rhs;
        for (int i = 0; i < m_; ++i)
        {
            x_[basis_[i]] = xb[i];
        }
        pivots_since_refactor_ = 0;
    }

    Status iterate()
    {
        Vector cb(m_);
        Vector alpha(m_);
        while (true)
        {
            if (iterations_ >= cfg_.iteration_cap)
            {
                return Status::stalled;
            }
            if (pivots_since_refactor_ >= refactor_every_)
            {
                refactor();
            }

            for (int i = 0; i < m_; ++i)
            {
                cb[i] = cost_[basis_[i]];
            }
            const Vector y = Binv_.transpose() * cb;

            // pricing
            int q = -1;
            double best = 0.0;
            double dq = 0.0;
            for (int j = 0; j < total_cols(); ++j)
            {
                const VarState st = state_[j];
                if (st == VarState::basic || st == VarState::fixed)
                {
                    continue;
                }
                double d = cost_[j];
                for (int p = col_start_[j]; p < col_start_[j + 1]; ++p)
                {
                    d -= y[row_idx_[p]] * val_[p];
                }
                bool eligible = false;
                if (st == VarState::at_lower)
                {
                    eligible = d < -cfg_.optimality_tol;
                }
                else if (st == VarState::at_upper)
                {
                    eligible = d > cfg_.optimality_tol;
                }
                else
                {
                    eligible = std::abs(d) > cfg_.optimality_tol;
                }
                if (!eligible)
                {
                    continue;
                }
                if (bland_)
                {
                    q = j;
                    dq = d;
                    break;
                }
                if (std::abs(d) > best)
                {
                    best = std::abs(d);
                    q = j;
                    dq = d;
                }
            }
            if (q < 0)
            {
                return Status::optimal;
            }

            alpha.setZero();
            for (int p = col_start_[q]; p < col_start_[q + 1]; ++p)
            {
                alpha.noalias() += val_[p] * Binv_.col(row_idx_[p]);
            }
            const double dir = dq < 0.0 ? 1.0 : -1.0;

            // ratio test; basic i moves at rate g_i = -dir * alpha_i
            int leave = -1;
            double theta = kInf;
            if (bland_)
            {
                for (int i = 0; i < m_; ++i)
                {
                    theta = std::min(theta, ratio(i, -dir * alpha[i], 0.0));
                }
                if (theta < kInf)
                {
                    for (int i = 0; i < m_; ++i)
                    {
                        const double t = ratio(i, -dir * alpha[i], 0.0);
                        if (t <= theta + 1e-12 && (leave < 0 || basis_[i] < basis_[leave]))
                        {
                            leave = i;
                        }
                    }
                }
            }
            else
            {
                // Harris two-pass: relaxed bound first, then the largest pivot within it
                const double delta = 1e-9;
                double relaxed = kInf;
                for (int i = 0; i < m_; ++i)
                {
                    relaxed = std::min(relaxed, ratio(i, -dir * alpha[i], delta));
                }
                if (relaxed < kInf)
                {
                    double piv = 0.0;
                    for (int i = 0; i < m_; ++i)
                    {
                        const double g = -dir * alpha[i];
                        if (std::abs(g) <= cfg_.pivot_tol)
                        {
                            continue;
                        }
                        const double t = ratio(i, g, 0.0);
                        if (t <= relaxed && std::abs(alpha[i]) > piv)
                        {
                            piv = std::abs(alpha[i]);
                            leave = i;
                            theta = t;
                        }
                    }
                }
            }

            const double range = upper_[q] - lower_[q];
            const bool flip = std::isfinite(range) && range <= theta;
            if (!flip && leave < 0)
            {
                return Status::unbounded;
            }
            if (flip)
            {
                theta = range;
            }
            theta = std::max(theta, 0.0);

            x_[q] += dir * theta;
            if (theta != 0.0)
            {
                for (int i = 0; i < m_; ++i)
                {
                    x_[basis_[i]] -= dir * theta * alpha[i];
                }
            }
            ++iterations_;

            if (theta <= 1e-12)
            {
                if (++degenerate_run_ > cfg_.degenerate_before_bland)
                {
                    bland_ = true;
                }
            }
            else
            {
                degenerate_run_ = 0;
                bland_ = false;
            }

            if (flip)
            {
                state_[q] = dir > 0 ? VarState::at_upper : VarState::at_lower;
                x_[q] = dir > 0 ? upper_[q] : lower_[q];
                continue;
            }

            // pivot: q enters at row `leave`
            const int out = basis_[leave];
            const double g = -dir * alpha[leave];
            if (lower_[out] == upper_[out])
            {
                state_[out] = VarState::fixed;
                x_[out] = lower_[out];
            }
            else if (g < 0.0)
            {
                state_[out] = VarState::at_lower;
                x_[out] = lower_[out];
            }
            else
            {
                state_[out] = VarState::at_upper;
                x_[out] = upper_[out];
            }
            basis_[leave] = q;
            state_[q] = VarState::basic;

            const double piv = alpha[leave];
            Vector prow = Binv_.row(leave) / piv;
            Binv_.noalias() -= alpha * prow.transpose();
            Binv_.row(leave) = prow;
            ++pivots_since_refactor_;
        }
    }

    /// Step length before basic i hits a bound (relaxed by delta), given its rate g.
    double ratio(int i, double g, double delta) const
    {
        const int j = basis_[i];
        if (g < -cfg_.pivot_tol && std::isfinite(lower_[j]))
        {
            return std::max(0.0, (x_[j] - lower_[j] + delta) / -g);
        }
        if (g > cfg_.pivot_tol && std::isfinite(upper_[j]))
        {
            return std::max(0.0, (upper_[j] + delta - x_[j]) / g);
        }
        return kInf;
    }

    const LinearProgram& lp_;
    const SolverConfig& cfg_;
    int n_ = 0, m1_ = 0, m_ = 0;

    std::vector<double> row_scale_, col_scale_;
    double obj_scale_ = 1.0;
    std::vector<int> col_start_, row_idx_;
    std::vector<double> val_;
    std::vector<double> b_, lower_, upper_, cost_, cost2_;

    std::vector<double> x_;
    std::vector<VarState> state_;
    std::vector<int> basis_;
    std::vector<bool> art_used_;
    int artificials_in_use_ = 0;
    Matrix Binv_;

    int iterations_ = 0;
    int pivots_since_refactor_ = 0;
    int refactor_every_ = 50;
    int degenerate_run_ = 0;
    bool bland_ = false;
};

}  // namespace

LpOutcome solve(const LinearProgram& lp, const SolverConfig& config)
{
    lp.validate();
    Simplex simplex(lp, config);
    LpOutcome out = simplex.run();
    if (out.optimal() && max_violation(lp, out.point) > config.feasibility_tol)
    {
        if (config.scale)
        {
            // the scaled problem can look feasible when the original is not;
            // the unscaled verdict wins either way
            SolverConfig unscaled = config;
            unscaled.scale = false;
            LpOutcome retry = solve(lp, unscaled);
            retry.iterations += out.iterations;
            return retry;
        }
        out.status = Status::stalled;
        out.point = Vector();
        out.objective_value = 0.0;
    }
    return out;
}

}  // namespace vhmpc::lp
