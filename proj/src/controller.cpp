#include "vhmpc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <omp.h>

namespace vhmpc
{

namespace
{
constexpr int kMaxClosedLoopSteps = 100000;

double one_norm(const Vector& v)
{
    return v.cwiseAbs().sum();
}

// Induced 1-norm (max column sum).
double induced_one_norm(const Matrix& m)
{
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

const Zonotope& tube_ref(const Problem& p, int j, Zonotope& scratch)
{
    if (j <= p.tubes->capacity())
    {
        return p.tubes->cached(j);
    }
    scratch = p.tubes->tube_at(j);
    return scratch;
}

// Collects a tightened polytope acting on a split variable d = plus - minus.
// Single-coordinate rows become bounds on d_i, the rest stay rows.
struct SplitRows
{
    Vector lo, hi;
    std::vector<std::pair<Vector, double>> rows;

    explicit SplitRows(int n)
        : lo(Vector::Constant(n, -lp::kInf)), hi(Vector::Constant(n, lp::kInf))
    {
    }

    void add(const Vector& a, double b)
    {
        int nz = 0, idx = -1;
        for (int i = 0; i < a.size(); ++i)
        {
            if (a[i] != 0.0)
            {
                ++nz;
                idx = i;
            }
        }
        if (nz == 1)
        {
            const double bound = b / a[idx];
            if (a[idx] > 0.0)
            {
                hi[idx] = std::min(hi[idx], bound);
            }
            else
            {
                lo[idx] = std::max(lo[idx], bound);
            }
            return;
        }
        rows.emplace_back(a, b);
    }

    bool crossed() const
    {
        for (int i = 0; i < lo.size(); ++i)
        {
            if (lo[i] > hi[i] + 1e-12 * std::max({1.0, std::abs(lo[i]), std::abs(hi[i])}))
            {
                return true;
            }
        }
        return false;
    }

    // plus/minus index functions give the LP columns of coordinate i.
    template <typename F, typename G>
    void emit(lp::LinearProgram& prog, F plus, G minus) const
    {
        for (int i = 0; i < lo.size(); ++i)
        {
            const double h = hi[i];
            const double l = std::min(lo[i], h);
            if (h >= 0.0)
            {
                prog.upper[plus(i)] = std::min(prog.upper[plus(i)], h);
            }
            else
            {
                prog.add_inequality(lp::Terms{{plus(i), 1.0}, {minus(i), -1.0}}, h);
            }
            if (l <= 0.0)
            {
                prog.upper[minus(i)] = std::min(prog.upper[minus(i)], -l);
            }
            else
            {
                prog.add_inequality(lp::Terms{{plus(i), -1.0}, {minus(i), 1.0}}, -l);
            }
        }
        for (const auto& [a, b] : rows)
        {
            std::vector<std::pair<int, double>> entries;
            for (int i = 0; i < a.size(); ++i)
            {
                if (a[i] != 0.0)
                {
                    entries.emplace_back(plus(i), a[i]);
                    entries.emplace_back(minus(i), -a[i]);
                }
            }
            prog.add_inequality(std::move(entries), b);
        }
    }
};
}  // namespace

void prepare(Problem& p)
{
    const int n = static_cast<int>(p.A.rows());
    if (n == 0 || p.A.cols() != n || p.B.rows() != n || p.B.cols() == 0 || p.K.rows() != p.B.cols() ||
        p.K.cols() != n || p.W.dim() != n)
    {
        throw std::invalid_argument("prepare: inconsistent dimensions among A, B, K, W");
    }
    if (!p.state_constraints || !p.input_constraints || !p.reference)
    {
        throw std::invalid_argument("prepare: constraint and reference schedules are required");
    }
    if (p.config.N_max < 1 || p.config.gamma_z < 0.0 || p.config.gamma_v < 0.0)
    {
        throw std::invalid_argument("prepare: N_max must be positive and weights nonnegative");
    }
    const Matrix a_k = p.closed_loop();
    if (!verify_schur(a_k))
    {
        throw std::invalid_argument("prepare: A + BK is not Schur (norm decay test failed)");
    }
    p.tubes = std::make_shared<TubeCache>(a_k, p.W, p.config.N_max + 1);
    p.sinf = approximate_sinf(a_k, p.W, p.config.sinf_tol);
    const LambdaBar lb =
        compute_lambda_bar(p.config.gamma_z, p.config.gamma_v, p.K, a_k, p.W, p.config.lambda_tail_tol);
    p.lambda_bar = lb.value;
    p.lambda_truncation = lb.truncation;
    if (p.config.lambda)
    {
        if (!(*p.config.lambda > 0.0) || *p.config.lambda > p.lambda_bar + 1e-12)
        {
            throw std::invalid_argument("prepare: lambda must be positive and at most lambda-bar = " +
                                        std::to_string(p.lambda_bar));
        }
    }
    else if (!(p.lambda_bar > 0.0))
    {
        throw std::invalid_argument("prepare: lambda-bar = " + std::to_string(p.lambda_bar) +
                                    " is not positive; reduce the weights");
    }
    p.ftcs_bounds = ftcs_schedule(*p.tubes, p.sinf, p.config.N_max);
}

HorizonLp build_fixed_horizon_lp(const Problem& p, const Vector& x, int k, int N, const TerminalSpec& terminal)
{
    const int n = p.state_dim();
    const int m = p.input_dim();
    if (N < 1)
    {
        throw std::invalid_argument("build_fixed_horizon_lp: N must be positive");
    }
    if (x.size() != n)
    {
        throw std::invalid_argument("build_fixed_horizon_lp: state dimension mismatch");
    }
    if (terminal.kind == TerminalSpec::Kind::zonotope)
    {
        if (terminal.set.dim() != n)
        {
            throw std::invalid_argument("build_fixed_horizon_lp: terminal set dimension mismatch");
        }
        if (terminal.coeff_bounds.size() != 0 && terminal.coeff_bounds.size() != terminal.set.num_generators())
        {
            throw std::invalid_argument("build_fixed_horizon_lp: one coefficient bound per generator required");
        }
    }

    HorizonLp out;
    out.horizon = N;
    out.state_dim = n;
    out.input_dim = m;
    out.num_xi = terminal.num_generators();

    std::vector<Vector> r(static_cast<std::size_t>(N + 1));
    for (int j = 0; j <= N; ++j)
    {
        r[static_cast<std::size_t>(j)] = p.reference(k + j);
        if (r[static_cast<std::size_t>(j)].size() != n)
        {
            throw std::invalid_argument("build_fixed_horizon_lp: reference dimension mismatch");
        }
    }
    out.constant_cost = p.config.gamma_z * one_norm(x - r[0]);

    // tightened sets first: an empty one means no LP at all
    std::vector<SplitRows> state_rows, input_rows;
    Zonotope scratch;
    for (int j = 0; j < N; ++j)
    {
        const Zonotope& s_j = tube_ref(p, j, scratch);
        const HPolytope u_set = p.input_constraints(k + j);
        const Tightened t = j == 0 ? Tightened{p.state_constraints(k), u_set, false}
                                   : tighten(p.state_constraints(k + j), u_set, p.K, s_j);
        if (t.empty)
        {
            out.infeasible_by_construction = true;
            return out;
        }
        SplitRows ur(m);
        for (int i = 0; i < t.input.num_rows(); ++i)
        {
            ur.add(t.input.normals().row(i).transpose(), t.input.offsets()[i]);
        }
        if (ur.crossed())
        {
            out.infeasible_by_construction = true;
            return out;
        }
        input_rows.push_back(std::move(ur));
        if (j >= 1)
        {
            SplitRows sr(n);
            const Vector& rj = r[static_cast<std::size_t>(j)];
            for (int i = 0; i < t.state.num_rows(); ++i)
            {
                const Vector a = t.state.normals().row(i).transpose();
                sr.add(a, t.state.offsets()[i] - a.dot(rj));
            }
            if (sr.crossed())
            {
                out.infeasible_by_construction = true;
                return out;
            }
            state_rows.push_back(std::move(sr));
        }
    }

    lp::LinearProgram& prog = out.program;
    prog = lp::LinearProgram(out.num_vars());
    for (int j = 1; j <= N; ++j)
    {
        for (int i = 0; i < n; ++i)
        {
            prog.objective[out.p_index(j, i)] = p.config.gamma_z;
            prog.objective[out.n_index(j, i)] = p.config.gamma_z;
        }
    }
    for (int j = 0; j < N; ++j)
    {
        for (int i = 0; i < m; ++i)
        {
            prog.objective[out.vp_index(j, i)] = p.config.gamma_v;
            prog.objective[out.vm_index(j, i)] = p.config.gamma_v;
        }
    }

    // dynamics: d(j+1) - A d(j) - B v(j) = A r(j) - r(j+1), d(0) = x - r(0) known
    for (int j = 0; j < N; ++j)
    {
        const Vector& rj = r[static_cast<std::size_t>(j)];
        const Vector& rn = r[static_cast<std::size_t>(j + 1)];
        const Vector rhs = j == 0 ? Vector(p.A * x - rn) : Vector(p.A * rj - rn);
        for (int i = 0; i < n; ++i)
        {
            std::vector<std::pair<int, double>> e;
            e.emplace_back(out.p_index(j + 1, i), 1.0);
            e.emplace_back(out.n_index(j + 1, i), -1.0);
            if (j >= 1)
            {
                for (int c = 0; c < n; ++c)
                {
                    if (p.A(i, c) != 0.0)
                    {
                        e.emplace_back(out.p_index(j, c), -p.A(i, c));
                        e.emplace_back(out.n_index(j, c), p.A(i, c));
                    }
                }
            }
            for (int c = 0; c < m; ++c)
            {
                if (p.B(i, c) != 0.0)
                {
                    e.emplace_back(out.vp_index(j, c), -p.B(i, c));
                    e.emplace_back(out.vm_index(j, c), p.B(i, c));
                }
            }
            prog.add_equality(std::move(e), rhs[i]);
        }
    }

    for (int j = 1; j < N; ++j)
    {
        state_rows[static_cast<std::size_t>(j - 1)].emit(
            prog, [&](int i) { return out.p_index(j, i); }, [&](int i) { return out.n_index(j, i); });
    }
    for (int j = 0; j < N; ++j)
    {
        input_rows[static_cast<std::size_t>(j)].emit(
            prog, [&](int i) { return out.vp_index(j, i); }, [&](int i) { return out.vm_index(j, i); });
    }

    if (terminal.kind == TerminalSpec::Kind::exact)
    {
        for (int i = 0; i < n; ++i)
        {
            prog.upper[out.p_index(N, i)] = 0.0;
            prog.upper[out.n_index(N, i)] = 0.0;
        }
    }
    else
    {
        const Matrix& g = terminal.set.generators();
        for (int l = 0; l < out.num_xi; ++l)
        {
            const double b = terminal.coeff_bounds.size() ? terminal.coeff_bounds[l] : 1.0;
            if (b < 0.0)
            {
                out.infeasible_by_construction = true;
                return out;
            }
            prog.lower[out.xi_index(l)] = -b;
            prog.upper[out.xi_index(l)] = b;
        }
        for (int i = 0; i < n; ++i)
        {
            std::vector<std::pair<int, double>> e;
            e.emplace_back(out.p_index(N, i), 1.0);
            e.emplace_back(out.n_index(N, i), -1.0);
            for (int l = 0; l < out.num_xi; ++l)
            {
                if (g(i, l) != 0.0)
                {
                    e.emplace_back(out.xi_index(l), -g(i, l));
                }
            }
            prog.add_equality(std::move(e), terminal.set.center()[i]);
        }
    }
    return out;
}

SolveResult solve_fixed_horizon(const Problem& p, const Vector& x, int k, int N, const TerminalSpec& terminal)
{
    const HorizonLp h = build_fixed_horizon_lp(p, x, k, N, terminal);
    SolveResult res;
    res.horizon = N;
    if (h.infeasible_by_construction)
    {
        return res;
    }
    const lp::LpOutcome out = lp::solve(h.program);
    res.lp_solves = 1;
    if (out.status == lp::Status::stalled)
    {
        throw SolverStall(N, k);
    }
    if (!out.optimal())
    {
        return res;
    }
    const int n = p.state_dim();
    const int m = p.input_dim();
    res.states.push_back(x);
    double stage = h.constant_cost;
    for (int j = 1; j <= N; ++j)
    {
        Vector d(n);
        for (int i = 0; i < n; ++i)
        {
            d[i] = out.point[h.p_index(j, i)] - out.point[h.n_index(j, i)];
        }
        stage += p.config.gamma_z * one_norm(d);
        res.states.push_back(p.reference(k + j) + d);
    }
    for (int j = 0; j < N; ++j)
    {
        Vector v(m);
        for (int i = 0; i < m; ++i)
        {
            v[i] = out.point[h.vp_index(j, i)] - out.point[h.vm_index(j, i)];
        }
        stage += p.config.gamma_v * one_norm(v);
        res.inputs.push_back(std::move(v));
    }
    res.feasible = true;
    res.cost = N + stage;
    return res;
}

SolveResult solve_pk(const Problem& p, const Vector& x, int k, const TerminalProvider& terminal, int N_low,
                     int N_high, const SweepOptions& options)
{
    if (N_low < 1 || N_low > N_high)
    {
        throw std::invalid_argument("solve_pk: require 1 <= N_low <= N_high");
    }
    SolveResult best;
    int solves = 0;
    for (int N = N_low; N <= N_high; ++N)
    {
        if (options.early_stop && best.feasible && N >= best.cost - kSweepTieTol)
        {
            break;
        }
        const std::optional<TerminalSpec> t = terminal(N);
        if (!t)
        {
            continue;
        }
        SolveResult r = solve_fixed_horizon(p, x, k, N, *t);
        solves += r.lp_solves;
        if (r.feasible && (!best.feasible || r.cost < best.cost - kSweepTieTol))
        {
            best = std::move(r);
        }
    }
    best.lp_solves = solves;
    return best;
}

SolveResult solve_pk(const Problem& p, const Vector& x, int k, const TerminalSpec& terminal, int N_low, int N_high,
                     const SweepOptions& options)
{
    return solve_pk(
        p, x, k, [&terminal](int) { return std::optional<TerminalSpec>(terminal); }, N_low, N_high, options);
}

namespace
{
struct LambdaSetup
{
    std::vector<int> coords;  // coordinates of W with nonzero width
    int window = 0;           // L with |A_K^L|_1 = rho < 1
    double rho = 0.0;
    double tail_weight = 0.0;  // (gamma_z + gamma_v |K|_1) / (1 - rho)
};

LambdaSetup lambda_setup(double gamma_z, double gamma_v, const Matrix& k_gain, const Matrix& a_k, const Box& w)
{
    if (a_k.rows() != a_k.cols() || a_k.rows() != w.dim() || k_gain.cols() != a_k.rows())
    {
        throw std::invalid_argument("compute_lambda_bar: dimension mismatch");
    }
    LambdaSetup s;
    for (int i = 0; i < w.dim(); ++i)
    {
        if (w.upper()[i] > w.lower()[i])
        {
            s.coords.push_back(i);
        }
    }
    if (static_cast<int>(s.coords.size()) > kLambdaMaxCoords)
    {
        throw std::invalid_argument("compute_lambda_bar: W has more than " + std::to_string(kLambdaMaxCoords) +
                                    " nonzero-width coordinates");
    }
    // prefer a window that halves the norm; fall back to any contraction
    Matrix pw = a_k;
    int first_below_one = 0;
    double rho_first = 0.0;
    for (int l = 1; l <= 1000; ++l)
    {
        const double nrm = induced_one_norm(pw);
        if (nrm < 1.0 && first_below_one == 0)
        {
            first_below_one = l;
            rho_first = nrm;
        }
        if (nrm <= 0.5)
        {
            s.window = l;
            s.rho = nrm;
            break;
        }
        pw = pw * a_k;
    }
    if (s.window == 0)
    {
        if (first_below_one == 0)
        {
            throw std::invalid_argument("compute_lambda_bar: no contracting power of A_K found");
        }
        s.window = first_below_one;
        s.rho = rho_first;
    }
    s.tail_weight = (gamma_z + gamma_v * induced_one_norm(k_gain)) / (1.0 - s.rho);
    return s;
}

// Upper bound of gamma_z sum |A^j w|_1 + gamma_v sum |K A^j w|_1 for one w.
std::pair<double, int> vertex_sum(double gamma_z, double gamma_v, const Matrix& k_gain, const Matrix& a_k,
                                  const Vector& w, const LambdaSetup& s, double tail_tol)
{
    constexpr int kMaxTerms = 1000000;
    std::vector<Vector> y;  // A^j w
    y.push_back(w);
    std::vector<double> c{one_norm(w)};
    double window_sum = 0.0;
    auto extend_to = [&](int len) {
        while (static_cast<int>(y.size()) < len)
        {
            y.push_back(a_k * y.back());
            c.push_back(one_norm(y.back()));
        }
    };
    extend_to(s.window);
    for (int r = 0; r < s.window; ++r)
    {
        window_sum += c[static_cast<std::size_t>(r)];
    }
    double partial = 0.0;
    for (int t = 0; t < kMaxTerms; ++t)
    {
        // window_sum covers terms t .. t + L - 1
        const double tail = s.tail_weight * window_sum;
        if (tail <= tail_tol)
        {
            return {partial + tail, t};
        }
        const Vector& yt = y[static_cast<std::size_t>(t)];
        partial += gamma_z * c[static_cast<std::size_t>(t)] + gamma_v * one_norm(k_gain * yt);
        extend_to(t + s.window + 1);
        window_sum += c[static_cast<std::size_t>(t + s.window)] - c[static_cast<std::size_t>(t)];
        window_sum = std::max(window_sum, 0.0);
    }
    throw std::runtime_error("compute_lambda_bar: tail bound did not converge");
}

Vector vertex_of(const Box& w, const std::vector<int>& coords, std::uint64_t mask)
{
    Vector v = w.center();
    for (std::size_t b = 0; b < coords.size(); ++b)
    {
        const int i = coords[b];
        v[i] = (mask >> b) & 1U ? w.upper()[i] : w.lower()[i];
    }
    return v;
}
}  // namespace

LambdaBar compute_lambda_bar_serial(double gamma_z, double gamma_v, const Matrix& k_gain, const Matrix& a_k,
                                    const Box& w, double tail_tol)
{
    if (!(tail_tol > 0.0))
    {
        throw std::invalid_argument("compute_lambda_bar: tail_tol must be positive");
    }
    if (gamma_z == 0.0 && gamma_v == 0.0)
    {
        return {1.0, 0};
    }
    const LambdaSetup s = lambda_setup(gamma_z, gamma_v, k_gain, a_k, w);
    const std::uint64_t count = std::uint64_t{1} << s.coords.size();
    double sup = 0.0;
    int trunc = 0;
    for (std::uint64_t mask = 0; mask < count; ++mask)
    {
        const auto [val, t] = vertex_sum(gamma_z, gamma_v, k_gain, a_k, vertex_of(w, s.coords, mask), s, tail_tol);
        sup = std::max(sup, val);
        trunc = std::max(trunc, t);
    }
    return {1.0 - sup, trunc};
}

LambdaBar compute_lambda_bar(double gamma_z, double gamma_v, const Matrix& k_gain, const Matrix& a_k, const Box& w,
                             double tail_tol)
{
    if (!(tail_tol > 0.0))
    {
        throw std::invalid_argument("compute_lambda_bar: tail_tol must be positive");
    }
    if (gamma_z == 0.0 && gamma_v == 0.0)
    {
        return {1.0, 0};
    }
    const LambdaSetup s = lambda_setup(gamma_z, gamma_v, k_gain, a_k, w);
    const long long count = 1LL << s.coords.size();
    double sup = 0.0;
    int trunc = 0;
    bool failed = false;
#pragma omp parallel for reduction(max : sup, trunc) reduction(|| : failed) schedule(static)
    for (long long mask = 0; mask < count; ++mask)
    {
        try
        {
            const auto [val, t] = vertex_sum(gamma_z, gamma_v, k_gain, a_k,
                                             vertex_of(w, s.coords, static_cast<std::uint64_t>(mask)), s, tail_tol);
            sup = std::max(sup, val);
            trunc = std::max(trunc, t);
        }
        catch (const std::exception&)
        {
            failed = true;
        }
    }
    if (failed)
    {
        throw std::runtime_error("compute_lambda_bar: tail bound did not converge");
    }
    return {1.0 - sup, trunc};
}

std::vector<std::optional<Vector>> ftcs_schedule(const TubeCache& tubes, const SinfApprox& sinf, int N_max)
{
    const Matrix& q = sinf.set.generators();
    const int nq = static_cast<int>(q.cols());
    const int n = static_cast<int>(q.rows());
    std::vector<std::optional<Vector>> out;
    Vector s = Vector::Zero(nq);
    out.emplace_back(Vector::Ones(nq));
    bool dead = false;
    for (int N = 1; N <= N_max; ++N)
    {
        const int i = N - 1;  // S(N) = S(N-1) plus block i
        if (!dead)
        {
            if (i < sinf.order)
            {
                // block i of S is exactly (1 - alpha) times block i of Q
                s.segment(i * sinf.block_width, sinf.block_width).array() += 1.0 - sinf.alpha;
            }
            else
            {
                const Matrix blk = tubes.block(i);
                for (int c = 0; c < blk.cols(); ++c)
                {
                    // min |eta|_1 subject to Q eta = g, eta = eta+ - eta-
                    lp::LinearProgram prog(2 * nq);
                    prog.objective.setOnes();
                    for (int row = 0; row < n; ++row)
                    {
                        std::vector<std::pair<int, double>> e;
                        for (int l = 0; l < nq; ++l)
                        {
                            if (q(row, l) != 0.0)
                            {
                                e.emplace_back(l, q(row, l));
                                e.emplace_back(nq + l, -q(row, l));
                            }
                        }
                        if (e.empty())
                        {
                            if (blk(row, c) != 0.0)
                            {
                                dead = true;
                            }
                            continue;
                        }
                        prog.add_equality(std::move(e), blk(row, c));
                    }
                    if (dead)
                    {
                        break;
                    }
                    const lp::LpOutcome r = lp::solve(prog);
                    if (!r.optimal())
                    {
                        dead = true;
                        break;
                    }
                    s += r.point.head(nq) + r.point.tail(nq);
                }
            }
            if (s.maxCoeff() > 1.0)
            {
                dead = true;
            }
        }
        if (dead)
        {
            out.emplace_back(std::nullopt);
        }
        else
        {
            out.emplace_back(Vector(Vector::Ones(nq) - s));
        }
    }
    return out;
}

std::string to_string(Mode m)
{
    switch (m)
    {
        case Mode::atcs:
            return "atcs";
        case Mode::ftcs:
            return "ftcs";
        case Mode::mintime:
            return "mintime";
    }
    return "?";
}

Mode parse_mode(const std::string& s)
{
    if (s == "atcs")
    {
        return Mode::atcs;
    }
    if (s == "ftcs")
    {
        return Mode::ftcs;
    }
    if (s == "mintime")
    {
        return Mode::mintime;
    }
    throw std::invalid_argument("unknown mode '" + s + "' (expected atcs, ftcs or mintime)");
}

std::string to_string(Branch b)
{
    switch (b)
    {
        case Branch::C1:
            return "C1";
        case Branch::C2:
            return "C2";
        case Branch::Fixed:
            return "F";
    }
    return "?";
}

Problem mintime_problem(const Problem& p)
{
    Problem q = p;
    q.config.gamma_z = 0.0;
    q.config.gamma_v = 0.0;
    q.config.lambda = 1.0;
    q.lambda_bar = 1.0;
    q.lambda_truncation = 0;
    return q;
}

namespace
{
TerminalProvider ftcs_provider(const Problem& p)
{
    return [&p](int N) -> std::optional<TerminalSpec> {
        if (N >= static_cast<int>(p.ftcs_bounds.size()) || !p.ftcs_bounds[static_cast<std::size_t>(N)])
        {
            return std::nullopt;
        }
        return TerminalSpec::zonotope_set(p.sinf.set, *p.ftcs_bounds[static_cast<std::size_t>(N)]);
    };
}
}  // namespace

ControllerState initialize(const Problem& p, Mode mode, const Vector& x0)
{
    ControllerState ctrl;
    if (mode == Mode::ftcs)
    {
        ctrl.last = solve_pk(p, x0, 0, ftcs_provider(p), 1, p.config.N_max);
        ctrl.branch_log.push_back(Branch::Fixed);
    }
    else
    {
        ctrl.last = solve_pk(p, x0, 0, TerminalSpec::exact(), 1, p.config.N_max);
        ctrl.branch_log.push_back(Branch::C1);
    }
    if (!ctrl.last.feasible)
    {
        throw InfeasibleStart("P_0 is infeasible at the initial state for every N in [1, " +
                              std::to_string(p.config.N_max) + "]");
    }
    ctrl.terminal = TerminalSpec::exact();
    ctrl.N_bar = ctrl.last.horizon;
    ctrl.J0 = ctrl.last.cost;
    return ctrl;
}

void atcs_step(ControllerState& ctrl, const Problem& p, const Vector& x, int k, bool mintime)
{
    const double j_prev = ctrl.last.cost;
    const int n_prev = ctrl.last.horizon;
    const double lambda = p.lambda();

    const double cost_cap = std::ceil(j_prev - lambda);
    int hi = std::min(p.config.N_max, n_prev + kC1HorizonSlack);
    if (cost_cap < hi)
    {
        hi = static_cast<int>(std::max(cost_cap, 0.0));
    }
    if (mintime)
    {
        hi = std::min(hi, n_prev - 1);
    }
    if (hi >= 1)
    {
        SolveResult c1 = solve_pk(p, x, k, TerminalSpec::exact(), 1, hi);
        if (c1.feasible && c1.cost <= j_prev - lambda)
        {
            ctrl.last = std::move(c1);
            ctrl.terminal = TerminalSpec::exact();
            ctrl.N_bar = ctrl.last.horizon;
            ctrl.step = k;
            ctrl.branch_log.push_back(Branch::C1);
            return;
        }
    }

    if (n_prev < 2)
    {
        throw InvariantBreach(k, "C2 needs a previous horizon of at least 2, got " + std::to_string(n_prev));
    }
    const Zonotope base = ctrl.terminal.kind == TerminalSpec::Kind::exact ? Zonotope::origin(p.state_dim())
                                                                         : ctrl.terminal.set;
    const Zonotope grown =
        minkowski_sum(base, Zonotope(Vector::Zero(p.state_dim()), p.tubes->block(n_prev - 1)));
    const TerminalSpec terminal = TerminalSpec::zonotope_set(grown);
    SolveResult c2 = solve_pk(p, x, k, terminal, 1, n_prev - 1);
    if (!c2.feasible)
    {
        throw InvariantBreach(k, "C2 problem infeasible with N <= " + std::to_string(n_prev - 1));
    }
    ctrl.last = std::move(c2);
    ctrl.terminal = terminal;
    ctrl.step = k;
    ctrl.branch_log.push_back(Branch::C2);
}

void ftcs_step(ControllerState& ctrl, const Problem& p, const Vector& x, int k)
{
    SolveResult r = solve_pk(p, x, k, ftcs_provider(p), 1, p.config.N_max);
    if (!r.feasible)
    {
        throw InvariantBreach(k, "FTCS problem infeasible for every N in [1, " + std::to_string(p.config.N_max) +
                                     "]");
    }
    ctrl.last = std::move(r);
    ctrl.step = k;
    ctrl.branch_log.push_back(Branch::Fixed);
}

SimTrace run_controller(const Problem& p, const Vector& x0, Mode mode, const DisturbanceFn& disturbance)
{
    if (!p.tubes)
    {
        throw std::invalid_argument("run_controller: problem not prepared");
    }
    Problem mt;
    const Problem* q = &p;
    if (mode == Mode::mintime)
    {
        mt = mintime_problem(p);
        q = &mt;
    }

    SimTrace trace;
    trace.mode = mode;
    trace.lambda = q->lambda();
    ControllerState ctrl = initialize(*q, mode, x0);
    trace.J0 = ctrl.J0;

    Vector x = x0;
    int k = 0;
    try
    {
        while (true)
        {
            StepRecord rec;
            rec.k = k;
            rec.x = x;
            rec.r = q->reference(k);
            rec.u = ctrl.last.inputs.front();
            rec.J = ctrl.last.cost;
            rec.N = ctrl.last.horizon;
            rec.branch = ctrl.branch_log.back();
            rec.terminal_generators = mode == Mode::ftcs ? q->sinf.set.num_generators() : ctrl.terminal.num_generators();
            rec.w = disturbance(k);
            x = q->A * x + q->B * rec.u + rec.w;
            trace.records.push_back(std::move(rec));
            ++k;
            if (ctrl.last.horizon <= 1)
            {
                break;
            }
            if (k > kMaxClosedLoopSteps)
            {
                throw InvariantBreach(k, "closed loop did not terminate");
            }
            if (mode == Mode::ftcs)
            {
                ftcs_step(ctrl, *q, x, k);
            }
            else
            {
                atcs_step(ctrl, *q, x, k, mode == Mode::mintime);
            }
        }
    }
    catch (const InvariantBreach& e)
    {
        trace.feasible_throughout = false;
        trace.breach = e.what();
    }
    trace.N_ct = k;
    trace.N_bar = mode == Mode::ftcs ? 0 : ctrl.N_bar;
    trace.x_final = x;
    trace.r_final = q->reference(k);
    return trace;
}

}  // namespace vhmpc
