#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>
#include <vector>

#include <json.hpp>

#include "vhmpc/lpsolver.hpp"

using namespace vhmpc;
using lp::kInf;

namespace
{

/// Dense form used by the vertex-enumeration oracle: G x <= h, E x = f.
struct Dense
{
    Matrix G, E;
    Vector h, f, c;
};

struct Enumerated
{
    bool feasible = false;
    double best = kInf;
};

/// Tries every choice of n - e inequality rows made active alongside the
/// equalities; the best feasible vertex is the LP optimum of a bounded problem.
Enumerated enumerate_vertices(const Dense& d)
{
    const int n = static_cast<int>(d.c.size());
    const int e = static_cast<int>(d.E.rows());
    const int m = static_cast<int>(d.G.rows());
    const int need = n - e;
    Enumerated out;
    std::vector<int> pick(static_cast<std::size_t>(need));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == need)
        {
            Matrix M(n, n);
            Vector rhs(n);
            M.topRows(e) = d.E;
            rhs.head(e) = d.f;
            for (int i = 0; i < need; ++i)
            {
                M.row(e + i) = d.G.row(pick[static_cast<std::size_t>(i)]);
                rhs[e + i] = d.h[pick[static_cast<std::size_t>(i)]];
            }
            Eigen::FullPivLU<Matrix> lu(M);
            if (lu.rank() < n)
            {
                return;
            }
            const Vector x = lu.solve(rhs);
            if (((d.G * x - d.h).array() > 1e-9).any() || ((d.E * x - d.f).cwiseAbs().array() > 1e-9).any())
            {
                return;
            }
            out.feasible = true;
            out.best = std::min(out.best, d.c.dot(x));
            return;
        }
        for (int r = start; r < m; ++r)
        {
            pick[static_cast<std::size_t>(depth)] = r;
            rec(r + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

struct Instance
{
    lp::LinearProgram program;
    Dense dense;
};

/// Small integer LPs with a mix of bound styles. Every variable ends up boxed
/// in [-10, 10] (through bounds or rows), so vertices exist whenever the
/// problem is feasible.
Instance random_instance(std::mt19937_64& g)
{
    std::uniform_int_distribution<int> nd(1, 4), md(0, 5), coef(-5, 5), style(0, 3), coin(0, 1);
    const int n = nd(g);
    const int e = std::uniform_int_distribution<int>(0, std::min(2, n - 1))(g);
    const int m = md(g);
    Matrix A = Matrix::Zero(m, n), E = Matrix::Zero(e, n);
    Vector c(n);
    for (int j = 0; j < n; ++j)
    {
        c[j] = coef(g);
    }
    for (int i = 0; i < m; ++i)
    {
        for (int j = 0; j < n; ++j)
        {
            A(i, j) = coef(g);
        }
    }
    for (int i = 0; i < e; ++i)
    {
        for (int j = 0; j < n; ++j)
        {
            E(i, j) = coef(g);
        }
    }
    // half the instances are built around a feasible point
    const bool planted = coin(g) == 1;
    Vector xs(n);
    for (int j = 0; j < n; ++j)
    {
        xs[j] = std::uniform_int_distribution<int>(-4, 4)(g);
    }
    Vector b(m), f(e);
    for (int i = 0; i < m; ++i)
    {
        b[i] = planted ? A.row(i).dot(xs) + std::uniform_int_distribution<int>(0, 3)(g) : coef(g);
    }
    for (int i = 0; i < e; ++i)
    {
        f[i] = planted ? E.row(i).dot(xs) : coef(g);
    }

    Instance inst;
    inst.program = lp::LinearProgram(n);
    inst.program.objective = c;
    std::vector<Vector> extra_rows;
    std::vector<double> extra_rhs;
    for (int j = 0; j < n; ++j)
    {
        Vector ej = Vector::Zero(n);
        ej[j] = 1.0;
        switch (style(g))
        {
            case 0:  // two-sided bounds
            {
                const double lo = -std::uniform_int_distribution<int>(0, 10)(g);
                inst.program.lower[static_cast<std::size_t>(j)] = lo;
                inst.program.upper[static_cast<std::size_t>(j)] = 10.0;
                break;
            }
            case 1:  // free variable, boxed by rows
                inst.program.lower[static_cast<std::size_t>(j)] = -kInf;
                inst.program.upper[static_cast<std::size_t>(j)] = kInf;
                inst.program.add_inequality(ej, 10.0);
                inst.program.add_inequality(-ej, 10.0);
                break;
            case 2:  // upper bound only, lower row
                inst.program.lower[static_cast<std::size_t>(j)] = -kInf;
                inst.program.upper[static_cast<std::size_t>(j)] = 10.0;
                inst.program.add_inequality(-ej, 10.0);
                break;
            default:  // nonnegative, upper row
                inst.program.add_inequality(ej, 10.0);
                break;
        }
        const double lo = inst.program.lower[static_cast<std::size_t>(j)];
        const double hi = inst.program.upper[static_cast<std::size_t>(j)];
        extra_rows.push_back(ej);
        extra_rhs.push_back(std::isfinite(hi) ? hi : 10.0);
        extra_rows.push_back(-ej);
        extra_rhs.push_back(std::isfinite(lo) ? -lo : 10.0);
    }
    for (int i = 0; i < m; ++i)
    {
        inst.program.add_inequality(Vector(A.row(i).transpose()), b[i]);
    }
    for (int i = 0; i < e; ++i)
    {
        inst.program.add_equality(Vector(E.row(i).transpose()), f[i]);
    }

    const int rows = m + static_cast<int>(extra_rows.size());
    inst.dense.G.resize(rows, n);
    inst.dense.h.resize(rows);
    inst.dense.G.topRows(m) = A;
    inst.dense.h.head(m) = b;
    for (std::size_t i = 0; i < extra_rows.size(); ++i)
    {
        inst.dense.G.row(m + static_cast<int>(i)) = extra_rows[i].transpose();
        inst.dense.h[m + static_cast<int>(i)] = extra_rhs[i];
    }
    inst.dense.E = E;
    inst.dense.f = f;
    inst.dense.c = c;
    return inst;
}

}  // namespace

TEST_CASE("simplex matches vertex enumeration on 200 random small LPs")
{
    std::mt19937_64 g(20240611);
    int compared = 0, infeasible = 0;
    while (compared + infeasible < 200)
    {
        const Instance inst = random_instance(g);
        if (inst.dense.E.rows() > 0)
        {
            Eigen::FullPivLU<Matrix> lu(inst.dense.E);
            if (lu.rank() < inst.dense.E.rows())
            {
                continue;  // dependent equalities break the oracle's vertex count
            }
        }
        const Enumerated ref = enumerate_vertices(inst.dense);
        const lp::LpOutcome got = lp::solve(inst.program);
        CAPTURE(compared);
        if (ref.feasible)
        {
            REQUIRE(got.status == lp::Status::optimal);
            CHECK(std::abs(got.objective_value - ref.best) <= 1e-7 * std::max(1.0, std::abs(ref.best)));
            CHECK(lp::max_violation(inst.program, got.point) <= 1e-8);
            ++compared;
        }
        else
        {
            CHECK(got.status == lp::Status::infeasible);
            ++infeasible;
        }
    }
    CHECK(compared >= 60);
    CHECK(infeasible >= 20);
}

TEST_CASE("unbounded and trivially infeasible programs are classified")
{
    lp::LinearProgram a(2);
    a.objective << -1.0, 0.0;
    a.add_inequality(lp::Terms{{0, 1.0}, {1, -1.0}}, 1.0);
    CHECK(lp::solve(a).status == lp::Status::unbounded);

    lp::LinearProgram b(1);
    b.add_inequality(lp::Terms{{0, 1.0}}, -1.0);  // x <= -1 with x >= 0
    CHECK(lp::solve(b).status == lp::Status::infeasible);

    lp::LinearProgram c(2);
    c.add_equality(lp::Terms{{0, 1.0}, {1, 1.0}}, 1.0);
    c.add_equality(lp::Terms{{0, 1.0}, {1, 1.0}}, 2.0);
    CHECK(lp::solve(c).status == lp::Status::infeasible);
}

TEST_CASE("redundant equalities and degenerate vertices")
{
    lp::LinearProgram p(3);
    p.objective << 1.0, 2.0, -1.0;
    p.upper = {4.0, 4.0, 4.0};
    p.add_equality(lp::Terms{{0, 1.0}, {1, 1.0}, {2, 1.0}}, 3.0);
    p.add_equality(lp::Terms{{0, 2.0}, {1, 2.0}, {2, 2.0}}, 6.0);
    p.add_inequality(lp::Terms{{0, 1.0}, {2, 1.0}}, 3.0);
    p.add_inequality(lp::Terms{{0, -1.0}, {2, -1.0}}, -3.0);
    const lp::LpOutcome out = lp::solve(p);
    REQUIRE(out.optimal());
    CHECK(out.objective_value == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(lp::max_violation(p, out.point) <= 1e-9);
}

TEST_CASE("iteration cap reports a stall")
{
    lp::LinearProgram p(3);
    p.objective << -1.0, -1.0, -1.0;
    p.add_inequality(lp::Terms{{0, 1.0}, {1, 1.0}}, 1.0);
    p.add_inequality(lp::Terms{{1, 1.0}, {2, 1.0}}, 1.0);
    p.add_inequality(lp::Terms{{0, 1.0}, {2, 1.0}}, 1.0);
    lp::SolverConfig cfg;
    cfg.iteration_cap = 1;
    CHECK(lp::solve(p, cfg).status == lp::Status::stalled);
    CHECK(lp::solve(p).objective_value == doctest::Approx(-1.5));
}

TEST_CASE("badly scaled rows still solve to the original tolerance")
{
    lp::LinearProgram p(2);
    p.objective << 1.0, 1.0;
    p.add_inequality(lp::Terms{{0, -1e6}, {1, -1e-3}}, -2e6);
    p.add_inequality(lp::Terms{{0, -1e-4}, {1, -1.0}}, -3.0);
    const lp::LpOutcome out = lp::solve(p);
    REQUIRE(out.optimal());
    CHECK(lp::max_violation(p, out.point) <= 1e-8);
    CHECK(out.objective_value == doctest::Approx(4.999799997).epsilon(1e-8));
}

TEST_CASE("infeasible program that looks feasible after scaling")
{
    // a 7-step rendezvous plan in epigraph form; phase 1 on the scaled copy
    // once ended with a point off the original rows by about 1.18
    std::ifstream in(std::string(VHMPC_SOURCE_DIR) + "/tests/data/lp_scaled_false_optimum.json");
    REQUIRE(in.good());
    const auto j = nlohmann::json::parse(in);
    auto bound = [](const nlohmann::json& v) {
        return v.is_string() ? (v.get<std::string>() == "inf" ? kInf : -kInf) : v.get<double>();
    };
    lp::LinearProgram prog(static_cast<int>(j.at("objective").size()));
    for (std::size_t i = 0; i < j.at("objective").size(); ++i)
    {
        prog.objective[static_cast<Eigen::Index>(i)] = j["objective"][i].get<double>();
        prog.lower[i] = bound(j["lower"][i]);
        prog.upper[i] = bound(j["upper"][i]);
    }
    for (const auto& r : j.at("inequalities"))
    {
        prog.add_inequality(r.at("entries").get<lp::Terms>(), r.at("rhs").get<double>());
    }
    for (const auto& r : j.at("equalities"))
    {
        prog.add_equality(r.at("entries").get<lp::Terms>(), r.at("rhs").get<double>());
    }
    for (bool scale : {true, false})
    {
        lp::SolverConfig cfg;
        cfg.scale = scale;
        const lp::LpOutcome out = lp::solve(prog, cfg);
        CAPTURE(scale);
        CHECK(out.status == lp::Status::infeasible);
    }
}

TEST_CASE("validate rejects malformed programs")
{
    lp::LinearProgram p(2);
    p.lower[0] = 3.0;
    p.upper[0] = 1.0;
    CHECK_THROWS_AS(lp::solve(p), std::invalid_argument);

    lp::LinearProgram q(1);
    q.add_inequality(lp::Terms{{5, 1.0}}, 0.0);
    CHECK_THROWS_AS(lp::solve(q), std::invalid_argument);

    lp::LinearProgram r(1);
    r.objective[0] = std::nan("");
    CHECK_THROWS_AS(lp::solve(r), std::invalid_argument);
}

TEST_CASE("add_variable extends objective and bounds")
{
    lp::LinearProgram p;
    const int a = p.add_variable(-1.0, 1.0, 2.0);
    const int b = p.add_variable(-kInf, kInf, 0.0);
    CHECK(a == 0);
    CHECK(b == 1);
    p.add_equality(lp::Terms{{0, 1.0}, {1, 1.0}}, 0.5);
    const lp::LpOutcome out = lp::solve(p);
    REQUIRE(out.optimal());
    CHECK(out.point[0] == doctest::Approx(-1.0));
    CHECK(out.point[1] == doctest::Approx(1.5));
}
