#include "vhmpc/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

#include <omp.h>

#include "vhmpc/trace_io.hpp"

namespace vhmpc
{

namespace
{
std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t run, std::uint64_t step)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
    return std::mt19937_64(seq);
}

double unit_draw(std::mt19937_64& gen)
{
    return std::ldexp(static_cast<double>(gen() >> 11), -53);
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}
}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t run, std::uint64_t step, std::uint64_t coord)
{
    std::mt19937_64 gen = keyed_engine(seed, run, step);
    gen.discard(coord);
    return unit_draw(gen);
}

DisturbanceSource DisturbanceSource::zero()
{
    return {};
}

DisturbanceSource DisturbanceSource::uniform(std::uint64_t seed, std::uint64_t run)
{
    DisturbanceSource d;
    d.kind_ = Kind::uniform;
    d.seed_ = seed;
    d.run_ = run;
    return d;
}

DisturbanceSource DisturbanceSource::persistent(Vector vertex)
{
    DisturbanceSource d;
    d.kind_ = Kind::persistent;
    d.vertex_ = std::move(vertex);
    return d;
}

DisturbanceSource DisturbanceSource::replay(std::vector<Vector> sequence)
{
    DisturbanceSource d;
    d.kind_ = Kind::replay;
    d.sequence_ = std::move(sequence);
    return d;
}

DisturbanceSource DisturbanceSource::parse(const std::string& spec)
{
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "zero" && colon == std::string::npos)
    {
        return zero();
    }
    if (head == "uniform" && !tail.empty())
    {
        std::size_t used = 0;
        const unsigned long long seed = std::stoull(tail, &used);
        if (used != tail.size())
        {
            throw std::invalid_argument("bad seed in disturbance spec '" + spec + "'");
        }
        return uniform(seed);
    }
    if (head == "persistent" && !tail.empty())
    {
        std::vector<double> vals;
        std::stringstream ss(tail);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            std::size_t used = 0;
            vals.push_back(std::stod(item, &used));
            if (used != item.size())
            {
                throw std::invalid_argument("bad number '" + item + "' in disturbance spec");
            }
        }
        return persistent(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    if (head == "replay" && !tail.empty())
    {
        return replay(read_disturbance_file(tail));
    }
    throw std::invalid_argument("disturbance spec '" + spec +
                                "' does not match zero | uniform:<seed> | persistent:<v1,...> | replay:<path>");
}

std::string DisturbanceSource::describe() const
{
    switch (kind_)
    {
        case Kind::zero:
            return "zero";
        case Kind::uniform:
            return "uniform:" + std::to_string(seed_) + " (run " + std::to_string(run_) + ")";
        case Kind::persistent:
        {
            std::string s = "persistent:";
            for (int i = 0; i < vertex_.size(); ++i)
            {
                s += (i ? "," : "") + fmt(vertex_[i]);
            }
            return s;
        }
        case Kind::replay:
            return "replay (" + std::to_string(sequence_.size()) + " samples)";
    }
    return "?";
}

Vector DisturbanceSource::sample(const Box& w, int step) const
{
    Vector out;
    switch (kind_)
    {
        case Kind::zero:
            out = Vector::Zero(w.dim());
            break;
        case Kind::uniform:
        {
            std::mt19937_64 gen = keyed_engine(seed_, run_, static_cast<std::uint64_t>(step));
            out.resize(w.dim());
            for (int i = 0; i < w.dim(); ++i)
            {
                out[i] = w.lower()[i] + unit_draw(gen) * (w.upper()[i] - w.lower()[i]);
            }
            break;
        }
        case Kind::persistent:
            if (vertex_.size() != w.dim())
            {
                throw std::invalid_argument("persistent disturbance has the wrong dimension");
            }
            for (int i = 0; i < w.dim(); ++i)
            {
                if (vertex_[i] != w.lower()[i] && vertex_[i] != w.upper()[i])
                {
                    throw std::invalid_argument("persistent disturbance is not a vertex of W (coordinate " +
                                                std::to_string(i) + ")");
                }
            }
            out = vertex_;
            break;
        case Kind::replay:
            if (step < 0 || step >= static_cast<int>(sequence_.size()))
            {
                throw std::invalid_argument("replay sequence exhausted at step " + std::to_string(step));
            }
            out = sequence_[static_cast<std::size_t>(step)];
            break;
    }
    if (out.size() != w.dim() || !w.contains(out, kDisturbanceTol))
    {
        throw std::invalid_argument("disturbance at step " + std::to_string(step) + " lies outside W");
    }
    return out;
}

std::vector<std::string> check_invariants(const Scenario& s, const SimTrace& t)
{
    std::vector<std::string> v;
    const Problem& p = s.problem;
    if (!t.breach.empty())
    {
        v.push_back(t.breach);
    }
    if (t.records.empty())
    {
        v.push_back("empty trace");
        return v;
    }
    if (static_cast<int>(t.records.size()) != t.N_ct && t.breach.empty())
    {
        v.push_back("record count " + std::to_string(t.records.size()) + " != N_ct " + std::to_string(t.N_ct));
    }
    for (const StepRecord& r : t.records)
    {
        if (!p.state_constraints(r.k).contains(r.x, 1e-9))
        {
            v.push_back("k = " + std::to_string(r.k) + ": state outside X(k)");
        }
        if (!p.input_constraints(r.k).contains(r.u, 1e-9))
        {
            v.push_back("k = " + std::to_string(r.k) + ": input outside U(k)");
        }
    }
    const int N0 = t.records.front().N;
    if (t.mode == Mode::atcs || t.mode == Mode::mintime)
    {
        for (std::size_t i = 1; i < t.records.size(); ++i)
        {
            const StepRecord& a = t.records[i - 1];
            const StepRecord& b = t.records[i];
            if (b.J > a.J - t.lambda + kInvariantTol)
            {
                v.push_back("k = " + std::to_string(b.k) + ": cost decrease J(k) = " + fmt(b.J) + " > J(k-1) - lambda = " +
                            fmt(a.J - t.lambda));
            }
            if ((b.branch == Branch::C2 || t.mode == Mode::mintime) && b.N > a.N - 1)
            {
                v.push_back("k = " + std::to_string(b.k) + ": horizon " + std::to_string(b.N) + " > previous - 1 = " +
                            std::to_string(a.N - 1));
            }
        }
        const int bound = static_cast<int>(std::floor(t.J0 / t.lambda + 1e-9));
        if (t.N_ct > bound)
        {
            v.push_back("completion N_ct = " + std::to_string(t.N_ct) + " > floor(J0 / lambda) = " +
                        std::to_string(bound));
        }
        if (t.mode == Mode::mintime && t.N_ct > N0)
        {
            v.push_back("completion N_ct = " + std::to_string(t.N_ct) + " > N*_0 = " + std::to_string(N0));
        }
        if (t.N_bar > N0)
        {
            v.push_back("N_bar = " + std::to_string(t.N_bar) + " > N*_0 = " + std::to_string(N0));
        }
        if (t.breach.empty())
        {
            const Zonotope target(t.r_final, p.tubes->tube_at(t.N_bar).generators());
            if (!zonotope_contains(target, t.x_final, kInvariantTol))
            {
                v.push_back("final state outside r(N_ct) + S(N_bar)");
            }
        }
    }
    else if (t.breach.empty())
    {
        const Zonotope target(t.r_final, p.sinf.set.generators());
        if (!zonotope_contains(target, t.x_final, kInvariantTol))
        {
            v.push_back("final state outside r(N_ct) + S(inf)");
        }
    }
    return v;
}

RunResult simulate(const Scenario& s, Mode mode, const Vector& x0, const DisturbanceSource& disturbance)
{
    if (x0.size() != s.problem.state_dim())
    {
        throw std::invalid_argument("simulate: initial state has the wrong dimension");
    }
    const Box& w = s.problem.W;
    RunResult out;
    out.trace = run_controller(s.problem, x0, mode, [&](int k) { return disturbance.sample(w, k); });
    out.final_distance = s.final_distance(out.trace.x_final, out.trace.r_final);
    out.violations = check_invariants(s, out.trace);
    return out;
}

bool p0_feasible(const Scenario& s, const Vector& x)
{
    for (int N = 1; N <= s.problem.config.N_max; ++N)
    {
        if (solve_fixed_horizon(s.problem, x, 0, N, TerminalSpec::exact()).feasible)
        {
            return true;
        }
    }
    return false;
}

SampleResult sample_feasible_initial_states(const Scenario& s, int count, std::uint64_t seed,
                                            const Zonotope& exclusion, long long max_proposals)
{
    SampleResult out;
    if (count <= 0)
    {
        return out;
    }
    const Problem& p = s.problem;
    const HPolytope x0_set = p.state_constraints(0);
    const Zonotope excl(p.reference(0) + exclusion.center(), exclusion.generators());
    std::mt19937_64 gen = keyed_engine(seed, 0x53414d50ULL, 0);
    const Box& box = s.sampling;
    while (static_cast<int>(out.states.size()) < count && out.proposals < max_proposals)
    {
        ++out.proposals;
        Vector x(box.dim());
        for (int i = 0; i < box.dim(); ++i)
        {
            x[i] = box.lower()[i] + unit_draw(gen) * (box.upper()[i] - box.lower()[i]);
        }
        if (!x0_set.contains(x, 0.0) || zonotope_contains(excl, x, 0.0) || !p0_feasible(s, x))
        {
            continue;
        }
        out.states.push_back(std::move(x));
    }
    out.acceptance_rate = static_cast<double>(out.states.size()) / static_cast<double>(out.proposals);
    if (static_cast<int>(out.states.size()) < count)
    {
        throw std::runtime_error("initial-state sampling accepted " + std::to_string(out.states.size()) + " of " +
                                 std::to_string(out.proposals) + " proposals (rate " + fmt(out.acceptance_rate) +
                                 (out.acceptance_rate < 1e-3 ? ", below 0.1%" : "") +
                                 "); check the scenario's sampling box and constraints");
    }
    return out;
}

const ModeAggregate* CampaignReport::aggregate(Mode m) const
{
    for (const ModeAggregate& a : aggregates)
    {
        if (a.mode == m)
        {
            return &a;
        }
    }
    return nullptr;
}

int env_thread_cap()
{
    const char* v = std::getenv("VHMPC_THREADS");
    if (!v)
    {
        return 0;
    }
    const int n = std::atoi(v);
    return n > 0 ? n : 0;
}

namespace
{
RunSummary one_run(const Scenario& s, Mode mode, int run, const Vector& x0, std::uint64_t seed, bool keep)
{
    RunSummary r;
    r.run = run;
    r.mode = mode;
    r.x0 = x0;
    try
    {
        RunResult res = simulate(s, mode, x0, DisturbanceSource::uniform(seed, static_cast<std::uint64_t>(run)));
        r.started = true;
        r.final_distance = res.final_distance;
        r.N_ct = res.trace.N_ct;
        r.N_bar = res.trace.N_bar;
        r.N0 = res.trace.records.front().N;
        r.J0 = res.trace.J0;
        r.completion_bound = static_cast<int>(std::floor(res.trace.J0 / res.trace.lambda + 1e-9));
        for (const StepRecord& rec : res.trace.records)
        {
            r.c1_steps += rec.branch == Branch::C1;
            r.c2_steps += rec.branch == Branch::C2;
        }
        r.violations = std::move(res.violations);
        if (keep)
        {
            r.trace = std::move(res.trace);
        }
    }
    catch (const InfeasibleStart& e)
    {
        r.started = false;
        if (mode != Mode::ftcs)
        {
            // sampled states have a feasible P_0, so this cannot happen
            r.violations.push_back(std::string("infeasible start: ") + e.what());
        }
    }
    catch (const std::exception& e)
    {
        r.violations.push_back(std::string("run failed: ") + e.what());
    }
    return r;
}

ModeAggregate aggregate_mode(const std::vector<std::vector<RunSummary>>& runs, std::size_t m, Mode mode)
{
    ModeAggregate a;
    a.mode = mode;
    std::vector<double> d;
    double n_ct = 0, bound = 0;
    for (const auto& row : runs)
    {
        const RunSummary& r = row[m];
        ++a.runs;
        a.violations += static_cast<int>(r.violations.size());
        if (!r.started)
        {
            continue;
        }
        ++a.started;
        d.push_back(r.final_distance);
        n_ct += r.N_ct;
        bound += r.completion_bound;
        if (mode != Mode::ftcs)
        {
            ++a.N_bar_histogram[r.N_bar];
        }
    }
    if (!d.empty())
    {
        double sum = 0;
        for (double x : d)
        {
            sum += x;
        }
        a.mean_distance = sum / static_cast<double>(d.size());
        std::vector<double> sorted = d;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        a.median_distance = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        a.min_distance = sorted.front();
        a.max_distance = sorted.back();
        a.mean_N_ct = n_ct / static_cast<double>(d.size());
        a.mean_completion_bound = bound / static_cast<double>(d.size());
    }
    int best = -1;
    for (const auto& [nbar, c] : a.N_bar_histogram)
    {
        if (c > best)
        {
            best = c;
            a.modal_N_bar = nbar;
        }
    }
    return a;
}
}  // namespace

CampaignReport run_campaign(const Scenario& s, const std::vector<Mode>& modes, int count, std::uint64_t seed,
                            const CampaignOptions& options)
{
    CampaignReport rep;
    rep.scenario = s.name;
    rep.seed = seed;
    rep.count = std::max(count, 0);
    rep.modes = modes;
    rep.notes = s.report_notes;
    if (count <= 0 || modes.empty())
    {
        for (std::size_t m = 0; m < modes.size(); ++m)
        {
            rep.aggregates.push_back(aggregate_mode(rep.runs, m, modes[m]));
        }
        return rep;
    }

    const SampleResult samples =
        sample_feasible_initial_states(s, count, seed, s.problem.sinf.set, options.max_proposals);
    rep.acceptance_rate = samples.acceptance_rate;
    rep.runs.assign(static_cast<std::size_t>(count), std::vector<RunSummary>(modes.size()));

    const int jobs = count * static_cast<int>(modes.size());
    const int nm = static_cast<int>(modes.size());
    if (options.serial)
    {
        for (int job = 0; job < jobs; ++job)
        {
            const int i = job / nm, m = job % nm;
            rep.runs[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] =
                one_run(s, modes[static_cast<std::size_t>(m)], i, samples.states[static_cast<std::size_t>(i)], seed,
                        options.keep_traces);
        }
    }
    else
    {
        int threads = options.threads > 0 ? options.threads : env_thread_cap();
        if (threads <= 0)
        {
            threads = omp_get_max_threads();
        }
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
        for (int job = 0; job < jobs; ++job)
        {
            const int i = job / nm, m = job % nm;
            rep.runs[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] =
                one_run(s, modes[static_cast<std::size_t>(m)], i, samples.states[static_cast<std::size_t>(i)], seed,
                        options.keep_traces);
        }
    }

    // ordered fold by run index
    for (std::size_t m = 0; m < modes.size(); ++m)
    {
        rep.aggregates.push_back(aggregate_mode(rep.runs, m, modes[m]));
        rep.violation_count += rep.aggregates.back().violations;
    }
    const auto ia = std::find(modes.begin(), modes.end(), Mode::atcs);
    const auto ifx = std::find(modes.begin(), modes.end(), Mode::ftcs);
    if (ia != modes.end() && ifx != modes.end())
    {
        const std::size_t a = static_cast<std::size_t>(ia - modes.begin());
        const std::size_t f = static_cast<std::size_t>(ifx - modes.begin());
        int pairs = 0, dominated = 0;
        for (const auto& row : rep.runs)
        {
            if (row[a].started && row[f].started)
            {
                ++pairs;
                dominated += row[a].final_distance <= row[f].final_distance;
            }
        }
        rep.paired_dominance = pairs ? static_cast<double>(dominated) / pairs : -1.0;
    }
    return rep;
}

}  // namespace vhmpc
