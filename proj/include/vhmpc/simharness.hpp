#ifndef VHMPC_SIMHARNESS_HPP
#define VHMPC_SIMHARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vhmpc/controller.hpp"
#include "vhmpc/scenarios.hpp"

namespace vhmpc
{

/// Emitted disturbances are checked against W with this slack.
inline constexpr double kDisturbanceTol = 1e-12;

class DisturbanceSource
{
public:
    enum class Kind
    {
        zero,
        uniform,
        persistent,
        replay
    };

    static DisturbanceSource zero();
    /// i.i.d. uniform over W, keyed by (seed, run, step).
    static DisturbanceSource uniform(std::uint64_t seed, std::uint64_t run = 0);
    static DisturbanceSource persistent(Vector vertex);
    static DisturbanceSource replay(std::vector<Vector> sequence);

    /// Grammar: zero | uniform:<seed> | persistent:<v1,...,vn> | replay:<path>.
    /// Replay files are CSV (one w per line) or a trace JSON.
    static DisturbanceSource parse(const std::string& spec);

    Kind kind() const { return kind_; }
    std::uint64_t seed() const { return seed_; }
    std::string describe() const;

    /// w(step). Throws std::invalid_argument if w leaves W, the persistent
    /// value is not a vertex of W, or a replay runs out.
    Vector sample(const Box& w, int step) const;

private:
    Kind kind_ = Kind::zero;
    std::uint64_t seed_ = 0;
    std::uint64_t run_ = 0;
    Vector vertex_;
    std::vector<Vector> sequence_;
};

/// Uniform in [0, 1) from the counter key; portable across platforms.
double counter_uniform(std::uint64_t seed, std::uint64_t run, std::uint64_t step, std::uint64_t coord);

struct RunResult
{
    SimTrace trace;
    double final_distance = 0.0;
    std::vector<std::string> violations;
};

/// Invariant checks on a finished trace; one message per failed inequality.
std::vector<std::string> check_invariants(const Scenario& s, const SimTrace& trace);

/// Closed loop plus invariant checks. Throws InfeasibleStart.
RunResult simulate(const Scenario& s, Mode mode, const Vector& x0, const DisturbanceSource& disturbance);

/// P_0(x, {0}) has a feasible horizon in [1, N_max].
bool p0_feasible(const Scenario& s, const Vector& x);

struct SampleResult
{
    std::vector<Vector> states;
    long long proposals = 0;
    double acceptance_rate = 0.0;
};

/// Rejection sampling over the scenario's proposal box: keep x in X(0) with a
/// feasible P_0 and x outside r(0) + exclusion. Throws std::runtime_error when
/// the acceptance rate is below 0.1% once max_proposals are spent.
SampleResult sample_feasible_initial_states(const Scenario& s, int count, std::uint64_t seed,
                                            const Zonotope& exclusion, long long max_proposals = 1000000);

struct RunSummary
{
    int run = 0;
    Mode mode = Mode::atcs;
    Vector x0;
    bool started = false;  ///< false if P_0 was infeasible for this mode
    double final_distance = 0.0;
    int N_ct = 0;
    int N_bar = 0;
    int N0 = 0;
    double J0 = 0.0;
    int completion_bound = 0;  ///< floor(J0 / lambda)
    int c1_steps = 0, c2_steps = 0;
    std::vector<std::string> violations;
    SimTrace trace;
};

struct ModeAggregate
{
    Mode mode = Mode::atcs;
    int runs = 0;
    int started = 0;
    double mean_distance = 0, median_distance = 0, min_distance = 0, max_distance = 0;
    double mean_N_ct = 0;
    double mean_completion_bound = 0;
    std::map<int, int> N_bar_histogram;
    int modal_N_bar = 0;
    int violations = 0;
};

struct CampaignOptions
{
    /// 0 means VHMPC_THREADS or the OpenMP default.
    int threads = 0;
    bool serial = false;
    bool keep_traces = false;
    long long max_proposals = 1000000;
};

struct CampaignReport
{
    std::string scenario;
    std::uint64_t seed = 0;
    int count = 0;
    std::vector<Mode> modes;
    double acceptance_rate = 0.0;
    /// runs[i][m] is run i under modes[m].
    std::vector<std::vector<RunSummary>> runs;
    std::vector<ModeAggregate> aggregates;
    /// Fraction of matched pairs with ATCS distance <= FTCS distance (-1 if n/a).
    double paired_dominance = -1.0;
    int violation_count = 0;
    std::vector<std::string> notes;

    const ModeAggregate* aggregate(Mode m) const;
};

/// Paired runs: every mode sees the same x0 and the same disturbance keys.
CampaignReport run_campaign(const Scenario& s, const std::vector<Mode>& modes, int count, std::uint64_t seed,
                            const CampaignOptions& options = {});

/// Threads from VHMPC_THREADS if set and positive, else 0.
int env_thread_cap();

}  // namespace vhmpc

#endif
