#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vhmpc/simharness.hpp"
#include "vhmpc/trace_io.hpp"

#ifndef VHMPC_SOURCE_DIR
#define VHMPC_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace vhmpc;

namespace
{

enum Exit : int
{
    kOk = 0,
    kError = 1,
    kBreach = 2,
    kInfeasibleStart = 3,
    kBadScenario = 4,
    kRegressionMismatch = 5
};

const char* kDisturbanceHelp =
    "Disturbance spec: zero | uniform:<seed> | persistent:<v1,...,vn> | replay:<path>. "
    "persistent must name a vertex of W; replay reads a CSV (one w per line) or a trace JSON.";

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
    {
        if (!item.empty())
        {
            out.push_back(item);
        }
    }
    return out;
}

Vector parse_vector(const std::string& s)
{
    const auto parts = split(s, ',');
    Vector v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i)
    {
        v[static_cast<Eigen::Index>(i)] = std::stod(parts[i]);
    }
    return v;
}

std::vector<Mode> parse_modes(const std::string& s)
{
    std::vector<Mode> modes;
    for (const std::string& m : split(s, ','))
    {
        modes.push_back(parse_mode(m));
    }
    if (modes.empty())
    {
        throw std::invalid_argument("no mode given");
    }
    return modes;
}

/// A path as given, else the same name under the bundled scenario directory.
std::string resolve_scenario(const std::string& path)
{
    if (fs::exists(path))
    {
        return path;
    }
    const fs::path bundled = fs::path(VHMPC_SOURCE_DIR) / "scenarios" / path;
    if (fs::exists(bundled))
    {
        return bundled.string();
    }
    const fs::path named = fs::path(VHMPC_SOURCE_DIR) / "scenarios" / (path + ".json");
    if (fs::exists(named))
    {
        return named.string();
    }
    return path;
}

std::string fmt(double v, int prec = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

/// Run metadata kept apart from the data files so those stay byte-identical.
void write_manifest(const fs::path& dir, const std::string& command, int argc, char** argv)
{
    nlohmann::ordered_json j;
    j["command"] = command;
    std::vector<std::string> args(argv, argv + argc);
    j["argv"] = args;
    const std::time_t now = std::time(nullptr);
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["created_utc"] = ts;
    j["max_threads"] = env_thread_cap();
    write_text_file((dir / "manifest.json").string(), j.dump(1) + "\n");
}

int coord_index(const Scenario& s, const std::string& name)
{
    for (std::size_t i = 0; i < s.state_labels.size(); ++i)
    {
        if (s.state_labels[i] == name)
        {
            return static_cast<int>(i);
        }
    }
    try
    {
        std::size_t used = 0;
        const int i = std::stoi(name, &used);
        if (used == name.size() && i >= 0 && i < s.problem.state_dim())
        {
            return i;
        }
    }
    catch (const std::exception&)
    {
    }
    throw std::invalid_argument("unknown coordinate '" + name + "'");
}

Zonotope project(const Zonotope& z, int a, int b)
{
    Matrix P = Matrix::Zero(2, z.dim());
    P(0, a) = 1.0;
    P(1, b) = 1.0;
    return linear_map_zonotope(P, z);
}

/// Writes S_<k>.csv for each entry of ks ("inf" gives the outer S(inf) approximation).
void emit_sets(const Scenario& s, const std::vector<std::string>& ks, int a, int b, const fs::path& dir)
{
    for (const std::string& k : ks)
    {
        Zonotope z;
        if (k == "inf")
        {
            z = s.problem.sinf.set;
        }
        else
        {
            const int kk = std::stoi(k);
            if (kk < 0)
            {
                throw std::invalid_argument("negative k in set list");
            }
            z = s.problem.tubes->tube_at(kk);
        }
        write_polyline_csv((dir / ("S_" + k + ".csv")).string(), vertices_2d(project(z, a, b)));
    }
}

std::vector<std::string> default_coords(const Scenario& s)
{
    return {s.state_labels.size() > 0 ? s.state_labels[0] : "0", s.state_labels.size() > 1 ? s.state_labels[1] : "1"};
}

struct RunOptions
{
    std::string scenario;
    std::string modes = "atcs";
    std::string x0;
    std::string disturbance = "zero";
    std::string out;
    bool emit_traces = false;
    bool emit_sets = false;
    bool strict = true;
};

int cmd_run(const RunOptions& o, int argc, char** argv)
{
    const Scenario s = load_scenario(resolve_scenario(o.scenario));
    const std::vector<Mode> modes = parse_modes(o.modes);
    const Vector x0 = o.x0.empty() ? s.x0 : parse_vector(o.x0);
    const DisturbanceSource dist = DisturbanceSource::parse(o.disturbance);
    fs::path dir;
    if (!o.out.empty())
    {
        dir = o.out;
        fs::create_directories(dir);
        write_manifest(dir, "run", argc, argv);
    }
    int code = kOk;
    for (Mode m : modes)
    {
        RunResult r;
        try
        {
            r = simulate(s, m, x0, dist);
        }
        catch (const InfeasibleStart& e)
        {
            std::cerr << "infeasible start (" << to_string(m) << "): " << e.what() << "\n";
            code = std::max(code, static_cast<int>(kInfeasibleStart));
            continue;
        }
        int c1 = 0, c2 = 0;
        for (const StepRecord& rec : r.trace.records)
        {
            c1 += rec.branch == Branch::C1;
            c2 += rec.branch == Branch::C2;
        }
        std::cout << "mode=" << to_string(m) << " N_ct=" << r.trace.N_ct << " N_bar=" << r.trace.N_bar
                  << " J0=" << fmt(r.trace.J0) << " lambda=" << fmt(r.trace.lambda)
                  << " final_distance=" << fmt(r.final_distance) << " unit=" << s.distance_unit << " C1=" << c1
                  << " C2=" << c2 << " violations=" << r.violations.size() << "\n";
        for (const std::string& v : r.violations)
        {
            std::cerr << "invariant: " << v << "\n";
        }
        if (!r.trace.breach.empty() || (o.strict && !r.violations.empty()))
        {
            code = kBreach;
        }
        if (!dir.empty() && o.emit_traces)
        {
            write_trace_csv((dir / ("trace_" + to_string(m) + ".csv")).string(), s, r.trace);
            write_trace_json((dir / ("trace_" + to_string(m) + ".json")).string(), s, r.trace, r.final_distance,
                             dist.describe(), r.violations);
        }
        if (!dir.empty() && o.emit_sets && m != Mode::ftcs)
        {
            const auto c = default_coords(s);
            emit_sets(s, {std::to_string(r.trace.N_bar)}, coord_index(s, c[0]), coord_index(s, c[1]), dir);
        }
    }
    if (!dir.empty() && o.emit_sets)
    {
        const auto c = default_coords(s);
        emit_sets(s, {"inf"}, coord_index(s, c[0]), coord_index(s, c[1]), dir);
    }
    return code;
}

struct CampaignCliOptions
{
    std::string scenario;
    std::string modes = "atcs,ftcs";
    int count = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    bool serial = false;
    bool emit_traces = false;
    std::string out;
};

int cmd_campaign(const CampaignCliOptions& o, int argc, char** argv)
{
    const Scenario s = load_scenario(resolve_scenario(o.scenario));
    const std::vector<Mode> modes = parse_modes(o.modes);
    CampaignOptions opts;
    opts.threads = o.threads;
    opts.serial = o.serial;
    opts.keep_traces = o.emit_traces;
    const auto t0 = std::chrono::steady_clock::now();
    const CampaignReport rep = run_campaign(s, modes, o.count, o.seed, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::printf("%-8s %5s %5s %12s %12s %12s %12s %8s %8s %6s %5s\n", "mode", "runs", "ok", "mean", "median", "min",
                "max", "N_ct", "bound", "N_bar", "viol");
    for (const ModeAggregate& a : rep.aggregates)
    {
        std::printf("%-8s %5d %5d %12.6g %12.6g %12.6g %12.6g %8.3f %8.3f %6d %5d\n", to_string(a.mode).c_str(),
                    a.runs, a.started, a.mean_distance, a.median_distance, a.min_distance, a.max_distance,
                    a.mean_N_ct, a.mean_completion_bound, a.modal_N_bar, a.violations);
    }
    std::cout << "unit=" << s.distance_unit << " acceptance_rate=" << fmt(rep.acceptance_rate)
              << " violations=" << rep.violation_count;
    if (rep.paired_dominance >= 0.0)
    {
        std::cout << " paired_dominance=" << fmt(rep.paired_dominance);
    }
    std::cout << " seconds=" << fmt(secs, 4) << "\n";
    for (const std::string& n : rep.notes)
    {
        std::cout << "note: " << n << "\n";
    }

    if (!o.out.empty())
    {
        const fs::path dir = o.out;
        fs::create_directories(dir);
        write_manifest(dir, "campaign", argc, argv);
        write_report_json((dir / "report.json").string(), rep);
        if (o.emit_traces)
        {
            for (const auto& row : rep.runs)
            {
                for (const RunSummary& r : row)
                {
                    if (!r.started)
                    {
                        continue;
                    }
                    const std::string stem = "run" + std::to_string(r.run) + "_" + to_string(r.mode);
                    write_trace_json((dir / (stem + ".json")).string(), s, r.trace, r.final_distance,
                                     DisturbanceSource::uniform(o.seed, static_cast<std::uint64_t>(r.run)).describe(),
                                     r.violations);
                }
            }
        }
    }
    return rep.violation_count > 0 ? kBreach : kOk;
}

int cmd_sets(const std::string& scenario, const std::string& k_list, const std::string& coords,
             const std::string& out, int argc, char** argv)
{
    const Scenario s = load_scenario(resolve_scenario(scenario));
    std::vector<std::string> c = coords.empty() ? default_coords(s) : split(coords, ',');
    if (c.size() != 2)
    {
        throw std::invalid_argument("--coords needs exactly two coordinates");
    }
    const int a = coord_index(s, c[0]);
    const int b = coord_index(s, c[1]);
    const fs::path dir = out.empty() ? fs::path("sets") : fs::path(out);
    fs::create_directories(dir);
    write_manifest(dir, "sets", argc, argv);
    const auto ks = split(k_list, ',');
    emit_sets(s, ks, a, b, dir);
    for (const std::string& k : ks)
    {
        std::cout << (dir / ("S_" + k + ".csv")).string() << "\n";
    }
    return kOk;
}

int cmd_verify(const std::string& data_dir, const std::string& scenario_dir)
{
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(data_dir))
    {
        if (e.path().extension() == ".json")
        {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
    {
        std::cerr << "no traces under " << data_dir << "\n";
        return kError;
    }
    int code = kOk;
    for (const fs::path& f : files)
    {
        const StoredTrace st = read_trace_json(f.string());
        const Scenario s = load_scenario((fs::path(scenario_dir) / (st.scenario + ".json")).string());
        const RunResult r = simulate(s, st.mode, st.x0, DisturbanceSource::replay(st.disturbances));
        std::vector<std::string> diffs;
        std::vector<int> horizons;
        std::vector<std::string> branches;
        for (const StepRecord& rec : r.trace.records)
        {
            horizons.push_back(rec.N);
            branches.push_back(to_string(rec.branch));
        }
        if (horizons != st.horizons)
        {
            diffs.push_back("horizon sequence differs");
        }
        if (branches != st.branches)
        {
            diffs.push_back("branch sequence differs");
        }
        for (std::size_t i = 0; i < std::min(st.costs.size(), r.trace.records.size()); ++i)
        {
            if (std::abs(st.costs[i] - r.trace.records[i].J) > 1e-6 * std::max(1.0, std::abs(st.costs[i])))
            {
                diffs.push_back("cost differs at k = " + std::to_string(i));
                break;
            }
        }
        if (std::abs(st.final_distance - r.final_distance) > 1e-6 * std::max(1.0, st.final_distance))
        {
            diffs.push_back("final distance " + fmt(r.final_distance, 10) + " vs stored " +
                            fmt(st.final_distance, 10));
        }
        const bool ok = diffs.empty() && r.violations.empty();
        std::cout << (ok ? "PASS " : "FAIL ") << f.filename().string() << " N_ct=" << r.trace.N_ct
                  << " N_bar=" << r.trace.N_bar << " final_distance=" << fmt(r.final_distance) << "\n";
        for (const std::string& d : diffs)
        {
            std::cout << "  replay: " << d << "\n";
        }
        for (const std::string& v : r.violations)
        {
            std::cout << "  invariant: " << v << "\n";
        }
        if (!r.violations.empty())
        {
            code = kBreach;
        }
        else if (!diffs.empty() && code == kOk)
        {
            code = kRegressionMismatch;
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Variable-horizon tube MPC: single runs, campaigns, set export and regression checks"};
    app.require_subcommand(1);
    app.footer(std::string(kDisturbanceHelp) +
               "\nExit codes: 0 ok, 1 error, 2 invariant breach, 3 infeasible start, 4 bad scenario, "
               "5 regression mismatch. VHMPC_THREADS caps campaign threads.");

    RunOptions ro;
    auto* run = app.add_subcommand("run", "Simulate one initial state");
    run->add_option("--scenario", ro.scenario, "Scenario JSON (path or bundled name)")->required();
    run->add_option("--mode", ro.modes, "atcs | ftcs | mintime, or a comma list")->capture_default_str();
    run->add_option("--x0", ro.x0, "Initial state override, comma separated");
    run->add_option("--disturbance", ro.disturbance, kDisturbanceHelp)->capture_default_str();
    run->add_option("--out", ro.out, "Output directory");
    run->add_flag("--emit-traces", ro.emit_traces, "Write trace CSV and JSON into --out");
    run->add_flag("--emit-sets", ro.emit_sets, "Write S(N_bar) and S(inf) polylines into --out");
    run->add_flag("--strict-invariants,!--no-strict-invariants", ro.strict,
                  "Exit 2 on any failed invariant check (default on)");

    CampaignCliOptions co;
    auto* camp = app.add_subcommand("campaign", "Paired Monte Carlo over sampled initial states");
    camp->add_option("--scenario", co.scenario, "Scenario JSON (path or bundled name)")->required();
    camp->add_option("--mode", co.modes, "Comma list of modes")->capture_default_str();
    camp->add_option("--count", co.count, "Number of initial states")->capture_default_str();
    camp->add_option("--seed", co.seed, "Seed for initial states and disturbances")->capture_default_str();
    camp->add_option("--threads", co.threads, "Worker threads (0: VHMPC_THREADS or all)")->capture_default_str();
    camp->add_flag("--serial", co.serial, "Serial reference loop");
    camp->add_flag("--emit-traces", co.emit_traces, "Write every run's trace JSON into --out");
    camp->add_option("--out", co.out, "Output directory for report.json");

    std::string sets_scenario, k_list = "1,2,3,inf", coords, sets_out;
    auto* sets = app.add_subcommand("sets", "Export S(k) polylines projected on two coordinates");
    sets->add_option("--scenario", sets_scenario, "Scenario JSON (path or bundled name)")->required();
    sets->add_option("--k-list", k_list, "Comma list of k values; 'inf' for S(inf)")->capture_default_str();
    sets->add_option("--coords", coords, "Two coordinate names or indices (default: first two states)");
    sets->add_option("--out", sets_out, "Output directory (default ./sets)");

    std::string data_dir = std::string(VHMPC_SOURCE_DIR) + "/data/regression";
    std::string scenario_dir = std::string(VHMPC_SOURCE_DIR) + "/scenarios";
    auto* verify = app.add_subcommand("verify", "Replay bundled traces and rerun the invariant suite");
    verify->add_option("--data", data_dir, "Directory of trace JSON files")->capture_default_str();
    verify->add_option("--scenarios", scenario_dir, "Directory holding <scenario>.json")->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        return app.exit(e);
    }

    try
    {
        if (*run)
        {
            return cmd_run(ro, argc, argv);
        }
        if (*camp)
        {
            return cmd_campaign(co, argc, argv);
        }
        if (*sets)
        {
            return cmd_sets(sets_scenario, k_list, coords, sets_out, argc, argv);
        }
        if (*verify)
        {
            return cmd_verify(data_dir, scenario_dir);
        }
    }
    catch (const ScenarioError& e)
    {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kBadScenario;
    }
    catch (const InfeasibleStart& e)
    {
        std::cerr << "infeasible start: " << e.what() << "\n";
        return kInfeasibleStart;
    }
    catch (const InvariantBreach& e)
    {
        std::cerr << e.what() << "\n";
        return kBreach;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
