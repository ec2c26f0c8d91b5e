#include "vhmpc/trace_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace vhmpc
{

namespace
{
using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::vector<double> to_std(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector from_std(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string num(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void append(std::string& line, const Vector& v)
{
    for (int i = 0; i < v.size(); ++i)
    {
        line += "," + num(v[i]);
    }
}

std::string read_all(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    out << text;
    if (!out)
    {
        throw std::runtime_error("write failed for " + path);
    }
}

std::vector<Vector> read_disturbance_file(const std::string& path)
{
    const std::string text = read_all(path);
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    {
        return read_trace_json(path).disturbances;
    }
    std::vector<Vector> out;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line))
    {
        if (line.empty() || line[0] == '#')
        {
            continue;
        }
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            vals.push_back(std::stod(item));
        }
        out.push_back(from_std(vals));
    }
    return out;
}

void write_trace_csv(const std::string& path, const Scenario& s, const SimTrace& t)
{
    const int n = s.problem.state_dim();
    const int m = s.problem.input_dim();
    std::string text = "k";
    for (int i = 0; i < n; ++i)
    {
        text += ",x" + std::to_string(i);
    }
    for (int i = 0; i < n; ++i)
    {
        text += ",r" + std::to_string(i);
    }
    for (int i = 0; i < m; ++i)
    {
        text += ",u" + std::to_string(i);
    }
    for (int i = 0; i < n; ++i)
    {
        text += ",w" + std::to_string(i);
    }
    text += ",J,N,branch,terminal_generators\n";
    for (const StepRecord& r : t.records)
    {
        std::string line = std::to_string(r.k);
        append(line, r.x);
        append(line, r.r);
        append(line, r.u);
        append(line, r.w);
        line += "," + num(r.J) + "," + std::to_string(r.N) + "," + to_string(r.branch) + "," +
                std::to_string(r.terminal_generators) + "\n";
        text += line;
    }
    // final row: state after the last propagation
    std::string line = std::to_string(t.N_ct);
    append(line, t.x_final);
    append(line, t.r_final);
    line += std::string(static_cast<std::size_t>(m + n + 4), ',');
    text += line + "\n";
    write_text_file(path, text);
}

std::string trace_json(const Scenario& s, const SimTrace& t, double final_distance, const std::string& disturbance,
                       const std::vector<std::string>& violations)
{
    ordered j;
    j["scenario"] = s.name;
    j["mode"] = to_string(t.mode);
    j["disturbance"] = disturbance;
    j["lambda"] = t.lambda;
    j["J0"] = t.J0;
    j["N_ct"] = t.N_ct;
    j["N_bar"] = t.N_bar;
    j["final_distance"] = final_distance;
    j["distance_unit"] = s.distance_unit;
    j["feasible_throughout"] = t.feasible_throughout;
    j["breach"] = t.breach;
    j["violations"] = violations;
    j["x0"] = t.records.empty() ? std::vector<double>{} : to_std(t.records.front().x);
    j["x_final"] = to_std(t.x_final);
    j["r_final"] = to_std(t.r_final);
    ordered recs = ordered::array();
    for (const StepRecord& r : t.records)
    {
        ordered e;
        e["k"] = r.k;
        e["x"] = to_std(r.x);
        e["r"] = to_std(r.r);
        e["u"] = to_std(r.u);
        e["w"] = to_std(r.w);
        e["J"] = r.J;
        e["N"] = r.N;
        e["branch"] = to_string(r.branch);
        e["terminal_generators"] = r.terminal_generators;
        recs.push_back(std::move(e));
    }
    j["records"] = std::move(recs);
    return j.dump(1) + "\n";
}

void write_trace_json(const std::string& path, const Scenario& s, const SimTrace& t, double final_distance,
                      const std::string& disturbance, const std::vector<std::string>& violations)
{
    write_text_file(path, trace_json(s, t, final_distance, disturbance, violations));
}

StoredTrace read_trace_json(const std::string& path)
{
    const json j = json::parse(read_all(path));
    StoredTrace st;
    st.scenario = j.at("scenario").get<std::string>();
    st.mode = parse_mode(j.at("mode").get<std::string>());
    st.x0 = from_std(j.at("x0").get<std::vector<double>>());
    st.x_final = from_std(j.at("x_final").get<std::vector<double>>());
    st.N_ct = j.at("N_ct").get<int>();
    st.N_bar = j.at("N_bar").get<int>();
    st.final_distance = j.at("final_distance").get<double>();
    for (const json& r : j.at("records"))
    {
        st.disturbances.push_back(from_std(r.at("w").get<std::vector<double>>()));
        st.horizons.push_back(r.at("N").get<int>());
        st.costs.push_back(r.at("J").get<double>());
        st.branches.push_back(r.at("branch").get<std::string>());
    }
    return st;
}

std::string report_json(const CampaignReport& r)
{
    ordered j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["count"] = r.count;
    std::vector<std::string> modes;
    for (Mode m : r.modes)
    {
        modes.push_back(to_string(m));
    }
    j["modes"] = modes;
    j["acceptance_rate"] = r.acceptance_rate;
    j["violation_count"] = r.violation_count;
    if (r.paired_dominance >= 0.0)
    {
        j["paired_dominance"] = r.paired_dominance;
    }
    j["notes"] = r.notes;
    ordered aggs = ordered::array();
    for (const ModeAggregate& a : r.aggregates)
    {
        ordered e;
        e["mode"] = to_string(a.mode);
        e["runs"] = a.runs;
        e["started"] = a.started;
        e["mean_distance"] = a.mean_distance;
        e["median_distance"] = a.median_distance;
        e["min_distance"] = a.min_distance;
        e["max_distance"] = a.max_distance;
        e["mean_N_ct"] = a.mean_N_ct;
        e["mean_completion_bound"] = a.mean_completion_bound;
        ordered hist = ordered::object();
        for (const auto& [nbar, c] : a.N_bar_histogram)
        {
            hist[std::to_string(nbar)] = c;
        }
        e["N_bar_histogram"] = std::move(hist);
        e["modal_N_bar"] = a.modal_N_bar;
        e["violations"] = a.violations;
        aggs.push_back(std::move(e));
    }
    j["aggregates"] = std::move(aggs);
    ordered runs = ordered::array();
    for (const auto& row : r.runs)
    {
        for (const RunSummary& s : row)
        {
            ordered e;
            e["run"] = s.run;
            e["mode"] = to_string(s.mode);
            e["x0"] = to_std(s.x0);
            e["started"] = s.started;
            e["final_distance"] = s.final_distance;
            e["N_ct"] = s.N_ct;
            e["N_bar"] = s.N_bar;
            e["N0"] = s.N0;
            e["J0"] = s.J0;
            e["completion_bound"] = s.completion_bound;
            e["c1_steps"] = s.c1_steps;
            e["c2_steps"] = s.c2_steps;
            e["violations"] = s.violations;
            runs.push_back(std::move(e));
        }
    }
    j["runs"] = std::move(runs);
    return j.dump(1) + "\n";
}

void write_report_json(const std::string& path, const CampaignReport& r)
{
    write_text_file(path, report_json(r));
}

void write_polyline_csv(const std::string& path, const std::vector<Vector>& vertices)
{
    std::string text = "x,y\n";
    for (const Vector& v : vertices)
    {
        text += num(v[0]) + "," + num(v[1]) + "\n";
    }
    if (!vertices.empty())
    {
        text += num(vertices.front()[0]) + "," + num(vertices.front()[1]) + "\n";
    }
    write_text_file(path, text);
}

}  // namespace vhmpc
