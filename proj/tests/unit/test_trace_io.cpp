#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vhmpc/trace_io.hpp"

using namespace vhmpc;

namespace
{

std::string tmp(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "vhmpc_trace_io";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::vector<std::string> lines_of(const std::string& path)
{
    std::ifstream in(path);
    std::vector<std::string> out;
    std::string l;
    while (std::getline(in, l))
    {
        out.push_back(l);
    }
    return out;
}

int commas(const std::string& s)
{
    return static_cast<int>(std::count(s.begin(), s.end(), ','));
}

}  // namespace

TEST_CASE("trace CSV has a fixed column count")
{
    const Scenario s = make_double_integrator();
    const RunResult r = simulate(s, Mode::atcs, s.x0, DisturbanceSource::uniform(1));
    const std::string path = tmp("t.csv");
    write_trace_csv(path, s, r.trace);
    const auto lines = lines_of(path);
    REQUIRE(lines.size() == r.trace.records.size() + 2);
    CHECK(lines[0] == "k,x0,x1,r0,r1,u0,w0,w1,J,N,branch,terminal_generators");
    const int cols = commas(lines[0]);
    for (const std::string& l : lines)
    {
        CHECK(commas(l) == cols);
    }
    CHECK(lines.back().rfind(std::to_string(r.trace.N_ct) + ",", 0) == 0);
}

TEST_CASE("trace JSON round trip")
{
    const Scenario s = make_double_integrator();
    const RunResult r = simulate(s, Mode::ftcs, s.x0, DisturbanceSource::uniform(2));
    const std::string path = tmp("t.json");
    write_trace_json(path, s, r.trace, r.final_distance, "uniform:2", r.violations);
    const StoredTrace st = read_trace_json(path);
    CHECK(st.scenario == s.name);
    CHECK(st.mode == Mode::ftcs);
    CHECK(st.x0 == s.x0);
    CHECK(st.x_final == r.trace.x_final);
    CHECK(st.N_ct == r.trace.N_ct);
    CHECK(st.final_distance == r.final_distance);
    REQUIRE(st.disturbances.size() == r.trace.records.size());
    for (std::size_t i = 0; i < st.disturbances.size(); ++i)
    {
        CHECK(st.disturbances[i] == r.trace.records[i].w);
        CHECK(st.costs[i] == r.trace.records[i].J);
        CHECK(st.horizons[i] == r.trace.records[i].N);
        CHECK(st.branches[i] == "F");
    }
    // replay from the JSON file
    CHECK(read_disturbance_file(path).size() == st.disturbances.size());
    const DisturbanceSource rep = DisturbanceSource::parse("replay:" + path);
    CHECK(simulate(s, Mode::ftcs, s.x0, rep).trace.x_final == r.trace.x_final);
}

TEST_CASE("disturbance CSV files")
{
    const std::string path = tmp("w.csv");
    {
        std::ofstream(path) << "# header\n0.1,0.2\n\n-0.1,0.4\n";
    }
    const auto ws = read_disturbance_file(path);
    REQUIRE(ws.size() == 2);
    CHECK(ws[1][1] == 0.4);
    CHECK_THROWS(read_disturbance_file(tmp("missing.csv")));
}

TEST_CASE("polyline closure")
{
    const std::string path = tmp("p.csv");
    std::vector<Vector> v{(Vector(2) << 0, 0).finished(), (Vector(2) << 1, 0).finished(),
                          (Vector(2) << 0, 1).finished()};
    write_polyline_csv(path, v);
    const auto lines = lines_of(path);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "x,y");
    CHECK(lines[1] == lines[4]);
    write_polyline_csv(path, {});
    CHECK(lines_of(path).size() == 1);
}

TEST_CASE("report JSON carries aggregates and runs")
{
    const Scenario s = make_double_integrator();
    CampaignOptions o;
    o.serial = true;
    const CampaignReport r = run_campaign(s, {Mode::atcs, Mode::ftcs}, 3, 4, o);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j.at("count") == 3);
    CHECK(j.at("runs").size() == 6);
    CHECK(j.at("aggregates").size() == 2);
    CHECK(j.at("aggregates")[0].at("mean_distance").get<double>() == r.aggregates[0].mean_distance);
    CHECK(j.contains("paired_dominance"));
    CHECK_THROWS_AS(write_text_file("/nonexistent/dir/x.txt", "a"), std::runtime_error);
}
