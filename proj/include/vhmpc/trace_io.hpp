#ifndef VHMPC_TRACE_IO_HPP
#define VHMPC_TRACE_IO_HPP

#include <string>
#include <vector>

#include "vhmpc/simharness.hpp"

namespace vhmpc
{

/// One w per line, comma separated; or the records of a trace JSON file.
std::vector<Vector> read_disturbance_file(const std::string& path);

/// One row per step: k, x..., r..., u..., w..., J, N, branch, terminal_generators.
void write_trace_csv(const std::string& path, const Scenario& s, const SimTrace& t);

/// Full structured trace. `disturbance` is a free-form description.
std::string trace_json(const Scenario& s, const SimTrace& t, double final_distance, const std::string& disturbance,
                       const std::vector<std::string>& violations);
void write_trace_json(const std::string& path, const Scenario& s, const SimTrace& t, double final_distance,
                      const std::string& disturbance, const std::vector<std::string>& violations);

/// What a stored trace needs for a replay comparison.
struct StoredTrace
{
    std::string scenario;
    Mode mode = Mode::atcs;
    Vector x0;
    std::vector<Vector> disturbances;
    std::vector<int> horizons;
    std::vector<double> costs;
    std::vector<std::string> branches;
    Vector x_final;
    int N_ct = 0;
    int N_bar = 0;
    double final_distance = 0.0;
};
StoredTrace read_trace_json(const std::string& path);

std::string report_json(const CampaignReport& r);
void write_report_json(const std::string& path, const CampaignReport& r);

/// x,y rows; the first vertex is repeated at the end to close the polygon.
void write_polyline_csv(const std::string& path, const std::vector<Vector>& vertices);

/// Writes text, throwing std::runtime_error on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace vhmpc

#endif
