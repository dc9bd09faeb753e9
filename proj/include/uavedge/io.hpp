#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "uavedge/models.hpp"
#include "uavedge/montecarlo.hpp"
#include "uavedge/planner.hpp"

namespace uavedge {

/// JSON plan file. Matrices are arrays of slot rows; `energy` and
/// `constraints` are written for reference and ignored when reading.
std::string serialize_plan(const Plan& plan, const Scenario& s);
Plan parse_plan(std::string_view text);
Plan load_plan_file(const std::string& path);

std::string serialize_energy(const EnergyBreakdown& e);
std::string serialize_report(const ValidationReport& r);

/// slot,x,y,speed,d_off_0..d_off_{K-1}; position is the waypoint ending the slot.
void write_slots_csv(std::ostream& out, const Plan& plan, const Scenario& s);

/// outer,block,inner,objective_j
void write_plan_trace_csv(std::ostream& out, const std::vector<ScaTrace>& trace);

/// Whole-file helpers; throw std::runtime_error on I/O failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace uavedge
