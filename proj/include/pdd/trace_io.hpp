#pragma once

#include <ostream>
#include <string>

#include "json.hpp"
#include "pdd/core.hpp"

namespace pdd {

/// "k,objective,al_value,h_inf,rho,eta,branch,inner_iters,time_ms"
std::string trace_csv_header();
std::string trace_csv_row(const IterationRecord& rec);
void write_trace_csv(std::ostream& os, const PddTrace& trace);

nlohmann::json to_json(const IterationRecord& rec);
nlohmann::json to_json(const PddTrace& trace);

}  // namespace pdd
