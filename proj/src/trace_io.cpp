#include "pdd/trace_io.hpp"

#include <cstdio>

namespace pdd {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string trace_csv_header() { return "k,objective,al_value,h_inf,rho,eta,branch,inner_iters,time_ms"; }

std::string trace_csv_row(const IterationRecord& rec) {
  std::string row = std::to_string(rec.k);
  for (double v : {rec.objective, rec.al_value, rec.h_inf, rec.rho, rec.eta}) row += "," + fmt_double(v);
  row += "," + to_string(rec.branch);
  row += "," + std::to_string(rec.inner_iters);
  row += "," + fmt_double(rec.time_ms);
  return row;
}

void write_trace_csv(std::ostream& os, const PddTrace& trace) {
  os << trace_csv_header() << '\n';
  for (const auto& rec : trace.records) os << trace_csv_row(rec) << '\n';
}

nlohmann::json to_json(const IterationRecord& rec) {
  return {{"k", rec.k},
          {"objective", rec.objective},
          {"al_value", rec.al_value},
          {"h_inf", rec.h_inf},
          {"rho", rec.rho},
          {"eta", rec.eta},
          {"branch", to_string(rec.branch)},
          {"inner_iters", rec.inner_iters},
          {"time_ms", rec.time_ms},
          {"rho_floored", rec.rho_floored}};
}

nlohmann::json to_json(const PddTrace& trace) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : trace.records) records.push_back(to_json(rec));
  return {{"records", records}, {"monotonicity_violations", trace.monotonicity_violations}};
}

}  // namespace pdd
