#pragma once

#include <filesystem>
#include <string>

#include "sblem/em.hpp"

namespace sblem {

/// Columns: iter, L, Q_next, Q_self, grad_inf_norm, gamma_change,
/// z_hamming_change, wall_ms, log_prior_z. Unrecorded Q values are "nan".
std::string trace_to_csv(const EMTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const EMTrace& trace);

/// Records come back without their theta (the CSV does not carry it).
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path);

/// gamma, z, termination, L, log_prior_z, iterations, message.
std::string theta_final_to_json(const EMTrace& trace);
void write_theta_final_json(const std::filesystem::path& path, const EMTrace& trace);

/// Reads theta_final.json into the final-state fields of an EMTrace.
EMTrace read_theta_final_json(const std::filesystem::path& path);

/// trace.csv plus theta_final.json from one run directory.
EMTrace read_run_trace(const std::filesystem::path& dir);

}  // namespace sblem
