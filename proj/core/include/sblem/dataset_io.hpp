#pragma once

#include <filesystem>
#include <string>

#include "sblem/model.hpp"

namespace sblem {

/// Everything stored in one dataset directory.
struct StoredDataset {
  SystemModel model;
  SimConfig sim;
  Dataset data;
};

/// model.json (model + simulation settings), Y.csv, X.csv, U.csv, zstar.csv.
void write_dataset(const std::filesystem::path& dir, const SystemModel& model,
                   const SimConfig& sim, const Dataset& data);

StoredDataset read_dataset(const std::filesystem::path& dir);

std::string model_to_json(const SystemModel& model, const SimConfig& sim,
                          const Dataset* data = nullptr);
void model_from_json(const std::string& text, SystemModel& model, SimConfig& sim);

bool has_dataset(const std::filesystem::path& dir);

}  // namespace sblem
