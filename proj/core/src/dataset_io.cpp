#include "sblem/dataset_io.hpp"

#include <json.hpp>

#include "sblem/csv.hpp"
#include "sblem/error.hpp"

namespace sblem {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, int n_rows, int n_cols, const char* name) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != n_rows) {
    throw InvalidArgument(std::string("dimension mismatch: ") + name + " row count");
  }
  Matrix M(n_rows, n_cols);
  for (int i = 0; i < n_rows; ++i) {
    const json& row = rows[i];
    if (!row.is_array() || static_cast<int>(row.size()) != n_cols) {
      throw InvalidArgument(std::string("dimension mismatch: ") + name + " column count");
    }
    for (int j = 0; j < n_cols; ++j) M(i, j) = row[j].get<double>();
  }
  return M;
}

}  // namespace

std::string model_to_json(const SystemModel& model, const SimConfig& sim,
                          const Dataset* data) {
  json j;
  j["n"] = model.n;
  j["m"] = model.m;
  j["K"] = model.K;
  j["sigma2"] = model.sigma2;
  j["p0"] = model.p0;
  j["p1"] = model.p1;
  j["pi1"] = model.pi1;
  j["D"] = matrix_to_json(model.D);
  j["A"] = matrix_to_json(model.A);
  json s;
  s["sparsity"] = sim.sparsity;
  s["support"] = sim.support ? json(*sim.support) : json(nullptr);
  s["input_variance"] = sim.input_variance;
  s["seed"] = sim.seed;
  j["sim"] = std::move(s);
  if (data != nullptr) j["support_drawn"] = support_of(data->U);
  return j.dump(2) + "\n";
}

void model_from_json(const std::string& text, SystemModel& model, SimConfig& sim) {
  try {
    const json j = json::parse(text);
    model.n = j.at("n").get<int>();
    model.m = j.at("m").get<int>();
    model.K = j.at("K").get<int>();
    model.sigma2 = j.at("sigma2").get<double>();
    model.p0 = j.at("p0").get<double>();
    model.p1 = j.at("p1").get<double>();
    model.pi1 = j.at("pi1").get<double>();
    model.D = matrix_from_json(j.at("D"), model.n, model.n, "D");
    model.A = matrix_from_json(j.at("A"), model.m, model.n, "A");
    if (j.contains("sim")) {
      const json& s = j.at("sim");
      sim.sparsity = s.at("sparsity").get<int>();
      if (s.contains("support") && !s.at("support").is_null()) {
        sim.support = s.at("support").get<std::vector<int>>();
      } else {
        sim.support.reset();
      }
      sim.input_variance = s.at("input_variance").get<double>();
      sim.seed = s.at("seed").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed model.json: ") + e.what());
  }
  validate_model(model);
}

void write_dataset(const std::filesystem::path& dir, const SystemModel& model,
                   const SimConfig& sim, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  write_text_file(dir / "model.json", model_to_json(model, sim, &data));
  write_matrix_csv(dir / "Y.csv", data.Y);
  write_matrix_csv(dir / "X.csv", data.X);
  write_matrix_csv(dir / "U.csv", data.U);
  write_indicator_csv(dir / "zstar.csv", data.zstar);
}

bool has_dataset(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "model.json") && std::filesystem::exists(dir / "Y.csv");
}

StoredDataset read_dataset(const std::filesystem::path& dir) {
  StoredDataset out;
  model_from_json(read_text_file(dir / "model.json"), out.model, out.sim);
  out.data.seed = out.sim.seed;
  out.data.Y = read_matrix_csv(dir / "Y.csv");
  validate_observations(out.model, out.data.Y);
  if (std::filesystem::exists(dir / "X.csv")) out.data.X = read_matrix_csv(dir / "X.csv");
  if (std::filesystem::exists(dir / "U.csv")) out.data.U = read_matrix_csv(dir / "U.csv");
  if (std::filesystem::exists(dir / "zstar.csv")) {
    out.data.zstar = read_indicator_csv(dir / "zstar.csv");
  }
  return out;
}

}  // namespace sblem
