#include "sblem/trace_io.hpp"

#include <charconv>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sblem/csv.hpp"
#include "sblem/error.hpp"

namespace sblem {

namespace {

constexpr const char* kHeader =
    "iter,L,Q_next,Q_self,grad_inf_norm,gamma_change,z_hamming_change,wall_ms,log_prior_z";

double parse_field(const std::string& tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw IoError("malformed trace field '" + tok + "'");
  }
  return v;
}

}  // namespace

std::string trace_to_csv(const EMTrace& trace) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter);
    for (double v : {r.L, r.q_next, r.q_self, r.grad_inf_norm, r.gamma_change}) {
      out += ",";
      out += format_double(v);
    }
    out += "," + std::to_string(r.z_hamming_change);
    out += "," + format_double(r.wall_ms);
    out += "," + format_double(r.log_prior);
    out += "\n";
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const EMTrace& trace) {
  write_text_file(path, trace_to_csv(trace));
}

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter,L,", 0) != 0) {
    throw IoError("missing trace header in " + path.string());
  }
  std::vector<TraceRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 9) throw IoError("trace row has wrong field count in " + path.string());
    TraceRecord r;
    r.iter = static_cast<int>(parse_field(f[0]));
    r.L = parse_field(f[1]);
    r.q_next = parse_field(f[2]);
    r.q_self = parse_field(f[3]);
    r.grad_inf_norm = parse_field(f[4]);
    r.gamma_change = parse_field(f[5]);
    r.z_hamming_change = static_cast<int>(parse_field(f[6]));
    r.wall_ms = parse_field(f[7]);
    r.log_prior = parse_field(f[8]);
    records.push_back(std::move(r));
  }
  return records;
}

std::string theta_final_to_json(const EMTrace& trace) {
  nlohmann::json j;
  j["gamma"] = std::vector<double>(trace.theta_final.gamma.data(),
                                   trace.theta_final.gamma.data() +
                                       trace.theta_final.gamma.size());
  j["z"] = trace.theta_final.z;
  j["termination"] = std::string(to_string(trace.termination));
  j["L"] = trace.L_final;
  j["log_prior_z"] = trace.log_prior_final;
  j["iterations"] = trace.records.size();
  j["message"] = trace.message;
  return j.dump(2) + "\n";
}

void write_theta_final_json(const std::filesystem::path& path, const EMTrace& trace) {
  write_text_file(path, theta_final_to_json(trace));
}

EMTrace read_theta_final_json(const std::filesystem::path& path) {
  EMTrace trace;
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    const auto gamma = j.at("gamma").get<std::vector<double>>();
    trace.theta_final.gamma = Eigen::Map<const Vector>(gamma.data(),
                                                       static_cast<Eigen::Index>(gamma.size()));
    trace.theta_final.z = j.at("z").get<Indicator>();
    trace.termination = termination_from_string(j.at("termination").get<std::string>());
    trace.L_final = j.at("L").get<double>();
    const auto& lp = j.at("log_prior_z");
    trace.log_prior_final =
        lp.is_null() ? -std::numeric_limits<double>::infinity() : lp.get<double>();
    trace.message = j.value("message", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed " + path.string() + ": " + e.what());
  }
  return trace;
}

EMTrace read_run_trace(const std::filesystem::path& dir) {
  EMTrace trace = read_theta_final_json(dir / "theta_final.json");
  trace.records = read_trace_csv(dir / "trace.csv");
  return trace;
}

}  // namespace sblem
