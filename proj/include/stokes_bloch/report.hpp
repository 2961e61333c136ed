#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stokes_bloch/tensor.hpp"
#include "stokes_bloch/tensor_lab.hpp"

namespace stokes_bloch {

using Json = nlohmann::ordered_json;

/// Process exit codes of the command-line tool.
enum class ExitCode : int {
  ok = 0,
  invariant_failed = 1,
  config_error = 2,
  ellipticity_violated = 3,
  solver_failed = 4,
};

inline const char* to_string(ExitCode c) {
  switch (c) {
    case ExitCode::ok: return "ok";
    case ExitCode::invariant_failed: return "invariant_failed";
    case ExitCode::config_error: return "config_error";
    case ExitCode::ellipticity_violated: return "ellipticity_violated";
    case ExitCode::solver_failed: return "solver_failed";
  }
  return "unknown";
}

/// One invariant compared against its tolerance.
struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  /// "<=", ">=" or "==".
  std::string relation = "<=";
  bool passed = false;
};

/// Collected invariant checks and warnings of one command run.
class Report {
 public:
  const Check& le(const std::string& name, double value, double tolerance) {
    return add({name, value, tolerance, "<=", value <= tolerance});
  }
  const Check& ge(const std::string& name, double value, double tolerance) {
    return add({name, value, tolerance, ">=", value >= tolerance});
  }
  const Check& eq(const std::string& name, double value, double expected) {
    return add({name, value, expected, "==", value == expected});
  }

  /// Recorded in the summary and echoed to stderr as a WARN line.
  void warn(const std::string& msg) {
    warnings_.push_back(msg);
    std::cerr << "WARN: " << msg << '\n';
  }

  bool passed() const {
    for (const auto& c : checks_) {
      if (!c.passed) return false;
    }
    return true;
  }

  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  Json checks_json() const {
    Json out = Json::array();
    for (const auto& c : checks_) {
      Json j;
      j["name"] = c.name;
      j["value"] = c.value;
      j["tolerance"] = c.tolerance;
      j["relation"] = c.relation;
      j["passed"] = c.passed;
      out.push_back(j);
    }
    return out;
  }

 private:
  const Check& add(Check c) {
    // NaN compares false and so fails.
    checks_.push_back(std::move(c));
    if (!checks_.back().passed) {
      std::cerr << "FAIL: " << checks_.back().name << " = " << checks_.back().value << " (tolerance "
                << checks_.back().relation << ' ' << checks_.back().tolerance << ")\n";
    }
    return checks_.back();
  }

  std::vector<Check> checks_;
  std::vector<std::string> warnings_;
};

/// Formats a double with 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json vector_json(const RealVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline RealVector vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::string tensor_key(int k, int l, int a, int b) {
  return "A[" + std::to_string(k + 1) + "][" + std::to_string(l + 1) + "][" + std::to_string(a + 1) + "][" +
         std::to_string(b + 1) + "]";
}

/// Flat object keyed "A[k][l][alpha][beta]" with one-based indices.
inline Json tensor_entries_json(const Tensor4& A) {
  Json j;
  A.for_each_index([&](int k, int l, int a, int b) { j[tensor_key(k, l, a, b)] = A(k, l, a, b); });
  return j;
}

inline Json provenance_json(const TensorProvenance& p) {
  Json j;
  j["model"] = p.model;
  j["d"] = p.dim;
  j["n"] = p.resolution;
  j["kind"] = to_string(p.kind);
  j["solver_residuals"] = p.solver_residuals;
  j["solver_iterations"] = p.solver_iterations;
  return j;
}

/// Tensor document: the flat entries followed by a provenance block.
inline Json tensor_json(const HomTensor& A) {
  Json j = tensor_entries_json(A.entries);
  j["provenance"] = provenance_json(A.provenance);
  return j;
}

/// Reads a tensor document written by tensor_json (extra keys are ignored).
inline HomTensor tensor_from_json(const Json& j) {
  HomTensor out;
  const Json& p = j.at("provenance");
  out.provenance.model = p.at("model").get<std::string>();
  out.provenance.dim = p.at("d").get<int>();
  out.provenance.resolution = p.at("n").get<int>();
  out.provenance.kind = gradient_kind_from_string(p.at("kind").get<std::string>());
  out.provenance.solver_residuals = p.value("solver_residuals", std::vector<double>{});
  out.provenance.solver_iterations = p.value("solver_iterations", std::vector<int>{});
  out.kind = out.provenance.kind;
  out.entries = Tensor4(out.provenance.dim);
  out.entries.for_each_index([&](int k, int l, int a, int b) {
    out.entries(k, l, a, b) = j.at(tensor_key(k, l, a, b)).get<double>();
  });
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return Json::parse(in);
}

/// Minimal CSV table: a header and rows of preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw std::invalid_argument("csv row width mismatch");
    rows_.push_back(std::move(cells));
  }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  static CsvTable parse(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty csv");
    CsvTable t(split(line));
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      t.add_row(split(line));
    }
    return t;
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return static_cast<int>(i);
    }
    throw std::runtime_error("csv has no column '" + name + "'");
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace stokes_bloch
