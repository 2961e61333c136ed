#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stokes_bloch/eps_validation.hpp"
#include "stokes_bloch/grid.hpp"
#include "stokes_bloch/operators.hpp"
#include "stokes_bloch/tensor_lab.hpp"
#include "stokes_bloch/viscosity.hpp"

namespace stokes_bloch {

inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tolerances of every invariant the commands check. All must be positive.
struct Tolerances {
  double solver = 1e-11;
  double symmetry = 1e-10;
  double trace_identity = 1e-9;
  double weak_form = 1e-9;
  double ellipticity_margin = 1e-8;
  double corrector_divergence = 1e-10;
  double rayleigh = 1e-11;
  double zero_mode_transverse = 1e-9;
  double imag_q0 = 1e-9;
  /// |lambda'(0)| <= first_derivative * max(1, |lambda''(0)/2|).
  double first_derivative = 1e-8;
  double propagation = 1e-5;
  double derivative_check = 1e-4;
  double equivalence = 1e-5;
  double kernel_rank = 1e-8;
  double eps_divergence = 1e-11;
  double convergence_slope = 0.9;
  double norm_ratio = 2.0;
  /// Errors below this count as exact (constant coefficients).
  double exact = 1e-10;
  double min_overlap = 0.5;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["solver"] = solver;
    j["symmetry"] = symmetry;
    j["trace_identity"] = trace_identity;
    j["weak_form"] = weak_form;
    j["ellipticity_margin"] = ellipticity_margin;
    j["corrector_divergence"] = corrector_divergence;
    j["rayleigh"] = rayleigh;
    j["zero_mode_transverse"] = zero_mode_transverse;
    j["imag_q0"] = imag_q0;
    j["first_derivative"] = first_derivative;
    j["propagation"] = propagation;
    j["derivative_check"] = derivative_check;
    j["equivalence"] = equivalence;
    j["kernel_rank"] = kernel_rank;
    j["eps_divergence"] = eps_divergence;
    j["convergence_slope"] = convergence_slope;
    j["norm_ratio"] = norm_ratio;
    j["exact"] = exact;
    j["min_overlap"] = min_overlap;
    return j;
  }
};

struct DirectionSpec {
  /// "spread", "random" or "list".
  std::string mode = "spread";
  int count = 16;
  std::vector<RealVector> list;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  int dimension = 2;
  int resolution = 32;
  GradientKind kind = GradientKind::full_gradient;
  ViscosityModel viscosity = ViscosityModel::constant(1.0);
  DirectionSpec directions;
  std::vector<double> delta_ladder = geometric_ladder(0.1, 7);
  double delta_max = 0.5;
  int fit_degree = 4;
  double derivative_delta = 1e-3;
  bool derivative_central = true;
  std::vector<int> inverse_eps{2, 4, 8, 16};
  int eps_cell_resolution = 16;
  Forcing forcing = Forcing::standard(2);
  /// Lower bound the naive (mean-viscosity) error must stay above.
  std::optional<double> naive_error_floor;
  /// Directory of a previous `bands` run whose branch data `propagation` reuses.
  std::optional<std::string> bands_input;
  std::optional<std::string> output_dir;
  std::uint64_t seed = 1;
  Tolerances tolerances;

  /// Unit directions per the direction spec (random ones use `seed`).
  std::vector<RealVector> sample_directions() const {
    if (directions.mode == "list") return directions.list;
    if (directions.mode == "random") return random_directions(dimension, directions.count, seed);
    return spread_directions(dimension, directions.count);
  }
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  return j.at(key);
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

inline ViscosityModel parse_viscosity(const nlohmann::json& v, int dim) {
  if (!v.is_object()) throw ConfigError("viscosity must be an object");
  const std::string model = detail::require(v, "model").get<std::string>();
  std::optional<double> floor;
  if (v.contains("floor")) floor = v.at("floor").get<double>();
  if (model == "constant") {
    check_keys(v, {"model", "value", "floor"}, "viscosity");
    return ViscosityModel(ConstantViscosity{require(v, "value").get<double>()}, floor);
  }
  if (model == "layered_cosine") {
    check_keys(v, {"model", "mean", "amplitude", "axis", "frequency", "floor"}, "viscosity");
    const int axis = get_or<int>(v, "axis", 1);
    if (axis < 1 || axis > dim) throw ConfigError("viscosity axis must be in 1.." + std::to_string(dim));
    const int freq = get_or<int>(v, "frequency", 1);
    if (freq < 1) throw ConfigError("viscosity frequency must be positive");
    return ViscosityModel(LayeredCosine{require(v, "mean").get<double>(), require(v, "amplitude").get<double>(),
                                        axis - 1, freq},
                          floor);
  }
  if (model == "product_cosine") {
    check_keys(v, {"model", "mean", "amplitudes", "floor"}, "viscosity");
    auto amps = require(v, "amplitudes").get<std::vector<double>>();
    if (static_cast<int>(amps.size()) != dim) throw ConfigError("product_cosine needs one amplitude per axis");
    return ViscosityModel(ProductCosine{require(v, "mean").get<double>(), std::move(amps)}, floor);
  }
  if (model == "tabulated") {
    check_keys(v, {"model", "n", "values", "floor"}, "viscosity");
    const int n = require(v, "n").get<int>();
    auto values = require(v, "values").get<std::vector<double>>();
    std::size_t expect = 1;
    for (int a = 0; a < dim; ++a) expect *= static_cast<std::size_t>(n);
    if (values.size() != expect) throw ConfigError("tabulated viscosity needs n^d values");
    return ViscosityModel(TabulatedViscosity{dim, n, std::move(values)}, floor);
  }
  throw ConfigError("unknown viscosity model '" + model + "'");
}

inline Forcing parse_forcing(const nlohmann::json& f, int dim) {
  if (f.is_string()) {
    if (f.get<std::string>() != "standard") throw ConfigError("unknown forcing '" + f.get<std::string>() + "'");
    return Forcing::standard(dim);
  }
  if (!f.is_array()) throw ConfigError("forcing must be \"standard\" or a list of terms");
  Forcing out;
  for (const auto& t : f) {
    check_keys(t, {"k", "cos", "sin"}, "forcing term");
    ForcingTerm term;
    const auto k = require(t, "k").get<std::vector<int>>();
    if (static_cast<int>(k.size()) != dim) throw ConfigError("forcing wavevector has wrong dimension");
    for (int a = 0; a < dim; ++a) term.k[a] = k[static_cast<std::size_t>(a)];
    const auto c = get_or<std::vector<double>>(t, "cos", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    const auto s = get_or<std::vector<double>>(t, "sin", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    if (static_cast<int>(c.size()) != dim || static_cast<int>(s.size()) != dim) {
      throw ConfigError("forcing amplitudes have wrong dimension");
    }
    for (int a = 0; a < dim; ++a) {
      term.cos_amplitude[a] = c[static_cast<std::size_t>(a)];
      term.sin_amplitude[a] = s[static_cast<std::size_t>(a)];
    }
    out.terms.push_back(term);
  }
  try {
    out.validate(dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

inline void parse_tolerances(const nlohmann::json& t, Tolerances& tol) {
  const auto defaults = tol.to_json();
  for (auto it = t.begin(); it != t.end(); ++it) {
    if (!defaults.contains(it.key())) throw ConfigError("unknown tolerance '" + it.key() + "'");
  }
  auto set = [&](const char* key, double& slot) {
    if (!t.contains(key)) return;
    const double v = t.at(key).get<double>();
    if (!(v > 0.0)) throw ConfigError(std::string("tolerance '") + key + "' must be positive");
    slot = v;
  };
  set("solver", tol.solver);
  set("symmetry", tol.symmetry);
  set("trace_identity", tol.trace_identity);
  set("weak_form", tol.weak_form);
  set("ellipticity_margin", tol.ellipticity_margin);
  set("corrector_divergence", tol.corrector_divergence);
  set("rayleigh", tol.rayleigh);
  set("zero_mode_transverse", tol.zero_mode_transverse);
  set("imag_q0", tol.imag_q0);
  set("first_derivative", tol.first_derivative);
  set("propagation", tol.propagation);
  set("derivative_check", tol.derivative_check);
  set("equivalence", tol.equivalence);
  set("kernel_rank", tol.kernel_rank);
  set("eps_divergence", tol.eps_divergence);
  set("convergence_slope", tol.convergence_slope);
  set("norm_ratio", tol.norm_ratio);
  set("exact", tol.exact);
  set("min_overlap", tol.min_overlap);
}

}  // namespace detail

/// Parses and validates a configuration document.
inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  detail::check_keys(j,
                     {"schema_version", "dimension", "resolution", "kind", "viscosity", "directions", "delta_ladder",
                      "delta_max", "fit_degree", "derivative_check", "inverse_eps", "eps_cell_resolution", "forcing",
                      "naive_error_floor", "bands_input", "output_dir", "seed", "tolerances"},
                     "configuration");
  RunConfig c;
  try {
    c.schema_version = detail::require(j, "schema_version").get<int>();
    if (c.schema_version != kSchemaVersion) {
      throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    }
    c.dimension = detail::get_or<int>(j, "dimension", 2);
    if (c.dimension != 2 && c.dimension != 3) throw ConfigError("dimension must be 2 or 3");
    c.resolution = detail::get_or<int>(j, "resolution", c.dimension == 2 ? 32 : 8);
    if (c.resolution < 4 || c.resolution % 2 != 0) throw ConfigError("resolution must be even and at least 4");
    try {
      c.kind = gradient_kind_from_string(detail::get_or<std::string>(j, "kind", "full_gradient"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    c.viscosity = detail::parse_viscosity(detail::require(j, "viscosity"), c.dimension);
    if (j.contains("directions")) {
      const auto& d = j.at("directions");
      detail::check_keys(d, {"mode", "count", "list"}, "directions");
      c.directions.mode = detail::get_or<std::string>(d, "mode", "spread");
      c.directions.count = detail::get_or<int>(d, "count", c.dimension == 2 ? 16 : 32);
      if (c.directions.mode == "list") {
        for (const auto& v : detail::require(d, "list")) {
          const auto comps = v.get<std::vector<double>>();
          if (static_cast<int>(comps.size()) != c.dimension) throw ConfigError("direction has wrong dimension");
          RealVector e = Eigen::Map<const RealVector>(comps.data(), c.dimension);
          if (!(e.norm() > 0.0)) throw ConfigError("direction must be nonzero");
          c.directions.list.push_back(e / e.norm());
        }
        c.directions.count = static_cast<int>(c.directions.list.size());
      } else if (c.directions.mode != "spread" && c.directions.mode != "random") {
        throw ConfigError("directions.mode must be spread, random or list");
      }
      if (c.directions.count < 1) throw ConfigError("directions.count must be positive");
    } else {
      c.directions.count = c.dimension == 2 ? 16 : 32;
    }
    if (j.contains("delta_ladder")) {
      const auto& l = j.at("delta_ladder");
      if (l.is_array()) {
        c.delta_ladder = l.get<std::vector<double>>();
      } else {
        detail::check_keys(l, {"start", "levels"}, "delta_ladder");
        c.delta_ladder = geometric_ladder(detail::get_or<double>(l, "start", 0.1), detail::get_or<int>(l, "levels", 7));
      }
    }
    c.delta_max = detail::get_or<double>(j, "delta_max", 0.5);
    for (std::size_t i = 0; i < c.delta_ladder.size(); ++i) {
      if (!(c.delta_ladder[i] > 0.0) || c.delta_ladder[i] > c.delta_max) {
        throw ConfigError("delta_ladder entries must lie in (0, delta_max]");
      }
      if (i > 0 && !(c.delta_ladder[i] < c.delta_ladder[i - 1])) {
        throw ConfigError("delta_ladder must be strictly decreasing");
      }
    }
    c.fit_degree = detail::get_or<int>(j, "fit_degree", 4);
    if (c.fit_degree < 2) throw ConfigError("fit_degree must be at least 2");
    if (static_cast<int>(c.delta_ladder.size()) < c.fit_degree + 1) {
      throw ConfigError("delta_ladder too short for fit_degree");
    }
    if (j.contains("derivative_check")) {
      const auto& d = j.at("derivative_check");
      detail::check_keys(d, {"delta", "scheme"}, "derivative_check");
      c.derivative_delta = detail::get_or<double>(d, "delta", 1e-3);
      const auto scheme = detail::get_or<std::string>(d, "scheme", "central");
      if (scheme != "central" && scheme != "forward") throw ConfigError("derivative_check.scheme must be central or forward");
      c.derivative_central = scheme == "central";
      if (!(c.derivative_delta > 0.0) || c.derivative_delta > c.delta_max) {
        throw ConfigError("derivative_check.delta must lie in (0, delta_max]");
      }
    }
    c.inverse_eps = detail::get_or<std::vector<int>>(j, "inverse_eps", c.inverse_eps);
    for (std::size_t i = 0; i < c.inverse_eps.size(); ++i) {
      if (c.inverse_eps[i] < 1) throw ConfigError("inverse_eps entries must be positive integers");
      if (i > 0 && c.inverse_eps[i] <= c.inverse_eps[i - 1]) throw ConfigError("inverse_eps must be strictly increasing");
    }
    c.eps_cell_resolution = detail::get_or<int>(j, "eps_cell_resolution", 16);
    if (c.eps_cell_resolution < 8 || c.eps_cell_resolution % 2 != 0) {
      throw ConfigError("eps_cell_resolution must be even and at least 8");
    }
    c.forcing = detail::parse_forcing(j.contains("forcing") ? j.at("forcing") : nlohmann::json("standard"), c.dimension);
    if (j.contains("naive_error_floor")) c.naive_error_floor = j.at("naive_error_floor").get<double>();
    if (j.contains("bands_input")) c.bands_input = j.at("bands_input").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
    if (j.contains("tolerances")) detail::parse_tolerances(j.at("tolerances"), c.tolerances);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace stokes_bloch
