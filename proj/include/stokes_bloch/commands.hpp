#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stokes_bloch/bloch.hpp"
#include "stokes_bloch/cell_problem.hpp"
#include "stokes_bloch/config.hpp"
#include "stokes_bloch/eps_validation.hpp"
#include "stokes_bloch/report.hpp"
#include "stokes_bloch/tensor_lab.hpp"

namespace stokes_bloch {

/// Everything a command needs besides the configuration file itself.
struct RunContext {
  RunConfig config;
  std::filesystem::path out_dir;
  int jobs = 1;
};

struct CommandOutcome {
  ExitCode code = ExitCode::ok;
  Report report;
};

/// Second-order data of one branch along one direction, as exported by `bands`.
struct BranchRecord {
  RealVector direction;
  /// Zero-based branch index.
  int branch = 0;
  RealVector phi0;
  std::vector<double> deltas;
  std::vector<double> lambdas;
  std::vector<double> q0_re;
  std::vector<double> q0_im;
  PolynomialFit lambda_fit;
  PolynomialFit q0_fit;

  PropagationRecord propagation() const {
    return PropagationRecord{direction, branch, phi0, lambda_fit.coefficients.at(1), q0_fit.coefficients.at(1)};
  }
};

namespace detail {

inline Json config_echo(const RunConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  j["dimension"] = c.dimension;
  j["resolution"] = c.resolution;
  j["kind"] = to_string(c.kind);
  j["viscosity"] = c.viscosity.describe();
  j["viscosity_floor"] = c.viscosity.floor();
  j["seed"] = c.seed;
  return j;
}

inline Json summary_skeleton(const std::string& command, const RunContext& ctx) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["status"] = "pass";
  j["exit_code"] = 0;
  j["config"] = config_echo(ctx.config);
  return j;
}

inline void finish_summary(Json& summary, const CommandOutcome& outcome, const RunContext& ctx) {
  summary["status"] = outcome.code == ExitCode::ok ? "pass" : to_string(outcome.code);
  summary["exit_code"] = static_cast<int>(outcome.code);
  summary["checks"] = outcome.report.checks_json();
  summary["warnings"] = outcome.report.warnings();
  summary["tolerances"] = ctx.config.tolerances.to_json();
}

/// Runs `body`, mapping library errors to exit codes, then writes summary.json.
template <typename Body>
CommandOutcome run_command(const std::string& command, const RunContext& ctx, Body&& body) {
  CommandOutcome outcome;
  Json summary = summary_skeleton(command, ctx);
  std::filesystem::create_directories(ctx.out_dir);
  try {
    body(outcome.report, summary);
    outcome.code = outcome.report.passed() ? ExitCode::ok : ExitCode::invariant_failed;
  } catch (const EllipticityError& e) {
    outcome.code = ExitCode::ellipticity_violated;
    summary["error"] = e.what();
  } catch (const SolverError& e) {
    outcome.code = ExitCode::solver_failed;
    summary["error"] = e.what();
  } catch (const ConfigError& e) {
    outcome.code = ExitCode::config_error;
    summary["error"] = e.what();
  }
  finish_summary(summary, outcome, ctx);
  write_json(ctx.out_dir / "summary.json", summary);
  return outcome;
}

inline CellSolverOptions cell_options(const RunContext& ctx) {
  CellSolverOptions o;
  o.solver.tolerance = ctx.config.tolerances.solver;
  o.jobs = ctx.jobs;
  return o;
}

/// Directions for the ellipticity scan: the configured set plus a dense spread.
inline std::vector<RealVector> ellipticity_directions(const RunConfig& c) {
  auto dirs = c.sample_directions();
  const auto extra = spread_directions(c.dimension, c.dimension == 2 ? 180 : 400);
  dirs.insert(dirs.end(), extra.begin(), extra.end());
  return dirs;
}

/// Symmetry, trace, weak-form, divergence and ellipticity checks on a tensor.
inline void check_tensor(const Homogenization& h, const SampledViscosity& mu, const RunConfig& c, Report& rep) {
  const Tolerances& tol = c.tolerances;
  const Tensor4& A = h.tensor.entries;
  const double scale = std::max(1.0, A.max_abs());
  double worst_residual = 0.0;
  for (double r : h.tensor.provenance.solver_residuals) worst_residual = std::max(worst_residual, r);
  rep.le("cell_solver_residual", worst_residual, tol.solver);
  rep.le("corrector_divergence", max_corrector_divergence(h.cells), tol.corrector_divergence);
  rep.le("simple_symmetry", A.simple_symmetry_violation() / scale, tol.symmetry);
  if (c.kind == GradientKind::symmetrized) {
    rep.le("full_symmetry", A.full_symmetry_violation() / scale, tol.symmetry);
  } else {
    rep.le("trace_identity", trace_identity_residual(A, mu.mean()), tol.trace_identity);
  }
  rep.le("weak_form_discrepancy", h.weak_form_discrepancy, tol.weak_form);
  // The symmetrized form only controls half the viscosity on transverse fields.
  const double bound = mu.floor * (c.kind == GradientKind::symmetrized ? 0.5 : 1.0);
  const double lh = legendre_hadamard_min(A, ellipticity_directions(c));
  rep.ge("legendre_hadamard_ratio", lh / bound, 1.0 - tol.ellipticity_margin);
}

inline TrackOptions track_options(const RunContext& ctx) {
  TrackOptions o;
  o.bloch.delta_max = ctx.config.delta_max;
  o.min_overlap = ctx.config.tolerances.min_overlap;
  o.jobs = ctx.jobs;
  return o;
}

inline std::vector<BranchRecord> records_from_branch(const BlochBranch& br) {
  std::vector<BranchRecord> out;
  for (int m = 0; m < br.count(); ++m) {
    BranchRecord r;
    r.direction = br.direction;
    r.branch = m;
    r.phi0 = br.phi0.at(static_cast<std::size_t>(m));
    for (const auto& s : br.samples[static_cast<std::size_t>(m)]) {
      r.deltas.push_back(s.delta);
      r.lambdas.push_back(s.lambda);
      r.q0_re.push_back(s.q0.real());
      r.q0_im.push_back(s.q0.imag());
    }
    r.lambda_fit = br.lambda_fits.at(static_cast<std::size_t>(m));
    r.q0_fit = br.q0_fits.at(static_cast<std::size_t>(m));
    out.push_back(std::move(r));
  }
  return out;
}

inline Json fit_json(const BranchRecord& r) {
  Json j;
  j["direction"] = vector_json(r.direction);
  j["branch"] = r.branch + 1;
  j["phi0"] = vector_json(r.phi0);
  j["lambda1"] = r.lambda_fit.coefficients.at(0);
  j["half_lambda2"] = r.lambda_fit.coefficients.at(1);
  j["q01"] = r.q0_fit.coefficients.at(0);
  j["half_q02"] = r.q0_fit.coefficients.at(1);
  j["lambda_coefficients"] = r.lambda_fit.coefficients;
  j["q0_coefficients"] = r.q0_fit.coefficients;
  j["lambda_condition_number"] = r.lambda_fit.condition_number;
  j["lambda_fit_residual"] = r.lambda_fit.residual;
  j["q0_fit_residual"] = r.q0_fit.residual;
  return j;
}

inline std::vector<std::string> branch_csv_header(int dim) {
  std::vector<std::string> h;
  for (int a = 0; a < dim; ++a) h.push_back("eta_hat_" + std::to_string(a + 1));
  for (const char* c : {"m", "delta", "lambda", "q0_re", "q0_im"}) h.emplace_back(c);
  return h;
}

inline void add_branch_rows(CsvTable& t, const BranchRecord& r) {
  for (std::size_t j = 0; j < r.deltas.size(); ++j) {
    std::vector<std::string> row;
    for (Eigen::Index a = 0; a < r.direction.size(); ++a) row.push_back(format_double(r.direction[a]));
    row.push_back(std::to_string(r.branch + 1));
    row.push_back(format_double(r.deltas[j]));
    row.push_back(format_double(r.lambdas[j]));
    row.push_back(format_double(r.q0_re[j]));
    row.push_back(format_double(r.q0_im[j]));
    t.add_row(std::move(row));
  }
}

/// Branch sweep over all configured directions with the per-branch checks.
/// Returns the records; the fit JSON and derivative checks go into `summary`.
inline std::vector<BranchRecord> sweep_branches(const RunContext& ctx, const SampledViscosity& mu, Report& rep,
                                                Json& summary, const CellSolution* cells) {
  const RunConfig& c = ctx.config;
  const Tolerances& tol = c.tolerances;
  const PaddedCoefficient pc(mu.field);
  const TrackOptions topts = track_options(ctx);
  std::vector<BranchRecord> records;
  double rayleigh = 0.0, zero_transverse = 0.0, imag_q0 = 0.0, first = 0.0;
  double deriv_phi = 0.0, deriv_q = 0.0;
  Json derivative_checks = Json::array();
  const auto dirs = c.sample_directions();
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    BlochBranch br = track_branches(pc, dirs[i], c.delta_ladder, c.kind, topts);
    fit_derivatives(br, c.fit_degree);
    for (const auto& w : br.warnings) rep.warn("direction " + std::to_string(i + 1) + ": " + w);
    if (br.degenerate) rep.warn("direction " + std::to_string(i + 1) + ": degenerate branch crossing");
    if (br.near_degenerate) rep.warn("direction " + std::to_string(i + 1) + ": near-degenerate branches");
    rayleigh = std::max(rayleigh, br.max_rayleigh_deviation);
    zero_transverse = std::max(zero_transverse, br.max_zero_mode_transverse);
    imag_q0 = std::max(imag_q0, br.max_imag_q0);
    for (int m = 0; m < br.count(); ++m) {
      first = std::max(first, std::abs(br.lambda1(m)) / std::max(1.0, std::abs(br.half_lambda2(m))));
    }
    auto recs = records_from_branch(br);
    if (cells != nullptr) {
      for (const auto& r : recs) {
        if (br.near_degenerate) {
          rep.warn("direction " + std::to_string(i + 1) + ": derivative check skipped (near-degenerate branches)");
          break;
        }
        const DerivativeCheck chk = check_first_order_eigenfunction(pc, r.direction, r.phi0, *cells,
                                                                    c.derivative_delta, c.derivative_central,
                                                                    r.branch, topts.bloch);
        deriv_phi = std::max(deriv_phi, chk.phi_residual);
        deriv_q = std::max(deriv_q, chk.q_residual);
        Json j;
        j["direction"] = vector_json(r.direction);
        j["branch"] = r.branch + 1;
        j["delta"] = chk.delta;
        j["scheme"] = chk.central ? "central" : "forward";
        j["phi_residual"] = chk.phi_residual;
        j["q_residual"] = chk.q_residual;
        j["phase_drift"] = chk.phase_drift;
        derivative_checks.push_back(j);
      }
    }
    for (auto& r : recs) records.push_back(std::move(r));
  }
  rep.le("rayleigh_deviation", rayleigh, tol.rayleigh);
  rep.le("zero_mode_transverse", zero_transverse, tol.zero_mode_transverse);
  rep.le("lambda_first_derivative", first, tol.first_derivative);
  if (imag_q0 > tol.imag_q0) rep.warn("imaginary part of q0 reaches " + format_double(imag_q0));
  summary["max_imag_q0"] = imag_q0;
  if (cells != nullptr && !derivative_checks.empty()) {
    rep.le("eigenfunction_derivative_phi", deriv_phi, tol.derivative_check);
    rep.le("eigenfunction_derivative_q", deriv_q, tol.derivative_check);
    summary["derivative_checks"] = derivative_checks;
  }
  summary["fit_degree"] = c.fit_degree;
  Json fits = Json::array();
  for (const auto& r : records) fits.push_back(fit_json(r));
  summary["fits"] = fits;
  return records;
}

}  // namespace detail

/// Reads the branch data written by `bands` (branches.csv and summary.json)
/// and refits the derivatives.
inline std::vector<BranchRecord> load_branch_records(const std::filesystem::path& dir, int dim) {
  std::ifstream in(dir / "branches.csv", std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + (dir / "branches.csv").string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const CsvTable t = CsvTable::parse(buf.str());
  if (t.header() != detail::branch_csv_header(dim)) throw ConfigError("branches.csv has unexpected columns");
  Json summary;
  try {
    summary = read_json(dir / "summary.json");
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read bands summary: ") + e.what());
  }
  if (summary.value("command", "") != "bands") throw ConfigError("bands_input does not hold a bands run");
  const int degree = summary.at("fit_degree").get<int>();
  const Json& fits = summary.at("fits");
  std::vector<BranchRecord> out;
  std::vector<std::string> key;
  for (const auto& row : t.rows()) {
    std::vector<std::string> k(row.begin(), row.begin() + dim + 1);
    if (out.empty() || k != key) {
      key = k;
      BranchRecord r;
      r.direction = RealVector(dim);
      for (int a = 0; a < dim; ++a) r.direction[a] = std::stod(row[static_cast<std::size_t>(a)]);
      r.branch = std::stoi(row[static_cast<std::size_t>(dim)]) - 1;
      out.push_back(std::move(r));
    }
    BranchRecord& r = out.back();
    r.deltas.push_back(std::stod(row[static_cast<std::size_t>(dim + 1)]));
    r.lambdas.push_back(std::stod(row[static_cast<std::size_t>(dim + 2)]));
    r.q0_re.push_back(std::stod(row[static_cast<std::size_t>(dim + 3)]));
    r.q0_im.push_back(std::stod(row[static_cast<std::size_t>(dim + 4)]));
  }
  if (out.size() != fits.size()) throw ConfigError("branches.csv and summary.json disagree on branch count");
  for (std::size_t i = 0; i < out.size(); ++i) {
    BranchRecord& r = out[i];
    if (fits[i].at("branch").get<int>() != r.branch + 1) throw ConfigError("branch order mismatch in bands output");
    r.phi0 = vector_from_json(fits[i].at("phi0"));
    r.lambda_fit = fit_pinned_polynomial(r.deltas, r.lambdas, degree);
    r.q0_fit = fit_pinned_polynomial(r.deltas, r.q0_re, degree);
  }
  return out;
}

/// `tensor`: homogenized tensor with its invariant report.
inline CommandOutcome cmd_tensor(const RunContext& ctx) {
  return detail::run_command("tensor", ctx, [&](Report& rep, Json& summary) {
    const RunConfig& c = ctx.config;
    const SampledViscosity mu = sample_viscosity(c.viscosity, CellGrid(c.dimension, c.resolution));
    const Homogenization h = homogenize(mu, c.kind, detail::cell_options(ctx), c.viscosity.describe());
    detail::check_tensor(h, mu, c, rep);
    Json doc = tensor_json(h.tensor);
    doc["tolerances"] = c.tolerances.to_json();
    write_json(ctx.out_dir / "tensor.json", doc);
    summary["mean_viscosity"] = mu.mean();
  });
}

/// `bands`: bottom Bloch branches per direction, their fits and checks.
inline CommandOutcome cmd_bands(const RunContext& ctx) {
  return detail::run_command("bands", ctx, [&](Report& rep, Json& summary) {
    const RunConfig& c = ctx.config;
    const SampledViscosity mu = sample_viscosity(c.viscosity, CellGrid(c.dimension, c.resolution));
    const CellSolution cells = solve_cell_problems(mu, c.kind, detail::cell_options(ctx));
    const auto records = detail::sweep_branches(ctx, mu, rep, summary, &cells);
    CsvTable t(detail::branch_csv_header(c.dimension));
    for (const auto& r : records) detail::add_branch_rows(t, r);
    write_text(ctx.out_dir / "branches.csv", t.str());
  });
}

/// `propagation`: propagation residuals against the cell tensor, Bloch
/// reconstruction and the equivalence report.
inline CommandOutcome cmd_propagation(const RunContext& ctx) {
  return detail::run_command("propagation", ctx, [&](Report& rep, Json& summary) {
    const RunConfig& c = ctx.config;
    const Tolerances& tol = c.tolerances;
    const int d = c.dimension;
    const SampledViscosity mu = sample_viscosity(c.viscosity, CellGrid(d, c.resolution));
    const Homogenization h = homogenize(mu, c.kind, detail::cell_options(ctx), c.viscosity.describe());
    const Tensor4& A = h.tensor.entries;
    std::vector<BranchRecord> branches;
    if (c.bands_input) {
      branches = load_branch_records(*c.bands_input, d);
      summary["bands_input"] = *c.bands_input;
    } else {
      Json scratch;
      branches = detail::sweep_branches(ctx, mu, rep, scratch, nullptr);
    }
    std::vector<PropagationRecord> records;
    for (const auto& b : branches) records.push_back(b.propagation());

    double vec = 0.0, lam = 0.0, q0 = 0.0, coupling = 0.0;
    Json recs = Json::array();
    std::map<std::vector<double>, std::vector<PropagationRecord>> by_direction;
    for (const auto& r : records) {
      const PropagationResidual res = propagation_residual(r, A);
      vec = std::max(vec, res.vector_residual);
      lam = std::max(lam, res.lambda_identity);
      q0 = std::max(q0, res.q0_identity);
      by_direction[std::vector<double>(r.direction.data(), r.direction.data() + d)].push_back(r);
      Json j;
      j["direction"] = vector_json(r.direction);
      j["branch"] = r.branch + 1;
      j["phi0"] = vector_json(r.phi0);
      j["half_lambda2"] = r.half_lambda2;
      j["half_q02"] = r.half_q02;
      j["m_phi0"] = vector_json(res.m_phi0);
      j["vector_residual"] = res.vector_residual;
      j["lambda_identity"] = res.lambda_identity;
      j["q0_identity"] = res.q0_identity;
      recs.push_back(j);
    }
    for (const auto& [dir, group] : by_direction) coupling = std::max(coupling, cross_branch_coupling(group, A));
    rep.le("propagation_residual", vec, tol.propagation);
    rep.le("lambda_identity", lam, tol.propagation);
    rep.le("q0_identity", q0, tol.propagation);
    if (d == 3) rep.le("cross_branch_coupling", coupling, tol.propagation);

    const auto basis_size = static_cast<int>(symmetric_tensor_basis(d, c.kind).size());
    if (static_cast<int>(records.size()) * d < basis_size) {
      rep.warn("too few directions to determine the tensor modulo its kernel (" +
               std::to_string(records.size() * static_cast<std::size_t>(d)) + " equations, " +
               std::to_string(basis_size) + " unknowns)");
    }
    const Reconstruction rec = reconstruct_from_bloch(records, d, c.kind, {tol.kernel_rank});
    const int enumerated = 1 + kernel_condition_dimension(d, c.kind);
    if (rec.rank_deficient) rep.warn("reconstruction is rank deficient beyond the expected kernel");
    rep.eq("reconstruction_kernel_dim", rec.kernel_dim, enumerated);

    Json equivalence;
    double eq_residual = 0.0;
    if (c.kind == GradientKind::symmetrized) {
      const SymmetricDecomposition dec = decompose_difference_sym(A, rec.tensor, tol.symmetry);
      equivalence["c"] = dec.c;
      eq_residual = dec.residual;
    } else {
      const EquivalenceDecomposition dec = decompose_difference(A, rec.tensor, tol.symmetry);
      equivalence["c"] = dec.c;
      eq_residual = dec.residual;
    }
    equivalence["residual"] = eq_residual;
    equivalence["kernel_dim"] = rec.kernel_dim;
    rep.le("equivalence_residual", eq_residual, tol.equivalence);
    const SymbolEquivalence sym = symbol_equivalence(A, rec.tensor, 64, c.seed, tol.equivalence);
    rep.le("symbol_deviation", sym.max_deviation / std::max(1.0, A.max_abs()), tol.equivalence);

    Json reconstruction;
    reconstruction["tensor"] = tensor_entries_json(rec.tensor);
    reconstruction["kernel_dim"] = rec.kernel_dim;
    reconstruction["expected_kernel_dim"] = rec.expected_kernel_dim;
    reconstruction["enumerated_kernel_dim"] = enumerated;
    reconstruction["rank_deficient"] = rec.rank_deficient;
    reconstruction["singular_values"] = rec.singular_values;
    reconstruction["residual"] = rec.residual;

    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["cell_tensor"] = tensor_json(h.tensor);
    doc["records"] = recs;
    doc["max_propagation_residual"] = vec;
    doc["reconstruction"] = reconstruction;
    doc["equivalence"] = equivalence;
    doc["symbol_equivalence"] = {{"c", sym.c}, {"max_deviation", sym.max_deviation}, {"equivalent", sym.equivalent}};
    doc["tolerances"] = tol.to_json();
    write_json(ctx.out_dir / "propagation.json", doc);
    summary["equivalence"] = equivalence;
  });
}

/// `converge`: oscillating-coefficient solves against the homogenized and
/// mean-viscosity solutions over the eps ladder.
inline CommandOutcome cmd_converge(const RunContext& ctx) {
  return detail::run_command("converge", ctx, [&](Report& rep, Json& summary) {
    const RunConfig& c = ctx.config;
    const Tolerances& tol = c.tolerances;
    if (c.inverse_eps.size() < 2) throw ConfigError("inverse_eps needs at least two entries");
    CellSolverOptions copts = detail::cell_options(ctx);
    copts.jobs = 1;
    const ConvergenceReport cr = convergence_study(c.viscosity, c.forcing, c.kind, c.dimension, c.inverse_eps,
                                                   c.eps_cell_resolution, copts, ctx.jobs);
    CsvTable t({"eps", "err_u", "err_p", "err_naive", "norm_u", "norm_p", "max_divergence", "iterations"});
    double worst_residual = 0.0, max_err = 0.0, min_naive = INFINITY;
    for (const auto& r : cr.rows) {
      t.add_row({format_double(r.eps), format_double(r.err_u), format_double(r.err_p), format_double(r.err_naive),
                 format_double(r.norm_u), format_double(r.norm_p), format_double(r.max_divergence),
                 std::to_string(r.iterations)});
      worst_residual = std::max(worst_residual, r.solver_residual);
      max_err = std::max(max_err, r.err_u);
      min_naive = std::min(min_naive, r.err_naive);
    }
    write_text(ctx.out_dir / "converge.csv", t.str());
    for (const auto& w : cr.warnings) rep.warn(w);
    rep.le("eps_solver_residual", worst_residual, tol.solver);
    rep.le("eps_divergence", cr.max_divergence, tol.eps_divergence);
    rep.le("norm_ratio_u", cr.norm_ratio_u, tol.norm_ratio);
    rep.le("norm_ratio_p", cr.norm_ratio_p, tol.norm_ratio);
    const bool exact = max_err <= tol.exact;
    if (exact) {
      rep.warn("homogenized solution exact to " + format_double(max_err) + "; slope check skipped");
    } else {
      double worst_ratio = 0.0;
      for (std::size_t i = 1; i < cr.rows.size(); ++i) {
        worst_ratio = std::max(worst_ratio, cr.rows[i].err_u / cr.rows[i - 1].err_u);
      }
      rep.le("err_u_step_ratio", worst_ratio, 1.0 - 1e-12);
      rep.ge("slope_u", cr.slope_u, tol.convergence_slope);
    }
    if (c.naive_error_floor) rep.ge("naive_error_min", min_naive, *c.naive_error_floor);
    summary["slope_u"] = cr.slope_u;
    summary["slope_p"] = cr.slope_p;
    summary["monotone"] = cr.monotone;
    summary["norm_ratio_u"] = cr.norm_ratio_u;
    summary["norm_ratio_p"] = cr.norm_ratio_p;
    summary["naive_error_min"] = min_naive;
    summary["homogenized_tensor"] = tensor_entries_json(cr.tensor);
  });
}

}  // namespace stokes_bloch
