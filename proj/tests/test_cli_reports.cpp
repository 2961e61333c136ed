#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "support.hpp"

using namespace sbt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "stokes_bloch_tests" / name;
  fs::remove_all(p);
  return p;
}

RunContext context(const std::string& json, const std::string& name) {
  RunContext ctx;
  ctx.config = parse_config(nlohmann::json::parse(json));
  ctx.out_dir = scratch(name);
  ctx.jobs = 1;
  return ctx;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kLayered = R"({"schema_version": 1, "dimension": 2, "resolution": 16,
  "viscosity": {"model": "layered_cosine", "mean": 1.0, "amplitude": 0.5, "axis": 1},
  "directions": {"mode": "spread", "count": 6}})";

}  // namespace

TEST_CASE("configuration parsing validates its input", "[cli]") {
  const auto ok = parse_config(nlohmann::json::parse(kLayered));
  CHECK(ok.dimension == 2);
  CHECK(ok.resolution == 16);
  CHECK(ok.fit_degree == 4);
  CHECK(ok.delta_ladder.size() == 7);
  CHECK(ok.tolerances.propagation == 1e-5);
  CHECK(ok.sample_directions().size() == 6);

  auto expect_error = [](const std::string& text) {
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(text)), ConfigError);
  };
  expect_error(R"({"dimension": 2, "viscosity": {"model": "constant", "value": 1}})");
  expect_error(R"({"schema_version": 2, "viscosity": {"model": "constant", "value": 1}})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1}, "colour": 3})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1},
                   "tolerances": {"propagation": -1e-5}})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1},
                   "tolerances": {"made_up": 1e-5}})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "layered_cosine", "mean": 1, "amplitude": 0.5, "axis": 3}})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1}, "delta_ladder": [0.1, 0.2]})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1}, "resolution": 15})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1}, "inverse_eps": [4, 2]})");
  expect_error(R"({"schema_version": 1, "viscosity": {"model": "blobs"}})");

  const auto listed = parse_config(nlohmann::json::parse(
      R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 1},
          "directions": {"mode": "list", "list": [[3, 4], [0, 2]]}})"));
  REQUIRE(listed.directions.list.size() == 2);
  CHECK(std::abs(listed.directions.list[0].norm() - 1.0) < 1e-15);
  CHECK(std::abs(listed.directions.list[0][0] - 0.6) < 1e-15);
}

TEST_CASE("tensor command on constant viscosity is all green", "[cli]") {
  auto ctx = context(R"({"schema_version": 1, "dimension": 3, "resolution": 8,
                         "viscosity": {"model": "constant", "value": 3.0}})",
                     "tensor_constant");
  const auto out = cmd_tensor(ctx);
  CHECK(out.code == ExitCode::ok);
  CHECK(out.report.passed());
  const auto doc = read_json(ctx.out_dir / "tensor.json");
  const auto back = tensor_from_json(doc);
  CHECK(max_entry_difference(back.entries, Tensor4::identity(3, 3.0)) < 1e-11);
  CHECK(back.provenance.dim == 3);
  CHECK(back.provenance.resolution == 8);
  CHECK(doc.contains("A[3][3][2][2]"));
  CHECK(doc.at("tolerances").at("symmetry") == 1e-10);
  const auto summary = read_json(ctx.out_dir / "summary.json");
  CHECK(summary.at("status") == "pass");
  CHECK(summary.at("tolerances").at("trace_identity") == 1e-9);
}

TEST_CASE("tensor command converges under resolution doubling", "[cli]") {
  auto a = context(kLayered, "tensor_n16");
  auto b = context(kLayered, "tensor_n32");
  b.config.resolution = 32;
  REQUIRE(cmd_tensor(a).code == ExitCode::ok);
  REQUIRE(cmd_tensor(b).code == ExitCode::ok);
  const auto ta = tensor_from_json(read_json(a.out_dir / "tensor.json"));
  const auto tb = tensor_from_json(read_json(b.out_dir / "tensor.json"));
  CHECK(max_entry_difference(ta.entries, tb.entries) < 1e-6);
}

TEST_CASE("amplitude at the mean is an ellipticity violation", "[cli]") {
  auto ctx = context(R"({"schema_version": 1, "resolution": 16,
                         "viscosity": {"model": "layered_cosine", "mean": 1.0, "amplitude": 1.0}})",
                     "tensor_elliptic");
  for (auto cmd : {cmd_tensor, cmd_bands, cmd_converge}) {
    const auto out = cmd(ctx);
    CHECK(out.code == ExitCode::ellipticity_violated);
    CHECK(read_json(ctx.out_dir / "summary.json").at("status") == "ellipticity_violated");
  }
}

TEST_CASE("an exceeded tolerance gives a nonzero exit and is echoed", "[cli]") {
  auto ctx = context(kLayered, "tensor_strict");
  ctx.config.tolerances.trace_identity = 1e-300;
  const auto out = cmd_tensor(ctx);
  CHECK(out.code == ExitCode::invariant_failed);
  const auto summary = read_json(ctx.out_dir / "summary.json");
  CHECK(summary.at("exit_code") == 1);
  CHECK(summary.at("tolerances").at("trace_identity") == 1e-300);
  bool found = false;
  for (const auto& c : summary.at("checks")) {
    if (c.at("name") == "trace_identity") found = !c.at("passed").get<bool>();
  }
  CHECK(found);
}

TEST_CASE("bands on constant viscosity gives c delta^2 rows", "[cli]") {
  auto ctx = context(R"({"schema_version": 1, "resolution": 8,
                         "viscosity": {"model": "constant", "value": 3.0},
                         "directions": {"mode": "random", "count": 3}})",
                     "bands_constant");
  REQUIRE(cmd_bands(ctx).code == ExitCode::ok);
  const auto t = CsvTable::parse(slurp(ctx.out_dir / "branches.csv"));
  CHECK(t.header() == std::vector<std::string>{"eta_hat_1", "eta_hat_2", "m", "delta", "lambda", "q0_re", "q0_im"});
  CHECK(t.rows().size() == 3 * 7);
  for (const auto& row : t.rows()) {
    const double delta = std::stod(row[3]);
    CHECK(std::abs(std::stod(row[4]) - 3.0 * delta * delta) < 1e-8);
  }
}

TEST_CASE("bands output feeds propagation without loss", "[cli]") {
  auto bands = context(kLayered, "roundtrip_bands");
  REQUIRE(cmd_bands(bands).code == ExitCode::ok);
  auto prop = context(kLayered, "roundtrip_propagation");
  prop.config.bands_input = bands.out_dir.string();
  REQUIRE(cmd_propagation(prop).code == ExitCode::ok);
  auto direct = context(kLayered, "direct_propagation");
  REQUIRE(cmd_propagation(direct).code == ExitCode::ok);

  const auto fits = read_json(bands.out_dir / "summary.json").at("fits");
  const auto via_csv = read_json(prop.out_dir / "propagation.json").at("records");
  const auto in_memory = read_json(direct.out_dir / "propagation.json").at("records");
  REQUIRE(fits.size() == via_csv.size());
  REQUIRE(in_memory.size() == via_csv.size());
  for (std::size_t i = 0; i < fits.size(); ++i) {
    CHECK(fits[i].at("half_lambda2") == via_csv[i].at("half_lambda2"));
    CHECK(fits[i].at("half_q02") == via_csv[i].at("half_q02"));
    CHECK(fits[i].at("phi0") == via_csv[i].at("phi0"));
    CHECK(in_memory[i] == via_csv[i]);
  }
  const auto eq = read_json(prop.out_dir / "propagation.json").at("equivalence");
  CHECK(eq.at("kernel_dim") == 2);
  CHECK(eq.at("residual").get<double>() <= 1e-5);
}

TEST_CASE("degenerate branches surface as WARN lines", "[cli]") {
  auto ctx = context(R"({"schema_version": 1, "dimension": 3, "resolution": 8,
                         "viscosity": {"model": "constant", "value": 1.0},
                         "directions": {"mode": "list", "list": [[0, 0, 1]]}})",
                     "bands_degenerate");
  std::stringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  const auto out = cmd_bands(ctx);
  std::cerr.rdbuf(old);
  CHECK(out.code == ExitCode::ok);
  CHECK(captured.str().find("WARN: direction 1: near-degenerate branches") != std::string::npos);
  const auto warnings = read_json(ctx.out_dir / "summary.json").at("warnings");
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("converge on constant viscosity skips the slope check", "[cli]") {
  auto ctx = context(R"({"schema_version": 1, "viscosity": {"model": "constant", "value": 2.0},
                         "inverse_eps": [1, 2], "eps_cell_resolution": 8})",
                     "converge_constant");
  const auto out = cmd_converge(ctx);
  CHECK(out.code == ExitCode::ok);
  const auto t = CsvTable::parse(slurp(ctx.out_dir / "converge.csv"));
  CHECK(t.header()[0] == "eps");
  CHECK(t.rows().size() == 2);
  CHECK(std::stod(t.rows()[1][t.column("err_u")]) < 1e-12);
  const auto warnings = read_json(ctx.out_dir / "summary.json").at("warnings");
  bool skipped = false;
  for (const auto& w : warnings) skipped = skipped || w.get<std::string>().find("slope check skipped") != std::string::npos;
  CHECK(skipped);
}

TEST_CASE("repeated tensor runs are byte identical", "[cli]") {
  auto a = context(kLayered, "det_a");
  auto b = context(kLayered, "det_b");
  b.jobs = 3;
  cmd_tensor(a);
  cmd_tensor(b);
  CHECK(slurp(a.out_dir / "tensor.json") == slurp(b.out_dir / "tensor.json"));
  CHECK(slurp(a.out_dir / "summary.json") == slurp(b.out_dir / "summary.json"));
}

TEST_CASE("csv cells carry 17 significant digits", "[cli]") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
