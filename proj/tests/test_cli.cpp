#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

const std::string kCli = TPIK_CLI_PATH;
const std::string kDataDir = TPIK_DATA_DIR;

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string command = kCli + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult result;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) {
    result.output += buf.data();
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path fixture_dir() {
  const fs::path dir = fs::temp_directory_path() / "tpik_cli_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_fixture(const std::string& name, const std::string& content) {
  const fs::path file = fixture_dir() / name;
  std::ofstream out(file);
  out << content;
  return file;
}

// Scenario on the shipped planar chain with one joint-limit task;
// `extra_task_fields` lets individual tests break or destabilize it.
fs::path planar_scenario_fixture(const std::string& stem,
                                 const std::string& thresholds,
                                 const std::string& solver,
                                 double gain = 1.5) {
  std::ostringstream hierarchy;
  hierarchy << R"({"tasks": [
    {"id": "jl2", "kind": "set_based", "priority": 1,
     "objective": {"type": "joint_value", "index": 1},
     "thresholds": )" << thresholds << R"(},
    {"id": "ee", "kind": "equality", "priority": 10, "gain": )" << gain
            << R"(, "objective": {"type": "ee_position"}, "desired": "trajectory"}
  ]})";
  const fs::path hierarchy_file =
      write_fixture(stem + "_hierarchy.json", hierarchy.str());

  std::ostringstream scenario;
  scenario << R"({
    "name": ")" << stem << R"(",
    "chain": ")" << kDataDir << R"(/chains/planar2.json",
    "hierarchy": ")" << hierarchy_file.string() << R"(",
    "path": {"waypoints": [{"position": [1.2, 0.9, 0.0]},
                           {"position": [0.9, 1.1, 0.0]}],
             "segment_speed": 0.1},
    "q0": [0.3, 0.9],
    "dt": 0.005,
    "duration": 4.0)" << solver << R"(
  })";
  return write_fixture(stem + ".json", scenario.str());
}

}  // namespace

TEST_CASE("run writes trace and metrics and exits zero") {
  const fs::path scenario = planar_scenario_fixture(
      "ok",
      R"({"physical_min": -3.0, "physical_max": 3.0,
          "safety_lower": -2.5, "safety_upper": 2.5, "epsilon": 0.05})",
      "");
  const fs::path out = fixture_dir() / "ok_out";
  fs::remove_all(out);

  const CliResult result =
      run_cli("run --scenario " + scenario.string() + " --out " + out.string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(out / "trace.csv"));
  CHECK(fs::exists(out / "metrics.json"));
}

TEST_CASE("run rejects inverted safety thresholds with exit 2, naming the task") {
  const fs::path scenario = planar_scenario_fixture(
      "badth",
      R"({"physical_min": -3.0, "physical_max": 3.0,
          "safety_lower": 2.5, "safety_upper": -2.5, "epsilon": 0.05})",
      "");
  const CliResult result = run_cli("run --scenario " + scenario.string() +
                                   " --out " + (fixture_dir() / "bad_out").string());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("jl2") != std::string::npos);
}

TEST_CASE("run reports a numerical abort with exit 3 and the cycle index") {
  const fs::path hierarchy = write_fixture("unstable_hierarchy.json", R"({
    "tasks": [
      {"id": "runaway", "kind": "equality", "priority": 1, "gain": 1e9,
       "objective": {"type": "joint_value", "index": 0}, "desired": 0.5},
      {"id": "ee", "kind": "equality", "priority": 10,
       "objective": {"type": "ee_position"}, "desired": "trajectory"}
    ]
  })");
  std::ostringstream scenario;
  scenario << R"({
    "name": "unstable",
    "chain": ")" << kDataDir << R"(/chains/planar2.json",
    "hierarchy": ")" << hierarchy.string() << R"(",
    "path": {"waypoints": [{"position": [1.2, 0.9, 0.0]},
                           {"position": [0.9, 1.1, 0.0]}],
             "segment_speed": 0.1},
    "q0": [0.3, 0.9],
    "dt": 0.005,
    "duration": 5.0,
    "solver": {"velocity_limit": 1e308}
  })";
  const fs::path file = write_fixture("unstable.json", scenario.str());
  const CliResult result =
      run_cli("run --scenario " + file.string() + " --out " +
              (fixture_dir() / "unstable_out").string());
  CHECK(result.exit_code == 3);
  CHECK(result.output.find("cycle") != std::string::npos);
}

TEST_CASE("validate accepts the shipped case studies") {
  for (const std::string name : {"case1_square.json", "case2_line.json"}) {
    const CliResult result =
        run_cli("validate --scenario " + kDataDir + "/scenarios/" + name);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("valid") != std::string::npos);
  }
}

TEST_CASE("validate rejects a missing scenario with exit 2") {
  const CliResult result = run_cli("validate --scenario /nonexistent.json");
  CHECK(result.exit_code == 2);
}

TEST_CASE("compare emits both legs and the comparison document") {
  const fs::path scenario = planar_scenario_fixture(
      "cmp",
      R"({"physical_min": -3.0, "physical_max": 3.0,
          "safety_lower": -2.5, "safety_upper": 2.5, "epsilon": 0.05})",
      "");
  const fs::path out = fixture_dir() / "cmp_out";
  fs::remove_all(out);

  const CliResult result = run_cli("compare --scenario " + scenario.string() +
                                   " --out " + out.string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(out / "without" / "trace.csv"));
  CHECK(fs::exists(out / "with" / "trace.csv"));
  CHECK(fs::exists(out / "comparison.json"));
}

TEST_CASE("compare on a hierarchy without set-based tasks reports zero deltas") {
  const fs::path hierarchy = write_fixture("eq_only_hierarchy.json", R"({
    "tasks": [{"id": "ee", "kind": "equality", "priority": 1,
               "objective": {"type": "ee_position"}, "desired": "trajectory"}]
  })");
  std::ostringstream scenario;
  scenario << R"({
    "name": "eq_only",
    "chain": ")" << kDataDir << R"(/chains/planar2.json",
    "hierarchy": ")" << hierarchy.string() << R"(",
    "path": {"waypoints": [{"position": [1.2, 0.9, 0.0]},
                           {"position": [1.0, 1.0, 0.0]}],
             "segment_speed": 0.1},
    "q0": [0.3, 0.9],
    "dt": 0.005,
    "duration": 2.0
  })";
  const fs::path file = write_fixture("eq_only.json", scenario.str());
  const fs::path out = fixture_dir() / "eq_only_out";
  fs::remove_all(out);

  const CliResult result =
      run_cli("compare --scenario " + file.string() + " --out " + out.string());
  CHECK(result.exit_code == 0);

  std::ifstream cmp(out / "comparison.json");
  std::stringstream body;
  body << cmp.rdbuf();
  CHECK(body.str().find("\"delta\": 0") != std::string::npos);
}

TEST_CASE("fd-check passes on the shipped chains") {
  const CliResult arm =
      run_cli("fd-check --chain " + kDataDir + "/chains/arm7.json --fd-samples 100");
  CHECK(arm.exit_code == 0);
  CHECK(arm.output.find("max relative error") != std::string::npos);

  const CliResult planar = run_cli("fd-check --chain " + kDataDir +
                                   "/chains/planar2.json --rows position_xy");
  CHECK(planar.exit_code == 0);
}

TEST_CASE("fd-check reports larger errors for coarser steps") {
  const auto parse_error = [](const std::string& output) {
    const std::string key = "max relative error ";
    const size_t pos = output.find(key);
    REQUIRE(pos != std::string::npos);
    return std::stod(output.substr(pos + key.size()));
  };
  const CliResult fine = run_cli("fd-check --chain " + kDataDir +
                                 "/chains/planar2.json --rows position_xy");
  const CliResult coarse = run_cli("fd-check --chain " + kDataDir +
                                   "/chains/planar2.json --rows position_xy "
                                   "--fd-delta 1e-2");
  CHECK(parse_error(coarse.output) > parse_error(fine.output));
  CHECK(coarse.exit_code == 4);  // coarse steps land over the tolerance
}

TEST_CASE("run applies dt and duration overrides") {
  const fs::path scenario = planar_scenario_fixture(
      "override",
      R"({"physical_min": -3.0, "physical_max": 3.0,
          "safety_lower": -2.5, "safety_upper": 2.5, "epsilon": 0.05})",
      "");
  const fs::path out = fixture_dir() / "override_out";
  fs::remove_all(out);

  const CliResult result =
      run_cli("run --scenario " + scenario.string() + " --out " + out.string() +
              " --dt 0.01 --duration 2.0");
  CHECK(result.exit_code == 0);

  std::ifstream trace(out / "trace.csv");
  size_t rows = 0;
  for (std::string line; std::getline(trace, line);) ++rows;
  CHECK(rows == 202);  // header + 2.0 s at 10 ms + initial record
}

TEST_CASE("unknown flags exit with a usage error, not a crash") {
  const CliResult result = run_cli("run --bogus");
  CHECK(result.exit_code != 0);
  CHECK(result.exit_code != 3);
}
