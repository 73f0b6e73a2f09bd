#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "rdbounds/cli.hpp"
#include "rdbounds/scenario_io.hpp"

using namespace rdb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir()
  {
    path = fs::temp_directory_path() / fs::path("rdbounds_test_" + std::to_string(::getpid()) +
                                                "_" + std::to_string(counter()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter()
  {
    static int n = 0;
    return n++;
  }
  std::string file(const std::string& name, const std::string& content) const
  {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
  std::string out_dir() const { return (path / "out").string(); }
};

const char* kReferenceScn = R"([domain]
unit_square n=8

[coefficients]
a0 = 1.0
rho0 = 1.0
alpha0 = 1.0

[loads]
f = 1.0
F = 0.0
G = 0.0

[uncertainty]
delta1 = 0.1
delta2 = 0.1
delta3 = 0.1

[bounds]
beta_lower1 = 1.0
beta_upper1 = 1.0
beta_lower2 = 1.0
beta_upper2 = 1.0
beta_lower3 = 1.0
beta_upper3 = 1.0
)";

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args)
{
  std::vector<const char*> argv = {"rdbounds"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun result;
  result.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

} // namespace

TEST_CASE("scenario parsing")
{
  const RawScenario raw = parse_scenario_text(kReferenceScn);
  CHECK(raw.at("n") == "8");
  CHECK(raw.at("delta2") == "0.1");

  CHECK_THROWS_WITH_AS(parse_scenario_text("[domain]\nbogus = 1\n"), doctest::Contains("bogus"),
                       ScenarioError);
  CHECK_THROWS_WITH_AS(parse_scenario_text("[nope]\n"), doctest::Contains("unknown section"),
                       ScenarioError);
  CHECK_THROWS_WITH_AS(parse_scenario_text("a0 = 1\n"), doctest::Contains("line 1"),
                       ScenarioError);

  const Scenario s = build_scenario(raw, "");
  CHECK(s.mesh->triangle_count() == 128);
  CHECK(s.budget.delta[0] == 0.1);
  CHECK(s.embedding.c3 == 1.0); // defaults fill the embedding section
}

TEST_CASE("scenario overrides")
{
  RawScenario raw = parse_scenario_text(kReferenceScn);
  apply_override(raw, "delta", "0.2");
  CHECK(raw.at("delta1") == "0.2");
  CHECK(raw.at("delta3") == "0.2");
  apply_override(raw, "n", "4");
  CHECK(build_scenario(raw, "").mesh->triangle_count() == 32);
  CHECK_THROWS_WITH_AS(apply_override(raw, "frobnicate", "1"), doctest::Contains("frobnicate"),
                       ScenarioError);
}

TEST_CASE("matrix and file-backed coefficients")
{
  TempDir dir;
  // anisotropic symmetric a0 from three numbers
  RawScenario raw = parse_scenario_text(kReferenceScn);
  raw["a0"] = "2.0 0.1 1.0";
  raw["beta_lower1"] = "0.9";
  raw["beta_upper1"] = "2.1";
  const Scenario s = build_scenario(raw, "");
  CHECK(s.mean.a[0](0, 0) == 2.0);
  CHECK(s.mean.a[0](1, 0) == 0.1);

  // per-cell reaction from a data file
  std::ostringstream body;
  body << "values 128\n";
  for (int i = 0; i < 128; ++i) body << 1.0 + 0.001 * i << "\n";
  dir.file("rho.dat", body.str());
  RawScenario raw2 = parse_scenario_text(kReferenceScn);
  raw2["rho0"] = "file:rho.dat";
  raw2.erase("beta_lower2");
  raw2.erase("beta_upper2");
  const Scenario s2 = build_scenario(raw2, dir.path.string());
  CHECK(s2.mean.rho[5] == doctest::Approx(1.005).epsilon(1e-15));
  CHECK(s2.beta_upper[1] == doctest::Approx(1.127).epsilon(1e-12));

  RawScenario bad = parse_scenario_text(kReferenceScn);
  bad["a0"] = "1.0 0.2 0.3 1.0"; // asymmetric 4-number form
  CHECK_THROWS_AS(build_scenario(bad, ""), ScenarioError);
}

TEST_CASE("scenario with a mesh file")
{
  TempDir dir;
  dir.file("square.mesh", R"(nodes 4
0 0
1 0
1 1
0 1
triangles 2
0 1 2
0 2 3
edges 4
0 1 2
1 2 3
2 3 2
3 0 1
)");
  const std::string scn = dir.file("custom.scn", "[domain]\nmesh = square.mesh\n"
                                                 "[uncertainty]\ndelta1 = 0.1\n");
  const CliRun r = run({"bounds", scn, "--out", dir.out_dir()});
  CHECK(r.code == 0);
  std::ifstream in(fs::path(dir.out_dir()) / "report.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["scenario"]["domain"].get<std::string>() == "mesh square.mesh");
  CHECK(j["scenario"]["mesh"]["triangles"].get<int>() == 2);
  CHECK(j["upper"]["normalized"].get<double>() > 0.0);
}

TEST_CASE("bounds command writes the reference report")
{
  TempDir dir;
  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun r = run({"bounds", scn, "--out", dir.out_dir()});
  CHECK(r.code == 0);
  CHECK(r.out.find("0.0101010101") != std::string::npos);
  CHECK(r.out.find("0.012345679") != std::string::npos);

  std::ifstream in(fs::path(dir.out_dir()) / "report.json");
  REQUIRE(in.good());
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["lower"]["normalized"].get<double>() == doctest::Approx(0.01 / 0.99).epsilon(1e-12));
  CHECK(j["upper"]["normalized"].get<double>() == doctest::Approx(0.01 / 0.81).epsilon(1e-12));
  CHECK_FALSE(j.contains("oracle"));
  CHECK(fs::exists(fs::path(dir.out_dir()) / "u0.field"));
  CHECK(fs::exists(fs::path(dir.out_dir()) / "witness.field"));
}

TEST_CASE("sample command adds oracle fields")
{
  TempDir dir;
  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun r = run({"sample", scn, "--out", dir.out_dir(), "--samples", "3", "--seed", "5"});
  CHECK(r.code == 0);
  std::ifstream in(fs::path(dir.out_dir()) / "report.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["oracle"]["samples"].get<int>() == 12);
  CHECK(j["oracle"]["empirical_normalized"].get<double>() > 0.0);
}

TEST_CASE("overrides commute with editing the file")
{
  TempDir dir;
  const std::string base = dir.file("base.scn", kReferenceScn);
  std::string edited_text = kReferenceScn;
  const auto pos = edited_text.find("delta1 = 0.1");
  edited_text.replace(pos, 12, "delta1 = 0.2");
  const std::string edited = dir.file("edited.scn", edited_text);

  const CliRun with_override =
      run({"bounds", base, "--out", (dir.path / "a").string(), "--set", "delta1=0.2"});
  const CliRun with_edit = run({"bounds", edited, "--out", (dir.path / "b").string()});
  CHECK(with_override.code == 0);
  CHECK(with_edit.code == 0);

  std::ifstream ja(dir.path / "a" / "report.json"), jb(dir.path / "b" / "report.json");
  CHECK(nlohmann::json::parse(ja) == nlohmann::json::parse(jb));
}

TEST_CASE("zero-uncertainty override collapses the bounds")
{
  TempDir dir;
  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun r = run({"bounds", scn, "--out", dir.out_dir(), "--set", "delta1=0", "--set",
                        "delta2=0", "--set", "delta3=0"});
  CHECK(r.code == 0);
  std::ifstream in(fs::path(dir.out_dir()) / "report.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["lower"]["normalized"].get<double>() == 0.0);
  CHECK(j["upper"]["normalized"].get<double>() == 0.0);
  CHECK(j["ordering"]["ratio"].get<double>() == 1.0);
}

TEST_CASE("solve then report reproduces the printed norms")
{
  TempDir dir;
  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun solved = run({"solve", scn, "--out", dir.out_dir()});
  CHECK(solved.code == 0);
  CHECK(fs::exists(fs::path(dir.out_dir()) / "u0.field"));

  const CliRun rendered = run({"report", (fs::path(dir.out_dir()) / "solution.json").string()});
  CHECK(rendered.code == 0);

  const auto norm_line = [](const std::string& text) {
    const auto begin = text.find("mean energy norm:");
    return text.substr(begin, text.find('\n', begin) - begin);
  };
  CHECK(norm_line(solved.out) == norm_line(rendered.out));
}

TEST_CASE("verify prints pass lines")
{
  TempDir dir;
  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun r = run({"verify", scn});
  CHECK(r.code == 0);
  CHECK(r.out.find("ordering: 1.22222222 >= 1 PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("gamma_identity") != std::string::npos);
  CHECK(r.out.find("sandwich") != std::string::npos);
}

TEST_CASE("sweep emits the CSV table")
{
  TempDir dir;
  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun r = run({"sweep", scn, "--out", dir.out_dir(), "--values", "0.05,0.1"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("delta,lower_norm,upper_norm,empirical_norm,ratio\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
  CHECK(fs::exists(fs::path(dir.out_dir()) / "sweep.csv"));
}

TEST_CASE("usage errors exit with code 2")
{
  TempDir dir;
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"bounds", (dir.path / "missing.scn").string()}).code == 2);

  const std::string scn = dir.file("reference.scn", kReferenceScn);
  const CliRun bad_key = run({"bounds", scn, "--set", "bogus=1"});
  CHECK(bad_key.code == 2);
  CHECK(bad_key.err.find("bogus") != std::string::npos);

  const CliRun bad_scenario =
      run({"bounds", dir.file("bad.scn", "[domain]\nunit_square n=0\n"), "--out", dir.out_dir()});
  CHECK(bad_scenario.code == 2);
}

TEST_CASE("help exits cleanly")
{
  const CliRun r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("bounds") != std::string::npos);
}
