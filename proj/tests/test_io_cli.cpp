#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "atfm/cli.hpp"
#include "atfm/scenario_io.hpp"

using namespace atfm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kScenarios = ATFM_SCENARIO_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("atfm_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "atfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json toy_json() { return json::parse(read_text(kScenarios / "toy.json")); }

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_SUITE("scenario_io") {
  TEST_CASE("bundled scenarios load") {
    const auto toy = load_scenario(kScenarios / "toy.json");
    CHECK(toy.flights.size() == 2);
    CHECK(toy.sectors.size() == 1);
    CHECK(toy.config.horizon.has_value());
    const auto syn = load_scenario(kScenarios / "synthetic_10.json");
    CHECK(syn.flights.size() == 10);
    CHECK(syn.sectors.size() == 3);
  }

  TEST_CASE("capacity 0 is listed as a violation") {
    auto j = toy_json();
    j["airspace"]["sectors"][0]["capacity"] = 0;
    const auto check = check_scenario(j.dump());
    REQUIRE_FALSE(check.scenario);
    REQUIRE(check.diagnostics.size() == 1);
    CHECK(check.diagnostics[0].path == "/airspace/sectors/0/capacity");
  }

  TEST_CASE("edge mean outside bounds names the edge") {
    auto j = toy_json();
    j["flights"][1]["edges"][1]["upper_bound"] = 10.0;
    j["flights"][1]["edges"][1]["lower_bound"] = 5.0;
    const auto check = check_scenario(j.dump());
    REQUIRE_FALSE(check.diagnostics.empty());
    CHECK(check.diagnostics[0].path == "/flights/1/edges/1");
    CHECK(check.diagnostics[0].message.find("2-3") != std::string::npos);
  }

  TEST_CASE("dangling references and missing fields") {
    auto j = toy_json();
    j["airspace"]["sectors"][0]["boundaries"][0]["exit"] = "Z";
    j.erase("schema_version");
    j["flights"][0].erase("scheduled_arrival");
    const auto check = check_scenario(j.dump());
    CHECK(check.diagnostics.size() == 3);
    CHECK_FALSE(check.parse_error);
  }

  TEST_CASE("syntax errors carry the line") {
    const auto check = check_scenario("{\n  \"schema_version\": 1,\n  \"airspace\": [,\n}");
    CHECK(check.parse_error);
    REQUIRE(check.diagnostics.size() == 1);
    CHECK(check.diagnostics[0].path == "line 3");
  }

  TEST_CASE("slot departures expand to [ctot-5, ctot+10]") {
    auto j = toy_json();
    j["flights"][0]["departure"] = {{"type", "slot"}, {"ctot", 0}};
    const auto sc = parse_scenario(j.dump());
    CHECK(sc.flights[0].departure() == DistSpec{UniformSpec{-5.0, 10.0}});
  }

  TEST_CASE("events round-trip and report their lines") {
    std::istringstream in(
        "{\"timestamp\": 0, \"flight\": \"1\", \"type\": \"departure\", \"time\": 0}\n"
        "\n"
        "# comment\n"
        "{\"timestamp\": 1, \"flight\": \"1\", \"type\": \"teleport\"}\n"
        "{\"timestamp\": 2, \"flight\": \"2\", \"type\": \"diversion\", \"route\": 1}\n"
        "not json\n");
    const auto ev = read_events(in);
    REQUIRE(ev.events.size() == 2);
    CHECK(ev.events[0].line == 1);
    CHECK(ev.events[1].line == 5);
    CHECK(ev.events[1].event.kind == EventKind::diversion);
    REQUIRE(ev.errors.size() == 2);
    CHECK(ev.errors[0].line == 4);
    CHECK(ev.errors[1].line == 6);
    const auto again = parse_event(event_to_json(ev.events[0].event));
    CHECK(again == ev.events[0].event);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("validate") {
    TempDir tmp("validate");
    auto r = run_cli({"validate", (kScenarios / "toy.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("OK", 0) == 0);
    auto j = toy_json();
    j["airspace"]["sectors"][0]["capacity"] = 0;
    r = run_cli({"validate", write(tmp.path, "bad.json", j.dump()).string()});
    CHECK(r.code == cli::kInvariant);
    CHECK(r.err.find("capacity") != std::string::npos);
    r = run_cli({"validate", write(tmp.path, "broken.json", "{").string()});
    CHECK(r.code == cli::kUsage);
  }

  TEST_CASE("usage errors") {
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"predict"}).code == cli::kUsage);
    CHECK(run_cli({"optimize", (kScenarios / "toy.json").string(), "--constraint", "maybe"}).code == cli::kUsage);
  }

  TEST_CASE("predict on the toy") {
    TempDir tmp("predict");
    const auto r = run_cli({"predict", (kScenarios / "toy.json").string(), "--out", tmp.path.string()});
    REQUIRE(r.code == 0);
    const auto arrivals = csv(tmp.path / "arrivals.csv");
    REQUIRE(arrivals.size() == 3);
    CHECK(arrivals[0] == std::vector<std::string>{"flight", "expected_arrival", "variance", "scheduled_arrival",
                                                  "expected_delay"});
    CHECK(std::stod(arrivals[1][1]) == doctest::Approx(46.0).epsilon(1e-12));
    CHECK(std::stod(arrivals[1][2]) == doctest::Approx(290.0 / 12.0).epsilon(1e-11));
    const auto congestion = csv(tmp.path / "congestion.csv");
    REQUIRE(congestion.size() == 2);
    CHECK(std::abs(std::stod(congestion[1][3]) - 196.0 / 225.0) < 1e-11);
    CHECK(congestion[1][4] == "1");
  }

  TEST_CASE("predict with no flights writes empty reports") {
    TempDir tmp("empty");
    auto j = toy_json();
    j["flights"] = json::array();
    const auto path = write(tmp.path, "empty.json", j.dump());
    const auto r = run_cli({"predict", path.string(), "--out", (tmp.path / "out").string()});
    CHECK(r.code == 0);
    CHECK(csv(tmp.path / "out" / "arrivals.csv").size() == 1);
  }

  TEST_CASE("piece overflow advises --discretize") {
    TempDir tmp("overflow");
    auto j = toy_json();
    j["config"]["piece_cap"] = 2;
    const auto path = write(tmp.path, "cap.json", j.dump());
    auto r = run_cli({"predict", path.string(), "--out", tmp.path.string()});
    CHECK(r.code == cli::kInvariant);
    CHECK(r.err.find("--discretize") != std::string::npos);
    r = run_cli({"predict", path.string(), "--out", tmp.path.string(), "--discretize", "0.5"});
    CHECK(r.code == 0);
  }

  TEST_CASE("simulate is reproducible and close to predict") {
    TempDir tmp("simulate");
    const auto toy = (kScenarios / "toy.json").string();
    const auto a = tmp.path / "a", b = tmp.path / "b";
    REQUIRE(run_cli({"simulate", toy, "--samples", "20000", "--seed", "3", "--out", a.string(), "--dump-pdfs"}).code == 0);
    REQUIRE(run_cli({"simulate", toy, "--samples", "20000", "--seed", "3", "--out", b.string(), "--workers", "3"}).code == 0);
    CHECK(read_text(a / "congestion.csv") == read_text(b / "congestion.csv"));
    CHECK(read_text(a / "arrivals.csv") == read_text(b / "arrivals.csv"));
    CHECK(fs::exists(a / "pdfs.csv"));
    const auto congestion = csv(a / "congestion.csv");
    CHECK(congestion[0].back() == "half_width");
    CHECK(std::abs(std::stod(congestion[1][3]) - 196.0 / 225.0) < 0.01);
  }

  TEST_CASE("optimize writes its reports") {
    TempDir tmp("optimize");
    const auto r = run_cli({"optimize", (kScenarios / "toy.json").string(), "--out", tmp.path.string()});
    REQUIRE(r.code == 0);
    const auto ev = json::parse(read_text(tmp.path / "evaluation.json"));
    CHECK(ev["feasible"] == true);
    CHECK(ev["delay_cost"].get<double>() <= 2.0);
    const auto cl = json::parse(read_text(tmp.path / "clearances.json"));
    CHECK(cl["clearances"].size() == 8);
    CHECK(cl["decisions"][0]["shifts"].contains("1-2"));
    CHECK(csv(tmp.path / "history.csv").size() > 2);
  }

  TEST_CASE("soft constraint mode gives the hard solution on the toy") {
    TempDir tmp("soft");
    const auto toy = (kScenarios / "toy.json").string();
    REQUIRE(run_cli({"optimize", toy, "--out", (tmp.path / "h").string()}).code == 0);
    REQUIRE(run_cli({"optimize", toy, "--constraint", "soft", "--out", (tmp.path / "s").string()}).code == 0);
    const auto h = json::parse(read_text(tmp.path / "h" / "evaluation.json"));
    const auto s = json::parse(read_text(tmp.path / "s" / "evaluation.json"));
    CHECK(s["feasible"] == true);
    CHECK(s["delay_cost"].get<double>() == doctest::Approx(h["delay_cost"].get<double>()).epsilon(1e-4));
  }

  TEST_CASE("infeasible hard optimization exits 3 and still reports") {
    TempDir tmp("infeasible");
    const auto r = run_cli({"optimize", (kScenarios / "toy.json").string(), "--epsilon", "0.01", "--out",
                        tmp.path.string()});
    CHECK(r.code == cli::kInfeasible);
    CHECK(fs::exists(tmp.path / "evaluation.json"));
  }

  TEST_CASE("monitor streams versioned updates") {
    TempDir tmp("monitor");
    const auto toy = (kScenarios / "toy.json").string();
    const auto empty = write(tmp.path, "none.jsonl", "");
    auto r = run_cli({"monitor", toy, "--events", empty.string(), "--out", (tmp.path / "e").string()});
    REQUIRE(r.code == 0);
    std::istringstream lines(read_text(tmp.path / "e" / "updates.jsonl"));
    std::string line;
    std::vector<json> updates;
    while (std::getline(lines, line)) updates.push_back(json::parse(line));
    REQUIRE(updates.size() == 1);
    CHECK(updates[0]["version"] == 0);

    const auto evs = write(tmp.path, "ev.jsonl",
                           "{\"timestamp\": 0, \"flight\": \"1\", \"type\": \"departure\", \"time\": 0}\n"
                           "{\"timestamp\": 1, \"flight\": \"9\", \"type\": \"departure\", \"time\": 0}\n"
                           "{\"timestamp\": 2, \"flight\": \"2\", \"type\": \"departure\", \"time\": 1}\n");
    r = run_cli({"monitor", toy, "--events", evs.string(), "--out", (tmp.path / "a").string()});
    CHECK(r.code == 0);
    CHECK(r.err.find(":2:") != std::string::npos);
    run_cli({"monitor", toy, "--events", evs.string(), "--out", (tmp.path / "b").string()});
    CHECK(read_text(tmp.path / "a" / "updates.jsonl") == read_text(tmp.path / "b" / "updates.jsonl"));
    r = run_cli({"monitor", toy, "--events", evs.string(), "--strict", "--out", (tmp.path / "c").string()});
    CHECK(r.code == cli::kInvariant);
    CHECK(r.err.find(":2:") != std::string::npos);
  }

  TEST_CASE("monitored departures match predict on the hand-conditioned scenario") {
    TempDir tmp("cross");
    const auto toy = (kScenarios / "toy.json").string();
    const auto evs = write(tmp.path, "ev.jsonl",
                           "{\"timestamp\": 0, \"flight\": \"1\", \"type\": \"departure\", \"time\": 0}\n"
                           "{\"timestamp\": 0, \"flight\": \"2\", \"type\": \"departure\", \"time\": 2}\n");
    REQUIRE(run_cli({"monitor", toy, "--events", evs.string(), "--out", (tmp.path / "m").string()}).code == 0);

    auto j = toy_json();
    j["flights"][0]["departure"] = {{"type", "point"}, {"t", 0.0}};
    j["flights"][1]["departure"] = {{"type", "point"}, {"t", 2.0}};
    const auto cond = write(tmp.path, "cond.json", j.dump());
    REQUIRE(run_cli({"predict", cond.string(), "--out", (tmp.path / "p").string()}).code == 0);

    std::istringstream lines(read_text(tmp.path / "m" / "updates.jsonl"));
    std::string line, last;
    while (std::getline(lines, line)) last = line;
    const auto update = json::parse(last);
    CHECK(update["version"] == 2);
    const auto predicted = csv(tmp.path / "p" / "congestion.csv");
    CHECK(update["predicted_congestion"][0]["probability"].get<double>() ==
          doctest::Approx(std::stod(predicted[1][3])).epsilon(1e-11));
  }
}
