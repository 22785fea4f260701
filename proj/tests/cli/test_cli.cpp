#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hadm/cli/cli.hpp"
#include "hadm/core/errors.hpp"
#include "hadm/rover/scenario.hpp"

using namespace hadm;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::main_entry(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

bool contains(const std::string& text, const std::string& fragment) { return text.find(fragment) != std::string::npos; }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "hadm_cli_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

// CSV rows keyed by their first column.
std::map<std::string, std::vector<std::string>> csv_rows(const std::string& text) {
    std::map<std::string, std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line) && !line.empty()) {
        std::vector<std::string> fields;
        std::istringstream l(line);
        std::string f;
        while (std::getline(l, f, ',')) fields.push_back(f);
        rows[fields.at(0)] = fields;
    }
    return rows;
}

}  // namespace

TEST_CASE("run: prognostic commitment strands on difficult terrain") {
    const auto r = invoke({"run", "--scenario", "2", "--strategy", "phm-commit", "--set", "terrain=difficult-both"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "outcome: stranded\n"));
    CHECK(contains(r.out, "deficit wh: 100\n"));
}

TEST_CASE("run: restore-to-nominal runs out with a redo") {
    const auto r = invoke({"run", "--scenario", "3", "--strategy", "shm-baseline", "--set", "redo=true"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "deficit wh: 300\n"));
    CHECK(contains(r.out, "shm recover t=0: charge_to_full"));
}

TEST_CASE("run: unified planning without a redo") {
    const auto r = invoke({"run", "--scenario", "3", "--strategy", "hadm", "--set", "redo=false"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "final battery wh: 200\n"));
    CHECK(contains(r.out, "outcome: complete\n"));
}

TEST_CASE("run: machine formats keep stdout for the trace") {
    const auto r = invoke({"run", "--scenario", "2", "--format", "jsonl", "--set", "terrain=difficult-both"});
    CHECK(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        CHECK(nlohmann::json::parse(line).at("step") == n);
        ++n;
    }
    CHECK(n == 3);
    CHECK(contains(r.err, "final battery wh: 100"));

    const auto csv = invoke({"run", "--scenario", "2", "--format", "csv", "--set", "terrain=difficult-both"});
    CHECK(csv.out.rfind("step,provider,action,reward,cumulative,belief,observation\n", 0) == 0);
}

TEST_CASE("compare: analytic column") {
    auto r = invoke({"compare", "--scenario", "2", "--format", "csv", "--rollouts", "200"});
    REQUIRE(r.code == 0);
    auto rows = csv_rows(r.out);
    CHECK(rows.at("phm-commit").at(1) == "-840");
    CHECK(rows.at("hadm").at(1) == "-800");
    CHECK(rows.at("hadm").at(4) == "200");

    r = invoke({"compare", "--scenario", "3", "--strategy", "hadm,shm-baseline", "--format", "csv", "--rollouts", "50"});
    REQUIRE(r.code == 0);
    rows = csv_rows(r.out);
    CHECK(rows.at("hadm").at(1) == "250");
    CHECK(rows.at("shm-baseline").at(1) == "50");
}

TEST_CASE("compare: repeated strategy gives identical rows") {
    const auto r = invoke({"compare", "--scenario", "2", "--strategy", "hadm,hadm", "--format", "csv", "--seed", "11",
                        "--rollouts", "300"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string header, first, second;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    CHECK(first == second);
    CHECK(invoke({"compare", "--scenario", "2", "--strategy", "hadm"}).code == cli::kExitConfig);
}

TEST_CASE("predict: uncertainty sweep") {
    auto r = invoke({"predict", "--points", "1,0.25"});
    REQUIRE(r.code == 0);
    auto rows = csv_rows(r.out);
    CHECK(std::stod(rows.at("1").at(4)) == doctest::Approx(3.33).epsilon(0.01 / 3.33));
    CHECK(std::stod(rows.at("0.25").at(4)) == doctest::Approx(0.83).epsilon(0.01 / 0.83));
    CHECK(rows.at("0.25").at(5) == "5");
    CHECK(rows.at("0.25").at(6) == "true");
    CHECK(contains(r.out, "sigma_max,max_prediction_health\n1,0.29999999999999977\n"));

    r = invoke({"predict", "--high-rate-probability", "0", "--points", "1,0.5,0.25"});
    REQUIRE(r.code == 0);
    rows = csv_rows(r.out);
    for (const char* f : {"1", "0.5", "0.25"}) CHECK(rows.at(f).at(4) == "0");

    CHECK(invoke({"predict", "--nominal-rate", "-1"}).code == cli::kExitConfig);
    CHECK(invoke({"predict", "--scenario", "2"}).code == cli::kExitConfig);
}

TEST_CASE("solve: root decisions and artifacts") {
    auto r = invoke({"solve", "--scenario", "3"});
    CHECK(contains(r.out, "root value: 250\n"));
    CHECK(contains(r.out, "root action: skip_charge\n"));

    r = invoke({"solve", "--scenario", "4"});
    CHECK(contains(r.out, "stop_and_cool_down"));
    CHECK(contains(r.out, "-> t=8 h at wp2"));
    CHECK(contains(r.out, "-> t=9 h at wp2, battery 1000 Wh, motor 20 C, complete"));

    const auto dir = scratch("solve2");
    r = invoke({"solve", "--scenario", "2", "--out", dir.string()});
    CHECK(contains(r.out, "root value: -800\n"));
    CHECK(std::filesystem::exists(dir / "values.csv"));
    CHECK(std::filesystem::exists(dir / "policy.csv"));
    CHECK(invoke({"solve", "--scenario", "1"}).code == cli::kExitConfig);
}

TEST_CASE("export and validate") {
    auto r = invoke({"export", "--scenario", "builtin:4"});
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out) == nlohmann::json::parse(rover::builtin_scenario_text(4)));
    r = invoke({"export", "--schema"});
    CHECK(nlohmann::json::parse(r.out).contains("definitions"));

    const auto good = scratch("good.json");
    std::ofstream(good) << rover::builtin_scenario_text(3);
    CHECK(invoke({"validate", "--scenario", good.string()}).out == "ok: example3\n");
    CHECK(invoke({"run", "--scenario", good.string(), "--set", "redo=true"}).code == 0);

    const auto bad = scratch("bad.json");
    std::ofstream(bad) << R"({"name": "broken", "waypoints": [{"id": 3}]})";
    r = invoke({"validate", "--scenario", bad.string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(contains(r.out, "/waypoints/0/id"));
    r = invoke({"run", "--scenario", bad.string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(contains(r.err, "/waypoints/0/id"));
    CHECK(invoke({"export", "--scenario", bad.string()}).code == cli::kExitConfig);
}

TEST_CASE("exit codes") {
    CHECK(cli::exit_code_for(ConfigError("x")) == cli::kExitConfig);
    CHECK(cli::exit_code_for(InvalidConfigError("x")) == cli::kExitConfig);
    CHECK(cli::exit_code_for(ResourceError("x")) == cli::kExitResource);
    CHECK(cli::exit_code_for(ModelInconsistencyError("x")) == cli::kExitInconsistent);
    CHECK(cli::exit_code_for(ImpossibleObservationError("x")) == cli::kExitInconsistent);
    CHECK(cli::exit_code_for(DomainError("x")) == cli::kExitFailure);
    CHECK(invoke({}).code == cli::kExitConfig);
    CHECK(invoke({"run", "--strategy", "greedy"}).code == cli::kExitConfig);
    CHECK(invoke({"run", "--format", "xml"}).code == cli::kExitConfig);
    CHECK(invoke({"compare", "--rollouts", "0"}).code == cli::kExitConfig);
    CHECK(invoke({"run", "--set", "terrain=rocky-both"}).code == cli::kExitConfig);
    CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("identical invocations write identical artifacts") {
    for (const char* format : {"csv", "jsonl", "table"}) {
        const auto a = scratch(std::string("run_a.") + format);
        const auto b = scratch(std::string("run_b.") + format);
        CHECK(invoke({"run", "--scenario", "2", "--seed", "42", "--format", format, "--out", a.string()}).code == 0);
        CHECK(invoke({"run", "--scenario", "2", "--seed", "42", "--format", format, "--out", b.string()}).code == 0);
        CHECK(!slurp(a).empty());
        CHECK(slurp(a) == slurp(b));
    }
    const auto a = scratch("compare_a.csv");
    const auto b = scratch("compare_b.csv");
    CHECK(invoke({"compare", "--scenario", "2", "--seed", "3", "--rollouts", "400", "--threads", "1", "--format", "csv",
               "--out", a.string()})
              .code == 0);
    CHECK(invoke({"compare", "--scenario", "2", "--seed", "3", "--rollouts", "400", "--threads", "4", "--format", "csv",
               "--out", b.string()})
              .code == 0);
    CHECK(slurp(a) == slurp(b));
}
