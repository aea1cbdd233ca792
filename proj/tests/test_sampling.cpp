#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "hfvol/errors.hpp"
#include "hfvol/rng.hpp"
#include "hfvol/sampling.hpp"
#include "hfvol/simulation.hpp"

using namespace hfvol;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hfvol_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string error_of(const fs::path& p, double delta) {
    try {
        (void)load_csv(p, delta);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("grid arithmetic") {
    const RegularGrid g = RegularGrid::from_horizon(1.0, 1.0 / 23400.0);
    CHECK(g.n == 23400);
    CHECK(g.horizon() == doctest::Approx(1.0));
    CHECK(RegularGrid::from_horizon(2.5, 1.0).n == 2);
    CHECK_THROWS_AS(RegularGrid::from_horizon(1.0, 0.0), ConfigError);
}

TEST_CASE("observation set construction") {
    const RegularGrid g{0.5, 3};
    const std::vector<double> rows = {1, 10, 2, 20, 3, 30};
    const ObservationSet obs = ObservationSet::from_rows(g, 2, rows);
    CHECK(obs.size() == 3);
    CHECK(obs.dimension() == 2);
    CHECK(obs.at(1, 0) == 2);
    CHECK(obs.at(2, 1) == 30);
    CHECK(obs.component(1)[0] == 10);
    CHECK(obs.row(2)[1] == 30);
    CHECK_THROWS_AS(ObservationSet(g, 2, {1, 2, 3}), ConfigError);
    CHECK_THROWS_AS(ObservationSet(g, 0, {}), ConfigError);
    CHECK_THROWS_AS(ObservationSet(g, 1, {1.0, std::numeric_limits<double>::quiet_NaN(), 2.0}), ConfigError);
}

TEST_CASE("small CSV loads") {
    const fs::path p = temp_file("three.csv");
    write_text(p, "t,y1\n0,0\n1,1\n2,2\n");
    const ObservationSet obs = load_csv(p, 1.0);
    CHECK(obs.size() == 3);
    CHECK(obs.dimension() == 1);
    CHECK(obs.at(2, 0) == 2.0);
}

TEST_CASE("CSV errors name the row") {
    const fs::path p = temp_file("bad.csv");
    std::string body = "t,y1\n";
    for (int i = 1; i <= 9; ++i) body += std::to_string(i - 1) + "," + (i == 7 ? std::string("nan") : std::to_string(i)) + "\n";
    write_text(p, body);
    CHECK(error_of(p, 1.0).find("row 7") != std::string::npos);

    write_text(p, "t,y1,y2\n0,1,2\n1,1\n");
    CHECK(error_of(p, 1.0).find("row 2") != std::string::npos);

    write_text(p, "t,y1\n0,1\n1,1\n2.5,1\n");
    CHECK(error_of(p, 1.0).find("row 3") != std::string::npos);

    write_text(p, "time,y1\n0,1\n");
    CHECK_THROWS_AS(load_csv(p, 1.0), ParseError);
    CHECK_THROWS(load_csv(temp_file("missing.csv"), 1.0));
}

TEST_CASE("CSV round trip is bit exact") {
    RandomStream rs(7, 0, 0);
    const RegularGrid g{1.0 / 23400.0, 1000};
    std::vector<double> v(3 * g.n);
    for (double& x : v) x = rs.normal() * std::pow(10.0, static_cast<int>(rs.uniform() * 20) - 10);
    const ObservationSet obs(g, 3, v);
    const fs::path p = temp_file("roundtrip.csv");
    save_csv(obs, p);
    {
        std::ifstream in(p);
        std::string header;
        std::getline(in, header);
        CHECK(header == "t,y1,y2,y3");
    }
    const ObservationSet back = load_csv(p, g.delta_n);
    REQUIRE(back.size() == obs.size());
    CHECK(back.raw() == obs.raw());

    const ObservationSet one(RegularGrid{1.0, 2}, 1, {0.1, 0.2});
    save_csv(one, p);
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,y1");
}

TEST_CASE("CSV round trip of a full simulated path") {
    const ScenarioConfig cfg = heston_jumps_scenario();
    const PathBundle b = simulate(cfg, 3);
    const fs::path p = temp_file("sim.csv");
    save_csv(b.observations, p);
    const auto start = std::chrono::steady_clock::now();
    const ObservationSet back = load_csv(p, cfg.delta_n);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(back.size() == 491400);
    CHECK(back.raw() == b.observations.raw());
    CHECK(secs < 5.0);
}

TEST_CASE("increments telescope") {
    RandomStream rs(11, 0, 0);
    std::vector<double> u(2000);
    // integer-valued steps keep every partial sum exact
    for (double& x : u) x = std::floor(rs.uniform() * 2000.0) - 1000.0;
    const std::vector<double> inc = increments(u);
    REQUIRE(inc.size() == u.size() - 1);
    double s = 0.0;
    for (double x : inc) s += x;
    CHECK(s == u.back() - u.front());
    CHECK(increments(std::vector<double>{}).empty());
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 123456789.123456789}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}
