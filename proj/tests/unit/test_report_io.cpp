#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lamelab/report_io.hpp"

using namespace lamelab;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::filesystem::path temp_dir() {
    auto d = std::filesystem::temp_directory_path() / "lamelab_report_io_tests";
    std::filesystem::create_directories(d);
    return d;
}

} // namespace

TEST_SUITE("report_io") {

    TEST_CASE("fnv1a64 matches the published test vectors") {
        CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
        CHECK(fnv1a64("ab") != fnv1a64("ba"));
        CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
        CHECK(hex64(0x1ULL) == "0000000000000001");
    }

    TEST_CASE("format_double round-trips and stays short") {
        for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5e17, 0.0}) {
            CHECK(std::stod(format_double(v)) == v);
        }
        CHECK(format_double(1.0) == "1");
        CHECK(format_double(0.1) == "0.1");
    }

    TEST_CASE("csv writer follows RFC 4180") {
        auto path = temp_dir() / "table.csv";
        write_csv(path.string(), {"a", "b,c", "d\"e"}, {{1.5, 2.0, 3.0}, {-0.25, 0.0, 4.0}});
        std::string text = slurp(path);
        CHECK(text == "a,\"b,c\",\"d\"\"e\"\r\n1.5,2,3\r\n-0.25,0,4\r\n");
        CHECK_THROWS_AS(write_csv(path.string(), {"a", "b"}, {{1.0}}), PreconditionError);
    }

    TEST_CASE("svg writer emits a closed document and survives log axes") {
        auto path = temp_dir() / "plot.svg";
        PlotSeries s;
        s.label = "decay";
        s.x = {-1.0, 0.5, 1.0, 2.0};
        s.y = {0.0, 4.0, 2.0, 1.0};
        write_svg_plot(path.string(), "unit plot", {s}, true, true);
        std::string text = slurp(path);
        CHECK(text.find("<svg") != std::string::npos);
        CHECK(text.rfind("</svg>") != std::string::npos);
        CHECK(text.find("unit plot") != std::string::npos);
        CHECK(text.find("decay") != std::string::npos);
        // the two nonpositive points are dropped by the log axes, two remain
        CHECK(text.find("NaN") == std::string::npos);
        CHECK(text.find("nan") == std::string::npos);
        CHECK(text.find("inf") == std::string::npos);
    }

    TEST_CASE("json writer uses two-space indent and a trailing newline") {
        auto path = temp_dir() / "doc.json";
        write_json_file(path.string(), nlohmann::json{{"b", 1}, {"a", nlohmann::json::array({1, 2})}});
        CHECK(slurp(path) == "{\n  \"a\": [\n    1,\n    2\n  ],\n  \"b\": 1\n}\n");
    }

    TEST_CASE("report serializers expose the documented keys") {
        ThreeSpheresReport rep;
        rep.n1 = 0.5;
        rep.n2 = 1.0;
        rep.nR = 4.0;
        rep.sigma_star = 0.5;
        rep.degenerate = false;
        nlohmann::json j = to_json(rep);
        CHECK(j["n1"] == 0.5);
        CHECK(j["nR"] == 4.0);
        CHECK(j["sigma_star"] == 0.5);
        CHECK(j["degenerate"] == false);

        ThreeSpheresReport dead;
        CHECK_FALSE(to_json(dead).contains("sigma_star"));

        nlohmann::json p = to_json(iteration_plan(0.1, 0.5, 1.0, 0.5, 1.0));
        CHECK(p["N"] == 21);
        CHECK(p["theta"] == 2.0 / 3.0);
        CHECK(p["sigma"] == std::pow(2.0, -21));
        CHECK(p["R1"] == 0.1);
    }

    TEST_CASE("manifest records the config hash and sorts outputs") {
        auto dir = temp_dir() / "manifest_case";
        std::filesystem::create_directories(dir);
        write_manifest(dir.string(), "unit-check", "{}", {"b.csv", "a.json"});
        nlohmann::json j = nlohmann::json::parse(slurp(dir / "manifest.json"));
        CHECK(j["experiment"] == "unit-check");
        CHECK(j["artifact_version"] == "0.1.0");
        std::string expect = "fnv1a64:" + hex64(fnv1a64("{}"));
        CHECK(j["config_hash"] == expect);
        REQUIRE(j["outputs"].size() == 2);
        CHECK(j["outputs"][0] == "a.json");
        CHECK(j["outputs"][1] == "b.csv");
        CHECK_FALSE(j.contains("timestamp"));
    }
}
