#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef LAMELAB_BIN
#error "LAMELAB_BIN must point at the lamelab executable"
#endif
#ifndef LAMELAB_CONFIG_DIR
#error "LAMELAB_CONFIG_DIR must point at the shipped configs"
#endif

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "lamelab_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string config_path(const std::string& name) {
    return (fs::path(LAMELAB_CONFIG_DIR) / name).string();
}

int run(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(LAMELAB_BIN) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
#ifdef _WIN32
    return status;
#else
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
#endif
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::set<std::string> artifact_names(const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string n = e.path().filename().string();
        if (n != "run.log") names.insert(n);
    }
    return names;
}

nlohmann::json parse_file(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

} // namespace

TEST_CASE("three-spheres worked example reproduces the exact exponent") {
    fs::path dir = scratch("three_spheres");
    int rc = run("three-spheres --config " + config_path("three_spheres_homogeneous.json") +
                     " --out " + dir.string(),
                 dir / "run.log");
    CHECK(rc == 0);
    nlohmann::json j = parse_file(dir / "three_spheres.json");
    CHECK(j["degenerate"] == false);
    CHECK(std::fabs(j["sigma_star"].get<double>() - 0.5) < 1e-6);
    CHECK(std::fabs(j["middle_sq_over_product"].get<double>() - 1.0) < 1e-8);
    CHECK(artifact_names(dir) == std::set<std::string>{"manifest.json", "three_spheres.json"});

    nlohmann::json manifest = parse_file(dir / "manifest.json");
    CHECK(manifest["experiment"] == "three-spheres");
    CHECK(manifest["artifact_version"] == "0.1.0");
    CHECK(manifest["outputs"].size() == 1);
}

TEST_CASE("iteration-plan worked example pins the integer outputs") {
    fs::path dir = scratch("iteration_plan");
    int rc = run("iteration-plan --config " + config_path("iteration_plan_worked.json") +
                     " --out " + dir.string(),
                 dir / "run.log");
    CHECK(rc == 0);
    nlohmann::json j = parse_file(dir / "iteration_plan.json");
    CHECK(j["N"] == 21);
    CHECK(j["theta"].get<double>() == 2.0 / 3.0);
    CHECK(j["sigma"].get<double>() == std::pow(2.0, -21));
    CHECK(j["eta"].get<double>() == doctest::Approx(std::exp(22.0 / 21.0)).epsilon(1e-14));
    CHECK(j.contains("chain_bound"));
}

TEST_CASE("malformed json is rejected before any artifact is written") {
    fs::path dir = scratch("malformed");
    fs::path cfg = dir / "broken.json";
    std::ofstream(cfg) << "{ \"experiment\": ";
    fs::path out = dir / "out";
    fs::create_directories(out);
    int rc = run("three-spheres --config " + cfg.string() + " --out " + out.string(),
                 dir / "run.log");
    CHECK(rc == 2);
    CHECK(fs::is_empty(out));
}

TEST_CASE("unknown keys are rejected with exit 2") {
    fs::path dir = scratch("unknown_key");
    fs::path cfg = dir / "odd.json";
    std::ofstream(cfg) << R"({"experiment": "iteration-plan", "r1": 0.1, "r2": 0.5,
                             "r_out": 1.0, "eps": 0.5, "s": 1.0, "typo_key": 3})";
    fs::path out = dir / "out";
    fs::create_directories(out);
    int rc = run("iteration-plan --config " + cfg.string() + " --out " + out.string(),
                 dir / "run.log");
    CHECK(rc == 2);
    CHECK(fs::is_empty(out));
    CHECK(slurp(dir / "run.log").find("typo_key") != std::string::npos);
}

TEST_CASE("experiment name must match the subcommand") {
    fs::path dir = scratch("wrong_experiment");
    int rc = run("vanishing --config " + config_path("iteration_plan_worked.json") + " --out " +
                     dir.string(),
                 dir / "run.log");
    CHECK(rc == 2);
}

TEST_CASE("demanded properties that fail still leave artifacts behind") {
    fs::path dir = scratch("property_failure");
    fs::path cfg = dir / "impossible.json";
    // the spread bound is far below the measured value, so the demand fails
    std::ofstream(cfg) << R"({
      "experiment": "carleman-scan",
      "coefficients": {"family": "constant", "mu": 1.0, "lambda": 0.5},
      "theta": 0.5,
      "r_out": 1.0,
      "s": 2.0,
      "taus": [1.0, 2.0],
      "rule": {"n_r": 8, "n_p": 8, "n_a": 16},
      "max_spread": 1.0001
    })";
    fs::path out = dir / "out";
    fs::create_directories(out);
    int rc = run("carleman-scan --config " + cfg.string() + " --out " + out.string(),
                 dir / "run.log");
    CHECK(rc == 4);
    CHECK(fs::exists(out / "carleman_scan.json"));
    CHECK(fs::exists(out / "carleman_scan.csv"));
    CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("numerical failures exit with code 3") {
    fs::path dir = scratch("numerical_failure");
    fs::path cfg = dir / "stall.json";
    // an 8-cell grid cannot cascade and the flat solve stalls above 1e-2
    std::ofstream(cfg) << R"({
      "experiment": "cauchy-stability",
      "coefficients": {"family": "constant", "mu": 1.0, "lambda": 1.0},
      "solution": {"type": "kelvin"},
      "theta": 0.4,
      "r_out": 1.0,
      "s": 1.0,
      "zeta_list": [0.1, 0.03, 0.01],
      "cells": 8,
      "beta_rule": {"beta_min": 1.0, "beta_max": 10000.0, "count": 5},
      "seed": 7
    })";
    fs::path out = dir / "out";
    fs::create_directories(out);
    int rc = run("cauchy-stability --config " + cfg.string() + " --out " + out.string(),
                 dir / "run.log");
    CHECK(rc == 3);
}

TEST_CASE("missing config file exits 2") {
    fs::path dir = scratch("missing_config");
    int rc = run("vanishing --config " + (dir / "nope.json").string(), dir / "run.log");
    CHECK(rc == 2);
}

TEST_CASE("repeated runs are byte-for-byte identical and quiet mode is silent") {
    fs::path a = scratch("repeat_a");
    fs::path b = scratch("repeat_b");
    std::string cfg = config_path("vanishing_gradient.json");
    CHECK(run("vanishing --config " + cfg + " --out " + a.string() + " --quiet",
              a / "run.log") == 0);
    CHECK(run("vanishing --config " + cfg + " --out " + b.string() + " --quiet",
              b / "run.log") == 0);
    CHECK(slurp(a / "run.log").empty());

    auto names = artifact_names(a);
    CHECK(names == artifact_names(b));
    CHECK(names.count("vanishing.json") == 1);
    CHECK(names.count("manifest.json") == 1);
    for (const std::string& n : names) CHECK(slurp(a / n) == slurp(b / n));
}

TEST_CASE("seed flag overrides the config seed") {
    fs::path a = scratch("seed_a");
    fs::path b = scratch("seed_b");
    std::string cfg = config_path("factorization_wavy.json");
    CHECK(run("factorization-check --config " + cfg + " --out " + a.string(), a / "run.log") == 0);
    CHECK(run("factorization-check --config " + cfg + " --out " + b.string() + " --seed 99",
              b / "run.log") == 0);
    nlohmann::json ja = parse_file(a / "factorization.json");
    nlohmann::json jb = parse_file(b / "factorization.json");
    CHECK(ja["seed"] != jb["seed"]);
    CHECK(jb["seed"] == 99);
}

TEST_CASE("help exits zero and bad flags exit two") {
    fs::path dir = scratch("help");
    CHECK(run("--help", dir / "run.log") == 0);
    CHECK(run("three-spheres --no-such-flag", dir / "run.log") == 2);
    CHECK(run("", dir / "run.log") == 2);
}
