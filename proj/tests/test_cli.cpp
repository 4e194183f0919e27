#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/config.hpp"
#include "levybsde/errors.hpp"
#include "levybsde/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace levybsde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmallConfig = R"json({
  "seed": 31415,
  "model": {"name": "linear_additive"},
  "measure": {"name": "tempered_stable", "params": {"c": 1.0, "alpha": 0.5}},
  "grid": {"t": 0.0, "x": [1.0], "n_steps": 20, "n_paths": 4000},
  "truncation": {"k": 8},
  "checks": ["u_class", "moments"]
})json";

} // namespace

TEST_CASE("run_experiment: unknown keys are rejected with the key named") {
    auto outcome = run_experiment_text(R"({"alpha_": 1.0, "model": {"name": "linear_additive"},
                                           "measure": {"name": "zero"}})");
    CHECK(outcome.exit_code == 2);
    CHECK(outcome.error.find("alpha_") != std::string::npos);

    auto outcome2 = run_experiment_text(R"({"model": {"name": "linear_additive", "typo": 1},
                                            "measure": {"name": "zero"}})");
    CHECK(outcome2.exit_code == 2);
    CHECK(outcome2.error.find("typo") != std::string::npos);
}

TEST_CASE("run_experiment: end-to-end on the anchor model exits 0") {
    fs::path out = fs::temp_directory_path() / "levybsde_cli_e2e";
    fs::remove_all(out);
    RunOverrides overrides;
    overrides.out_dir = out.string();
    auto outcome = run_experiment_text(kSmallConfig, overrides);
    CHECK(outcome.exit_code == 0);
    CHECK(outcome.all_passed);
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "fields.bin"));
    CHECK(fs::exists(out / "csv" / "solution.csv"));
    CHECK(fs::exists(out / "checks" / "u_class_check.json"));
    // The cached bundle round-trips.
    bool found_bundle = false;
    for (const auto& e : fs::directory_iterator(out / "cache")) {
        auto bundle = read_bundle(e.path().string());
        CHECK(bundle.n_paths == 4000);
        found_bundle = true;
    }
    CHECK(found_bundle);
}

TEST_CASE("run_experiment: repeated runs give byte-identical CSV outputs") {
    fs::path out1 = fs::temp_directory_path() / "levybsde_cli_det1";
    fs::path out2 = fs::temp_directory_path() / "levybsde_cli_det2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    RunOverrides o1, o2;
    o1.out_dir = out1.string();
    o2.out_dir = out2.string();
    auto r1 = run_experiment_text(kSmallConfig, o1);
    auto r2 = run_experiment_text(kSmallConfig, o2);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    int compared = 0;
    for (const auto& e : fs::directory_iterator(out1 / "csv")) {
        auto other = out2 / "csv" / e.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(e.path()) == slurp(other));
        ++compared;
    }
    CHECK(compared >= 3);
}

TEST_CASE("describe: registry cards and unknown names") {
    CHECK(describe_entity("coupled_sine").find("NON-MONOTONE") != std::string::npos);
    CHECK(describe_entity("zero").find("mass 0") != std::string::npos);
    CHECK_THROWS_AS(describe_entity("nosuch"), UnknownName);
}

TEST_CASE("io: containers round-trip bit-exactly") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = make_model("linear_additive", {}, measure);
    auto tm = truncate(*measure, 4);
    auto grid = TimeGrid::uniform(0.0, 1.0, 7);
    double x0[1] = {0.3};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 100, 99);
    fs::path tmp = fs::temp_directory_path() / "levybsde_bundle_rt.bin";
    write_bundle(tmp.string(), bundle);
    auto back = read_bundle(tmp.string());
    CHECK(back.states == bundle.states);
    CHECK(back.left_limits == bundle.left_limits);
    CHECK(back.brownian == bundle.brownian);
    CHECK(back.jump_times == bundle.jump_times);
    CHECK(back.jump_offsets == bundle.jump_offsets);
    CHECK(back.seed == bundle.seed);
    CHECK(back.grid == bundle.grid);

    auto field = ValueField::from_function(
        2, {0.0, 0.5, 1.0}, {{-2.0, 2.0, 9}},
        [](int c, double t, std::span<const double> x) { return c + t * x[0]; });
    fs::path tmp2 = fs::temp_directory_path() / "levybsde_field_rt.bin";
    write_field(tmp2.string(), field);
    auto field_back = read_field(tmp2.string());
    REQUIRE(field_back.same_lattice(field));
    CHECK(ValueField::sup_lattice_distance(field, field_back) == 0.0);
    CHECK(field_back.envelope(1).c == field.envelope(1).c);
    CHECK(field_back.envelope(1).p == field.envelope(1).p);
}

TEST_CASE("run_experiment: numeric failures map to exit code 3") {
    // A divergent-density measure trips validation inside the pipeline.
    auto outcome = run_experiment_text(R"json({
      "seed": 7,
      "model": {"name": "linear_additive"},
      "measure": {"name": "tempered_stable", "params": {"alpha": 1.2}},
      "grid": {"n_steps": 5, "n_paths": 200},
      "solver": {"basis": {"degree": 12}}
    })json");
    CHECK(outcome.exit_code == 2); // basis cap is a config error
    auto outcome2 = run_experiment_text(R"json({
      "seed": 7,
      "model": {"name": "linear_additive"},
      "measure": {"name": "finite_uniform", "params": {"mass": -1.0}},
      "grid": {"n_steps": 5, "n_paths": 200}
    })json");
    CHECK(outcome2.exit_code == 3);
}

TEST_CASE("results are independent of the worker thread count") {
    fs::path out1 = fs::temp_directory_path() / "levybsde_threads1";
    fs::path out2 = fs::temp_directory_path() / "levybsde_threads2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    RunOverrides o1, o2;
    o1.out_dir = out1.string();
    o1.threads = 1;
    o2.out_dir = out2.string();
    o2.threads = 4;
    auto r1 = run_experiment_text(kSmallConfig, o1);
    auto r2 = run_experiment_text(kSmallConfig, o2);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    for (const auto& e : fs::directory_iterator(out1 / "csv")) {
        auto other = out2 / "csv" / e.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(e.path()) == slurp(other));
    }
}
