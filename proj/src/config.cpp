#include "levybsde/config.hpp"

#include "levybsde/errors.hpp"
#include "levybsde/io.hpp"
#include "levybsde/parallel.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace levybsde {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown_keys(const json& node, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    if (!node.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (auto it = node.begin(); it != node.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in '" + where + "'");
    }
}

std::map<std::string, double> params_of(const json& node, const std::string& where) {
    std::map<std::string, double> params;
    if (!node.contains("params")) return params;
    if (!node["params"].is_object()) throw ConfigError("'" + where + ".params' must be an object");
    for (auto it = node["params"].begin(); it != node["params"].end(); ++it) {
        if (!it.value().is_number())
            throw ConfigError("parameter '" + it.key() + "' in '" + where + "' must be a number");
        params[it.key()] = it.value().get<double>();
    }
    return params;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const fs::path& path, const CheckReport::Table& table) {
    std::ofstream out(path);
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << table.columns[c] << (c + 1 < table.columns.size() ? "," : "\n");
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << fmt17(row[c]) << (c + 1 < row.size() ? "," : "\n");
    }
}

json report_to_json(const CheckReport& report) {
    json j;
    j["name"] = report.name;
    j["pass"] = report.pass;
    j["threshold"] = report.threshold;
    j["digest"] = report.digest;
    j["statistics"] = report.statistics;
    json tables = json::array();
    for (const auto& t : report.artifacts) {
        json jt;
        jt["name"] = t.name;
        jt["columns"] = t.columns;
        jt["rows"] = t.rows;
        tables.push_back(jt);
    }
    j["artifacts"] = tables;
    return j;
}

struct ParsedConfig {
    std::uint64_t seed = 12345;
    std::string out_dir = "results";
    std::shared_ptr<const LevyMeasure> measure;
    ModelSpec model;
    double t0 = 0.0;
    std::vector<double> x0;
    std::vector<double> x_ladder;
    int n_steps = 50;
    int n_paths = 20000;
    int truncation_k = 8;
    std::vector<int> truncation_ks;
    RegressionBasis basis;
    QEstimator estimator = QEstimator::Representation;
    SolverSettings solver;
    bool fd_enabled = false;
    int fd_nx = 401;
    int fd_nt = 400;
    double fd_box = 4.0;
    std::vector<json> checks;
    json echo;
};

ParsedConfig parse_config(const json& root) {
    reject_unknown_keys(root,
                        {"seed", "out", "model", "measure", "grid", "truncation", "solver", "fd",
                         "checks", "threads"},
                        "config");
    ParsedConfig cfg;
    cfg.echo = root;
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
            throw ConfigError("'seed' must be an integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("out")) cfg.out_dir = root["out"].get<std::string>();

    if (!root.contains("measure")) throw ConfigError("config requires a 'measure' section");
    reject_unknown_keys(root["measure"], {"name", "params"}, "measure");
    std::string measure_name = root["measure"].value("name", "");
    cfg.measure = std::make_shared<const LevyMeasure>(
        make_measure(measure_name, params_of(root["measure"], "measure")));

    if (!root.contains("model")) throw ConfigError("config requires a 'model' section");
    reject_unknown_keys(root["model"], {"name", "params"}, "model");
    std::string model_name = root["model"].value("name", "");
    cfg.model = make_model(model_name, params_of(root["model"], "model"), cfg.measure);

    if (root.contains("grid")) {
        reject_unknown_keys(root["grid"], {"t", "x", "x_ladder", "n_steps", "n_paths"}, "grid");
        const auto& g = root["grid"];
        cfg.t0 = g.value("t", 0.0);
        if (g.contains("x")) cfg.x0 = g["x"].get<std::vector<double>>();
        if (g.contains("x_ladder")) cfg.x_ladder = g["x_ladder"].get<std::vector<double>>();
        cfg.n_steps = g.value("n_steps", 50);
        cfg.n_paths = g.value("n_paths", 20000);
    }
    if (cfg.x0.empty()) cfg.x0.assign(static_cast<std::size_t>(cfg.model.dims.state_k), 0.0);
    if (static_cast<int>(cfg.x0.size()) != cfg.model.dims.state_k)
        throw ConfigError("'grid.x' dimension does not match the model state dimension");
    if (cfg.n_steps < 1 || cfg.n_paths < 20)
        throw ConfigError("'grid.n_steps' must be >= 1 and 'grid.n_paths' >= 20");

    if (root.contains("truncation")) {
        reject_unknown_keys(root["truncation"], {"k", "ks"}, "truncation");
        cfg.truncation_k = root["truncation"].value("k", 8);
        if (root["truncation"].contains("ks"))
            cfg.truncation_ks = root["truncation"]["ks"].get<std::vector<int>>();
    }
    if (cfg.truncation_k < 1) throw ConfigError("'truncation.k' must be >= 1");

    if (root.contains("solver")) {
        reject_unknown_keys(root["solver"],
                            {"basis", "estimator", "field_nx", "picard_delta", "picard_tol",
                             "picard_cap", "inner_cap"},
                            "solver");
        const auto& s = root["solver"];
        if (s.contains("basis")) {
            reject_unknown_keys(s["basis"], {"family", "degree", "cells"}, "solver.basis");
            std::string family = s["basis"].value("family", "polynomial");
            if (family == "polynomial")
                cfg.basis.family = RegressionBasis::Family::Polynomial;
            else if (family == "local")
                cfg.basis.family = RegressionBasis::Family::Local;
            else
                throw ConfigError("unknown basis family '" + family + "'");
            cfg.basis.degree = s["basis"].value("degree", 2);
            cfg.basis.cells = s["basis"].value("cells", 16);
        }
        std::string est = s.value("estimator", "representation");
        if (est == "representation")
            cfg.estimator = QEstimator::Representation;
        else if (est == "martingale")
            cfg.estimator = QEstimator::Martingale;
        else
            throw ConfigError("unknown estimator '" + est + "'");
        cfg.solver.field_nx = s.value("field_nx", cfg.solver.field_nx);
        cfg.solver.picard_delta = s.value("picard_delta", cfg.solver.picard_delta);
        cfg.solver.picard_tol = s.value("picard_tol", cfg.solver.picard_tol);
        cfg.solver.picard_iteration_cap = s.value("picard_cap", cfg.solver.picard_iteration_cap);
        cfg.solver.inner_fixpoint_cap = s.value("inner_cap", cfg.solver.inner_fixpoint_cap);
    }

    if (root.contains("fd")) {
        reject_unknown_keys(root["fd"], {"enabled", "nx", "nt", "box_half_width"}, "fd");
        cfg.fd_enabled = root["fd"].value("enabled", true);
        cfg.fd_nx = root["fd"].value("nx", 401);
        cfg.fd_nt = root["fd"].value("nt", 400);
        cfg.fd_box = root["fd"].value("box_half_width", 4.0);
    }

    if (root.contains("checks")) {
        if (!root["checks"].is_array()) throw ConfigError("'checks' must be an array");
        for (const auto& entry : root["checks"]) {
            json c;
            if (entry.is_string()) {
                c["name"] = entry.get<std::string>();
            } else if (entry.is_object()) {
                c = entry;
            } else {
                throw ConfigError("each entry of 'checks' must be a string or an object");
            }
            cfg.checks.push_back(c);
        }
    }
    return cfg;
}

ProbeSettings probe_settings_of(const ParsedConfig& cfg) {
    ProbeSettings s;
    s.n_steps = cfg.n_steps;
    s.n_paths = cfg.n_paths;
    s.truncation_k = cfg.truncation_k;
    s.basis = cfg.basis;
    s.estimator = cfg.estimator;
    s.solver = cfg.solver;
    s.seed = cfg.seed;
    s.with_fd = cfg.fd_enabled;
    s.fd_nx = cfg.fd_nx;
    s.fd_nt = cfg.fd_nt;
    s.fd_box_half_width = cfg.fd_box;
    return s;
}

CheckReport run_check(const ParsedConfig& cfg, const json& entry, const ModelSpec& spec,
                      const PathBundle& bundle, const BsdeSolution& direct) {
    std::string name = entry.value("name", "");
    if (name == "feynman_kac") {
        reject_unknown_keys(entry, {"name", "points", "markov_tolerance", "fd_tolerance"},
                            "checks.feynman_kac");
        ProbeSettings s = probe_settings_of(cfg);
        s.markov_tolerance = entry.value("markov_tolerance", s.markov_tolerance);
        s.fd_tolerance = entry.value("fd_tolerance", s.fd_tolerance);
        std::vector<std::pair<double, std::vector<double>>> points;
        if (entry.contains("points")) {
            for (const auto& pt : entry["points"]) {
                double t = pt.at(0).get<double>();
                std::vector<double> x;
                for (std::size_t d = 1; d < pt.size(); ++d) x.push_back(pt[d].get<double>());
                points.push_back({t, x});
            }
        } else {
            points.push_back({cfg.t0, cfg.x0});
            auto shifted = cfg.x0;
            shifted[0] += 0.5;
            points.push_back({cfg.t0 + 0.4 * (spec.horizon - cfg.t0), shifted});
        }
        return feynman_kac_probe(spec, points, s);
    }
    if (name == "jump_representation") {
        reject_unknown_keys(entry, {"name", "threshold", "bins_per_branch"},
                            "checks.jump_representation");
        auto mart = solve_lsmc(spec, bundle, cfg.basis, QEstimator::Martingale, cfg.solver);
        return jump_representation_check(spec, mart, bundle, entry.value("threshold", 1e-2),
                                         entry.value("bins_per_branch", 6));
    }
    if (name == "u_class") {
        reject_unknown_keys(entry, {"name", "n_pairs"}, "checks.u_class");
        Box box;
        for (const auto& a : direct.u_fields.axes()) {
            box.lo.push_back(a.lo);
            box.hi.push_back(a.hi);
        }
        return u_class_check(direct.u_fields, box, entry.value("n_pairs", 4000), cfg.seed);
    }
    if (name == "up_moment") {
        reject_unknown_keys(entry, {"name", "ladder", "p"}, "checks.up_moment");
        std::vector<double> ladder = cfg.x_ladder;
        if (entry.contains("ladder")) ladder = entry["ladder"].get<std::vector<double>>();
        if (ladder.empty()) ladder = {0.0, 1.0, 2.0, 4.0, 8.0};
        return up_moment_check(spec, ladder, entry.value("p", 2), probe_settings_of(cfg));
    }
    if (name == "uniqueness_fixed_point") {
        reject_unknown_keys(entry, {"name", "max_outer"}, "checks.uniqueness_fixed_point");
        auto u0 = ValueField::from_function(
            spec.dims.components_m, {0.0, spec.horizon},
            {{-4.0, 4.0, 17}}, [](int, double, std::span<const double>) { return 0.0; });
        return uniqueness_fixed_point(spec, u0, entry.value("max_outer", 10),
                                      probe_settings_of(cfg));
    }
    if (name == "truncation_study") {
        reject_unknown_keys(entry, {"name", "n_paths"}, "checks.truncation_study");
        if (cfg.truncation_ks.empty())
            throw ConfigError("truncation_study requires 'truncation.ks'");
        auto grid = TimeGrid::uniform(cfg.t0, spec.horizon, cfg.n_steps);
        auto table = truncation_study(spec, cfg.t0, cfg.x0, grid, cfg.truncation_ks,
                                      entry.value("n_paths", cfg.n_paths), cfg.seed, cfg.basis,
                                      cfg.estimator, cfg.solver);
        CheckReport report;
        report.name = "truncation_study";
        report.digest["seed"] = std::to_string(cfg.seed);
        report.digest["n_paths"] = std::to_string(entry.value("n_paths", cfg.n_paths));
        report.digest["model"] = spec.name;
        CheckReport::Table t;
        t.name = "per_k";
        t.columns = {"k", "tail_mass", "e_x", "e_y", "e_u", "e_z"};
        for (std::size_t i = 0; i < table.ks.size(); ++i)
            t.rows.push_back({static_cast<double>(table.ks[i]), table.tail_mass[i], table.e_x[i],
                              table.e_y[i], table.e_u[i], table.e_z[i]});
        report.artifacts.push_back(std::move(t));
        report.statistics["fitted_c"] = table.fitted_c;
        report.statistics["spearman_x"] = table.spearman_x;
        bool monotone = true;
        for (std::size_t i = 1; i + 1 < table.e_x.size(); ++i)
            if (table.e_x[i] > table.e_x[i - 1] * 1.10 + 1e-15) monotone = false;
        report.statistics["monotone_within_noise"] = monotone ? 1.0 : 0.0;
        report.threshold = 0.9;
        report.pass = monotone && table.spearman_x >= 0.9;
        return report;
    }
    if (name == "picard") {
        reject_unknown_keys(entry, {"name", "ratio_threshold"}, "checks.picard");
        auto sol = picard_subinterval(spec, bundle, cfg.basis, cfg.solver);
        CheckReport report;
        report.name = "picard";
        report.digest["seed"] = std::to_string(cfg.seed);
        report.digest["n_paths"] = std::to_string(cfg.n_paths);
        report.digest["model"] = spec.name;
        double ratio_threshold = entry.value("ratio_threshold", 0.6);
        double worst_ratio = 0.0;
        bool any = false;
        CheckReport::Table t;
        t.name = "window_deltas";
        t.columns = {"window", "iteration", "delta"};
        for (std::size_t w = 0; w < sol.picard_deltas.size(); ++w) {
            const auto& deltas = sol.picard_deltas[w];
            for (std::size_t l = 0; l < deltas.size(); ++l) {
                t.rows.push_back({static_cast<double>(w), static_cast<double>(l + 1), deltas[l]});
                if (l >= 2 && deltas[l - 1] > 10.0 * cfg.solver.picard_tol) {
                    worst_ratio = std::max(worst_ratio, deltas[l] / deltas[l - 1]);
                    any = true;
                }
            }
        }
        report.artifacts.push_back(std::move(t));
        report.statistics["worst_ratio"] = worst_ratio;
        report.statistics["measured_windows"] = any ? 1.0 : 0.0;
        report.threshold = ratio_threshold;
        report.pass = !any || worst_ratio <= ratio_threshold;
        return report;
    }
    if (name == "moments") {
        reject_unknown_keys(entry, {"name", "p"}, "checks.moments");
        int p = entry.value("p", 2);
        auto rep = moment_check(bundle, nullptr, p);
        CheckReport report;
        report.name = "moments";
        report.digest["seed"] = std::to_string(cfg.seed);
        report.digest["n_paths"] = std::to_string(cfg.n_paths);
        report.digest["p"] = std::to_string(p);
        CheckReport::Table t;
        t.name = "per_node";
        t.columns = {"s", "statistic"};
        for (std::size_t i = 0; i < rep.s_nodes.size(); ++i)
            t.rows.push_back({rep.s_nodes[i], rep.statistic[i]});
        report.artifacts.push_back(std::move(t));
        report.statistics["fitted_constant"] = rep.fitted_constant;
        report.statistics["max_rel_residual"] = rep.max_rel_residual;
        report.statistics["monotone"] = rep.monotone ? 1.0 : 0.0;
        report.threshold = 0.15;
        report.pass = rep.monotone && rep.max_rel_residual < 0.15;
        return report;
    }
    throw ConfigError("unknown check '" + name + "'");
}

RunOutcome run_parsed(const json& root, const RunOverrides& overrides) {
    RunOutcome outcome;
    ParsedConfig cfg = parse_config(root);
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.threads) set_max_threads(*overrides.threads);
    if (root.contains("threads")) set_max_threads(root["threads"].get<int>());
    outcome.out_dir = cfg.out_dir;

    fs::create_directories(cfg.out_dir);
    fs::create_directories(fs::path(cfg.out_dir) / "cache");
    fs::create_directories(fs::path(cfg.out_dir) / "checks");
    fs::create_directories(fs::path(cfg.out_dir) / "csv");

    json manifest;
    manifest["config"] = cfg.echo;
    manifest["version"] = kLibraryVersion;
    manifest["seed"] = cfg.seed;
    manifest["threads"] = max_threads();
    json timings = json::object();

    auto timed = [&](const char* label, auto&& fn) {
        auto start = std::chrono::steady_clock::now();
        auto result = fn();
        auto stop = std::chrono::steady_clock::now();
        timings[label] = std::chrono::duration<double>(stop - start).count();
        return result;
    };

    // Forward simulation, cached by the content hash of everything that
    // determines it.
    auto grid = TimeGrid::uniform(cfg.t0, cfg.model.horizon, cfg.n_steps);
    json sim_key;
    sim_key["model"] = cfg.echo.contains("model") ? cfg.echo["model"] : json{};
    sim_key["measure"] = cfg.echo.contains("measure") ? cfg.echo["measure"] : json{};
    sim_key["grid"] = cfg.echo.contains("grid") ? cfg.echo["grid"] : json{};
    sim_key["k"] = cfg.truncation_k;
    sim_key["seed"] = cfg.seed;
    std::uint64_t hash = content_hash(sim_key.dump());
    char hash_name[32];
    std::snprintf(hash_name, sizeof(hash_name), "%016llx",
                  static_cast<unsigned long long>(hash));
    fs::path bundle_path = fs::path(cfg.out_dir) / "cache" / ("bundle_" + std::string(hash_name) + ".bin");

    PathBundle bundle = timed("simulate", [&]() {
        if (fs::exists(bundle_path)) {
            auto cached = read_bundle(bundle_path.string());
            if (cached.n_paths == cfg.n_paths && cached.grid == grid &&
                cached.truncation_k == cfg.truncation_k && cached.seed == cfg.seed)
                return cached;
        }
        auto tm = truncate(*cfg.measure, cfg.truncation_k);
        auto fresh = simulate(cfg.model, tm, cfg.t0, cfg.x0, grid, cfg.n_paths, cfg.seed);
        write_bundle(bundle_path.string(), fresh);
        return fresh;
    });
    manifest["bundle"] = bundle_path.string();

    BsdeSolution direct = timed("solve", [&]() {
        return solve_lsmc(cfg.model, bundle, cfg.basis, cfg.estimator, cfg.solver);
    });
    fs::path field_path = fs::path(cfg.out_dir) / "fields.bin";
    write_field(field_path.string(), direct.u_fields);
    manifest["fields"] = field_path.string();
    manifest["regression_tolerance"] = direct.regression_tolerance;

    // Direct-solution summary table.
    {
        CheckReport::Table t;
        t.name = "solution";
        t.columns = {"component", "y0", "regression_tolerance"};
        for (int i = 0; i < cfg.model.dims.components_m; ++i)
            t.rows.push_back({static_cast<double>(i), direct.y_at(i, 0, 0),
                              direct.regression_tolerance});
        write_csv(fs::path(cfg.out_dir) / "csv" / "solution.csv", t);
    }

    bool all_pass = true;
    json check_summaries = json::array();
    for (const auto& entry : cfg.checks) {
        std::string name = entry.value("name", "");
        CheckReport report = timed(("check_" + name).c_str(), [&]() {
            return run_check(cfg, entry, cfg.model, bundle, direct);
        });
        all_pass = all_pass && report.pass;
        std::ofstream jout(fs::path(cfg.out_dir) / "checks" / (report.name + ".json"));
        jout << report_to_json(report).dump(2) << "\n";
        for (const auto& table : report.artifacts)
            write_csv(fs::path(cfg.out_dir) / "csv" / (report.name + "_" + table.name + ".csv"),
                      table);
        json summary;
        summary["name"] = report.name;
        summary["pass"] = report.pass;
        summary["statistics"] = report.statistics;
        check_summaries.push_back(summary);
        outcome.reports.push_back(std::move(report));
    }
    manifest["checks"] = check_summaries;
    manifest["timings"] = timings;

    fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.json";
    std::ofstream mout(manifest_path);
    mout << manifest.dump(2) << "\n";
    outcome.manifest_path = manifest_path.string();
    outcome.all_passed = all_pass;
    outcome.exit_code = all_pass ? 0 : 1;
    return outcome;
}

} // namespace

RunOutcome run_experiment_text(const std::string& config_text, const RunOverrides& overrides) {
    RunOutcome outcome;
    json root;
    try {
        root = json::parse(config_text);
    } catch (const json::exception& e) {
        outcome.exit_code = 2;
        outcome.all_passed = false;
        outcome.error = std::string("config parse error: ") + e.what();
        return outcome;
    }
    try {
        return run_parsed(root, overrides);
    } catch (const ConfigError& e) {
        outcome.exit_code = 2;
        outcome.all_passed = false;
        outcome.error = e.what();
        return outcome;
    } catch (const Error& e) {
        outcome.exit_code = 3;
        outcome.all_passed = false;
        outcome.error = std::string(e.code()) + ": " + e.what();
        return outcome;
    } catch (const std::exception& e) {
        outcome.exit_code = 3;
        outcome.all_passed = false;
        outcome.error = e.what();
        return outcome;
    }
}

RunOutcome run_experiment(const std::string& config_path, const RunOverrides& overrides) {
    std::ifstream in(config_path);
    if (!in) {
        RunOutcome outcome;
        outcome.exit_code = 2;
        outcome.all_passed = false;
        outcome.error = "cannot open config file '" + config_path + "'";
        return outcome;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return run_experiment_text(buffer.str(), overrides);
}

std::string describe_entity(const std::string& name) {
    for (const auto& m : model_names())
        if (m == name) return describe_model(name);
    for (const auto& m : measure_names())
        if (m == name) return describe_measure(name);
    throw UnknownName("no model or measure named '" + name + "'");
}

} // namespace levybsde
