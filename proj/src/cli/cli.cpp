#include "hadm/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hadm/core/errors.hpp"
#include "hadm/core/format.hpp"
#include "hadm/core/solvers.hpp"
#include "hadm/prognostics/prognostics.hpp"
#include "hadm/rover/scenario.hpp"

namespace hadm::cli {

using core::format_number;
using Json = nlohmann::ordered_json;

namespace {

void write_to(const std::optional<std::string>& path, std::ostream& fallback,
              const std::function<void(std::ostream&)>& writer) {
    if (!path) {
        writer(fallback);
        return;
    }
    std::ofstream file(*path, std::ios::binary);
    if (!file) throw ConfigError("cannot open '" + *path + "' for writing");
    writer(file);
    if (!file) throw ConfigError("failed writing '" + *path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

/// Builtin id or file path to document text.
std::string scenario_text(const std::string& source) {
    std::string_view id = source;
    if (id.rfind("builtin:", 0) == 0) id.remove_prefix(8);
    if (id.size() == 1 && id[0] >= '1' && id[0] <= '0' + rover::kBuiltinScenarioCount) {
        return std::string(rover::builtin_scenario_text(id[0] - '0'));
    }
    if (source.rfind("builtin:", 0) == 0) throw ConfigError("unknown builtin scenario '" + source + "'");
    return read_file(source);
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : "n/a"; }

void write_trace_csv(std::ostream& out, const loop::LoopTrace& trace) {
    out << "step,provider,action,reward,cumulative,belief,observation\n";
    for (const auto& s : trace.steps) {
        out << s.step << ',' << core::csv_field(s.provider) << ',' << core::csv_field(s.action_label) << ','
            << format_number(s.reward) << ',' << format_number(s.cumulative) << ',' << core::csv_field(s.belief) << ','
            << core::csv_field(s.observation) << '\n';
    }
}

void write_summary(std::ostream& out, const mission::Mission& m, mission::Strategy strategy, std::uint64_t seed,
                   const mission::EpisodeResult& r) {
    out << "scenario: " << m.spec().name << '\n'
        << "strategy: " << mission::to_string(strategy) << '\n'
        << "seed: " << seed << '\n'
        << "ground truth: " << r.truth.describe() << '\n'
        << "outcome: " << r.outcome << '\n'
        << "final state: " << r.trace.final_label << '\n'
        << "cumulative reward: " << format_number(r.value()) << '\n'
        << "final battery wh: " << format_number(r.final_state.battery_wh) << '\n'
        << "deficit wh: " << format_number(r.final_state.deficit_wh) << '\n'
        << "mission time h: " << format_number(r.final_state.time_h) << '\n'
        << "steps: " << r.trace.steps.size() << '\n';
    if (r.trace.aborted) out << "aborted: " << *r.trace.aborted << '\n';
    for (const auto& e : r.shm_events) {
        out << "shm " << shm::to_string(e.stage) << " t=" << format_number(e.time_h) << ": " << e.detail << '\n';
    }
}

mission::MissionOptions mission_options(const RunConfig& c) {
    mission::MissionOptions o;
    o.rerun_prognosis = c.rerun_prognosis;
    o.use_ser = c.use_ser;
    return o;
}

std::string outcome_counts(const std::map<std::string, std::size_t>& outcomes) {
    std::string out;
    for (const auto& [name, count] : outcomes) out += (out.empty() ? "" : ";") + name + "=" + std::to_string(count);
    return out;
}

}  // namespace

Format parse_format(std::string_view text) {
    if (text == "table") return Format::table;
    if (text == "csv") return Format::csv;
    if (text == "jsonl") return Format::jsonl;
    throw ConfigError("unknown format '" + std::string(text) + "' (expected table, csv or jsonl)");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const ResourceError*>(&e)) return kExitResource;
    if (dynamic_cast<const ModelInconsistencyError*>(&e)) return kExitInconsistent;
    return kExitFailure;
}

void RunConfig::validate() const {
    if (rollouts == 0) throw ConfigError("rollout count must be at least 1");
    if (strategies.empty()) throw ConfigError("no strategy given");
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    config.validate();
    if (config.strategies.size() != 1) throw ConfigError("run takes exactly one strategy");
    const auto strategy = config.strategies.front();
    const mission::Mission m(rover::resolve_scenario(config.scenario), mission_options(config));
    const auto episode = m.run_seeded(strategy, config.overrides, config.seed);

    write_to(config.out, out, [&](std::ostream& o) {
        switch (config.format) {
            case Format::table: loop::write_trace_table(o, episode.trace); break;
            case Format::csv: write_trace_csv(o, episode.trace); break;
            case Format::jsonl: loop::write_trace_jsonl(o, episode.trace); break;
        }
    });
    std::ostream& summary = (config.out || config.format == Format::table) ? out : err;
    if (!config.out && config.format == Format::table) summary << '\n';
    write_summary(summary, m, strategy, config.seed, episode);
    return kExitOk;
}

int cmd_compare(const RunConfig& config, std::ostream& out) {
    config.validate();
    if (config.strategies.size() < 2) throw ConfigError("compare needs at least two strategies");
    const mission::Mission m(rover::resolve_scenario(config.scenario), mission_options(config));

    struct Row {
        std::string strategy;
        std::optional<double> analytic;
        mission::RolloutSummary summary;
    };
    std::vector<Row> rows;
    for (auto s : config.strategies) {
        rows.push_back(Row{mission::to_string(s), m.analytic_value(s, config.overrides),
                           m.rollouts(s, config.overrides, config.seed, config.rollouts, config.threads)});
        rows.back().summary.values.clear();
    }

    write_to(config.out, out, [&](std::ostream& o) {
        switch (config.format) {
            case Format::table:
                o << "scenario: " << m.spec().name << "  seed: " << config.seed << "  rollouts: " << config.rollouts
                  << '\n';
                o << std::left << std::setw(14) << "strategy" << std::setw(12) << "analytic" << std::setw(14) << "mean"
                  << std::setw(20) << "std_error"
                  << "outcomes\n";
                for (const auto& r : rows) {
                    o << std::left << std::setw(14) << r.strategy << std::setw(12) << optional_number(r.analytic)
                      << std::setw(14) << format_number(r.summary.mean) << std::setw(20)
                      << format_number(r.summary.standard_error) << outcome_counts(r.summary.outcomes) << '\n';
                }
                break;
            case Format::csv:
                o << "strategy,analytic,mean,standard_error,runs,outcomes\n";
                for (const auto& r : rows) {
                    o << r.strategy << ',' << optional_number(r.analytic) << ',' << format_number(r.summary.mean) << ','
                      << format_number(r.summary.standard_error) << ',' << r.summary.runs << ','
                      << core::csv_field(outcome_counts(r.summary.outcomes)) << '\n';
                }
                break;
            case Format::jsonl:
                for (const auto& r : rows) {
                    Json j;
                    j["strategy"] = r.strategy;
                    j["analytic"] = r.analytic ? Json(*r.analytic) : Json(nullptr);
                    j["mean"] = r.summary.mean;
                    j["standard_error"] = r.summary.standard_error;
                    j["runs"] = r.summary.runs;
                    j["outcomes"] = r.summary.outcomes;
                    o << j.dump() << '\n';
                }
                break;
        }
    });
    return kExitOk;
}

int cmd_predict(const PredictConfig& config, std::ostream& out) {
    const auto spec = rover::resolve_scenario(config.scenario);
    if (!spec.prognostics) throw ConfigError("scenario '" + spec.name + "' has no prognostics section");
    auto p = *spec.prognostics;
    auto set = [](double& field, const std::optional<double>& v) {
        if (v) field = *v;
    };
    set(p.model.initial_health, config.initial_health);
    set(p.model.nominal_rate, config.nominal_rate);
    set(p.model.high_rate_probability, config.high_rate_probability);
    set(p.model.extra_loss, config.extra_loss);
    set(p.model.dt, config.dt);
    set(p.threshold.min_health, config.min_health);
    set(p.horizon, config.horizon);
    set(p.sigma_max, config.sigma_max);
    p.model.validate();
    std::vector<double> fractions = config.health_fractions;
    if (fractions.empty()) fractions = p.health_fractions;
    if (fractions.empty()) fractions = {1.0};

    struct Row {
        double fraction;
        prognostics::PrognosisRequest request;
        prognostics::PrognosisResult result;
    };
    std::vector<Row> rows;
    for (double f : fractions) {
        prognostics::PrognosisRequest req;
        req.health_fraction = f;
        req.prediction_time = prognostics::nominal_prediction_time(p.model, f);
        req.horizon = p.horizon - req.prediction_time;
        req.validate();
        rows.push_back(Row{f, req, prognostics::prognose(p.model, req, p.threshold)});
    }
    const auto best = prognostics::max_prediction_health(p.model, p.sigma_max);
    auto within = [&](const Row& r) { return r.result.sigma <= p.sigma_max * (1.0 + 1e-12); };

    write_to(config.out, out, [&](std::ostream& o) {
        switch (config.format) {
            case Format::csv:
                o << "health_fraction,prediction_time,eol_deterministic,eol_stochastic,sigma,rul,within_sigma_max\n";
                for (const auto& r : rows) {
                    o << format_number(r.fraction) << ',' << format_number(r.request.prediction_time) << ','
                      << format_number(r.result.eol_deterministic) << ',' << format_number(r.result.eol_stochastic)
                      << ',' << format_number(r.result.sigma) << ',' << format_number(r.result.rul) << ','
                      << (within(r) ? "true" : "false") << '\n';
                }
                o << "\nsigma_max,max_prediction_health\n"
                  << format_number(p.sigma_max) << ',' << optional_number(best) << '\n';
                o << "\nhealth_fraction,step,time,probability\n";
                for (const auto& r : rows) {
                    for (const auto& e : r.result.distribution.events) {
                        o << format_number(r.fraction) << ',' << e.step << ',' << format_number(e.time) << ','
                          << format_number(e.probability) << '\n';
                    }
                    o << format_number(r.fraction) << ",residual,," << format_number(r.result.distribution.residual)
                      << '\n';
                }
                break;
            case Format::table:
                o << std::left << std::setw(10) << "health" << std::setw(10) << "t_pred" << std::setw(12) << "eol_det"
                  << std::setw(20) << "eol_stoch" << std::setw(20) << "sigma" << std::setw(8) << "rul"
                  << "within\n";
                for (const auto& r : rows) {
                    o << std::left << std::setw(10) << format_number(r.fraction) << std::setw(10)
                      << format_number(r.request.prediction_time) << std::setw(12)
                      << format_number(r.result.eol_deterministic) << std::setw(20)
                      << format_number(r.result.eol_stochastic) << std::setw(20) << format_number(r.result.sigma)
                      << std::setw(8) << format_number(r.result.rul) << (within(r) ? "yes" : "no") << '\n';
                }
                o << "largest health fraction with sigma <= " << format_number(p.sigma_max) << ": "
                  << optional_number(best) << '\n';
                for (const auto& r : rows) {
                    o << "end of life from health " << format_number(r.fraction) << " (mean step "
                      << format_number(r.result.distribution.mean_step()) << "):\n";
                    for (const auto& e : r.result.distribution.events) {
                        o << "  step " << e.step << "  t=" << format_number(e.time) << "  p=" << format_number(e.probability)
                          << '\n';
                    }
                    if (r.result.distribution.residual > 0.0) {
                        o << "  beyond horizon  p=" << format_number(r.result.distribution.residual) << '\n';
                    }
                }
                break;
            case Format::jsonl:
                for (const auto& r : rows) {
                    Json j;
                    j["kind"] = "sweep";
                    j["health_fraction"] = r.fraction;
                    j["prediction_time"] = r.request.prediction_time;
                    j["eol_deterministic"] = r.result.eol_deterministic;
                    j["eol_stochastic"] = r.result.eol_stochastic;
                    j["sigma"] = r.result.sigma;
                    j["rul"] = r.result.rul;
                    j["within_sigma_max"] = within(r);
                    o << j.dump() << '\n';
                }
                {
                    Json j;
                    j["kind"] = "max_prediction_health";
                    j["sigma_max"] = p.sigma_max;
                    j["value"] = best ? Json(*best) : Json(nullptr);
                    o << j.dump() << '\n';
                }
                for (const auto& r : rows) {
                    for (const auto& e : r.result.distribution.events) {
                        Json j;
                        j["kind"] = "eol";
                        j["health_fraction"] = r.fraction;
                        j["step"] = e.step;
                        j["time"] = e.time;
                        j["probability"] = e.probability;
                        o << j.dump() << '\n';
                    }
                }
                break;
        }
    });
    return kExitOk;
}

int cmd_solve(const SolveConfig& config, std::ostream& out) {
    const auto compiled = rover::compile(rover::resolve_scenario(config.scenario));
    const auto& p = compiled.problem();
    const auto u = core::value_iterate(p);
    const auto policy = core::extract_policy(p, u);
    const auto root = compiled.root();

    out << "scenario: " << compiled.spec().name << '\n'
        << "states: " << p.state_count() << '\n'
        << "horizon: " << p.horizon().value_or(0) << '\n'
        << "root value: " << format_number(u[root]) << '\n'
        << "root action: " << (p.is_terminal(root) ? std::string("(terminal)") : p.action_label(policy.at(root)))
        << '\n'
        << "most likely schedule:\n";
    for (const auto& step : mission::most_likely_path(compiled, policy)) {
        const auto& r = compiled.rover(step.next);
        out << "  " << std::left << std::setw(22) << p.action_label(step.action) << "-> t=" << format_number(r.time_h)
            << " h at " << r.waypoint << ", battery " << format_number(r.battery_wh) << " Wh";
        if (compiled.spec().thermal.enabled) out << ", motor " << format_number(r.motor_temp_c) << " C";
        out << ", " << rover::to_string(r.status) << '\n';
    }
    if (config.out) {
        const std::filesystem::path dir(*config.out);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
        write_to((dir / "values.csv").string(), out, [&](std::ostream& o) { core::write_values_csv(o, p, u); });
        write_to((dir / "policy.csv").string(), out, [&](std::ostream& o) { core::write_policy_csv(o, p, policy); });
        out << "wrote " << (dir / "values.csv").string() << " and " << (dir / "policy.csv").string() << '\n';
    }
    return kExitOk;
}

int cmd_export(const std::string& scenario, bool schema, const std::optional<std::string>& out_path, std::ostream& out) {
    std::string text;
    if (schema) {
        text = std::string(rover::scenario_schema_text());
    } else {
        text = scenario_text(scenario);
        rover::parse_scenario(text, scenario);
    }
    write_to(out_path, out, [&](std::ostream& o) {
        o << text;
        if (!text.empty() && text.back() != '\n') o << '\n';
    });
    return kExitOk;
}

int cmd_validate(const std::string& scenario, std::ostream& out) {
    const auto text = scenario_text(scenario);
    const auto diagnostics = rover::validate_scenario_text(text);
    if (diagnostics.empty()) {
        out << "ok: " << rover::parse_scenario(text, scenario).name << '\n';
        return kExitOk;
    }
    for (const auto& d : diagnostics) out << scenario << ": " << d.location << ": " << d.message << '\n';
    return kExitConfig;
}

int main_entry(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Health-aware decision making for planetary rover missions", "hadm"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    const std::vector<std::string> formats{"table", "csv", "jsonl"};
    RunConfig run;
    std::vector<std::string> strategy_names;
    std::string format = "table";

    auto add_episode_options = [&](CLI::App* sub) {
        sub->add_option("--scenario", run.scenario, "Builtin id 1-4 (or builtin:N) or a scenario file")
            ->capture_default_str();
        sub->add_option("--strategy", strategy_names, "hadm, shm-baseline, phm-commit or fixed-plan")->delimiter(',');
        sub->add_option("--seed", run.seed, "Seed of the single random generator")->capture_default_str();
        sub->add_option("--format", format, "table, csv or jsonl")->check(CLI::IsMember(formats))->capture_default_str();
        sub->add_option("--set", run.overrides, "Ground-truth assignment var=value (repeatable)");
        sub->add_option("--out", run.out, "Write the artifact to this file");
        sub->add_flag("--rerun-prognosis", run.rerun_prognosis, "Re-run the prognostic route choice at every branching");
        sub->add_flag("--no-ser{false}", run.use_ser, "Ignore the scenario's emergency-response layer");
    };

    auto* run_cmd = app.add_subcommand("run", "Run one episode and write its trace");
    add_episode_options(run_cmd);

    auto* compare_cmd = app.add_subcommand("compare", "Compare strategies analytically and by seeded rollouts");
    add_episode_options(compare_cmd);
    compare_cmd->add_option("--rollouts", run.rollouts, "Rollouts per strategy")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    compare_cmd->add_option("--threads", run.threads, "Worker threads (0 = hardware concurrency)");

    PredictConfig predict;
    std::string predict_format = "csv";
    auto* predict_cmd = app.add_subcommand("predict", "Prognostics sweep for a degradation model");
    predict_cmd->add_option("--scenario", predict.scenario, "Scenario with a prognostics section")->capture_default_str();
    predict_cmd->add_option("--initial-health", predict.initial_health);
    predict_cmd->add_option("--nominal-rate", predict.nominal_rate, "Health lost per unit time");
    predict_cmd->add_option("--high-rate-probability", predict.high_rate_probability);
    predict_cmd->add_option("--extra-loss", predict.extra_loss, "Extra health lost in a high-rate step");
    predict_cmd->add_option("--dt", predict.dt, "Step length");
    predict_cmd->add_option("--min-health", predict.min_health, "Event threshold");
    predict_cmd->add_option("--horizon", predict.horizon, "Prediction window from t = 0");
    predict_cmd->add_option("--sigma-max", predict.sigma_max, "Largest acceptable prediction uncertainty");
    predict_cmd->add_option("--points", predict.health_fractions, "Health fractions to predict from")->delimiter(',');
    predict_cmd->add_option("--format", predict_format, "table, csv or jsonl")
        ->check(CLI::IsMember(formats))
        ->capture_default_str();
    predict_cmd->add_option("--out", predict.out, "Write the artifact to this file");

    SolveConfig solve;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a scenario and write value and policy tables");
    solve_cmd->add_option("--scenario", solve.scenario)->capture_default_str();
    solve_cmd->add_option("--out", solve.out, "Directory for values.csv and policy.csv");

    std::string export_scenario = "1";
    bool export_schema = false;
    std::optional<std::string> export_out;
    auto* export_cmd = app.add_subcommand("export", "Print a scenario document or the scenario schema");
    export_cmd->add_option("--scenario", export_scenario)->capture_default_str();
    export_cmd->add_flag("--schema", export_schema, "Export the JSON schema instead");
    export_cmd->add_option("--out", export_out, "Write to this file");

    std::string validate_scenario;
    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario document and list every problem");
    validate_cmd->add_option("--scenario", validate_scenario)->required();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run_cmd->parsed() || compare_cmd->parsed()) {
            run.format = parse_format(format);
            if (!strategy_names.empty()) {
                run.strategies.clear();
                for (const auto& s : strategy_names) run.strategies.push_back(mission::parse_strategy(s));
            } else if (compare_cmd->parsed()) {
                run.strategies.assign(std::begin(mission::kAllStrategies), std::end(mission::kAllStrategies));
            }
            return run_cmd->parsed() ? cmd_run(run, out, err) : cmd_compare(run, out);
        }
        if (predict_cmd->parsed()) {
            predict.format = parse_format(predict_format);
            return cmd_predict(predict, out);
        }
        if (solve_cmd->parsed()) return cmd_solve(solve, out);
        if (export_cmd->parsed()) return cmd_export(export_scenario, export_schema, export_out, out);
        return cmd_validate(validate_scenario, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace hadm::cli
