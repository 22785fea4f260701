#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hadm/mission/mission.hpp"

namespace hadm::cli {

enum class Format { table, csv, jsonl };

Format parse_format(std::string_view text);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitResource = 3;
inline constexpr int kExitInconsistent = 4;

/// Maps an exception to its exit code.
int exit_code_for(const std::exception& e);

struct RunConfig {
    /// Builtin id ("1".."4", "builtin:N") or a scenario file path.
    std::string scenario = "2";
    std::vector<mission::Strategy> strategies{mission::Strategy::hadm};
    std::uint64_t seed = 0;
    std::size_t rollouts = 1000;
    /// 0 picks the hardware concurrency.
    std::size_t threads = 0;
    Format format = Format::table;
    /// Ground-truth assignments such as terrain=difficult-both or redo=true.
    std::vector<std::string> overrides;
    std::optional<std::string> out;
    bool rerun_prognosis = false;
    bool use_ser = true;

    /// Throws ConfigError for a zero rollout count.
    void validate() const;
};

/// One episode: the trace goes to --out (or stdout) and the summary to stdout
/// (stderr when the trace occupies stdout in a machine format).
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);
/// Analytic and Monte Carlo values per strategy; needs at least two strategies.
int cmd_compare(const RunConfig& config, std::ostream& out);

struct PredictConfig {
    std::string scenario = "1";
    std::optional<double> initial_health, nominal_rate, high_rate_probability, extra_loss, dt, min_health, horizon,
        sigma_max;
    std::vector<double> health_fractions;
    Format format = Format::csv;
    std::optional<std::string> out;
};

/// Uncertainty sweep, sigma-bounded prediction point, end-of-life
/// distributions and RUL for the requested health fractions.
int cmd_predict(const PredictConfig& config, std::ostream& out);

struct SolveConfig {
    std::string scenario = "2";
    /// Directory receiving values.csv and policy.csv.
    std::optional<std::string> out;
};

/// Value iteration on the compiled scenario; prints the root value, root
/// action and the most likely optimal schedule.
int cmd_solve(const SolveConfig& config, std::ostream& out);

/// Scenario (or the schema) as JSON.
int cmd_export(const std::string& scenario, bool schema, const std::optional<std::string>& out_path, std::ostream& out);
/// Prints every diagnostic of a scenario document; exit 2 when any.
int cmd_validate(const std::string& scenario, std::ostream& out);

/// Parses `args` (without the program name) and dispatches.
int main_entry(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace hadm::cli
