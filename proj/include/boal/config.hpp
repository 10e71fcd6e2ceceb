#pragma once

// Run configuration shared by every CLI command. Stored as JSON; see
// README.md for the field reference.

#include "boal/bench.hpp"
#include "boal/eval.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boal {

struct SyntheticSource {
    StreamSpec streams;
    SyntheticFamily family;
    int prior_episodes = 36;
    int eval_episodes = 37;
};

/// Files as written by `boal bench`.
struct CsvSource {
    std::filesystem::path prior;
    std::filesystem::path eval;
    /// One trace CSV per expert, expert id = file stem.
    std::vector<std::filesystem::path> experts;
};

struct Seeds {
    std::uint64_t streams = 1;
    std::uint64_t family = 7;
};

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path session_dir = "sessions";
    /// Linear model file offered to sessions as "default" experts.
    std::optional<std::filesystem::path> experts;
    /// Episode CSV offered to sessions as the "default" prior.
    std::optional<std::filesystem::path> prior;
};

struct RunConfig {
    std::optional<SyntheticSource> synthetic;
    std::optional<CsvSource> csv;
    std::vector<Method> strategies{Method::base, Method::uniform, Method::secretary,
                                   Method::prophet_secretary, Method::empirical_threshold};
    std::vector<int> budgets{2, 3, 4, 10};
    double eta = 1.0;
    LossSpec loss;
    int ets_grid_size = 50;
    int runs_per_setting = 37;
    double alpha = 0.05;
    RmseMode rmse_mode = RmseMode::online;
    /// 0 keeps every available prior episode.
    std::size_t prior_cap = 36;
    Seeds seeds;
    std::filesystem::path output_dir = "out";
    ServeConfig serve;

    /// Range checks plus existence of the problem files.
    void validate() const;
    /// Existence of the serve.* files; checked only when serving, since
    /// `bench` is what usually creates them.
    void validate_serve() const;
    ProtocolSpec protocol(int jobs) const;
};

/// Throws ConfigError naming the offending field. Relative paths are
/// resolved against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

/// Hex digest of the canonical serialization.
std::string config_digest(const RunConfig& c);

/// The synthetic problem as held in memory: pool first, then labelled evaluation episodes.
struct GeneratedProblem {
    GeneratedFamily family;
    BenchmarkProblem problem;
};
GeneratedProblem generate_problem(const SyntheticSource& source, const Seeds& seeds);

/// Builds the problem named by the config (synthetic or CSV).
BenchmarkProblem load_problem(const RunConfig& c);

// Linear model files: {"models": [{"id": ..., "theta": [...], "kappa": ...}, ...]}
nlohmann::json models_to_json(std::span<const std::shared_ptr<const LinearResponseModel>> models);
std::vector<std::shared_ptr<const LinearResponseModel>> load_models(const std::filesystem::path& path);

} // namespace boal
