#pragma once

// Synthetic BOAL problems (perturbed-parameter model families over seasonal
// streams) and CSV ingestion of episodes and expert traces.

#include "boal/ensemble.hpp"
#include "boal/prior.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace boal {

enum class StreamProcess { ar1_seasonal, iid_uniform };

std::string process_name(StreamProcess p);
StreamProcess parse_process(const std::string& name);

struct StreamSpec {
    int horizon = 200;
    int dimension = 4;
    StreamProcess process = StreamProcess::ar1_seasonal;
    /// AR(1) coefficient of the deviation from the seasonal curve, in (-1, 1).
    double phi = 0.9;
    /// Peak height of the seasonal curve.
    double amplitude = 0.4;
    /// Standard deviation of the innovation noise.
    double noise = 0.02;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Seasonal mean shared by every feature: one half-sine over the horizon.
double seasonal_mean(const StreamSpec& spec, int t);

/// `count` independent episodes with ids "<prefix>001", "<prefix>002", ...
EpisodicPrior gen_streams(const StreamSpec& spec, int count, const std::string& id_prefix = "ep");

/// f(x_{1:t}) = sum_{s<=t} kappa^(t-s) <theta, x_s>.
class LinearResponseModel final : public Expert {
public:
    LinearResponseModel(std::string id, std::vector<double> theta, double kappa);

    const std::string& id() const override { return id_; }
    double predict(const Episode& episode, int t) const override;
    std::vector<double> predict_prefix(const Episode& episode, int upto) const override;

    const std::vector<double>& theta() const noexcept { return theta_; }
    double kappa() const noexcept { return kappa_; }

private:
    std::string id_;
    std::vector<double> theta_;
    double kappa_;
};

struct SyntheticFamily {
    std::vector<double> theta{1.0, 0.6, -0.4, 0.8};
    /// Relative half-width of the uniform parameter noise.
    double perturbation = 0.10;
    int n_models = 15;
    double kappa = 0.9;
    /// Which generated model plays the target; the others are the experts.
    int target_index = 0;
    std::uint64_t seed = 7;

    void validate() const;
};

struct GeneratedFamily {
    std::shared_ptr<const LinearResponseModel> target;
    std::vector<std::shared_ptr<const LinearResponseModel>> experts;

    std::vector<ExpertPtr> expert_ptrs() const;
};

/// Models theta_i = theta * (1 + u_i), u_i ~ U(-rho, rho) per coordinate.
GeneratedFamily gen_family(const SyntheticFamily& family);

/// Copy of the episode labelled with the target's predictions.
Episode label_with(const Episode& episode, const Expert& target);

/// Expert backed by precomputed predictions keyed by (episode id, t).
class TraceExpert final : public Expert {
public:
    TraceExpert(std::string id, std::map<std::string, std::vector<double>> traces);

    const std::string& id() const override { return id_; }
    double predict(const Episode& episode, int t) const override;
    std::vector<double> predict_prefix(const Episode& episode, int upto) const override;

private:
    std::string id_;
    std::map<std::string, std::vector<double>> traces_;
};

// CSV formats
//   episodes: episode_id,t,f_1,...,f_d[,label]   (t 1-based, contiguous, sorted)
//   expert trace: episode_id,t,prediction        (one file per expert)

std::vector<Episode> load_episode_file(const std::filesystem::path& path);
EpisodicPrior load_episodes(const std::filesystem::path& path);
/// Expert id is the file stem.
std::shared_ptr<const TraceExpert> load_expert_traces(const std::filesystem::path& path);

void write_episodes(const std::filesystem::path& path, std::span<const EpisodePtr> episodes);
void write_expert_trace(const std::filesystem::path& path, const Expert& expert,
                        std::span<const EpisodePtr> episodes);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

} // namespace boal
