#pragma once

// Experimental protocol: leave-one-out priors, budgets x strategies grid,
// RMSE and paired Wilcoxon signed-rank comparisons.

#include "boal/engine.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boal {

double rmse(std::span<const double> predictions, std::span<const double> labels);

struct WilcoxonResult {
    /// min(W+, W-)
    double statistic = 0.0;
    double w_plus = 0.0;
    double w_minus = 0.0;
    /// Pairs left after dropping zero differences.
    int n = 0;
    double p_value = 1.0;
    bool significant = false;
    /// Sign of the median of a - b (+1: a tends to be larger).
    int direction = 0;
    bool exact = false;
};

/// Two-sided paired signed-rank test. Zero differences are dropped and tied
/// magnitudes share their average rank. For n <= 12 the p-value comes from
/// the exact null distribution of W+ given those ranks; above that a normal
/// approximation with tie and continuity corrections is used.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    double alpha = 0.05);

inline constexpr int kWilcoxonExactMax = 12;

enum class RmseMode {
    online, ///< per-step predictions with the weights in effect at each step
    posthoc ///< final weights applied to the whole horizon
};

std::string rmse_mode_name(RmseMode m);
RmseMode parse_rmse_mode(const std::string& name);

struct ProtocolSpec {
    std::vector<int> budgets{2, 3, 4, 10};
    std::vector<Method> strategies{Method::base, Method::uniform, Method::secretary,
                                   Method::prophet_secretary, Method::empirical_threshold};
    /// Number of evaluation episodes used (one run each per strategy and budget).
    int runs_per_setting = 37;
    double eta = 1.0;
    double alpha = 0.05;
    RmseMode rmse_mode = RmseMode::online;
    EngineConfig engine;
    /// Worker threads for independent cells.
    int jobs = 1;

    void validate() const;
};

/// Labelled evaluation episodes plus optional extra unlabeled history.
///
/// The prior for evaluation episode e is every other evaluation episode
/// followed by the history pool, truncated to engine.prior_cap when set.
struct BenchmarkProblem {
    std::shared_ptr<const Committee> committee;
    std::vector<EpisodePtr> evaluation;
    std::vector<EpisodePtr> pool;
};

/// Leave-one-out prior for evaluation episode `index` (nullptr when empty).
std::shared_ptr<const EpisodicPrior> leave_one_out_prior(const BenchmarkProblem& problem,
                                                         std::size_t index, std::size_t cap);

struct RunRecord {
    Method method = Method::base;
    int budget = 0;
    std::string episode_id;
    double rmse = 0.0;
    std::vector<int> query_times;
    std::vector<double> selected_scores;
    std::vector<double> hindsight_scores;
};

struct CellSummary {
    Method method = Method::base;
    int budget = 0;
    /// One entry per evaluation episode, in episode order.
    std::vector<double> rmse;
    double mean_rmse = 0.0;
    /// Means over every query of every run (empty runs contribute nothing).
    std::optional<double> mean_selected_score;
    std::optional<double> mean_hindsight_score;
};

struct PairwiseTest {
    int budget = 0;
    Method a = Method::base;
    Method b = Method::base;
    std::optional<WilcoxonResult> result;
    /// Why result is absent (e.g. identical RMSE vectors).
    std::string note;
};

struct ProtocolResult {
    std::vector<int> budgets;
    std::vector<Method> strategies;
    std::vector<std::string> episode_ids;
    std::vector<RunRecord> runs;
    std::vector<CellSummary> cells;
    std::vector<PairwiseTest> tests;
    /// Per budget: largest mean hindsight score over the querying strategies.
    std::map<int, double> max_oracle;

    const CellSummary& cell(Method m, int budget) const;
    const PairwiseTest& test(int budget, Method a, Method b) const;
};

ProtocolResult run_protocol(const ProtocolSpec& spec, const BenchmarkProblem& problem);

/// Selected-score comparison per budget. Each strategy replays its own
/// weight trajectory; means pool every query of every evaluation episode.
struct ScoreStudy {
    struct Row {
        int budget = 0;
        std::map<Method, double> selected;
        std::map<Method, double> hindsight;
        /// Largest pooled hindsight mean over the strategies.
        double max_oracle = 0.0;
    };
    std::vector<Method> methods;
    std::vector<Row> rows;

    const Row& row(int budget) const;
};

/// Base is skipped: it never queries.
ScoreStudy run_score_study(const ProtocolSpec& spec, const BenchmarkProblem& problem);

} // namespace boal
