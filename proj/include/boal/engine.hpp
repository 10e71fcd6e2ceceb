#pragma once

// Budgeted online active learning loop: B segments, one query per segment,
// a Hedge update right after each query.

#include "boal/ensemble.hpp"
#include "boal/prior.hpp"
#include "boal/stopping.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace boal {

/// Query-selection methods. `base` never queries and is handled by the
/// evaluation harness; the engine accepts the other four.
enum class Method { base, uniform, secretary, prophet_secretary, empirical_threshold };

std::string method_name(Method m);
/// Accepts "Base", "UNI"/"Uniform", "SA", "PSA", "ETS" (case-insensitive).
Method parse_method(std::string_view name);
bool needs_prior(Method m) noexcept;

struct BudgetPlan {
    int horizon = 0;
    int budget = 0;
    std::vector<SegmentContext> segments;

    /// 0-based index of the segment containing t.
    int segment_of(int t) const;
};

/// B contiguous segments of floor(T/B) steps; the last one runs to T.
BudgetPlan plan_segments(int horizon, int budget);

/// Uniform placement mapped into the plan: ceil(i*T/(B+1)) clamped into segment i.
std::vector<int> uniform_plan_times(const BudgetPlan& plan);

struct EngineConfig {
    LossSpec loss;
    /// Quantile grid size for ETS.
    int ets_grid_size = 50;
    /// Explicit ETS thresholds; when nonempty they replace the quantile grid.
    std::vector<double> ets_grid;
    /// Use at most this many prior episodes (0 = all).
    std::size_t prior_cap = 0;

    void validate() const;
};

/// Source of y_t = f(x_{1:t}) for a queried step.
class LabelOracle {
public:
    virtual ~LabelOracle() = default;
    virtual double label(const Episode& episode, int t) = 0;
};

/// Reads labels stored on the episode.
class EpisodeLabelOracle final : public LabelOracle {
public:
    double label(const Episode& episode, int t) override;
};

struct QueryRecord {
    int segment = 0; ///< 0-based
    int t = 0;
    double label = 0.0;
    double score = 0.0;
    bool forced = false;
};

/// Per-segment statistics the active rule was built from.
struct SegmentSetup {
    int index = 0;
    SegmentContext ctx;
    std::optional<int> window;       ///< SA observation window length
    std::optional<double> opt;       ///< PSA OPT estimate
    std::optional<EtsChoice> ets;    ///< ETS threshold search
    std::optional<int> query_time;   ///< UNI planned step
};

/// Step-by-step executor of the BOAL loop for one episode.
///
/// observe() consumes step t = next_step() of the episode (which may be a
/// live episode holding only t rows). When the returned decision selects,
/// the caller must resolve it with label() or decline() before observing
/// again. The prediction reported for step t always uses the weights in
/// effect before any update at t.
class OnlineRun {
public:
    struct Step {
        int t = 0;
        int segment = 0;
        double score = 0.0;
        double prediction = 0.0;
        StopDecision decision;
        /// The segment's query was already issued; the rule was not consulted.
        bool segment_closed = false;
    };

    OnlineRun(EnsembleState initial, BudgetPlan plan, Method method,
              std::shared_ptr<const EpisodicPrior> prior, EngineConfig config);

    Step observe(const Episode& episode);
    QueryRecord label(const Episode& episode, double y);
    void decline();

    int next_step() const noexcept { return next_; }
    bool awaiting_label() const noexcept { return pending_.has_value(); }
    int pending_step() const;
    /// All B queries issued.
    bool budget_spent() const noexcept { return static_cast<int>(queries_.size()) == plan_.budget; }
    bool horizon_done() const noexcept { return next_ > plan_.horizon; }

    Method method() const noexcept { return method_; }
    const BudgetPlan& plan() const noexcept { return plan_; }
    const EnsembleState& state() const noexcept { return state_; }
    const std::vector<QueryRecord>& queries() const noexcept { return queries_; }
    /// Weights in effect when each started segment began.
    const std::vector<EnsembleState>& segment_states() const noexcept { return segment_states_; }
    const std::optional<SegmentSetup>& current_setup() const noexcept { return setup_; }
    const OnlineMax* current_rule() const noexcept { return rule_.get(); }

private:
    void begin_segment(int index);

    EnsembleState state_;
    BudgetPlan plan_;
    Method method_;
    std::shared_ptr<const EpisodicPrior> prior_;
    EngineConfig config_;
    std::vector<int> uniform_times_;

    int next_ = 1;
    int segment_ = -1;
    bool segment_queried_ = false;
    std::unique_ptr<OnlineMax> rule_;
    std::optional<SegmentSetup> setup_;
    struct Pending {
        int t;
        int segment;
        double score;
        bool forced;
    };
    std::optional<Pending> pending_;
    std::vector<QueryRecord> queries_;
    std::vector<EnsembleState> segment_states_;
};

struct RunResult {
    Method method = Method::uniform;
    BudgetPlan plan;
    std::vector<QueryRecord> queries;
    /// Online prediction at each step t = 1..T.
    std::vector<double> predictions;
    /// Live score at each step under the weights in effect at that step.
    std::vector<double> scores;
    std::vector<EnsembleState> segment_states;
    EnsembleState final_state;

    std::vector<double> per_query_scores() const;
};

/// Executes the full loop on a complete episode.
RunResult run(const Episode& target, const EnsembleState& initial,
              std::shared_ptr<const EpisodicPrior> prior, Method method, int budget,
              const EngineConfig& config, LabelOracle& oracle);

/// Largest score of each segment under the weights in effect when that
/// segment began (what a hindsight oracle would have picked).
std::vector<double> segment_maxima(const RunResult& result, const Episode& target);

struct MethodScores {
    Method method = Method::uniform;
    std::vector<double> selected;  ///< score at each query
    std::vector<double> hindsight; ///< segment maxima on the same weight trajectory
    double mean_selected = 0.0;
    double mean_hindsight = 0.0;
};

struct ScoreComparison {
    std::vector<MethodScores> methods;
    /// Largest mean hindsight maximum over the replayed trajectories.
    double max_oracle = 0.0;
};

/// Runs each method independently and pairs its selected scores with the
/// hindsight segment maxima of its own weight trajectory.
ScoreComparison run_score_comparison(const Episode& target, const EnsembleState& initial,
                                     std::shared_ptr<const EpisodicPrior> prior,
                                     std::span<const Method> methods, int budget,
                                     const EngineConfig& config, LabelOracle& oracle);

} // namespace boal
