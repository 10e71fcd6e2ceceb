#pragma once

// Hedge-weighted expert committee: weighted-average prediction,
// multiplicative weight updates and query-by-committee scores.

#include "boal/episode.hpp"

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace boal {

/// A pre-existing predictor mapping a history prefix x_{1:t} to a real value.
///
/// Implementations must be pure in (episode, t): the committee caches their
/// output per episode id.
class Expert {
public:
    virtual ~Expert() = default;

    virtual const std::string& id() const = 0;
    virtual double predict(const Episode& episode, int t) const = 0;

    /// Predictions for t = 1..upto. Override when a recurrence is cheaper than
    /// calling predict() once per step; the results must be identical.
    virtual std::vector<double> predict_prefix(const Episode& episode, int upto) const;
};

using ExpertPtr = std::shared_ptr<const Expert>;

/// Expert predictions for one episode: row t holds the N committee outputs at t.
class PredictionTable {
public:
    PredictionTable(std::size_t experts, int rows, std::vector<double> values);

    std::size_t experts() const noexcept { return experts_; }
    int rows() const noexcept { return rows_; }
    std::span<const double> at(int t) const;

private:
    std::size_t experts_;
    int rows_;
    std::vector<double> values_;
};

/// Ordered, immutable set of N >= 2 experts with a memo of their predictions.
///
/// The cache is keyed by episode id and extended on demand, so a live episode
/// that grows row by row is re-evaluated only when a later step is requested.
/// Thread-safe.
class Committee {
public:
    explicit Committee(std::vector<ExpertPtr> experts);

    std::size_t size() const noexcept { return experts_.size(); }
    const Expert& expert(std::size_t i) const { return *experts_.at(i); }
    std::vector<std::string> ids() const;

    /// Table covering at least steps 1..upto of the episode.
    std::shared_ptr<const PredictionTable> table(const Episode& episode, int upto) const;

    std::vector<double> predictions(const Episode& episode, int t) const;

    void clear_cache() const;

private:
    std::vector<ExpertPtr> experts_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::shared_ptr<const PredictionTable>> cache_;
};

enum class LossKind { squared, absolute };

struct LossSpec {
    LossKind kind = LossKind::squared;
    /// Optional cap on the per-step loss; must be > 0 when set.
    std::optional<double> clip;

    void validate() const;
};

double pointwise_loss(const LossSpec& spec, double prediction, double label);

// Weight-space primitives shared by EnsembleState and the tests.

/// Normalized probabilities exp(lw_i) / sum_j exp(lw_j). Entries equal to -inf
/// get probability 0.
std::vector<double> softmax(std::span<const double> log_weights);
double weighted_mean(std::span<const double> probs, std::span<const double> values);
double weighted_variance(std::span<const double> probs, std::span<const double> values);
/// max_{i,j} |v_i - v_j|.
double max_spread(std::span<const double> values);

/// Hedge weights over a committee, stored in the log domain and re-centered
/// so the largest log weight is 0. Immutable: update() returns a new state.
class EnsembleState {
public:
    /// Uniform initial weights.
    EnsembleState(std::shared_ptr<const Committee> committee, double eta = 1.0);
    /// Explicit log weights. -inf entries are allowed and pin the expert to
    /// probability 0; at least one entry must be finite.
    EnsembleState(std::shared_ptr<const Committee> committee, std::vector<double> log_weights,
                  double eta);

    std::size_t size() const noexcept { return log_weights_.size(); }
    double eta() const noexcept { return eta_; }
    const Committee& committee() const noexcept { return *committee_; }
    const std::shared_ptr<const Committee>& committee_ptr() const noexcept { return committee_; }
    std::span<const double> log_weights() const noexcept { return log_weights_; }
    std::span<const double> probabilities() const noexcept { return probs_; }

    /// sum_i p_i f_i(x_{1:t}).
    double predict(const Episode& episode, int t) const;
    /// Probability-weighted variance of the expert predictions around predict().
    double score(const Episode& episode, int t) const;
    /// Largest pairwise gap between expert predictions; ignores the weights.
    double score_spread(const Episode& episode, int t) const;
    /// score() for every t in [t0, te] under the current weights.
    std::vector<double> score_trace(const Episode& episode, int t0, int te) const;

    std::vector<double> losses_from_label(const Episode& episode, int t, double label,
                                          const LossSpec& spec) const;

    /// lw_i <- lw_i - eta * loss_i, then re-centered.
    EnsembleState update(std::span<const double> losses) const;

private:
    void recenter_and_normalize();

    std::shared_ptr<const Committee> committee_;
    std::vector<double> log_weights_;
    std::vector<double> probs_;
    double eta_;
};

} // namespace boal
