#pragma once

// OnlineMax stopping rules: pick one score from a segment with irrevocable
// per-step select/wait decisions.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boal {

/// Inclusive step range [t0, te] handed to one OnlineMax call.
struct SegmentContext {
    int t0 = 1;
    int te = 1;

    int length() const noexcept { return te - t0 + 1; }
    void validate() const;
};

enum class Action { wait, select };

struct StopDecision {
    Action action = Action::wait;
    /// Selection imposed at the end of the segment rather than triggered by the rule.
    bool forced = false;
    /// Threshold the score was compared against at this step, if the rule has one.
    std::optional<double> threshold;

    bool selected() const noexcept { return action == Action::select; }
};

/// Step-driven stopping rule for one segment.
///
/// Feed scores for t0, t0+1, ... in order. Exactly one step returns a select:
/// the first step where the rule fires, or te when it never does. Selection
/// uses strict comparison (score > threshold) everywhere.
class OnlineMax {
public:
    explicit OnlineMax(SegmentContext ctx);
    virtual ~OnlineMax() = default;

    OnlineMax(const OnlineMax&) = delete;
    OnlineMax& operator=(const OnlineMax&) = delete;

    StopDecision step(int t, double score);

    /// Rejects the selection just made (non-forced only) and keeps going as
    /// though the step had been a wait.
    void decline();

    const SegmentContext& context() const noexcept { return ctx_; }
    bool stopped() const noexcept { return stopped_; }
    /// Next step the rule expects.
    int next_step() const noexcept { return next_; }

    virtual std::string name() const = 0;

protected:
    struct Verdict {
        bool fire = false;
        std::optional<double> threshold;
        /// When false, a selection at te is reported as unforced even though
        /// the rule fired (used by SA with an empty observation window).
        bool counts_as_trigger = true;
    };
    virtual Verdict evaluate(int t, double score) = 0;

private:
    SegmentContext ctx_;
    int next_;
    bool stopped_ = false;
    bool last_forced_ = false;
};

/// floor(length / e).
int secretary_window(int segment_length);

/// Classic secretary rule: watch the first floor(len/e) scores, then take the
/// first one strictly above their maximum.
class SecretaryStopper final : public OnlineMax {
public:
    explicit SecretaryStopper(SegmentContext ctx);

    int window_length() const noexcept { return window_; }
    /// Maximum over the observation window seen so far (-inf before any).
    double running_max() const noexcept { return running_max_; }
    bool in_window(int t) const noexcept { return t < context().t0 + window_; }

    std::string name() const override { return "SA"; }

protected:
    Verdict evaluate(int t, double score) override;

private:
    int window_;
    double running_max_;
};

struct ThresholdSchedule {
    double opt = 0.0;
    /// taus[k] is the threshold for step t0 + k.
    std::vector<double> taus;
};

/// tau_t = opt * (1 - exp((t - te) / (te - t0 + 1))), with tau_te = 0 exactly.
ThresholdSchedule psa_schedule(double opt, SegmentContext ctx);

/// Prophet-secretary rule: take the first score above a decreasing schedule.
class ProphetSecretaryStopper final : public OnlineMax {
public:
    ProphetSecretaryStopper(ThresholdSchedule schedule, SegmentContext ctx);

    const ThresholdSchedule& schedule() const noexcept { return schedule_; }
    double threshold_at(int t) const;

    std::string name() const override { return "PSA"; }

protected:
    Verdict evaluate(int t, double score) override;

private:
    ThresholdSchedule schedule_;
};

struct EtsChoice {
    std::vector<double> grid;
    /// estimates[m] = mean over traces of the score selected under grid[m].
    std::vector<double> estimates;
    double chosen = 0.0;
    std::size_t chosen_index = 0;
};

/// Score a single-threshold rule would pick from one trace: the first value
/// strictly above tau, else the final value.
double threshold_rule_pick(std::span<const double> trace, double tau);

/// Choose the grid threshold with the best mean pick over the historical
/// traces. Ties go to the smallest threshold.
EtsChoice ets_choose(std::span<const std::vector<double>> traces, std::span<const double> grid);

/// Candidate thresholds at the quantile levels 0, 1/M, ..., (M-1)/M of the
/// pooled trace values (linear interpolation between order statistics).
std::vector<double> ets_quantile_grid(std::span<const std::vector<double>> traces, int size);

/// Single fixed threshold rule, as chosen by ets_choose.
class ThresholdStopper final : public OnlineMax {
public:
    ThresholdStopper(double tau, SegmentContext ctx);

    double tau() const noexcept { return tau_; }
    std::string name() const override { return "ETS"; }

protected:
    Verdict evaluate(int t, double score) override;

private:
    double tau_;
};

/// Query times ceil(i*T/(B+1)), i = 1..B.
std::vector<int> uniform_query_times(int horizon, int budget);

/// Selects at a predetermined step regardless of the scores.
class ScheduledStopper final : public OnlineMax {
public:
    ScheduledStopper(int query_time, SegmentContext ctx);

    int query_time() const noexcept { return query_time_; }
    std::string name() const override { return "UNI"; }

protected:
    Verdict evaluate(int t, double score) override;

private:
    int query_time_;
};

/// Offset of the largest value; earliest wins ties. Hindsight only.
std::size_t max_oracle(std::span<const double> trace);

} // namespace boal
