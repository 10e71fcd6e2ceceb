#include "boal/stopping.hpp"

#include "boal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace boal {

void SegmentContext::validate() const {
    if (t0 < 1 || te < t0)
        throw ValidationError("segment [" + std::to_string(t0) + ".." + std::to_string(te) + "] is invalid");
}

OnlineMax::OnlineMax(SegmentContext ctx) : ctx_(ctx), next_(ctx.t0) {
    ctx_.validate();
}

StopDecision OnlineMax::step(int t, double score) {
    if (stopped_)
        throw ValidationError(name() + ": segment already has a selection");
    if (t != next_)
        throw ValidationError(name() + ": expected step " + std::to_string(next_) + ", got " +
                              std::to_string(t));
    if (std::isnan(score))
        throw ValidationError(name() + ": score is NaN");

    const Verdict verdict = evaluate(t, score);
    ++next_;

    StopDecision decision;
    decision.threshold = verdict.threshold;
    if (verdict.fire) {
        decision.action = Action::select;
        decision.forced = (t == ctx_.te) && !verdict.counts_as_trigger;
    } else if (t == ctx_.te) {
        decision.action = Action::select;
        decision.forced = true;
    }
    stopped_ = decision.selected();
    last_forced_ = decision.forced;
    return decision;
}

void OnlineMax::decline() {
    if (!stopped_)
        throw ValidationError(name() + ": nothing to decline");
    if (last_forced_ || next_ > ctx_.te)
        throw ValidationError(name() + ": the end-of-segment selection cannot be declined");
    stopped_ = false;
}

int secretary_window(int segment_length) {
    if (segment_length < 1)
        throw ValidationError("segment length must be positive");
    return static_cast<int>(std::floor(static_cast<double>(segment_length) / std::numbers::e));
}

SecretaryStopper::SecretaryStopper(SegmentContext ctx)
    : OnlineMax(ctx), window_(secretary_window(ctx.length())),
      running_max_(-std::numeric_limits<double>::infinity()) {}

OnlineMax::Verdict SecretaryStopper::evaluate(int t, double score) {
    if (in_window(t)) {
        running_max_ = std::max(running_max_, score);
        return {};
    }
    Verdict v;
    v.fire = score > running_max_;
    if (window_ > 0)
        v.threshold = running_max_;
    v.counts_as_trigger = window_ > 0;
    return v;
}

ThresholdSchedule psa_schedule(double opt, SegmentContext ctx) {
    ctx.validate();
    if (!(opt >= 0.0) || !std::isfinite(opt))
        throw ValidationError("PSA: OPT must be a finite nonnegative value");
    ThresholdSchedule s;
    s.opt = opt;
    s.taus.reserve(static_cast<std::size_t>(ctx.length()));
    const double len = ctx.length();
    for (int t = ctx.t0; t <= ctx.te; ++t)
        s.taus.push_back(opt * (1.0 - std::exp(static_cast<double>(t - ctx.te) / len)));
    s.taus.back() = 0.0;
    return s;
}

ProphetSecretaryStopper::ProphetSecretaryStopper(ThresholdSchedule schedule, SegmentContext ctx)
    : OnlineMax(ctx), schedule_(std::move(schedule)) {
    if (static_cast<int>(schedule_.taus.size()) != ctx.length())
        throw ValidationError("PSA: schedule length differs from segment length");
}

double ProphetSecretaryStopper::threshold_at(int t) const {
    const auto& ctx = context();
    if (t < ctx.t0 || t > ctx.te)
        throw ValidationError("PSA: step outside segment");
    return schedule_.taus[static_cast<std::size_t>(t - ctx.t0)];
}

OnlineMax::Verdict ProphetSecretaryStopper::evaluate(int t, double score) {
    const double tau = threshold_at(t);
    return {score > tau, tau, true};
}

double threshold_rule_pick(std::span<const double> trace, double tau) {
    if (trace.empty())
        throw ValidationError("threshold rule: empty trace");
    for (double s : trace)
        if (s > tau)
            return s;
    return trace.back();
}

EtsChoice ets_choose(std::span<const std::vector<double>> traces, std::span<const double> grid) {
    if (traces.empty())
        throw ValidationError("ETS: no historical traces");
    if (grid.empty())
        throw ValidationError("ETS: empty threshold grid");
    const std::size_t len = traces.front().size();
    for (const auto& tr : traces)
        if (tr.empty() || tr.size() != len)
            throw ValidationError("ETS: historical traces must be nonempty and equally long");

    EtsChoice choice;
    choice.grid.assign(grid.begin(), grid.end());
    choice.estimates.reserve(grid.size());
    const double k = static_cast<double>(traces.size());
    for (double tau : grid) {
        double total = 0.0;
        for (const auto& tr : traces)
            total += threshold_rule_pick(tr, tau);
        choice.estimates.push_back(total / k);
    }

    choice.chosen_index = 0;
    for (std::size_t m = 1; m < grid.size(); ++m) {
        const double best = choice.estimates[choice.chosen_index];
        if (choice.estimates[m] > best ||
            (choice.estimates[m] == best && grid[m] < grid[choice.chosen_index]))
            choice.chosen_index = m;
    }
    choice.chosen = grid[choice.chosen_index];
    return choice;
}

std::vector<double> ets_quantile_grid(std::span<const std::vector<double>> traces, int size) {
    if (size < 1)
        throw ValidationError("ETS: grid size must be positive");
    std::vector<double> pooled;
    for (const auto& tr : traces)
        pooled.insert(pooled.end(), tr.begin(), tr.end());
    if (pooled.empty())
        throw ValidationError("ETS: no historical scores to build a grid from");
    std::sort(pooled.begin(), pooled.end());

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(size));
    const double last = static_cast<double>(pooled.size() - 1);
    for (int m = 0; m < size; ++m) {
        const double pos = last * static_cast<double>(m) / static_cast<double>(size);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, pooled.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        grid.push_back(pooled[lo] + frac * (pooled[hi] - pooled[lo]));
    }
    return grid;
}

ThresholdStopper::ThresholdStopper(double tau, SegmentContext ctx) : OnlineMax(ctx), tau_(tau) {
    if (std::isnan(tau))
        throw ValidationError("ETS: threshold is NaN");
}

OnlineMax::Verdict ThresholdStopper::evaluate(int, double score) {
    return {score > tau_, tau_, true};
}

std::vector<int> uniform_query_times(int horizon, int budget) {
    if (budget < 1 || budget > horizon)
        throw ValidationError("uniform placement needs 1 <= B <= T");
    std::vector<int> times;
    times.reserve(static_cast<std::size_t>(budget));
    const long long T = horizon;
    const long long B = budget;
    for (long long i = 1; i <= B; ++i)
        times.push_back(static_cast<int>((i * T + B) / (B + 1)));
    return times;
}

ScheduledStopper::ScheduledStopper(int query_time, SegmentContext ctx)
    : OnlineMax(ctx), query_time_(query_time) {
    if (query_time < ctx.t0 || query_time > ctx.te)
        throw ValidationError("UNI: query time outside the segment");
}

OnlineMax::Verdict ScheduledStopper::evaluate(int t, double) {
    return {t == query_time_, std::nullopt, true};
}

std::size_t max_oracle(std::span<const double> trace) {
    if (trace.empty())
        throw ValidationError("max oracle: empty trace");
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i] > trace[best])
            best = i;
    return best;
}

} // namespace boal
