#include "boal/engine.hpp"

#include "boal/error.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace boal {

std::string method_name(Method m) {
    switch (m) {
    case Method::base: return "Base";
    case Method::uniform: return "UNI";
    case Method::secretary: return "SA";
    case Method::prophet_secretary: return "PSA";
    case Method::empirical_threshold: return "ETS";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string key(name);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (key == "BASE") return Method::base;
    if (key == "UNI" || key == "UNIFORM") return Method::uniform;
    if (key == "SA") return Method::secretary;
    if (key == "PSA") return Method::prophet_secretary;
    if (key == "ETS") return Method::empirical_threshold;
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

bool needs_prior(Method m) noexcept {
    return m == Method::prophet_secretary || m == Method::empirical_threshold;
}

int BudgetPlan::segment_of(int t) const {
    if (t < 1 || t > horizon)
        throw ValidationError("step " + std::to_string(t) + " outside horizon");
    const int len = horizon / budget;
    return std::min((t - 1) / len, budget - 1);
}

BudgetPlan plan_segments(int horizon, int budget) {
    if (horizon < 1)
        throw ValidationError("horizon must be positive");
    if (budget < 1 || budget > horizon)
        throw ValidationError("budget must satisfy 1 <= B <= T (B=" + std::to_string(budget) +
                              ", T=" + std::to_string(horizon) + ")");
    BudgetPlan plan{horizon, budget, {}};
    const int len = horizon / budget;
    for (int i = 0; i < budget; ++i) {
        const int t0 = i * len + 1;
        const int te = (i == budget - 1) ? horizon : (i + 1) * len;
        plan.segments.push_back({t0, te});
    }
    return plan;
}

std::vector<int> uniform_plan_times(const BudgetPlan& plan) {
    auto times = uniform_query_times(plan.horizon, plan.budget);
    for (std::size_t i = 0; i < times.size(); ++i)
        times[i] = std::clamp(times[i], plan.segments[i].t0, plan.segments[i].te);
    return times;
}

void EngineConfig::validate() const {
    loss.validate();
    if (ets_grid_size < 1)
        throw ConfigError("ets_grid_size must be positive");
}

double EpisodeLabelOracle::label(const Episode& episode, int t) {
    if (!episode.has_labels())
        throw RunError("episode '" + episode.id() + "' has no labels to answer a query");
    return episode.label(t);
}

OnlineRun::OnlineRun(EnsembleState initial, BudgetPlan plan, Method method,
                     std::shared_ptr<const EpisodicPrior> prior, EngineConfig config)
    : state_(std::move(initial)), plan_(std::move(plan)), method_(method), prior_(std::move(prior)),
      config_(std::move(config)) {
    config_.validate();
    if (method_ == Method::base)
        throw ConfigError("the engine runs querying strategies only; Base is evaluated without a run");
    if (needs_prior(method_) && !prior_)
        throw ConfigError(method_name(method_) + " requires an episodic prior");
    if (prior_) {
        if (prior_->horizon() < plan_.horizon)
            throw ConfigError("prior episodes are shorter than the run horizon");
        if (config_.prior_cap > 0 && config_.prior_cap < prior_->size())
            prior_ = std::make_shared<const EpisodicPrior>(prior_->truncated(config_.prior_cap));
    }
    if (method_ == Method::uniform)
        uniform_times_ = uniform_plan_times(plan_);
}

void OnlineRun::begin_segment(int index) {
    segment_ = index;
    segment_queried_ = false;
    segment_states_.push_back(state_);
    const SegmentContext ctx = plan_.segments[static_cast<std::size_t>(index)];
    SegmentSetup setup;
    setup.index = index;
    setup.ctx = ctx;
    switch (method_) {
    case Method::secretary: {
        auto rule = std::make_unique<SecretaryStopper>(ctx);
        setup.window = rule->window_length();
        rule_ = std::move(rule);
        break;
    }
    case Method::prophet_secretary: {
        const double opt = estimate_opt(*prior_, ctx.t0, ctx.te, state_);
        setup.opt = opt;
        rule_ = std::make_unique<ProphetSecretaryStopper>(psa_schedule(opt, ctx), ctx);
        break;
    }
    case Method::empirical_threshold: {
        const auto traces = historical_traces(*prior_, ctx.t0, ctx.te, state_);
        const std::vector<double> grid =
            config_.ets_grid.empty() ? ets_quantile_grid(traces, config_.ets_grid_size) : config_.ets_grid;
        EtsChoice choice = ets_choose(traces, grid);
        rule_ = std::make_unique<ThresholdStopper>(choice.chosen, ctx);
        setup.ets = std::move(choice);
        break;
    }
    case Method::uniform: {
        const int qt = uniform_times_[static_cast<std::size_t>(index)];
        setup.query_time = qt;
        rule_ = std::make_unique<ScheduledStopper>(qt, ctx);
        break;
    }
    case Method::base:
        break;
    }
    setup_ = std::move(setup);
}

OnlineRun::Step OnlineRun::observe(const Episode& episode) {
    if (pending_)
        throw ConflictError("step " + std::to_string(pending_->t) + " awaits a label or a decline");
    if (next_ > plan_.horizon)
        throw ConflictError("horizon already exhausted");
    const int t = next_;
    const int seg = plan_.segment_of(t);
    if (seg != segment_)
        begin_segment(seg);

    Step step;
    step.t = t;
    step.segment = seg;
    step.score = state_.score(episode, t);
    step.prediction = state_.predict(episode, t);
    if (segment_queried_) {
        step.segment_closed = true;
    } else {
        step.decision = rule_->step(t, step.score);
        if (step.decision.selected())
            pending_ = Pending{t, seg, step.score, step.decision.forced};
    }
    ++next_;
    return step;
}

int OnlineRun::pending_step() const {
    if (!pending_)
        throw ConflictError("no query is pending");
    return pending_->t;
}

QueryRecord OnlineRun::label(const Episode& episode, double y) {
    if (!pending_)
        throw ConflictError("no query is pending");
    const auto losses = state_.losses_from_label(episode, pending_->t, y, config_.loss);
    state_ = state_.update(losses);
    QueryRecord rec{pending_->segment, pending_->t, y, pending_->score, pending_->forced};
    queries_.push_back(rec);
    segment_queried_ = true;
    pending_.reset();
    return rec;
}

void OnlineRun::decline() {
    if (!pending_)
        throw ConflictError("no query is pending");
    try {
        rule_->decline();
    } catch (const ValidationError& ex) {
        throw ConflictError(ex.what());
    }
    pending_.reset();
}

std::vector<double> RunResult::per_query_scores() const {
    std::vector<double> out;
    out.reserve(queries.size());
    for (const auto& q : queries)
        out.push_back(q.score);
    return out;
}

RunResult run(const Episode& target, const EnsembleState& initial,
              std::shared_ptr<const EpisodicPrior> prior, Method method, int budget,
              const EngineConfig& config, LabelOracle& oracle) {
    if (!target.complete())
        throw ValidationError("run: target episode '" + target.id() + "' is incomplete");
    OnlineRun online(initial, plan_segments(target.horizon(), budget), method, std::move(prior), config);

    RunResult result{method, online.plan(), {}, {}, {}, {}, initial};
    result.predictions.reserve(static_cast<std::size_t>(target.horizon()));
    result.scores.reserve(static_cast<std::size_t>(target.horizon()));
    for (int t = 1; t <= target.horizon(); ++t) {
        const auto step = online.observe(target);
        result.predictions.push_back(step.prediction);
        result.scores.push_back(step.score);
        if (step.decision.selected()) {
            double y = 0.0;
            try {
                y = oracle.label(target, t);
            } catch (const RunError&) {
                throw;
            } catch (const std::exception& ex) {
                throw RunError("label source failed at t=" + std::to_string(t) + ": " + ex.what());
            }
            online.label(target, y);
        }
    }
    if (!online.budget_spent())
        throw RunError("run finished with " + std::to_string(online.queries().size()) + " of " +
                       std::to_string(budget) + " queries");
    result.queries = online.queries();
    result.segment_states = online.segment_states();
    result.final_state = online.state();
    return result;
}

std::vector<double> segment_maxima(const RunResult& result, const Episode& target) {
    std::vector<double> out;
    out.reserve(result.plan.segments.size());
    for (std::size_t i = 0; i < result.plan.segments.size(); ++i) {
        const auto& seg = result.plan.segments[i];
        const auto trace = result.segment_states.at(i).score_trace(target, seg.t0, seg.te);
        out.push_back(trace[max_oracle(trace)]);
    }
    return out;
}

namespace {

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

ScoreComparison run_score_comparison(const Episode& target, const EnsembleState& initial,
                                     std::shared_ptr<const EpisodicPrior> prior,
                                     std::span<const Method> methods, int budget,
                                     const EngineConfig& config, LabelOracle& oracle) {
    if (methods.empty())
        throw ConfigError("score comparison needs at least one strategy");
    ScoreComparison out;
    for (Method m : methods) {
        const RunResult r = run(target, initial, prior, m, budget, config, oracle);
        MethodScores ms;
        ms.method = m;
        ms.selected = r.per_query_scores();
        ms.hindsight = segment_maxima(r, target);
        ms.mean_selected = mean(ms.selected);
        ms.mean_hindsight = mean(ms.hindsight);
        out.max_oracle = std::max(out.max_oracle, ms.mean_hindsight);
        out.methods.push_back(std::move(ms));
    }
    return out;
}

} // namespace boal
