#include "boal/eval.hpp"

#include "boal/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace boal {

double rmse(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.size() != labels.size())
        throw ValidationError("rmse: length mismatch");
    if (predictions.empty())
        throw ValidationError("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - labels[i];
        if (!std::isfinite(d))
            throw ValidationError("rmse: non-finite input");
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

std::string rmse_mode_name(RmseMode m) {
    return m == RmseMode::online ? "online" : "posthoc";
}

RmseMode parse_rmse_mode(const std::string& name) {
    if (name == "online") return RmseMode::online;
    if (name == "posthoc") return RmseMode::posthoc;
    throw ConfigError("unknown rmse_mode '" + name + "'");
}

void ProtocolSpec::validate() const {
    if (budgets.empty())
        throw ConfigError("budgets: at least one budget is required");
    for (int b : budgets)
        if (b < 1)
            throw ConfigError("budgets: every budget must be >= 1");
    if (strategies.empty())
        throw ConfigError("strategies: at least one strategy is required");
    if (runs_per_setting < 1)
        throw ConfigError("runs_per_setting must be >= 1");
    if (!(eta > 0.0))
        throw ConfigError("eta must be positive");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("alpha must lie in (0, 1)");
    if (jobs < 1)
        throw ConfigError("jobs must be >= 1");
    engine.validate();
}

std::shared_ptr<const EpisodicPrior> leave_one_out_prior(const BenchmarkProblem& problem,
                                                         std::size_t index, std::size_t cap) {
    std::vector<EpisodePtr> episodes;
    for (std::size_t k = 0; k < problem.evaluation.size(); ++k)
        if (k != index)
            episodes.push_back(problem.evaluation[k]);
    episodes.insert(episodes.end(), problem.pool.begin(), problem.pool.end());
    if (cap > 0 && episodes.size() > cap)
        episodes.resize(cap);
    if (episodes.empty())
        return nullptr;
    // Priors never read labels; strip them so that holds structurally.
    for (auto& ep : episodes)
        if (ep->has_labels())
            ep = std::make_shared<const Episode>(ep->unlabeled());
    return std::make_shared<const EpisodicPrior>(std::move(episodes));
}

const CellSummary& ProtocolResult::cell(Method m, int budget) const {
    for (const auto& c : cells)
        if (c.method == m && c.budget == budget)
            return c;
    throw NotFoundError("no result cell for " + method_name(m) + " at budget " + std::to_string(budget));
}

const PairwiseTest& ProtocolResult::test(int budget, Method a, Method b) const {
    for (const auto& t : tests)
        if (t.budget == budget && ((t.a == a && t.b == b) || (t.a == b && t.b == a)))
            return t;
    throw NotFoundError("no test for " + method_name(a) + " vs " + method_name(b) + " at budget " +
                        std::to_string(budget));
}

namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Runs fn(i) for i in [0, count) on `jobs` threads; rethrows the first failure.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next = count;
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, jobs));
    if (threads == 1 || count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < std::min(threads, count); ++k)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace

ProtocolResult run_protocol(const ProtocolSpec& spec, const BenchmarkProblem& problem) {
    spec.validate();
    if (!problem.committee)
        throw ConfigError("problem has no experts");
    if (static_cast<int>(problem.evaluation.size()) < spec.runs_per_setting)
        throw ConfigError("problem supplies " + std::to_string(problem.evaluation.size()) +
                          " evaluation episodes, runs_per_setting needs " +
                          std::to_string(spec.runs_per_setting));
    for (int i = 0; i < spec.runs_per_setting; ++i) {
        const auto& ep = problem.evaluation[static_cast<std::size_t>(i)];
        if (!ep->has_labels())
            throw ConfigError("evaluation episode '" + ep->id() + "' has no labels");
        for (int b : spec.budgets)
            if (b > ep->horizon())
                throw ConfigError("budget " + std::to_string(b) + " exceeds horizon " +
                                  std::to_string(ep->horizon()));
    }

    const auto runs = static_cast<std::size_t>(spec.runs_per_setting);
    const bool any_prior_method = std::any_of(spec.strategies.begin(), spec.strategies.end(), needs_prior);
    std::vector<std::shared_ptr<const EpisodicPrior>> priors(runs);
    for (std::size_t e = 0; e < runs; ++e) {
        priors[e] = leave_one_out_prior(problem, e, spec.engine.prior_cap);
        if (priors[e]) {
            for (const auto& p : priors[e]->episodes())
                if (p->id() == problem.evaluation[e]->id())
                    throw ConfigError("episode '" + p->id() + "' appears in its own prior");
        } else if (any_prior_method) {
            throw ConfigError("PSA/ETS need prior episodes but the problem has only one episode");
        }
    }

    const EnsembleState initial(problem.committee, spec.eta);

    // Base does not depend on the budget: evaluate it once per episode.
    const bool has_base = std::find(spec.strategies.begin(), spec.strategies.end(), Method::base) !=
                          spec.strategies.end();
    std::vector<double> base_rmse(runs, 0.0);

    struct Cell {
        Method method;
        int budget;
        std::size_t episode;
    };
    std::vector<Cell> cells;
    for (Method m : spec.strategies) {
        if (m == Method::base)
            continue;
        for (int b : spec.budgets)
            for (std::size_t e = 0; e < runs; ++e)
                cells.push_back({m, b, e});
    }
    std::vector<RunRecord> records(cells.size());

    const std::size_t base_tasks = has_base ? runs : 0;
    parallel_for(base_tasks + cells.size(), spec.jobs, [&](std::size_t task) {
        if (task < base_tasks) {
            const Episode& ep = *problem.evaluation[task];
            std::vector<double> preds(static_cast<std::size_t>(ep.horizon()));
            for (int t = 1; t <= ep.horizon(); ++t)
                preds[static_cast<std::size_t>(t - 1)] = initial.predict(ep, t);
            base_rmse[task] = rmse(preds, ep.labels());
            return;
        }
        const Cell& cell = cells[task - base_tasks];
        const Episode& ep = *problem.evaluation[cell.episode];
        EpisodeLabelOracle oracle;
        const RunResult r = run(ep, initial, priors[cell.episode], cell.method, cell.budget, spec.engine, oracle);
        RunRecord rec;
        rec.method = cell.method;
        rec.budget = cell.budget;
        rec.episode_id = ep.id();
        if (spec.rmse_mode == RmseMode::online) {
            rec.rmse = rmse(r.predictions, ep.labels());
        } else {
            std::vector<double> preds(static_cast<std::size_t>(ep.horizon()));
            for (int t = 1; t <= ep.horizon(); ++t)
                preds[static_cast<std::size_t>(t - 1)] = r.final_state.predict(ep, t);
            rec.rmse = rmse(preds, ep.labels());
        }
        for (const auto& q : r.queries)
            rec.query_times.push_back(q.t);
        rec.selected_scores = r.per_query_scores();
        rec.hindsight_scores = segment_maxima(r, ep);
        records[task - base_tasks] = std::move(rec);
    });

    ProtocolResult out;
    out.budgets = spec.budgets;
    out.strategies = spec.strategies;
    for (std::size_t e = 0; e < runs; ++e)
        out.episode_ids.push_back(problem.evaluation[e]->id());

    // Deterministic assembly: strategy order, then budget, then episode.
    std::size_t cursor = 0;
    for (Method m : spec.strategies) {
        for (int b : spec.budgets) {
            CellSummary summary;
            summary.method = m;
            summary.budget = b;
            if (m == Method::base) {
                for (std::size_t e = 0; e < runs; ++e) {
                    RunRecord rec;
                    rec.method = m;
                    rec.budget = b;
                    rec.episode_id = out.episode_ids[e];
                    rec.rmse = base_rmse[e];
                    out.runs.push_back(rec);
                }
                summary.rmse = base_rmse;
            } else {
                std::vector<double> selected;
                std::vector<double> hindsight;
                for (std::size_t e = 0; e < runs; ++e) {
                    const RunRecord& rec = records[cursor++];
                    summary.rmse.push_back(rec.rmse);
                    selected.insert(selected.end(), rec.selected_scores.begin(), rec.selected_scores.end());
                    hindsight.insert(hindsight.end(), rec.hindsight_scores.begin(), rec.hindsight_scores.end());
                    out.runs.push_back(rec);
                }
                summary.mean_selected_score = mean_of(selected);
                summary.mean_hindsight_score = mean_of(hindsight);
                auto& slot = out.max_oracle[b];
                slot = std::max(slot, *summary.mean_hindsight_score);
            }
            summary.mean_rmse = mean_of(summary.rmse);
            out.cells.push_back(std::move(summary));
        }
    }

    for (int b : spec.budgets) {
        for (std::size_t i = 0; i < spec.strategies.size(); ++i) {
            for (std::size_t j = i + 1; j < spec.strategies.size(); ++j) {
                PairwiseTest test;
                test.budget = b;
                test.a = spec.strategies[i];
                test.b = spec.strategies[j];
                try {
                    test.result = wilcoxon_signed_rank(out.cell(test.a, b).rmse, out.cell(test.b, b).rmse,
                                                       spec.alpha);
                } catch (const DegenerateInputError& ex) {
                    test.note = ex.what();
                } catch (const ValidationError& ex) {
                    test.note = ex.what();
                }
                out.tests.push_back(std::move(test));
            }
        }
    }
    return out;
}

const ScoreStudy::Row& ScoreStudy::row(int budget) const {
    for (const auto& r : rows)
        if (r.budget == budget)
            return r;
    throw NotFoundError("no score row for budget " + std::to_string(budget));
}

ScoreStudy run_score_study(const ProtocolSpec& spec, const BenchmarkProblem& problem) {
    spec.validate();
    ScoreStudy out;
    for (Method m : spec.strategies)
        if (m != Method::base)
            out.methods.push_back(m);
    if (out.methods.empty())
        throw ConfigError("strategies: the score comparison needs a querying strategy");
    if (!problem.committee)
        throw ConfigError("problem has no experts");
    if (static_cast<int>(problem.evaluation.size()) < spec.runs_per_setting)
        throw ConfigError("problem supplies " + std::to_string(problem.evaluation.size()) +
                          " evaluation episodes, runs_per_setting needs " +
                          std::to_string(spec.runs_per_setting));

    const auto runs = static_cast<std::size_t>(spec.runs_per_setting);
    std::vector<std::shared_ptr<const EpisodicPrior>> priors(runs);
    for (std::size_t e = 0; e < runs; ++e)
        priors[e] = leave_one_out_prior(problem, e, spec.engine.prior_cap);
    const EnsembleState initial(problem.committee, spec.eta);

    std::vector<ScoreComparison> slots(spec.budgets.size() * runs);
    parallel_for(slots.size(), spec.jobs, [&](std::size_t task) {
        const int budget = spec.budgets[task / runs];
        const std::size_t e = task % runs;
        EpisodeLabelOracle oracle;
        slots[task] = run_score_comparison(*problem.evaluation[e], initial, priors[e], out.methods, budget,
                                           spec.engine, oracle);
    });

    for (std::size_t b = 0; b < spec.budgets.size(); ++b) {
        ScoreStudy::Row row;
        row.budget = spec.budgets[b];
        for (std::size_t k = 0; k < out.methods.size(); ++k) {
            std::vector<double> selected;
            std::vector<double> hindsight;
            for (std::size_t e = 0; e < runs; ++e) {
                const MethodScores& ms = slots[b * runs + e].methods[k];
                selected.insert(selected.end(), ms.selected.begin(), ms.selected.end());
                hindsight.insert(hindsight.end(), ms.hindsight.begin(), ms.hindsight.end());
            }
            row.selected[out.methods[k]] = mean_of(selected);
            row.hindsight[out.methods[k]] = mean_of(hindsight);
            row.max_oracle = std::max(row.max_oracle, row.hindsight[out.methods[k]]);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace boal
