#include "boal/ensemble.hpp"

#include "boal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace boal {

std::vector<double> Expert::predict_prefix(const Episode& episode, int upto) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(upto));
    for (int t = 1; t <= upto; ++t)
        out.push_back(predict(episode, t));
    return out;
}

PredictionTable::PredictionTable(std::size_t experts, int rows, std::vector<double> values)
    : experts_(experts), rows_(rows), values_(std::move(values)) {
    if (values_.size() != experts_ * static_cast<std::size_t>(rows_))
        throw ValidationError("prediction table: size mismatch");
}

std::span<const double> PredictionTable::at(int t) const {
    if (t < 1 || t > rows_)
        throw ValidationError("prediction table: step " + std::to_string(t) + " not covered");
    return {values_.data() + static_cast<std::size_t>(t - 1) * experts_, experts_};
}

Committee::Committee(std::vector<ExpertPtr> experts) : experts_(std::move(experts)) {
    if (experts_.size() < 2)
        throw ValidationError("committee needs at least two experts");
    std::unordered_set<std::string> seen;
    for (const auto& e : experts_) {
        if (!e)
            throw ValidationError("committee: null expert");
        if (!seen.insert(e->id()).second)
            throw ValidationError("committee: duplicate expert id '" + e->id() + "'");
    }
}

std::vector<std::string> Committee::ids() const {
    std::vector<std::string> out;
    out.reserve(experts_.size());
    for (const auto& e : experts_)
        out.push_back(e->id());
    return out;
}

std::shared_ptr<const PredictionTable> Committee::table(const Episode& episode, int upto) const {
    if (upto < 1 || upto > episode.observed())
        throw ValidationError("episode '" + episode.id() + "': step " + std::to_string(upto) +
                              " not observed");
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(episode.id());
        if (it != cache_.end() && it->second->rows() >= upto)
            return it->second;
    }

    // Evaluate outside the lock; a concurrent duplicate evaluation is harmless
    // because experts are pure.
    const int rows = episode.observed();
    const std::size_t n = experts_.size();
    std::vector<double> values(n * static_cast<std::size_t>(rows));
    for (std::size_t i = 0; i < n; ++i) {
        const Expert& expert = *experts_[i];
        std::vector<double> column;
        try {
            column = expert.predict_prefix(episode, rows);
        } catch (const EvaluationError&) {
            throw;
        } catch (const std::exception& ex) {
            throw EvaluationError("expert '" + expert.id() + "' failed on episode '" +
                                  episode.id() + "': " + ex.what());
        }
        if (static_cast<int>(column.size()) != rows)
            throw EvaluationError("expert '" + expert.id() + "' returned " +
                                  std::to_string(column.size()) + " predictions for episode '" +
                                  episode.id() + "', expected " + std::to_string(rows));
        for (int t = 0; t < rows; ++t) {
            const double v = column[static_cast<std::size_t>(t)];
            if (!std::isfinite(v))
                throw EvaluationError("expert '" + expert.id() + "' produced a non-finite value on episode '" +
                                      episode.id() + "' at t=" + std::to_string(t + 1));
            values[static_cast<std::size_t>(t) * n + i] = v;
        }
    }
    auto table = std::make_shared<const PredictionTable>(n, rows, std::move(values));

    std::lock_guard lock(mutex_);
    auto& slot = cache_[episode.id()];
    if (!slot || slot->rows() < table->rows())
        slot = table;
    return slot;
}

std::vector<double> Committee::predictions(const Episode& episode, int t) const {
    auto span = table(episode, t)->at(t);
    return {span.begin(), span.end()};
}

void Committee::clear_cache() const {
    std::lock_guard lock(mutex_);
    cache_.clear();
}

void LossSpec::validate() const {
    if (clip && !(*clip > 0.0))
        throw ValidationError("loss clip must be positive");
}

double pointwise_loss(const LossSpec& spec, double prediction, double label) {
    const double diff = prediction - label;
    double loss = spec.kind == LossKind::squared ? diff * diff : std::abs(diff);
    if (spec.clip)
        loss = std::min(loss, *spec.clip);
    return loss;
}

std::vector<double> softmax(std::span<const double> log_weights) {
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    if (!std::isfinite(top))
        throw ValidationError("softmax: no finite log weight");
    std::vector<double> p(log_weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(log_weights[i] - top);
        total += p[i];
    }
    for (double& v : p)
        v /= total;
    return p;
}

double weighted_mean(std::span<const double> probs, std::span<const double> values) {
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        acc += probs[i] * values[i];
    return acc;
}

double weighted_variance(std::span<const double> probs, std::span<const double> values) {
    const double mean = weighted_mean(probs, values);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double d = values[i] - mean;
        acc += probs[i] * d * d;
    }
    return acc;
}

double max_spread(std::span<const double> values) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi - *lo;
}

EnsembleState::EnsembleState(std::shared_ptr<const Committee> committee, double eta)
    : EnsembleState(committee, std::vector<double>(committee ? committee->size() : 0, 0.0), eta) {}

EnsembleState::EnsembleState(std::shared_ptr<const Committee> committee,
                             std::vector<double> log_weights, double eta)
    : committee_(std::move(committee)), log_weights_(std::move(log_weights)), eta_(eta) {
    if (!committee_)
        throw ValidationError("ensemble: null committee");
    if (log_weights_.size() != committee_->size())
        throw ValidationError("ensemble: log weight count differs from committee size");
    if (!(eta_ > 0.0) || !std::isfinite(eta_))
        throw ValidationError("ensemble: learning rate must be positive and finite");
    for (double lw : log_weights_)
        if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity())
            throw ValidationError("ensemble: log weights must be finite or -inf");
    recenter_and_normalize();
}

void EnsembleState::recenter_and_normalize() {
    const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
    if (!std::isfinite(top))
        throw ValidationError("ensemble: every log weight is -inf");
    if (top != 0.0)
        for (double& lw : log_weights_)
            lw -= top;
    probs_ = softmax(log_weights_);
}

double EnsembleState::predict(const Episode& episode, int t) const {
    auto table = committee_->table(episode, t);
    return weighted_mean(probs_, table->at(t));
}

double EnsembleState::score(const Episode& episode, int t) const {
    auto table = committee_->table(episode, t);
    return weighted_variance(probs_, table->at(t));
}

double EnsembleState::score_spread(const Episode& episode, int t) const {
    auto table = committee_->table(episode, t);
    return max_spread(table->at(t));
}

std::vector<double> EnsembleState::score_trace(const Episode& episode, int t0, int te) const {
    if (t0 < 1 || t0 > te || te > episode.horizon())
        throw ValidationError("score_trace: range [" + std::to_string(t0) + ".." + std::to_string(te) +
                              "] invalid for horizon " + std::to_string(episode.horizon()));
    auto table = committee_->table(episode, te);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(te - t0 + 1));
    for (int t = t0; t <= te; ++t)
        trace.push_back(weighted_variance(probs_, table->at(t)));
    return trace;
}

std::vector<double> EnsembleState::losses_from_label(const Episode& episode, int t, double label,
                                                     const LossSpec& spec) const {
    if (!std::isfinite(label))
        throw ValidationError("label must be finite");
    auto table = committee_->table(episode, t);
    auto preds = table->at(t);
    std::vector<double> losses(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        losses[i] = pointwise_loss(spec, preds[i], label);
    return losses;
}

EnsembleState EnsembleState::update(std::span<const double> losses) const {
    if (losses.size() != log_weights_.size())
        throw ValidationError("update: expected " + std::to_string(log_weights_.size()) +
                              " losses, got " + std::to_string(losses.size()));
    for (double l : losses)
        if (!std::isfinite(l) || l < 0.0)
            throw ValidationError("update: losses must be finite and nonnegative");
    EnsembleState next = *this;
    for (std::size_t i = 0; i < losses.size(); ++i)
        next.log_weights_[i] -= eta_ * losses[i];
    next.recenter_and_normalize();
    return next;
}

} // namespace boal
