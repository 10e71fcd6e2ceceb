#include "boal/prior.hpp"

#include "boal/error.hpp"

#include <algorithm>
#include <unordered_set>

namespace boal {

namespace {

std::vector<EpisodePtr> share_all(std::vector<Episode> episodes) {
    std::vector<EpisodePtr> out;
    out.reserve(episodes.size());
    for (auto& ep : episodes)
        out.push_back(std::make_shared<const Episode>(std::move(ep)));
    return out;
}

} // namespace

EpisodicPrior::EpisodicPrior(std::vector<EpisodePtr> episodes) : episodes_(std::move(episodes)) {
    if (episodes_.empty())
        throw ValidationError("episodic prior needs at least one episode");
    std::unordered_set<std::string> ids;
    const auto& first = *episodes_.front();
    for (const auto& ep : episodes_) {
        if (!ep)
            throw ValidationError("episodic prior: null episode");
        if (!ep->complete())
            throw ValidationError("episodic prior: episode '" + ep->id() + "' is incomplete");
        if (ep->horizon() != first.horizon())
            throw ValidationError("episodic prior: episode '" + ep->id() + "' has horizon " +
                                  std::to_string(ep->horizon()) + ", expected " +
                                  std::to_string(first.horizon()));
        if (ep->dimension() != first.dimension())
            throw ValidationError("episodic prior: episode '" + ep->id() + "' has a different feature dimension");
        if (!ids.insert(ep->id()).second)
            throw ValidationError("episodic prior: duplicate episode id '" + ep->id() + "'");
    }
}

EpisodicPrior::EpisodicPrior(std::vector<Episode> episodes) : EpisodicPrior(share_all(std::move(episodes))) {}

EpisodicPrior EpisodicPrior::truncated(std::size_t cap) const {
    if (cap == 0)
        throw ValidationError("episodic prior: cap must be positive");
    if (cap >= episodes_.size())
        return *this;
    return EpisodicPrior(std::vector<EpisodePtr>(episodes_.begin(), episodes_.begin() + static_cast<long>(cap)));
}

std::span<const double> EpisodeWindow::features(int t) const {
    if (t < t0 || t > te)
        throw ValidationError("episode window: step outside [t0, te]");
    return episode->features(t);
}

namespace {

void check_range(const EpisodicPrior& prior, int t0, int te) {
    if (t0 < 1 || t0 > te || te > prior.horizon())
        throw ValidationError("prior slice [" + std::to_string(t0) + ".." + std::to_string(te) +
                              "] outside horizon " + std::to_string(prior.horizon()));
}

} // namespace

std::vector<EpisodeWindow> slice(const EpisodicPrior& prior, int t0, int te) {
    check_range(prior, t0, te);
    std::vector<EpisodeWindow> out;
    out.reserve(prior.size());
    for (const auto& ep : prior.episodes())
        out.push_back({ep.get(), t0, te});
    return out;
}

std::vector<std::vector<double>> historical_traces(const EpisodicPrior& prior, int t0, int te,
                                                   const EnsembleState& state) {
    check_range(prior, t0, te);
    std::vector<std::vector<double>> traces;
    traces.reserve(prior.size());
    for (const auto& ep : prior.episodes())
        traces.push_back(state.score_trace(*ep, t0, te));
    return traces;
}

double mean_of_maxima(std::span<const std::vector<double>> traces) {
    if (traces.empty())
        throw ValidationError("mean of maxima: no traces");
    double total = 0.0;
    for (const auto& tr : traces) {
        if (tr.empty())
            throw ValidationError("mean of maxima: empty trace");
        total += *std::max_element(tr.begin(), tr.end());
    }
    return total / static_cast<double>(traces.size());
}

double estimate_opt(const EpisodicPrior& prior, int t0, int te, const EnsembleState& state) {
    const auto traces = historical_traces(prior, t0, te, state);
    return mean_of_maxima(traces);
}

} // namespace boal
