#pragma once

// Historical unlabeled episodes and the per-segment statistics the
// prior-informed stopping rules consume.

#include "boal/ensemble.hpp"
#include "boal/episode.hpp"

#include <memory>
#include <span>
#include <vector>

namespace boal {

using EpisodePtr = std::shared_ptr<const Episode>;

/// K >= 1 complete episodes sharing horizon and feature dimension, unique ids.
///
/// Episodes are held by shared pointer so leave-one-out priors built from the
/// same pool share storage. Labels, if any, are never read.
class EpisodicPrior {
public:
    explicit EpisodicPrior(std::vector<EpisodePtr> episodes);
    explicit EpisodicPrior(std::vector<Episode> episodes);

    std::size_t size() const noexcept { return episodes_.size(); }
    int horizon() const noexcept { return episodes_.front()->horizon(); }
    std::size_t dimension() const noexcept { return episodes_.front()->dimension(); }
    const Episode& episode(std::size_t k) const { return *episodes_.at(k); }
    const std::vector<EpisodePtr>& episodes() const noexcept { return episodes_; }

    /// First `cap` episodes (all of them when cap >= size()).
    EpisodicPrior truncated(std::size_t cap) const;

private:
    std::vector<EpisodePtr> episodes_;
};

/// Calendar-aligned view of x^k_{t0:te}.
struct EpisodeWindow {
    const Episode* episode = nullptr;
    int t0 = 1;
    int te = 1;

    int length() const noexcept { return te - t0 + 1; }
    std::span<const double> features(int t) const;
};

std::vector<EpisodeWindow> slice(const EpisodicPrior& prior, int t0, int te);

/// Score trace over [t0, te] of every prior episode under the given weights.
std::vector<std::vector<double>> historical_traces(const EpisodicPrior& prior, int t0, int te,
                                                   const EnsembleState& state);

/// Mean over prior episodes of the maximum score in [t0, te].
double estimate_opt(const EpisodicPrior& prior, int t0, int te, const EnsembleState& state);

/// Mean of per-trace maxima.
double mean_of_maxima(std::span<const std::vector<double>> traces);

} // namespace boal
