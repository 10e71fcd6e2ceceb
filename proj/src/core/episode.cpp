#include "boal/episode.hpp"

#include "boal/error.hpp"

#include <cmath>

namespace boal {

Episode::Episode(std::string id, std::size_t dimension, std::vector<double> features,
                 std::optional<std::vector<double>> labels)
    : id_(std::move(id)), dimension_(dimension), features_(std::move(features)),
      labels_(std::move(labels)) {
    if (dimension_ == 0)
        throw ValidationError("episode '" + id_ + "': feature dimension must be positive");
    if (features_.empty() || features_.size() % dimension_ != 0)
        throw ValidationError("episode '" + id_ + "': feature count is not a positive multiple of the dimension");
    horizon_ = static_cast<int>(features_.size() / dimension_);
    if (labels_) {
        if (static_cast<int>(labels_->size()) != horizon_)
            throw ValidationError("episode '" + id_ + "': label count differs from horizon");
        for (double y : *labels_)
            if (!std::isfinite(y))
                throw ValidationError("episode '" + id_ + "': non-finite label");
    }
}

Episode Episode::live(std::string id, int horizon, std::size_t dimension) {
    if (horizon < 1)
        throw ValidationError("live episode: horizon must be positive");
    if (dimension == 0)
        throw ValidationError("live episode: feature dimension must be positive");
    Episode ep;
    ep.id_ = std::move(id);
    ep.horizon_ = horizon;
    ep.dimension_ = dimension;
    ep.features_.reserve(static_cast<std::size_t>(horizon) * dimension);
    return ep;
}

std::span<const double> Episode::features(int t) const {
    if (t < 1 || t > observed())
        throw ValidationError("episode '" + id_ + "': step " + std::to_string(t) +
                              " outside observed range [1.." + std::to_string(observed()) + "]");
    return {features_.data() + static_cast<std::size_t>(t - 1) * dimension_, dimension_};
}

double Episode::label(int t) const {
    if (!labels_)
        throw ValidationError("episode '" + id_ + "' carries no labels");
    if (t < 1 || t > horizon_)
        throw ValidationError("episode '" + id_ + "': label index out of range");
    return (*labels_)[static_cast<std::size_t>(t - 1)];
}

std::span<const double> Episode::labels() const {
    if (!labels_)
        throw ValidationError("episode '" + id_ + "' carries no labels");
    return *labels_;
}

void Episode::append(std::span<const double> row) {
    if (row.size() != dimension_)
        throw ValidationError("episode '" + id_ + "': observation has dimension " +
                              std::to_string(row.size()) + ", expected " + std::to_string(dimension_));
    if (observed() >= horizon_)
        throw ValidationError("episode '" + id_ + "': horizon already filled");
    features_.insert(features_.end(), row.begin(), row.end());
}

Episode Episode::unlabeled() const {
    Episode ep = *this;
    ep.labels_.reset();
    return ep;
}

Episode Episode::with_labels(std::vector<double> labels) const {
    if (!complete())
        throw ValidationError("episode '" + id_ + "': cannot label an incomplete episode");
    return Episode(id_, dimension_, features_, std::move(labels));
}

} // namespace boal
