#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boal {

/// A finite-horizon feature stream x_1..x_T with optional labels.
///
/// Time indices are 1-based throughout the library. Features are stored
/// row-major, one row of `dimension()` values per step. A "live" episode is
/// created empty and grows one row at a time as observations arrive; every
/// other episode is complete on construction.
class Episode {
public:
    Episode(std::string id, std::size_t dimension, std::vector<double> features,
            std::optional<std::vector<double>> labels = std::nullopt);

    /// Empty episode of known horizon, filled through append().
    static Episode live(std::string id, int horizon, std::size_t dimension);

    const std::string& id() const noexcept { return id_; }
    int horizon() const noexcept { return horizon_; }
    std::size_t dimension() const noexcept { return dimension_; }

    /// Number of rows currently available (== horizon() unless live).
    int observed() const noexcept {
        return static_cast<int>(features_.size() / dimension_);
    }
    bool complete() const noexcept { return observed() == horizon_; }

    std::span<const double> features(int t) const;

    bool has_labels() const noexcept { return labels_.has_value(); }
    double label(int t) const;
    std::span<const double> labels() const;

    /// Appends the observation for step observed()+1.
    void append(std::span<const double> row);

    /// Copy of this episode without labels.
    Episode unlabeled() const;
    /// Copy of this episode carrying the given labels.
    Episode with_labels(std::vector<double> labels) const;

private:
    Episode() = default;

    std::string id_;
    int horizon_ = 0;
    std::size_t dimension_ = 0;
    std::vector<double> features_;
    std::optional<std::vector<double>> labels_;
};

} // namespace boal
