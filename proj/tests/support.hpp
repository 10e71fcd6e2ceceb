#pragma once

// Helpers shared by the test binaries.

#include "boal/ensemble.hpp"
#include "boal/episode.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace boal::test {

/// Expert returning values[t-1] on every episode.
class TableExpert final : public Expert {
public:
    TableExpert(std::string id, std::vector<double> values) : id_(std::move(id)), values_(std::move(values)) {}
    const std::string& id() const override { return id_; }
    double predict(const Episode&, int t) const override { return values_.at(static_cast<std::size_t>(t - 1)); }

private:
    std::string id_;
    std::vector<double> values_;
};

/// Expert computed from the episode's features by an arbitrary function.
class FunctionExpert final : public Expert {
public:
    using Fn = std::function<double(const Episode&, int)>;
    FunctionExpert(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
    const std::string& id() const override { return id_; }
    double predict(const Episode& e, int t) const override { return fn_(e, t); }

private:
    std::string id_;
    Fn fn_;
};

/// Committee whose expert i predicts columns[i][t-1].
inline std::shared_ptr<const Committee> table_committee(const std::vector<std::vector<double>>& columns) {
    std::vector<ExpertPtr> experts;
    for (std::size_t i = 0; i < columns.size(); ++i)
        experts.push_back(std::make_shared<TableExpert>("e" + std::to_string(i + 1), columns[i]));
    return std::make_shared<const Committee>(std::move(experts));
}

/// Committee predicting constant values (one per expert) at every step.
inline std::shared_ptr<const Committee> constant_committee(const std::vector<double>& values, int horizon) {
    std::vector<std::vector<double>> cols;
    for (double v : values)
        cols.emplace_back(static_cast<std::size_t>(horizon), v);
    return table_committee(cols);
}

/// d=1 episode with zero features.
inline Episode blank_episode(const std::string& id, int horizon) {
    return Episode(id, 1, std::vector<double>(static_cast<std::size_t>(horizon), 0.0));
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("boal-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace boal::test
