#include "boal/bench.hpp"

#include "boal/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <system_error>
#include <unordered_set>

namespace boal {

std::string process_name(StreamProcess p) {
    return p == StreamProcess::ar1_seasonal ? "ar1_seasonal" : "iid_uniform";
}

StreamProcess parse_process(const std::string& name) {
    if (name == "ar1_seasonal") return StreamProcess::ar1_seasonal;
    if (name == "iid_uniform") return StreamProcess::iid_uniform;
    throw ConfigError("unknown stream process '" + name + "'");
}

void StreamSpec::validate() const {
    if (horizon < 1) throw ValidationError("stream horizon must be positive");
    if (dimension < 1) throw ValidationError("stream dimension must be positive");
    if (!(phi > -1.0 && phi < 1.0)) throw ValidationError("AR coefficient must lie in (-1, 1)");
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        throw ValidationError("seasonal amplitude must be finite and nonnegative");
    if (!(noise >= 0.0) || !std::isfinite(noise))
        throw ValidationError("noise scale must be finite and nonnegative");
}

double seasonal_mean(const StreamSpec& spec, int t) {
    const double phase = static_cast<double>(t) / static_cast<double>(spec.horizon);
    return spec.amplitude * std::sin(std::numbers::pi * phase);
}

EpisodicPrior gen_streams(const StreamSpec& spec, int count, const std::string& id_prefix) {
    spec.validate();
    if (count < 1)
        throw ValidationError("stream count must be positive");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto d = static_cast<std::size_t>(spec.dimension);
    std::vector<Episode> episodes;
    episodes.reserve(static_cast<std::size_t>(count));
    for (int k = 1; k <= count; ++k) {
        std::vector<double> features(static_cast<std::size_t>(spec.horizon) * d);
        if (spec.process == StreamProcess::iid_uniform) {
            for (double& v : features)
                v = unit(rng);
        } else {
            std::vector<double> deviation(d, 0.0);
            for (int t = 1; t <= spec.horizon; ++t) {
                const double season = seasonal_mean(spec, t);
                for (std::size_t j = 0; j < d; ++j) {
                    deviation[j] = spec.phi * deviation[j] + spec.noise * gauss(rng);
                    features[static_cast<std::size_t>(t - 1) * d + j] =
                        season + deviation[j];
                }
            }
        }
        char id[32];
        std::snprintf(id, sizeof id, "%03d", k);
        episodes.emplace_back(id_prefix + id, d, std::move(features));
    }
    return EpisodicPrior(std::move(episodes));
}

LinearResponseModel::LinearResponseModel(std::string id, std::vector<double> theta, double kappa)
    : id_(std::move(id)), theta_(std::move(theta)), kappa_(kappa) {
    if (theta_.empty())
        throw ValidationError("model '" + id_ + "': empty parameter vector");
    if (!(kappa_ >= 0.0 && kappa_ < 1.0))
        throw ValidationError("model '" + id_ + "': decay must lie in [0, 1)");
}

std::vector<double> LinearResponseModel::predict_prefix(const Episode& episode, int upto) const {
    if (episode.dimension() != theta_.size())
        throw EvaluationError("model '" + id_ + "' expects " + std::to_string(theta_.size()) +
                              " features, episode '" + episode.id() + "' has " +
                              std::to_string(episode.dimension()));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(upto));
    double state = 0.0;
    for (int t = 1; t <= upto; ++t) {
        const auto x = episode.features(t);
        double response = 0.0;
        for (std::size_t j = 0; j < theta_.size(); ++j)
            response += theta_[j] * x[j];
        state = kappa_ * state + response;
        out.push_back(state);
    }
    return out;
}

double LinearResponseModel::predict(const Episode& episode, int t) const {
    return predict_prefix(episode, t).back();
}

void SyntheticFamily::validate() const {
    if (theta.empty()) throw ValidationError("family: empty theta");
    if (!(perturbation > 0.0 && perturbation < 1.0))
        throw ValidationError("family: perturbation must lie in (0, 1)");
    if (n_models < 2)
        throw ValidationError("family: n_models must be at least 2");
    if (!(kappa >= 0.0 && kappa < 1.0)) throw ValidationError("family: kappa must lie in [0, 1)");
    if (target_index < 0 || target_index >= n_models)
        throw ValidationError("family: target index out of range");
}

std::vector<ExpertPtr> GeneratedFamily::expert_ptrs() const {
    return {experts.begin(), experts.end()};
}

GeneratedFamily gen_family(const SyntheticFamily& family) {
    family.validate();
    std::mt19937_64 rng(family.seed);
    std::uniform_real_distribution<double> noise(-family.perturbation, family.perturbation);
    GeneratedFamily out;
    for (int i = 0; i < family.n_models; ++i) {
        std::vector<double> theta = family.theta;
        for (double& v : theta)
            v *= 1.0 + noise(rng);
        char id[32];
        std::snprintf(id, sizeof id, "model_%02d", i + 1);
        auto model = std::make_shared<const LinearResponseModel>(id, std::move(theta), family.kappa);
        if (i == family.target_index)
            out.target = std::move(model);
        else
            out.experts.push_back(std::move(model));
    }
    return out;
}

Episode label_with(const Episode& episode, const Expert& target) {
    return episode.with_labels(target.predict_prefix(episode, episode.horizon()));
}

TraceExpert::TraceExpert(std::string id, std::map<std::string, std::vector<double>> traces)
    : id_(std::move(id)), traces_(std::move(traces)) {}

std::vector<double> TraceExpert::predict_prefix(const Episode& episode, int upto) const {
    auto it = traces_.find(episode.id());
    if (it == traces_.end())
        throw EvaluationError("expert '" + id_ + "' has no trace for episode '" + episode.id() +
                              "' (t=1)");
    if (upto > static_cast<int>(it->second.size()))
        throw EvaluationError("expert '" + id_ + "' has no prediction for episode '" + episode.id() +
                              "' at t=" + std::to_string(it->second.size() + 1));
    return {it->second.begin(), it->second.begin() + upto};
}

double TraceExpert::predict(const Episode& episode, int t) const {
    if (t < 1)
        throw EvaluationError("expert '" + id_ + "': invalid step " + std::to_string(t));
    return predict_prefix(episode, t).back();
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' '))
        s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && s[start] == ' ')
        ++start;
    return s.substr(start);
}

double parse_double(const std::string& cell, const std::string& column, long row) {
    const std::string s = trim(cell);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(ParseError::Kind::number, "column '" + column + "': '" + s + "' is not a finite number", row);
    return v;
}

int parse_step(const std::string& cell, long row) {
    const std::string s = trim(cell);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(ParseError::Kind::number, "column 't': '" + s + "' is not an integer", row);
    return v;
}

std::ifstream open_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError(ParseError::Kind::io, "cannot open '" + path.string() + "'", 0);
    return in;
}

/// Tracks episode grouping: ids appear in one contiguous block with t = 1, 2, ...
class EpisodeBlocks {
public:
    /// Returns true when `id` starts a new episode.
    bool advance(const std::string& id, int t, long row) {
        if (id.empty())
            throw ParseError(ParseError::Kind::columns, "empty episode_id", row);
        bool fresh = false;
        if (id != current_) {
            if (!seen_.insert(id).second)
                throw ParseError(ParseError::Kind::duplicate_id,
                                 "episode '" + id + "' appears in more than one block", row);
            current_ = id;
            expected_ = 1;
            fresh = true;
        }
        if (t != expected_)
            throw ParseError(ParseError::Kind::contiguity,
                             "episode '" + id + "': expected t=" + std::to_string(expected_) +
                                 ", found t=" + std::to_string(t),
                             row);
        ++expected_;
        return fresh;
    }

private:
    std::unordered_set<std::string> seen_;
    std::string current_;
    int expected_ = 1;
};

} // namespace

std::vector<Episode> load_episode_file(const std::filesystem::path& path) {
    auto in = open_csv(path);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(ParseError::Kind::header, "'" + path.string() + "' is empty", 1);
    const auto header = split_csv_line(trim(line));
    if (header.size() < 3 || trim(header[0]) != "episode_id" || trim(header[1]) != "t")
        throw ParseError(ParseError::Kind::header, "header must start with 'episode_id,t,f_1'", 1);
    const bool has_label = trim(header.back()) == "label";
    const std::size_t d = header.size() - 2 - (has_label ? 1 : 0);
    if (d == 0)
        throw ParseError(ParseError::Kind::header, "no feature columns", 1);
    for (std::size_t j = 0; j < d; ++j)
        if (trim(header[2 + j]) != "f_" + std::to_string(j + 1))
            throw ParseError(ParseError::Kind::header,
                             "expected column 'f_" + std::to_string(j + 1) + "', found '" +
                                 trim(header[2 + j]) + "'",
                             1);

    struct Pending {
        std::string id;
        std::vector<double> features;
        std::vector<double> labels;
    };
    std::vector<Pending> blocks;
    EpisodeBlocks order;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty())
            continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError(ParseError::Kind::columns,
                             "expected " + std::to_string(header.size()) + " columns (d=" + std::to_string(d) +
                                 "), found " + std::to_string(cells.size()),
                             row);
        const std::string id = trim(cells[0]);
        const int t = parse_step(cells[1], row);
        if (order.advance(id, t, row))
            blocks.push_back({id, {}, {}});
        auto& block = blocks.back();
        for (std::size_t j = 0; j < d; ++j)
            block.features.push_back(parse_double(cells[2 + j], "f_" + std::to_string(j + 1), row));
        if (has_label) {
            if (trim(cells.back()).empty())
                throw ParseError(ParseError::Kind::label, "missing label for episode '" + id + "'", row);
            block.labels.push_back(parse_double(cells.back(), "label", row));
        }
    }
    std::vector<Episode> episodes;
    episodes.reserve(blocks.size());
    for (auto& b : blocks) {
        std::optional<std::vector<double>> labels;
        if (has_label)
            labels = std::move(b.labels);
        episodes.emplace_back(std::move(b.id), d, std::move(b.features), std::move(labels));
    }
    return episodes;
}

EpisodicPrior load_episodes(const std::filesystem::path& path) {
    auto episodes = load_episode_file(path);
    if (episodes.empty())
        throw ParseError(ParseError::Kind::columns, "'" + path.string() + "' holds no episodes", 1);
    return EpisodicPrior(std::move(episodes));
}

std::shared_ptr<const TraceExpert> load_expert_traces(const std::filesystem::path& path) {
    auto in = open_csv(path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "episode_id,t,prediction")
        throw ParseError(ParseError::Kind::header, "header must be 'episode_id,t,prediction'", 1);
    std::map<std::string, std::vector<double>> traces;
    EpisodeBlocks order;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty())
            continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3)
            throw ParseError(ParseError::Kind::columns, "expected 3 columns, found " + std::to_string(cells.size()), row);
        const std::string id = trim(cells[0]);
        const int t = parse_step(cells[1], row);
        order.advance(id, t, row);
        traces[id].push_back(parse_double(cells[2], "prediction", row));
    }
    return std::make_shared<const TraceExpert>(path.stem().string(), std::move(traces));
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw ValidationError("cannot format number");
    return {buf, ptr};
}

namespace {

std::ofstream create_file(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write '" + path.string() + "'");
    return out;
}

} // namespace

void write_episodes(const std::filesystem::path& path, std::span<const EpisodePtr> episodes) {
    if (episodes.empty())
        throw ValidationError("write_episodes: nothing to write");
    const std::size_t d = episodes.front()->dimension();
    const bool labelled = episodes.front()->has_labels();
    for (const auto& ep : episodes)
        if (ep->dimension() != d || ep->has_labels() != labelled)
            throw ValidationError("write_episodes: episodes in one file must share dimension and label presence");
    auto out = create_file(path);
    out << "episode_id,t";
    for (std::size_t j = 1; j <= d; ++j)
        out << ",f_" << j;
    if (labelled)
        out << ",label";
    out << '\n';
    for (const auto& ep : episodes) {
        for (int t = 1; t <= ep->horizon(); ++t) {
            out << ep->id() << ',' << t;
            for (double v : ep->features(t))
                out << ',' << format_number(v);
            if (labelled)
                out << ',' << format_number(ep->label(t));
            out << '\n';
        }
    }
    if (!out)
        throw Error("failed writing '" + path.string() + "'");
}

void write_expert_trace(const std::filesystem::path& path, const Expert& expert,
                        std::span<const EpisodePtr> episodes) {
    auto out = create_file(path);
    out << "episode_id,t,prediction\n";
    for (const auto& ep : episodes) {
        const auto preds = expert.predict_prefix(*ep, ep->horizon());
        for (int t = 1; t <= ep->horizon(); ++t)
            out << ep->id() << ',' << t << ',' << format_number(preds[static_cast<std::size_t>(t - 1)]) << '\n';
    }
    if (!out)
        throw Error("failed writing '" + path.string() + "'");
}

} // namespace boal
