#include "boal/advisor.hpp"

#include "boal/bench.hpp"
#include "boal/config.hpp"
#include "boal/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>

namespace boal {

using nlohmann::json;

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    const std::size_t n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::snprintf(buf + n, sizeof buf - n, ".%03dZ", static_cast<int>(ms));
    return buf;
}

namespace {

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

// Field accessors for request bodies; failures name the field.
template <class T>
T required(const json& body, const char* key) {
    if (!body.is_object())
        throw ValidationError("request body must be a JSON object");
    if (!body.contains(key) || body.at(key).is_null())
        throw ValidationError(std::string(key) + ": missing");
    try {
        return body.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string(key) + ": wrong type");
    }
}

template <class T>
T optional_field(const json& body, const char* key, T fallback) {
    if (!body.contains(key) || body.at(key).is_null())
        return fallback;
    try {
        return body.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string(key) + ": wrong type");
    }
}

std::string random_id() {
    std::random_device rd;
    std::uniform_int_distribution<int> hex(0, 15);
    std::string id;
    for (int i = 0; i < 12; ++i)
        id += "0123456789abcdef"[hex(rd)];
    return id;
}

} // namespace

/// One advisory season. All access goes through the owning service, which
/// holds `mutex` for the duration of every request on this session.
class AdvisorSession {
public:
    struct Params {
        int horizon = 0;
        int budget = 0;
        Method method = Method::uniform;
        double eta = 1.0;
        EngineConfig engine;
        std::string expert_source;
        std::optional<std::string> prior_source;
    };

    AdvisorSession(std::string id, json request, Params params, std::shared_ptr<const Committee> committee,
                   std::shared_ptr<const EpisodicPrior> prior, std::string created)
        : id_(std::move(id)),
          request_(std::move(request)),
          params_(std::move(params)),
          created_(std::move(created)),
          committee_(std::move(committee)),
          episode_(Episode::live(id_, params_.horizon, dimension_of(*committee_))),
          run_(EnsembleState(committee_, params_.eta), plan_segments(params_.horizon, params_.budget),
               params_.method, std::move(prior), params_.engine) {}

    std::mutex mutex;

    const std::string& id() const { return id_; }
    const json& request() const { return request_; }
    const std::string& created() const { return created_; }

    std::string status() const {
        if (run_.awaiting_label())
            return "awaiting_label";
        if (run_.budget_spent())
            return "complete";
        return "awaiting_observation";
    }

    json observe(int t, const std::vector<double>& features) {
        if (run_.awaiting_label())
            throw ConflictError("step " + std::to_string(run_.pending_step()) +
                                " awaits a label or a decline");
        if (run_.horizon_done())
            throw ConflictError("the season is over (horizon " + std::to_string(params_.horizon) + ")");
        if (t != run_.next_step())
            throw ConflictError("expected observation for t=" + std::to_string(run_.next_step()) + ", got t=" +
                                std::to_string(t));
        if (features.size() != episode_.dimension())
            throw ValidationError("features: expected " + std::to_string(episode_.dimension()) +
                                  " values, got " + std::to_string(features.size()));
        for (double v : features)
            if (!std::isfinite(v))
                throw ValidationError("features: values must be finite");

        Episode next = episode_;
        next.append(features);
        const OnlineRun::Step step = run_.observe(next);
        episode_ = std::move(next);

        const bool sample = step.decision.selected();
        scores_.push_back(step.score);
        predictions_.push_back(step.prediction);
        thresholds_.push_back(step.segment_closed ? std::nullopt : step.decision.threshold);
        decisions_.push_back(sample ? "sample" : "wait");
        forced_.push_back(sample && step.decision.forced);

        json out = {{"session", id_},
                    {"t", step.t},
                    {"segment", step.segment},
                    {"score", step.score},
                    {"prediction", step.prediction},
                    {"threshold", optional_number(thresholds_.back())},
                    {"window", window_state(step.t)},
                    {"decision", decisions_.back()},
                    {"forced", static_cast<bool>(forced_.back())},
                    {"segment_closed", step.segment_closed},
                    {"probabilities", run_.state().probabilities()},
                    {"status", status()}};
        return out;
    }

    json label(int t, double y) {
        if (!run_.awaiting_label())
            throw ConflictError("no sample is pending");
        if (t != run_.pending_step())
            throw ConflictError("pending sample is for t=" + std::to_string(run_.pending_step()) + ", got t=" +
                                std::to_string(t));
        if (!std::isfinite(y))
            throw ValidationError("y: must be finite");
        run_.label(episode_, y);
        {
            const auto p = run_.state().probabilities();
            query_probabilities_.emplace_back(p.begin(), p.end());
        }
        return {{"session", id_},
                {"query", query_json(run_.queries().size() - 1)},
                {"probabilities", run_.state().probabilities()},
                {"status", status()}};
    }

    json decline(int t) {
        if (!run_.awaiting_label())
            throw ConflictError("no sample is pending");
        if (t != run_.pending_step())
            throw ConflictError("pending sample is for t=" + std::to_string(run_.pending_step()) + ", got t=" +
                                std::to_string(t));
        run_.decline();
        declines_.push_back(t);
        return {{"session", id_}, {"t", t}, {"declined", true}, {"status", status()}};
    }

    json state() const {
        json segments = json::array();
        for (std::size_t i = 0; i < run_.plan().segments.size(); ++i) {
            const auto& s = run_.plan().segments[i];
            segments.push_back({{"index", i}, {"t0", s.t0}, {"te", s.te}});
        }
        json thresholds = json::array();
        for (const auto& th : thresholds_)
            thresholds.push_back(optional_number(th));
        json forced = json::array();
        for (char f : forced_)
            forced.push_back(static_cast<bool>(f));
        return {{"id", id_},
                {"created", created_},
                {"strategy", method_name(params_.method)},
                {"eta", params_.eta},
                {"expert_source", params_.expert_source},
                {"prior_source", params_.prior_source ? json(*params_.prior_source) : json(nullptr)},
                {"dimension", episode_.dimension()},
                {"plan", {{"horizon", params_.horizon}, {"budget", params_.budget}, {"segments", segments}}},
                {"step", run_.next_step() - 1},
                {"status", status()},
                {"pending_t", run_.awaiting_label() ? json(run_.pending_step()) : json(nullptr)},
                {"experts", committee_->ids()},
                {"probabilities", run_.state().probabilities()},
                {"score_history", scores_},
                {"prediction_history", predictions_},
                {"threshold_history", thresholds},
                {"decision_history", decisions_},
                {"forced_history", forced},
                {"queries", queries_json()},
                {"declines", declines_},
                {"segment_setup", setup_json()}};
    }

private:
    static std::size_t dimension_of(const Committee& committee) {
        std::optional<std::size_t> d;
        for (std::size_t i = 0; i < committee.size(); ++i) {
            const auto* model = dynamic_cast<const LinearResponseModel*>(&committee.expert(i));
            if (!model)
                throw ValidationError("expert_source: live sessions need parametric (linear model) experts");
            if (d && *d != model->theta().size())
                throw ValidationError("expert_source: models disagree on the feature dimension");
            d = model->theta().size();
        }
        return *d;
    }

    json window_state(int t) const {
        const auto* sa = dynamic_cast<const SecretaryStopper*>(run_.current_rule());
        if (!sa)
            return nullptr;
        const double rm = sa->running_max();
        return {{"length", sa->window_length()},
                {"end", sa->context().t0 + sa->window_length() - 1},
                {"in_window", sa->in_window(t)},
                {"running_max", std::isfinite(rm) ? json(rm) : json(nullptr)}};
    }

    json setup_json() const {
        const auto& setup = run_.current_setup();
        if (!setup)
            return nullptr;
        json out = {{"index", setup->index}, {"t0", setup->ctx.t0}, {"te", setup->ctx.te}};
        if (setup->window)
            out["window"] = *setup->window;
        if (setup->opt) {
            out["opt"] = *setup->opt;
            if (const auto* psa = dynamic_cast<const ProphetSecretaryStopper*>(run_.current_rule()))
                out["schedule"] = psa->schedule().taus;
        }
        if (setup->ets) {
            out["tau"] = setup->ets->chosen;
            out["grid"] = setup->ets->grid;
            out["estimates"] = setup->ets->estimates;
        }
        if (setup->query_time)
            out["query_time"] = *setup->query_time;
        return out;
    }

    json query_json(std::size_t i) const {
        const QueryRecord& q = run_.queries()[i];
        return {{"segment", q.segment},
                {"t", q.t},
                {"label", q.label},
                {"score", q.score},
                {"forced", q.forced},
                {"probabilities", query_probabilities_[i]}};
    }

    json queries_json() const {
        json out = json::array();
        for (std::size_t i = 0; i < run_.queries().size(); ++i)
            out.push_back(query_json(i));
        return out;
    }

    std::string id_;
    json request_;
    Params params_;
    std::string created_;
    std::shared_ptr<const Committee> committee_;
    Episode episode_;
    OnlineRun run_;

    std::vector<double> scores_;
    std::vector<double> predictions_;
    std::vector<std::optional<double>> thresholds_;
    std::vector<std::string> decisions_;
    std::vector<char> forced_;
    std::vector<std::vector<double>> query_probabilities_;
    std::vector<int> declines_;

public:
    // Event log; null while replaying.
    std::unique_ptr<std::ofstream> log;

    void append_event(json event) {
        if (!log)
            return;
        event["time"] = iso8601_now();
        *log << event.dump() << '\n';
        log->flush();
        if (!*log)
            throw RunError("could not write the event log of session '" + id_ + "'");
    }
};

namespace {

AdvisorSession::Params parse_params(const json& request) {
    AdvisorSession::Params p;
    p.horizon = required<int>(request, "horizon");
    p.budget = required<int>(request, "budget");
    if (p.horizon < 1)
        throw ValidationError("horizon: must be >= 1");
    if (p.budget < 1)
        throw ValidationError("budget: must be >= 1");
    if (p.budget > p.horizon)
        throw ValidationError("budget: exceeds horizon");
    const auto strategy = required<std::string>(request, "strategy");
    try {
        p.method = parse_method(strategy);
    } catch (const ConfigError& ex) {
        throw ValidationError(std::string("strategy: ") + ex.what());
    }
    if (p.method == Method::base)
        throw ValidationError("strategy: Base never samples; choose UNI, SA, PSA or ETS");
    p.eta = optional_field<double>(request, "eta", 1.0);
    if (!(p.eta > 0.0) || !std::isfinite(p.eta))
        throw ValidationError("eta: must be a positive finite number");
    p.expert_source = optional_field<std::string>(request, "expert_source", "default");
    if (request.contains("prior_source") && !request.at("prior_source").is_null())
        p.prior_source = required<std::string>(request, "prior_source");
    if (needs_prior(p.method) && !p.prior_source)
        throw ValidationError("prior_source: " + method_name(p.method) + " needs historical episodes");
    const auto loss = optional_field<std::string>(request, "loss", "squared");
    if (loss == "absolute")
        p.engine.loss.kind = LossKind::absolute;
    else if (loss != "squared")
        throw ValidationError("loss: unknown loss '" + loss + "'");
    p.engine.ets_grid_size = optional_field<int>(request, "ets_grid_size", p.engine.ets_grid_size);
    const long cap = optional_field<long>(request, "prior_cap", 0);
    if (cap < 0)
        throw ValidationError("prior_cap: must be >= 0");
    p.engine.prior_cap = static_cast<std::size_t>(cap);
    try {
        p.engine.validate();
    } catch (const Error& ex) {
        throw ValidationError(ex.what());
    }
    return p;
}

} // namespace

AdvisorService::AdvisorService(AdvisorOptions options) : options_(std::move(options)) {
    std::filesystem::create_directories(options_.session_dir);
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(options_.session_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
            logs.push_back(entry.path());
    std::sort(logs.begin(), logs.end());

    for (const auto& path : logs) {
        std::ifstream in(path);
        std::vector<json> events;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            try {
                events.push_back(json::parse(line));
            } catch (const json::parse_error&) {
                // A torn final line from a crash mid-write; anything after it is unusable.
                if (in.peek() != std::char_traits<char>::eof())
                    throw RunError("corrupt event log '" + path.string() + "'");
            }
        }
        if (events.empty() || events.front().value("event", "") != "create")
            throw RunError("event log '" + path.string() + "' does not start with a create event");

        const json& create = events.front();
        const std::string id = create.at("session").get<std::string>();
        const json request = create.at("request");
        auto params = parse_params(request);
        auto session = std::make_shared<AdvisorSession>(
            id, request, params, committee_for(params.expert_source),
            params.prior_source ? prior_for(*params.prior_source) : nullptr, create.value("time", ""));
        for (std::size_t k = 1; k < events.size(); ++k) {
            const json& ev = events[k];
            const std::string kind = ev.value("event", "");
            if (kind == "observation") {
                const json out = session->observe(ev.at("t").get<int>(), ev.at("features").get<std::vector<double>>());
                if (ev.contains("decision") && ev.at("decision") != out.at("decision"))
                    throw RunError("replay of session '" + id + "' diverged at t=" + std::to_string(ev.at("t").get<int>()));
            } else if (kind == "label") {
                session->label(ev.at("t").get<int>(), ev.at("y").get<double>());
            } else if (kind == "decline") {
                session->decline(ev.at("t").get<int>());
            } else {
                throw RunError("unknown event '" + kind + "' in '" + path.string() + "'");
            }
        }
        session->log = std::make_unique<std::ofstream>(path, std::ios::app);
        sessions_[id] = std::move(session);
    }
}

AdvisorService::~AdvisorService() = default;

std::shared_ptr<const Committee> AdvisorService::committee_for(const std::string& source) {
    std::filesystem::path path;
    if (source == "default") {
        if (!options_.default_experts)
            throw ValidationError("expert_source: the service has no default experts configured");
        path = *options_.default_experts;
    } else {
        path = source;
    }
    const std::string key = path.lexically_normal().string();
    if (auto it = committees_.find(key); it != committees_.end())
        return it->second;
    std::vector<std::shared_ptr<const LinearResponseModel>> models;
    try {
        models = load_models(path);
    } catch (const ConfigError& ex) {
        throw ValidationError(std::string("expert_source: ") + ex.what());
    }
    std::vector<ExpertPtr> experts(models.begin(), models.end());
    std::shared_ptr<const Committee> committee;
    try {
        committee = std::make_shared<const Committee>(std::move(experts));
    } catch (const Error& ex) {
        throw ValidationError(std::string("expert_source: ") + ex.what());
    }
    committees_[key] = committee;
    return committee;
}

std::shared_ptr<const EpisodicPrior> AdvisorService::prior_for(const std::string& source) {
    std::filesystem::path path;
    if (source == "default") {
        if (!options_.default_prior)
            throw ValidationError("prior_source: the service has no default prior configured");
        path = *options_.default_prior;
    } else {
        path = source;
    }
    const std::string key = path.lexically_normal().string();
    if (auto it = priors_.find(key); it != priors_.end())
        return it->second;
    std::shared_ptr<const EpisodicPrior> prior;
    try {
        prior = std::make_shared<const EpisodicPrior>(load_episodes(path));
    } catch (const Error& ex) {
        throw ValidationError(std::string("prior_source: ") + ex.what());
    }
    priors_[key] = prior;
    return prior;
}

std::shared_ptr<AdvisorSession> AdvisorService::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end())
        throw NotFoundError("no session '" + id + "'");
    return it->second;
}

json AdvisorService::create_session(const json& request) {
    const auto params = parse_params(request);
    std::lock_guard lock(mutex_);
    auto committee = committee_for(params.expert_source);
    std::shared_ptr<const EpisodicPrior> prior;
    if (params.prior_source) {
        prior = prior_for(*params.prior_source);
        std::size_t d = 0;
        if (const auto* m = dynamic_cast<const LinearResponseModel*>(&committee->expert(0)))
            d = m->theta().size();
        if (prior->dimension() != d)
            throw ValidationError("prior_source: prior dimension does not match the experts");
        if (prior->horizon() < params.horizon)
            throw ValidationError("prior_source: prior episodes are shorter than the horizon");
    }

    std::string id;
    do {
        id = random_id();
    } while (sessions_.count(id) || std::filesystem::exists(options_.session_dir / (id + ".jsonl")));

    const std::string created = iso8601_now();
    auto session = std::make_shared<AdvisorSession>(id, request, params, committee, prior, created);
    const auto path = options_.session_dir / (id + ".jsonl");
    session->log = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*session->log)
        throw RunError("cannot create event log '" + path.string() + "'");
    session->append_event({{"event", "create"}, {"session", id}, {"request", request}});
    sessions_[id] = session;
    return session->state();
}

json AdvisorService::post_observation(const std::string& id, const json& body) {
    auto session = find(id);
    const int t = required<int>(body, "t");
    const auto features = required<std::vector<double>>(body, "features");
    std::lock_guard lock(session->mutex);
    json out = session->observe(t, features);
    session->append_event({{"event", "observation"},
                           {"t", t},
                           {"features", features},
                           {"decision", out.at("decision")},
                           {"forced", out.at("forced")},
                           {"score", out.at("score")}});
    return out;
}

json AdvisorService::post_label(const std::string& id, const json& body) {
    auto session = find(id);
    const int t = required<int>(body, "t");
    const double y = required<double>(body, "y");
    std::lock_guard lock(session->mutex);
    json out = session->label(t, y);
    session->append_event({{"event", "label"}, {"t", t}, {"y", y}});
    return out;
}

json AdvisorService::decline(const std::string& id, const json& body) {
    auto session = find(id);
    const int t = required<int>(body, "t");
    std::lock_guard lock(session->mutex);
    json out = session->decline(t);
    session->append_event({{"event", "decline"}, {"t", t}});
    return out;
}

json AdvisorService::get_state(const std::string& id) const {
    auto session = find(id);
    std::lock_guard lock(session->mutex);
    return session->state();
}

json AdvisorService::health() const {
    std::lock_guard lock(mutex_);
    return {{"service", "boal-advisor"}, {"status", "ok"}, {"config_digest", options_.config_digest},
            {"sessions", sessions_.size()}};
}

std::size_t AdvisorService::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

} // namespace boal
