#pragma once

// Live season advisor: sessions that wrap the online BOAL loop for a
// human-operated season, persisted as append-only JSONL event logs.

#include "boal/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace boal {

struct AdvisorOptions {
    /// One <session id>.jsonl file per session lives here.
    std::filesystem::path session_dir = "sessions";
    /// Linear model file used when a request asks for "default" experts.
    std::optional<std::filesystem::path> default_experts;
    /// Episode CSV used when a request asks for the "default" prior.
    std::optional<std::filesystem::path> default_prior;
    std::string config_digest;
};

class AdvisorSession;

/// Transport-independent service. Every method returns the JSON payload of
/// the corresponding endpoint and throws boal errors on failure
/// (ValidationError/ConfigError: bad request, ConflictError, NotFoundError).
class AdvisorService {
public:
    /// Replays every event log found in the session directory.
    explicit AdvisorService(AdvisorOptions options);
    ~AdvisorService();

    nlohmann::json create_session(const nlohmann::json& request);
    nlohmann::json post_observation(const std::string& id, const nlohmann::json& body);
    nlohmann::json post_label(const std::string& id, const nlohmann::json& body);
    nlohmann::json decline(const std::string& id, const nlohmann::json& body);
    nlohmann::json get_state(const std::string& id) const;
    nlohmann::json health() const;

    std::size_t session_count() const;

private:
    std::shared_ptr<AdvisorSession> find(const std::string& id) const;
    std::shared_ptr<const Committee> committee_for(const std::string& source);
    std::shared_ptr<const EpisodicPrior> prior_for(const std::string& source);

    AdvisorOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<AdvisorSession>> sessions_;
    std::map<std::string, std::shared_ptr<const Committee>> committees_;
    std::map<std::string, std::shared_ptr<const EpisodicPrior>> priors_;
};

/// HTTP front end: JSON bodies in and out, errors as {"error": kind, "message": ...}.
class AdvisorServer {
public:
    explicit AdvisorServer(AdvisorService& service);
    ~AdvisorServer();

    /// Blocks until stop(). Returns false when the address cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it (or -1); serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool running() const;

private:
    AdvisorService& service_;
    std::unique_ptr<httplib::Server> http_;
};

/// Current UTC time as ISO-8601 with milliseconds.
std::string iso8601_now();

} // namespace boal
