#include "boal/advisor.hpp"

#include "boal/error.hpp"

#include <httplib.h>

namespace boal {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    reply(res, status, {{"error", kind}, {"message", message}});
}

// Runs fn, translating library errors into HTTP statuses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        reply(res, 200, fn());
    } catch (const json::parse_error& ex) {
        reply_error(res, 400, "validation", std::string("body is not valid JSON: ") + ex.what());
    } catch (const NotFoundError& ex) {
        reply_error(res, 404, "not_found", ex.what());
    } catch (const ConflictError& ex) {
        reply_error(res, 409, "conflict", ex.what());
    } catch (const ValidationError& ex) {
        reply_error(res, 400, "validation", ex.what());
    } catch (const ConfigError& ex) {
        reply_error(res, 400, "validation", ex.what());
    } catch (const ParseError& ex) {
        reply_error(res, 400, "validation", ex.what());
    } catch (const std::exception& ex) {
        reply_error(res, 500, "internal", ex.what());
    }
}

json body_of(const httplib::Request& req) {
    return req.body.empty() ? json::object() : json::parse(req.body);
}

} // namespace

AdvisorServer::AdvisorServer(AdvisorService& service)
    : service_(service), http_(std::make_unique<httplib::Server>()) {
    auto& http = *http_;
    http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { return service_.health(); });
    });
    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return service_.create_session(body_of(req)); });
        if (res.status == 200)
            res.status = 201;
    });
    http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return service_.get_state(req.matches[1]); });
    });
    http.Post(R"(/sessions/([^/]+)/observations)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return service_.post_observation(req.matches[1], body_of(req)); });
    });
    http.Post(R"(/sessions/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return service_.post_label(req.matches[1], body_of(req)); });
    });
    http.Post(R"(/sessions/([^/]+)/decline)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { return service_.decline(req.matches[1], body_of(req)); });
    });
}

AdvisorServer::~AdvisorServer() = default;

bool AdvisorServer::listen(const std::string& host, int port) {
    return http_->listen(host, port);
}

int AdvisorServer::bind_any_port(const std::string& host) {
    return http_->bind_to_any_port(host);
}

bool AdvisorServer::listen_after_bind() {
    return http_->listen_after_bind();
}

void AdvisorServer::stop() {
    http_->stop();
}

bool AdvisorServer::running() const {
    return http_->is_running();
}

} // namespace boal
