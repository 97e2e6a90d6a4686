#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace deptex::http {

struct Request {
    std::string method = "GET";
    std::string url;
    std::map<std::string, std::string> headers;
    std::string body;
    std::chrono::milliseconds timeout{10000};
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Outbound HTTP. Implementations throw Error(HttpFailure) when no response
/// could be obtained (connection refused, timeout, bad URL).
class Transport {
public:
    virtual ~Transport() = default;
    virtual Response send(const Request& request) = 0;
};

/// Real network transport backed by cpp-httplib.
class NetworkTransport final : public Transport {
public:
    Response send(const Request& request) override;
};

/// In-process transport answering from a handler; used by tests and fixtures.
class StubTransport final : public Transport {
public:
    using Handler = std::function<Response(const Request&)>;

    explicit StubTransport(Handler handler) : handler_(std::move(handler)) {}

    Response send(const Request& request) override;

    [[nodiscard]] std::vector<Request> requests() const;
    [[nodiscard]] std::size_t count() const;

private:
    Handler handler_;
    mutable std::mutex mutex_;
    std::vector<Request> log_;
};

struct Exchange {
    Request request;
    int status = 0;
    std::string response_body;
    std::string error;
};

/// Decorator that forwards to an inner transport and keeps a log.
class RecordingTransport final : public Transport {
public:
    explicit RecordingTransport(Transport& inner) : inner_(inner) {}

    Response send(const Request& request) override;

    [[nodiscard]] const std::vector<Exchange>& log() const noexcept { return log_; }

private:
    Transport& inner_;
    std::vector<Exchange> log_;
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;
};

ParsedUrl parse_url(const std::string& url);

} // namespace deptex::http
