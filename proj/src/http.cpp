#include "deptex/http.hpp"

#include <httplib.h>

#include "deptex/error.hpp"

namespace deptex::http {

ParsedUrl parse_url(const std::string& url)
{
    ParsedUrl out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::HttpFailure, "URL lacks a scheme: '" + url + "'");
    }
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http" && out.scheme != "https") {
        throw Error(ErrorCode::HttpFailure, "unsupported URL scheme '" + out.scheme + "'");
    }
    const auto host_start = scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    std::string authority = url.substr(host_start, path_start == std::string::npos ? std::string::npos : path_start - host_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    out.port = out.scheme == "https" ? 443 : 80;
    if (const auto colon = authority.rfind(':'); colon != std::string::npos && authority.find(']') == std::string::npos) {
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::HttpFailure, "bad port in URL '" + url + "'");
        }
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) {
        throw Error(ErrorCode::HttpFailure, "URL lacks a host: '" + url + "'");
    }
    out.host = authority;
    return out;
}

Response NetworkTransport::send(const Request& request)
{
    const ParsedUrl url = parse_url(request.url);
    // certificates are verified against the system trust store
    httplib::Client client(url.scheme + "://" + url.host + ":" + std::to_string(url.port));
    const auto secs = request.timeout.count() / 1000;
    const auto usecs = (request.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
        if (k == "Content-Type") {
            content_type = v;
        } else {
            headers.emplace(k, v);
        }
    }
    httplib::Result res = request.method == "POST"
                              ? client.Post(url.path, headers, request.body, content_type)
                              : client.Get(url.path, headers);
    if (!res) {
        throw Error(ErrorCode::HttpFailure, request.method + " " + request.url + " failed: " + httplib::to_string(res.error()));
    }
    Response out;
    out.status = res->status;
    out.body = res->body;
    out.content_type = res->get_header_value("Content-Type");
    return out;
}

Response StubTransport::send(const Request& request)
{
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
    }
    return handler_(request);
}

std::vector<Request> StubTransport::requests() const
{
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t StubTransport::count() const
{
    std::lock_guard lock(mutex_);
    return log_.size();
}

Response RecordingTransport::send(const Request& request)
{
    Exchange ex;
    ex.request = request;
    try {
        Response r = inner_.send(request);
        ex.status = r.status;
        ex.response_body = r.body;
        log_.push_back(std::move(ex));
        return r;
    } catch (const Error& e) {
        ex.error = e.what();
        log_.push_back(std::move(ex));
        throw;
    }
}

} // namespace deptex::http
