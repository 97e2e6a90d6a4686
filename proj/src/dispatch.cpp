#include "deptex/dispatch.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "deptex/error.hpp"
#include "deptex/log.hpp"

namespace deptex::dispatch {

ChannelDef channel_from_json(const json& doc)
{
    if (!doc.is_object()) {
        throw Error(ErrorCode::Validation, "channel must be a JSON object");
    }
    ChannelDef c;
    for (const auto& [key, value] : doc.items()) {
        auto str = [&](const char* name) {
            if (!value.is_string()) {
                throw Error(ErrorCode::Validation, std::string(name) + " must be a string");
            }
            return value.get<std::string>();
        };
        if (key == "channel_id") {
            c.channel_id = str("channel_id");
        } else if (key == "kind") {
            c.kind = str("kind");
        } else if (key == "endpoint") {
            c.endpoint = str("endpoint");
        } else if (key == "secret") {
            if (!value.is_null()) {
                c.secret = str("secret");
            }
        } else if (key == "description") {
            c.description = str("description");
        } else if (key != "has_secret") {
            throw Error(ErrorCode::InvalidField, "unknown channel field '" + key + "'");
        }
    }
    if (c.channel_id.empty()) {
        throw Error(ErrorCode::MissingField, "channel_id");
    }
    if (c.kind != "webhook") {
        throw Error(ErrorCode::Validation, "unsupported channel kind '" + c.kind + "'");
    }
    try {
        (void)http::parse_url(c.endpoint);
    } catch (const Error& e) {
        throw Error(ErrorCode::Validation, "channel endpoint: " + std::string(e.what()));
    }
    return c;
}

json channel_to_json(const ChannelDef& c, bool include_secret)
{
    json out{{"channel_id", c.channel_id},
             {"kind", c.kind},
             {"endpoint", c.endpoint},
             {"description", c.description},
             {"has_secret", c.secret.has_value()}};
    if (include_secret && c.secret) {
        out["secret"] = *c.secret;
    }
    return out;
}

std::string hmac_sha256_hex(const std::string& secret, const std::string& body)
{
    unsigned char mac[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
         reinterpret_cast<const unsigned char*>(body.data()), body.size(), mac, &len);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[mac[i] >> 4];
        out += hex[mac[i] & 0xf];
    }
    return out;
}

json to_json(const DeliveryReport& r)
{
    json out{{"channel_id", r.channel_id},
             {"endpoint", r.endpoint},
             {"status", r.status},
             {"attempts", r.attempts},
             {"http_status", r.http_status}};
    if (!r.error.empty()) {
        out["error"] = r.error;
    }
    return out;
}

Dispatcher::Dispatcher(http::Transport& transport, RetryPolicy retry)
    : transport_(transport), retry_(std::move(retry)), thread_([this] { worker(); })
{
}

Dispatcher::~Dispatcher()
{
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
}

DeliveryReport Dispatcher::deliver(const ChannelDef& channel, const json& payload)
{
    DeliveryReport report;
    report.channel_id = channel.channel_id;
    report.endpoint = channel.endpoint;

    http::Request req;
    req.method = "POST";
    req.url = channel.endpoint;
    req.body = payload.dump();
    req.headers["Content-Type"] = "application/json";
    if (channel.secret) {
        req.headers["X-Deptex-Signature"] = "sha256=" + hmac_sha256_hex(*channel.secret, req.body);
    }

    for (int attempt = 0; attempt <= retry_.retries; ++attempt) {
        if (attempt > 0 && !retry_.backoff.empty()) {
            const auto i = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), retry_.backoff.size() - 1);
            std::this_thread::sleep_for(retry_.backoff[i]);
        }
        ++report.attempts;
        try {
            const http::Response resp = transport_.send(req);
            report.http_status = resp.status;
            if (resp.status >= 200 && resp.status < 300) {
                report.status = "delivered";
                report.error.clear();
                return report;
            }
            report.error = "HTTP " + std::to_string(resp.status);
        } catch (const std::exception& e) {
            report.http_status = 0;
            report.error = e.what();
        }
    }
    report.status = "failed";
    log::warn("dispatch to channel '" + channel.channel_id + "' failed after " + std::to_string(report.attempts) +
              " attempts: " + report.error);
    return report;
}

std::vector<DeliveryReport> Dispatcher::deliver_all(const std::map<std::string, ChannelDef>& channels,
                                                    const std::vector<Delivery>& batch)
{
    for (const auto& d : batch) {
        if (!channels.contains(d.channel_id)) {
            throw Error(ErrorCode::UnknownChannel, "unknown channel '" + d.channel_id + "'");
        }
    }
    std::vector<DeliveryReport> out;
    for (const auto& d : batch) {
        out.push_back(deliver(channels.at(d.channel_id), d.payload));
    }
    std::lock_guard lock(mutex_);
    history_.insert(history_.end(), out.begin(), out.end());
    return out;
}

void Dispatcher::enqueue(std::vector<std::pair<ChannelDef, json>> batch)
{
    {
        std::lock_guard lock(mutex_);
        for (auto& item : batch) {
            queue_.push_back(std::move(item));
        }
    }
    cv_.notify_one();
}

void Dispatcher::drain()
{
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

std::vector<DeliveryReport> Dispatcher::history() const
{
    std::lock_guard lock(mutex_);
    return history_;
}

void Dispatcher::worker()
{
    std::unique_lock lock(mutex_);
    for (;;) {
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (queue_.empty()) {
            return;  // stopping
        }
        auto [channel, payload] = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
        lock.unlock();
        DeliveryReport r = deliver(channel, payload);
        lock.lock();
        history_.push_back(std::move(r));
        busy_ = false;
        if (queue_.empty()) {
            idle_cv_.notify_all();
        }
    }
}

} // namespace deptex::dispatch
