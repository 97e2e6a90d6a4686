#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "deptex/http.hpp"
#include "deptex/policy.hpp"

namespace deptex::dispatch {

using json = nlohmann::json;

struct ChannelDef {
    std::string channel_id;
    std::string kind = "webhook";
    std::string endpoint;
    std::optional<std::string> secret;
    std::string description;

    bool operator==(const ChannelDef&) const = default;
};

ChannelDef channel_from_json(const json& doc);
/// Secrets are never echoed back; `has_secret` says whether one is set.
json channel_to_json(const ChannelDef& c, bool include_secret = false);

/// Hex HMAC-SHA256 of `body` keyed by `secret`.
std::string hmac_sha256_hex(const std::string& secret, const std::string& body);

struct Delivery {
    std::string channel_id;
    json payload;
};

struct DeliveryReport {
    std::string channel_id;
    std::string endpoint;
    std::string status;  // "delivered" or "failed"
    int attempts = 0;
    int http_status = 0;
    std::string error;
};

json to_json(const DeliveryReport& r);

struct RetryPolicy {
    int retries = 3;
    std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(2),
                                                   std::chrono::seconds(4)};
};

/// Posts one request per delivery, retrying failures. Never throws for
/// delivery problems; they end up in the report.
class Dispatcher {
public:
    Dispatcher(http::Transport& transport, RetryPolicy retry = {});
    ~Dispatcher();

    Dispatcher(const Dispatcher&) = delete;
    Dispatcher& operator=(const Dispatcher&) = delete;

    DeliveryReport deliver(const ChannelDef& channel, const json& payload);
    std::vector<DeliveryReport> deliver_all(const std::map<std::string, ChannelDef>& channels,
                                            const std::vector<Delivery>& batch);

    /// Queues deliveries for the background worker and returns immediately.
    void enqueue(std::vector<std::pair<ChannelDef, json>> batch);
    /// Blocks until the queue is empty and the worker is idle.
    void drain();

    [[nodiscard]] std::vector<DeliveryReport> history() const;

private:
    void worker();

    http::Transport& transport_;
    RetryPolicy retry_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<std::pair<ChannelDef, json>> queue_;
    std::vector<DeliveryReport> history_;
    bool busy_ = false;
    bool stop_ = false;
    std::thread thread_;
};

} // namespace deptex::dispatch
