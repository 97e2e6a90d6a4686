#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "deptex/store.hpp"

namespace deptex::service {

struct ServerOptions {
    std::optional<std::string> token;          // bearer token; none disables auth
    std::optional<std::filesystem::path> ui_dir;  // static bundle served at /
};

/// REST front end over a Store.
class Server {
public:
    Server(Store& store, ServerOptions options);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Blocks until stop() is called.
    void listen(const std::string& host, int port);
    /// Binds to an ephemeral port, serves on a background thread and returns the port.
    int start(const std::string& host = "127.0.0.1");
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace deptex::service
