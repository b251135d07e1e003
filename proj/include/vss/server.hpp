// Live session endpoint. One simulation per server; any number of clients
// share it. Browsers connect with a WebSocket upgrade on any path; other
// clients may speak newline-delimited JSON over plain TCP on the same port.
// Plain HTTP GETs are answered from `static_dir` when one is configured.
#pragma once

#include "vss/simulation.hpp"

#include <memory>
#include <stdexcept>
#include <string>

namespace vss {

class PortInUseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 8080; // 0 picks a free port
    double tick_hz = 50.0;
    double speed = 1.0;         // simulated seconds per wall-clock second
    std::string static_dir;
};

class SessionServer {
public:
    /// Binds and listens immediately; throws PortInUseError when the port is
    /// taken and ConfigError for an invalid configuration or tick rate.
    SessionServer(SimConfig config, ServerOptions options);
    ~SessionServer();

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    unsigned short port() const;

    /// Serves until stop(); the simulation only advances while at least one
    /// client is connected.
    void run();

    /// Safe to call from any thread.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace vss
