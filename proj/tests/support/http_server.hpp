#pragma once

// httplib server running on an ephemeral loopback port for the lifetime of
// the object.

#include <functional>
#include <string>
#include <thread>

#include "hintgen/service.hpp"

namespace fixtures {

class LocalServer {
  public:
    explicit LocalServer(const std::function<void(httplib::Server &)> &setup) {
        setup(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    LocalServer(const LocalServer &) = delete;
    LocalServer &operator=(const LocalServer &) = delete;

    int port() const { return port_; }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace fixtures
