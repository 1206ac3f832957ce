// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Websocket transport for a Session. Plain HTTP GETs on the same port serve
// the ranges manifest (/ranges.json) and, when configured, static UI files.

#pragma once

#include "session.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace hsplat {

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 8765; // 0 picks a free port
    std::filesystem::path uiDir;
    int queueDepth = 2; // frames buffered per client before dropping
};

/// "host:port" or ":port".
ServerOptions parseBindAddress(const std::string &bind);

class WebSocketServer {
  public:
    WebSocketServer(Session &session, ServerOptions options);
    ~WebSocketServer();

    /// Binds and starts serving on a background thread. Throws a runtime
    /// error when the address cannot be bound.
    void start();
    void stop();
    unsigned short port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> mImpl;
};

} // namespace hsplat
