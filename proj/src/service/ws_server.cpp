// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#include "ws_server.hpp"

#include "error.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace hsplat {

namespace beast     = boost::beast;
namespace http      = beast::http;
namespace websocket = beast::websocket;
namespace net       = boost::asio;
using tcp           = net::ip::tcp;

ServerOptions
parseBindAddress(const std::string &bind) {
    ServerOptions o;
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos)
        throw Error(ErrorKind::kUsage, "bind address must be host:port");
    if (colon > 0)
        o.host = bind.substr(0, colon);
    try {
        const int port = std::stoi(bind.substr(colon + 1));
        if (port < 0 || port > 65535)
            throw std::out_of_range("port");
        o.port = static_cast<unsigned short>(port);
    } catch (const std::exception &) {
        throw Error(ErrorKind::kUsage, "invalid port in bind address '" + bind + "'");
    }
    return o;
}

namespace {

class WsConnection : public FrameSink, public std::enable_shared_from_this<WsConnection> {
  public:
    WsConnection(tcp::socket &&socket, Session &session, int queueDepth)
        : mWs(std::move(socket)), mSession(session), mDepth(queueDepth) {}

    void
    run(http::request<http::string_body> req) {
        mWs.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        mWs.async_accept(req, beast::bind_front_handler(&WsConnection::onAccept, shared_from_this()));
    }

    bool
    offerFrame(const FrameBytes &frame) override {
        {
            std::lock_guard lock(mMutex);
            if (mClosed || mFramesQueued >= mDepth)
                return false;
            mQueue.push_back({false, {}, frame});
            ++mFramesQueued;
        }
        net::post(mWs.get_executor(), [self = shared_from_this()] { self->pump(); });
        return true;
    }

  private:
    struct Outgoing {
        bool text;
        std::string body;
        FrameBytes frame;
    };

    void
    onAccept(beast::error_code ec) {
        if (ec)
            return;
        mSession.attach(shared_from_this());
        read();
    }

    void
    read() {
        mWs.async_read(mBuffer, beast::bind_front_handler(&WsConnection::onRead, shared_from_this()));
    }

    void
    onRead(beast::error_code ec, std::size_t) {
        if (ec) {
            close();
            return;
        }
        std::string reply;
        if (mWs.got_text())
            reply = mSession.handleMessage(beast::buffers_to_string(mBuffer.data()));
        else
            reply = R"({"type":"error","message":"binary messages are not accepted"})";
        mBuffer.consume(mBuffer.size());
        {
            std::lock_guard lock(mMutex);
            mQueue.push_back({true, std::move(reply), nullptr});
        }
        pump();
        read();
    }

    // Runs on the connection's strand.
    void
    pump() {
        Outgoing next;
        {
            std::lock_guard lock(mMutex);
            if (mWriting || mQueue.empty() || mClosed)
                return;
            next = std::move(mQueue.front());
            mQueue.pop_front();
            mWriting = true;
        }
        mCurrent = std::move(next);
        mWs.text(mCurrent.text);
        const net::const_buffer buffer =
            mCurrent.text ? net::const_buffer(mCurrent.body.data(), mCurrent.body.size())
                          : net::const_buffer(mCurrent.frame->data(), mCurrent.frame->size());
        mWs.async_write(buffer, beast::bind_front_handler(&WsConnection::onWrite, shared_from_this()));
    }

    void
    onWrite(beast::error_code ec, std::size_t) {
        {
            std::lock_guard lock(mMutex);
            mWriting = false;
            if (!mCurrent.text)
                --mFramesQueued;
        }
        mCurrent = {};
        if (ec) {
            close();
            return;
        }
        pump();
    }

    void
    close() {
        {
            std::lock_guard lock(mMutex);
            if (mClosed)
                return;
            mClosed = true;
            mQueue.clear();
        }
        mSession.detach(this);
    }

    websocket::stream<beast::tcp_stream> mWs;
    Session &mSession;
    int mDepth;
    beast::flat_buffer mBuffer;
    std::mutex mMutex;
    std::deque<Outgoing> mQueue;
    Outgoing mCurrent;
    int mFramesQueued = 0;
    bool mWriting     = false;
    bool mClosed      = false;
};

std::string
contentType(const std::filesystem::path &p) {
    const std::string ext = p.extension().string();
    if (ext == ".html")
        return "text/html";
    if (ext == ".js" || ext == ".mjs")
        return "application/javascript";
    if (ext == ".css")
        return "text/css";
    if (ext == ".json")
        return "application/json";
    if (ext == ".png")
        return "image/png";
    if (ext == ".svg")
        return "image/svg+xml";
    return "application/octet-stream";
}

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
  public:
    HttpConnection(tcp::socket &&socket, Session &session, const ServerOptions &options)
        : mStream(std::move(socket)), mSession(session), mOptions(options) {}

    void
    run() {
        mStream.expires_after(std::chrono::seconds(30));
        http::async_read(mStream, mBuffer, mRequest,
                         beast::bind_front_handler(&HttpConnection::onRead, shared_from_this()));
    }

  private:
    void
    onRead(beast::error_code ec, std::size_t) {
        if (ec)
            return;
        if (websocket::is_upgrade(mRequest)) {
            mStream.expires_never();
            std::make_shared<WsConnection>(mStream.release_socket(), mSession, mOptions.queueDepth)
                ->run(std::move(mRequest));
            return;
        }
        respond();
    }

    void
    respond() {
        auto res = std::make_shared<http::response<http::string_body>>();
        res->version(mRequest.version());
        res->keep_alive(false);
        std::string target(mRequest.target());
        if (const auto q = target.find('?'); q != std::string::npos)
            target.resize(q);

        if (mRequest.method() != http::verb::get) {
            res->result(http::status::method_not_allowed);
        } else if (target == "/ranges.json") {
            res->result(http::status::ok);
            res->set(http::field::content_type, "application/json");
            res->body() = mSession.ranges().dump();
        } else if (!mOptions.uiDir.empty() && target.find("..") == std::string::npos) {
            std::filesystem::path file =
                mOptions.uiDir / (target == "/" ? "index.html" : target.substr(1));
            std::ifstream in(file, std::ios::binary);
            if (in) {
                std::ostringstream ss;
                ss << in.rdbuf();
                res->result(http::status::ok);
                res->set(http::field::content_type, contentType(file));
                res->body() = ss.str();
            } else {
                res->result(http::status::not_found);
            }
        } else {
            res->result(http::status::not_found);
        }
        res->prepare_payload();
        http::async_write(mStream, *res,
                          [self = shared_from_this(), res](beast::error_code, std::size_t) {
                              beast::error_code ignored;
                              self->mStream.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          });
    }

    beast::tcp_stream mStream;
    Session &mSession;
    const ServerOptions &mOptions;
    beast::flat_buffer mBuffer;
    http::request<http::string_body> mRequest;
};

} // namespace

struct WebSocketServer::Impl {
    Session &session;
    ServerOptions options;
    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    std::thread thread;

    Impl(Session &s, ServerOptions o) : session(s), options(std::move(o)) {}

    void
    accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec)
                return;
            std::make_shared<HttpConnection>(std::move(socket), session, options)->run();
            accept();
        });
    }
};

WebSocketServer::WebSocketServer(Session &session, ServerOptions options)
    : mImpl(std::make_unique<Impl>(session, std::move(options))) {
    HS_CHECK_INPUT(mImpl->options.queueDepth > 0, "server: queue depth must be positive");
}

WebSocketServer::~WebSocketServer() {
    stop();
}

void
WebSocketServer::start() {
    beast::error_code ec;
    const auto address = net::ip::make_address(mImpl->options.host, ec);
    if (ec)
        throwRuntime("bind: invalid host '" + mImpl->options.host + "'");
    const tcp::endpoint endpoint(address, mImpl->options.port);
    auto &acc = mImpl->acceptor;
    acc.open(endpoint.protocol(), ec);
    if (!ec)
        acc.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec)
        acc.bind(endpoint, ec);
    if (!ec)
        acc.listen(net::socket_base::max_listen_connections, ec);
    if (ec)
        throwRuntime("bind " + mImpl->options.host + ":" + std::to_string(mImpl->options.port) +
                     " failed: " + ec.message());
    mImpl->accept();
    mImpl->thread = std::thread([impl = mImpl.get()] { impl->ioc.run(); });
}

void
WebSocketServer::stop() {
    if (!mImpl)
        return;
    mImpl->ioc.stop();
    if (mImpl->thread.joinable())
        mImpl->thread.join();
}

unsigned short
WebSocketServer::port() const {
    beast::error_code ec;
    const auto ep = mImpl->acceptor.local_endpoint(ec);
    return ec ? 0 : ep.port();
}

} // namespace hsplat
