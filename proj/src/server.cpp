#include "vss/server.hpp"

#include "vss/errors.hpp"
#include "vss/live_session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>

namespace vss {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

// A client whose outgoing queue grows past this is not keeping up.
constexpr std::size_t kMaxQueuedFrames = 4096;

class Client;

class Hub {
public:
    virtual ~Hub() = default;
    virtual void on_open(const std::shared_ptr<Client>& client) = 0;
    virtual void on_message(const std::shared_ptr<Client>& client, const std::string& text) = 0;
    virtual void on_close(const std::shared_ptr<Client>& client) = 0;
};

class Client : public std::enable_shared_from_this<Client> {
public:
    explicit Client(Hub& hub) : hub_(hub) {}
    virtual ~Client() = default;

    void send(std::string frame) {
        if (closed_) {
            return;
        }
        if (queue_.size() >= kMaxQueuedFrames) {
            spdlog::warn("dropping a client that stopped reading");
            shutdown();
            return;
        }
        queue_.push_back(std::move(frame));
        if (queue_.size() == 1) {
            write_front();
        }
    }

    virtual void shutdown() = 0;

protected:
    virtual void write_front() = 0;

    void finished_write(beast::error_code ec) {
        if (ec) {
            fail();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty()) {
            write_front();
        }
    }

    void fail() {
        if (!closed_) {
            closed_ = true;
            hub_.on_close(shared_from_this());
        }
    }

    Hub& hub_;
    std::deque<std::string> queue_;
    bool closed_ = false;
};

class WebSocketClient : public Client {
public:
    WebSocketClient(Hub& hub, tcp::socket socket) : Client(hub), ws_(std::move(socket)) {}

    void start(http::request<http::string_body> request) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(request, [self = shared()](beast::error_code ec) {
            if (ec) {
                return;
            }
            self->hub_.on_open(self);
            self->read();
        });
    }

    void shutdown() override {
        ws_.async_close(websocket::close_code::normal, [self = shared()](beast::error_code) {});
        fail();
    }

private:
    std::shared_ptr<WebSocketClient> shared() {
        return std::static_pointer_cast<WebSocketClient>(shared_from_this());
    }

    void read() {
        ws_.async_read(buffer_, [self = shared()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->fail();
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->hub_.on_message(self, text);
            self->read();
        });
    }

    void write_front() override {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()),
                        [self = shared()](beast::error_code ec, std::size_t) {
                            self->finished_write(ec);
                        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
};

class LineClient : public Client {
public:
    LineClient(Hub& hub, tcp::socket socket, std::string pending)
        : Client(hub), socket_(std::move(socket)), input_(std::move(pending)) {}

    void start() {
        hub_.on_open(shared_from_this());
        read();
    }

    void shutdown() override {
        beast::error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
        fail();
    }

private:
    std::shared_ptr<LineClient> shared() {
        return std::static_pointer_cast<LineClient>(shared_from_this());
    }

    void read() {
        net::async_read_until(socket_, net::dynamic_buffer(input_), '\n',
                              [self = shared()](beast::error_code ec, std::size_t n) {
                                  if (ec) {
                                      self->fail();
                                      return;
                                  }
                                  std::string line = self->input_.substr(0, n - 1);
                                  self->input_.erase(0, n);
                                  if (!line.empty() && line.back() == '\r') {
                                      line.pop_back();
                                  }
                                  if (!line.empty()) {
                                      self->hub_.on_message(self, line);
                                  }
                                  self->read();
                              });
    }

    void write_front() override {
        if (queue_.front().empty() || queue_.front().back() != '\n') {
            queue_.front() += '\n';
        }
        net::async_write(socket_, net::buffer(queue_.front()),
                         [self = shared()](beast::error_code ec, std::size_t) {
                             self->finished_write(ec);
                         });
    }

    tcp::socket socket_;
    std::string input_;
};

std::string content_type(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".html") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

// Reads the first bytes of a connection and hands it to the matching protocol.
class Sniffer : public std::enable_shared_from_this<Sniffer> {
public:
    Sniffer(Hub& hub, tcp::socket socket, std::string static_dir)
        : hub_(hub),
          stream_(std::move(socket)),
          timer_(stream_.get_executor()),
          static_dir_(std::move(static_dir)) {}

    void start() {
        // Line clients may wait for the server to speak first.
        timer_.expires_after(kSniffTimeout);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (!ec) {
                beast::error_code ignored;
                self->stream_.socket().cancel(ignored);
            }
        });
        read_more();
    }

private:
    static constexpr std::chrono::milliseconds kSniffTimeout{200};

    void read_more() {
        stream_.async_read_some(buffer_.prepare(512),
                                [self = shared_from_this()](beast::error_code ec, std::size_t n) {
                                    if (ec == net::error::operation_aborted && n == 0 &&
                                        self->buffer_.size() == 0) {
                                        self->dispatch();
                                        return;
                                    }
                                    if (ec) {
                                        self->timer_.cancel();
                                        return;
                                    }
                                    self->buffer_.commit(n);
                                    self->timer_.cancel();
                                    self->dispatch();
                                });
    }

    void dispatch() {
        const std::string head = beast::buffers_to_string(buffer_.data());
        constexpr std::string_view get = "GET ";
        const std::size_t n = std::min(head.size(), get.size());
        if (!head.empty() && head.compare(0, n, get.substr(0, n)) == 0) {
            if (head.size() < get.size()) {
                read_more();
                return;
            }
            read_http();
            return;
        }
        auto client = std::make_shared<LineClient>(hub_, stream_.release_socket(), head);
        client->start();
    }

    void read_http() {
        http::async_read(stream_, buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) {
                             if (ec) {
                                 return;
                             }
                             self->route();
                         });
    }

    void route() {
        if (websocket::is_upgrade(request_)) {
            auto client = std::make_shared<WebSocketClient>(hub_, stream_.release_socket());
            client->start(std::move(request_));
            return;
        }
        auto response = std::make_shared<http::response<http::string_body>>();
        response->version(request_.version());
        response->keep_alive(false);
        if (!serve_file(*response)) {
            response->result(http::status::not_found);
            response->set(http::field::content_type, "text/plain");
            response->body() = "vss-sim session endpoint: open a WebSocket here, or send "
                               "newline-delimited JSON over plain TCP\n";
        }
        response->prepare_payload();
        http::async_write(stream_, *response,
                          [self = shared_from_this(), response](beast::error_code, std::size_t) {
                              beast::error_code ignored;
                              self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          });
    }

    bool serve_file(http::response<http::string_body>& response) {
        if (static_dir_.empty()) {
            return false;
        }
        std::string target(request_.target());
        target = target.substr(0, target.find('?'));
        if (target.find("..") != std::string::npos) {
            return false;
        }
        if (target.empty() || target.back() == '/') {
            target += "index.html";
        }
        const std::filesystem::path path = std::filesystem::path(static_dir_) / target.substr(1);
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            return false;
        }
        std::ostringstream body;
        body << in.rdbuf();
        response.result(http::status::ok);
        response.set(http::field::content_type, content_type(path));
        response.body() = body.str();
        return true;
    }

    Hub& hub_;
    beast::tcp_stream stream_;
    net::steady_timer timer_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    std::string static_dir_;
};

} // namespace

struct SessionServer::Impl : Hub {
    Impl(SimConfig config, ServerOptions opts)
        : options(std::move(opts)),
          session(std::move(config), options.tick_hz),
          acceptor(ioc),
          timer(ioc) {
        if (!(options.speed > 0.0)) {
            throw ConfigError("speed", "must be positive");
        }
        beast::error_code ec;
        const auto address = net::ip::make_address(options.host, ec);
        if (ec) {
            throw ConfigError("host", ec.message());
        }
        const tcp::endpoint endpoint(address, options.port);
        acceptor.open(endpoint.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(endpoint, ec);
        if (ec == net::error::address_in_use || ec == net::error::access_denied) {
            throw PortInUseError(fmt::format("cannot bind {}:{}: {}", options.host, options.port,
                                             ec.message()));
        }
        if (ec) {
            throw std::runtime_error(fmt::format("bind failed: {}", ec.message()));
        }
        acceptor.listen(net::socket_base::max_listen_connections);
        period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / (options.tick_hz * options.speed)));
    }

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                return;
            }
            std::make_shared<Sniffer>(*this, std::move(socket), options.static_dir)->start();
            accept();
        });
    }

    void schedule_tick() {
        timer.expires_at(next_tick);
        timer.async_wait([this](beast::error_code ec) {
            if (ec) {
                return;
            }
            next_tick += period;
            // Do not try to catch up after a long stall.
            const auto now = std::chrono::steady_clock::now();
            if (next_tick < now) {
                next_tick = now + period;
            }
            tick();
            schedule_tick();
        });
    }

    void tick() {
        if (clients.empty()) {
            return;
        }
        TickResult result;
        try {
            result = session.tick();
        } catch (const std::exception& e) {
            spdlog::error("simulation stopped: {}", e.what());
            broadcast(error_frame(fmt::format("simulation stopped: {}", e.what())).dump());
            return;
        }
        for (const auto& ack : result.acks) {
            broadcast(ack.dump());
        }
        for (const auto& message : result.errors) {
            broadcast(error_frame(message).dump());
        }
        for (const auto& event : result.events) {
            broadcast(event_frame(event).dump());
        }
        broadcast(state_frame(result.state).dump());
    }

    void broadcast(const std::string& frame) {
        // send() may drop a client and modify the set.
        const auto targets = clients;
        for (const auto& c : targets) {
            c->send(frame);
        }
    }

    void on_open(const std::shared_ptr<Client>& client) override {
        clients.insert(client);
        spdlog::info("client connected ({} total)", clients.size());
        client->send(geometry_frame(session.base_config(), session.tick_hz()).dump());
        client->send(state_frame(session.simulator().sample()).dump());
    }

    void on_message(const std::shared_ptr<Client>& client, const std::string& text) override {
        try {
            session.submit(parse_session_command(text));
        } catch (const ProtocolError& e) {
            client->send(error_frame(e.what()).dump());
        }
    }

    void on_close(const std::shared_ptr<Client>& client) override {
        if (clients.erase(client) != 0) {
            spdlog::info("client disconnected ({} left)", clients.size());
        }
    }

    ServerOptions options;
    LiveSession session;
    net::io_context ioc{1};
    tcp::acceptor acceptor;
    net::steady_timer timer;
    std::chrono::steady_clock::duration period{};
    std::chrono::steady_clock::time_point next_tick{};
    std::set<std::shared_ptr<Client>> clients;
};

SessionServer::SessionServer(SimConfig config, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {}

SessionServer::~SessionServer() = default;

unsigned short SessionServer::port() const {
    return impl_->acceptor.local_endpoint().port();
}

void SessionServer::run() {
    impl_->accept();
    impl_->next_tick = std::chrono::steady_clock::now() + impl_->period;
    impl_->schedule_tick();
    spdlog::info("serving on {}:{} at {} Hz", impl_->options.host, port(), impl_->options.tick_hz);
    impl_->ioc.run();
    impl_->clients.clear();
}

void SessionServer::stop() {
    net::post(impl_->ioc, [impl = impl_.get()] {
        beast::error_code ignored;
        impl->acceptor.close(ignored);
        impl->timer.cancel();
        impl->ioc.stop();
    });
}

} // namespace vss
