#include "vss/errors.hpp"
#include "vss/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <thread>

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace fs = std::filesystem;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

class RunningServer {
public:
    explicit RunningServer(vss::ServerOptions options = fast(), vss::SimConfig config = {})
        : server_(std::move(config), std::move(options)), thread_([this] { server_.run(); }) {}
    ~RunningServer() {
        server_.stop();
        thread_.join();
    }
    unsigned short port() const { return server_.port(); }

    static vss::ServerOptions fast() {
        vss::ServerOptions o;
        o.port = 0;
        o.speed = 4.0;
        return o;
    }

private:
    vss::SessionServer server_;
    std::thread thread_;
};

// Shared by both client kinds: next frame, and reading until a predicate holds.
class FrameClient {
public:
    virtual ~FrameClient() = default;
    virtual json next() = 0;
    virtual void send(const std::string& text) = 0;

    json until(const std::function<bool(const json&)>& pred, int max_frames = 5000) {
        for (int i = 0; i < max_frames; ++i) {
            json f = next();
            if (pred(f)) {
                return f;
            }
        }
        FAIL("frame not seen");
        return {};
    }
    json next_of(const std::string& type) {
        return until([&](const json& f) { return f["type"] == type; });
    }
};

class WsClient : public FrameClient {
public:
    explicit WsClient(unsigned short port) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/session");
    }
    json next() override {
        buffer_.consume(buffer_.size());
        ws_.read(buffer_);
        return json::parse(beast::buffers_to_string(buffer_.data()));
    }
    void send(const std::string& text) override { ws_.write(net::buffer(text)); }
    void close() { ws_.close(websocket::close_code::normal); }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buffer_;
};

class LineClient : public FrameClient {
public:
    explicit LineClient(unsigned short port) : socket_(ioc_) {
        socket_.connect({net::ip::make_address("127.0.0.1"), port});
    }
    json next() override {
        const std::size_t n = net::read_until(socket_, net::dynamic_buffer(input_), '\n');
        const std::string line = input_.substr(0, n - 1);
        input_.erase(0, n);
        return json::parse(line);
    }
    void send(const std::string& text) override { net::write(socket_, net::buffer(text + "\n")); }
    void close() { socket_.close(); }

private:
    net::io_context ioc_;
    tcp::socket socket_;
    std::string input_;
};

std::pair<int, std::string> http_get(unsigned short port, const std::string& target) {
    net::io_context ioc;
    tcp::socket socket(ioc);
    socket.connect({net::ip::make_address("127.0.0.1"), port});
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    return {res.result_int(), res.body()};
}

} // namespace

TEST_CASE("websocket clients get geometry, then a steady state stream") {
    RunningServer server;
    WsClient ws(server.port());
    const json geo = ws.next();
    CHECK(geo["type"] == "geometry");
    CHECK(geo["n_detents"] == 10);
    CHECK(geo["detent_positions"].size() == 10);
    const json first = ws.next();
    CHECK(first["type"] == "state");
    CHECK(first["t"] == 0.0);
    double last_t = 0.0;
    for (int i = 0; i < 20; ++i) {
        const json s = ws.next_of("state");
        CHECK(s["detent"] == 1);
        CHECK(s["t"].get<double>() == doctest::Approx(last_t + 0.02));
        CHECK(s["tension"].get<double>() >= 0.0);
        last_t = s["t"].get<double>();
    }
    ws.close();
}

TEST_CASE("malformed messages get an error frame and the connection stays open") {
    RunningServer server;
    WsClient ws(server.port());
    ws.send("this is not json");
    CHECK(ws.next_of("error")["message"].get<std::string>().find("malformed") != std::string::npos);
    ws.send(R"({"type":"warp"})");
    ws.next_of("error");
    ws.send(R"({"type":"pause"})");
    CHECK(ws.next_of("ack")["command"]["type"] == "pause");
    ws.send(R"({"type":"resume"})");
    ws.next_of("ack");
    CHECK(ws.next_of("state")["type"] == "state");
}

TEST_CASE("ten up clicks over line-delimited JSON walk the staircase") {
    RunningServer server;
    LineClient c(server.port());
    c.next_of("geometry");
    int detent = c.next_of("state")["detent"];
    REQUIRE(detent == 1);
    for (int target = 2; target <= 10; ++target) {
        c.send(R"({"type":"shift_up"})");
        const json adv = c.until([](const json& f) {
            return f["type"] == "event" && f["kind"] == "DETENT_ADVANCE";
        });
        CHECK(adv["detent"] == target);
    }
    const json s = c.next_of("state");
    CHECK(s["detent"] == 10);
    CHECK(s["k"].get<double>() == doctest::Approx(70.0).epsilon(0.01));
    c.send(R"({"type":"shift_up"})");
    const json refused = c.until([](const json& f) { return f["type"] == "event"; });
    CHECK(refused["kind"] == "REFUSED_CLICK");
    CHECK(refused["detent"] == 10);
}

TEST_CASE("a command is handled within two ticks") {
    RunningServer server;
    LineClient c(server.port());
    c.next_of("state");
    c.send(R"({"type":"shift_up"})");
    int states = 0;
    const json ack = c.until([&](const json& f) {
        states += f["type"] == "state";
        return f["type"] == "ack";
    });
    CHECK(ack["command"]["type"] == "shift_up");
    CHECK(states <= 2);
}

TEST_CASE("the simulation pauses while nobody is connected") {
    RunningServer server;
    double t_left = 0.0;
    {
        LineClient c(server.port());
        c.next_of("geometry");
        c.next_of("state");
        t_left = c.next_of("state")["t"];
        c.close();
    }
    // 0.5 s of wall time would be 2 s of simulated time at speed 4.
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
    LineClient again(server.port());
    again.next_of("geometry");
    const double t_back = again.next_of("state")["t"];
    CHECK(t_back - t_left < 0.2);
}

TEST_CASE("several clients share one simulation") {
    RunningServer server;
    WsClient a(server.port());
    LineClient b(server.port());
    a.next_of("geometry");
    b.next_of("geometry");
    a.send(R"({"type":"shift_up"})");
    // Both see the advance caused by a's click.
    CHECK(a.until([](const json& f) { return f["type"] == "event" && f["kind"] == "DETENT_ADVANCE"; })["detent"] == 2);
    CHECK(b.until([](const json& f) { return f["type"] == "event" && f["kind"] == "DETENT_ADVANCE"; })["detent"] == 2);
}

TEST_CASE("plain HTTP requests") {
    SUBCASE("without a static directory") {
        RunningServer server;
        const auto [status, body] = http_get(server.port(), "/");
        CHECK(status == 404);
        CHECK(body.find("WebSocket") != std::string::npos);
    }
    SUBCASE("serving a static directory") {
        const fs::path dir = fs::temp_directory_path() / "vss-static-test";
        fs::create_directories(dir);
        std::ofstream(dir / "index.html") << "<html>shifter</html>";
        auto options = RunningServer::fast();
        options.static_dir = dir.string();
        {
            RunningServer server(options);
            auto [status, body] = http_get(server.port(), "/");
            CHECK(status == 200);
            CHECK(body == "<html>shifter</html>");
            CHECK(http_get(server.port(), "/missing.js").first == 404);
            CHECK(http_get(server.port(), "/../etc/passwd").first == 404);
        }
        fs::remove_all(dir);
    }
}

TEST_CASE("binding a taken port fails with PortInUseError") {
    RunningServer server;
    auto options = RunningServer::fast();
    options.port = server.port();
    CHECK_THROWS_AS(vss::SessionServer({}, options), vss::PortInUseError);
    options.port = 0;
    options.tick_hz = 30.0;
    CHECK_THROWS_AS(vss::SessionServer({}, options), vss::ConfigError);
    options.tick_hz = 50.0;
    options.host = "not-an-address";
    CHECK_THROWS_AS(vss::SessionServer({}, options), vss::ConfigError);
}
