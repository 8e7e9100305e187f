#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "contactplan/service.hpp"

using namespace contactplan;
using nlohmann::json;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using clock_type = std::chrono::steady_clock;

namespace {

const std::filesystem::path kFixtures = CONTACTPLAN_FIXTURE_DIR;

Scenario fixture(const std::string& name, const std::vector<std::string>& overrides = {}) {
  json doc = load_json_file(kFixtures / name);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_scenario(doc, kFixtures);
}

class Client {
 public:
  explicit Client(unsigned short port) : ws_(io_) {
    ws_.next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    ws_.handshake("127.0.0.1", "/");
  }
  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  void send(const json& doc) {
    ws_.text(true);
    ws_.write(net::buffer(doc.dump()));
  }
  void send_raw(const std::string& text) { ws_.write(net::buffer(text)); }
  void close() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

 private:
  net::io_context io_;
  websocket::stream<tcp::socket> ws_;
};

struct Running {
  explicit Running(Scenario sc, ServeOptions opt = {}) : service(std::move(sc), fix(opt)) {
    thread = std::thread([this] { service.run(stop); });
  }
  ~Running() {
    stop = true;
    thread.join();
  }
  static ServeOptions fix(ServeOptions o) {
    o.port = 0;
    return o;
  }
  std::atomic<bool> stop{false};
  Service service;
  std::thread thread;
};

}  // namespace

TEST_CASE("two clients see the same telemetry and a push round trip") {
  Running srv(fixture("contact_free.json", {"duration=30"}));
  Client a(srv.service.port());
  Client b(srv.service.port());
  const json hello_a = a.read();
  const json hello_b = b.read();
  CHECK(hello_a["kind"] == "hello");
  CHECK(hello_b["kind"] == "hello");
  CHECK(hello_a["protocol_version"] == kProtocolVersion);
  CHECK(hello_a["payload"]["dof"] == 7);

  // Let the loop run a little, then push through client a.
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  a.send({{"kind", "apply_push"},
          {"protocol_version", kProtocolVersion},
          {"id", "push-1"},
          {"payload", {{"link", 4}, {"s", 0.5}, {"force", {0, 15, 0}}, {"duration", 0.5}}}});
  const auto sent = clock_type::now();

  std::map<std::uint64_t, std::string> seen_a, seen_b;
  double t_detect = -1, t_estimate = -1, t_update = -1;
  bool acked = false;
  while (clock_type::now() - sent < std::chrono::milliseconds(1500)) {
    const json m = a.read();
    const double since = std::chrono::duration<double>(clock_type::now() - sent).count();
    if (m["kind"] == "ack") {
      CHECK(m["id"] == "push-1");
      acked = true;
      continue;
    }
    seen_a[m["seq"].get<std::uint64_t>()] = m.dump();
    if (m["kind"] == "detection" && m["payload"]["contact"] == true && t_detect < 0) t_detect = since;
    if (m["kind"] == "estimate" && t_estimate < 0) t_estimate = since;
    if (m["kind"] == "path_update" && t_update < 0) t_update = since;
  }
  CHECK(acked);
  CHECK(t_detect >= 0);
  CHECK(t_detect <= 1.0);
  CHECK(t_estimate >= 0);
  CHECK(t_estimate <= 1.0);
  CHECK(t_update >= 0);
  CHECK(t_update <= 1.0);

  // Client b gets byte-identical telemetry for every sequence number.
  while (seen_b.empty() || seen_b.rbegin()->first < seen_a.rbegin()->first) {
    const json m = b.read();
    if (m.contains("seq")) seen_b[m["seq"].get<std::uint64_t>()] = m.dump();
  }
  int compared = 0;
  for (const auto& [seq, text] : seen_a) {
    const auto it = seen_b.find(seq);
    REQUIRE(it != seen_b.end());
    CHECK(it->second == text);
    ++compared;
  }
  CHECK(compared > 50);
  a.close();
  b.close();
}

TEST_CASE("malformed message gets an error and the connection stays up") {
  Running srv(fixture("contact_free.json", {"duration=30"}));
  Client c(srv.service.port());
  CHECK(c.read()["kind"] == "hello");
  c.send_raw("{this is not json");
  c.send({{"kind", "apply_push"}, {"payload", {{"link", 4}, {"s", 0.5}, {"force", {0, 900, 0}}, {"duration", 0.5}}}});
  c.send({{"kind", "pause"}, {"id", "p"}});
  int errors = 0;
  bool paused = false;
  const auto start = clock_type::now();
  while (!paused && clock_type::now() - start < std::chrono::seconds(3)) {
    const json m = c.read();
    if (m["kind"] == "error") {
      ++errors;
      CHECK_FALSE(m["message"].get<std::string>().empty());
    }
    if (m["kind"] == "ack" && m["command"] == "pause") paused = true;
  }
  CHECK(errors == 2);
  CHECK(paused);
  c.close();
}

TEST_CASE("a stalled client does not slow the loop") {
  ServeOptions opt;
  opt.client_queue_limit = 4;
  const auto start = clock_type::now();
  double sim_time = 0.0, wall = 0.0;
  {
    Running srv(fixture("contact_free.json", {"duration=30"}), opt);
    Client stalled(srv.service.port());  // never reads
    Client live(srv.service.port());
    CHECK(live.read()["kind"] == "hello");
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    srv.stop = true;
    srv.thread.join();
    srv.thread = std::thread([] {});
    wall = std::chrono::duration<double>(clock_type::now() - start).count();
    sim_time = srv.service.session().simulation().next_time();
  }
  // The loop keeps wall-clock pace; allow scheduler slack.
  CHECK(sim_time > wall - 0.25);
  CHECK(sim_time <= wall + 0.01);
}

TEST_CASE("server fan-out drops oldest messages for a full client") {
  TelemetryServer server("127.0.0.1", 0, 8);
  server.start();
  Client stalled(server.port());
  Client reader(server.port());
  for (int i = 0; i < 200 && server.client_count() < 2; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  REQUIRE(server.client_count() == 2);
  server.drain();

  const std::string big(64 * 1024, 'x');
  double worst = 0.0;
  std::vector<std::string> messages;
  for (int i = 0; i < 400; ++i) messages.push_back(json{{"n", i}, {"pad", big}}.dump());
  for (int i = 0; i < 400; ++i) {
    const auto t0 = clock_type::now();
    server.broadcast(std::move(messages[i]));
    worst = std::max(worst, std::chrono::duration<double>(clock_type::now() - t0).count());
  }
  // Broadcasting never waits on a socket.
  CHECK(worst < 1e-3);
  int last = -1;
  while (last < 399) {
    const json m = reader.read();
    CHECK(m["n"].get<int>() > last);
    last = m["n"].get<int>();
  }
  for (int i = 0; i < 200 && server.dropped() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  CHECK(server.dropped() > 0);
  server.stop();
}
