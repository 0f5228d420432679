#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "teegi/bridge.hpp"
#include "teegi/orchestrator.hpp"

using namespace teegi;
using json = nlohmann::json;

namespace {

// Minimal blocking line client for the bridge.
class LineClient {
 public:
  explicit LineClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    connected_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&a), sizeof(a)) == 0;
  }
  ~LineClient() { ::close(fd_); }

  bool connected() const { return connected_; }

  void send_line(const std::string& s) {
    const std::string l = s + "\n";
    ASSERT_EQ(::send(fd_, l.data(), l.size(), MSG_NOSIGNAL), static_cast<ssize_t>(l.size()));
  }

  std::optional<std::string> read_line(int timeout_ms = 2000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        auto line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
      char tmp[8192];
      const auto n = ::recv(fd_, tmp, sizeof(tmp), 0);
      if (n <= 0) return std::nullopt;
      buf_.append(tmp, static_cast<std::size_t>(n));
    }
  }

  // Next line with the given "type", skipping others.
  std::optional<json> next_of_type(const std::string& type, int timeout_ms = 3000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
      auto l = read_line(100);
      if (!l) continue;
      auto j = json::parse(*l);
      if (j["type"] == type) return j;
    }
    return std::nullopt;
  }

 private:
  int fd_{-1};
  bool connected_{false};
  std::string buf_;
};

template <typename Pred>
bool wait_for(Pred p, int timeout_ms = 2000) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    if (p()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return p();
}

std::string reason_of(std::string_view line) {
  auto r = parse_command(line);
  if (auto* s = std::get_if<std::string>(&r)) return *s;
  return "";
}

RunConfig bridged_config(double duration) {
  auto cfg = load_run_config(oracle::config_path("acceptance.json"));
  cfg.offline = false;
  cfg.duration = duration;
  cfg.ui_endpoint = net::Endpoint{"127.0.0.1", 0};
  return cfg;
}

}  // namespace

TEST(Command, ParsesValidCommands) {
  auto r = parse_command(R"({"type":"set_mode","mode":"puppet"})");
  ASSERT_EQ(r.index(), 0u);
  EXPECT_EQ(std::get<SetModeCommand>(std::get<0>(r)).mode, Mode::Puppet);
  r = parse_command(R"({"type":"puppet_action","action":"move_right_hand","extra":1})");
  ASSERT_EQ(r.index(), 0u);
  EXPECT_EQ(std::get<PuppetActionCommand>(std::get<0>(r)).action, PuppetAction::MoveRightHand);
  for (auto a : {"move_left_hand", "move_right_hand", "move_feet", "close_eyes", "open_eyes", "release"}) {
    EXPECT_EQ(reason_of(std::string(R"({"type":"puppet_action","action":")") + a + "\"}"), "") << a;
  }
}

TEST(Command, RejectionReasons) {
  EXPECT_EQ(reason_of("{oops"), "malformed-json");
  EXPECT_EQ(reason_of(""), "malformed-json");
  EXPECT_EQ(reason_of("[1,2]"), "missing-type");
  EXPECT_EQ(reason_of(R"({"mode":"puppet"})"), "missing-type");
  EXPECT_EQ(reason_of(R"({"type":7})"), "missing-type");
  EXPECT_EQ(reason_of(R"({"type":"set_mode"})"), "missing-mode");
  EXPECT_EQ(reason_of(R"({"type":"set_mode","mode":"sleep"})"), "unknown-mode");
  EXPECT_EQ(reason_of(R"({"type":"puppet_action"})"), "missing-action");
  EXPECT_EQ(reason_of(R"({"type":"puppet_action","action":"wave"})"), "unknown-action");
  EXPECT_EQ(reason_of(R"({"type":"dance"})"), "unknown-type");
}

TEST(Command, ErrorMessageShape) {
  const auto j = json::parse(error_message("invalid-state"));
  EXPECT_EQ(j["type"], "error");
  EXPECT_EQ(j["reason"], "invalid-state");
}

TEST(StateMessage, FieldsAndLedPayload) {
  Avatar a(oracle::montage32(), generate_lattice(402), {}, Mode::Puppet);
  a.apply_puppet_action(PuppetAction::MoveLeftHand);
  a.apply_puppet_action(PuppetAction::CloseEyes);
  a.step(nullptr, nullptr);
  const auto j = json::parse(state_message(a.state(), 77));
  EXPECT_EQ(j["type"], "state");
  EXPECT_EQ(j["seq"], 77);
  EXPECT_EQ(j["mode"], "puppet");
  EXPECT_EQ(j["mental"], "rest");
  EXPECT_EQ(j["eyes"], "closed");
  ASSERT_EQ(j["servos"].size(), 4u);
  EXPECT_NEAR(j["servos"][0].get<double>(), 6.7, 1e-9);
  EXPECT_EQ(j["servos"][1].get<double>(), 0.0);
  const auto leds = base64_decode(j["leds"].get<std::string>());
  ASSERT_TRUE(leds);
  ASSERT_EQ(leds->size(), 402u * 3u);
  for (std::size_t i = 0; i < 402; ++i) {
    const auto& c = a.state().led_field.colors[i];
    EXPECT_EQ((*leds)[3 * i], c.r);
    EXPECT_EQ((*leds)[3 * i + 1], c.g);
    EXPECT_EQ((*leds)[3 * i + 2], c.b);
  }
}

TEST(Base64, RoundTripAndRejects) {
  std::mt19937_64 rng(41);
  for (std::size_t n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    const auto enc = base64_encode(v);
    EXPECT_EQ(enc.size(), (n + 2) / 3 * 4);
    EXPECT_EQ(base64_decode(enc), v);
  }
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'M', 'a'}), "TWE=");
  EXPECT_FALSE(base64_decode("TWE"));
  EXPECT_FALSE(base64_decode("T!E="));
}

TEST(UiBridge, QueuesCommandsAndRepliesToErrors) {
  UiBridge bridge(net::Endpoint{"127.0.0.1", 0});
  ASSERT_NE(bridge.port(), 0);
  LineClient c(bridge.port());
  ASSERT_TRUE(c.connected());
  ASSERT_TRUE(wait_for([&] { return bridge.client_count() == 1; }));

  c.send_line("this is not json");
  auto err = c.next_of_type("error");
  ASSERT_TRUE(err);
  EXPECT_EQ((*err)["reason"], "malformed-json");

  // The connection survives the bad line.
  c.send_line(R"({"type":"set_mode","mode":"puppet"})");
  std::vector<BridgeCommand> cmds;
  ASSERT_TRUE(wait_for([&] {
    for (auto& x : bridge.drain_commands()) cmds.push_back(std::move(x));
    return !cmds.empty();
  }));
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(std::get<SetModeCommand>(cmds[0].body).mode, Mode::Puppet);
  EXPECT_EQ(bridge.client_count(), 1u);

  bridge.reply(cmds[0].client, error_message("invalid-state"));
  err = c.next_of_type("error");
  ASSERT_TRUE(err);
  EXPECT_EQ((*err)["reason"], "invalid-state");
}

TEST(UiBridge, BroadcastReachesEveryClient) {
  UiBridge bridge(net::Endpoint{"127.0.0.1", 0});
  LineClient a(bridge.port()), b(bridge.port());
  ASSERT_TRUE(wait_for([&] { return bridge.client_count() == 2; }));
  bridge.broadcast(R"({"type":"state","seq":5})");
  const auto ja = a.next_of_type("state");
  const auto jb = b.next_of_type("state");
  ASSERT_TRUE(ja && jb);
  EXPECT_EQ((*ja)["seq"], 5);
  EXPECT_EQ((*jb)["seq"], 5);
}

TEST(UiBridge, DisconnectIsHarmless) {
  UiBridge bridge(net::Endpoint{"127.0.0.1", 0});
  {
    LineClient c(bridge.port());
    ASSERT_TRUE(wait_for([&] { return bridge.client_count() == 1; }));
  }
  ASSERT_TRUE(wait_for([&] { return bridge.client_count() == 0; }));
  bridge.broadcast(R"({"type":"state","seq":1})");
  LineClient d(bridge.port());
  ASSERT_TRUE(wait_for([&] { return bridge.client_count() == 1; }));
  bridge.broadcast(R"({"type":"state","seq":2})");
  const auto j = d.next_of_type("state");
  ASSERT_TRUE(j);
  EXPECT_GE((*j)["seq"].get<int>(), 1);
}

TEST(UiBridge, LiveRunPuppetControl) {
  Orchestrator orch(bridged_config(4.0));
  const auto port = orch.ui_port();
  ASSERT_TRUE(port);
  std::thread runner([&] { orch.run(); });

  LineClient a(*port), b(*port);
  ASSERT_TRUE(a.connected() && b.connected());

  // Both clients observe the same tick stream.
  auto sa = a.next_of_type("state");
  ASSERT_TRUE(sa);
  EXPECT_EQ((*sa)["mode"], "avatar");
  std::optional<json> sb;
  for (int i = 0; i < 200; ++i) {
    sb = b.next_of_type("state");
    if (!sb || (*sb)["seq"] >= (*sa)["seq"]) break;
  }
  ASSERT_TRUE(sb);
  for (int i = 0; i < 200 && (*sa)["seq"] < (*sb)["seq"]; ++i) sa = a.next_of_type("state");
  EXPECT_EQ((*sa)["seq"], (*sb)["seq"]);

  // A puppet action outside puppet mode is refused.
  a.send_line(R"({"type":"puppet_action","action":"move_left_hand"})");
  const auto err = a.next_of_type("error");
  ASSERT_TRUE(err);
  EXPECT_EQ((*err)["reason"], "invalid-state");

  a.send_line(R"({"type":"set_mode","mode":"puppet"})");
  a.send_line(R"({"type":"puppet_action","action":"move_left_hand"})");
  double left = 0.0;
  bool puppet = false;
  for (int i = 0; i < 60 && left <= 0.0; ++i) {
    auto s = a.next_of_type("state");
    ASSERT_TRUE(s);
    if ((*s)["mode"] == "puppet") {
      puppet = true;
      left = (*s)["servos"][0].get<double>();
      EXPECT_EQ((*s)["servos"][1].get<double>(), 0.0);
    }
  }
  EXPECT_TRUE(puppet);
  EXPECT_GT(left, 0.0);
  orch.request_stop();
  runner.join();
}
