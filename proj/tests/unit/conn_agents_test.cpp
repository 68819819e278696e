#include <gtest/gtest.h>

#include <random>

#include "qtracker/conn/connection.hpp"
#include "qtracker/conn/stream.hpp"
#include "qtracker/protection/handshake_provider.hpp"
#include "qtracker/protection/keys.hpp"

using namespace qtracker;
using namespace qtracker::conn;
using protection::EncryptionLevel;

namespace {

struct Rig {
  std::shared_ptr<MemoryChannel> channel = std::make_shared<MemoryChannel>();
  std::unique_ptr<Connection> conn;

  explicit Rig(AgentRoster roster) {
    ConnectionConfig cfg;
    cfg.roster = roster;
    cfg.local_parameters = default_client_parameters();
    conn = std::make_unique<Connection>(
        cfg, std::make_unique<MemoryTransport>(channel, 0),
        std::make_unique<protection::NullHandshakeProvider>(protection::NullProviderConfig{}),
        nullptr);
  }

  void open_one_rtt() {
    const wire::Bytes secret(32, 0x5a);
    conn->install_key(protection::key_material_from_secret(
        EncryptionLevel::one_rtt, protection::Direction::client, secret));
    conn->set_peer_parameters(default_client_parameters());
  }
};

PacketReceived received(EncryptionLevel level, std::uint64_t pn, std::vector<wire::Frame> frames) {
  PacketReceived r;
  r.header.type = protection::packet_type_of(level);
  r.header.packet_number = pn;
  r.level = level;
  r.frames = std::move(frames);
  return r;
}

bool has_ack(const std::deque<wire::Frame>& q) {
  for (const auto& f : q) {
    if (std::holds_alternative<wire::AckFrame>(f)) return true;
  }
  return false;
}

}  // namespace

TEST(Agents, DispatchOrderIsFixed) {
  ASSERT_EQ(kDispatchOrder.size(), 9u);
  EXPECT_EQ(kDispatchOrder.front(), AgentId::parser);
  EXPECT_EQ(kDispatchOrder.back(), AgentId::socket);
  for (const auto id : kDispatchOrder) {
    EXPECT_EQ(agent_from_string(to_string(id)), id);
  }
}

TEST(Agents, AckElicitingPacketQueuesAck) {
  Rig rig(AgentRoster::of({AgentId::ack}));
  rig.conn->dispatch(received(EncryptionLevel::initial, 3, {wire::PingFrame{}}));
  ASSERT_TRUE(has_ack(rig.conn->queue(EncryptionLevel::initial)));
  const auto& ack = std::get<wire::AckFrame>(rig.conn->queue(EncryptionLevel::initial).front());
  EXPECT_EQ(ack.largest_acked, 3u);
}

TEST(Agents, AckOnlyPacketIsNotAcknowledged) {
  Rig rig(AgentRoster::of({AgentId::ack}));
  rig.conn->dispatch(received(EncryptionLevel::initial, 0, {wire::AckFrame{}}));
  EXPECT_FALSE(has_ack(rig.conn->queue(EncryptionLevel::initial)));
}

TEST(Agents, RemovingTheAckAgentSilencesAcks) {
  Rig rig(AgentRoster::all().without(AgentId::ack).without(AgentId::bundler));
  rig.conn->dispatch(received(EncryptionLevel::initial, 3, {wire::PingFrame{}}));
  EXPECT_FALSE(has_ack(rig.conn->queue(EncryptionLevel::initial)));
}

TEST(Agents, LossRequeuesRetransmittableFrames) {
  Rig rig(AgentRoster::of({AgentId::retransmission}));
  PacketSent sent;
  sent.level = EncryptionLevel::initial;
  sent.header.packet_number = 4;
  sent.frames = {wire::AckFrame{}, wire::CryptoFrame{0, wire::Bytes(5, 1)}};
  rig.conn->dispatch(sent);
  rig.conn->dispatch(LossDetected{EncryptionLevel::initial, {4}});
  const auto& q = rig.conn->queue(EncryptionLevel::initial);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<wire::CryptoFrame>(q.front()));
}

TEST(Agents, BundlerSplitsLargeStreamWrites) {
  Rig rig(AgentRoster::of({AgentId::bundler, AgentId::socket}));
  rig.open_one_rtt();
  const wire::Bytes data(2000, 0x61);
  rig.conn->send_stream(0, wire::as_span(data), true);
  rig.conn->pump();
  EXPECT_EQ(rig.channel->pending(1), 2u);
  EXPECT_TRUE(rig.conn->queue(EncryptionLevel::one_rtt).empty());
}

TEST(Agents, SendBeyondPeerLimitIsRefused) {
  Rig rig(AgentRoster::all());
  rig.open_one_rtt();
  const wire::Bytes data(70000, 0x61);
  EXPECT_THROW(rig.conn->send_stream(0, wire::as_span(data), true), std::logic_error);
}

TEST(Agents, ThrowingAgentIsRecordedNotFatal) {
  Rig rig(AgentRoster::of({AgentId::bundler}));
  rig.open_one_rtt();
  // A frame that can never fit a packet trips the bundler's invariant.
  rig.conn->queue_frame(EncryptionLevel::one_rtt, wire::NewTokenFrame{wire::Bytes(3000, 0)});
  rig.conn->dispatch(FramesQueued{EncryptionLevel::one_rtt});
  ASSERT_EQ(rig.conn->agent_failures().size(), 1u);
  EXPECT_EQ(rig.conn->agent_failures()[0].agent, AgentId::bundler);
}

TEST(StreamReassembler, InOrderDelivery) {
  StreamReassembler r;
  const auto hello = wire::to_bytes("hello");
  EXPECT_EQ(r.insert(0, wire::as_span(hello), false), 5u);
  EXPECT_FALSE(r.complete());
  EXPECT_EQ(r.insert(5, {}, true), 0u);
  EXPECT_TRUE(r.complete());
}

TEST(StreamReassembler, FinBeforeDataWaits) {
  StreamReassembler r;
  EXPECT_EQ(r.insert(17, {}, true), 0u);
  EXPECT_FALSE(r.complete());
  const auto req = wire::to_bytes("GET /index.html\r\n");
  EXPECT_EQ(r.insert(0, wire::as_span(req), false), 17u);
  EXPECT_TRUE(r.complete());
}

TEST(StreamReassembler, AnyPermutationOfSegmentsReassembles) {
  std::mt19937_64 rng(77);
  for (int iter = 0; iter < 500; ++iter) {
    wire::Bytes payload(1 + rng() % 400);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    struct Seg { std::uint64_t off; std::size_t len; };
    std::vector<Seg> segs;
    for (std::size_t pos = 0; pos < payload.size();) {
      const std::size_t len = std::min<std::size_t>(1 + rng() % 50, payload.size() - pos);
      segs.push_back({pos, len});
      // Overlapping duplicates now and then.
      if (rng() % 4 == 0 && pos > 0) segs.push_back({pos - 1, std::min<std::size_t>(len + 1, payload.size() - pos + 1)});
      pos += len;
    }
    std::shuffle(segs.begin(), segs.end(), rng);
    StreamReassembler r;
    std::size_t delivered = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& s = segs[i];
      const bool fin = s.off + s.len == payload.size();
      delivered += r.insert(s.off, wire::as_span(payload).subspan(s.off, s.len), fin);
    }
    ASSERT_EQ(delivered, payload.size());
    ASSERT_EQ(r.contiguous(), payload);
    ASSERT_TRUE(r.complete());
  }
}
