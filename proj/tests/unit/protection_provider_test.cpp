#include <gtest/gtest.h>

#include "qtracker/protection/handshake_provider.hpp"
#include "qtracker/wire/varint.hpp"

using namespace qtracker;
using namespace qtracker::protection;

namespace {

struct Pair {
  NullHandshakeProvider client;
  NullHandshakeProvider server;
  std::vector<KeyMaterial> client_keys;
  std::vector<KeyMaterial> server_keys;

  void drain() {
    for (auto& k : client.exported_secrets()) client_keys.push_back(k);
    for (auto& k : server.exported_secrets()) server_keys.push_back(k);
  }

  // Delivers `out` to `to`, returns the reply.
  static std::vector<CryptoOutput> deliver(NullHandshakeProvider& to,
                                           const std::vector<CryptoOutput>& out) {
    std::vector<CryptoOutput> reply;
    for (const auto& o : out) {
      auto r = to.consume(o.level, wire::as_span(o.data));
      reply.insert(reply.end(), r.begin(), r.end());
    }
    return reply;
  }

  void run() {
    auto flight = client.start();
    drain();
    auto server_flight = deliver(server, flight);
    drain();
    auto client_fin = deliver(client, server_flight);
    drain();
    deliver(server, client_fin);
    drain();
  }
};

NullProviderConfig cfg(Role role, std::uint64_t seed = 42) {
  NullProviderConfig c;
  c.role = role;
  c.seed = seed;
  wire::TransportParameters tp;
  tp.set_initial_max_data(role == Role::client ? 1000 : 2000);
  c.local_transport_parameters = wire::encode_transport_parameters(tp);
  return c;
}

const KeyMaterial* find(const std::vector<KeyMaterial>& keys, EncryptionLevel l, Direction d) {
  for (const auto& k : keys) {
    if (k.level == l && k.direction == d) return &k;
  }
  return nullptr;
}

}  // namespace

TEST(NullProvider, PeersWithSameSeedAgreeOnEveryKey) {
  Pair p{NullHandshakeProvider(cfg(Role::client)), NullHandshakeProvider(cfg(Role::server)), {}, {}};
  p.run();
  EXPECT_TRUE(p.client.handshake_complete());
  EXPECT_TRUE(p.server.handshake_complete());
  for (auto level : {EncryptionLevel::handshake, EncryptionLevel::one_rtt}) {
    for (auto dir : {Direction::client, Direction::server}) {
      const auto* c = find(p.client_keys, level, dir);
      const auto* s = find(p.server_keys, level, dir);
      ASSERT_NE(c, nullptr);
      ASSERT_NE(s, nullptr);
      EXPECT_EQ(*c, *s);
    }
  }
  EXPECT_EQ(find(p.client_keys, EncryptionLevel::zero_rtt, Direction::client), nullptr);
  EXPECT_EQ(p.client_keys.size(), 4u);
  EXPECT_EQ(p.client.peer_transport_parameters()->initial_max_data(), 2000u);
  EXPECT_EQ(p.server.peer_transport_parameters()->initial_max_data(), 1000u);
}

TEST(NullProvider, ConsumeIsDeterministic) {
  auto run = [] {
    Pair p{NullHandshakeProvider(cfg(Role::client)), NullHandshakeProvider(cfg(Role::server)), {}, {}};
    p.run();
    return p.client_keys;
  };
  EXPECT_EQ(run(), run());
}

TEST(NullProvider, FlightDeliveredByteByByte) {
  NullHandshakeProvider client(cfg(Role::client));
  NullHandshakeProvider server(cfg(Role::server));
  const auto ch = client.start();
  std::vector<CryptoOutput> reply;
  for (auto b : ch.at(0).data) {
    auto r = server.consume(EncryptionLevel::initial, wire::ByteSpan(&b, 1));
    reply.insert(reply.end(), r.begin(), r.end());
  }
  ASSERT_EQ(reply.size(), 2u);
  EXPECT_EQ(reply[0].level, EncryptionLevel::initial);
  EXPECT_EQ(reply[0].data[0], tls_message::kServerHello);
  EXPECT_EQ(reply[1].level, EncryptionLevel::handshake);
  EXPECT_EQ(reply[1].data[0], tls_message::kEncryptedExtensions);
}

TEST(NullProvider, DifferentSeedsFailAtFinished) {
  NullHandshakeProvider client(cfg(Role::client, 1));
  NullHandshakeProvider server(cfg(Role::server, 2));
  auto flight = Pair::deliver(server, client.start());
  EXPECT_THROW(Pair::deliver(client, flight), HandshakeError);

  NullProviderConfig lax = cfg(Role::client, 1);
  lax.verify_peer = false;
  NullHandshakeProvider lax_client(lax);
  NullHandshakeProvider lax_server(cfg(Role::server, 2));
  auto lax_flight = Pair::deliver(lax_server, lax_client.start());
  // Without peer verification the finished check still fails.
  EXPECT_THROW(Pair::deliver(lax_client, lax_flight), HandshakeError);
}

TEST(NullProvider, UnexpectedMessageIsRejected) {
  NullHandshakeProvider server(cfg(Role::server));
  const wire::Bytes fin = wire::from_hex("14000001" "00");
  EXPECT_THROW(server.consume(EncryptionLevel::initial, wire::as_span(fin)), HandshakeError);
}

TEST(NullProvider, ResumptionWithEarlyData) {
  Pair first{NullHandshakeProvider(cfg(Role::client)), NullHandshakeProvider(cfg(Role::server)), {}, {}};
  first.run();
  const auto nst = first.server.issue_ticket();
  EXPECT_EQ(nst.level, EncryptionLevel::one_rtt);
  first.client.consume(nst.level, wire::as_span(nst.data));
  ASSERT_TRUE(first.client.resumption_ticket().has_value());

  auto ccfg = cfg(Role::client);
  ccfg.ticket = first.client.resumption_ticket();
  ccfg.offer_early_data = true;
  ccfg.nonce = 1;
  Pair second{NullHandshakeProvider(ccfg), NullHandshakeProvider(cfg(Role::server)), {}, {}};
  second.run();
  EXPECT_TRUE(second.client.early_data_accepted());
  const auto* c0 = find(second.client_keys, EncryptionLevel::zero_rtt, Direction::client);
  const auto* s0 = find(second.server_keys, EncryptionLevel::zero_rtt, Direction::client);
  ASSERT_NE(c0, nullptr);
  ASSERT_NE(s0, nullptr);
  EXPECT_EQ(*c0, *s0);
  EXPECT_EQ(*find(second.client_keys, EncryptionLevel::one_rtt, Direction::server),
            *find(second.server_keys, EncryptionLevel::one_rtt, Direction::server));
}

TEST(NullProvider, RejectedEarlyDataStillCompletes) {
  Pair first{NullHandshakeProvider(cfg(Role::client)), NullHandshakeProvider(cfg(Role::server)), {}, {}};
  first.run();
  const auto nst = first.server.issue_ticket();
  first.client.consume(nst.level, wire::as_span(nst.data));

  auto ccfg = cfg(Role::client);
  ccfg.ticket = first.client.resumption_ticket();
  ccfg.offer_early_data = true;
  auto scfg = cfg(Role::server);
  scfg.accept_early_data = false;
  Pair second{NullHandshakeProvider(ccfg), NullHandshakeProvider(scfg), {}, {}};
  second.run();
  EXPECT_TRUE(second.client.handshake_complete());
  EXPECT_FALSE(second.client.early_data_accepted());
  EXPECT_EQ(find(second.server_keys, EncryptionLevel::zero_rtt, Direction::client), nullptr);
}

TEST(NullProvider, ForgedTicketIsNotAccepted) {
  auto ccfg = cfg(Role::client);
  ccfg.ticket = wire::Bytes(32, 0x55);
  ccfg.offer_early_data = true;
  Pair p{NullHandshakeProvider(ccfg), NullHandshakeProvider(cfg(Role::server)), {}, {}};
  p.run();
  EXPECT_TRUE(p.client.handshake_complete());
  EXPECT_FALSE(p.client.early_data_accepted());
}

TEST(NullProvider, DuplicateTransportParametersVisibleRaw) {
  auto scfg = cfg(Role::server);
  wire::Bytes dup = wire::encode_transport_parameter(wire::tp_id::kInitialMaxData,
                                                     wire::as_span(wire::encode_varint(5)));
  const auto again = dup;
  dup.insert(dup.end(), again.begin(), again.end());
  scfg.local_transport_parameters = dup;
  Pair p{NullHandshakeProvider(cfg(Role::client)), NullHandshakeProvider(scfg), {}, {}};
  p.run();
  EXPECT_EQ(*p.client.peer_transport_parameters_raw(), dup);
  EXPECT_EQ(p.client.peer_transport_parameters()->initial_max_data(), 5u);
}
