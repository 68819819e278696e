#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qtracker/protection/keys.hpp"
#include "qtracker/wire/transport_parameters.hpp"

namespace qtracker::protection {

class HandshakeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CryptoOutput {
  EncryptionLevel level = EncryptionLevel::initial;
  Bytes data;

  bool operator==(const CryptoOutput&) const = default;
};

/// Boundary between the transport and whatever produces the handshake
/// messages and traffic secrets.
class HandshakeProvider {
 public:
  virtual ~HandshakeProvider() = default;

  /// First flight (the client hello for a client; nothing for a server).
  virtual std::vector<CryptoOutput> start() = 0;
  /// Feeds in-order CRYPTO stream bytes received at `level`. Throws
  /// HandshakeError on a message the provider rejects.
  virtual std::vector<CryptoOutput> consume(EncryptionLevel level, ByteSpan data) = 0;
  /// Keys that became available since the last call; each (level, direction)
  /// is returned at most once.
  virtual std::vector<KeyMaterial> exported_secrets() = 0;
  /// Peer parameters decoded leniently (first occurrence of a duplicate wins).
  virtual std::optional<wire::TransportParameters> peer_transport_parameters() const = 0;
  /// Peer parameters exactly as carried in the handshake.
  virtual std::optional<Bytes> peer_transport_parameters_raw() const = 0;
  virtual std::optional<Bytes> resumption_ticket() const = 0;
  virtual bool handshake_complete() const = 0;
  virtual bool early_data_accepted() const = 0;
};

enum class Role : std::uint8_t { client, server };

struct NullProviderConfig {
  Role role = Role::client;
  /// Shared by both peers; differing seeds yield unusable handshake keys.
  std::uint64_t seed = 0;
  /// Encoded local transport parameters, sent verbatim.
  Bytes local_transport_parameters;
  /// Distinguishes connections using the same seed.
  std::uint64_t nonce = 0;
  /// Client: ticket from an earlier connection, offered for resumption.
  std::optional<Bytes> ticket;
  /// Client: ask to send early data with the ticket.
  bool offer_early_data = false;
  /// Server: accept early data offered with a valid ticket.
  bool accept_early_data = true;
  /// Check the peer's certificate and verify message. The finished message is
  /// always checked.
  bool verify_peer = true;
};

/// Scripted stand-in for a TLS 1.3 stack. Messages use TLS framing (1-byte
/// type, 3-byte length) and the usual message sequence, but all randomness and
/// secrets derive from the shared seed, so two peers configured alike agree on
/// every key.
class NullHandshakeProvider final : public HandshakeProvider {
 public:
  explicit NullHandshakeProvider(NullProviderConfig config);

  std::vector<CryptoOutput> start() override;
  std::vector<CryptoOutput> consume(EncryptionLevel level, ByteSpan data) override;
  std::vector<KeyMaterial> exported_secrets() override;
  std::optional<wire::TransportParameters> peer_transport_parameters() const override;
  std::optional<Bytes> peer_transport_parameters_raw() const override;
  std::optional<Bytes> resumption_ticket() const override;
  bool handshake_complete() const override { return complete_; }
  bool early_data_accepted() const override { return early_accepted_; }

  /// Server only: a NewSessionTicket message for the 1-RTT level. Valid once
  /// the handshake completed.
  CryptoOutput issue_ticket();

  const NullProviderConfig& config() const { return config_; }

 private:
  enum class State {
    idle,
    client_wait_sh,
    client_wait_ee,
    client_wait_cert,
    client_wait_cv,
    client_wait_fin,
    server_wait_ch,
    server_wait_fin,
    connected,
  };

  struct Message {
    std::uint8_t type;
    Bytes body;
    Bytes raw;
  };

  std::vector<CryptoOutput> handle(EncryptionLevel level, const Message& m);
  std::vector<CryptoOutput> client_hello();
  std::vector<CryptoOutput> on_client_hello(const Message& m);
  void on_server_hello(const Message& m);
  void on_encrypted_extensions(const Message& m);
  void on_certificate(const Message& m);
  void on_certificate_verify(const Message& m);
  std::vector<CryptoOutput> on_server_finished(const Message& m);
  void on_client_finished(const Message& m);
  void on_new_session_ticket(const Message& m);

  void derive_handshake_secrets();
  void derive_application_secrets();
  void derive_early_secret(ByteSpan ticket);
  void export_key(EncryptionLevel level, Direction direction, const Bytes& secret);
  Bytes transcript_hash() const;
  Bytes finished_mac(const Bytes& traffic_secret) const;
  Bytes certificate_body() const;
  bool ticket_valid(ByteSpan ticket) const;

  NullProviderConfig config_;
  State state_ = State::idle;
  Bytes seed_key_;
  Bytes transcript_;
  std::array<Bytes, kLevelCount> inbound_;
  std::vector<KeyMaterial> pending_keys_;
  std::vector<std::pair<EncryptionLevel, Direction>> exported_;

  Bytes early_secret_;
  Bytes client_hs_secret_;
  Bytes server_hs_secret_;
  Bytes handshake_secret_;
  Bytes client_ap_secret_;
  Bytes server_ap_secret_;

  std::optional<Bytes> peer_tp_raw_;
  std::optional<Bytes> received_ticket_;
  bool offered_psk_ = false;
  bool offered_early_ = false;
  bool psk_accepted_ = false;
  bool early_accepted_ = false;
  bool complete_ = false;
  std::uint64_t tickets_issued_ = 0;
};

/// TLS message type codes used by the scripted handshake.
namespace tls_message {
inline constexpr std::uint8_t kClientHello = 1;
inline constexpr std::uint8_t kServerHello = 2;
inline constexpr std::uint8_t kNewSessionTicket = 4;
inline constexpr std::uint8_t kEncryptedExtensions = 8;
inline constexpr std::uint8_t kCertificate = 11;
inline constexpr std::uint8_t kCertificateVerify = 15;
inline constexpr std::uint8_t kFinished = 20;
}  // namespace tls_message

}  // namespace qtracker::protection
