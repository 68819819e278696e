#include <algorithm>

#include "qtracker/protection/crypto.hpp"
#include "qtracker/protection/handshake_provider.hpp"

namespace qtracker::protection {

namespace {

constexpr std::uint16_t kExtTransportParameters = 0x39;
constexpr std::uint16_t kExtPreSharedKey = 41;
constexpr std::uint16_t kExtEarlyData = 42;
constexpr std::size_t kRandomLength = 32;
constexpr std::size_t kCertificateLength = 600;
constexpr std::size_t kTicketNonceLength = 16;
constexpr std::size_t kTicketMacLength = 16;

using Extensions = std::map<std::uint16_t, Bytes>;

Bytes framed(std::uint8_t type, const Bytes& body) {
  wire::ByteWriter w;
  w.u8(type);
  w.uint(body.size(), 3);
  w.bytes(wire::as_span(body));
  return w.take();
}

void write_extensions(wire::ByteWriter& w, const Extensions& exts) {
  wire::ByteWriter block;
  for (const auto& [type, data] : exts) {
    block.uint(type, 2);
    block.uint(data.size(), 2);
    block.bytes(wire::as_span(data));
  }
  w.uint(block.size(), 2);
  w.bytes(wire::as_span(block.buffer()));
}

Extensions read_extensions(wire::ByteReader& r) {
  const auto len = r.read_uint(2);
  wire::ByteReader block(r.read_span(len));
  Extensions exts;
  while (!block.empty()) {
    const auto type = static_cast<std::uint16_t>(block.read_uint(2));
    const auto size = block.read_uint(2);
    exts[type] = block.read_bytes(size);
  }
  return exts;
}

Bytes concat(std::initializer_list<ByteSpan> parts) {
  Bytes out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Bytes label_bytes(std::string_view s) { return wire::to_bytes(s); }

}  // namespace

NullHandshakeProvider::NullHandshakeProvider(NullProviderConfig config)
    : config_(std::move(config)) {
  wire::ByteWriter w;
  w.bytes(wire::as_span(label_bytes("null handshake seed")));
  w.uint(config_.seed, 8);
  seed_key_ = crypto::sha256(wire::as_span(w.buffer()));
  state_ = config_.role == Role::client ? State::idle : State::server_wait_ch;
}

std::vector<CryptoOutput> NullHandshakeProvider::start() {
  if (config_.role == Role::server) return {};
  if (state_ != State::idle) throw HandshakeError("handshake already started");
  return client_hello();
}

std::vector<CryptoOutput> NullHandshakeProvider::consume(EncryptionLevel level, ByteSpan data) {
  auto& buf = inbound_[static_cast<std::size_t>(level)];
  buf.insert(buf.end(), data.begin(), data.end());
  std::vector<CryptoOutput> out;
  while (buf.size() >= 4) {
    const std::size_t len = (std::size_t{buf[1]} << 16) | (std::size_t{buf[2]} << 8) | buf[3];
    if (buf.size() < 4 + len) break;
    Message m;
    m.type = buf[0];
    m.body.assign(buf.begin() + 4, buf.begin() + 4 + static_cast<std::ptrdiff_t>(len));
    m.raw.assign(buf.begin(), buf.begin() + 4 + static_cast<std::ptrdiff_t>(len));
    buf.erase(buf.begin(), buf.begin() + 4 + static_cast<std::ptrdiff_t>(len));
    auto produced = handle(level, m);
    out.insert(out.end(), produced.begin(), produced.end());
  }
  return out;
}

std::vector<CryptoOutput> NullHandshakeProvider::handle(EncryptionLevel level,
                                                        const Message& m) {
  auto expect = [&](State state, EncryptionLevel lvl) {
    if (state_ != state || level != lvl) {
      throw HandshakeError("unexpected handshake message type " + std::to_string(m.type) +
                           " at level " + std::string(to_string(level)));
    }
  };
  try {
    switch (m.type) {
      case tls_message::kClientHello:
        expect(State::server_wait_ch, EncryptionLevel::initial);
        return on_client_hello(m);
      case tls_message::kServerHello:
        expect(State::client_wait_sh, EncryptionLevel::initial);
        on_server_hello(m);
        return {};
      case tls_message::kEncryptedExtensions:
        expect(State::client_wait_ee, EncryptionLevel::handshake);
        on_encrypted_extensions(m);
        return {};
      case tls_message::kCertificate:
        expect(State::client_wait_cert, EncryptionLevel::handshake);
        on_certificate(m);
        return {};
      case tls_message::kCertificateVerify:
        expect(State::client_wait_cv, EncryptionLevel::handshake);
        on_certificate_verify(m);
        return {};
      case tls_message::kFinished:
        if (config_.role == Role::client) {
          expect(State::client_wait_fin, EncryptionLevel::handshake);
          return on_server_finished(m);
        }
        expect(State::server_wait_fin, EncryptionLevel::handshake);
        on_client_finished(m);
        return {};
      case tls_message::kNewSessionTicket:
        expect(State::connected, EncryptionLevel::one_rtt);
        if (config_.role != Role::client) throw HandshakeError("ticket sent to a server");
        on_new_session_ticket(m);
        return {};
      default:
        throw HandshakeError("unknown handshake message type " + std::to_string(m.type));
    }
  } catch (const wire::ParseError& e) {
    throw HandshakeError(std::string("malformed handshake message: ") + e.what());
  }
}

std::vector<CryptoOutput> NullHandshakeProvider::client_hello() {
  wire::ByteWriter seed;
  seed.bytes(wire::as_span(label_bytes("client random")));
  seed.uint(config_.nonce, 8);
  Bytes random = crypto::hmac_sha256(wire::as_span(seed_key_), wire::as_span(seed.buffer()));
  random.resize(kRandomLength);

  Extensions exts;
  exts[kExtTransportParameters] = config_.local_transport_parameters;
  if (config_.ticket) {
    offered_psk_ = true;
    exts[kExtPreSharedKey] = *config_.ticket;
    if (config_.offer_early_data) {
      offered_early_ = true;
      exts[kExtEarlyData] = {};
    }
  }
  wire::ByteWriter body;
  body.bytes(wire::as_span(random));
  write_extensions(body, exts);
  const Bytes ch = framed(tls_message::kClientHello, body.buffer());
  transcript_ = ch;
  state_ = State::client_wait_sh;

  if (offered_early_) {
    derive_early_secret(wire::as_span(*config_.ticket));
    export_key(EncryptionLevel::zero_rtt, Direction::client,
               crypto::hkdf_expand_label(wire::as_span(early_secret_), "c e traffic",
                                         wire::as_span(transcript_hash()), 32));
  }
  return {{EncryptionLevel::initial, ch}};
}

std::vector<CryptoOutput> NullHandshakeProvider::on_client_hello(const Message& m) {
  wire::ByteReader r(wire::as_span(m.body));
  const Bytes client_random = r.read_bytes(kRandomLength);
  const auto exts = read_extensions(r);
  if (auto it = exts.find(kExtTransportParameters); it != exts.end()) peer_tp_raw_ = it->second;
  transcript_ = m.raw;

  if (auto it = exts.find(kExtPreSharedKey); it != exts.end()) {
    offered_psk_ = true;
    psk_accepted_ = ticket_valid(wire::as_span(it->second));
    if (psk_accepted_) {
      derive_early_secret(wire::as_span(it->second));
      if (exts.count(kExtEarlyData)) {
        offered_early_ = true;
        if (config_.accept_early_data) {
          early_accepted_ = true;
          export_key(EncryptionLevel::zero_rtt, Direction::client,
                     crypto::hkdf_expand_label(wire::as_span(early_secret_), "c e traffic",
                                               wire::as_span(transcript_hash()), 32));
        }
      }
    }
  }

  Bytes server_random = crypto::hmac_sha256(
      wire::as_span(seed_key_),
      wire::as_span(concat({wire::as_span(label_bytes("server random")),
                            wire::as_span(client_random)})));
  server_random.resize(kRandomLength);
  Extensions sh_exts;
  if (psk_accepted_) sh_exts[kExtPreSharedKey] = {};
  wire::ByteWriter sh_body;
  sh_body.bytes(wire::as_span(server_random));
  write_extensions(sh_body, sh_exts);
  const Bytes sh = framed(tls_message::kServerHello, sh_body.buffer());
  transcript_.insert(transcript_.end(), sh.begin(), sh.end());
  derive_handshake_secrets();

  Bytes flight;
  auto append = [&](const Bytes& msg) {
    transcript_.insert(transcript_.end(), msg.begin(), msg.end());
    flight.insert(flight.end(), msg.begin(), msg.end());
  };
  Extensions ee_exts;
  ee_exts[kExtTransportParameters] = config_.local_transport_parameters;
  if (early_accepted_) ee_exts[kExtEarlyData] = {};
  wire::ByteWriter ee_body;
  write_extensions(ee_body, ee_exts);
  append(framed(tls_message::kEncryptedExtensions, ee_body.buffer()));
  append(framed(tls_message::kCertificate, certificate_body()));
  append(framed(tls_message::kCertificateVerify,
                crypto::hmac_sha256(wire::as_span(server_hs_secret_),
                                    wire::as_span(transcript_hash()))));
  append(framed(tls_message::kFinished, finished_mac(server_hs_secret_)));
  derive_application_secrets();
  state_ = State::server_wait_fin;
  return {{EncryptionLevel::initial, sh}, {EncryptionLevel::handshake, flight}};
}

void NullHandshakeProvider::on_server_hello(const Message& m) {
  wire::ByteReader r(wire::as_span(m.body));
  r.read_bytes(kRandomLength);
  const auto exts = read_extensions(r);
  psk_accepted_ = offered_psk_ && exts.count(kExtPreSharedKey) > 0;
  transcript_.insert(transcript_.end(), m.raw.begin(), m.raw.end());
  derive_handshake_secrets();
  state_ = State::client_wait_ee;
}

void NullHandshakeProvider::on_encrypted_extensions(const Message& m) {
  wire::ByteReader r(wire::as_span(m.body));
  const auto exts = read_extensions(r);
  if (auto it = exts.find(kExtTransportParameters); it != exts.end()) peer_tp_raw_ = it->second;
  early_accepted_ = offered_early_ && exts.count(kExtEarlyData) > 0;
  transcript_.insert(transcript_.end(), m.raw.begin(), m.raw.end());
  state_ = State::client_wait_cert;
}

void NullHandshakeProvider::on_certificate(const Message& m) {
  if (config_.verify_peer && m.body != certificate_body()) {
    throw HandshakeError("certificate verification failed");
  }
  transcript_.insert(transcript_.end(), m.raw.begin(), m.raw.end());
  state_ = State::client_wait_cv;
}

void NullHandshakeProvider::on_certificate_verify(const Message& m) {
  if (config_.verify_peer &&
      m.body != crypto::hmac_sha256(wire::as_span(server_hs_secret_),
                                    wire::as_span(transcript_hash()))) {
    throw HandshakeError("certificate verify signature mismatch");
  }
  transcript_.insert(transcript_.end(), m.raw.begin(), m.raw.end());
  state_ = State::client_wait_fin;
}

std::vector<CryptoOutput> NullHandshakeProvider::on_server_finished(const Message& m) {
  if (m.body != finished_mac(server_hs_secret_)) {
    throw HandshakeError("server finished mismatch");
  }
  transcript_.insert(transcript_.end(), m.raw.begin(), m.raw.end());
  derive_application_secrets();
  const Bytes fin = framed(tls_message::kFinished, finished_mac(client_hs_secret_));
  transcript_.insert(transcript_.end(), fin.begin(), fin.end());
  complete_ = true;
  state_ = State::connected;
  return {{EncryptionLevel::handshake, fin}};
}

void NullHandshakeProvider::on_client_finished(const Message& m) {
  if (m.body != finished_mac(client_hs_secret_)) {
    throw HandshakeError("client finished mismatch");
  }
  transcript_.insert(transcript_.end(), m.raw.begin(), m.raw.end());
  complete_ = true;
  state_ = State::connected;
}

void NullHandshakeProvider::on_new_session_ticket(const Message& m) {
  received_ticket_ = m.body;
}

CryptoOutput NullHandshakeProvider::issue_ticket() {
  if (config_.role != Role::server) throw HandshakeError("only servers issue tickets");
  if (!complete_) throw HandshakeError("ticket requested before handshake completion");
  wire::ByteWriter nonce;
  nonce.uint(config_.nonce, 8);
  nonce.uint(tickets_issued_++, 8);
  Bytes ticket = nonce.take();
  Bytes mac = crypto::hmac_sha256(
      wire::as_span(seed_key_),
      wire::as_span(concat({wire::as_span(label_bytes("ticket")), wire::as_span(ticket)})));
  ticket.insert(ticket.end(), mac.begin(), mac.begin() + kTicketMacLength);
  return {EncryptionLevel::one_rtt, framed(tls_message::kNewSessionTicket, ticket)};
}

bool NullHandshakeProvider::ticket_valid(ByteSpan ticket) const {
  if (ticket.size() != kTicketNonceLength + kTicketMacLength) return false;
  const Bytes mac = crypto::hmac_sha256(
      wire::as_span(seed_key_),
      wire::as_span(concat({wire::as_span(label_bytes("ticket")),
                            ticket.first(kTicketNonceLength)})));
  return std::equal(ticket.begin() + kTicketNonceLength, ticket.end(), mac.begin());
}

void NullHandshakeProvider::derive_early_secret(ByteSpan ticket) {
  const Bytes resumption = crypto::hmac_sha256(wire::as_span(seed_key_), ticket);
  early_secret_ = crypto::hkdf_extract(wire::as_span(seed_key_), wire::as_span(resumption));
}

void NullHandshakeProvider::derive_handshake_secrets() {
  const Bytes salt = psk_accepted_ ? early_secret_ : seed_key_;
  const Bytes th = transcript_hash();
  handshake_secret_ = crypto::hkdf_extract(wire::as_span(salt), wire::as_span(th));
  client_hs_secret_ = crypto::hkdf_expand_label(wire::as_span(handshake_secret_),
                                                "c hs traffic", wire::as_span(th), 32);
  server_hs_secret_ = crypto::hkdf_expand_label(wire::as_span(handshake_secret_),
                                                "s hs traffic", wire::as_span(th), 32);
  export_key(EncryptionLevel::handshake, Direction::client, client_hs_secret_);
  export_key(EncryptionLevel::handshake, Direction::server, server_hs_secret_);
}

void NullHandshakeProvider::derive_application_secrets() {
  const Bytes th = transcript_hash();
  const Bytes master =
      crypto::hkdf_extract(wire::as_span(handshake_secret_), wire::as_span(label_bytes("derived")));
  client_ap_secret_ =
      crypto::hkdf_expand_label(wire::as_span(master), "c ap traffic", wire::as_span(th), 32);
  server_ap_secret_ =
      crypto::hkdf_expand_label(wire::as_span(master), "s ap traffic", wire::as_span(th), 32);
  export_key(EncryptionLevel::one_rtt, Direction::client, client_ap_secret_);
  export_key(EncryptionLevel::one_rtt, Direction::server, server_ap_secret_);
}

void NullHandshakeProvider::export_key(EncryptionLevel level, Direction direction,
                                       const Bytes& secret) {
  const auto id = std::make_pair(level, direction);
  if (std::find(exported_.begin(), exported_.end(), id) != exported_.end()) return;
  exported_.push_back(id);
  pending_keys_.push_back(key_material_from_secret(level, direction, wire::as_span(secret)));
}

std::vector<KeyMaterial> NullHandshakeProvider::exported_secrets() {
  return std::exchange(pending_keys_, {});
}

Bytes NullHandshakeProvider::transcript_hash() const {
  return crypto::sha256(wire::as_span(transcript_));
}

Bytes NullHandshakeProvider::finished_mac(const Bytes& traffic_secret) const {
  const Bytes key =
      crypto::hkdf_expand_label(wire::as_span(traffic_secret), "finished", {}, 32);
  return crypto::hmac_sha256(wire::as_span(key), wire::as_span(transcript_hash()));
}

Bytes NullHandshakeProvider::certificate_body() const {
  return crypto::hkdf_expand_label(wire::as_span(seed_key_), "certificate", {},
                                   kCertificateLength);
}

std::optional<wire::TransportParameters> NullHandshakeProvider::peer_transport_parameters()
    const {
  if (!peer_tp_raw_) return std::nullopt;
  try {
    return wire::decode_transport_parameters_lenient(wire::as_span(*peer_tp_raw_)).parameters;
  } catch (const wire::ParseError&) {
    return std::nullopt;
  }
}

std::optional<Bytes> NullHandshakeProvider::peer_transport_parameters_raw() const {
  return peer_tp_raw_;
}

std::optional<Bytes> NullHandshakeProvider::resumption_ticket() const {
  return received_ticket_;
}

}  // namespace qtracker::protection
