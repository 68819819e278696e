#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qtracker/protection/keys.hpp"
#include "qtracker/wire/frames.hpp"
#include "qtracker/wire/header.hpp"

namespace qtracker::conn {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Duration = Clock::duration;
using protection::EncryptionLevel;
using wire::Bytes;

struct ConnectionStarted {};

struct DatagramReceived {
  Bytes data;
  TimePoint timestamp;
};

struct PacketReceived {
  wire::PacketHeader header;
  std::vector<wire::Frame> frames;
  /// Empty for version negotiation and retry packets.
  std::optional<EncryptionLevel> level;
  TimePoint timestamp;
  std::vector<wire::FrameAnomaly> anomalies;
};

struct PacketSent {
  wire::PacketHeader header;  // full packet number
  std::vector<wire::Frame> frames;
  EncryptionLevel level = EncryptionLevel::initial;
  TimePoint timestamp;
  Bytes datagram;
  /// Header and payload before protection, as logged.
  Bytes cleartext;
};

struct NewKeysAvailable {
  EncryptionLevel level = EncryptionLevel::initial;
};

struct FramesQueued {
  EncryptionLevel level = EncryptionLevel::initial;
};

struct StreamDataReadable {
  std::uint64_t stream_id = 0;
};

struct LossDetected {
  EncryptionLevel level = EncryptionLevel::initial;
  std::vector<std::uint64_t> packet_numbers;
};

struct ConnectionClosed {
  std::uint64_t error_code = 0;
  std::string reason;
  bool by_peer = false;
};

struct Timeout {
  std::string timer_id;
};

struct DecryptionFailed {
  EncryptionLevel level = EncryptionLevel::initial;
  std::string reason;
};

/// Instructs the flow-control agent to advertise a new limit. stream_id
/// empty means the connection-level limit.
struct FlowControlRaise {
  std::optional<std::uint64_t> stream_id;
  std::uint64_t new_limit = 0;
};

struct CloseRequested {
  std::uint64_t error_code = 0;
  std::string reason;
  bool application = true;
};

using Event = std::variant<ConnectionStarted, DatagramReceived, PacketReceived, PacketSent,
                           NewKeysAvailable, FramesQueued, StreamDataReadable, LossDetected,
                           ConnectionClosed, Timeout, DecryptionFailed, FlowControlRaise,
                           CloseRequested>;

/// Event kinds are the variant indices.
enum class EventKind : std::uint8_t {
  connection_started,
  datagram_received,
  packet_received,
  packet_sent,
  new_keys_available,
  frames_queued,
  stream_data_readable,
  loss_detected,
  connection_closed,
  timeout,
  decryption_failed,
  flow_control_raise,
  close_requested,
};
inline constexpr std::size_t kEventKindCount = std::variant_size_v<Event>;

inline EventKind kind_of(const Event& e) { return static_cast<EventKind>(e.index()); }
std::string_view to_string(EventKind k);

struct EmitEvent {
  Event event;
};
/// A queued ACK replaces any ACK still pending at the same level.
struct QueueFrame {
  EncryptionLevel level = EncryptionLevel::initial;
  wire::Frame frame;
};
struct ArmTimer {
  std::string timer_id;
  Duration after{};
};
struct CancelTimer {
  std::string timer_id;
};
/// Asks the bundler to drain the queue at `level` now.
struct SendPacket {
  EncryptionLevel level = EncryptionLevel::initial;
};
struct CloseConnection {
  std::uint64_t error_code = 0;
  std::string reason;
  bool application = true;
};

using Effect = std::variant<EmitEvent, QueueFrame, ArmTimer, CancelTimer, SendPacket,
                            CloseConnection>;
using Effects = std::vector<Effect>;

}  // namespace qtracker::conn
