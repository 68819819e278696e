#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "../support/dissected_frames.hpp"
#include "../support/frame_generator.hpp"
#include "qtracker/dissector/dissector.hpp"
#include "qtracker/wire/packet.hpp"

using namespace qtracker;
using namespace qtracker::dissector;
using wire::Bytes;
namespace qt = qtracker::testing;

namespace {

std::string shipped_text() {
  std::ifstream in(default_description_dir() / "quic-v1.yaml");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

wire::ConnectionId cid(std::size_t n, std::uint8_t fill) {
  return wire::ConnectionId(Bytes(n, fill));
}

Bytes packet(wire::PacketHeader h, const std::vector<wire::Frame>& frames) {
  if (h.type != wire::PacketType::one_rtt && h.type != wire::PacketType::retry &&
      h.type != wire::PacketType::version_negotiation) {
    h.length = h.pn_length + wire::serialize_frames(frames).size();
  }
  return wire::serialize_cleartext_packet(h, frames);
}

const DissectedNode& at(const DissectedNode& n, std::initializer_list<const char*> path) {
  const DissectedNode* cur = &n;
  for (const char* p : path) {
    cur = cur->child(p);
    if (!cur) throw std::runtime_error(std::string("no child ") + p);
  }
  return *cur;
}

// Error-free dissection of a bare frame list.
DissectedNode dissect_payload(const Bytes& b) {
  DissectOptions o;
  o.start = "payload";
  return dissect(wire::as_span(b), quic_v1(), o);
}

constexpr const char* kTiny = R"(
protocol: T
version: t1
root: top
structures:
  top:
    - {name: n, kind: uint, size: 1}
    - {name: body, kind: bytes, length: n}
)";

}  // namespace

TEST(DissectorLoad, ShippedDescriptionLoads) {
  const auto& d = quic_v1();
  EXPECT_EQ(d.protocol, "QUIC");
  EXPECT_EQ(d.version_tag, "v1");
  EXPECT_EQ(d.root, "packet");
  EXPECT_EQ(d.parameters.at("short_dcid_length"), 8u);
  EXPECT_TRUE(d.structures.count("frame"));
}

TEST(DissectorLoad, MinimalDescriptionDissects) {
  const auto d = load_description(kTiny);
  const Bytes b{3, 'a', 'b', 'c'};
  const auto root = dissect(wire::as_span(b), d);
  EXPECT_EQ(at(root, {"body"}).raw, (Bytes{'a', 'b', 'c'}));
  EXPECT_TRUE(coverage_ok(root, b.size()));
}

TEST(DissectorLoad, ForwardReferenceIsRejectedWithItsLine) {
  const std::string text = R"(protocol: T
version: t1
root: top
structures:
  top:
    - {name: body, kind: bytes, length: n}
    - {name: n, kind: uint, size: 1}
)";
  try {
    load_description(text);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.line(), 6u);
    EXPECT_NE(std::string(e.what()).find("forward reference"), std::string::npos);
  }
}

TEST(DissectorLoad, DanglingReferenceIsRejected) {
  std::string text = kTiny;
  text.replace(text.find("length: n"), 9, "length: m");
  EXPECT_THROW(load_description(text), LoadError);
}

TEST(DissectorLoad, UnknownKindIsRejectedWithItsLine) {
  std::string text = kTiny;
  text.replace(text.find("kind: bytes"), 11, "kind: blob");
  try {
    load_description(text);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.line(), 8u);
  }
}

TEST(DissectorLoad, UnknownStructureIsRejected) {
  std::string text = kTiny;
  text += "    - {name: tail, kind: struct, type: nowhere}\n";
  EXPECT_THROW(load_description(text), LoadError);
}

TEST(DissectorLoad, UnreachableStructureIsRejected) {
  std::string text = kTiny;
  text += "  orphan:\n    - {name: x, kind: varint}\n";
  EXPECT_THROW(load_description(text), LoadError);
}

TEST(DissectorLoad, UnknownFlagIsRejected) {
  std::string text = shipped_text();
  const std::string from = "length: first_byte.pn_length + 1}";
  text.replace(text.find(from), from.size(), "length: first_byte.pn_size + 1}");
  EXPECT_THROW(load_description(text), LoadError);
}

TEST(DissectorLoad, TwoVersionsLoadSideBySide) {
  std::string draft = shipped_text();
  draft.replace(draft.find("version: v1"), 11, "version: draft-29");
  draft.replace(draft.find("        1: long_v1"), 18, "        0xff00001d: long_v1");
  DescriptionSet set;
  set.add(quic_v1());
  set.add(load_description(draft));
  EXPECT_EQ(set.tags(), (std::vector<std::string>{"draft-29", "v1"}));

  wire::PacketHeader h;
  h.version = 0xff00001d;
  h.dcid = cid(8, 1);
  const auto b = packet(h, {wire::PingFrame{}});
  const auto v1 = dissect(wire::as_span(b), *set.find("v1"));
  const auto d29 = dissect(wire::as_span(b), *set.find("draft-29"));
  EXPECT_EQ(at(v1, {"header", "body"}).kind, "opaque");
  EXPECT_EQ(at(d29, {"header", "body", "typed"}).kind, "initial");
  EXPECT_EQ(set.find("v2"), nullptr);
}

TEST(Dissector, ShortHeaderPing) {
  wire::PacketHeader h;
  h.type = wire::PacketType::one_rtt;
  h.dcid = cid(8, 0xab);
  h.packet_number = 7;
  const auto b = packet(h, {wire::PingFrame{}});
  const auto root = dissect(wire::as_span(b), quic_v1());
  const auto& header = at(root, {"header"});
  EXPECT_EQ(header.kind, "short_header");
  EXPECT_EQ(at(header, {"dcid"}).text, "abababababababab");
  EXPECT_EQ(at(header, {"packet_number"}).value, 7u);
  const auto& frames = at(header, {"payload", "frames"});
  ASSERT_EQ(frames.children.size(), 1u);
  EXPECT_EQ(at(frames.children[0], {"type"}).value, 1u);
  EXPECT_EQ(at(frames.children[0], {"body"}).kind, "ping");
  EXPECT_TRUE(coverage_ok(root, b.size()));
}

TEST(Dissector, ShortDcidLengthIsAParameter) {
  wire::PacketHeader h;
  h.type = wire::PacketType::one_rtt;
  h.dcid = cid(4, 0x11);
  const auto b = packet(h, {wire::PingFrame{}});
  DissectOptions o;
  o.parameters["short_dcid_length"] = 4;
  const auto root = dissect(wire::as_span(b), quic_v1(), o);
  EXPECT_EQ(at(root, {"header", "dcid"}).raw.size(), 4u);
  EXPECT_FALSE(qt::has_error_leaf(root));
}

TEST(Dissector, InitialRequestStream) {
  wire::PacketHeader h;
  h.dcid = cid(8, 2);
  h.scid = cid(8, 3);
  h.pn_length = 2;
  h.packet_number = 0x0102;
  const auto b = packet(h, {wire::StreamFrame{0, 0, wire::to_bytes("GET /index.html\r\n"), true},
                            wire::PaddingFrame{3}});
  const auto root = dissect(wire::as_span(b), quic_v1());
  const auto& typed = at(root, {"header", "body", "typed"});
  EXPECT_EQ(typed.kind, "initial");
  EXPECT_EQ(at(typed, {"packet_number"}).value, 0x0102u);
  const auto& frames = at(typed, {"payload", "frames"}).children;
  ASSERT_EQ(frames.size(), 4u);  // one node per PADDING byte
  const auto& stream = at(frames[0], {"body"});
  EXPECT_EQ(stream.kind, "stream_len");
  EXPECT_EQ(at(stream, {"stream_id"}).value, 0u);
  EXPECT_EQ(at(stream, {"length"}).value, 17u);
  EXPECT_EQ(at(stream, {"stream_data"}).raw, wire::to_bytes("GET /index.html\r\n"));
  EXPECT_TRUE(coverage_ok(root, b.size()));
}

TEST(Dissector, StreamWithoutLengthRunsToTheEnd) {
  const Bytes b = wire::from_hex("0d" "04" "4010" "68656c6c6f");  // OFF|FIN, id 4, off 16
  const auto root = dissect_payload(b);
  const auto& body = at(root, {"frames"}).children.at(0).children.at(1);
  EXPECT_EQ(body.kind, "stream_off");
  EXPECT_EQ(at(body, {"offset"}).value, 16u);
  EXPECT_EQ(at(body, {"stream_data"}).raw, wire::to_bytes("hello"));
}

TEST(Dissector, VersionNegotiation) {
  wire::PacketHeader h;
  h.type = wire::PacketType::version_negotiation;
  h.version = 0;
  h.dcid = cid(8, 4);
  h.scid = cid(8, 5);
  h.supported_versions = {1, 0xff00001d};
  const auto b = packet(h, {});
  const auto root = dissect(wire::as_span(b), quic_v1());
  const auto& list = at(root, {"header", "body", "supported_versions"});
  ASSERT_EQ(list.children.size(), 2u);
  EXPECT_EQ(at(list.children[1], {"version"}).value, 0xff00001du);
  EXPECT_TRUE(coverage_ok(root, b.size()));
}

TEST(Dissector, Retry) {
  wire::PacketHeader h;
  h.type = wire::PacketType::retry;
  h.dcid = cid(8, 6);
  h.scid = cid(8, 7);
  h.token = Bytes{1, 2, 3};
  h.retry_integrity_tag = Bytes(16, 0xee);
  const auto b = packet(h, {});
  const auto root = dissect(wire::as_span(b), quic_v1());
  const auto& typed = at(root, {"header", "body", "typed"});
  EXPECT_EQ(typed.kind, "retry");
  EXPECT_EQ(at(typed, {"retry_token"}).raw, (Bytes{1, 2, 3}));
  EXPECT_EQ(at(typed, {"integrity_tag"}).raw, Bytes(16, 0xee));
}

TEST(Dissector, UnknownFrameTypeBecomesAnErrorLeaf) {
  const Bytes b = wire::from_hex("01" "1f" "0000");
  const auto root = dissect_payload(b);
  const auto ls = leaves(root);
  ASSERT_FALSE(ls.empty());
  EXPECT_EQ(ls.back()->kind, "error");
  EXPECT_EQ(ls.back()->start, 2u);  // after the type varint that has no case
  EXPECT_EQ(ls.back()->end, b.size());
  EXPECT_TRUE(coverage_ok(root, b.size()));
}

TEST(Dissector, TruncatedAckPutsTheErrorAtTheCutField) {
  wire::AckFrame ack;
  ack.largest_acked = 100000;
  ack.ack_delay = 300;
  ack.first_range = 5;
  ack.ranges = {{2, 3}, {70, 1}};
  const Bytes full = wire::serialize_frames({ack});
  const auto whole = dissect_payload(full);
  ASSERT_FALSE(qt::has_error_leaf(whole));
  const auto field_leaves = leaves(whole);
  for (std::size_t cut = 1; cut < full.size(); ++cut) {
    const Bytes b(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cut));
    const auto root = dissect_payload(b);
    std::size_t expected = 0;
    for (const auto* l : field_leaves) {
      if (l->end > cut) {
        expected = l->start;
        break;
      }
    }
    const auto ls = leaves(root);
    ASSERT_EQ(ls.back()->kind, "error") << "cut " << cut;
    EXPECT_EQ(ls.back()->start, expected) << "cut " << cut;
    EXPECT_TRUE(coverage_ok(root, cut)) << "cut " << cut;
  }
}

TEST(Dissector, TextRenderingSnapshot) {
  wire::PacketHeader h;
  h.type = wire::PacketType::one_rtt;
  h.dcid = cid(8, 0x0a);
  h.packet_number = 3;
  const auto b = packet(h, {wire::MaxStreamDataFrame{0, 160}});
  const auto root = dissect(wire::as_span(b), quic_v1());
  EXPECT_EQ(render_text(root),
            "packet [0,14)\n"
            "  header (short_header) [0,14)\n"
            "    first_byte = 64 header_form=0 fixed_bit=1 spin_bit=0 reserved_bits=0 "
            "key_phase=0 pn_length=0 [0,1)\n"
            "    dcid = 0a0a0a0a0a0a0a0a [1,9)\n"
            "    packet_number = 3 [9,10)\n"
            "    payload (payload) [10,14)\n"
            "      frames [10,14)\n"
            "        frame [10,14)\n"
            "          type = 17 [10,11)\n"
            "          body (max_stream_data) [11,14)\n"
            "            stream_id = 0 [11,12)\n"
            "            maximum_stream_data = 160 [12,14)\n");
}

TEST(Dissector, HtmlEscapesText) {
  const Bytes b = wire::serialize_frames(
      {wire::ConnectionCloseFrame{true, 1, 0, "<b>&"}});
  const auto html = render_html(dissect_payload(b));
  EXPECT_NE(html.find("&lt;b&gt;&amp;"), std::string::npos);
  EXPECT_EQ(html.find("<b>&"), std::string::npos);
}

// The dissector and the hand-written codec are independent decoders of the
// same grammar; they must agree on every well-formed frame list.
TEST(DissectorOracle, AgreesWithTheCodecOnRandomFrameLists) {
  qt::FrameGenerator gen(20240611);
  for (int i = 0; i < 10000; ++i) {
    const auto frames = gen.frame_list();
    const Bytes b = wire::serialize_frames(frames);
    const auto parsed = wire::parse_frames(wire::as_span(b));
    const auto root = dissect_payload(b);
    ASSERT_TRUE(coverage_ok(root, b.size())) << wire::to_hex(wire::as_span(b));
    ASSERT_EQ(qt::frames_from_dissection(root), parsed.frames)
        << wire::to_hex(wire::as_span(b));
  }
}

TEST(DissectorOracle, AgreesOnTruncatedFrameLists) {
  qt::FrameGenerator gen(99);
  for (int i = 0; i < 1000; ++i) {
    const Bytes full = wire::serialize_frames(gen.frame_list(4));
    const auto cut = static_cast<std::size_t>(gen.small(full.size() - 1)) + 1;
    const Bytes b(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cut));
    bool codec_ok = true;
    try {
      wire::parse_frames(wire::as_span(b));
    } catch (const wire::ParseError&) {
      codec_ok = false;
    }
    const auto root = dissect_payload(b);
    ASSERT_EQ(codec_ok, !qt::has_error_leaf(root)) << wire::to_hex(wire::as_span(b));
  }
}

TEST(DissectorOracle, HeadersAgreeWithTheCodec) {
  qt::FrameGenerator gen(7);
  const wire::PacketType types[] = {wire::PacketType::initial, wire::PacketType::zero_rtt,
                                    wire::PacketType::handshake, wire::PacketType::one_rtt};
  for (int i = 0; i < 2000; ++i) {
    wire::PacketHeader h;
    h.type = types[gen.small(3)];
    h.dcid = wire::ConnectionId(Bytes(h.type == wire::PacketType::one_rtt ? 8 : gen.small(20), 9));
    h.scid = wire::ConnectionId(Bytes(gen.small(20), 8));
    if (h.type == wire::PacketType::initial) h.token = gen.bytes(40);
    h.pn_length = static_cast<std::uint8_t>(gen.small(3) + 1);
    h.packet_number = gen.rng()() & ((std::uint64_t{1} << (8 * h.pn_length)) - 1);
    const auto b = packet(h, gen.frame_list(4));
    const auto codec = wire::parse_cleartext_packet(wire::as_span(b));
    const auto root = dissect(wire::as_span(b), quic_v1());
    ASSERT_TRUE(coverage_ok(root, b.size()));
    const auto& header = at(root, {"header"});
    const DissectedNode& fields =
        h.type == wire::PacketType::one_rtt ? header : at(header, {"body", "typed"});
    EXPECT_EQ(at(header, {"dcid"}).raw, codec.header.dcid.bytes());
    EXPECT_EQ(at(fields, {"packet_number"}).value, codec.header.packet_number);
    EXPECT_EQ(qt::frames_from_dissection(at(fields, {"payload"})), codec.payload.frames);
    if (h.type != wire::PacketType::one_rtt) {
      EXPECT_EQ(at(header, {"scid"}).raw, codec.header.scid.bytes());
      EXPECT_EQ(at(header, {"version"}).value, codec.header.version);
    }
  }
}

TEST(DissectorProperty, LeavesTileArbitraryInput) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    Bytes b(rng() % 1501);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    // Steer some inputs toward valid version-1 long headers.
    if (b.size() > 5 && i % 2 == 0) {
      b[0] = static_cast<std::uint8_t>(0xc0 | (b[0] & 0x3f));
      b[1] = b[2] = b[3] = 0;
      b[4] = 1;
    }
    const auto root = dissect(wire::as_span(b), quic_v1());
    ASSERT_TRUE(coverage_ok(root, b.size())) << wire::to_hex(wire::as_span(b));
  }
}
