#include <gtest/gtest.h>

#include "qtracker/wire/transport_parameters.hpp"

using namespace qtracker::wire;

TEST(TransportParameters, StreamDataLimitRoundTrips) {
  TransportParameters tp;
  tp.set_initial_max_stream_data_bidi_local(80);
  const auto bytes = encode_transport_parameters(tp);
  EXPECT_EQ(to_hex(as_span(bytes)), "05024050");
  const auto decoded = decode_transport_parameters(as_span(bytes));
  EXPECT_EQ(decoded, tp);
  EXPECT_EQ(decoded.initial_max_stream_data_bidi_local(), 80u);
}

TEST(TransportParameters, EmptyRoundTrips) {
  const auto bytes = encode_transport_parameters({});
  EXPECT_TRUE(bytes.empty());
  EXPECT_TRUE(decode_transport_parameters(as_span(bytes)).empty());
}

TEST(TransportParameters, UnknownIdPreservedByteExact) {
  // Hand-built TLV: id 0x7f39 as a 4-byte varint, length 2, value dead.
  const Bytes wire_bytes = from_hex("80007f39" "02" "dead");
  const auto decoded = decode_transport_parameters(as_span(wire_bytes));
  ASSERT_EQ(decoded.size(), 1u);
  EXPECT_EQ(decoded.entries()[0].id, 0x7f39u);
  EXPECT_EQ(to_hex(as_span(decoded.entries()[0].value)), "dead");
  EXPECT_EQ(encode_transport_parameters(decoded), wire_bytes);
  EXPECT_EQ(transport_parameter_name(0x7f39), "unknown");
}

TEST(TransportParameters, DuplicateIdIsADecodeError) {
  Bytes bytes = encode_transport_parameter(tp_id::kInitialMaxData, as_span(from_hex("4400")));
  const auto again = encode_transport_parameter(tp_id::kInitialMaxData, as_span(from_hex("4400")));
  bytes.insert(bytes.end(), again.begin(), again.end());
  EXPECT_THROW(decode_transport_parameters(as_span(bytes)), ParseError);

  const auto lenient = decode_transport_parameters_lenient(as_span(bytes));
  EXPECT_EQ(lenient.duplicate_ids, std::vector<std::uint64_t>{tp_id::kInitialMaxData});
  EXPECT_EQ(lenient.parameters.initial_max_data(), 0x400u);
}

TEST(TransportParameters, NamedAccessors) {
  TransportParameters tp;
  tp.set_initial_max_data(1 << 20);
  tp.set_initial_max_streams_bidi(100);
  tp.set_max_idle_timeout(30000);
  tp.set_original_dcid(ConnectionId(from_hex("8394c8f03e515708")));
  tp.set_raw(0x2ab2, from_hex("ff"));
  const auto decoded = decode_transport_parameters(as_span(encode_transport_parameters(tp)));
  EXPECT_EQ(decoded.initial_max_data(), 1u << 20);
  EXPECT_EQ(decoded.initial_max_streams_bidi(), 100u);
  EXPECT_EQ(decoded.max_idle_timeout(), 30000u);
  EXPECT_EQ(decoded.original_dcid()->hex(), "8394c8f03e515708");
  EXPECT_FALSE(decoded.integer(0x2ab2).has_value());  // ff is a truncated varint
}

TEST(TransportParameters, TruncatedValueIsAnError) {
  const Bytes bytes = from_hex("0404" "80");
  EXPECT_THROW(decode_transport_parameters(as_span(bytes)), ParseError);
}
