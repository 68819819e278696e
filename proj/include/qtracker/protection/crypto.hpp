#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "qtracker/wire/bytes.hpp"

// Narrow wrapper over the primitives of the default suite (SHA-256,
// AES-128-GCM, AES-128 header protection).
namespace qtracker::protection::crypto {

using wire::Bytes;
using wire::ByteSpan;

Bytes sha256(ByteSpan data);
Bytes hmac_sha256(ByteSpan key, ByteSpan data);

Bytes hkdf_extract(ByteSpan salt, ByteSpan ikm);
Bytes hkdf_expand(ByteSpan prk, ByteSpan info, std::size_t length);
/// TLS 1.3 HKDF-Expand-Label ("tls13 " prefix).
Bytes hkdf_expand_label(ByteSpan secret, std::string_view label, ByteSpan context,
                        std::size_t length);

inline constexpr std::size_t kAeadTagLength = 16;

/// Returns ciphertext followed by the 16-byte tag.
Bytes aes128_gcm_seal(ByteSpan key, ByteSpan nonce, ByteSpan aad, ByteSpan plaintext);
/// Returns nullopt when authentication fails.
std::optional<Bytes> aes128_gcm_open(ByteSpan key, ByteSpan nonce, ByteSpan aad,
                                     ByteSpan ciphertext_and_tag);

std::array<std::uint8_t, 16> aes128_ecb_block(ByteSpan key, ByteSpan block);

}  // namespace qtracker::protection::crypto
