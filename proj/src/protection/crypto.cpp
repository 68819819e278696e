#include "qtracker/protection/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>

#include <memory>
#include <stdexcept>

namespace qtracker::protection::crypto {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
};

[[noreturn]] void fail(const char* what) {
  throw std::runtime_error(std::string("crypto: ") + what);
}

void check(int rc, const char* what) {
  if (rc != 1) fail(what);
}

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) fail("EVP_CIPHER_CTX_new");
  return ctx;
}

void require_size(ByteSpan b, std::size_t n, const char* what) {
  if (b.size() != n) throw std::invalid_argument(std::string(what) + " has wrong length");
}

Bytes hkdf(int mode, ByteSpan salt, ByteSpan key, ByteSpan info, std::size_t length) {
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> ctx(
      EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
  if (!ctx) fail("EVP_PKEY_CTX_new_id");
  check(EVP_PKEY_derive_init(ctx.get()), "derive_init");
  check(EVP_PKEY_CTX_hkdf_mode(ctx.get(), mode), "hkdf_mode");
  check(EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()), "hkdf_md");
  if (mode == EVP_PKEY_HKDEF_MODE_EXTRACT_ONLY) {
    check(EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(), static_cast<int>(salt.size())),
          "hkdf_salt");
  }
  check(EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), key.data(), static_cast<int>(key.size())),
        "hkdf_key");
  if (mode == EVP_PKEY_HKDEF_MODE_EXPAND_ONLY) {
    check(EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(), static_cast<int>(info.size())),
          "hkdf_info");
  }
  Bytes out(length);
  std::size_t out_len = length;
  check(EVP_PKEY_derive(ctx.get(), out.data(), &out_len), "derive");
  out.resize(out_len);
  return out;
}

}  // namespace

Bytes sha256(ByteSpan data) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  check(EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr),
        "EVP_Digest");
  out.resize(len);
  return out;
}

Bytes hmac_sha256(ByteSpan key, ByteSpan data) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
            out.data(), &len)) {
    fail("HMAC");
  }
  out.resize(len);
  return out;
}

Bytes hkdf_extract(ByteSpan salt, ByteSpan ikm) {
  return hkdf(EVP_PKEY_HKDEF_MODE_EXTRACT_ONLY, salt, ikm, {}, 32);
}

Bytes hkdf_expand(ByteSpan prk, ByteSpan info, std::size_t length) {
  return hkdf(EVP_PKEY_HKDEF_MODE_EXPAND_ONLY, {}, prk, info, length);
}

Bytes hkdf_expand_label(ByteSpan secret, std::string_view label, ByteSpan context,
                        std::size_t length) {
  const std::string full = "tls13 " + std::string(label);
  wire::ByteWriter info;
  info.uint(length, 2);
  info.u8(static_cast<std::uint8_t>(full.size()));
  info.bytes(wire::as_span(wire::to_bytes(full)));
  info.u8(static_cast<std::uint8_t>(context.size()));
  info.bytes(context);
  return hkdf_expand(secret, wire::as_span(info.buffer()), length);
}

Bytes aes128_gcm_seal(ByteSpan key, ByteSpan nonce, ByteSpan aad, ByteSpan plaintext) {
  require_size(key, 16, "AEAD key");
  require_size(nonce, 12, "AEAD nonce");
  auto ctx = new_ctx();
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nonce.data()),
        "EncryptInit");
  int len = 0;
  if (!aad.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())),
          "aad");
  }
  Bytes out(plaintext.size() + kAeadTagLength);
  int total = 0;
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                            static_cast<int>(plaintext.size())),
          "EncryptUpdate");
    total = len;
  }
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &len), "EncryptFinal");
  total += len;
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagLength, out.data() + total),
        "get tag");
  out.resize(total + kAeadTagLength);
  return out;
}

std::optional<Bytes> aes128_gcm_open(ByteSpan key, ByteSpan nonce, ByteSpan aad,
                                     ByteSpan ciphertext_and_tag) {
  require_size(key, 16, "AEAD key");
  require_size(nonce, 12, "AEAD nonce");
  if (ciphertext_and_tag.size() < kAeadTagLength) return std::nullopt;
  const auto ct = ciphertext_and_tag.first(ciphertext_and_tag.size() - kAeadTagLength);
  Bytes tag(ciphertext_and_tag.end() - kAeadTagLength, ciphertext_and_tag.end());

  auto ctx = new_ctx();
  check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nonce.data()),
        "DecryptInit");
  int len = 0;
  if (!aad.empty()) {
    check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())),
          "aad");
  }
  Bytes out(ct.size() + 16);
  int total = 0;
  if (!ct.empty()) {
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, ct.data(), static_cast<int>(ct.size())),
          "DecryptUpdate");
    total = len;
  }
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagLength, tag.data()),
        "set tag");
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) return std::nullopt;
  out.resize(total + len);
  return out;
}

std::array<std::uint8_t, 16> aes128_ecb_block(ByteSpan key, ByteSpan block) {
  require_size(key, 16, "header protection key");
  require_size(block, 16, "sample");
  auto ctx = new_ctx();
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.data(), nullptr),
        "EncryptInit");
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  std::array<std::uint8_t, 32> out{};
  int len = 0;
  check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, block.data(), 16), "EncryptUpdate");
  std::array<std::uint8_t, 16> mask{};
  std::copy_n(out.begin(), 16, mask.begin());
  return mask;
}

}  // namespace qtracker::protection::crypto
