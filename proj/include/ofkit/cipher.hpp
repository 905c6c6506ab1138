#pragma once

#include <array>

#include "ofkit/bytes.hpp"

namespace ofkit {

/// Raised by aes_cbc_decrypt on a non-block-multiple ciphertext or an
/// invalid PKCS#7 pad.
class CipherError : public std::runtime_error {
 public:
  explicit CipherError(const std::string& what) : std::runtime_error(what) {}
};

using Key16 = std::array<std::uint8_t, 16>;
using IvBytes = std::array<std::uint8_t, 16>;

Bytes pkcs7_pad(BytesView data);
Bytes pkcs7_unpad(BytesView data);  // throws CipherError

// Raw CBC over whole blocks; input length must be a multiple of 16.
Bytes aes_cbc_encrypt_blocks(const Key16& key, const IvBytes& iv,
                             BytesView blocks);
Bytes aes_cbc_decrypt_blocks(const Key16& key, const IvBytes& iv,
                             BytesView blocks);

// CBC with PKCS#7 applied/stripped internally.
Bytes aes_cbc_encrypt(const Key16& key, const IvBytes& iv, BytesView plaintext);
Bytes aes_cbc_decrypt(const Key16& key, const IvBytes& iv,
                      BytesView ciphertext);

}  // namespace ofkit
