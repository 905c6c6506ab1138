#include "ofkit/cipher.hpp"

#include "ofkit/aes.hpp"

namespace ofkit {

Bytes pkcs7_pad(BytesView data) {
  std::size_t pad = 16 - (data.size() % 16);
  Bytes out(data.begin(), data.end());
  out.insert(out.end(), pad, static_cast<std::uint8_t>(pad));
  return out;
}

Bytes pkcs7_unpad(BytesView data) {
  if (data.empty() || data.size() % 16 != 0)
    throw CipherError("pkcs7: length not a positive multiple of 16");
  std::uint8_t pad = data.back();
  if (pad < 1 || pad > 16) throw CipherError("pkcs7: pad count out of range");
  if (pad > data.size()) throw CipherError("pkcs7: pad longer than data");
  for (std::size_t i = data.size() - pad; i < data.size(); ++i)
    if (data[i] != pad) throw CipherError("pkcs7: inconsistent pad bytes");
  return Bytes(data.begin(), data.end() - pad);
}

Bytes aes_cbc_encrypt_blocks(const Key16& key, const IvBytes& iv,
                             BytesView blocks) {
  if (blocks.size() % 16 != 0)
    throw CipherError("cbc: input not a multiple of 16");
  Aes128 aes(key);
  Bytes out(blocks.size());
  Aes128::Block chain = iv;
  for (std::size_t off = 0; off < blocks.size(); off += 16) {
    Aes128::Block x;
    for (int i = 0; i < 16; ++i) x[i] = blocks[off + i] ^ chain[i];
    chain = aes.encrypt_block(x);
    std::copy(chain.begin(), chain.end(), out.begin() + off);
  }
  return out;
}

Bytes aes_cbc_decrypt_blocks(const Key16& key, const IvBytes& iv,
                             BytesView blocks) {
  if (blocks.size() % 16 != 0 || blocks.empty())
    throw CipherError("cbc: ciphertext not a positive multiple of 16");
  Aes128 aes(key);
  Bytes out(blocks.size());
  Aes128::Block chain = iv;
  for (std::size_t off = 0; off < blocks.size(); off += 16) {
    Aes128::Block c;
    std::copy(blocks.begin() + off, blocks.begin() + off + 16, c.begin());
    Aes128::Block p = aes.decrypt_block(c);
    for (int i = 0; i < 16; ++i) out[off + i] = p[i] ^ chain[i];
    chain = c;
  }
  return out;
}

Bytes aes_cbc_encrypt(const Key16& key, const IvBytes& iv,
                      BytesView plaintext) {
  return aes_cbc_encrypt_blocks(key, iv, pkcs7_pad(plaintext));
}

Bytes aes_cbc_decrypt(const Key16& key, const IvBytes& iv,
                      BytesView ciphertext) {
  return pkcs7_unpad(aes_cbc_decrypt_blocks(key, iv, ciphertext));
}

}  // namespace ofkit
