#include "ofkit/aes.hpp"

namespace ofkit {

namespace {

// GF(2^8) multiply, reduction polynomial x^8 + x^4 + x^3 + x + 1.
std::uint8_t gmul(std::uint8_t a, std::uint8_t b) {
  std::uint8_t p = 0;
  for (int i = 0; i < 8; ++i) {
    if (b & 1) p ^= a;
    std::uint8_t hi = a & 0x80;
    a = static_cast<std::uint8_t>(a << 1);
    if (hi) a ^= 0x1b;
    b >>= 1;
  }
  return p;
}

struct SboxTables {
  std::uint8_t fwd[256];
  std::uint8_t inv[256];
  std::uint8_t mul2[256], mul3[256];
  std::uint8_t mul9[256], mul11[256], mul13[256], mul14[256];
};

SboxTables build_sboxes() {
  // Multiplicative inverses via brute force, then the affine transform.
  SboxTables t{};
  for (int x = 0; x < 256; ++x) {
    std::uint8_t xinv = 0;
    if (x != 0) {
      for (int y = 1; y < 256; ++y) {
        if (gmul(static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y)) ==
            1) {
          xinv = static_cast<std::uint8_t>(y);
          break;
        }
      }
    }
    auto rotl8 = [](std::uint8_t v, int n) {
      return static_cast<std::uint8_t>((v << n) | (v >> (8 - n)));
    };
    std::uint8_t s = static_cast<std::uint8_t>(xinv ^ rotl8(xinv, 1) ^
                                               rotl8(xinv, 2) ^ rotl8(xinv, 3) ^
                                               rotl8(xinv, 4) ^ 0x63);
    t.fwd[x] = s;
  }
  for (int x = 0; x < 256; ++x) {
    t.inv[t.fwd[x]] = static_cast<std::uint8_t>(x);
    auto b = static_cast<std::uint8_t>(x);
    t.mul2[x] = gmul(b, 2);
    t.mul3[x] = gmul(b, 3);
    t.mul9[x] = gmul(b, 9);
    t.mul11[x] = gmul(b, 11);
    t.mul13[x] = gmul(b, 13);
    t.mul14[x] = gmul(b, 14);
  }
  return t;
}

const SboxTables& sboxes() {
  static const SboxTables t = build_sboxes();
  return t;
}

constexpr std::uint8_t kRcon[10] = {0x01, 0x02, 0x04, 0x08, 0x10,
                                    0x20, 0x40, 0x80, 0x1b, 0x36};

// State bytes are kept in input order: state[r + 4c] holds row r, column c.
void sub_bytes(std::uint8_t* s) {
  for (int i = 0; i < 16; ++i) s[i] = sboxes().fwd[s[i]];
}

void inv_sub_bytes(std::uint8_t* s) {
  for (int i = 0; i < 16; ++i) s[i] = sboxes().inv[s[i]];
}

void shift_rows(std::uint8_t* s) {
  std::uint8_t t[16];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t[r + 4 * c] = s[r + 4 * ((c + r) % 4)];
  std::copy(t, t + 16, s);
}

void inv_shift_rows(std::uint8_t* s) {
  std::uint8_t t[16];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t[r + 4 * ((c + r) % 4)] = s[r + 4 * c];
  std::copy(t, t + 16, s);
}

void mix_columns(std::uint8_t* s) {
  const SboxTables& t = sboxes();
  for (int c = 0; c < 4; ++c) {
    std::uint8_t* col = s + 4 * c;
    std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
    col[0] = t.mul2[a0] ^ t.mul3[a1] ^ a2 ^ a3;
    col[1] = a0 ^ t.mul2[a1] ^ t.mul3[a2] ^ a3;
    col[2] = a0 ^ a1 ^ t.mul2[a2] ^ t.mul3[a3];
    col[3] = t.mul3[a0] ^ a1 ^ a2 ^ t.mul2[a3];
  }
}

void inv_mix_columns(std::uint8_t* s) {
  const SboxTables& t = sboxes();
  for (int c = 0; c < 4; ++c) {
    std::uint8_t* col = s + 4 * c;
    std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
    col[0] = t.mul14[a0] ^ t.mul11[a1] ^ t.mul13[a2] ^ t.mul9[a3];
    col[1] = t.mul9[a0] ^ t.mul14[a1] ^ t.mul11[a2] ^ t.mul13[a3];
    col[2] = t.mul13[a0] ^ t.mul9[a1] ^ t.mul14[a2] ^ t.mul11[a3];
    col[3] = t.mul11[a0] ^ t.mul13[a1] ^ t.mul9[a2] ^ t.mul14[a3];
  }
}

void add_round_key(std::uint8_t* s, const std::uint8_t* rk) {
  for (int i = 0; i < 16; ++i) s[i] ^= rk[i];
}

}  // namespace

Aes128::Aes128(const std::array<std::uint8_t, 16>& key) {
  std::copy(key.begin(), key.end(), round_keys_.begin());
  for (int i = 4; i < 44; ++i) {
    std::uint8_t w[4] = {round_keys_[4 * (i - 1)], round_keys_[4 * (i - 1) + 1],
                         round_keys_[4 * (i - 1) + 2],
                         round_keys_[4 * (i - 1) + 3]};
    if (i % 4 == 0) {
      std::uint8_t tmp = w[0];
      w[0] = static_cast<std::uint8_t>(sboxes().fwd[w[1]] ^ kRcon[i / 4 - 1]);
      w[1] = sboxes().fwd[w[2]];
      w[2] = sboxes().fwd[w[3]];
      w[3] = sboxes().fwd[tmp];
    }
    for (int j = 0; j < 4; ++j)
      round_keys_[4 * i + j] = round_keys_[4 * (i - 4) + j] ^ w[j];
  }
}

Aes128::Block Aes128::encrypt_block(const Block& in) const {
  Block s = in;
  add_round_key(s.data(), round_keys_.data());
  for (int round = 1; round <= 9; ++round) {
    sub_bytes(s.data());
    shift_rows(s.data());
    mix_columns(s.data());
    add_round_key(s.data(), round_keys_.data() + 16 * round);
  }
  sub_bytes(s.data());
  shift_rows(s.data());
  add_round_key(s.data(), round_keys_.data() + 160);
  return s;
}

Aes128::Block Aes128::decrypt_block(const Block& in) const {
  Block s = in;
  add_round_key(s.data(), round_keys_.data() + 160);
  for (int round = 9; round >= 1; --round) {
    inv_shift_rows(s.data());
    inv_sub_bytes(s.data());
    add_round_key(s.data(), round_keys_.data() + 16 * round);
    inv_mix_columns(s.data());
  }
  inv_shift_rows(s.data());
  inv_sub_bytes(s.data());
  add_round_key(s.data(), round_keys_.data());
  return s;
}

}  // namespace ofkit
