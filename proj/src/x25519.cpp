#include "ofkit/x25519.hpp"

namespace ofkit {

namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

constexpr u64 kMask51 = (u64{1} << 51) - 1;

// Field element mod 2^255 - 19, five 51-bit limbs, least significant first.
struct Fe {
  u64 v[5];
};

u64 load64le(const std::uint8_t* p) {
  u64 r = 0;
  for (int i = 7; i >= 0; --i) r = (r << 8) | p[i];
  return r;
}

Fe fe_frombytes(const std::uint8_t s[32]) {
  Fe h;
  h.v[0] = load64le(s) & kMask51;
  h.v[1] = (load64le(s + 6) >> 3) & kMask51;
  h.v[2] = (load64le(s + 12) >> 6) & kMask51;
  h.v[3] = (load64le(s + 19) >> 1) & kMask51;
  h.v[4] = (load64le(s + 24) >> 12) & kMask51;
  return h;
}

void fe_tobytes(std::uint8_t s[32], const Fe& h) {
  u64 t[5] = {h.v[0], h.v[1], h.v[2], h.v[3], h.v[4]};
  // two carry passes bring every limb under 2^52
  for (int pass = 0; pass < 2; ++pass) {
    t[1] += t[0] >> 51; t[0] &= kMask51;
    t[2] += t[1] >> 51; t[1] &= kMask51;
    t[3] += t[2] >> 51; t[2] &= kMask51;
    t[4] += t[3] >> 51; t[3] &= kMask51;
    t[0] += 19 * (t[4] >> 51); t[4] &= kMask51;
  }
  // canonical reduction: add 19 and inspect the carry out of bit 255
  u64 q = (t[0] + 19) >> 51;
  q = (t[1] + q) >> 51;
  q = (t[2] + q) >> 51;
  q = (t[3] + q) >> 51;
  q = (t[4] + q) >> 51;
  t[0] += 19 * q;
  t[1] += t[0] >> 51; t[0] &= kMask51;
  t[2] += t[1] >> 51; t[1] &= kMask51;
  t[3] += t[2] >> 51; t[2] &= kMask51;
  t[4] += t[3] >> 51; t[3] &= kMask51;
  t[4] &= kMask51;

  u64 packed[4];
  packed[0] = t[0] | (t[1] << 51);
  packed[1] = (t[1] >> 13) | (t[2] << 38);
  packed[2] = (t[2] >> 26) | (t[3] << 25);
  packed[3] = (t[3] >> 39) | (t[4] << 12);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j)
      s[8 * i + j] = static_cast<std::uint8_t>(packed[i] >> (8 * j));
}

Fe fe_add(const Fe& a, const Fe& b) {
  Fe r;
  for (int i = 0; i < 5; ++i) r.v[i] = a.v[i] + b.v[i];
  return r;
}

Fe fe_sub(const Fe& a, const Fe& b) {
  // bias by 2p to keep limbs non-negative
  Fe r;
  r.v[0] = a.v[0] + 0xfffffffffffdaULL - b.v[0];
  r.v[1] = a.v[1] + 0xffffffffffffeULL - b.v[1];
  r.v[2] = a.v[2] + 0xffffffffffffeULL - b.v[2];
  r.v[3] = a.v[3] + 0xffffffffffffeULL - b.v[3];
  r.v[4] = a.v[4] + 0xffffffffffffeULL - b.v[4];
  return r;
}

Fe fe_mul(const Fe& a, const Fe& b) {
  u128 r0 = (u128)a.v[0] * b.v[0] + (u128)(19 * a.v[1]) * b.v[4] +
            (u128)(19 * a.v[2]) * b.v[3] + (u128)(19 * a.v[3]) * b.v[2] +
            (u128)(19 * a.v[4]) * b.v[1];
  u128 r1 = (u128)a.v[0] * b.v[1] + (u128)a.v[1] * b.v[0] +
            (u128)(19 * a.v[2]) * b.v[4] + (u128)(19 * a.v[3]) * b.v[3] +
            (u128)(19 * a.v[4]) * b.v[2];
  u128 r2 = (u128)a.v[0] * b.v[2] + (u128)a.v[1] * b.v[1] +
            (u128)a.v[2] * b.v[0] + (u128)(19 * a.v[3]) * b.v[4] +
            (u128)(19 * a.v[4]) * b.v[3];
  u128 r3 = (u128)a.v[0] * b.v[3] + (u128)a.v[1] * b.v[2] +
            (u128)a.v[2] * b.v[1] + (u128)a.v[3] * b.v[0] +
            (u128)(19 * a.v[4]) * b.v[4];
  u128 r4 = (u128)a.v[0] * b.v[4] + (u128)a.v[1] * b.v[3] +
            (u128)a.v[2] * b.v[2] + (u128)a.v[3] * b.v[1] +
            (u128)a.v[4] * b.v[0];

  Fe r;
  u64 c;
  r.v[0] = static_cast<u64>(r0) & kMask51; c = static_cast<u64>(r0 >> 51);
  r1 += c;
  r.v[1] = static_cast<u64>(r1) & kMask51; c = static_cast<u64>(r1 >> 51);
  r2 += c;
  r.v[2] = static_cast<u64>(r2) & kMask51; c = static_cast<u64>(r2 >> 51);
  r3 += c;
  r.v[3] = static_cast<u64>(r3) & kMask51; c = static_cast<u64>(r3 >> 51);
  r4 += c;
  r.v[4] = static_cast<u64>(r4) & kMask51; c = static_cast<u64>(r4 >> 51);
  r.v[0] += 19 * c;
  c = r.v[0] >> 51; r.v[0] &= kMask51;
  r.v[1] += c;
  return r;
}

Fe fe_sq(const Fe& a) { return fe_mul(a, a); }

Fe fe_mul121665(const Fe& a) {
  Fe r;
  u128 acc;
  u64 c = 0;
  for (int i = 0; i < 5; ++i) {
    acc = (u128)a.v[i] * 121665 + c;
    r.v[i] = static_cast<u64>(acc) & kMask51;
    c = static_cast<u64>(acc >> 51);
  }
  r.v[0] += 19 * c;
  return r;
}

Fe fe_pow2k(Fe a, int k) {
  while (k-- > 0) a = fe_sq(a);
  return a;
}

// a^(p-2), the standard curve25519 inversion chain
Fe fe_invert(const Fe& z) {
  Fe z2 = fe_sq(z);
  Fe z9 = fe_mul(fe_pow2k(z2, 2), z);
  Fe z11 = fe_mul(z9, z2);
  Fe z2_5_0 = fe_mul(fe_sq(z11), z9);
  Fe z2_10_0 = fe_mul(fe_pow2k(z2_5_0, 5), z2_5_0);
  Fe z2_20_0 = fe_mul(fe_pow2k(z2_10_0, 10), z2_10_0);
  Fe z2_40_0 = fe_mul(fe_pow2k(z2_20_0, 20), z2_20_0);
  Fe z2_50_0 = fe_mul(fe_pow2k(z2_40_0, 10), z2_10_0);
  Fe z2_100_0 = fe_mul(fe_pow2k(z2_50_0, 50), z2_50_0);
  Fe z2_200_0 = fe_mul(fe_pow2k(z2_100_0, 100), z2_100_0);
  Fe z2_250_0 = fe_mul(fe_pow2k(z2_200_0, 50), z2_50_0);
  return fe_mul(fe_pow2k(z2_250_0, 5), z11);
}

void fe_cswap(Fe& a, Fe& b, u64 swap) {
  u64 mask = 0 - swap;
  for (int i = 0; i < 5; ++i) {
    u64 x = mask & (a.v[i] ^ b.v[i]);
    a.v[i] ^= x;
    b.v[i] ^= x;
  }
}

}  // namespace

Curve25519Point x25519(const Curve25519Scalar& scalar,
                       const Curve25519Point& point) {
  std::uint8_t k[32];
  std::copy(scalar.begin(), scalar.end(), k);
  k[0] &= 248;
  k[31] &= 127;
  k[31] |= 64;

  std::uint8_t u[32];
  std::copy(point.begin(), point.end(), u);
  u[31] &= 127;

  Fe x1 = fe_frombytes(u);
  Fe x2{{1, 0, 0, 0, 0}};
  Fe z2{{0, 0, 0, 0, 0}};
  Fe x3 = x1;
  Fe z3{{1, 0, 0, 0, 0}};

  u64 swap = 0;
  for (int t = 254; t >= 0; --t) {
    u64 kt = (k[t >> 3] >> (t & 7)) & 1;
    swap ^= kt;
    fe_cswap(x2, x3, swap);
    fe_cswap(z2, z3, swap);
    swap = kt;

    Fe a = fe_add(x2, z2);
    Fe aa = fe_sq(a);
    Fe b = fe_sub(x2, z2);
    Fe bb = fe_sq(b);
    Fe e = fe_sub(aa, bb);
    Fe c = fe_add(x3, z3);
    Fe d = fe_sub(x3, z3);
    Fe da = fe_mul(d, a);
    Fe cb = fe_mul(c, b);
    x3 = fe_sq(fe_add(da, cb));
    z3 = fe_mul(x1, fe_sq(fe_sub(da, cb)));
    x2 = fe_mul(aa, bb);
    z2 = fe_mul(e, fe_add(aa, fe_mul121665(e)));
  }
  fe_cswap(x2, x3, swap);
  fe_cswap(z2, z3, swap);

  Fe out = fe_mul(x2, fe_invert(z2));
  Curve25519Point result{};
  fe_tobytes(result.data(), out);
  return result;
}

Curve25519Point x25519_base(const Curve25519Scalar& scalar) {
  Curve25519Point g{};
  g[0] = 9;
  return x25519(scalar, g);
}

}  // namespace ofkit
