#include "ofkit/keys.hpp"

#include <algorithm>

namespace ofkit {

SecretKey16 derive_subkey(const MasterSecret& ms, BytesView label) {
  Sha256 h;
  h.update(ms.bytes);
  static constexpr std::uint8_t kCounter[4] = {0x00, 0x00, 0x00, 0x01};
  h.update(BytesView(kCounter, 4));
  h.update(label);
  Digest256 digest = h.finish();
  SecretKey16 key;
  std::copy(digest.begin(), digest.begin() + 16, key.bytes.begin());
  return key;
}

SecretKey16 derive_subkey(const MasterSecret& ms, std::string_view label) {
  return derive_subkey(
      ms, BytesView(reinterpret_cast<const std::uint8_t*>(label.data()),
                    label.size()));
}

DerivedKeySet derive_keyset(const MasterSecret& ms) {
  return DerivedKeySet{
      .auth_key = derive_subkey(ms, kAuthLabel),
      .pid_key = derive_subkey(ms, kPidLabel),
      .sign_key = derive_subkey(ms, kSignLabel),
  };
}

Digest256 ecdh_establish(const Curve25519Scalar& local_private,
                         const Curve25519Point& remote_public,
                         const std::array<std::uint8_t, 32>& x) {
  Curve25519Point shared = x25519(local_private, remote_public);
  bool all_zero = std::all_of(shared.begin(), shared.end(),
                              [](std::uint8_t b) { return b == 0; });
  if (all_zero) throw EcdhError("low-order remote public key");
  Sha256 h;
  h.update(shared);
  h.update(x);
  return h.finish();
}

}  // namespace ofkit
