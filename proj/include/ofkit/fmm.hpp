#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ofkit/keys.hpp"

namespace ofkit::fmm {

/// The server-issued IV shared by all devices,
/// base64 "+IABCfvBZHJYFUek8vp3Gg==".
Iv16 standard_iv();

inline constexpr int kPoolSize = 51;

struct PrivateIdConfig {
  SecretKey16 secret_key;
  Iv16 iv = standard_iv();
  int pool_size = kPoolSize;

  std::string to_json() const;  // {secret_key_hex, iv_b64, pool_size}
  static PrivateIdConfig from_json(std::string_view text);
};

struct PrivateId {
  std::array<std::uint8_t, 12> bytes{};
  int index = 0;  // 1-based pool index that produced it
  bool operator==(const PrivateId&) const = default;
};

/// Decoded 14-byte lost-mode payload.
struct Advertisement {
  std::uint8_t op_mode = 0x00;
  std::array<std::uint8_t, 12> private_id{};
  std::uint8_t flags = 0x00;
  bool operator==(const Advertisement&) const = default;
};

struct Pool {
  std::string device_id;
  std::vector<PrivateId> ids;  // ids[k] generated from index k+1
};

/// The 20-byte block fed to the cipher: 00, i, secretKey, 00, i.
std::array<std::uint8_t, 20> private_id_preimage(const SecretKey16& key,
                                                 int index);

/// First 12 ciphertext bytes of the encrypted pre-image. Index must be in
/// [1, pool_size].
PrivateId private_id(const PrivateIdConfig& config, int index);

Pool generate_pool(const PrivateIdConfig& config, std::string device_id);

Bytes encode_adv(const Advertisement& adv);
Advertisement decode_adv(BytesView payload);  // throws CodecError on length

struct PoolMatch {
  std::string device_id;
  int index;
};

class AmbiguousMatch : public std::runtime_error {
 public:
  explicit AmbiguousMatch(const std::string& what)
      : std::runtime_error(what) {}
};

/// Membership test of adv.private_id across pools. Throws AmbiguousMatch if
/// more than one pool contains it.
std::optional<PoolMatch> match(const Advertisement& adv,
                               const std::vector<Pool>& pools);

}  // namespace ofkit::fmm
