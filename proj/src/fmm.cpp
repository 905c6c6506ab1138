#include "ofkit/fmm.hpp"

#include <json.hpp>

namespace ofkit::fmm {

Iv16 standard_iv() {
  static const Iv16 iv = [] {
    Bytes raw = from_base64("+IABCfvBZHJYFUek8vp3Gg==");
    Iv16 out;
    std::copy(raw.begin(), raw.end(), out.bytes.begin());
    return out;
  }();
  return iv;
}

std::string PrivateIdConfig::to_json() const {
  nlohmann::json j;
  j["secret_key_hex"] = secret_key.hex();
  j["iv_b64"] = to_base64(iv.bytes);
  j["pool_size"] = pool_size;
  return j.dump();
}

PrivateIdConfig PrivateIdConfig::from_json(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PrivateIdConfig cfg;
  cfg.secret_key = SecretKey16::from_hex(j.at("secret_key_hex").get<std::string>());
  Bytes iv = from_base64(j.at("iv_b64").get<std::string>());
  if (iv.size() != 16) throw CodecError("iv_b64 must decode to 16 bytes");
  std::copy(iv.begin(), iv.end(), cfg.iv.bytes.begin());
  cfg.pool_size = j.value("pool_size", kPoolSize);
  if (cfg.pool_size < 1) throw CodecError("pool_size must be positive");
  return cfg;
}

std::array<std::uint8_t, 20> private_id_preimage(const SecretKey16& key,
                                                 int index) {
  std::array<std::uint8_t, 20> pre{};
  pre[0] = static_cast<std::uint8_t>((index >> 8) & 0xff);
  pre[1] = static_cast<std::uint8_t>(index & 0xff);
  std::copy(key.bytes.begin(), key.bytes.end(), pre.begin() + 2);
  pre[18] = pre[0];
  pre[19] = pre[1];
  return pre;
}

PrivateId private_id(const PrivateIdConfig& config, int index) {
  if (index < 1 || index > config.pool_size)
    throw std::out_of_range("private id index out of range");
  auto pre = private_id_preimage(config.secret_key, index);
  Bytes ct = aes_cbc_encrypt(config.secret_key.bytes, config.iv.bytes, pre);
  PrivateId id;
  std::copy(ct.begin(), ct.begin() + 12, id.bytes.begin());
  id.index = index;
  return id;
}

Pool generate_pool(const PrivateIdConfig& config, std::string device_id) {
  Pool pool;
  pool.device_id = std::move(device_id);
  pool.ids.reserve(config.pool_size);
  for (int i = 1; i <= config.pool_size; ++i)
    pool.ids.push_back(private_id(config, i));
  return pool;
}

Bytes encode_adv(const Advertisement& adv) {
  Bytes out(14);
  out[0] = adv.op_mode;
  std::copy(adv.private_id.begin(), adv.private_id.end(), out.begin() + 1);
  out[13] = adv.flags;
  return out;
}

Advertisement decode_adv(BytesView payload) {
  if (payload.size() != 14)
    throw CodecError("lost-mode payload must be 14 bytes, got " +
                     std::to_string(payload.size()));
  Advertisement adv;
  adv.op_mode = payload[0];
  std::copy(payload.begin() + 1, payload.begin() + 13, adv.private_id.begin());
  adv.flags = payload[13];
  return adv;
}

std::optional<PoolMatch> match(const Advertisement& adv,
                               const std::vector<Pool>& pools) {
  std::optional<PoolMatch> hit;
  for (const Pool& pool : pools) {
    for (const PrivateId& id : pool.ids) {
      if (id.bytes == adv.private_id) {
        if (hit && hit->device_id != pool.device_id)
          throw AmbiguousMatch("private id present in pools of " +
                               hit->device_id + " and " + pool.device_id);
        if (!hit) hit = PoolMatch{pool.device_id, id.index};
      }
    }
  }
  return hit;
}

}  // namespace ofkit::fmm
