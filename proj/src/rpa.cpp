#include "ofkit/rpa.hpp"

#include "ofkit/aes.hpp"

namespace ofkit {

Mac48 Mac48::from_hex(std::string_view hex) {
  std::string compact;
  compact.reserve(12);
  for (char c : hex)
    if (c != ':' && c != '-') compact.push_back(c);
  return Mac48{array_from_hex<6>(compact)};
}

std::string Mac48::display() const {
  std::string out;
  for (std::size_t i = 0; i < 6; ++i) {
    if (i) out.push_back(':');
    out += to_hex(BytesView(bytes.data() + i, 1));
  }
  return out;
}

std::uint64_t Mac48::to_u48() const {
  std::uint64_t v = 0;
  for (auto b : bytes) v = (v << 8) | b;
  return v;
}

Mac48 Mac48::from_u48(std::uint64_t v) {
  Mac48 m;
  for (int i = 5; i >= 0; --i) {
    m.bytes[i] = static_cast<std::uint8_t>(v & 0xff);
    v >>= 8;
  }
  return m;
}

RpaHash rpa_hash(const Irk& irk, const Prand& prand) {
  Aes128 aes(irk.bytes);
  Aes128::Block r{};  // 13 zero bytes, then prand
  r[13] = prand[0];
  r[14] = prand[1];
  r[15] = prand[2];
  Aes128::Block ct = aes.encrypt_block(r);
  return RpaHash{ct[13], ct[14], ct[15]};
}

Mac48 rpa_generate(const Irk& irk, const Prand& prand) {
  RpaHash h = rpa_hash(irk, prand);
  Mac48 addr;
  addr.bytes = {prand[0], prand[1], prand[2], h[0], h[1], h[2]};
  return addr;
}

bool rpa_resolve(const Irk& irk, const Mac48& addr) {
  Prand prand{addr.bytes[0], addr.bytes[1], addr.bytes[2]};
  RpaHash h = rpa_hash(irk, prand);
  return h[0] == addr.bytes[3] && h[1] == addr.bytes[4] && h[2] == addr.bytes[5];
}

}  // namespace ofkit
