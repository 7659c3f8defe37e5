#include "scotopic/model_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scotopic {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'N', 'M'};
constexpr uint32_t kVersion = 1;

// Little-endian encoders. The payload is declared little-endian regardless
// of host order.
void put_u8(std::string& b, uint8_t v) { b.push_back(static_cast<char>(v)); }

void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>(v >> (8 * i)));
}

void put_i32(std::string& b, int32_t v) { put_u32(b, static_cast<uint32_t>(v)); }

void put_f64(std::string& b, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>(bits >> (8 * i)));
}

struct Reader {
  const std::string& b;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > b.size()) throw std::runtime_error("model: truncated container");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(b[pos++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

void put_tensor(std::string& b, const Tensor& t) {
  for (double v : t.v) put_f64(b, v);
}

void get_tensor(Reader& r, Tensor& t) {
  for (double& v : t.v) v = r.f64();
}

void put_network(std::string& b, const Network& net) {
  put_u32(b, static_cast<uint32_t>(net.input_shape.size()));
  for (int d : net.input_shape) put_i32(b, d);
  put_u32(b, static_cast<uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    switch (l->kind()) {
      case LayerKind::Dense: {
        const auto* d = static_cast<const Dense*>(l.get());
        put_u8(b, 1);
        put_i32(b, d->in_dim);
        put_i32(b, d->out_dim);
        put_tensor(b, d->W);
        put_tensor(b, d->b);
        break;
      }
      case LayerKind::Conv2D: {
        const auto* c = static_cast<const Conv2D*>(l.get());
        put_u8(b, 2);
        put_i32(b, c->in_c);
        put_i32(b, c->out_c);
        put_i32(b, c->k);
        put_tensor(b, c->W);
        put_tensor(b, c->b);
        break;
      }
      case LayerKind::ReLU:
        put_u8(b, 3);
        break;
      case LayerKind::MaxPool2:
        put_u8(b, 4);
        break;
    }
  }
}

Network get_network(Reader& r) {
  Network net;
  const uint32_t nd = r.u32();
  if (nd == 0 || nd > 4) throw std::runtime_error("model: bad input rank");
  for (uint32_t i = 0; i < nd; ++i) net.input_shape.push_back(r.i32());
  const uint32_t nl = r.u32();
  for (uint32_t i = 0; i < nl; ++i) {
    const uint8_t kind = r.u8();
    switch (kind) {
      case 1: {
        const int in = r.i32(), out = r.i32();
        auto d = std::make_unique<Dense>(in, out);
        get_tensor(r, d->W);
        get_tensor(r, d->b);
        net.layers.push_back(std::move(d));
        break;
      }
      case 2: {
        const int ic = r.i32(), oc = r.i32(), k = r.i32();
        auto c = std::make_unique<Conv2D>(ic, oc, k);
        get_tensor(r, c->W);
        get_tensor(r, c->b);
        net.layers.push_back(std::move(c));
        break;
      }
      case 3:
        net.layers.push_back(std::make_unique<ReLU>());
        break;
      case 4:
        net.layers.push_back(std::make_unique<MaxPool2>());
        break;
      default:
        throw std::runtime_error("model: unknown layer kind");
    }
  }
  return net;
}

std::string header(uint8_t model_kind) {
  std::string b(kMagic, 4);
  put_u32(b, kVersion);
  put_u8(b, 1);  // little-endian payload
  put_u8(b, model_kind);
  return b;
}

Reader open_container(const std::string& bytes, uint8_t expected_kind) {
  Reader r{bytes};
  r.need(10);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("model: bad magic");
  r.pos = 4;
  if (r.u32() != kVersion) throw std::runtime_error("model: unsupported version");
  if (r.u8() != 1) throw std::runtime_error("model: unsupported byte order");
  const uint8_t kind = r.u8();
  if (kind != expected_kind)
    throw std::runtime_error("model: container holds kind " + std::to_string(kind) +
                             ", expected " + std::to_string(expected_kind));
  return r;
}

}  // namespace

std::string adapted_to_bytes(const AdaptedNetwork& net) {
  std::string b = header(1);
  put_network(b, net.core);
  put_u32(b, static_cast<uint32_t>(net.prior_mean.size()));
  put_tensor(b, net.prior_mean);
  put_f64(b, net.prior_strength);
  put_f64(b, net.reference_exposure);
  put_f64(b, net.count_scale);
  return b;
}

AdaptedNetwork adapted_from_bytes(const std::string& bytes) {
  Reader r = open_container(bytes, 1);
  AdaptedNetwork net;
  net.core = get_network(r);
  const uint32_t mu_len = r.u32();
  net.prior_mean = Tensor({static_cast<int>(mu_len)});
  get_tensor(r, net.prior_mean);
  net.prior_strength = r.f64();
  net.reference_exposure = r.f64();
  net.count_scale = r.f64();
  return net;
}

std::string plain_to_bytes(const Network& net) {
  std::string b = header(2);
  put_network(b, net);
  return b;
}

Network plain_from_bytes(const std::string& bytes) {
  Reader r = open_container(bytes, 2);
  return get_network(r);
}

std::string ensemble_to_bytes(const std::vector<Specialist>& members) {
  std::string b = header(3);
  put_u32(b, static_cast<uint32_t>(members.size()));
  for (const auto& m : members) {
    put_f64(b, m.anchor_ppp);
    put_network(b, m.net);
  }
  return b;
}

std::vector<Specialist> ensemble_from_bytes(const std::string& bytes) {
  Reader r = open_container(bytes, 3);
  const uint32_t n = r.u32();
  std::vector<Specialist> out;
  for (uint32_t i = 0; i < n; ++i) {
    Specialist s;
    s.anchor_ppp = r.f64();
    s.net = get_network(r);
    out.push_back(std::move(s));
  }
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << bytes;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int model_kind(const std::string& bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("model: bad magic");
  return static_cast<unsigned char>(bytes[9]);
}

}  // namespace scotopic
