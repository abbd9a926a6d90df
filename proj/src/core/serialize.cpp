#include "core/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace stochflow {

namespace {

constexpr char kMagic[6] = {'I', 'F', 'L', 'O', 'W', '1'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

void put_f64(std::vector<std::uint8_t>& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void raw(void* out, std::size_t n) {
    if (pos_ + n > b_.size()) throw Error(ErrorCode::parse, "model file: truncated");
    std::memcpy(out, b_.data() + pos_, n);
    pos_ += n;
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(byte()) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::uint8_t byte() {
    if (pos_ >= b_.size()) throw Error(ErrorCode::parse, "model file: truncated");
    return b_[pos_++];
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const ImitationModel& m) {
  std::vector<std::uint8_t> b;
  b.insert(b.end(), kMagic, kMagic + 6);
  put_u16(b, kVersion);
  put_u32(b, static_cast<std::uint32_t>(m.dim()));
  put_f64(b, m.dt);
  const bool cycle = m.kind() == LatentKind::cycle;
  b.push_back(cycle ? 1 : 0);
  b.push_back(0);
  b.push_back(0);
  b.push_back(0);
  double eps = cycle ? std::get<LimitCycleSDE>(m.latent).eps : std::get<LinearSDE>(m.latent).eps;
  double delta = cycle ? std::get<LimitCycleSDE>(m.latent).delta_origin : 0.0;
  put_f64(b, eps);
  put_f64(b, delta);
  for (double v : m.normalizer.shift) put_f64(b, v);
  for (double v : m.normalizer.scale) put_f64(b, v);
  auto descs = layer_descs(m.flow);
  put_u32(b, static_cast<std::uint32_t>(descs.size()));
  for (const LayerDesc& d : descs) {
    b.push_back(static_cast<std::uint8_t>(d.kind));
    put_u32(b, d.kind == LayerKind::coupling ? static_cast<std::uint32_t>(d.hidden)
                                             : static_cast<std::uint32_t>(d.householder));
  }
  put_u64(b, m.params.values.size());
  for (double v : m.params.values) put_f64(b, v);
  return b;
}

ImitationModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[6];
  r.raw(magic, 6);
  if (std::memcmp(magic, kMagic, 6) != 0) throw Error(ErrorCode::parse, "model file: bad magic");
  std::uint16_t version = r.u16();
  if (version != kVersion)
    throw Error(ErrorCode::parse, "model file: unsupported version " + std::to_string(version));
  const int dim = static_cast<int>(r.u32());
  if (dim < 1 || dim > 1024) throw Error(ErrorCode::parse, "model file: implausible dim");
  const double dt = r.f64();
  if (!(dt > 0)) throw Error(ErrorCode::parse, "model file: bad dt");
  const std::uint8_t kind = [&] {
    std::uint8_t k[4];
    r.raw(k, 4);
    return k[0];
  }();
  if (kind > 1) throw Error(ErrorCode::parse, "model file: unknown latent kind");
  const double eps = r.f64();
  const double delta = r.f64();

  ImitationModel m;
  m.dt = dt;
  m.normalizer.shift.resize(dim);
  m.normalizer.scale.resize(dim);
  for (int i = 0; i < dim; ++i) m.normalizer.shift[i] = r.f64();
  for (int i = 0; i < dim; ++i) {
    m.normalizer.scale[i] = r.f64();
    if (!(m.normalizer.scale[i] > 0)) throw Error(ErrorCode::parse, "model file: bad normalizer scale");
  }

  const std::uint32_t n_layers = r.u32();
  if (n_layers > 4096) throw Error(ErrorCode::parse, "model file: implausible layer count");
  std::vector<LayerDesc> descs;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    std::uint8_t k[1];
    r.raw(k, 1);
    if (k[0] > 1) throw Error(ErrorCode::parse, "model file: unknown layer kind");
    std::uint32_t arg = r.u32();
    if (k[0] == 0)
      descs.push_back({LayerKind::coupling, static_cast<int>(arg), 0});
    else
      descs.push_back({LayerKind::orthogonal, 0, static_cast<int>(arg)});
  }

  m.flow = make_flow_from_descs(dim, descs, m.params.layout);
  if (kind == 0)
    m.latent = make_linear_sde(dim, eps, m.params.layout, "latent");
  else {
    m.latent = make_limit_cycle_sde(dim, eps, m.params.layout, "latent");
    std::get<LimitCycleSDE>(m.latent).delta_origin = delta;
  }
  m.params.layout.validate();

  const std::uint64_t count = r.u64();
  if (count != m.params.layout.total)
    throw Error(ErrorCode::parse, "model file: parameter count " + std::to_string(count) +
                                      " does not match architecture (" +
                                      std::to_string(m.params.layout.total) + ")");
  m.params.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) m.params.values[i] = r.f64();
  if (!r.done()) throw Error(ErrorCode::parse, "model file: trailing bytes");
  return m;
}

void save_model(const ImitationModel& m, const std::string& path) {
  std::vector<std::uint8_t> b = serialize_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write model file: " + path);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error(ErrorCode::io, "write failed: " + path);
}

ImitationModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open model file: " + path);
  std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(b);
}

}  // namespace stochflow
