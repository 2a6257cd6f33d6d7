#include "dlen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dlen {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("checkpoint: " + msg + " at byte offset " + std::to_string(pos_));
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(DlenModel<T>& model) {
  Writer w;
  const auto& c = model.config;
  w.raw("DLEN");
  w.u32(kCheckpointVersion);
  w.u32(c.width);
  w.u32(c.seb_width);
  for (auto v : c.ilb_blocks) w.u32(v);
  for (auto v : c.ilb_heads) w.u32(v);
  for (auto v : c.seb_blocks) w.u32(v);
  for (auto v : c.seb_heads) w.u32(v);
  w.u32(c.refine_blocks);
  w.u32(c.ffn_expansion);
  w.u32(c.use_lwn);
  w.u32(c.use_seab);
  w.u32(c.train_height);
  w.u32(c.train_width);
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto e : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (T v : p.tensor.data()) w.f32(static_cast<float>(v));
  }
  return std::move(w.bytes);
}

template <typename T>
DlenModel<T> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DLEN", 4) != 0) {
    throw FormatError("checkpoint: bad magic at byte offset 0");
  }
  Reader r(bytes);
  r.raw(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));

  DlenConfig c;
  c.width = r.u32("config");
  c.seb_width = r.u32("config");
  for (auto& v : c.ilb_blocks) v = r.u32("config");
  for (auto& v : c.ilb_heads) v = r.u32("config");
  for (auto& v : c.seb_blocks) v = r.u32("config");
  for (auto& v : c.seb_heads) v = r.u32("config");
  c.refine_blocks = r.u32("config");
  c.ffn_expansion = r.u32("config");
  const auto lwn = r.u32("config"), seab = r.u32("config");
  if (lwn > 1 || seab > 1) r.fail("ablation flags must be 0 or 1");
  c.use_lwn = lwn;
  c.use_seab = seab;
  c.train_height = r.u32("config");
  c.train_width = r.u32("config");
  try {
    c.validate();
  } catch (const ContractError& e) {
    r.fail(std::string("invalid config (") + e.what() + ")");
  }

  DlenModel<T> model(c);
  auto params = model.parameters();
  const std::uint32_t count = r.u32("parameter count");
  if (count != params.size()) {
    r.fail("parameter count " + std::to_string(count) + " does not match config (" +
           std::to_string(params.size()) + ")");
  }
  std::vector<std::vector<T>> values(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::uint32_t len = r.u32("name length");
    if (len > 4096) r.fail("implausible name length");
    const auto name = r.raw(len, "name");
    if (name != params[i].name) r.fail("expected parameter '" + params[i].name + "', found '" + name + "'");
    const std::uint32_t rank = r.u32("rank");
    Shape shape;
    for (std::uint32_t k = 0; k < rank && k < 8; ++k) shape.push_back(r.u32("extent"));
    if (shape != params[i].tensor.shape()) {
      r.fail("parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
             shape_str(params[i].tensor.shape()));
    }
    values[i].resize(shape_numel(shape));
    for (auto& v : values[i]) v = static_cast<T>(r.f32("parameter values"));
  }
  if (!r.done()) r.fail("trailing bytes");
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), params[i].tensor.mutable_data().begin());
  }
  return model;
}

template <typename T>
void save_checkpoint(DlenModel<T>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFoundError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

template <typename T>
DlenModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  return deserialize_checkpoint<T>(bytes);
}

#define DLEN_INSTANTIATE(T)                                                               \
  template std::vector<std::uint8_t> serialize_checkpoint(DlenModel<T>&);                 \
  template DlenModel<T> deserialize_checkpoint(const std::vector<std::uint8_t>&);         \
  template void save_checkpoint(DlenModel<T>&, const std::filesystem::path&);             \
  template DlenModel<T> load_checkpoint(const std::filesystem::path&);

DLEN_INSTANTIATE(float)
DLEN_INSTANTIATE(double)

}  // namespace dlen
