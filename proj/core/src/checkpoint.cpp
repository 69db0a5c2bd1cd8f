#include "rsad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "rsad/errors.hpp"
#include "rsad/io.hpp"

namespace rsad {

namespace fs = std::filesystem;

static constexpr char kMagic[8] = {'R', 'S', 'A', 'D', 'C', 'K', '0', '1'};

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void expect(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint truncated");
  }
  std::uint64_t u64() {
    expect(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]))
           << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    expect(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, ckpt.meta.size());
  for (const auto& [key, value] : ckpt.meta) {
    put_string(out, key);
    put_string(out, value);
  }
  put_u64(out, ckpt.arrays.size());
  for (const auto& [name, tensor] : ckpt.arrays) {
    put_string(out, name);
    put_u64(out, static_cast<std::uint64_t>(tensor.ndim()));
    for (int d = 0; d < tensor.ndim(); ++d)
      put_u64(out, static_cast<std::uint64_t>(tensor.dim(d)));
    std::size_t bytes = static_cast<std::size_t>(tensor.size()) * sizeof(float);
    put_u64(out, bytes);
    std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, tensor.data(), bytes);
  }
  atomic_write_file(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(out.data()),
                              out.size()));
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::string buf = read_text(path);
  if (buf.size() < sizeof(kMagic) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  Reader r{buf, sizeof(kMagic)};

  Checkpoint ckpt;
  std::uint64_t n_meta = r.u64();
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string key = r.str();
    ckpt.meta[key] = r.str();
  }
  std::uint64_t n_arrays = r.u64();
  for (std::uint64_t i = 0; i < n_arrays; ++i) {
    std::string name = r.str();
    std::uint64_t ndim = r.u64();
    std::vector<std::int64_t> shape;
    for (std::uint64_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::int64_t>(r.u64()));
    std::uint64_t bytes = r.u64();
    TensorF tensor(shape);
    if (bytes != static_cast<std::uint64_t>(tensor.size()) * sizeof(float))
      throw IoError("checkpoint array size mismatch for " + name);
    r.expect(bytes);
    std::memcpy(tensor.data(), buf.data() + r.pos, bytes);
    r.pos += bytes;
    ckpt.arrays.emplace(std::move(name), std::move(tensor));
  }
  return ckpt;
}

void pack_module(nn::Module<float>& module, const std::string& prefix,
                 Checkpoint& ckpt) {
  std::vector<nn::NamedParam<float>> params;
  module.collect_params(prefix, params);
  for (auto& np : params) ckpt.arrays[np.name] = np.param->value;
  std::vector<nn::NamedBuffer<float>> buffers;
  module.collect_buffers(prefix, buffers);
  for (auto& nb : buffers) ckpt.arrays[nb.name] = *nb.tensor;
}

void unpack_module(nn::Module<float>& module, const std::string& prefix,
                   const Checkpoint& ckpt) {
  auto restore = [&](const std::string& name, TensorF& dst) {
    auto it = ckpt.arrays.find(name);
    if (it == ckpt.arrays.end())
      throw IoError("checkpoint missing array: " + name);
    if (it->second.shape() != dst.shape())
      throw IoError("checkpoint shape mismatch for " + name);
    dst = it->second;
  };
  std::vector<nn::NamedParam<float>> params;
  module.collect_params(prefix, params);
  for (auto& np : params) restore(np.name, np.param->value);
  std::vector<nn::NamedBuffer<float>> buffers;
  module.collect_buffers(prefix, buffers);
  for (auto& nb : buffers) restore(nb.name, *nb.tensor);
}

}  // namespace rsad
