#include "ifo/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace ifo {
namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Cursor {
  const unsigned char* p;
  size_t n;
  size_t off = 0;

  void need(size_t k, const char* what) {
    if (off + k > n) throw IoError(std::string("checkpoint truncated reading ") + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[off + i]) << (8 * i);
    off += 8;
    return v;
  }
};

}  // namespace

void Checkpoint::add(const std::string& name, const Shape& shape,
                     const std::vector<float>& data) {
  check_dim(numel(shape) == static_cast<int64_t>(data.size()),
            "checkpoint entry '" + name + "': shape/data mismatch");
  check_value(!entries_.count(name), "checkpoint entry '" + name + "' duplicated");
  entries_[name] = Entry{shape, data};
}

void Checkpoint::add_registry(const ParamRegistry& reg) {
  for (const auto& [name, t] : reg.params) add(name, t.shape(), t.data());
  for (const auto& [name, buf] : reg.buffers)
    add(name, {static_cast<int>(buf->size())}, *buf);
}

const Checkpoint::Entry& Checkpoint::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw IoError("checkpoint entry '" + name + "' not found");
  return it->second;
}

void Checkpoint::restore_registry(const ParamRegistry& reg) const {
  for (const auto& [name, t] : reg.params) {
    const Entry& e = get(name);
    check_dim(e.shape == t.shape(), "checkpoint entry '" + name +
                                        "': shape " + shape_str(e.shape) +
                                        " does not match " + shape_str(t.shape()));
    const_cast<TensorT<float>&>(t).data() = e.data;
  }
  for (const auto& [name, buf] : reg.buffers) {
    const Entry& e = get(name);
    check_dim(e.data.size() == buf->size(),
              "checkpoint buffer '" + name + "': size mismatch");
    *buf = e.data;
  }
}

void Checkpoint::save(const std::string& path) const {
  std::string header;
  header += "IFOC";
  put_u32(header, 1);
  put_u32(header, static_cast<uint32_t>(entries_.size()));

  std::string payload;
  uint64_t offset = 0;
  for (const auto& [name, e] : entries_) {
    put_u32(header, static_cast<uint32_t>(name.size()));
    header += name;
    put_u32(header, static_cast<uint32_t>(e.shape.size()));
    for (int d : e.shape) put_u32(header, static_cast<uint32_t>(d));
    put_u64(header, offset);
    const size_t bytes = e.data.size() * sizeof(float);
    const size_t pos = payload.size();
    payload.resize(pos + bytes);
    for (size_t i = 0; i < e.data.size(); ++i) {
      uint32_t bits;
      std::memcpy(&bits, &e.data[i], 4);
      for (int k = 0; k < 4; ++k)
        payload[pos + 4 * i + k] = static_cast<char>((bits >> (8 * k)) & 0xff);
    }
    offset += bytes;
  }
  put_u64(header, offset);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed for checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  Cursor cur{reinterpret_cast<const unsigned char*>(raw.data()), raw.size()};

  cur.need(4, "magic");
  if (std::memcmp(raw.data(), "IFOC", 4) != 0)
    throw IoError("bad checkpoint magic in " + path);
  cur.off = 4;
  const uint32_t version = cur.u32("version");
  if (version != 1)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const uint32_t count = cur.u32("entry count");

  struct Pending {
    std::string name;
    Shape shape;
    uint64_t offset;
  };
  std::vector<Pending> pending;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = cur.u32("name length");
    cur.need(name_len, "name");
    std::string name(raw.data() + cur.off, name_len);
    cur.off += name_len;
    const uint32_t ndim = cur.u32("ndim");
    Shape shape;
    for (uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<int>(cur.u32("dim")));
    const uint64_t off = cur.u64("offset");
    pending.push_back({std::move(name), std::move(shape), off});
  }
  const uint64_t payload_size = cur.u64("payload size");
  cur.need(payload_size, "payload");
  const size_t payload_start = cur.off;

  Checkpoint ck;
  for (auto& p : pending) {
    const size_t n = static_cast<size_t>(numel(p.shape));
    if (p.offset + n * 4 > payload_size)
      throw IoError("checkpoint entry '" + p.name + "' exceeds payload");
    std::vector<float> data(n);
    const unsigned char* src =
        cur.p + payload_start + static_cast<size_t>(p.offset);
    for (size_t i = 0; i < n; ++i) {
      uint32_t bits = 0;
      for (int k = 0; k < 4; ++k)
        bits |= static_cast<uint32_t>(src[4 * i + k]) << (8 * k);
      std::memcpy(&data[i], &bits, 4);
    }
    ck.add(p.name, p.shape, data);
  }
  return ck;
}

}  // namespace ifo
