#ifndef IFO_CHECKPOINT_HPP_
#define IFO_CHECKPOINT_HPP_

#include <map>
#include <string>
#include <vector>

#include "ifo/common.hpp"
#include "ifo/nn.hpp"
#include "ifo/tensor.hpp"

namespace ifo {

// Binary parameter container, format version 1. Layout (all integers
// little-endian, see docs/formats.md):
//   bytes 0..3   magic "IFOC"
//   u32          format version (1)
//   u32          entry count E
//   E records:   u32 name length | name bytes | u32 ndim | u32 dims[ndim]
//                | u64 byte offset into payload
//   u64          payload byte size
//   payload      raw little-endian float32 arrays
// Round-trip save/load is bitwise lossless.
class Checkpoint {
 public:
  struct Entry {
    Shape shape;
    std::vector<float> data;
  };

  void add(const std::string& name, const Shape& shape,
           const std::vector<float>& data);
  void add_registry(const ParamRegistry& reg);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  const Entry& get(const std::string& name) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  // Copies values back into every param/buffer of the registry; throws
  // IoError on missing entries and DimError on shape mismatch.
  void restore_registry(const ParamRegistry& reg) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace ifo

#endif  // IFO_CHECKPOINT_HPP_
