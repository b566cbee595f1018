#ifndef IFO_COMMON_HPP_
#define IFO_COMMON_HPP_

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifo {

// Error taxonomy used across the library. All are runtime errors so callers
// can catch the base type at the CLI boundary.
struct DimError : std::runtime_error {
  explicit DimError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ValueError : std::runtime_error {
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline void check_dim(bool cond, const std::string& msg) {
  if (!cond) throw DimError(msg);
}
inline void check_value(bool cond, const std::string& msg) {
  if (!cond) throw ValueError(msg);
}
inline void check_contract(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace ifo

#endif  // IFO_COMMON_HPP_
