#pragma once

#include <stdexcept>
#include <string>

namespace as2 {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: parse_error -> 2, divergence_error -> 3, compat_error -> 4.
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dimension_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

struct index_error : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct integrity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct compat_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace as2
