#pragma once
#include <string>

namespace fibsim {

struct Element {
  std::string symbol;
  int z = 0;          // atomic number
  double mass_amu = 0;  // standard atomic weight
};

// Lookup by symbol ("C", "Si", "Ce", ...). Throws std::invalid_argument on
// unknown symbol.
const Element& element(const std::string& symbol);

}  // namespace fibsim
