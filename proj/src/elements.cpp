#include "fibsim/elements.hpp"

#include <array>
#include <stdexcept>

namespace fibsim {

namespace {
// Standard atomic weights, IUPAC 2021 abridged.
constexpr int kNumElements = 18;
const std::array<Element, kNumElements> kTable = {{
    {"H", 1, 1.008},    {"He", 2, 4.0026},  {"B", 5, 10.81},
    {"C", 6, 12.011},   {"N", 7, 14.007},   {"O", 8, 15.999},
    {"Al", 13, 26.982}, {"Si", 14, 28.085}, {"P", 15, 30.974},
    {"Fe", 26, 55.845}, {"Cu", 29, 63.546}, {"Ga", 31, 69.723},
    {"Ce", 58, 140.116},{"Lu", 71, 174.967},{"Ta", 73, 180.948},
    {"W", 74, 183.84},  {"Pt", 78, 195.084},{"Bi", 83, 208.980},
}};
}  // namespace

const Element& element(const std::string& symbol) {
  for (const auto& e : kTable)
    if (e.symbol == symbol) return e;
  throw std::invalid_argument("unknown element symbol: " + symbol);
}

}  // namespace fibsim
