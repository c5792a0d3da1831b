// Writes the two-feature housing-style CSV used by the regression example
// configs. The file is generated deterministically; see
// fldp::synthesize_housing for the construction.

#include <iostream>
#include <string>

#include "fldp/dataset.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::cerr << "usage: gen_housing <output.csv> [seed]\n";
    return 1;
  }
  const std::uint64_t seed = argc == 3 ? std::stoull(argv[2]) : 99;
  const fldp::LabeledDataset ds = fldp::synthesize_housing(20640, seed);
  fldp::write_csv(argv[1], ds, "median_house_value");
  std::cout << "wrote " << ds.rows() << " rows to " << argv[1] << "\n";
  return 0;
}
