#include "gpcm/generating_bank.hpp"

#include "gpcm/errors.hpp"

namespace gpcm {

namespace {

ItemBank build_bank() {
  // 20 five-category items: discrimination then the four transition
  // locations d2..d5.
  constexpr double raw[20][5] = {
      {1.476, -1.726, -0.145, -0.849, 1.765},
      {1.202, -1.285, 0.248, 0.868, 1.433},
      {1.390, -1.109, -0.099, -0.257, 1.196},
      {0.880, -1.855, -0.105, 0.526, 1.271},
      {1.047, -2.198, 0.274, 1.038, 2.126},
      {1.256, -1.059, -0.542, 0.716, 1.858},
      {1.090, -1.326, -0.351, 0.669, 1.305},
      {0.996, -1.895, -1.475, 0.288, 1.392},
      {0.985, -0.707, -0.949, 0.369, 1.296},
      {0.983, -1.793, -0.567, 0.517, 1.571},
      {1.150, -1.972, -0.198, 0.092, 1.169},
      {1.291, -1.503, -0.648, 0.863, 2.453},
      {1.530, -1.447, -0.623, 0.900, 1.557},
      {0.906, -2.284, -0.201, 0.903, 1.623},
      {1.213, -1.385, -0.486, 0.632, 1.224},
      {0.803, -1.494, -0.859, 0.923, 1.546},
      {0.773, -1.009, -0.518, -0.438, 1.309},
      {0.933, -1.140, -0.310, 1.691, 1.721},
      {1.408, -1.459, -0.471, 0.736, 0.832},
      {1.044, -1.709, -0.454, -0.320, 1.149},
  };
  ItemBank bank;
  bank.items.resize(20);
  for (int j = 0; j < 20; ++j) {
    bank.items[j].discrimination = raw[j][0];
    bank.items[j].steps = {raw[j][1], raw[j][2], raw[j][3], raw[j][4]};
  }
  bank.validate();
  return bank;
}

}  // namespace

const ItemBank& generating_bank() {
  static const ItemBank bank = build_bank();
  return bank;
}

ItemBank generating_bank_prefix(int test_length) {
  const ItemBank& full = generating_bank();
  if (test_length < 1 || test_length > full.n_items())
    throw invalid_input_error("test length must be between 1 and " +
                              std::to_string(full.n_items()));
  ItemBank out;
  out.items.assign(full.items.begin(), full.items.begin() + test_length);
  return out;
}

}  // namespace gpcm
