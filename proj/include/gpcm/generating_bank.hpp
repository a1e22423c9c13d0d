#pragma once

#include "gpcm/types.hpp"

namespace gpcm {

// The built-in 20-item five-category generating bank used by the recovery
// harness.  Column labels in the item-parameter file format are b2..b5,
// i.e. the transition locations d_2..d_5 (d_1 is identically zero).
const ItemBank& generating_bank();

// First `test_length` items of the generating bank.
ItemBank generating_bank_prefix(int test_length);

}  // namespace gpcm
