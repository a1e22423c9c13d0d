#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gpcm/errors.hpp"

namespace gpcm {

using ThetaVector = std::vector<double>;

// One polytomous item: discrimination a > 0 and the m-1 free transition
// locations d_2..d_m on the logit scale (d_1 is identically zero and never
// stored).  Steps need not be ordered.
struct ItemParams {
  double discrimination = 1.0;
  std::vector<double> steps;

  int n_categories() const { return static_cast<int>(steps.size()) + 1; }

  void validate() const {
    if (!std::isfinite(discrimination) || discrimination <= 0.0)
      throw invalid_input_error("item discrimination must be finite and > 0");
    if (steps.empty())
      throw invalid_input_error("item needs at least 2 categories");
    for (double d : steps)
      if (!std::isfinite(d))
        throw invalid_input_error("item step parameter is not finite");
  }
};

struct ItemBank {
  std::vector<ItemParams> items;

  int n_items() const { return static_cast<int>(items.size()); }

  void validate() const {
    if (items.empty()) throw invalid_input_error("item bank is empty");
    for (const auto& it : items) it.validate();
  }
};

// Persons x items category responses, 0-based categories, row-major.
// Category k here corresponds to category k+1 in the usual 1..m convention.
struct ResponseMatrix {
  int n_persons = 0;
  int n_items = 0;
  std::vector<int> responses;  // n_persons * n_items

  ResponseMatrix() = default;
  ResponseMatrix(int n_persons, int n_items)
      : n_persons(n_persons),
        n_items(n_items),
        responses(static_cast<size_t>(n_persons) * n_items, 0) {}

  int operator()(int person, int item) const {
    return responses[static_cast<size_t>(person) * n_items + item];
  }
  int& operator()(int person, int item) {
    return responses[static_cast<size_t>(person) * n_items + item];
  }
  std::span<const int> row(int person) const {
    return {responses.data() + static_cast<size_t>(person) * n_items,
            static_cast<size_t>(n_items)};
  }

  // Every entry must lie in [0, m_j-1] for its item.
  void validate(std::span<const int> m_per_item) const {
    if (static_cast<int>(m_per_item.size()) != n_items)
      throw invalid_input_error("m_per_item length does not match n_items");
    if (responses.size() != static_cast<size_t>(n_persons) * n_items)
      throw invalid_input_error("response storage size mismatch");
    for (int i = 0; i < n_persons; ++i)
      for (int j = 0; j < n_items; ++j) {
        int u = (*this)(i, j);
        if (u < 0 || u >= m_per_item[j])
          throw invalid_input_error(
              "response out of range at person " + std::to_string(i + 1) +
              ", item " + std::to_string(j + 1));
      }
  }
};

inline void validate_thetas(const ThetaVector& thetas) {
  for (double t : thetas)
    if (!std::isfinite(t))
      throw invalid_input_error("theta vector contains a non-finite value");
}

inline std::vector<int> categories_per_item(const ItemBank& bank) {
  std::vector<int> m;
  m.reserve(bank.items.size());
  for (const auto& it : bank.items) m.push_back(it.n_categories());
  return m;
}

}  // namespace gpcm
