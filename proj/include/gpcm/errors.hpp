#pragma once

#include <stdexcept>
#include <string>

namespace gpcm {

// Bad arguments to a numerical routine (non-finite values, dimension
// mismatches, invalid parameter ranges).
class invalid_input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed data file; coordinates are 1-based, row 0 = header.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& msg, long row, long col)
      : std::runtime_error(msg + " (row " + std::to_string(row) + ", col " +
                           std::to_string(col) + ")"),
        row(row),
        col(col) {}
  long row;
  long col;
};

// An item whose responses all fall in a single category; index is 1-based.
class degenerate_item_error : public std::runtime_error {
 public:
  explicit degenerate_item_error(int item)
      : std::runtime_error("item " + std::to_string(item) +
                           " is degenerate: all responses in one category"),
        item(item) {}
  int item;
};

// MCMC retries exhausted without all PSRF values under the cutoff.
class nonconvergence_error : public std::runtime_error {
 public:
  nonconvergence_error(double worst_psrf, const std::string& parameter,
                       int retries)
      : std::runtime_error("MCMC did not converge after " +
                           std::to_string(retries) + " retries; worst PSRF " +
                           std::to_string(worst_psrf) + " for " + parameter),
        worst_psrf(worst_psrf),
        parameter(parameter) {}
  double worst_psrf;
  std::string parameter;
};

// A chain produced zero within-chain variance; PSRF is undefined.
class stuck_chain_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested moments outside the feasible region of the cubic transform.
class infeasible_target_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An inner solver failed in a way retries could not repair (e.g. a
// Hessian that stays singular after ridge regularization).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpcm
