#pragma once

#include <stdexcept>

namespace crosscast {

/// Data or artifact problem (bad input file, missing artifact, divergence).
/// Contract violations use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crosscast
