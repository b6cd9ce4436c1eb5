#pragma once

#include <stdexcept>
#include <string>

namespace tglab {

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent model, schema, threshold or option values.
class config_error : public error {
 public:
  using error::error;
};

class invalid_size : public error {
 public:
  using error::error;
};

/// Edge mask references an edge that is not in the base graph.
class invalid_mask : public error {
 public:
  using error::error;
};

/// Perturbation set violates the invariants of its class.
class invalid_set : public error {
 public:
  using error::error;
};

/// Two objects that cannot be compared (different node counts, classes).
class incomparable : public error {
 public:
  using error::error;
};

class empty_evidence : public error {
 public:
  using error::error;
};

class unsupported_variant : public error {
 public:
  using error::error;
};

/// A black-box query outside what the oracle's perturbation class allows.
class access_violation : public error {
 public:
  using error::error;
};

}  // namespace tglab
