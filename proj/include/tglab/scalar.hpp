#pragma once

#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace tglab {

/// Exact rational scalar for audit runs.
using exact_rational = boost::multiprecision::cpp_rational;

template <class S>
inline S relu(const S& x) {
  return x > S(0) ? x : S(0);
}

template <class S>
inline S from_double(double x) {
  return S(x);  // binary doubles convert exactly to rationals
}

template <class S>
inline double to_double(const S& x) {
  if constexpr (std::is_same_v<S, double>)
    return x;
  else
    return x.template convert_to<double>();
}

}  // namespace tglab
