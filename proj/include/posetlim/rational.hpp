#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace posetlim {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Scalar conversion used by templated routines that report doubles.
template <class Scalar>
double to_double(const Scalar& x) {
  if constexpr (std::is_arithmetic_v<Scalar>) {
    return static_cast<double>(x);
  } else {
    return x.template convert_to<double>();
  }
}

template <class Scalar>
constexpr bool is_exact_v = !std::is_floating_point_v<Scalar>;

}  // namespace posetlim
