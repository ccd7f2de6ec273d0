#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "ilbsde/error.hpp"

// Asserts that `expr` throws ilbsde::Error of the given kind.
#define REQUIRE_ERROR_KIND(expr, error_kind)                                         \
  do {                                                                              \
    bool thrown_ = false;                                                           \
    try {                                                                           \
      (void)(expr);                                                                 \
    } catch (const ::ilbsde::Error& e_) {                                           \
      thrown_ = true;                                                               \
      INFO("error message: " << e_.what());                                         \
      REQUIRE(e_.kind() == (error_kind));                                           \
    }                                                                               \
    if (!thrown_) FAIL("expected ilbsde::Error of kind " << ::ilbsde::to_string(error_kind)); \
  } while (false)

namespace oracle {

// Extended-precision reference for IL_{n,k}^lambda(x), written from the
// definition without sharing any code with the library.
inline long double il(int n, long double lambda, long double k, long double x) {
  long double u = k + x;
  long double prod = 1.0L;
  for (int i = 1; i <= n; ++i) {
    u = std::log(u);
    if (i < n) prod *= std::sqrt(u);
  }
  return lambda == 0.0L ? prod : prod * std::pow(u, lambda);
}

inline long double tower(int n) {
  long double t = std::exp(1.0L);
  for (int i = 1; i < n; ++i) t = std::exp(t);
  return t;
}

}  // namespace oracle
