#pragma once

#include <doctest.h>

#include <functional>
#include <initializer_list>

#include "ccplan/error.hpp"
#include "ccplan/linalg.hpp"

namespace testutil {

inline ccplan::Mat diag(std::initializer_list<double> v) {
  ccplan::Vec d(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

inline ccplan::Vec vec(std::initializer_list<double> v) {
  ccplan::Vec d(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) d(i++) = x;
  return d;
}

/// Kind of the ccplan::Error thrown by f; fails the test if nothing is thrown.
inline ccplan::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ccplan::Error& e) {
    return e.kind();
  }
  FAIL("expected ccplan::Error");
  return ccplan::ErrorKind::kInvalidInput;
}

}  // namespace testutil
