#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace chebsip {

using Vec = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  Inconsistent,
  EmptySet,
  Precondition,
  NonFinite,
  Unsupported,
  SolverFailure,
  Schema,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::NotPositiveDefinite: return "matrix not positive definite";
    case ErrorKind::Inconsistent: return "inconsistent system";
    case ErrorKind::EmptySet: return "empty set";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::Unsupported: return "unsupported form";
    case ErrorKind::SolverFailure: return "solver failure";
    case ErrorKind::Schema: return "schema violation";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* where) {
  if (got != want) {
    throw Error(ErrorKind::DimensionMismatch, std::string(where) + ": got " + std::to_string(got) +
                                                  ", expected " + std::to_string(want));
  }
}

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace chebsip
