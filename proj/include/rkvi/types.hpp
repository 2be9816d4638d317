#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rkvi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Covectors (multipliers, DL) are stored as column vectors; a row-vector
// product lambda * B is written B.transpose() * lambda throughout.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rank-deficient coupling or a top block that is degenerate on ker(G).
class SingularSystem : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, int iterations, double last_residual)
      : Error(what), iterations_(iterations), last_residual_(last_residual) {}
  int iterations() const { return iterations_; }
  double last_residual() const { return last_residual_; }

 private:
  int iterations_;
  double last_residual_;
};

/// A splitting sub-basis did not have the expected dimension N - d.
class RankLoss : public Error {
 public:
  using Error::Error;
};

class GeneratorNotTangent : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value; key() names the offending setting.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

inline void require_size(const Vec& v, Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(n) +
                            ", got " + std::to_string(v.size()));
  }
}

}  // namespace rkvi
