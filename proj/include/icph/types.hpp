#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "icph/errors.hpp"

namespace icph {

enum class Model { IID, HMM };
enum class Method { EM, NLM };
enum class Variance { LowerBound, Equal };

inline constexpr double kDefaultLowerBound = 1e-4;
// EM-style legacy bound; selectable through RegressionParams::lower_bound.
inline constexpr double kLegacyLowerBound = 1e-16;

inline std::string to_string(Model m) { return m == Model::IID ? "IID" : "HMM"; }
inline std::string to_string(Method m) { return m == Method::EM ? "EM" : "NLM"; }
inline std::string to_string(Variance v) {
  return v == Variance::LowerBound ? "lower-bound" : "equality";
}

/// Per-state regression coefficients and error variances of a switching
/// regression model. Intercepts, when used, are realized as the coefficient
/// of an appended constant predictor column, so `num_predictors` counts that
/// column too.
struct RegressionParams {
  Eigen::MatrixXd betas;      // p x l, column j holds state j's coefficients
  Eigen::VectorXd variances;  // length l under LowerBound, length 1 under Equal
  Variance constraint = Variance::LowerBound;
  double lower_bound = kDefaultLowerBound;  // the constant c of the bound

  int num_states() const { return static_cast<int>(betas.cols()); }
  int num_predictors() const { return static_cast<int>(betas.rows()); }

  double variance(int state) const {
    return constraint == Variance::Equal ? variances(0) : variances(state);
  }

  /// Length of the free parameter vector theta.
  int dim() const {
    const int l = num_states();
    return num_predictors() * l + (constraint == Variance::Equal ? 1 : l);
  }

  void validate() const {
    const int l = num_states();
    if (l < 1) throw DimensionMismatch("RegressionParams: need at least one state");
    const int want = constraint == Variance::Equal ? 1 : l;
    if (variances.size() != want) {
      throw DimensionMismatch("RegressionParams: variance vector has length " +
                              std::to_string(variances.size()) + ", expected " +
                              std::to_string(want));
    }
    for (int j = 0; j < static_cast<int>(variances.size()); ++j) {
      if (!(variances(j) > 0.0)) {
        throw DomainError("RegressionParams: variances must be positive");
      }
      if (constraint == Variance::LowerBound && variances(j) < lower_bound) {
        throw DomainError("RegressionParams: variance below the lower bound");
      }
    }
  }
};

/// Parameters of the latent-state transition matrix. The IID flavor stores
/// the l-1 free entries of the state distribution (the induced matrix has
/// constant columns); the HMM flavor stores l rows of l-1 free entries each,
/// row-major.
struct TransitionParams {
  Model flavor = Model::IID;
  int num_states = 1;
  Eigen::VectorXd gamma;

  int dim() const { return static_cast<int>(gamma.size()); }

  static int expected_dim(Model flavor, int num_states) {
    return flavor == Model::IID ? num_states - 1 : num_states * (num_states - 1);
  }

  void validate() const {
    if (num_states < 1) throw DimensionMismatch("TransitionParams: need l >= 1");
    if (gamma.size() != expected_dim(flavor, num_states)) {
      throw DimensionMismatch("TransitionParams: gamma has length " +
                              std::to_string(gamma.size()) + ", expected " +
                              std::to_string(expected_dim(flavor, num_states)));
    }
  }

  /// The induced l x l row-stochastic matrix.
  Eigen::MatrixXd matrix() const {
    validate();
    const int l = num_states;
    Eigen::MatrixXd g(l, l);
    if (flavor == Model::IID) {
      double rest = 1.0;
      for (int j = 0; j + 1 < l; ++j) {
        g.col(j).setConstant(gamma(j));
        rest -= gamma(j);
      }
      g.col(l - 1).setConstant(rest);
    } else {
      for (int i = 0; i < l; ++i) {
        double rest = 1.0;
        for (int j = 0; j + 1 < l; ++j) {
          g(i, j) = gamma(i * (l - 1) + j);
          rest -= g(i, j);
        }
        g(i, l - 1) = rest;
      }
    }
    return g;
  }

  /// Re-extracts the free parameters from a row-stochastic matrix.
  static TransitionParams from_matrix(Model flavor, const Eigen::MatrixXd& g) {
    const int l = static_cast<int>(g.rows());
    TransitionParams out;
    out.flavor = flavor;
    out.num_states = l;
    out.gamma.resize(expected_dim(flavor, l));
    if (flavor == Model::IID) {
      for (int j = 0; j + 1 < l; ++j) out.gamma(j) = g(0, j);
    } else {
      for (int i = 0; i < l; ++i) {
        for (int j = 0; j + 1 < l; ++j) out.gamma(i * (l - 1) + j) = g(i, j);
      }
    }
    return out;
  }
};

/// Response, predictor matrix and environment labels. Environment labels are
/// 1-based and partition the rows; the latent path is never part of a
/// Dataset.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;        // n x d
  std::vector<int> env;     // values in 1..num_environments()

  int num_rows() const { return static_cast<int>(y.size()); }
  int num_predictors() const { return static_cast<int>(x.cols()); }

  int num_environments() const {
    int k = 0;
    for (int e : env) k = std::max(k, e);
    return k;
  }

  void validate() const {
    const int n = num_rows();
    if (n < 1) throw DimensionMismatch("Dataset: empty response");
    if (x.rows() != n || static_cast<int>(env.size()) != n) {
      throw DimensionMismatch("Dataset: y, x and env must have equal length");
    }
    if (!y.allFinite() || !x.allFinite()) {
      throw NonNumericValue("Dataset: non-finite value in y or x");
    }
    const int k = num_environments();
    std::vector<int> counts(k, 0);
    for (int e : env) {
      if (e < 1 || e > k) throw EmptyEnvironment("Dataset: environment labels must be 1..K");
      ++counts[e - 1];
    }
    for (int e = 0; e < k; ++e) {
      if (counts[e] == 0) {
        throw EmptyEnvironment("Dataset: environment " + std::to_string(e + 1) + " is empty");
      }
    }
  }

  /// Rows belonging to environment e, in their original order.
  Dataset restrict_env(int e) const {
    std::vector<int> idx;
    for (int t = 0; t < num_rows(); ++t) {
      if (env[t] == e) idx.push_back(t);
    }
    if (idx.empty()) throw EmptyEnvironment("Dataset: environment " + std::to_string(e) + " is empty");
    Dataset out;
    out.y.resize(idx.size());
    out.x.resize(idx.size(), x.cols());
    out.env.assign(idx.size(), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.y(i) = y(idx[i]);
      out.x.row(i) = x.row(idx[i]);
    }
    return out;
  }
};

/// Design matrix for a predictor subset: the selected columns of x in the
/// order given, with a constant column appended when requested. An empty
/// subset without intercept yields the bare constant column, so that the
/// empty set can always be fit as a pure mixture.
inline Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& x,
                                     const std::vector<int>& subset,
                                     bool intercept) {
  const int n = static_cast<int>(x.rows());
  const bool constant = intercept || subset.empty();
  Eigen::MatrixXd design(n, static_cast<int>(subset.size()) + (constant ? 1 : 0));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (subset[j] < 0 || subset[j] >= x.cols()) {
      throw DimensionMismatch("design_matrix: predictor index out of range");
    }
    design.col(j) = x.col(subset[j]);
  }
  if (constant) design.col(design.cols() - 1).setOnes();
  return design;
}

// --- Flat parameter vector phi = (theta, gamma) ---
//
// Packing order (fixed contract): state-major coefficient blocks
// beta_1, ..., beta_l, then the variance block (l entries under LowerBound,
// a single shared entry under Equal), then gamma.

inline int phi_dim(const RegressionParams& theta, const TransitionParams& gamma) {
  return theta.dim() + gamma.dim();
}

inline Eigen::VectorXd pack_theta(const RegressionParams& theta) {
  Eigen::VectorXd out(theta.dim());
  int at = 0;
  for (int j = 0; j < theta.num_states(); ++j) {
    out.segment(at, theta.num_predictors()) = theta.betas.col(j);
    at += theta.num_predictors();
  }
  out.segment(at, theta.variances.size()) = theta.variances;
  return out;
}

inline Eigen::VectorXd pack_phi(const RegressionParams& theta,
                                const TransitionParams& gamma) {
  Eigen::VectorXd out(phi_dim(theta, gamma));
  out.head(theta.dim()) = pack_theta(theta);
  out.tail(gamma.dim()) = gamma.gamma;
  return out;
}

/// Inverse of pack_phi. The exemplars supply the structural information
/// (dimensions, constraint, flavor); their numeric entries are replaced.
inline std::pair<RegressionParams, TransitionParams> unpack_phi(
    const Eigen::VectorXd& phi, const RegressionParams& theta_like,
    const TransitionParams& gamma_like) {
  if (phi.size() != phi_dim(theta_like, gamma_like)) {
    throw DimensionMismatch("unpack_phi: vector length does not match structure");
  }
  RegressionParams theta = theta_like;
  TransitionParams gamma = gamma_like;
  int at = 0;
  for (int j = 0; j < theta.num_states(); ++j) {
    theta.betas.col(j) = phi.segment(at, theta.num_predictors());
    at += theta.num_predictors();
  }
  theta.variances = phi.segment(at, theta.variances.size());
  at += static_cast<int>(theta.variances.size());
  gamma.gamma = phi.segment(at, gamma.dim());
  return {theta, gamma};
}

}  // namespace icph
