#pragma once

// Exact information quantities on small discrete distributions, in nats.

#include <cstddef>
#include <span>
#include <vector>

namespace ibiumad::info {

using Distribution = std::vector<double>;
/// Row-stochastic matrix: rows[i][j] = P(j | i).
using Conditional = std::vector<std::vector<double>>;

/// p(a, b) as a row-major |A|×|B| table.
struct Joint2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> p;

  double at(std::size_t a, std::size_t b) const { return p[a * cols + b]; }
};

/// p(f, g, y) as a row-major |F|×|G|×|Y| table.
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t nf, std::size_t ng, std::size_t ny, std::vector<double> p);

  std::size_t nf() const { return nf_; }
  std::size_t ng() const { return ng_; }
  std::size_t ny() const { return ny_; }
  double at(std::size_t f, std::size_t g, std::size_t y) const { return p_[(f * ng_ + g) * ny_ + y]; }

  Joint2 fg() const;
  Joint2 fy() const;
  Joint2 gy() const;
  Distribution y() const;

 private:
  std::size_t nf_, ng_, ny_;
  std::vector<double> p_;
};

/// Total map F-index → G-index.
struct DeterministicChannel {
  std::vector<std::size_t> g_of_f;
  std::size_t g_size = 0;

  /// Accepts a row-stochastic matrix only if every row is one-hot.
  /// Throws PreconditionError otherwise.
  static DeterministicChannel from_matrix(const Conditional& p_g_given_f);
};

double entropy(std::span<const double> p);
double mutual_information(const Joint2& joint);
/// I(F;G|Y) = Σ_y p(y) I(F;G | Y=y).
double conditional_mi(const DiscreteJoint& joint);

/// p(f)·p(y|f)·1[g = g(f)].
DiscreteJoint markov_joint(const Distribution& p_f, const DeterministicChannel& channel, const Conditional& p_y_given_f);

struct ChainRuleCheck {
  double i_fg = 0;          // I(F;G)
  double i_fg_given_y = 0;  // I(F;G|Y)
  double i_gy = 0;          // I(G;Y)
  double residual = 0;      // |I(F;G) - I(F;G|Y) - I(G;Y)|
};

/// The chain-rule split for an arbitrary joint (may be nonzero when G is not
/// a function of F).
ChainRuleCheck chain_rule_residual(const DiscreteJoint& joint);

ChainRuleCheck verify_corollary1(const Distribution& p_f, const DeterministicChannel& channel,
                                 const Conditional& p_y_given_f);
/// Same, from a channel matrix; rejects non-deterministic channels.
ChainRuleCheck verify_corollary1(const Distribution& p_f, const Conditional& channel_matrix,
                                 const Conditional& p_y_given_f);

struct PredictiveGap {
  double kl_max = 0;  // max over supported f of KL(P(Y|f) || P(Y|g(f)))
  double mi_gap = 0;  // I(Y;F) - I(Y;G)
};

PredictiveGap verify_corollary2(const Distribution& p_f, const Conditional& p_y_given_f,
                                const DeterministicChannel& channel);

}  // namespace ibiumad::info
