#include "ibiumad/info_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ibiumad/errors.hpp"

namespace ibiumad::info {

namespace {

constexpr double kSumTol = 1e-12;

void check_distribution(std::span<const double> p, const char* what) {
  double s = 0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ParameterError(std::string(what) + ": negative or NaN probability");
    s += v;
  }
  if (std::abs(s - 1.0) > kSumTol * std::max<double>(1.0, static_cast<double>(p.size())))
    throw ParameterError(std::string(what) + ": probabilities sum to " + std::to_string(s));
}

void check_conditional(const Conditional& c, std::size_t rows, const char* what) {
  if (c.size() != rows) throw DimensionError(std::string(what) + ": wrong number of rows");
  for (const auto& r : c) {
    if (r.size() != c.front().size()) throw DimensionError(std::string(what) + ": ragged rows");
    check_distribution(r, what);
  }
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::size_t nf, std::size_t ng, std::size_t ny, std::vector<double> p)
    : nf_(nf), ng_(ng), ny_(ny), p_(std::move(p)) {
  if (nf == 0 || ng == 0 || ny == 0) throw DimensionError("DiscreteJoint: empty alphabet");
  if (p_.size() != nf * ng * ny) throw DimensionError("DiscreteJoint: table size does not match alphabets");
  check_distribution(p_, "DiscreteJoint");
}

Joint2 DiscreteJoint::fg() const {
  Joint2 j{nf_, ng_, std::vector<double>(nf_ * ng_, 0.0)};
  for (std::size_t f = 0; f < nf_; ++f)
    for (std::size_t g = 0; g < ng_; ++g)
      for (std::size_t y = 0; y < ny_; ++y) j.p[f * ng_ + g] += at(f, g, y);
  return j;
}

Joint2 DiscreteJoint::fy() const {
  Joint2 j{nf_, ny_, std::vector<double>(nf_ * ny_, 0.0)};
  for (std::size_t f = 0; f < nf_; ++f)
    for (std::size_t g = 0; g < ng_; ++g)
      for (std::size_t y = 0; y < ny_; ++y) j.p[f * ny_ + y] += at(f, g, y);
  return j;
}

Joint2 DiscreteJoint::gy() const {
  Joint2 j{ng_, ny_, std::vector<double>(ng_ * ny_, 0.0)};
  for (std::size_t f = 0; f < nf_; ++f)
    for (std::size_t g = 0; g < ng_; ++g)
      for (std::size_t y = 0; y < ny_; ++y) j.p[g * ny_ + y] += at(f, g, y);
  return j;
}

Distribution DiscreteJoint::y() const {
  Distribution out(ny_, 0.0);
  for (std::size_t i = 0; i < p_.size(); ++i) out[i % ny_] += p_[i];
  return out;
}

DeterministicChannel DeterministicChannel::from_matrix(const Conditional& m) {
  if (m.empty()) throw DimensionError("channel matrix is empty");
  DeterministicChannel ch;
  ch.g_size = m.front().size();
  for (std::size_t f = 0; f < m.size(); ++f) {
    if (m[f].size() != ch.g_size) throw DimensionError("channel matrix has ragged rows");
    std::size_t hit = ch.g_size;
    for (std::size_t g = 0; g < ch.g_size; ++g) {
      if (m[f][g] == 1.0 && hit == ch.g_size) hit = g;
      else if (m[f][g] != 0.0) hit = ch.g_size + 1;
    }
    if (hit >= ch.g_size)
      throw PreconditionError("channel row " + std::to_string(f) +
                              " is not one-hot; the chain-rule split needs G to be a function of F");
    ch.g_of_f.push_back(hit);
  }
  return ch;
}

double entropy(std::span<const double> p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

double mutual_information(const Joint2& j) {
  std::vector<double> pa(j.rows, 0.0), pb(j.cols, 0.0);
  for (std::size_t a = 0; a < j.rows; ++a)
    for (std::size_t b = 0; b < j.cols; ++b) {
      pa[a] += j.at(a, b);
      pb[b] += j.at(a, b);
    }
  double mi = 0;
  for (std::size_t a = 0; a < j.rows; ++a)
    for (std::size_t b = 0; b < j.cols; ++b) {
      const double p = j.at(a, b);
      if (p > 0) mi += p * std::log(p / (pa[a] * pb[b]));
    }
  return std::max(0.0, mi);
}

double conditional_mi(const DiscreteJoint& joint) {
  const Distribution py = joint.y();
  double total = 0;
  for (std::size_t y = 0; y < joint.ny(); ++y) {
    if (py[y] <= 0) continue;
    Joint2 slice{joint.nf(), joint.ng(), std::vector<double>(joint.nf() * joint.ng())};
    for (std::size_t f = 0; f < joint.nf(); ++f)
      for (std::size_t g = 0; g < joint.ng(); ++g) slice.p[f * joint.ng() + g] = joint.at(f, g, y) / py[y];
    total += py[y] * mutual_information(slice);
  }
  return total;
}

DiscreteJoint markov_joint(const Distribution& p_f, const DeterministicChannel& channel,
                           const Conditional& p_y_given_f) {
  check_distribution(p_f, "p(f)");
  check_conditional(p_y_given_f, p_f.size(), "p(y|f)");
  if (channel.g_of_f.size() != p_f.size()) throw DimensionError("channel is not defined on every f");
  const std::size_t nf = p_f.size(), ng = channel.g_size, ny = p_y_given_f.front().size();
  std::vector<double> p(nf * ng * ny, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    const std::size_t g = channel.g_of_f[f];
    if (g >= ng) throw DimensionError("channel maps outside its codomain");
    for (std::size_t y = 0; y < ny; ++y) p[(f * ng + g) * ny + y] = p_f[f] * p_y_given_f[f][y];
  }
  return DiscreteJoint(nf, ng, ny, std::move(p));
}

ChainRuleCheck chain_rule_residual(const DiscreteJoint& joint) {
  ChainRuleCheck r;
  r.i_fg = mutual_information(joint.fg());
  r.i_fg_given_y = conditional_mi(joint);
  r.i_gy = mutual_information(joint.gy());
  r.residual = std::abs(r.i_fg - r.i_fg_given_y - r.i_gy);
  return r;
}

ChainRuleCheck verify_corollary1(const Distribution& p_f, const DeterministicChannel& channel,
                                 const Conditional& p_y_given_f) {
  return chain_rule_residual(markov_joint(p_f, channel, p_y_given_f));
}

ChainRuleCheck verify_corollary1(const Distribution& p_f, const Conditional& channel_matrix,
                                 const Conditional& p_y_given_f) {
  return verify_corollary1(p_f, DeterministicChannel::from_matrix(channel_matrix), p_y_given_f);
}

PredictiveGap verify_corollary2(const Distribution& p_f, const Conditional& p_y_given_f,
                                const DeterministicChannel& channel) {
  const DiscreteJoint joint = markov_joint(p_f, channel, p_y_given_f);
  const Joint2 gy = joint.gy();
  PredictiveGap out;
  for (std::size_t f = 0; f < p_f.size(); ++f) {
    if (p_f[f] <= 0) continue;
    const std::size_t g = channel.g_of_f[f];
    double pg = 0;
    for (std::size_t y = 0; y < gy.cols; ++y) pg += gy.at(g, y);
    double kl = 0;
    for (std::size_t y = 0; y < gy.cols; ++y) {
      const double p = p_y_given_f[f][y];
      if (p > 0) kl += p * std::log(p / (gy.at(g, y) / pg));
    }
    out.kl_max = std::max(out.kl_max, std::max(0.0, kl));
  }
  out.mi_gap = mutual_information(joint.fy()) - mutual_information(gy);
  return out;
}

}  // namespace ibiumad::info
