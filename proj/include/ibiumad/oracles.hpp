#pragma once

// Deliberately naive second implementations used to cross-check the
// library: brute-force counting, threshold sweeps and textbook formulas.
// Nothing here shares code with the routines it checks.

#include <cstdint>
#include <vector>

namespace ibiumad::oracle {

/// Fraction of (positive, negative) pairs ranked correctly, ties ½.
double pairwise_auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Recomputes FPR and per-region overlap from scratch at every distinct
/// score, regions found by breadth-first flood fill (8-neighbourhood).
/// Each image is H×W row-major.
double sweep_aupro(const std::vector<std::vector<double>>& maps, const std::vector<std::vector<std::uint8_t>>& masks,
                   std::size_t height, std::size_t width, double fpr_limit = 0.3);

/// acc[o][s] is object o's accuracy at step s, NaN before it appears.
/// Averages max_{s<N}(acc[o][s] - acc[o][N]) over objects present before N.
double direct_forgetting(const std::vector<std::vector<double>>& acc);

/// I(A;B) = H(A) + H(B) - H(A,B) on a row-major |A|×|B| table.
double mi_from_entropies(const std::vector<double>& p_ab, std::size_t na, std::size_t nb);
/// I(F;G|Y) = H(F,Y) + H(G,Y) - H(F,G,Y) - H(Y) on a row-major |F|×|G|×|Y| table.
double cmi_from_entropies(const std::vector<double>& p_fgy, std::size_t nf, std::size_t ng, std::size_t ny);

/// y_t = Σ_{s<=t} c·a^{t-s}·b·x_s + d·x_t for one channel.
std::vector<double> scan_closed_form(const std::vector<double>& x, double a, double b, double c, double d);

/// Triple loop.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n);

}  // namespace ibiumad::oracle
