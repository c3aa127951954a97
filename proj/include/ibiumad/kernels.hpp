#pragma once

// Raw compute kernels behind the tensor ops.
//
// Every kernel exists twice: an OpenMP version in `kernels` that the ops
// call, and a plain serial version in `kernels::reference` kept for tests
// and the benchmark. The parallel versions split work only over output
// elements, never over a reduction, so results do not depend on the thread
// count. They match the serial path bit for bit except the conv input
// gradient, whose reference sums kernel taps in another order.

#include <array>
#include <cstddef>
#include <span>

namespace ibiumad::kernels {

struct ConvGeometry {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel_h;
  std::size_t kernel_w;
  std::size_t groups;
};

struct ScanParams {
  std::span<const double> a;  // decay per channel, in [0,1)
  std::span<const double> b;
  std::span<const double> c;
  std::span<const double> d;
};

struct ScanGrads {
  std::span<double> a;
  std::span<double> b;
  std::span<double> c;
  std::span<double> d;
};

enum class ScanDirection { kRight = 0, kLeft = 1, kDown = 2, kUp = 3 };
inline constexpr std::array<ScanDirection, 4> kAllDirections = {
    ScanDirection::kRight, ScanDirection::kLeft, ScanDirection::kDown, ScanDirection::kUp};

/// Number of worker threads the kernels use; honours IBIUMAD_THREADS.
int thread_count();
void set_thread_count(int n);

// C[m×n] = A[m×k] · B[k×n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// C[m×n] += A[m×k] · B[n×k]^T
void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
// C[k×n] += A[m×k]^T · B[m×n]
void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);

void conv2d_forward(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
                    std::span<double> out, const ConvGeometry& g);
void conv2d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> gx, const ConvGeometry& g);
void conv2d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> gw, const ConvGeometry& g);

// Sequence scan over x[T×C] (row-major, channel fastest).
void ssm_scan_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                      std::size_t steps, std::size_t channels);
void ssm_scan_backward(std::span<const double> x, const ScanParams& p, std::span<const double> gy,
                       std::span<double> gx, const ScanGrads& gp, std::size_t steps,
                       std::size_t channels);

// ES2D over x[C×H×W]. `direction_forward` writes a single direction's output
// (no averaging); `es2d_forward` writes the 4-direction mean.
void es2d_direction_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                            std::size_t channels, std::size_t height, std::size_t width,
                            ScanDirection dir);
void es2d_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                  std::size_t channels, std::size_t height, std::size_t width);
void es2d_backward(std::span<const double> x, const ScanParams& p, std::span<const double> gy,
                   std::span<double> gx, const ScanGrads& gp, std::size_t channels,
                   std::size_t height, std::size_t width);

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void conv2d_forward(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
                    std::span<double> out, const ConvGeometry& g);
void conv2d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> gx, const ConvGeometry& g);
void conv2d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> gw, const ConvGeometry& g);
void es2d_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                  std::size_t channels, std::size_t height, std::size_t width);

}  // namespace reference
}  // namespace ibiumad::kernels
