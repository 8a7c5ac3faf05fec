#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wpp/rng.hpp"
#include "wpp/signal.hpp"
#include "wpp/solvers.hpp"

namespace wpp::problems {

/// Square grayscale image, row-major, values in [0, 1].
struct Phantom {
  std::size_t size = 0;
  Signal pixels;

  double operator()(std::size_t r, std::size_t c) const { return pixels[r * size + c]; }
  double& operator()(std::size_t r, std::size_t c) { return pixels[r * size + c]; }
};

Phantom make_phantom(std::size_t size, Signal pixels);

struct EllipseParams {
  std::size_t min_ellipses = 1;
  std::size_t max_ellipses = 6;
  double min_intensity = 0.1;
  double max_intensity = 1.0;
  /// Semi-axes are drawn from [min_axis, max_axis] in units of the half image width.
  double min_axis = 0.1;
  double max_axis = 0.6;
  /// Centers are drawn from [-center_range, center_range]^2.
  double center_range = 0.5;
};

/// Sum of random ellipses per phantom, clipped to [0, 1]. Throws ContractError for size < 8.
std::vector<Phantom> gen_ellipses(Rng& rng, std::size_t size, std::size_t count, const EllipseParams& params = {});

struct RadonGeometry {
  std::size_t num_angles = 15;
  std::size_t num_detectors = 47;
  /// Width of the detector array; the image occupies [-1, 1]^2.
  double detector_span = 2.0 * std::sqrt(2.0);
};

/// Parallel-beam line integrals. Angles theta_i = i pi / num_angles; detector j sits at
/// s_j = -span/2 + (j + 1/2) span / num_detectors, and its ray is
/// {s (cos theta, sin theta) + t (-sin theta, cos theta)}. Matrix entries are exact
/// ray/pixel intersection lengths (Siddon traversal). Row index = angle * num_detectors + detector.
solvers::SparseOperator radon_build(const RadonGeometry& geometry, std::size_t size);

struct NoiseModel {
  enum class Kind { mean_relative, per_beam };
  Kind kind = Kind::mean_relative;
  double level = 0.025;
};

/// mean_relative: N(0, (level * mean |s|)^2) per entry; per_beam: N(0, (level * |s_i|)^2).
Signal add_noise(std::span<const double> sinogram, const NoiseModel& model, Rng& rng);

/// 0.5 ||A z - d||^2 + weight * ||grad z||_1 with forward differences (anisotropic).
double tv_objective(const solvers::LinearOperator& a, std::span<const double> d, std::span<const double> z,
                    std::size_t size, double tv_weight);

/// Primal-dual (Chambolle-Pock) on K = [A; grad] starting from zero; the result is clipped
/// to [0, 1]. `objective_log` receives the unclipped objective after each iteration.
Phantom tv_reconstruct(const solvers::LinearOperator& a, std::span<const double> d, std::size_t size,
                       double tv_weight, std::size_t iterations, std::vector<double>* objective_log = nullptr);

/// Backprojection A^T d rescaled to a maximum of 1 and clipped to [0, 1]. A cheap
/// initializer; this is not filtered backprojection.
Phantom adjoint_initializer(const solvers::LinearOperator& a, std::span<const double> d, std::size_t size);

/// Weight in `grid` whose reconstruction of `truth` from `d` has the highest PSNR.
double tv_grid_search(const solvers::LinearOperator& a, std::span<const double> d, const Phantom& truth,
                      std::span<const double> grid, std::size_t iterations);

/// 10 log10(1 / MSE), capped at 200 dB. Throws ShapeError on a size mismatch.
double psnr(const Phantom& a, const Phantom& b);
/// Mean SSIM over all valid 7x7 windows, K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Phantom& a, const Phantom& b);

struct ToyDataset {
  SampleSet initial;
  SampleSet truth;
};

/// 50 uniform-angle points on the half circle of radius 0.75 at (2, 0) and
/// `initial_count` uniform points on [0, 3] x [-0.5, 1.5].
ToyDataset toy_dataset(Rng& rng, std::size_t initial_count = 500, std::size_t true_count = 50);

/// P2 PGM with maxval 65535; values are clipped to [0, 1].
void write_pgm(const Phantom& p, const std::filesystem::path& path);
Phantom read_pgm(const std::filesystem::path& path);
/// One image row per CSV line.
void write_image_csv(const Phantom& p, const std::filesystem::path& path);

/// One signal per line, comma separated, full precision.
void write_signals_csv(const SampleSet& s, const std::filesystem::path& path);
/// Throws ConfigError on ragged rows or unparsable numbers.
SampleSet read_signals_csv(const std::filesystem::path& path);

}  // namespace wpp::problems
