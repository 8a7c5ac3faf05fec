#include "wpp/problems.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "wpp/errors.hpp"
#include "wpp/oracle.hpp"

namespace wpp::problems {
namespace {

// Forward differences with zero flux at the far edges; output is [dx; dy].
Signal image_gradient(std::span<const double> z, std::size_t n) {
  Signal g(2 * n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t i = r * n + c;
      if (c + 1 < n) g[i] = z[i + 1] - z[i];
      if (r + 1 < n) g[n * n + i] = z[i + n] - z[i];
    }
  return g;
}

// Adjoint of image_gradient (negative divergence).
Signal image_gradient_adjoint(std::span<const double> g, std::size_t n) {
  Signal z(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t i = r * n + c;
      if (c + 1 < n) {
        z[i + 1] += g[i];
        z[i] -= g[i];
      }
      if (r + 1 < n) {
        z[i + n] += g[n * n + i];
        z[i] -= g[n * n + i];
      }
    }
  return z;
}

void check_same(const Phantom& a, const Phantom& b) {
  if (a.size != b.size || a.pixels.size() != b.pixels.size())
    throw ShapeError("image metrics: sizes " + std::to_string(a.size) + " and " + std::to_string(b.size) + " differ");
}

}  // namespace

Phantom make_phantom(std::size_t size, Signal pixels) {
  if (pixels.size() != size * size)
    throw ShapeError("phantom: expected " + std::to_string(size * size) + " pixels, got " +
                     std::to_string(pixels.size()));
  return Phantom{size, std::move(pixels)};
}

std::vector<Phantom> gen_ellipses(Rng& rng, std::size_t size, std::size_t count, const EllipseParams& p) {
  if (size < 8) throw ContractError("gen_ellipses: size must be >= 8");
  if (p.min_ellipses < 1 || p.max_ellipses < p.min_ellipses) throw ConfigError("gen_ellipses: bad ellipse count range");
  const Rng base = rng.derive(rng.next_u64());
  const double w = 2.0 / static_cast<double>(size);
  std::vector<Phantom> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Rng r = base.derive(k);
    Phantom ph{size, Signal(size * size, 0.0)};
    const std::size_t n = p.min_ellipses + r.index(p.max_ellipses - p.min_ellipses + 1);
    for (std::size_t e = 0; e < n; ++e) {
      const double cx = r.uniform(-p.center_range, p.center_range);
      const double cy = r.uniform(-p.center_range, p.center_range);
      const double ax = r.uniform(p.min_axis, p.max_axis);
      const double ay = r.uniform(p.min_axis, p.max_axis);
      const double rot = r.uniform(0.0, std::numbers::pi);
      const double val = r.uniform(p.min_intensity, p.max_intensity);
      const double cr = std::cos(rot), sr = std::sin(rot);
      for (std::size_t row = 0; row < size; ++row)
        for (std::size_t col = 0; col < size; ++col) {
          const double x = -1.0 + (static_cast<double>(col) + 0.5) * w - cx;
          const double y = 1.0 - (static_cast<double>(row) + 0.5) * w - cy;
          const double u = (cr * x + sr * y) / ax;
          const double v = (-sr * x + cr * y) / ay;
          if (u * u + v * v <= 1.0) ph(row, col) += val;
        }
    }
    for (double& v : ph.pixels) v = std::clamp(v, 0.0, 1.0);
    out.push_back(std::move(ph));
  }
  return out;
}

solvers::SparseOperator radon_build(const RadonGeometry& g, std::size_t size) {
  if (size < 2) throw ContractError("radon_build: size must be >= 2");
  if (g.num_angles < 1 || g.num_detectors < 1) throw ConfigError("radon_build: need at least one angle and detector");
  if (!(g.detector_span > 0.0)) throw ConfigError("radon_build: detector span must be > 0");
  const double w = 2.0 / static_cast<double>(size);
  std::vector<solvers::Triplet> entries;
  std::vector<double> ts;
  for (std::size_t ia = 0; ia < g.num_angles; ++ia) {
    const double theta = std::numbers::pi * static_cast<double>(ia) / static_cast<double>(g.num_angles);
    const double nx = std::cos(theta), ny = std::sin(theta);
    const double ex = -ny, ey = nx;
    for (std::size_t id = 0; id < g.num_detectors; ++id) {
      const double s = -0.5 * g.detector_span +
                       (static_cast<double>(id) + 0.5) * g.detector_span / static_cast<double>(g.num_detectors);
      const double px = s * nx, py = s * ny;
      // Parameter interval inside the image square.
      double tmin = -std::numeric_limits<double>::infinity(), tmax = std::numeric_limits<double>::infinity();
      auto clip_axis = [&](double p0, double e) {
        if (std::abs(e) < 1e-14) {
          if (p0 < -1.0 || p0 > 1.0) tmin = tmax = 0.0;
          return;
        }
        const double a = (-1.0 - p0) / e, b = (1.0 - p0) / e;
        tmin = std::max(tmin, std::min(a, b));
        tmax = std::min(tmax, std::max(a, b));
      };
      clip_axis(px, ex);
      clip_axis(py, ey);
      if (!(tmax > tmin)) continue;
      ts.assign({tmin, tmax});
      for (std::size_t k = 0; k <= size; ++k) {
        const double line = -1.0 + static_cast<double>(k) * w;
        if (std::abs(ex) >= 1e-14) {
          const double t = (line - px) / ex;
          if (t > tmin && t < tmax) ts.push_back(t);
        }
        if (std::abs(ey) >= 1e-14) {
          const double t = (line - py) / ey;
          if (t > tmin && t < tmax) ts.push_back(t);
        }
      }
      std::sort(ts.begin(), ts.end());
      const std::size_t row_index = ia * g.num_detectors + id;
      for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double len = ts[k + 1] - ts[k];
        if (len <= 1e-14) continue;
        const double tm = 0.5 * (ts[k] + ts[k + 1]);
        const double x = px + tm * ex, y = py + tm * ey;
        const auto col = static_cast<std::size_t>(std::clamp(std::floor((x + 1.0) / w), 0.0, double(size - 1)));
        const auto row = static_cast<std::size_t>(std::clamp(std::floor((1.0 - y) / w), 0.0, double(size - 1)));
        entries.push_back({row_index, row * size + col, len});
      }
    }
  }
  return solvers::SparseOperator(g.num_angles * g.num_detectors, size * size, std::move(entries));
}

Signal add_noise(std::span<const double> sinogram, const NoiseModel& model, Rng& rng) {
  if (!(model.level >= 0.0) || !std::isfinite(model.level)) throw ConfigError("noise level must be finite and >= 0");
  Signal out(sinogram.begin(), sinogram.end());
  if (model.level == 0.0 || out.empty()) return out;
  if (model.kind == NoiseModel::Kind::mean_relative) {
    double mean_abs = 0.0;
    for (double v : out) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(out.size());
    const double sd = model.level * mean_abs;
    if (sd == 0.0) return out;
    for (double& v : out) v += sd * rng.normal();
  } else {
    for (double& v : out) {
      const double sd = model.level * std::abs(v);
      if (sd > 0.0) v += sd * rng.normal();
    }
  }
  return out;
}

double tv_objective(const solvers::LinearOperator& a, std::span<const double> d, std::span<const double> z,
                    std::size_t size, double tv_weight) {
  double tv = 0.0;
  for (double v : image_gradient(z, size)) tv += std::abs(v);
  return solvers::objective(a, d, z) + tv_weight * tv;
}

Phantom tv_reconstruct(const solvers::LinearOperator& a, std::span<const double> d, std::size_t size,
                       double tv_weight, std::size_t iterations, std::vector<double>* objective_log) {
  if (a.input_dim() != size * size || a.output_dim() != d.size())
    throw ShapeError("tv_reconstruct: operator, data and image size are inconsistent");
  if (!(tv_weight >= 0.0)) throw ConfigError("tv_weight must be >= 0");
  const double k_norm = std::sqrt(solvers::power_method_norm(a, 100) * 1.01 + 8.0);
  const double sigma = 0.99 / k_norm, tau = 0.99 / k_norm;
  const std::size_t n = size * size, m = d.size();
  Signal z(n, 0.0), z_bar(n, 0.0), p(m, 0.0), q(2 * n, 0.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    const Signal az = a.apply(z_bar);
    for (std::size_t i = 0; i < m; ++i) p[i] = (p[i] + sigma * (az[i] - d[i])) / (1.0 + sigma);
    const Signal gz = image_gradient(z_bar, size);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::clamp(q[i] + sigma * gz[i], -tv_weight, tv_weight);
    const Signal atp = a.adjoint(p);
    const Signal gtq = image_gradient_adjoint(q, size);
    for (std::size_t i = 0; i < n; ++i) {
      const double zn = z[i] - tau * (atp[i] + gtq[i]);
      z_bar[i] = 2.0 * zn - z[i];
      z[i] = zn;
    }
    if (objective_log) objective_log->push_back(tv_objective(a, d, z, size, tv_weight));
  }
  for (double& v : z) {
    if (!std::isfinite(v)) throw NumericalError("tv_reconstruct: non-finite iterate");
    v = std::clamp(v, 0.0, 1.0);
  }
  return Phantom{size, std::move(z)};
}

Phantom adjoint_initializer(const solvers::LinearOperator& a, std::span<const double> d, std::size_t size) {
  if (a.input_dim() != size * size || a.output_dim() != d.size())
    throw ShapeError("adjoint_initializer: operator does not match the image or data size");
  Signal z = a.adjoint(d);
  const double peak = z.empty() ? 0.0 : *std::max_element(z.begin(), z.end());
  for (double& v : z) v = peak > 0.0 ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
  return Phantom{size, std::move(z)};
}

double tv_grid_search(const solvers::LinearOperator& a, std::span<const double> d, const Phantom& truth,
                      std::span<const double> grid, std::size_t iterations) {
  if (grid.empty()) throw ConfigError("tv_grid_search: empty grid");
  double best_w = grid.front(), best = -std::numeric_limits<double>::infinity();
  for (double w : grid) {
    const double v = psnr(tv_reconstruct(a, d, truth.size, w, iterations), truth);
    if (v > best) {
      best = v;
      best_w = w;
    }
  }
  return best_w;
}

double psnr(const Phantom& a, const Phantom& b) {
  check_same(a, b);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) mse += (a.pixels[i] - b.pixels[i]) * (a.pixels[i] - b.pixels[i]);
  mse /= static_cast<double>(a.pixels.size());
  if (mse == 0.0) return 200.0;
  return std::min(200.0, -10.0 * std::log10(mse));
}

double ssim(const Phantom& a, const Phantom& b) {
  check_same(a, b);
  constexpr std::size_t win = 7;
  if (a.size < win) throw ShapeError("ssim: image smaller than the 7x7 window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  constexpr double count = win * win;
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r0 = 0; r0 + win <= a.size; ++r0)
    for (std::size_t c0 = 0; c0 + win <= a.size; ++c0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t r = r0; r < r0 + win; ++r)
        for (std::size_t c = c0; c < c0 + win; ++c) {
          const double x = a(r, c), y = b(r, c);
          sa += x;
          sb += y;
          saa += x * x;
          sbb += y * y;
          sab += x * y;
        }
      const double ma = sa / count, mb = sb / count;
      const double va = (saa - count * ma * ma) / (count - 1.0);
      const double vb = (sbb - count * mb * mb) / (count - 1.0);
      const double cov = (sab - count * ma * mb) / (count - 1.0);
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

ToyDataset toy_dataset(Rng& rng, std::size_t initial_count, std::size_t true_count) {
  const auto m = oracle::make_half_circle({2.0, 0.0}, 0.75);
  ToyDataset ds;
  ds.truth = oracle::sample_manifold(m, true_count, rng);
  ds.initial = SampleSet(initial_count, 2);
  for (std::size_t i = 0; i < initial_count; ++i) {
    ds.initial.row(i)[0] = rng.uniform(0.0, 3.0);
    ds.initial.row(i)[1] = rng.uniform(-0.5, 1.5);
  }
  return ds;
}

void write_pgm(const Phantom& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P2\n" << p.size << ' ' << p.size << "\n65535\n";
  for (std::size_t r = 0; r < p.size; ++r) {
    for (std::size_t c = 0; c < p.size; ++c)
      out << (c ? " " : "") << static_cast<long>(std::lround(std::clamp(p(r, c), 0.0, 1.0) * 65535.0));
    out << '\n';
  }
}

Phantom read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  if (!(in >> magic >> w >> h >> maxval) || magic != "P2" || w != h || maxval == 0)
    throw ConfigError("read_pgm: " + path.string() + " is not a square P2 image");
  Phantom p{w, Signal(w * h)};
  for (double& v : p.pixels) {
    long x = 0;
    if (!(in >> x)) throw ConfigError("read_pgm: truncated pixel data in " + path.string());
    v = static_cast<double>(x) / static_cast<double>(maxval);
  }
  return p;
}

void write_image_csv(const Phantom& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t r = 0; r < p.size; ++r) {
    for (std::size_t c = 0; c < p.size; ++c) out << (c ? "," : "") << p(r, c);
    out << '\n';
  }
}

void write_signals_csv(const SampleSet& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = s.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
    out << '\n';
  }
}

SampleSet read_signals_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  SampleSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    Signal row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "'");
      }
    }
    if (!out.empty() && row.size() != out.dim())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(out.dim()) +
                        " values, got " + std::to_string(row.size()));
    if (out.empty()) out = SampleSet(row.size());
    out.push_back(row);
  }
  return out;
}

}  // namespace wpp::problems
