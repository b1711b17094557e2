#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "image.hpp"

namespace uwstr {

struct RtvConfig {
  double lambda = 0.02;
  double epsilon = 1e-3;
  /// Gaussian window scale; the window is truncated at radius ceil(2*delta).
  double delta = 5.0;
  int outer_iterations = 4;
  double linear_tolerance = 1e-6;
  int max_linear_iterations = 5000;
  /// Floor added to |gradient| when the L1 term is reweighted into a quadratic.
  /// The first pass starts from the raw input and uses the coarser floor.
  double irls_floor = 1e-3;
  double initial_irls_floor = 0.02;
};

struct Decomposition {
  RgbImage structure;
  TextureImage texture;
};

namespace detail {

inline void validate(const RtvConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw ParameterError("rtv lambda must be >= 0");
  if (!(cfg.epsilon > 0.0)) throw ParameterError("rtv epsilon must be > 0");
  if (!(cfg.delta > 0.0)) throw ParameterError("rtv delta must be > 0");
  if (cfg.outer_iterations < 1) throw ParameterError("rtv iterations must be >= 1");
  if (!(cfg.linear_tolerance > 0.0)) throw ParameterError("rtv linear tolerance must be > 0");
  if (!(cfg.irls_floor > 0.0) || !(cfg.initial_irls_floor > 0.0))
    throw ParameterError("rtv irls floor must be > 0");
}

/// Square Gaussian window, truncated at the image border and renormalized so
/// the weights inside every window sum to one. The unnormalized operator is
/// symmetric, which gives a cheap adjoint.
class WindowFilter {
 public:
  WindowFilter(int width, int height, double delta)
      : radius_(static_cast<int>(std::ceil(2.0 * delta))) {
    kernel_.resize(2 * radius_ + 1);
    for (int k = -radius_; k <= radius_; ++k)
      kernel_[k + radius_] = std::exp(-(k * k) / (2.0 * delta * delta));
    norm_ = convolve(GrayImage(width, height, 1.0));
  }

  int radius() const noexcept { return radius_; }

  /// Weighted window mean: sum_q g_pq a_q with normalized g.
  GrayImage apply(const GrayImage& a) const {
    GrayImage out = convolve(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= norm_[i];
    return out;
  }

  /// Transpose of `apply`: sum_p g_pq a_p.
  GrayImage adjoint(const GrayImage& a) const {
    GrayImage scaled(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) scaled[i] = a[i] / norm_[i];
    return convolve(scaled);
  }

 private:
  // Separable, tap-major accumulation; taps falling outside the image are dropped.
  GrayImage convolve(const GrayImage& a) const {
    const int w = a.width();
    const int h = a.height();
    GrayImage tmp(w, h);
    for (int y = 0; y < h; ++y) {
      const double* src = a.row(y).data();
      double* dst = tmp.row(y).data();
      for (int k = -radius_; k <= radius_; ++k) {
        const double g = kernel_[k + radius_];
        const int lo = std::max(0, -k);
        const int hi = std::min(w, w - k);
        for (int x = lo; x < hi; ++x) dst[x] += g * src[x + k];
      }
    }
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
      double* dst = out.row(y).data();
      for (int k = std::max(-radius_, -y); k <= std::min(radius_, h - 1 - y); ++k) {
        const double g = kernel_[k + radius_];
        const double* src = tmp.row(y + k).data();
        for (int x = 0; x < w; ++x) dst[x] += g * src[x];
      }
    }
    return out;
  }

  int radius_;
  std::vector<double> kernel_;
  GrayImage norm_;
};

/// Forward differences; the last column (x) or row (y) is zero.
inline GrayImage diff_x(const GrayImage& s) {
  GrayImage d(s.width(), s.height());
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x + 1 < s.width(); ++x) d(x, y) = s(x + 1, y) - s(x, y);
  return d;
}

inline GrayImage diff_y(const GrayImage& s) {
  GrayImage d(s.width(), s.height());
  for (int y = 0; y + 1 < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) d(x, y) = s(x, y + 1) - s(x, y);
  return d;
}

/// sum_p D(p) / (L(p) + eps) for one derivative plane.
inline double windowed_penalty(const GrayImage& d, const WindowFilter& window, double eps) {
  GrayImage abs_d(d.width(), d.height());
  for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::abs(d[i]);
  const GrayImage total = window.apply(abs_d);
  const GrayImage inherent = window.apply(d);
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) sum += total[i] / (std::abs(inherent[i]) + eps);
  return sum;
}

inline double total_penalty(const GrayImage& s, const WindowFilter& window, double eps) {
  return windowed_penalty(diff_x(s), window, eps) + windowed_penalty(diff_y(s), window, eps);
}

inline double data_term(const GrayImage& s, const GrayImage& input) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += (s[i] - input[i]) * (s[i] - input[i]);
  return sum;
}

/// Quadratic model of lambda * sum_p D_p / (L_p + eps) around the current
/// differences d of one direction. With u = G'(1 / (|L| + eps)) the D part is
/// majorized by sum_q u_q d_q^2 / (2 (|d_q| + floor)); the dependence on L is
/// linearized, contributing -drift_q * d_q with drift = G'(D sgn(L) / (|L| + eps)^2).
struct ReweightedTerm {
  GrayImage weight;
  GrayImage drift;
};

inline ReweightedTerm reweight(const GrayImage& d, const WindowFilter& window, double eps,
                               double floor) {
  GrayImage magnitude(d.width(), d.height());
  for (std::size_t i = 0; i < d.size(); ++i) magnitude[i] = std::abs(d[i]);
  const GrayImage total = window.apply(magnitude);
  GrayImage inherent = window.apply(d);
  GrayImage pull(d.width(), d.height());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double denom = std::abs(inherent[i]) + eps;
    const double sign = inherent[i] > 0.0 ? 1.0 : (inherent[i] < 0.0 ? -1.0 : 0.0);
    pull[i] = sign * total[i] / (denom * denom);
    inherent[i] = 1.0 / denom;
  }
  ReweightedTerm term{window.adjoint(inherent), window.adjoint(pull)};
  for (std::size_t i = 0; i < d.size(); ++i) term.weight[i] /= 2.0 * (magnitude[i] + floor);
  return term;
}

/// Sum of products kept in eight interleaved lanes (lane = index mod 8) and
/// folded pairwise at the end. Every reduction in the solver goes through it,
/// so splitting a loop into pieces does not change the rounding.
class LaneSum {
 public:
  void add(const double* a, const double* b, std::size_t begin, std::size_t end) noexcept {
    std::size_t i = begin;
    for (; i < end && i % kLanes != 0; ++i) part_[i % kLanes] += a[i] * b[i];
    for (; i + kLanes <= end; i += kLanes)
      for (std::size_t j = 0; j < kLanes; ++j) part_[j] += a[i + j] * b[i + j];
    for (; i < end; ++i) part_[i % kLanes] += a[i] * b[i];
  }

  double total() const noexcept {
    double part[kLanes];
    std::copy(std::begin(part_), std::end(part_), part);
    for (std::size_t span = kLanes / 2; span > 0; span /= 2)
      for (std::size_t j = 0; j < span; ++j) part[j] += part[j + span];
    return part[0];
  }

 private:
  static constexpr std::size_t kLanes = 8;
  double part_[kLanes] = {};
};

inline double dot(const GrayImage& a, const GrayImage& b) noexcept {
  LaneSum sum;
  sum.add(a.values().data(), b.values().data(), 0, a.size());
  return sum.total();
}

/// Matrix-free operator I + lambda * (Dx' Wx Dx + Dy' Wy Dy) on the 5-point stencil.
class WeightedLaplacian {
 public:
  WeightedLaplacian(GrayImage wx, GrayImage wy, double lambda)
      : wx_(std::move(wx)), wy_(std::move(wy)), diag_(wx_.width(), wx_.height(), 1.0) {
    const int w = wx_.width();
    const int h = wx_.height();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        wx_(x, y) = x + 1 < w ? lambda * wx_(x, y) : 0.0;
        wy_(x, y) = y + 1 < h ? lambda * wy_(x, y) : 0.0;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double d = 1.0 + wx_(x, y) + wy_(x, y);
        if (x > 0) d += wx_(x - 1, y);
        if (y > 0) d += wy_(x, y - 1);
        diag_(x, y) = d;
      }
  }

  const GrayImage& diagonal() const noexcept { return diag_; }
  const GrayImage& coupling_x() const noexcept { return wx_; }
  const GrayImage& coupling_y() const noexcept { return wy_; }

  /// out = A v. Returns v . out, summed the same way as dot().
  double multiply(const GrayImage& v, GrayImage& out) const {
    const int w = v.width();
    const int h = v.height();
    LaneSum sum;
    for (int y = 0; y < h; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * w;
      const double* vr = v.values().data() + row;
      const double* d = diag_.values().data() + row;
      const double* cx = wx_.values().data() + row;
      const double* cd = wy_.values().data() + row;
      const double* cu = cd - w;
      double* o = out.values().data() + row;
      if (y > 0 && y + 1 < h && w > 2) {
        o[0] = ((d[0] * vr[0] - cx[0] * vr[1]) - cd[0] * vr[w]) - cu[0] * vr[-w];
        for (int x = 1; x + 1 < w; ++x)
          o[x] = (((d[x] * vr[x] - cx[x] * vr[x + 1]) - cx[x - 1] * vr[x - 1]) - cd[x] * vr[x + w]) -
                 cu[x] * vr[x - w];
        const int x = w - 1;
        o[x] = ((d[x] * vr[x] - cx[x - 1] * vr[x - 1]) - cd[x] * vr[x + w]) - cu[x] * vr[x - w];
      } else {
        for (int x = 0; x < w; ++x) {
          double s = d[x] * vr[x];
          if (x + 1 < w) s -= cx[x] * vr[x + 1];
          if (x > 0) s -= cx[x - 1] * vr[x - 1];
          if (y + 1 < h) s -= cd[x] * vr[x + w];
          if (y > 0) s -= cu[x] * vr[x - w];
          o[x] = s;
        }
      }
      sum.add(v.values().data(), out.values().data(), row, row + w);
    }
    return sum.total();
  }

 private:
  GrayImage wx_;
  GrayImage wy_;
  GrayImage diag_;
};

/// Modified incomplete Cholesky factor L of the 5-point operator, with
/// (L L')^-1 applied by two triangular sweeps.
class IncompleteCholesky {
 public:
  static constexpr double kModification = 0.97;
  static constexpr double kSafety = 0.25;

  explicit IncompleteCholesky(const WeightedLaplacian& op) {
    const GrayImage& d = op.diagonal();
    const GrayImage& cx = op.coupling_x();
    const GrayImage& cy = op.coupling_y();
    const int w = d.width();
    const int h = d.height();
    GrayImage fx(w, h);
    GrayImage fy(w, h);
    inv_pivot_ = GrayImage(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double e = d(x, y);
        if (x > 0) {
          const double left = fx(x - 1, y);
          e -= left * left + kModification * cx(x - 1, y) * cy(x - 1, y) *
                                 inv_pivot_(x - 1, y) * inv_pivot_(x - 1, y);
        }
        if (y > 0) {
          const double up = fy(x, y - 1);
          e -= up * up + kModification * cy(x, y - 1) * cx(x, y - 1) *
                             inv_pivot_(x, y - 1) * inv_pivot_(x, y - 1);
        }
        if (e < kSafety * d(x, y)) e = d(x, y);
        inv_pivot_(x, y) = 1.0 / std::sqrt(e);
        fx(x, y) = cx(x, y) * inv_pivot_(x, y);
        fy(x, y) = cy(x, y) * inv_pivot_(x, y);
      }
    // Sweep coefficients with the pivot folded in, so each step along a row
    // is a single multiply-add on the running value.
    pivot_ = Plane<float>(w, h);
    from_left_ = Plane<float>(w, h);
    from_above_ = Plane<float>(w, h);
    from_right_ = Plane<float>(w, h);
    from_below_ = Plane<float>(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double ip = inv_pivot_(x, y);
        pivot_(x, y) = static_cast<float>(ip);
        from_left_(x, y) = static_cast<float>(x > 0 ? fx(x - 1, y) * ip : 0.0);
        from_above_(x, y) = static_cast<float>(y > 0 ? fy(x, y - 1) * ip : 0.0);
        from_right_(x, y) = static_cast<float>(fx(x, y) * ip);
        from_below_(x, y) = static_cast<float>(fy(x, y) * ip);
      }
  }

  /// z = (L L')^-1 r. Both sweeps walk bands of kBand rows along
  /// anti-diagonals, which keeps kBand independent recurrences in flight.
  void apply(const GrayImage& r, GrayImage& z) const {
    const int w = r.width();
    const int h = r.height();
    const Sweep forward{r.values().data(), z.values().data(), pivot_.values().data(),
                        from_above_.values().data(), from_left_.values().data(), w, h};
    for (int y0 = 0; y0 < h; y0 += kBand) forward.band<false>(y0, std::min(kBand, h - y0));
    const Sweep backward{z.values().data(), z.values().data(), pivot_.values().data(),
                         from_below_.values().data(), from_right_.values().data(), w, h};
    for (int y0 = h - 1; y0 >= 0; y0 -= kBand) backward.band<true>(y0, std::min(kBand, y0 + 1));
  }

 private:
  static constexpr int kBand = 4;

  // z(p) = (src(p) * pivot(p) + across(p) * z(previous row)) + along(p) * z(previous column),
  // with "previous" meaning up/left for the forward sweep and down/right backward.
  struct Sweep {
    const double* src;
    double* z;
    const float* pivot;
    const float* across;
    const float* along;
    int w;
    int h;

    template <bool Reverse>
    void cell(int x, int y) const {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const bool has_row = Reverse ? y + 1 < h : y > 0;
      const bool has_col = Reverse ? x + 1 < w : x > 0;
      const std::ptrdiff_t dr = Reverse ? w : -w;
      const std::ptrdiff_t dc = Reverse ? 1 : -1;
      const double zr = has_row ? z[i + dr] : 0.0;
      const double zc = has_col ? z[i + dc] : 0.0;
      z[i] = (src[i] * pivot[i] + across[i] * zr) + along[i] * zc;
    }

    // Rows y0, y0 +- 1, ... (rows of them); step t visits column t - k of row k.
    template <bool Reverse>
    void band(int y0, int rows) const {
      const int dy = Reverse ? -1 : 1;
      const bool interior = Reverse ? y0 + 1 < h : y0 > 0;
      auto edge_steps = [&](int from, int to) {
        for (int t = from; t < to; ++t) {
          const int k0 = std::max(0, t - (w - 1));
          const int k1 = std::min(rows - 1, t);
          for (int k = k0; k <= k1; ++k) cell<Reverse>(Reverse ? w - 1 - (t - k) : t - k, y0 + dy * k);
        }
      };
      if (!interior || rows != kBand || w <= kBand) {
        edge_steps(0, w + rows - 1);
        return;
      }
      edge_steps(0, kBand);
      // Every cell of steps kBand .. w-1 has both earlier neighbors inside the image.
      const std::ptrdiff_t dr = Reverse ? w : -w;
      const std::ptrdiff_t dc = Reverse ? 1 : -1;
      std::ptrdiff_t at[kBand];
      for (int k = 0; k < kBand; ++k) {
        const int x = Reverse ? w - 1 - (kBand - k) : kBand - k;
        at[k] = static_cast<std::ptrdiff_t>(y0 + dy * k) * w + x;
      }
      for (int t = kBand; t < w; ++t)
        for (int k = 0; k < kBand; ++k) {
          const std::ptrdiff_t i = at[k];
          z[i] = (src[i] * pivot[i] + across[i] * z[i + dr]) + along[i] * z[i + dc];
          at[k] = i - dc;
        }
      edge_steps(w, w + rows - 1);
    }
  };

  GrayImage inv_pivot_;
  Plane<float> pivot_;
  Plane<float> from_left_;
  Plane<float> from_above_;
  Plane<float> from_right_;
  Plane<float> from_below_;
};

/// Preconditioned conjugate gradients on op x = rhs, starting from the
/// incoming x. Stops once |rhs - op x| <= tolerance * scale; a scale of zero
/// means |rhs|.
inline void solve_pcg(const WeightedLaplacian& op, const GrayImage& rhs, GrayImage& x,
                      double tolerance, int max_iterations, double scale = 0.0) {
  const int w = rhs.width();
  const int h = rhs.height();
  const std::size_t n = rhs.size();
  if (scale <= 0.0) scale = std::sqrt(dot(rhs, rhs));
  if (scale == 0.0) {
    for (auto& v : x.values()) v = 0.0;
    return;
  }
  const IncompleteCholesky precond(op);
  GrayImage r(w, h);
  op.multiply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  GrayImage z(w, h);
  precond.apply(r, z);
  GrayImage p = z;
  GrayImage ap(w, h);
  double rz = dot(r, z);
  double residual = std::sqrt(dot(r, r)) / scale;
  double* xs = x.values().data();
  double* rs = r.values().data();
  double* ps = p.values().data();
  const double* zs = z.values().data();
  const double* aps = ap.values().data();
  for (int it = 0; it < max_iterations && residual > tolerance; ++it) {
    const double step = rz / op.multiply(p, ap);
    LaneSum rr;
    for (std::size_t row = 0; row < n; row += static_cast<std::size_t>(w)) {
      for (std::size_t i = row; i < row + w; ++i) {
        xs[i] += step * ps[i];
        rs[i] -= step * aps[i];
      }
      rr.add(rs, rs, row, row + w);
    }
    residual = std::sqrt(rr.total()) / scale;
    if (residual <= tolerance) break;
    precond.apply(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) ps[i] = zs[i] + beta * ps[i];
  }
  if (residual > tolerance)
    throw ConvergenceError("structure solve did not converge", residual);
}

/// Residual t = value - structure, nudged by an ulp at a time while the sum
/// misses value. On the unit lattice the first guess is already exact; off it
/// the result is as close as a double allows.
inline double exact_residual(double value, double structure) noexcept {
  double t = value - structure;
  for (int i = 0; i < 8 && structure + t != value; ++i)
    t = std::nextafter(t, structure + t < value ? INFINITY : -INFINITY);
  return t;
}

}  // namespace detail

/// Relative-total-variation energy of `structure` against `input`:
///   sum_p (S_p - I_p)^2 + lambda * sum_p [Dx/(Lx+eps) + Dy/(Ly+eps)]
inline double rtv_objective(const GrayImage& structure, const GrayImage& input,
                            const RtvConfig& cfg) {
  if (!structure.same_shape(input)) throw DimensionError("structure and input differ in shape");
  detail::validate(cfg);
  const detail::WindowFilter window(input.width(), input.height(), cfg.delta);
  return detail::data_term(structure, input) +
         cfg.lambda * detail::total_penalty(structure, window, cfg.epsilon);
}

/// Approximate minimizer of rtv_objective by iteratively reweighted least
/// squares. Each outer iteration solves
///   (I + lambda (Dx' Wx Dx + Dy' Wy Dy)) S = I_in + (lambda / 2) (Dx' bx + Dy' by)
/// with the drift b left out on the first pass, where the input's own texture
/// would dominate it. That pass also uses the coarser initial floor. A step that raises the energy is halved back toward the
/// previous iterate, and only a strict decrease is accepted. Iterates are
/// clamped to [0,1] and rounded to the unit lattice; if no step lowers the
/// energy the input is returned unchanged.
///
/// The iteration runs on the channel rounded to the lattice and shifted by
/// -0.5. Every operation on the shifted values is odd under negation, so
/// flipping the input to 1 - I flips the result bit for bit.
inline GrayImage rtv_smooth(const GrayImage& channel, const RtvConfig& cfg) {
  detail::validate(cfg);
  const int w = channel.width();
  const int h = channel.height();
  const detail::WindowFilter window(w, h, cfg.delta);
  GrayImage centered = channel;
  for (auto& v : centered.values()) v = snap_to_lattice(v) - 0.5;
  auto energy = [&](const GrayImage& s) {
    return detail::data_term(s, centered) + cfg.lambda * detail::total_penalty(s, window, cfg.epsilon);
  };

  GrayImage current = centered;
  double current_energy = energy(centered);
  bool moved = false;
  GrayImage candidate(w, h);
  GrayImage trial(w, h);
  GrayImage rhs(w, h);
  for (int it = 0; it < cfg.outer_iterations; ++it) {
    const double floor = it == 0 ? cfg.initial_irls_floor : cfg.irls_floor;
    const detail::ReweightedTerm tx = detail::reweight(detail::diff_x(current), window, cfg.epsilon, floor);
    const detail::ReweightedTerm ty = detail::reweight(detail::diff_y(current), window, cfg.epsilon, floor);
    rhs = centered;
    if (it > 0) {
      const double half = 0.5 * cfg.lambda;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x + 1 < w; ++x) {
          rhs(x, y) -= half * tx.drift(x, y);
          rhs(x + 1, y) += half * tx.drift(x, y);
        }
      for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x < w; ++x) {
          rhs(x, y) -= half * ty.drift(x, y);
          rhs(x, y + 1) += half * ty.drift(x, y);
        }
    }
    const detail::WeightedLaplacian op(tx.weight, ty.weight, cfg.lambda);
    // The residual is measured against the unshifted right-hand side, taking
    // the smaller of |rhs + 0.5| and |rhs - 0.5| so the flip stays exact.
    double total = 0.0;
    for (double v : rhs.values()) total += v;
    const double scale = std::sqrt(std::max(
        0.0, detail::dot(rhs, rhs) - std::abs(total) + 0.25 * static_cast<double>(rhs.size())));
    candidate = current;
    detail::solve_pcg(op, rhs, candidate, cfg.linear_tolerance, cfg.max_linear_iterations, scale);
    for (auto& v : candidate.values()) v = snap_to_lattice(std::clamp(v, -0.5, 0.5));

    double e = energy(candidate);
    for (double step = 0.5; e >= current_energy && step > 1.0 / 256.0; step *= 0.5) {
      for (std::size_t i = 0; i < trial.size(); ++i)
        trial[i] = snap_to_lattice(current[i] + step * (candidate[i] - current[i]));
      e = energy(trial);
      if (e < current_energy) candidate = trial;
    }
    if (e >= current_energy) break;
    current = candidate;
    current_energy = e;
    moved = true;
  }
  if (!moved) return channel;
  for (auto& v : current.values()) v += 0.5;
  return current;
}

/// Splits a color-corrected image into a smooth structure layer and the signed
/// residual texture = corrected - structure.
inline Decomposition decompose(const RgbImage& corrected, const RtvConfig& cfg) {
  Decomposition out{RgbImage(corrected.width(), corrected.height()),
                    TextureImage(corrected.width(), corrected.height())};
  for (int c = 0; c < 3; ++c) {
    out.structure[c] = rtv_smooth(corrected[c], cfg);
    for (std::size_t i = 0; i < corrected.pixel_count(); ++i)
      out.texture[c][i] = detail::exact_residual(corrected[c][i], out.structure[c][i]);
  }
  return out;
}

}  // namespace uwstr
