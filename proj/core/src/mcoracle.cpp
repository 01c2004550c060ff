#include "covsde/mcoracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covsde/parallel.hpp"
#include "covsde/rng.hpp"

namespace covsde {

namespace {

constexpr long long kBlockSize = 4096;

void check_mc_args(int n, int n_k, long long samples) {
  if (n < 1 || n_k < 1) {
    throw std::invalid_argument("mc oracle: n and n_k must be positive");
  }
  if (samples < 2) {
    throw std::invalid_argument("mc oracle: need at least 2 samples");
  }
}

// Two-stage seeding shared by every estimator: one seed fixes the input
// frame, the other drives the per-sample streams.
struct SeedPair {
  std::uint64_t input;
  std::uint64_t loop;
};

SeedPair split_seed(std::uint64_t seed) {
  std::uint64_t sm = seed;
  SeedPair p{};
  p.input = splitmix64(sm);
  p.loop = splitmix64(sm);
  return p;
}

// Accumulates nvals per-sample values into sums and sums of squares.
// Samples are processed in fixed-size blocks whose compensated partial sums
// are combined in block order, and each sample draws from its own substream,
// so results are bit-identical for any worker count.
void accumulate_blocks(long long samples, std::uint64_t loop_seed, int nvals,
                       const std::function<void(long long, RandomStream&, double*)>& fn,
                       std::vector<double>& sum_out, std::vector<double>& sumsq_out) {
  const long long blocks = (samples + kBlockSize - 1) / kBlockSize;
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(blocks));
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    const long long lo = static_cast<long long>(b) * kBlockSize;
    const long long hi = std::min(samples, lo + kBlockSize);
    std::vector<KahanSum> s(static_cast<std::size_t>(nvals));
    std::vector<KahanSum> s2(static_cast<std::size_t>(nvals));
    std::vector<double> vals(static_cast<std::size_t>(nvals));
    for (long long i = lo; i < hi; ++i) {
      RandomStream rs = RandomStream::substream(loop_seed, static_cast<std::uint64_t>(i));
      fn(i, rs, vals.data());
      for (int k = 0; k < nvals; ++k) {
        s[static_cast<std::size_t>(k)].add(vals[static_cast<std::size_t>(k)]);
        s2[static_cast<std::size_t>(k)].add(vals[static_cast<std::size_t>(k)] *
                                            vals[static_cast<std::size_t>(k)]);
      }
    }
    auto& out = partial[b];
    out.resize(2 * static_cast<std::size_t>(nvals));
    for (int k = 0; k < nvals; ++k) {
      out[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k)].value();
      out[static_cast<std::size_t>(nvals + k)] = s2[static_cast<std::size_t>(k)].value();
    }
  });
  std::vector<KahanSum> gs(static_cast<std::size_t>(nvals));
  std::vector<KahanSum> gs2(static_cast<std::size_t>(nvals));
  for (long long b = 0; b < blocks; ++b) {
    const auto& p = partial[static_cast<std::size_t>(b)];
    for (int k = 0; k < nvals; ++k) {
      gs[static_cast<std::size_t>(k)].add(p[static_cast<std::size_t>(k)]);
      gs2[static_cast<std::size_t>(k)].add(p[static_cast<std::size_t>(nvals + k)]);
    }
  }
  sum_out.resize(static_cast<std::size_t>(nvals));
  sumsq_out.resize(static_cast<std::size_t>(nvals));
  for (int k = 0; k < nvals; ++k) {
    sum_out[static_cast<std::size_t>(k)] = gs[static_cast<std::size_t>(k)].value();
    sumsq_out[static_cast<std::size_t>(k)] = gs2[static_cast<std::size_t>(k)].value();
  }
}

MomentEstimate finalize(double sum, double sumsq, long long samples) {
  MomentEstimate e;
  e.samples = samples;
  const double count = static_cast<double>(samples);
  e.mean = sum / count;
  const double var = (sumsq - count * e.mean * e.mean) / (count - 1.0);
  e.std_error = std::sqrt(std::max(var, 0.0) / count);
  return e;
}

// out(a, j) = sum_i x(a, i) w_j(i) for fresh standard-normal columns w_j.
// Columns are streamed so no n x n_k weight matrix is materialized.
void project_columns(const Matrix& x, int n_k, RandomStream& rs, std::vector<double>& wcol,
                     Matrix& out) {
  const int m = x.rows;
  const int n = x.cols;
  for (int j = 0; j < n_k; ++j) {
    rs.fill_normal(wcol.data(), static_cast<std::size_t>(n));
    for (int a = 0; a < m; ++a) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += x(a, i) * wcol[static_cast<std::size_t>(i)];
      }
      out(a, j) = acc;
    }
  }
}

// y = (x Wq)(x Wk)^T / n with explicit Gaussian weights.
void draw_logits(const Matrix& x, int n_k, RandomStream& rs, Matrix& q, Matrix& k,
                 std::vector<double>& wcol, Matrix& y) {
  const int m = x.rows;
  const int n = x.cols;
  project_columns(x, n_k, rs, wcol, q);
  project_columns(x, n_k, rs, wcol, k);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      double acc = 0.0;
      for (int j = 0; j < n_k; ++j) {
        acc += q(a, j) * k(b, j);
      }
      y(a, b) = acc * inv_n;
    }
  }
}

void check_token_index(int idx, int m, const char* what) {
  if (idx < 0 || idx >= m) {
    throw std::out_of_range(std::string(what) + ": token index out of range");
  }
}

}  // namespace

YMomentBatch estimate_y_moment_batch(const TokenCovariance& v,
                                     const std::vector<std::array<int, 4>>& product_tuples,
                                     const std::vector<std::array<int, 2>>& mean_tuples,
                                     int n, int n_k, long long samples, std::uint64_t seed) {
  check_mc_args(n, n_k, samples);
  const int m = v.dim();
  for (const auto& t : product_tuples) {
    for (int idx : t) {
      check_token_index(idx, m, "estimate_y_moment_batch");
    }
  }
  for (const auto& t : mean_tuples) {
    for (int idx : t) {
      check_token_index(idx, m, "estimate_y_moment_batch");
    }
  }
  const SeedPair sp = split_seed(seed);
  const Matrix x = build_inputs(v, m, n, sp.input);
  const int np = static_cast<int>(product_tuples.size());
  const int nm = static_cast<int>(mean_tuples.size());
  const int nvals = np + nm;
  if (nvals == 0) {
    return YMomentBatch{};
  }
  std::vector<double> sum;
  std::vector<double> sumsq;
  accumulate_blocks(
      samples, sp.loop, nvals,
      [&](long long, RandomStream& rs, double* vals) {
        Matrix q(m, n_k);
        Matrix k(m, n_k);
        Matrix y(m, m);
        std::vector<double> wcol(static_cast<std::size_t>(n));
        draw_logits(x, n_k, rs, q, k, wcol, y);
        for (int t = 0; t < np; ++t) {
          const auto& p = product_tuples[static_cast<std::size_t>(t)];
          vals[t] = y(p[0], p[1]) * y(p[2], p[3]);
        }
        for (int t = 0; t < nm; ++t) {
          const auto& p = mean_tuples[static_cast<std::size_t>(t)];
          vals[np + t] = y(p[0], p[1]);
        }
      },
      sum, sumsq);
  YMomentBatch out;
  out.products.reserve(static_cast<std::size_t>(np));
  for (int t = 0; t < np; ++t) {
    out.products.push_back(finalize(sum[static_cast<std::size_t>(t)],
                                    sumsq[static_cast<std::size_t>(t)], samples));
  }
  out.means.reserve(static_cast<std::size_t>(nm));
  for (int t = 0; t < nm; ++t) {
    out.means.push_back(finalize(sum[static_cast<std::size_t>(np + t)],
                                 sumsq[static_cast<std::size_t>(np + t)], samples));
  }
  return out;
}

MomentEstimate estimate_y_moment(const TokenCovariance& v, int alpha, int beta, int delta,
                                 int omega, int n, int n_k, long long samples,
                                 std::uint64_t seed) {
  const YMomentBatch batch = estimate_y_moment_batch(
      v, {{alpha, beta, delta, omega}}, {}, n, n_k, samples, seed);
  return batch.products.front();
}

MomentEstimate estimate_y_mean(const TokenCovariance& v, int alpha, int beta, int n, int n_k,
                               long long samples, std::uint64_t seed) {
  const YMomentBatch batch =
      estimate_y_moment_batch(v, {}, {{alpha, beta}}, n, n_k, samples, seed);
  return batch.means.front();
}

TaylorMoments estimate_taylor_moments(const TokenCovariance& v, int n, int n_k,
                                      long long samples, std::uint64_t seed) {
  check_mc_args(n, n_k, samples);
  const int m = v.dim();
  const SeedPair sp = split_seed(seed);
  const Matrix x = build_inputs(v, m, n, sp.input);
  const int s1_count = m * m * m * m;
  const int s2_count = m * m;
  const int nvals = s1_count + s2_count;
  std::vector<double> sum;
  std::vector<double> sumsq;
  accumulate_blocks(
      samples, sp.loop, nvals,
      [&](long long, RandomStream& rs, double* vals) {
        Matrix q(m, n_k);
        Matrix k(m, n_k);
        Matrix y(m, m);
        std::vector<double> wcol(static_cast<std::size_t>(n));
        draw_logits(x, n_k, rs, q, k, wcol, y);
        // Row-centered logits: f1(a, d) = y(a, d) - rowmean_a(y).
        Matrix f1(m, m);
        for (int a = 0; a < m; ++a) {
          double rm = 0.0;
          for (int d = 0; d < m; ++d) {
            rm += y(a, d);
          }
          rm /= static_cast<double>(m);
          for (int d = 0; d < m; ++d) {
            f1(a, d) = y(a, d) - rm;
          }
        }
        const double inv = 1.0 / static_cast<double>(n_k);
        for (int a = 0; a < m; ++a) {
          for (int d = 0; d < m; ++d) {
            const int row = a * m + d;
            for (int b = 0; b < m; ++b) {
              for (int w = 0; w < m; ++w) {
                vals[row * m * m + b * m + w] = f1(a, d) * f1(b, w) * inv;
              }
            }
          }
        }
        for (int a = 0; a < m; ++a) {
          double avg = 0.0;
          for (int w = 0; w < m; ++w) {
            avg += f1(a, w) * f1(a, w);
          }
          avg /= static_cast<double>(m);
          for (int d = 0; d < m; ++d) {
            vals[s1_count + a * m + d] = (f1(a, d) * f1(a, d) - avg) * inv;
          }
        }
      },
      sum, sumsq);
  TaylorMoments out;
  out.m = m;
  out.samples = samples;
  out.s1_mean = Matrix(m * m, m * m);
  out.s1_se = Matrix(m * m, m * m);
  for (int row = 0; row < m * m; ++row) {
    for (int col = 0; col < m * m; ++col) {
      const MomentEstimate e = finalize(sum[static_cast<std::size_t>(row * m * m + col)],
                                        sumsq[static_cast<std::size_t>(row * m * m + col)],
                                        samples);
      out.s1_mean(row, col) = e.mean;
      out.s1_se(row, col) = e.std_error;
    }
  }
  out.s2_mean = Matrix(m, m);
  out.s2_se = Matrix(m, m);
  for (int a = 0; a < m; ++a) {
    for (int d = 0; d < m; ++d) {
      const MomentEstimate e =
          finalize(sum[static_cast<std::size_t>(s1_count + a * m + d)],
                   sumsq[static_cast<std::size_t>(s1_count + a * m + d)], samples);
      out.s2_mean(a, d) = e.mean;
      out.s2_se(a, d) = e.std_error;
    }
  }
  return out;
}

MomentEstimate estimate_k1(double rho, double cplus, double cminus, int n, long long samples,
                           std::uint64_t seed) {
  if (!(std::abs(rho) <= 1.0)) {
    throw std::domain_error("estimate_k1: correlation outside [-1, 1]");
  }
  if (!std::isfinite(cplus) || !std::isfinite(cminus)) {
    throw std::invalid_argument("estimate_k1: slope offsets must be finite");
  }
  check_mc_args(n, 1, samples);
  const SeedPair sp = split_seed(seed);
  const double c = he_constant(cplus, cminus, n);
  const double rn = std::sqrt(static_cast<double>(n));
  // Deterministic part of the control variate: the O(n) and O(sqrt(n))
  // pieces of n*(c*K1(rho) - rho) are replaced by their exact expectations,
  // leaving only the O(1) product term to sample.
  const double base =
      static_cast<double>(n) * (c - 1.0) * rho + rn * c * (cplus + cminus) * rho;
  const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  std::vector<double> sum;
  std::vector<double> sumsq;
  accumulate_blocks(
      samples, sp.loop, 1,
      [&](long long, RandomStream& rs, double* vals) {
        const double g1 = rs.normal();
        const double g2 = rho * g1 + ortho * rs.normal();
        const double p1 = cplus * std::max(g1, 0.0) + cminus * std::min(g1, 0.0);
        const double p2 = cplus * std::max(g2, 0.0) + cminus * std::min(g2, 0.0);
        vals[0] = base + c * p1 * p2;
      },
      sum, sumsq);
  return finalize(sum[0], sumsq[0], samples);
}

namespace {

// One layer of the requested kind. Uses the projected update (exact in
// distribution given the input covariance) unless explicit weights were
// requested; cfg.variant must already match layer_kind.
Matrix one_layer(CoeffKind layer_kind, const Matrix& x0, const NetConfig& cfg,
                 RandomStream& rs) {
  if (!cfg.explicit_weights) {
    return projected_layer(x0, cfg, rs);
  }
  const LayerWeights w = sample_layer_weights(rs, cfg.n, cfg.n_k);
  switch (layer_kind) {
    case CoeffKind::resnet:
      return resnet_layer(x0, w, cfg);
    case CoeffKind::attention:
      return attention_layer(x0, w, cfg);
    case CoeffKind::transformer:
      return transformer_block(x0, w, cfg);
  }
  throw std::invalid_argument("one_step_moments: unknown layer kind");
}

}  // namespace

OneStepMoments one_step_moments(CoeffKind layer_kind, const TokenCovariance& v0, int n, int n_k,
                                const NetConfig& config, long long samples, std::uint64_t seed) {
  check_mc_args(n, n_k, samples);
  const int m = v0.dim();
  NetConfig cfg = config;
  cfg.n = n;
  cfg.n_k = n_k;
  cfg.m = m;
  switch (layer_kind) {
    case CoeffKind::resnet:
      cfg.variant = NetVariant::resnet_relu;
      break;
    case CoeffKind::attention:
      cfg.variant = NetVariant::shaped_attention;
      break;
    case CoeffKind::transformer:
      cfg.variant = NetVariant::shaped_transformer;
      break;
    default:
      throw std::invalid_argument("one_step_moments: unknown layer kind");
  }
  cfg.validate();
  const SeedPair sp = split_seed(seed);
  const Matrix x0 = build_inputs(v0, m, n, sp.input);
  const std::vector<double> v_in = flatten(covariance_of(x0, n));
  const FlatIndexMap map(m);
  const int mm = map.size();
  const int nvals = mm + mm * (mm + 1) / 2;
  std::vector<double> sum;
  std::vector<double> sumsq;
  accumulate_blocks(
      samples, sp.loop, nvals,
      [&](long long, RandomStream& rs, double* vals) {
        const Matrix x1 = one_layer(layer_kind, x0, cfg, rs);
        const std::vector<double> v_out = flatten(covariance_of(x1, n));
        for (int k = 0; k < mm; ++k) {
          vals[k] = static_cast<double>(n) *
                    (v_out[static_cast<std::size_t>(k)] - v_in[static_cast<std::size_t>(k)]);
        }
        int slot = mm;
        for (int k = 0; k < mm; ++k) {
          for (int l = k; l < mm; ++l) {
            vals[slot++] = vals[k] * vals[l];
          }
        }
      },
      sum, sumsq);
  OneStepMoments out;
  out.samples = samples;
  out.drift.reserve(static_cast<std::size_t>(mm));
  for (int k = 0; k < mm; ++k) {
    out.drift.push_back(finalize(sum[static_cast<std::size_t>(k)],
                                 sumsq[static_cast<std::size_t>(k)], samples));
  }
  out.diffusion = Matrix(mm, mm);
  out.diffusion_se = Matrix(mm, mm);
  // With u = n*dV: n*Cov[dV_k, dV_l] = (E[u_k u_l] - E[u_k] E[u_l]) / n.
  // The quoted error keeps the dominant product-term uncertainty.
  int slot = mm;
  for (int k = 0; k < mm; ++k) {
    for (int l = k; l < mm; ++l, ++slot) {
      const MomentEstimate pe = finalize(sum[static_cast<std::size_t>(slot)],
                                         sumsq[static_cast<std::size_t>(slot)], samples);
      const double cov =
          (pe.mean - out.drift[static_cast<std::size_t>(k)].mean *
                         out.drift[static_cast<std::size_t>(l)].mean) /
          static_cast<double>(n);
      const double se = pe.std_error / static_cast<double>(n);
      out.diffusion(k, l) = cov;
      out.diffusion(l, k) = cov;
      out.diffusion_se(k, l) = se;
      out.diffusion_se(l, k) = se;
    }
  }
  return out;
}

T2CovEstimate estimate_t2_cov(const TokenCovariance& v, int n, int n_k, double tau0,
                              long long samples, std::uint64_t seed) {
  if (!(tau0 > 0.0)) {
    throw std::invalid_argument("estimate_t2_cov: tau0 must be positive");
  }
  NetConfig cfg;
  cfg.n = n;
  cfg.n_k = n_k;
  cfg.m = v.dim();
  // lambda = 0, gamma = 1 removes the skip connection and the branch scaling,
  // so n*Cov[dV] isolates the attention diffusion sigma_lin + tau0^-2 * A.
  cfg.lambda = 0.0;
  cfg.gamma = 1.0;
  cfg.tau0 = tau0;
  cfg.variant = NetVariant::shaped_attention;
  const OneStepMoments one = one_step_moments(CoeffKind::attention, v, n, n_k, cfg, samples, seed);
  const Matrix lin = sigma_lin(v);
  T2CovEstimate out;
  out.samples = samples;
  out.estimate = one.diffusion;
  for (int k = 0; k < out.estimate.rows; ++k) {
    for (int l = 0; l < out.estimate.cols; ++l) {
      out.estimate(k, l) -= lin(k, l);
    }
  }
  out.std_error = one.diffusion_se;
  return out;
}

}  // namespace covsde
