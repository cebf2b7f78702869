#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qdemu/analysis.hpp"
#include "qdemu/io.hpp"
#include "qdemu/rng.hpp"

namespace qdemu {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// Per-row gradients of output column `col`; rows are independent, so the
// gradient of the column sum is each row's own gradient.
std::vector<float> column_gradients(const ModelSpec& spec, const ParameterSet& params,
                                    const float* inputs, std::size_t count, std::size_t col) {
  Tape tape;
  const std::size_t in = spec.input_size();
  const Var x = tape.leaf(Tensor({count, in}, std::vector<float>(inputs, inputs + count * in)));
  const ForwardPass f = forward(tape, spec, params, x, false);
  const Var picked = ad::slice_cols(f.output, col, 1);
  const Var total = ad::matmul(tape.constant(Tensor({1, count}, 1.0f)), picked);
  tape.backward(total);
  const auto g = x.grad().values();
  return {g.begin(), g.end()};
}

AttributionMap empty_map(const ModelSpec& spec) {
  AttributionMap m;
  m.history = spec.history;
  m.width = spec.width;
  m.channels = spec.channels;
  m.d_re.assign(spec.input_size(), 0.0);
  m.d_im.assign(spec.input_size(), 0.0);
  return m;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double relative_deviation(const std::vector<double>& a, const std::vector<double>& b,
                          double sign) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] + sign * b[i];
  const double na = norm(a), nb = norm(b);
  const double denom = std::sqrt(0.5 * (na * na + nb * nb));
  if (denom == 0.0) throw std::invalid_argument("cauchy_riemann_check: zero gradients");
  return norm(d) / denom;
}

}  // namespace

std::vector<AttributionMap> direct_gradients(const ModelSpec& spec, const ParameterSet& params,
                                             const float* inputs, std::size_t count) {
  const std::size_t center = spec.width / 2;  // offset 0
  const auto re = column_gradients(spec, params, inputs, count, 2 * center);
  const auto im = column_gradients(spec, params, inputs, count, 2 * center + 1);
  const std::size_t in = spec.input_size();
  std::vector<AttributionMap> out(count, empty_map(spec));
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t i = 0; i < in; ++i) {
      out[b].d_re[i] = re[b * in + i];
      out[b].d_im[i] = im[b * in + i];
    }
  }
  return out;
}

AttributionMap direct_gradients(const ModelSpec& spec, const ParameterSet& params,
                                const WindowSample& sample) {
  if (sample.input.size() != spec.input_size()) {
    throw std::invalid_argument("direct_gradients: sample does not match the model input");
  }
  AttributionMap m = direct_gradients(spec, params, sample.input.data(), 1)[0];
  m.origin = sample.origin;
  return m;
}

bool free_region_window(const Dataset& data, std::size_t k) {
  const WindowConfig& c = data.config;
  if (c.channels < 3) return true;
  std::vector<float> x(c.input_size());
  data.copy_input(k, x.data());
  for (std::size_t i = 2; i < c.input_size(); i += c.channels) {
    if (x[i] != 0.0f) return false;
  }
  return true;
}

bool recency_holds(const AttributionMap& m) {
  if (m.history < 4) throw std::invalid_argument("recency_holds: needs H >= 4");
  auto mass = [&](std::size_t h0) {
    double s = 0.0;
    for (std::size_t h = h0; h < h0 + 2; ++h) {
      for (std::size_t w = 0; w < m.width; ++w) {
        for (std::size_t c = 0; c < 2; ++c) {
          const std::size_t i = m.index(h, w, c);
          s += std::abs(m.d_re[i]) + std::abs(m.d_im[i]);
        }
      }
    }
    return s;
  };
  return mass(m.history - 2) > mass(0);
}

AttributionStats averaged_gradients(const ModelSpec& spec, const ParameterSet& params,
                                    const Dataset& data, std::size_t n, std::uint64_t seed,
                                    const std::function<bool(std::size_t)>& keep) {
  if (data.config.input_size() != spec.input_size()) {
    throw std::invalid_argument("averaged_gradients: dataset windows do not match the model");
  }
  std::vector<std::size_t> pool;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!keep || keep(k)) pool.push_back(k);
  }
  if (n == 0 || n > pool.size()) {
    throw std::invalid_argument("averaged_gradients: n = " + std::to_string(n) + " but only " +
                                std::to_string(pool.size()) + " eligible windows");
  }
  Rng rng(seed);
  shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);

  AttributionStats st;
  st.samples = pool;
  st.mean = empty_map(spec);
  st.std = empty_map(spec);
  std::vector<double> m2_re(spec.input_size(), 0.0), m2_im(spec.input_size(), 0.0);
  std::size_t seen = 0, recent = 0;
  constexpr std::size_t kBatch = 128;
  std::vector<float> batch;
  for (std::size_t b0 = 0; b0 < n; b0 += kBatch) {
    const std::size_t count = std::min(kBatch, n - b0);
    batch.resize(count * spec.input_size());
    for (std::size_t i = 0; i < count; ++i) {
      data.copy_input(pool[b0 + i], batch.data() + i * spec.input_size());
    }
    const auto maps = direct_gradients(spec, params, batch.data(), count);
    for (const auto& m : maps) {
      ++seen;
      if (m.history >= 4 && recency_holds(m)) ++recent;
      // Welford.
      for (std::size_t i = 0; i < m.d_re.size(); ++i) {
        const double dr = m.d_re[i] - st.mean.d_re[i];
        st.mean.d_re[i] += dr / static_cast<double>(seen);
        m2_re[i] += dr * (m.d_re[i] - st.mean.d_re[i]);
        const double di = m.d_im[i] - st.mean.d_im[i];
        st.mean.d_im[i] += di / static_cast<double>(seen);
        m2_im[i] += di * (m.d_im[i] - st.mean.d_im[i]);
      }
    }
  }
  for (std::size_t i = 0; i < m2_re.size(); ++i) {
    st.std.d_re[i] = std::sqrt(m2_re[i] / static_cast<double>(n));
    st.std.d_im[i] = std::sqrt(m2_im[i] / static_cast<double>(n));
  }
  st.recency_fraction = static_cast<double>(recent) / static_cast<double>(n);
  return st;
}

CauchyRiemannReport cauchy_riemann_check(const AttributionMap& m) {
  if (m.channels < 2) throw std::invalid_argument("cauchy_riemann_check: needs wave channels");
  std::vector<double> re_re, im_im, re_im, im_re;
  for (std::size_t h = 0; h < m.history; ++h) {
    for (std::size_t w = 0; w < m.width; ++w) {
      re_re.push_back(m.d_re[m.index(h, w, 0)]);
      im_im.push_back(m.d_im[m.index(h, w, 1)]);
      re_im.push_back(m.d_re[m.index(h, w, 1)]);
      im_re.push_back(m.d_im[m.index(h, w, 0)]);
    }
  }
  return {relative_deviation(re_re, im_im, -1.0), relative_deviation(re_im, im_re, 1.0)};
}

void write_attribution_csv(const std::filesystem::path& path, const AttributionStats& s) {
  std::ostringstream out;
  out << "h,w,c,mean_d_re,mean_d_im,std_d_re,std_d_im\n" << std::setprecision(10);
  const AttributionMap& m = s.mean;
  for (std::size_t h = 0; h < m.history; ++h) {
    for (std::size_t w = 0; w < m.width; ++w) {
      for (std::size_t c = 0; c < m.channels; ++c) {
        const std::size_t i = m.index(h, w, c);
        out << h << ',' << w << ',' << c << ',' << m.d_re[i] << ',' << m.d_im[i] << ','
            << s.std.d_re[i] << ',' << s.std.d_im[i] << '\n';
      }
    }
  }
  io::write_text(path, out.str());
}

}  // namespace qdemu
