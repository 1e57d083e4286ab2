#include "rmnet/kernels.hpp"

#include <cstring>
#include <string>

#if defined(__x86_64__) || defined(_M_X64)
#define RMNET_X86 1
#include <immintrin.h>
#else
#define RMNET_X86 0
#endif

#if defined(__aarch64__)
#define RMNET_NEON 1
#include <arm_neon.h>
#else
#define RMNET_NEON 0
#endif

namespace rmnet::kernels {

namespace {

void affine_dense_scalar(const double* w, const double* b, std::size_t rows,
                         std::size_t cols, const double* in, double* out,
                         std::size_t batch, bool relu) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wrow = w + i * cols;
    double* orow = out + i * batch;
    for (std::size_t s = 0; s < batch; ++s) orow[s] = b[i];
    for (std::size_t j = 0; j < cols; ++j) {
      const double wj = wrow[j];
      if (wj == 0.0) continue;
      const double* irow = in + j * batch;
      for (std::size_t s = 0; s < batch; ++s) orow[s] += wj * irow[s];
    }
    if (relu) {
      for (std::size_t s = 0; s < batch; ++s) orow[s] = orow[s] > 0.0 ? orow[s] : 0.0;
    }
  }
}

void affine_sparse_scalar(const SparseLayout& m, const double* b, std::size_t rows,
                          const double* in, double* out, std::size_t batch, bool relu) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* orow = out + i * batch;
    for (std::size_t s = 0; s < batch; ++s) orow[s] = b[i];
    for (std::int32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
      const double wj = m.val[k];
      const double* irow = in + static_cast<std::size_t>(m.col[k]) * batch;
      for (std::size_t s = 0; s < batch; ++s) orow[s] += wj * irow[s];
    }
    if (relu) {
      for (std::size_t s = 0; s < batch; ++s) orow[s] = orow[s] > 0.0 ? orow[s] : 0.0;
    }
  }
}

#if RMNET_X86

__attribute__((target("avx2"))) void affine_dense_avx2(const double* w, const double* b,
                                                       std::size_t rows, std::size_t cols,
                                                       const double* in, double* out,
                                                       std::size_t batch, bool relu) {
  const std::size_t b4 = batch & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wrow = w + i * cols;
    double* orow = out + i * batch;
    const __m256d bi = _mm256_set1_pd(b[i]);
    for (std::size_t s = 0; s < b4; s += 4) _mm256_storeu_pd(orow + s, bi);
    for (std::size_t s = b4; s < batch; ++s) orow[s] = b[i];
    for (std::size_t j = 0; j < cols; ++j) {
      const double wj = wrow[j];
      if (wj == 0.0) continue;
      const double* irow = in + j * batch;
      const __m256d wv = _mm256_set1_pd(wj);
      for (std::size_t s = 0; s < b4; s += 4) {
        __m256d acc = _mm256_loadu_pd(orow + s);
        // mul+add (not FMA) to stay bit-identical with the scalar kernel
        acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, _mm256_loadu_pd(irow + s)));
        _mm256_storeu_pd(orow + s, acc);
      }
      for (std::size_t s = b4; s < batch; ++s) orow[s] += wj * irow[s];
    }
    if (relu) {
      for (std::size_t s = 0; s < b4; s += 4)
        _mm256_storeu_pd(orow + s, _mm256_max_pd(zero, _mm256_loadu_pd(orow + s)));
      for (std::size_t s = b4; s < batch; ++s) orow[s] = orow[s] > 0.0 ? orow[s] : 0.0;
    }
  }
}

__attribute__((target("avx2"))) void affine_sparse_avx2(const SparseLayout& m, const double* b,
                                                        std::size_t rows, const double* in,
                                                        double* out, std::size_t batch,
                                                        bool relu) {
  const std::size_t b4 = batch & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < rows; ++i) {
    double* orow = out + i * batch;
    const __m256d bi = _mm256_set1_pd(b[i]);
    for (std::size_t s = 0; s < b4; s += 4) _mm256_storeu_pd(orow + s, bi);
    for (std::size_t s = b4; s < batch; ++s) orow[s] = b[i];
    for (std::int32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
      const double wj = m.val[k];
      const double* irow = in + static_cast<std::size_t>(m.col[k]) * batch;
      const __m256d wv = _mm256_set1_pd(wj);
      for (std::size_t s = 0; s < b4; s += 4) {
        __m256d acc = _mm256_loadu_pd(orow + s);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, _mm256_loadu_pd(irow + s)));
        _mm256_storeu_pd(orow + s, acc);
      }
      for (std::size_t s = b4; s < batch; ++s) orow[s] += wj * irow[s];
    }
    if (relu) {
      for (std::size_t s = 0; s < b4; s += 4)
        _mm256_storeu_pd(orow + s, _mm256_max_pd(zero, _mm256_loadu_pd(orow + s)));
      for (std::size_t s = b4; s < batch; ++s) orow[s] = orow[s] > 0.0 ? orow[s] : 0.0;
    }
  }
}

#endif  // RMNET_X86

#if RMNET_NEON

void affine_dense_neon(const double* w, const double* b, std::size_t rows, std::size_t cols,
                       const double* in, double* out, std::size_t batch, bool relu) {
  const std::size_t b2 = batch & ~std::size_t{1};
  const float64x2_t zero = vdupq_n_f64(0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wrow = w + i * cols;
    double* orow = out + i * batch;
    const float64x2_t bi = vdupq_n_f64(b[i]);
    for (std::size_t s = 0; s < b2; s += 2) vst1q_f64(orow + s, bi);
    for (std::size_t s = b2; s < batch; ++s) orow[s] = b[i];
    for (std::size_t j = 0; j < cols; ++j) {
      const double wj = wrow[j];
      if (wj == 0.0) continue;
      const double* irow = in + j * batch;
      const float64x2_t wv = vdupq_n_f64(wj);
      for (std::size_t s = 0; s < b2; s += 2) {
        float64x2_t acc = vld1q_f64(orow + s);
        acc = vaddq_f64(acc, vmulq_f64(wv, vld1q_f64(irow + s)));
        vst1q_f64(orow + s, acc);
      }
      for (std::size_t s = b2; s < batch; ++s) orow[s] += wj * irow[s];
    }
    if (relu) {
      for (std::size_t s = 0; s < b2; s += 2)
        vst1q_f64(orow + s, vmaxq_f64(zero, vld1q_f64(orow + s)));
      for (std::size_t s = b2; s < batch; ++s) orow[s] = orow[s] > 0.0 ? orow[s] : 0.0;
    }
  }
}

void affine_sparse_neon(const SparseLayout& m, const double* b, std::size_t rows,
                        const double* in, double* out, std::size_t batch, bool relu) {
  const std::size_t b2 = batch & ~std::size_t{1};
  const float64x2_t zero = vdupq_n_f64(0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double* orow = out + i * batch;
    const float64x2_t bi = vdupq_n_f64(b[i]);
    for (std::size_t s = 0; s < b2; s += 2) vst1q_f64(orow + s, bi);
    for (std::size_t s = b2; s < batch; ++s) orow[s] = b[i];
    for (std::int32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
      const double wj = m.val[k];
      const double* irow = in + static_cast<std::size_t>(m.col[k]) * batch;
      const float64x2_t wv = vdupq_n_f64(wj);
      for (std::size_t s = 0; s < b2; s += 2) {
        float64x2_t acc = vld1q_f64(orow + s);
        acc = vaddq_f64(acc, vmulq_f64(wv, vld1q_f64(irow + s)));
        vst1q_f64(orow + s, acc);
      }
      for (std::size_t s = b2; s < batch; ++s) orow[s] += wj * irow[s];
    }
    if (relu) {
      for (std::size_t s = 0; s < b2; s += 2)
        vst1q_f64(orow + s, vmaxq_f64(zero, vld1q_f64(orow + s)));
      for (std::size_t s = b2; s < batch; ++s) orow[s] = orow[s] > 0.0 ? orow[s] : 0.0;
    }
  }
}

#endif  // RMNET_NEON

const Table kScalar{affine_dense_scalar, affine_sparse_scalar, "scalar"};

#if RMNET_X86
const Table kAvx2{affine_dense_avx2, affine_sparse_avx2, "avx2"};
#endif
#if RMNET_NEON
const Table kNeon{affine_dense_neon, affine_sparse_neon, "neon"};
#endif

const Table* g_forced = nullptr;

const Table* detect() {
#if RMNET_X86
  if (__builtin_cpu_supports("avx2")) return &kAvx2;
#endif
#if RMNET_NEON
  return &kNeon;
#endif
  return &kScalar;
}

}  // namespace

const Table& scalar_table() { return kScalar; }

const Table& active_table() {
  if (g_forced) return *g_forced;
  static const Table* best = detect();
  return *best;
}

void force_impl(const char* name) {
  std::string n = name ? name : "auto";
  if (n == "scalar") {
    g_forced = &kScalar;
  }
#if RMNET_X86
  else if (n == "avx2") {
    g_forced = &kAvx2;
  }
#endif
#if RMNET_NEON
  else if (n == "neon") {
    g_forced = &kNeon;
  }
#endif
  else {
    g_forced = nullptr;
  }
}

}  // namespace rmnet::kernels
