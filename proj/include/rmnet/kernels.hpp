#pragma once

#include <cstddef>
#include <cstdint>

// Batched affine/ReLU kernels behind a runtime-dispatched table.
//
// Activations are stored transposed: acts[i * batch + s] holds unit i of
// sample s, so a layer walks each output row once and vectorizes over the
// batch. The scalar kernels are the reference semantics; the SIMD variants
// (AVX2 on x86-64, NEON on aarch64) must produce bit-identical results, which
// is why they use separate mul/add instead of FMA. Equivalence is enforced by
// tests/test_kernels.cpp.

namespace rmnet::kernels {

struct SparseLayout {
  const std::int32_t* row_ptr;  // rows + 1 entries
  const std::int32_t* col;      // nnz entries
  const double* val;            // nnz entries
};

using AffineDenseFn = void (*)(const double* w, const double* b, std::size_t rows,
                               std::size_t cols, const double* in, double* out,
                               std::size_t batch, bool relu);
using AffineSparseFn = void (*)(const SparseLayout& m, const double* b, std::size_t rows,
                                const double* in, double* out, std::size_t batch, bool relu);

struct Table {
  AffineDenseFn affine_dense;
  AffineSparseFn affine_sparse;
  const char* name;
};

// scalar reference kernels
const Table& scalar_table();
// best table for this machine, chosen once at first use
const Table& active_table();
// dispatch override for testing ("scalar", "avx2", "neon", "auto")
void force_impl(const char* name);

}  // namespace rmnet::kernels
