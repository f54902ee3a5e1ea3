// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dpgwave/kernels.hpp"

using namespace dpgwave;

namespace {

std::vector<double> random_vec(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar reference outer product accumulate") {
  const auto& k = kernels::scalar_ref();
  // conj(x) y for a 1x1 case: (1 - 2i)(3 + 4i) = 11 - 2i
  double mre = 0.0, mim = 0.0;
  const double xre = 1.0, xim = 2.0, yre = 3.0, yim = 4.0;
  k.outer_acc_cplx(&mre, &mim, &xre, &xim, &yre, &yim, 1.0, 1, 1);
  CHECK(mre == doctest::Approx(11.0));
  CHECK(mim == doctest::Approx(-2.0));
}

TEST_CASE("dispatched kernels match the scalar reference") {
  const auto& ref = kernels::scalar_ref();
  const auto& act = kernels::active();
  INFO("active isa: ", act.isa);
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> size(1, 37);
    const std::size_t m = std::size_t(size(rng));
    const std::size_t n = std::size_t(size(rng));
    const auto xre = random_vec(rng, m), xim = random_vec(rng, m);
    const auto yre = random_vec(rng, n), yim = random_vec(rng, n);
    const double w = 0.3 + trial * 0.01;

    std::vector<double> a_re(m * n, 0.5), a_im(m * n, -0.25);
    std::vector<double> b_re = a_re, b_im = a_im;
    ref.outer_acc_cplx(a_re.data(), a_im.data(), xre.data(), xim.data(),
                       yre.data(), yim.data(), w, m, n);
    act.outer_acc_cplx(b_re.data(), b_im.data(), xre.data(), xim.data(),
                       yre.data(), yim.data(), w, m, n);
    for (std::size_t i = 0; i < m * n; ++i) {
      CHECK(a_re[i] == doctest::Approx(b_re[i]).epsilon(1e-13));
      CHECK(a_im[i] == doctest::Approx(b_im[i]).epsilon(1e-13));
    }

    std::vector<double> c0(m * n, 1.0), c1(m * n, 1.0);
    ref.outer_acc_real(c0.data(), xre.data(), yre.data(), w, m, n);
    act.outer_acc_real(c1.data(), xre.data(), yre.data(), w, m, n);
    for (std::size_t i = 0; i < m * n; ++i)
      CHECK(c0[i] == doctest::Approx(c1[i]).epsilon(1e-13));

    std::vector<double> d0re(n, 0.0), d0im(n, 0.0), d1re(n, 0.0), d1im(n, 0.0);
    ref.axpy_cplx(d0re.data(), d0im.data(), 1.5, -0.5, yre.data(), n);
    act.axpy_cplx(d1re.data(), d1im.data(), 1.5, -0.5, yre.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(d0re[i] == doctest::Approx(d1re[i]).epsilon(1e-13));
      CHECK(d0im[i] == doctest::Approx(d1im[i]).epsilon(1e-13));
    }

    const auto wv = random_vec(rng, n);
    const double s0 = ref.weighted_norm2(wv.data(), yre.data(), yim.data(), n);
    const double s1 = act.weighted_norm2(wv.data(), yre.data(), yim.data(), n);
    CHECK(s0 == doctest::Approx(s1).epsilon(1e-12));
  }
}

TEST_CASE("isa forcing") {
  REQUIRE(kernels::force_isa("scalar"));
  CHECK(std::string(kernels::active().isa) == "scalar");
  REQUIRE(kernels::force_isa(nullptr));
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    CHECK(std::string(kernels::active().isa) == "avx2");
#endif
  CHECK_FALSE(kernels::force_isa("not-an-isa"));
}

TEST_CASE("hermitian accumulation stays hermitian") {
  const auto& k = kernels::active();
  std::mt19937 rng(7);
  const std::size_t n = 9;
  const auto xre = random_vec(rng, n), xim = random_vec(rng, n);
  std::vector<double> g_re(n * n, 0.0), g_im(n * n, 0.0);
  k.outer_acc_cplx(g_re.data(), g_im.data(), xre.data(), xim.data(), xre.data(),
                   xim.data(), 0.7, n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(g_re[i * n + j] == doctest::Approx(g_re[j * n + i]).epsilon(1e-14));
      CHECK(g_im[i * n + j] == doctest::Approx(-g_im[j * n + i]).epsilon(1e-14));
    }
}
