#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine/rng.hpp"
#include "refine/serialize.hpp"
#include "refine/synth.hpp"

using namespace refine;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> random_point(Rng& rng, int d) {
  std::vector<double> x(static_cast<std::size_t>(d));
  for (auto& c : x) c = rng.uniform();
  return x;
}

double dot_vstar(const SyntheticTask& task, std::span<const double> x) {
  const auto feats = eval_frep(task, x);
  double out = 0.0;
  for (std::size_t j = 0; j < feats.size(); ++j)
    out += task.v_star[j] * feats[j];
  return out;
}

}  // namespace

TEST_CASE("construction is deterministic and validates inputs") {
  const auto a = make_task(2, 4, 1.5, 0.3, 0.2, FrepKind::informative_smooth, 9);
  const auto b = make_task(2, 4, 1.5, 0.3, 0.2, FrepKind::informative_smooth, 9);
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());

  CHECK_THROWS(make_task(2, 4, 2.0, 0.3, 0.2, FrepKind::zero, 9));   // integer beta
  CHECK_THROWS(make_task(2, 4, -0.5, 0.3, 0.2, FrepKind::zero, 9));
  CHECK_THROWS(make_task(0, 4, 1.5, 0.3, 0.2, FrepKind::zero, 9));
  CHECK_THROWS(make_task(2, 0, 1.5, 0.3, 0.2, FrepKind::zero, 9));
  CHECK_THROWS(make_task(2, 4, 1.5, -0.1, 0.2, FrepKind::zero, 9));
  CHECK_THROWS(make_task(2, 4, 1.5, 0.3, -0.2, FrepKind::zero, 9));
  CHECK_THROWS(make_task(2, 4, 1.5, 0.3, 0.2, FrepKind::zero, 9, 1.5));
}

TEST_CASE("zero representation forces the pure residual target") {
  const auto task = make_task(1, 3, 1.5, 0.0, 0.5, FrepKind::zero, 4);
  for (double v : task.v_star) CHECK(v == 0.0);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_point(rng, 1);
    const auto feats = eval_frep(task, x);
    for (double f : feats) CHECK(f == 0.0);
    CHECK(eval_fstar(task, x) ==
          doctest::Approx(task.rho_star * eval_g0(task, x)).epsilon(1e-14));
  }
}

TEST_CASE("residual identity holds pointwise") {
  Rng rng(6);
  SUBCASE("rho_star 0 makes the probe unbiased") {
    const auto task =
        make_task(2, 4, 1.5, 0.0, 0.0, FrepKind::informative_smooth, 11);
    for (int i = 0; i < 1000; ++i) {
      const auto x = random_point(rng, 2);
      CHECK(std::abs(eval_fstar(task, x) - dot_vstar(task, x)) <= 1e-14);
    }
  }
  SUBCASE("rho_star 0.3 keeps the residual under 0.3") {
    const auto task =
        make_task(2, 4, 1.5, 0.0, 0.3, FrepKind::informative_smooth, 11);
    double max_resid = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto x = random_point(rng, 2);
      const double resid = eval_fstar(task, x) - dot_vstar(task, x);
      CHECK(std::abs(resid - task.rho_star * eval_g0(task, x)) <= 1e-14);
      max_resid = std::max(max_resid, std::abs(resid));
    }
    CHECK(max_resid <= 0.3 + 1e-12);
  }
}

TEST_CASE("ranges stay inside the model class for every kind") {
  Rng rng(8);
  for (auto kind : {FrepKind::informative_smooth, FrepKind::random_features,
                    FrepKind::zero, FrepKind::adversarial_misaligned}) {
    for (int d : {1, 3}) {
      const auto task = make_task(d, 5, 1.5, 0.0, 0.7, kind, 21);
      for (int i = 0; i < 2500; ++i) {
        const auto x = random_point(rng, d);
        REQUIRE(std::abs(eval_fstar(task, x)) <= 1.0 + 1e-12);
        const auto feats = eval_frep(task, x);
        double norm = 0.0;
        for (double f : feats) norm += f * f;
        REQUIRE(std::sqrt(norm) <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("carrier is orthogonal to the harmonic feature blocks") {
  SUBCASE("one-dimensional quadrature") {
    for (auto kind :
         {FrepKind::informative_smooth, FrepKind::adversarial_misaligned}) {
      const auto task = make_task(1, 4, 1.5, 0.0, 0.5, kind, 31);
      const int m = 4000;
      std::vector<double> acc(4, 0.0);
      for (int i = 0; i < m; ++i) {
        const std::vector<double> x{(i + 0.5) / m};
        const double g = eval_g0(task, x);
        const auto feats = eval_frep(task, x);
        for (int j = 0; j < 4; ++j) acc[static_cast<std::size_t>(j)] += g * feats[static_cast<std::size_t>(j)];
      }
      for (double a : acc) CHECK(std::abs(a / m) <= 1e-3);
    }
  }
  SUBCASE("two-dimensional quadrature") {
    const auto task =
        make_task(2, 5, 1.5, 0.0, 0.5, FrepKind::informative_smooth, 32);
    const int m = 200;
    std::vector<double> acc(5, 0.0);
    std::vector<double> x(2);
    for (int i = 0; i < m; ++i) {
      x[0] = (i + 0.5) / m;
      for (int k = 0; k < m; ++k) {
        x[1] = (k + 0.5) / m;
        const double g = eval_g0(task, x);
        const auto feats = eval_frep(task, x);
        for (int j = 0; j < 5; ++j) acc[static_cast<std::size_t>(j)] += g * feats[static_cast<std::size_t>(j)];
      }
    }
    for (double a : acc) CHECK(std::abs(a / (m * m)) <= 1e-3);
  }
}

TEST_CASE("normalizer certifies the smoothness class numerically") {
  // d=1, first-order derivative and its Holder-1/2 quotient must stay
  // below 1 once the carrier is divided by holder_norm.
  const auto task = make_task(1, 2, 1.5, 0.0, 0.5, FrepKind::zero, 40);
  const double omega = 2.0 * kPi;
  auto deriv = [&](double u) {
    return -omega * std::sin(omega * u) / task.holder_norm;
  };
  const int m = 500;
  double max_abs = 0.0, max_quot = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double xi = static_cast<double>(i) / m;
    max_abs = std::max(max_abs, std::abs(deriv(xi)));
    for (int k = i + 1; k <= m; ++k) {
      const double xk = static_cast<double>(k) / m;
      const double quot =
          std::abs(deriv(xi) - deriv(xk)) / std::sqrt(xk - xi);
      max_quot = std::max(max_quot, quot);
    }
  }
  CHECK(max_abs <= 1.0);
  CHECK(max_quot <= 1.0);
  // |g0| itself is bounded well inside [-1,1].
  const std::vector<double> origin{0.0};
  CHECK(std::abs(eval_g0(task, origin)) <= 1.0);
}

TEST_CASE("joint rescale keeps the target bounded and is recorded") {
  const auto task =
      make_task(1, 4, 1.5, 0.0, 0.8, FrepKind::informative_smooth, 3, 0.99);
  CHECK(task.scale_factor < 1.0);
  CHECK(task.rho_star == doctest::Approx(0.8 * task.scale_factor));
  double vnorm = 0.0;
  for (double v : task.v_star) vnorm += v * v;
  CHECK(std::sqrt(vnorm) == doctest::Approx(0.99 * task.scale_factor));

  Rng rng(12);
  for (int i = 0; i < 5000; ++i) {
    const auto x = random_point(rng, 1);
    REQUIRE(std::abs(eval_fstar(task, x)) <= 1.0 + 1e-12);
  }

  const auto mild =
      make_task(1, 4, 1.5, 0.0, 0.3, FrepKind::informative_smooth, 3, 0.9);
  CHECK(mild.scale_factor == 1.0);
  CHECK(mild.rho_star == doctest::Approx(0.3));
}

TEST_CASE("sampling is exact at sigma 0 and calibrated at sigma 0.5") {
  const auto task =
      make_task(2, 4, 1.5, 0.0, 0.4, FrepKind::informative_smooth, 17);
  const auto clean = sample_dataset(task, 500, 5);
  for (std::size_t i = 0; i < clean.size(); ++i)
    CHECK(clean.ys[i] == doctest::Approx(eval_fstar(task, clean.row(i))).epsilon(1e-14));

  const auto noisy_task =
      make_task(2, 4, 1.5, 0.5, 0.4, FrepKind::informative_smooth, 17);
  const long n = 100000;
  const auto noisy = sample_dataset(noisy_task, n, 5);
  double sumsq = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double e = noisy.ys[i] - eval_fstar(noisy_task, noisy.row(i));
    sumsq += e * e;
  }
  const double var = sumsq / static_cast<double>(n);
  CHECK(var >= 0.24);
  CHECK(var <= 0.26);

  // Input streams are shared across sigma values.
  for (int c = 0; c < 2; ++c) CHECK(clean.xs[static_cast<std::size_t>(c)] == noisy.xs[static_cast<std::size_t>(c)]);
}

TEST_CASE("datasets are reproducible and carry provenance") {
  const auto task = make_task(1, 3, 1.5, 0.3, 0.2, FrepKind::random_features, 23);
  const auto a = sample_dataset(task, 64, 9, true);
  const auto b = sample_dataset(task, 64, 9, true);
  CHECK(a.xs == b.xs);
  CHECK(a.ys == b.ys);
  CHECK(a.reps == b.reps);
  CHECK(a.provenance.sample_seed == 9);
  CHECK(a.provenance.source.find("random-features") != std::string::npos);

  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto feats = eval_frep(task, a.row(i));
    for (int j = 0; j < 3; ++j)
      CHECK(a.rep_row(i)[static_cast<std::size_t>(j)] == doctest::Approx(feats[static_cast<std::size_t>(j)]).epsilon(1e-14));
  }

  const auto other = sample_dataset(task, 64, 10);
  CHECK(a.xs != other.xs);
}

TEST_CASE("domain violations are rejected") {
  const auto task = make_task(2, 3, 1.5, 0.0, 0.2, FrepKind::informative_smooth, 2);
  const std::vector<double> outside{0.5, 1.5};
  CHECK_THROWS(eval_fstar(task, outside));
  CHECK_THROWS(eval_g0(task, outside));
  const std::vector<double> short_x{0.5};
  CHECK_THROWS(eval_fstar(task, short_x));
  CHECK_THROWS(sample_dataset(task, 0, 1));
}

TEST_CASE("kind names round-trip") {
  for (auto kind : {FrepKind::informative_smooth, FrepKind::random_features,
                    FrepKind::zero, FrepKind::adversarial_misaligned}) {
    CHECK(frep_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS(frep_kind_from_string("nope"));
}
