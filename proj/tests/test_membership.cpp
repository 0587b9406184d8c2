#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hge/membership.hpp"
#include "hge/rng.hpp"

using namespace hge;

TEST_CASE("membership distribution") {
  SUBCASE("zero group embeddings give uniform membership") {
    Tape tp;
    Tensor phi = Tensor::zeros({5, 3});
    Tensor h = Tensor::from({2, 3}, {1.0, -2.0, 0.5, 0.0, 4.0, 1.0});
    Var pi = membership_distribution(tp, tp.constant(phi), tp.constant(h));
    const Tensor& p = tp.val(pi);
    for (int r = 0; r < 2; ++r)
      for (int k = 0; k < 5; ++k) CHECK(p.at(r, k) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("opposed group rows; logits (ln3, -ln3)") {
    // phi rows {+h, -h} with |h|^2 = ln 3; oracle: softmax([ln3, -ln3])
    const double n = std::sqrt(std::log(3.0));
    Tensor h = Tensor::from({1, 2}, {n, 0.0});
    Tensor phi = Tensor::from({2, 2}, {n, 0.0, -n, 0.0});
    Tape tp;
    const Tensor& p = tp.val(membership_distribution(tp, tp.constant(phi), tp.constant(h)));
    const double e1 = std::exp(std::log(3.0)), e2 = std::exp(-std::log(3.0));
    CHECK(p.at(0, 0) == doctest::Approx(e1 / (e1 + e2)).epsilon(1e-12));  // = 0.9
    CHECK(p.at(0, 0) == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(p.at(0, 1) == doctest::Approx(0.1).epsilon(1e-9));
  }
  SUBCASE("logit gap ln3 gives the 3:1 split") {
    const double n = std::sqrt(std::log(3.0));
    Tensor h = Tensor::from({1, 2}, {n, 0.0});
    Tensor phi = Tensor::from({2, 2}, {n, 0.0, 0.0, 0.0});  // logits (ln3, 0)
    Tape tp;
    const Tensor& p = tp.val(membership_distribution(tp, tp.constant(phi), tp.constant(h)));
    CHECK(p.at(0, 0) == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(p.at(0, 1) == doctest::Approx(0.25).epsilon(1e-9));
  }
  SUBCASE("rows stay on the simplex") {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      int k = 2 + rng.below_int(5), d = 1 + rng.below_int(6);
      Tensor phi = Tensor::zeros({k, d});
      Tensor h = Tensor::zeros({1, d});
      for (std::int64_t i = 0; i < phi.size(); ++i) phi[i] = rng.uniform(-3.0, 3.0);
      for (std::int64_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-3.0, 3.0);
      Tape tp;
      const Tensor& p = tp.val(membership_distribution(tp, tp.constant(phi), tp.constant(h)));
      double s = 0.0;
      for (int j = 0; j < k; ++j) {
        CHECK(p.at(0, j) >= 0.0);
        s += p.at(0, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("gumbel softmax sampling") {
  SUBCASE("low temperature concentrates") {
    std::vector<double> pi{0.9, 0.05, 0.05};
    int concentrated = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      auto z = gumbel_softmax_sample(pi, 0.01, 1000 + i);
      double mx = *std::max_element(z.begin(), z.end());
      if (mx > 0.99) ++concentrated;
    }
    CHECK(static_cast<double>(concentrated) / draws >= 0.99);
  }
  SUBCASE("zero noise at tau 1 returns the membership itself") {
    std::vector<double> pi{0.7, 0.2, 0.1};
    std::vector<double> zero{0.0, 0.0, 0.0};
    auto z = apply_gumbel(pi, zero, 1.0);
    CHECK(z[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(z[2] == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("zero noise tempers the membership by 1/tau") {
    std::vector<double> pi{0.7, 0.2, 0.1};
    std::vector<double> zero{0.0, 0.0, 0.0};
    auto z = apply_gumbel(pi, zero, 0.5);
    const double s = 0.7 * 0.7 + 0.2 * 0.2 + 0.1 * 0.1;
    CHECK(z[0] == doctest::Approx(0.49 / s).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(0.04 / s).epsilon(1e-12));
  }
  SUBCASE("uniform membership draws symmetric argmax frequencies") {
    std::vector<double> pi{0.25, 0.25, 0.25, 0.25};
    std::vector<int> counts(4, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      auto z = gumbel_softmax_sample(pi, 0.1, 77000 + i);
      ++counts[hard_assignment(z)];
    }
    for (int c : counts) {
      double f = static_cast<double>(c) / draws;
      CHECK(std::abs(f - 0.25) <= 0.01);
    }
  }
  SUBCASE("rows stay on the simplex and are seed-deterministic") {
    std::vector<double> pi{0.5, 0.3, 0.2};
    auto a = gumbel_softmax_sample(pi, 0.5, 42);
    auto b = gumbel_softmax_sample(pi, 0.5, 42);
    CHECK(a == b);
    double s = 0.0;
    for (double v : a) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("argmax distribution matches the Gumbel-argmax law (chi-square)") {
    // argmax of (log pi + g) is distributed Multinomial(pi) exactly; the
    // softmax relaxation preserves the argmax
    std::vector<double> pi{0.55, 0.25, 0.15, 0.05};
    std::vector<double> expect = pi;
    const int draws = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < draws; ++i)
      ++counts[hard_assignment(gumbel_softmax_sample(pi, 0.3, 5000000 + i))];
    double chi2 = 0.0;
    for (int k = 0; k < 4; ++k) {
      double e = expect[k] * draws;
      chi2 += (counts[k] - e) * (counts[k] - e) / e;
    }
    CHECK(chi2 < 16.27);  // 99.9% quantile, df = 3
  }
  SUBCASE("mean max-entry is monotone as tau anneals") {
    std::vector<double> pi{0.6, 0.3, 0.1};
    double prev = 0.0;
    for (double tau : {1.0, 0.5, 0.1, 0.01}) {
      double acc = 0.0;
      const int draws = 10000;
      for (int i = 0; i < draws; ++i) {
        auto z = gumbel_softmax_sample(pi, tau, 31000 + i);
        acc += *std::max_element(z.begin(), z.end());
      }
      acc /= draws;
      CHECK(acc >= prev - 1e-9);
      prev = acc;
    }
  }
}

TEST_CASE("hard assignment") {
  CHECK(hard_assignment(std::vector<double>{0.2, 0.7, 0.1}) == 1);
  CHECK(hard_assignment(std::vector<double>{0.5, 0.5}) == 0);  // tie to lowest index
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    int k = 2 + rng.below_int(6);
    std::vector<double> v(k);
    for (double& x : v) x = rng.uniform(-4.0, 4.0);
    // softmax is monotone, so argmax passes through
    double mx = *std::max_element(v.begin(), v.end());
    double z = 0.0;
    std::vector<double> sm(k);
    for (int i = 0; i < k; ++i) z += sm[i] = std::exp(v[i] - mx);
    for (double& x : sm) x /= z;
    int argmax = 0;
    for (int i = 1; i < k; ++i)
      if (v[i] > v[argmax]) argmax = i;
    CHECK(hard_assignment(sm) == argmax);
  }
}

TEST_CASE("concentration") {
  SUBCASE("uniform membership scores zero") {
    for (int k : {2, 3, 7}) {
      std::vector<double> pi(k, 1.0 / k);
      CHECK(concentration(pi) == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
  SUBCASE("one-hot at K=5, brute-force oracle") {
    std::vector<double> pi{1.0, 0.0, 0.0, 0.0, 0.0};
    // oracle: population variance computed directly
    double mean = 0.2;
    double var = 0.0;
    for (double v : pi) var += (v - mean) * (v - mean);
    var /= 5.0;
    CHECK(var == doctest::Approx(0.16));
    CHECK(concentration(pi) == doctest::Approx(var).epsilon(1e-15));
  }
  SUBCASE("permutation invariance") {
    std::vector<double> pi{0.5, 0.3, 0.15, 0.05};
    double base = concentration(pi);
    std::sort(pi.begin(), pi.end());
    do {
      CHECK(concentration(pi) == doctest::Approx(base).epsilon(1e-12));
    } while (std::next_permutation(pi.begin(), pi.end()));
  }
  SUBCASE("one-hot maximizes, uniform minimizes") {
    Rng rng(3);
    const int k = 4;
    std::vector<double> onehot{1, 0, 0, 0};
    const double hi = concentration(onehot);
    std::vector<double> uniform(k, 0.25);
    const double lo = concentration(uniform);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> pi(k);
      double s = 0.0;
      for (double& v : pi) s += v = rng.uniform(0.0, 1.0) + 1e-9;
      for (double& v : pi) v /= s;
      double c = concentration(pi);
      CHECK(c <= hi + 1e-12);
      CHECK(c >= lo - 1e-12);
    }
  }
}

TEST_CASE("gumbel softmax on tape matches the plain path") {
  Tensor pi = Tensor::from({2, 3}, {0.6, 0.3, 0.1, 0.2, 0.5, 0.3});
  Tensor noise = gumbel_noise(2, 3, 99);
  Tape tp;
  Var z = gumbel_softmax(tp, tp.constant(pi), noise, 0.5);
  for (int r = 0; r < 2; ++r) {
    std::vector<double> prow{pi.at(r, 0), pi.at(r, 1), pi.at(r, 2)};
    std::vector<double> nrow{noise.at(r, 0), noise.at(r, 1), noise.at(r, 2)};
    auto expect = apply_gumbel(prow, nrow, 0.5);
    for (int k = 0; k < 3; ++k)
      CHECK(tp.val(z).at(r, k) == doctest::Approx(expect[k]).epsilon(1e-12));
  }
}

TEST_CASE("dirichlet draws live on the simplex") {
  Tensor alpha = Tensor::from({3, 4}, {0.2, 0.3, 0.4, 0.1, 1.0, 1.0, 1.0, 1.0,
                                       0.05, 0.05, 0.8, 0.1});
  Tensor draw = dirichlet_rows(alpha, 5);
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
      CHECK(draw.at(r, k) >= 0.0);
      s += draw.at(r, k);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
  Tensor again = dirichlet_rows(alpha, 5);
  for (std::int64_t i = 0; i < draw.size(); ++i) CHECK(draw[i] == again[i]);
}
