#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "zskd/error.hpp"
#include "zskd/losses.hpp"
#include "zskd/ops.hpp"

using namespace zskd;
using zskd::testing::GradCheck;

namespace {

Tensor random_simplices(Shape shape, RngState& rng, bool requires_grad = false) {
  Tensor logits = Tensor::gaussian(shape, 2.0, rng, requires_grad);
  NoGradGuard guard;
  return softmax(logits);
}

// Plain-double recomputation of mean-over-rows KL, used as the oracle.
double kl_scalar(const std::vector<double>& p, const std::vector<double>& q,
                 size_t classes) {
  double total = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      total += p[i] * (std::log(p[i]) - std::log(std::max(q[i], 1e-12)));
    }
  }
  return total / static_cast<double>(p.size() / classes);
}

}  // namespace

TEST_CASE("KL of a distribution with itself is exactly zero") {
  RngState rng(21);
  Tensor p = random_simplices({5, 7}, rng);
  CHECK(kl_div(p, p).item() == 0.0);
}

TEST_CASE("KL of a hand pair matches direct summation") {
  Tensor p = Tensor::from_data({1, 2}, {0.5, 0.5});
  Tensor q = Tensor::from_data({1, 2}, {0.25, 0.75});
  double expect = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(kl_div(p, q).item() == doctest::Approx(expect).epsilon(1e-14));
  CHECK(kl_div(p, q).item() == doctest::Approx(0.14384).epsilon(1e-4));
}

TEST_CASE("KL is non-negative across ten thousand random pairs") {
  RngState rng(22);
  for (int i = 0; i < 10000; ++i) {
    Tensor p = random_simplices({1, 4}, rng);
    Tensor q = random_simplices({1, 4}, rng);
    CHECK(kl_div(p, q).item() >= 0.0);
  }
}

TEST_CASE("KL rejects negative entries") {
  Tensor p = Tensor::from_data({1, 2}, {1.25, -0.25});
  Tensor q = Tensor::from_data({1, 2}, {0.5, 0.5});
  CHECK_THROWS_AS(kl_div(p, q), DataError);
  CHECK_THROWS_AS(kl_div(q, p), DataError);
}

TEST_CASE("KL averages over leading axes") {
  Tensor p = Tensor::from_data({2, 2}, {0.5, 0.5, 0.1, 0.9});
  Tensor q = Tensor::from_data({2, 2}, {0.25, 0.75, 0.1, 0.9});
  CHECK(kl_div(p, q).item() ==
        doctest::Approx(kl_scalar(p.vec(), q.vec(), 2)).epsilon(1e-14));
}

TEST_CASE("low-temperature Gumbel-Softmax is near one-hot") {
  RngState rng(23);
  Tensor logits = Tensor::gaussian({4, 6, 9}, 1.0, rng);
  RngState sample_rng(24);
  SoftBatch out = gumbel_softmax(logits, 0.01, sample_rng);
  check_simplex(out);
  const auto& p = out.probs.vec();
  for (int64_t r = 0; r < 24; ++r) {
    double best = 0.0;
    for (int64_t v = 0; v < 9; ++v) {
      best = std::max(best, p[static_cast<size_t>(r * 9 + v)]);
    }
    CHECK(best > 0.99);
  }
}

TEST_CASE("Gumbel-Softmax is reproducible from equal rng states") {
  RngState rng(25);
  Tensor logits = Tensor::gaussian({2, 3, 5}, 1.0, rng);
  RngState a(9), b(9);
  SoftBatch s1 = gumbel_softmax(logits, 1.0, a);
  SoftBatch s2 = gumbel_softmax(logits, 1.0, b);
  CHECK(s1.probs.vec() == s2.probs.vec());
  CHECK_THROWS_AS(gumbel_softmax(logits, 0.0, a), ParameterError);
  CHECK_THROWS_AS(gumbel_softmax(logits, -1.0, a), ParameterError);
}

TEST_CASE("Gumbel argmax frequencies follow the softmax distribution") {
  // The Gumbel-max property: argmax(logits + g) ~ Categorical(softmax(logits)).
  const int64_t vocab = 8;
  const int samples = 100000;
  RngState rng(26);
  Tensor logits = Tensor::gaussian({1, 1, vocab}, 1.0, rng);
  Tensor target;
  {
    NoGradGuard guard;
    target = softmax(logits);
  }
  std::vector<double> freq(vocab, 0.0);
  RngState sample_rng(27);
  for (int s = 0; s < samples; ++s) {
    SoftBatch out = gumbel_softmax(logits, 1.0, sample_rng);
    const auto& p = out.probs.vec();
    size_t best = 0;
    for (size_t v = 1; v < static_cast<size_t>(vocab); ++v) {
      if (p[v] > p[best]) {
        best = v;
      }
    }
    freq[best] += 1.0 / samples;
  }
  double tv = 0.0;
  for (int64_t v = 0; v < vocab; ++v) {
    tv += 0.5 * std::abs(freq[static_cast<size_t>(v)] -
                         target.vec()[static_cast<size_t>(v)]);
  }
  CHECK(tv < 0.01);
}

TEST_CASE("mean Gumbel-Softmax entropy falls as temperature anneals") {
  RngState rng(28);
  Tensor logits = Tensor::gaussian({1, 1, 12}, 1.0, rng);
  std::vector<double> taus;
  for (int i = 0; i < 10; ++i) {
    taus.push_back(5.0 - i * (5.0 - 0.1) / 9.0);
  }
  RngState sample_rng(29);
  std::vector<double> mean_entropy;
  for (double tau : taus) {
    double acc = 0.0;
    for (int s = 0; s < 1000; ++s) {
      SoftBatch out = gumbel_softmax(logits, tau, sample_rng);
      for (double p : out.probs.vec()) {
        if (p > 0.0) {
          acc -= p * std::log(p);
        }
      }
    }
    mean_entropy.push_back(acc / 1000.0);
  }
  int violations = 0;
  for (size_t i = 0; i + 1 < mean_entropy.size(); ++i) {
    if (mean_entropy[i + 1] > mean_entropy[i]) {
      violations++;
    }
  }
  CHECK(violations <= 1);  // 5% slack over the anneal path
  CHECK(mean_entropy.front() > mean_entropy.back());
}

TEST_CASE("mixture loss at alpha one is plain cross-entropy") {
  RngState rng(30);
  Tensor z_s = Tensor::gaussian({4, 3}, 1.0, rng, true);
  Tensor z_t = Tensor::gaussian({4, 3}, 1.0, rng);
  std::vector<int32_t> labels = {0, 2, 1, 2};
  Tensor mixed = kd_loss(labels, z_s, z_t, {.alpha = 1.0, .tau = 2.0});
  Tensor ce = cross_entropy_with_logits(z_s, labels);
  CHECK(mixed.item() == ce.item());
}

TEST_CASE("mixture loss vanishes when student equals teacher at alpha zero") {
  RngState rng(31);
  Tensor z = Tensor::gaussian({5, 4}, 1.0, rng, true);
  std::vector<int32_t> labels = {0, 1, 2, 3, 0};
  for (double tau : {0.5, 1.0, 2.0, 7.0}) {
    Tensor loss = kd_loss(labels, z, z, {.alpha = 0.0, .tau = tau});
    CHECK(loss.item() == 0.0);
  }
}

TEST_CASE("mixture loss matches a scalar recomputation at alpha 0.5 tau 2") {
  Tensor z_s = Tensor::from_data({1, 2}, {0.3, -0.6}, true);
  Tensor z_t = Tensor::from_data({1, 2}, {1.1, 0.2});
  std::vector<int32_t> labels = {1};
  double loss = kd_loss(labels, z_s, z_t, {.alpha = 0.5, .tau = 2.0}).item();

  // Direct recomputation with plain doubles.
  auto soft2 = [](double a, double b, double tau) {
    double ea = std::exp(a / tau), eb = std::exp(b / tau);
    return std::vector<double>{ea / (ea + eb), eb / (ea + eb)};
  };
  std::vector<double> ps1 = soft2(0.3, -0.6, 1.0);
  double ce = -std::log(ps1[1]);
  std::vector<double> pt = soft2(1.1, 0.2, 2.0);
  std::vector<double> ps = soft2(0.3, -0.6, 2.0);
  double kl = pt[0] * std::log(pt[0] / ps[0]) + pt[1] * std::log(pt[1] / ps[1]);
  CHECK(loss == doctest::Approx(0.5 * ce + 0.5 * kl).epsilon(1e-12));
}

TEST_CASE("mixture loss validates its parameters and labels") {
  Tensor z = Tensor::from_data({1, 2}, {0.0, 0.0}, true);
  std::vector<int32_t> labels = {0};
  CHECK_THROWS_AS(kd_loss(labels, z, z, {.alpha = -0.1, .tau = 2.0}),
                  ParameterError);
  CHECK_THROWS_AS(kd_loss(labels, z, z, {.alpha = 0.5, .tau = 0.0}),
                  ParameterError);
  std::vector<int32_t> bad = {5};
  CHECK_THROWS_AS(kd_loss(bad, z, z, {.alpha = 0.5, .tau = 2.0}), DataError);
}

TEST_CASE("mixture loss gradient with respect to student logits") {
  RngState rng(32);
  Tensor z_s = Tensor::gaussian({3, 4}, 1.0, rng, true);
  Tensor z_t = Tensor::gaussian({3, 4}, 1.0, rng);
  std::vector<int32_t> labels = {2, 0, 3};
  auto result = GradCheck{}.run(
      [&] { return kd_loss(labels, z_s, z_t, {.alpha = 0.3, .tau = 2.0}); },
      {z_s}, 0);
  INFO(result.detail);
  CHECK(result.ok);
}

TEST_CASE("generator losses with agreeing models reduce to the fidelity half") {
  RngState rng(33);
  TokenBatch x_k = make_token_batch({{1, 6, 7, 2}, {1, 8, 2, 0}});
  Tensor gen_logits = Tensor::gaussian({2, 4, 10}, 1.0, rng, true);
  RngState sample_rng(34);
  SoftBatch x_p = gumbel_softmax(gen_logits, 1.0, sample_rng);
  Tensor out = random_simplices({2, 3}, rng);
  GeneratorLosses losses = adv_generator_loss(out, out, x_k, x_p);
  CHECK(losses.adversarial.item() == 0.0);
  CHECK(losses.total.item() ==
        doctest::Approx(losses.fidelity.item() / 2.0).epsilon(1e-15));
}

TEST_CASE("fidelity vanishes on an exact one-hot match") {
  TokenBatch x_k = make_token_batch({{1, 5, 2}, {1, 4, 2}});
  SoftBatch x_p = one_hot(x_k, 9);
  RngState rng(35);
  Tensor t_out = random_simplices({2, 3}, rng);
  Tensor s_out = random_simplices({2, 3}, rng);
  GeneratorLosses losses = adv_generator_loss(t_out, s_out, x_k, x_p);
  CHECK(losses.fidelity.item() == 0.0);
  CHECK(pretrain_loss(x_k, x_p).item() == 0.0);
}

TEST_CASE("generator losses match a scalar recomputation") {
  RngState rng(36);
  TokenBatch x_k = make_token_batch({{1, 3, 2}});
  Tensor t_out = random_simplices({1, 2}, rng);
  Tensor s_out = random_simplices({1, 2}, rng);
  Tensor gen_logits = Tensor::gaussian({1, 3, 6}, 1.0, rng, true);
  RngState sample_rng(37);
  SoftBatch x_p = gumbel_softmax(gen_logits, 1.0, sample_rng);

  GeneratorLosses losses = adv_generator_loss(t_out, s_out, x_k, x_p);
  double kl = kl_scalar(t_out.vec(), s_out.vec(), 2);
  const auto& p = x_p.probs.vec();
  double nll = -(std::log(p[0 * 6 + 1]) + std::log(p[1 * 6 + 3]) +
                 std::log(p[2 * 6 + 2])) /
               3.0;
  CHECK(losses.adversarial.item() == doctest::Approx(-kl).epsilon(1e-12));
  CHECK(losses.fidelity.item() == doctest::Approx(nll).epsilon(1e-12));
  CHECK(losses.total.item() ==
        doctest::Approx(0.5 * (-kl + nll)).epsilon(1e-12));
}

TEST_CASE("generator losses reject mismatched batch sizes") {
  RngState rng(38);
  TokenBatch x_k = make_token_batch({{1, 3, 2}, {1, 4, 2}});
  Tensor logits = Tensor::gaussian({1, 3, 6}, 1.0, rng, true);
  RngState sample_rng(39);
  SoftBatch x_p = gumbel_softmax(logits, 1.0, sample_rng);
  Tensor out = random_simplices({2, 2}, rng);
  CHECK_THROWS_AS(adv_generator_loss(out, out, x_k, x_p), ContractError);
  CHECK_THROWS_AS(pretrain_loss(x_k, x_p), ContractError);
}

TEST_CASE("widening disagreement strictly lowers the adversarial loss") {
  TokenBatch x_k = make_token_batch({{1, 2}});
  SoftBatch x_p = one_hot(x_k, 4);
  Tensor t_out = Tensor::from_data({1, 2}, {0.9, 0.1});
  std::vector<std::vector<double>> students = {
      {0.8, 0.2}, {0.5, 0.5}, {0.2, 0.8}};
  double prev = 1.0;
  for (const auto& s : students) {
    Tensor s_out = Tensor::from_data({1, 2}, std::vector<double>(s));
    double l_a = adv_generator_loss(t_out, s_out, x_k, x_p).adversarial.item();
    CHECK(l_a < prev);
    prev = l_a;
  }
}

TEST_CASE("student loss vanishes when student matches teacher") {
  RngState rng(40);
  Tensor gen = random_simplices({4, 3}, rng);
  Tensor ood = random_simplices({4, 3}, rng);
  CHECK(student_distill_loss(gen, gen, ood, ood, 0.2).item() == 0.0);
}

TEST_CASE("student loss weighting matches a scalar recomputation") {
  RngState rng(41);
  Tensor t_gen = random_simplices({3, 4}, rng);
  Tensor s_gen = random_simplices({3, 4}, rng);
  Tensor t_ood = random_simplices({3, 4}, rng);
  Tensor s_ood = random_simplices({3, 4}, rng);
  double expect = 0.2 * kl_scalar(t_gen.vec(), s_gen.vec(), 4) +
                  0.8 * kl_scalar(t_ood.vec(), s_ood.vec(), 4);
  double got = student_distill_loss(t_gen, s_gen, t_ood, s_ood, 0.2).item();
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("alpha zero removes both value and gradient of the generated branch") {
  RngState rng(42);
  Tensor gen_logits = Tensor::gaussian({3, 4}, 1.0, rng, true);
  Tensor ood_logits = Tensor::gaussian({3, 4}, 1.0, rng, true);
  Tensor t_gen = random_simplices({3, 4}, rng);
  Tensor t_ood = random_simplices({3, 4}, rng);
  Tensor s_gen = softmax(gen_logits);
  Tensor s_ood = softmax(ood_logits);
  Tensor loss = student_distill_loss(t_gen, s_gen, t_ood, s_ood, 0.0);
  CHECK(loss.item() ==
        doctest::Approx(kl_scalar(t_ood.vec(), s_ood.vec(), 4)).epsilon(1e-12));
  loss.backward();
  for (double g : gen_logits.grad()) {
    CHECK(g == 0.0);
  }
  bool any = false;
  for (double g : ood_logits.grad()) {
    any = any || g != 0.0;
  }
  CHECK(any);
}

TEST_CASE("teacher outputs are detached inside the student loss") {
  RngState rng(43);
  Tensor t_logits = Tensor::gaussian({2, 3}, 1.0, rng, true);
  Tensor s_logits = Tensor::gaussian({2, 3}, 1.0, rng, true);
  Tensor loss = student_distill_loss(softmax(t_logits), softmax(s_logits),
                                     softmax(t_logits), softmax(s_logits), 0.5);
  loss.backward();
  CHECK_FALSE(t_logits.has_grad());
  CHECK(s_logits.has_grad());
}

TEST_CASE("pre-training loss on a uniform generator is log vocab") {
  TokenBatch x_k = make_token_batch({{1, 5, 7, 2}});
  const int64_t vocab = 16;
  SoftBatch x_p;
  x_p.probs = Tensor::full({1, 4, vocab}, 1.0 / vocab);
  x_p.mask.assign(4, 1);
  CHECK(pretrain_loss(x_k, x_p).item() ==
        doctest::Approx(std::log(static_cast<double>(vocab))).epsilon(1e-12));
}

TEST_CASE("pre-training loss matches a scalar recomputation") {
  RngState rng(44);
  TokenBatch x_k = make_token_batch({{1, 3, 2}, {1, 2, 0}});
  Tensor logits = Tensor::gaussian({2, 3, 5}, 1.0, rng, true);
  RngState sample_rng(45);
  SoftBatch x_p = gumbel_softmax(logits, 1.0, sample_rng);
  const auto& p = x_p.probs.vec();
  double expect = 0.0;
  for (int64_t i = 0; i < 6; ++i) {
    expect -= std::log(p[static_cast<size_t>(i * 5 + x_k.ids[i])]);
  }
  expect /= 6.0;
  CHECK(pretrain_loss(x_k, x_p).item() ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("one-hot batches are valid simplices and reject bad ids") {
  TokenBatch x_k = make_token_batch({{1, 3, 2}});
  check_simplex(one_hot(x_k, 4));
  CHECK_THROWS_AS(one_hot(x_k, 3), DataError);
  SoftBatch broken;
  broken.probs = Tensor::from_data({1, 1, 2}, {0.7, 0.7});
  broken.mask = {1};
  CHECK_THROWS_AS(check_simplex(broken), DataError);
}
