#include "ibiumad/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "ibiumad/errors.hpp"
#include "ibiumad/gradcheck.hpp"
#include "ibiumad/info_oracle.hpp"
#include "ibiumad/metrics.hpp"
#include "ibiumad/model.hpp"
#include "ibiumad/oracles.hpp"

namespace ibiumad::verify {

bool Suite::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- gradients -----------------------------------------------------------------

constexpr double kStep = 1e-5;
constexpr double kGradTol = 1e-4;

Tensor rand_t(Rng& rng, Shape s, double sd = 1.0) { return Tensor::randn(std::move(s), rng, sd); }

// Values bounded away from zero so no probe straddles a ReLU kink.
Tensor rand_off_zero(Rng& rng, Shape s) {
  Tensor t = Tensor::zeros(std::move(s));
  for (double& v : t.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.5);
  return t;
}

// Reduces any tensor to a scalar with fixed random weights.
Tensor weighted_sum(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

struct GradCase {
  std::string name;
  // Builds inputs and a loss closure for one random instance.
  std::function<std::pair<std::vector<Tensor>, std::function<Tensor()>>(Rng&)> make;
  std::size_t max_probes = 0;
};

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> cases;
  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> f, bool off_zero = false) {
    cases.push_back({std::move(name), [f, off_zero](Rng& rng) {
                       Tensor x = off_zero ? rand_off_zero(rng, {3, 4}) : rand_t(rng, {3, 4});
                       Tensor w;
                       {
                         NoGradGuard g;
                         w = rand_t(rng, f(x).shape());
                       }
                       return std::pair{std::vector<Tensor>{x}, std::function<Tensor()>([=] { return weighted_sum(f(x), w); })};
                     }});
  };
  auto binary = [&](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> f) {
    cases.push_back({std::move(name), [f](Rng& rng) {
                       Tensor a = rand_t(rng, {3, 4}), b = rand_t(rng, {3, 4}), w = rand_t(rng, {3, 4});
                       return std::pair{std::vector<Tensor>{a, b},
                                        std::function<Tensor()>([=] { return weighted_sum(f(a, b), w); })};
                     }});
  };
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); });
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); });
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  unary("scale", [](const Tensor& x) { return scale(x, -1.7); });
  unary("add_scalar", [](const Tensor& x) { return square(add_scalar(x, 0.3)); });
  unary("relu", [](const Tensor& x) { return relu(x); }, true);
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  unary("square", [](const Tensor& x) { return square(x); });
  unary("sum", [](const Tensor& x) { return square(sum(x)); });
  unary("mean", [](const Tensor& x) { return square(mean(x)); });
  unary("reshape", [](const Tensor& x) { return reshape(x, {4, 3}); });
  unary("transpose", [](const Tensor& x) { return transpose(x); });
  unary("softmax", [](const Tensor& x) { return softmax(x); });
  unary("log_softmax", [](const Tensor& x) { return log_softmax(x); });

  cases.push_back({"concat", [](Rng& rng) {
                     Tensor a = rand_t(rng, {2, 3}), b = rand_t(rng, {4, 3}), c = rand_t(rng, {2, 5});
                     Tensor w0 = rand_t(rng, {6, 3}), w1 = rand_t(rng, {2, 8});
                     return std::pair{std::vector<Tensor>{a, b, c}, std::function<Tensor()>([=] {
                                        return add(weighted_sum(concat({a, b}, 0), w0), weighted_sum(concat({a, c}, 1), w1));
                                      })};
                   }});
  cases.push_back({"matmul", [](Rng& rng) {
                     Tensor a = rand_t(rng, {3, 4}), b = rand_t(rng, {4, 2}), w = rand_t(rng, {3, 2});
                     return std::pair{std::vector<Tensor>{a, b}, std::function<Tensor()>([=] { return weighted_sum(matmul(a, b), w); })};
                   }});
  cases.push_back({"add_row_bias", [](Rng& rng) {
                     Tensor x = rand_t(rng, {3, 4}), b = rand_t(rng, {4}), w = rand_t(rng, {3, 4});
                     return std::pair{std::vector<Tensor>{x, b},
                                      std::function<Tensor()>([=] { return weighted_sum(add_row_bias(x, b), w); })};
                   }});
  cases.push_back({"linear", [](Rng& rng) {
                     Tensor x = rand_t(rng, {3, 4}), wt = rand_t(rng, {4, 5}), b = rand_t(rng, {5}), w = rand_t(rng, {3, 5});
                     return std::pair{std::vector<Tensor>{x, wt, b},
                                      std::function<Tensor()>([=] { return weighted_sum(linear(x, wt, b), w); })};
                   }});
  for (std::size_t groups : {1, 2, 4}) {
    cases.push_back({"conv2d(groups=" + std::to_string(groups) + ")", [groups](Rng& rng) {
                       const std::size_t cin = 4, cout = 4;
                       Tensor x = rand_t(rng, {cin, 5, 6}), k = rand_t(rng, {cout, cin / groups, 3, 3}, 0.5);
                       Tensor b = rand_t(rng, {cout}), w = rand_t(rng, {cout, 5, 6});
                       return std::pair{std::vector<Tensor>{x, k, b}, std::function<Tensor()>([=] {
                                          return weighted_sum(conv2d(x, k, b, groups), w);
                                        })};
                     }});
  }
  cases.push_back({"avg_pool2", [](Rng& rng) {
                     Tensor x = rand_t(rng, {2, 4, 6}), w = rand_t(rng, {2, 2, 3});
                     return std::pair{std::vector<Tensor>{x}, std::function<Tensor()>([=] { return weighted_sum(avg_pool2(x), w); })};
                   }});
  cases.push_back({"upsample_nearest", [](Rng& rng) {
                     Tensor x = rand_t(rng, {2, 2, 3}), w = rand_t(rng, {2, 4, 6});
                     return std::pair{std::vector<Tensor>{x},
                                      std::function<Tensor()>([=] { return weighted_sum(upsample_nearest(x, 2), w); })};
                   }});
  cases.push_back({"tokens/map", [](Rng& rng) {
                     Tensor x = rand_t(rng, {3, 2, 4}), w = rand_t(rng, {8, 3}), w2 = rand_t(rng, {3, 2, 4});
                     return std::pair{std::vector<Tensor>{x}, std::function<Tensor()>([=] {
                                        const Tensor t = tokens_from_map(x);
                                        return add(weighted_sum(square(t), w), weighted_sum(map_from_tokens(t, 2, 4), w2));
                                      })};
                   }});
  cases.push_back({"global_avg_pool", [](Rng& rng) {
                     Tensor x = rand_t(rng, {3, 2, 4}), w = rand_t(rng, {1, 3});
                     return std::pair{std::vector<Tensor>{x},
                                      std::function<Tensor()>([=] { return weighted_sum(square(global_avg_pool(x)), w); })};
                   }});
  cases.push_back({"layer_norm", [](Rng& rng) {
                     Tensor x = rand_t(rng, {5, 6}), g = rand_t(rng, {6}), b = rand_t(rng, {6}), w = rand_t(rng, {5, 6});
                     return std::pair{std::vector<Tensor>{x, g, b},
                                      std::function<Tensor()>([=] { return weighted_sum(layer_norm(x, g, b), w); })};
                   }});
  cases.push_back({"dropout", [](Rng& rng) {
                     Tensor x = rand_t(rng, {4, 5}), w = rand_t(rng, {4, 5});
                     const std::uint64_t s = rng.next();
                     return std::pair{std::vector<Tensor>{x}, std::function<Tensor()>([=] {
                                        Rng local(s);
                                        return weighted_sum(dropout(x, 0.3, true, local), w);
                                      })};
                   }});
  cases.push_back({"cross_entropy", [](Rng& rng) {
                     Tensor x = rand_t(rng, {3, 4});
                     std::vector<int> labels{rng.uniform_int(0, 3), rng.uniform_int(0, 3), rng.uniform_int(0, 3)};
                     return std::pair{std::vector<Tensor>{x}, std::function<Tensor()>([=] { return cross_entropy(x, labels); })};
                   }});
  cases.push_back({"kl_divergence", [](Rng& rng) {
                     Tensor a = rand_t(rng, {2, 5}), b = rand_t(rng, {2, 5});
                     return std::pair{std::vector<Tensor>{a, b},
                                      std::function<Tensor()>([=] { return kl_divergence(softmax(a), softmax(b)); })};
                   }});
  cases.push_back({"mse", [](Rng& rng) {
                     Tensor a = rand_t(rng, {2, 3, 3}), b = rand_t(rng, {2, 3, 3});
                     return std::pair{std::vector<Tensor>{a, b}, std::function<Tensor()>([=] { return mse(a, b, 9.0); })};
                   }});
  auto decays = [](Rng& rng, std::size_t c) {
    Tensor a = Tensor::zeros({c});
    for (double& v : a.data()) v = rng.uniform(0.1, 0.9);
    return a;
  };
  cases.push_back({"ssm_scan", [decays](Rng& rng) {
                     Tensor x = rand_t(rng, {7, 3}), a = decays(rng, 3), b = rand_t(rng, {3}), c = rand_t(rng, {3}),
                            d = rand_t(rng, {3}), w = rand_t(rng, {7, 3});
                     return std::pair{std::vector<Tensor>{x, a, b, c, d},
                                      std::function<Tensor()>([=] { return weighted_sum(ssm_scan(x, a, b, c, d), w); })};
                   }});
  cases.push_back({"es2d", [decays](Rng& rng) {
                     Tensor x = rand_t(rng, {2, 4, 6}), a = decays(rng, 2), b = rand_t(rng, {2}), c = rand_t(rng, {2}),
                            d = rand_t(rng, {2}), w = rand_t(rng, {2, 4, 6});
                     return std::pair{std::vector<Tensor>{x, a, b, c, d},
                                      std::function<Tensor()>([=] { return weighted_sum(es2d(x, a, b, c, d), w); })};
                   }});

  // Composite blocks.
  cases.push_back({"mamba block", [](Rng& rng) {
                     auto block = std::make_shared<MambaBlock>(rng, 4, "m");
                     Tensor x = rand_t(rng, {4, 4, 4}), w = rand_t(rng, {4, 4, 4});
                     ParamSet ps;
                     block->collect(ps);
                     std::vector<Tensor> inputs{x};
                     for (const auto& p : ps.items()) inputs.push_back(p.tensor);
                     return std::pair{inputs, std::function<Tensor()>([=] { return weighted_sum(block->forward(x), w); })};
                   }});
  cases.push_back({"ib projection", [](Rng& rng) {
                     auto proj = std::make_shared<IbProjection>(rng, 8, 2, 0.2);
                     Tensor x = rand_t(rng, {8, 2, 2}), w = rand_t(rng, {8, 2, 2});
                     const std::uint64_t s = rng.next();
                     ParamSet ps;
                     proj->collect(ps);
                     std::vector<Tensor> inputs{x};
                     for (const auto& p : ps.items()) inputs.push_back(p.tensor);
                     return std::pair{inputs, std::function<Tensor()>([=] {
                                        Rng local(s);
                                        return weighted_sum(proj->project(x, true, local).fused_g, w);
                                      })};
                   }});
  for (FusionKind kind : {FusionKind::kAddition, FusionKind::kConcatFc, FusionKind::kLinearGlu, FusionKind::kCrossAttention}) {
    cases.push_back({std::string("fusion ") + fusion_kind_name(kind), [kind](Rng& rng) {
                       auto fm = std::make_shared<FusionModule>(rng, kind, 6, 4, 3);
                       Tensor a = rand_t(rng, {6, 4, 4}), b = rand_t(rng, {4, 2, 2}), w = rand_t(rng, {3, 4, 4});
                       ParamSet ps;
                       fm->collect(ps);
                       std::vector<Tensor> inputs{a, b};
                       for (const auto& p : ps.items()) inputs.push_back(p.tensor);
                       return std::pair{inputs, std::function<Tensor()>([=] { return weighted_sum(fm->fuse({a, b}), w); })};
                     }});
  }
  cases.push_back({"full objective", [](Rng& rng) {
                     ModelConfig cfg;
                     cfg.image_size = 32;
                     cfg.channels = {4, 4, 8, 8};
                     cfg.num_classes = 3;
                     cfg.jitter.probability = 1.0;
                     auto model = std::make_shared<IbIumadModel>(cfg, rng.next());
                     MultimodalSample s;
                     s.rgb = Tensor::zeros({3, 32, 32});
                     s.depth = Tensor::zeros({1, 32, 32});
                     for (double& v : s.rgb.data()) v = rng.uniform();
                     for (double& v : s.depth.data()) v = rng.uniform();
                     EncodedSample enc;
                     {
                       NoGradGuard g;
                       enc = model->encode(s);
                     }
                     const int label = rng.uniform_int(0, 2);
                     const std::uint64_t fwd_seed = rng.next();
                     auto frozen = std::make_shared<FrozenStopGradients>();
                     return std::pair{model->parameters().trainable(), std::function<Tensor()>([=] {
                                        frozen->rewind();
                                        Rng local(fwd_seed);
                                        return total_loss(model->forward(enc, label, true, local).losses);
                                      })};
                   },
                   3});
  return cases;
}

// ---- information ---------------------------------------------------------------

info::Distribution random_distribution(Rng& rng, std::size_t n, bool allow_zeros) {
  info::Distribution p(n);
  double s = 0;
  for (double& v : p) {
    v = (allow_zeros && rng.bernoulli(0.2)) ? 0.0 : rng.uniform(0.01, 1.0);
    s += v;
  }
  if (s == 0) {
    p[0] = 1.0;
    return p;
  }
  for (double& v : p) v /= s;
  return p;
}

info::DeterministicChannel random_channel(Rng& rng, std::size_t nf) {
  info::DeterministicChannel ch;
  ch.g_size = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(nf)));
  for (std::size_t f = 0; f < nf; ++f) ch.g_of_f.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(ch.g_size) - 1)));
  return ch;
}

}  // namespace

Suite gradient_suite(int instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Suite suite{"gradients", {}, 0.0};
  Rng root(seed);
  for (const auto& gc : grad_cases()) {
    double worst = 0.0;
    std::size_t probes = 0;
    Rng rng = root.fork(std::hash<std::string>{}(gc.name));
    for (int i = 0; i < instances; ++i) {
      auto [inputs, loss] = gc.make(rng);
      const GradCheckResult r = finite_diff_check(loss, inputs, kStep, gc.max_probes);
      worst = std::max(worst, r.max_rel_error);
      probes += r.probes;
    }
    suite.checks.push_back({gc.name, worst < kGradTol,
                            "max rel err " + fmt("%.2e", worst) + " over " + std::to_string(probes) + " probes"});
  }
  suite.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return suite;
}

Suite information_suite(std::uint64_t seed) {
  const auto t0 = Clock::now();
  Suite suite{"information", {}, 0.0};
  Rng rng(seed);

  // Chain-rule split on 200 Markov triples.
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nf = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const std::size_t ny = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const auto pf = random_distribution(rng, nf, true);
    info::Conditional pyf(nf);
    for (auto& row : pyf) row = random_distribution(rng, ny, true);
    const auto ch = random_channel(rng, nf);
    worst = std::max(worst, info::verify_corollary1(pf, ch, pyf).residual);
  }
  suite.checks.push_back({"chain rule, 200 deterministic channels", worst < 1e-10, "max residual " + fmt("%.2e", worst)});

  // KL-zero implication and data processing on 1000 trials; half of them
  // merge only f's with identical predictive rows so the premise is met.
  int premise_met = 0, implication_fail = 0, dpi_fail = 0;
  double worst_gap = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t nf = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const std::size_t ny = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const auto pf = random_distribution(rng, nf, true);
    const auto ch = random_channel(rng, nf);
    info::Conditional pyf(nf);
    if (trial % 2 == 0) {
      std::vector<info::Distribution> per_g(ch.g_size);
      for (auto& row : per_g) row = random_distribution(rng, ny, true);
      for (std::size_t f = 0; f < nf; ++f) pyf[f] = per_g[ch.g_of_f[f]];
    } else {
      for (auto& row : pyf) row = random_distribution(rng, ny, true);
    }
    const auto gap = info::verify_corollary2(pf, pyf, ch);
    if (gap.mi_gap < -1e-10) ++dpi_fail;
    if (gap.kl_max < 1e-12) {
      ++premise_met;
      worst_gap = std::max(worst_gap, std::abs(gap.mi_gap));
      if (std::abs(gap.mi_gap) >= 1e-10) ++implication_fail;
    }
  }
  suite.checks.push_back({"KL = 0 implies equal MI", implication_fail == 0 && premise_met > 0,
                          std::to_string(premise_met) + " trials met the premise, max |gap| " + fmt("%.2e", worst_gap)});
  suite.checks.push_back({"data processing, 1000 trials", dpi_fail == 0, std::to_string(dpi_fail) + " violations"});

  // Library MI against the entropy-identity oracle.
  double mi_err = 0, cmi_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_distribution(rng, 9, true);
    mi_err = std::max(mi_err, std::abs(info::mutual_information({3, 3, p}) - oracle::mi_from_entropies(p, 3, 3)));
    const auto q = random_distribution(rng, 18, true);
    cmi_err = std::max(cmi_err, std::abs(info::conditional_mi(info::DiscreteJoint(3, 3, 2, q)) -
                                         oracle::cmi_from_entropies(q, 3, 3, 2)));
  }
  suite.checks.push_back({"mutual information vs oracle", mi_err < 1e-12, "max diff " + fmt("%.2e", mi_err)});
  suite.checks.push_back({"conditional MI vs oracle", cmi_err < 1e-12, "max diff " + fmt("%.2e", cmi_err)});

  // Stochastic channels are refused.
  bool rejected = false;
  try {
    info::verify_corollary1({0.5, 0.5}, info::Conditional{{0.5, 0.5}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}});
  } catch (const PreconditionError&) {
    rejected = true;
  }
  suite.checks.push_back({"stochastic channel rejected", rejected, ""});

  // Without determinism the split fails: F, G fair bits, Y = F xor G.
  std::vector<double> xor_joint(8, 0.0);
  for (int f = 0; f < 2; ++f)
    for (int g = 0; g < 2; ++g) xor_joint[(f * 2 + g) * 2 + (f ^ g)] = 0.25;
  const double xor_residual = info::chain_rule_residual(info::DiscreteJoint(2, 2, 2, xor_joint)).residual;
  suite.checks.push_back({"split fails for a non-Markov joint", std::abs(xor_residual - std::log(2.0)) < 1e-12,
                          "residual " + fmt("%.6f", xor_residual) + " (ln 2 expected)"});

  suite.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return suite;
}

Suite metric_suite(std::uint64_t seed) {
  const auto t0 = Clock::now();
  Suite suite{"metrics", {}, 0.0};
  Rng rng(seed);

  double auroc_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(4, 200));
    std::vector<double> s(n);
    std::vector<std::uint8_t> l(n);
    const bool coarse = trial % 3 == 0;  // many ties
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = i < 2 ? static_cast<std::uint8_t>(i) : static_cast<std::uint8_t>(rng.bernoulli(0.4));
      s[i] = rng.normal(l[i] ? 0.7 : 0.0, 1.0);
      if (coarse) s[i] = std::round(s[i] * 2.0) / 2.0;
    }
    auroc_err = std::max(auroc_err, std::abs(auroc(s, l) - oracle::pairwise_auroc(s, l)));
  }
  suite.checks.push_back({"auroc vs pair counting, 100 instances", auroc_err < 1e-9, "max diff " + fmt("%.2e", auroc_err)});

  double aupro_err = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 16, w = 16;
    const std::size_t images = static_cast<std::size_t>(rng.uniform_int(1, 3));
    std::vector<std::vector<double>> maps(images, std::vector<double>(h * w));
    std::vector<std::vector<std::uint8_t>> masks(images, std::vector<std::uint8_t>(h * w, 0));
    for (std::size_t i = 0; i < images; ++i) {
      const int blobs = rng.uniform_int(i == 0 ? 1 : 0, 3);
      for (int b = 0; b < blobs; ++b) {
        const int y0 = rng.uniform_int(0, 13), x0 = rng.uniform_int(0, 13);
        const int bh = rng.uniform_int(1, 4), bw = rng.uniform_int(1, 4);
        for (int y = y0; y < std::min<int>(16, y0 + bh); ++y)
          for (int x = x0; x < std::min<int>(16, x0 + bw); ++x) masks[i][y * w + x] = 1;
      }
      for (std::size_t p = 0; p < h * w; ++p) {
        double v = rng.uniform() + (masks[i][p] ? rng.uniform(0.0, 0.8) : 0.0);
        if (trial % 4 == 0) v = std::round(v * 8.0) / 8.0;
        maps[i][p] = v;
      }
    }
    std::vector<PixelSample> px;
    for (std::size_t i = 0; i < images; ++i) px.push_back({maps[i], masks[i], h, w});
    aupro_err = std::max(aupro_err, std::abs(aupro(px) - oracle::sweep_aupro(maps, masks, h, w)));
  }
  suite.checks.push_back({"aupro vs threshold sweep, 50 instances", aupro_err < 1e-3, "max diff " + fmt("%.2e", aupro_err)});

  double fm_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int steps = rng.uniform_int(2, 6);
    const int objects = rng.uniform_int(1, 6);
    std::vector<std::vector<double>> acc(objects, std::vector<double>(steps, std::numeric_limits<double>::quiet_NaN()));
    MetricsHistory h;
    for (int o = 0; o < objects; ++o) {
      const int first = o == 0 ? 0 : rng.uniform_int(0, steps - 1);
      for (int s = first; s < steps; ++s) {
        acc[o][s] = rng.uniform(50.0, 100.0);
        h.record(s, o, MetricRecord{acc[o][s], 0.0, 0.0});
      }
    }
    fm_err = std::max(fm_err, std::abs(forgetting_metric(h, MetricKind::kImageAuroc) - oracle::direct_forgetting(acc)));
  }
  suite.checks.push_back({"forgetting metric vs direct evaluation, 100 histories", fm_err < 1e-12,
                          "max diff " + fmt("%.2e", fm_err)});
  suite.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return suite;
}

Suite forgetting_examples() {
  const auto t0 = Clock::now();
  Suite suite{"forgetting examples", {}, 0.0};
  auto fm_of = [](const std::vector<std::vector<double>>& rows) {
    MetricsHistory h;
    for (std::size_t o = 0; o < rows.size(); ++o)
      for (std::size_t s = 0; s < rows[o].size(); ++s)
        h.record(static_cast<int>(s), static_cast<int>(o), MetricRecord{rows[o][s], 0.0, 0.0});
    return forgetting_metric(h, MetricKind::kImageAuroc);
  };
  const double one = fm_of({{90, 85, 80}});
  suite.checks.push_back({"[90,85,80] -> 10", one == 10.0, "got " + fmt("%.17g", one)});
  const double flat = fm_of({{77, 77, 77, 77}});
  suite.checks.push_back({"constant history -> 0", flat == 0.0, "got " + fmt("%.17g", flat)});
  const double two = fm_of({{90, 85, 80}, {70, 75, 80}});
  suite.checks.push_back({"{[90,85,80],[70,75,80]} -> 2.5", two == 2.5, "got " + fmt("%.17g", two)});
  suite.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return suite;
}

std::vector<Suite> run_all() { return {gradient_suite(), information_suite(), metric_suite(), forgetting_examples()}; }

std::string format(const std::vector<Suite>& suites) {
  std::string out;
  for (const auto& s : suites) {
    for (const auto& c : s.checks)
      out += std::string(c.passed ? "PASS" : "FAIL") + "  " + s.name + ": " + c.name + (c.detail.empty() ? "" : "  (" + c.detail + ")") + "\n";
    out += std::string(s.passed() ? "PASS" : "FAIL") + "  suite " + s.name + " (" + fmt("%.1f", s.seconds) + " s)\n";
  }
  return out;
}

}  // namespace ibiumad::verify
