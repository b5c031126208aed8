#include <catch2/catch_amalgamated.hpp>

#include "mkvlevy/parallel.hpp"
#include "mkvlevy/rng.hpp"

#include <cmath>
#include <set>
#include <vector>

using namespace mkvlevy;

TEST_CASE("philox4x32-10 known answers", "[rng]") {
  using C = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct", "[rng]") {
  Rng a = Rng::stream(42, {tags::kParticle, 7});
  Rng b = Rng::stream(42, {tags::kParticle, 7});
  Rng c = Rng::stream(42, {tags::kParticle, 8});
  Rng d = Rng::stream(43, {tags::kParticle, 7});
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    REQUIRE(x == b());
    seen.insert(x);
    seen.insert(c());
    seen.insert(d());
  }
  CHECK(seen.size() == 3000);
}

TEST_CASE("split leaves the parent untouched", "[rng]") {
  Rng a(1, 2);
  Rng ref(1, 2);
  Rng child = a.split(5);
  Rng child2 = a.split(5);
  CHECK(child() == child2());
  CHECK(a() == ref());
}

TEST_CASE("variate moments", "[rng]") {
  Rng rng(9, 9);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, se = 0, sg = 0;
  double umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    se += rng.exponential();
    sg += rng.gamma(0.3);
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  CHECK(su / n == Catch::Approx(0.5).margin(4 * std::sqrt(1.0 / 12 / n)));
  CHECK(sn / n == Catch::Approx(0.0).margin(4 / std::sqrt(n)));
  CHECK(sn2 / n == Catch::Approx(1.0).margin(4 * std::sqrt(2.0 / n)));
  CHECK(se / n == Catch::Approx(1.0).margin(4 / std::sqrt(n)));
  CHECK(sg / n == Catch::Approx(0.3).margin(4 * std::sqrt(0.3 / n)));
}

TEST_CASE("below and poisson", "[rng]") {
  Rng rng(3, 1);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[rng.below(5)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(8000.0));
  double s = 0;
  for (int i = 0; i < 20000; ++i) s += static_cast<double>(rng.poisson(3.5));
  CHECK(s / 20000 == Catch::Approx(3.5).margin(4 * std::sqrt(3.5 / 20000)));
}

TEST_CASE("parallel_for result independent of worker count", "[rng][parallel]") {
  auto run = [](unsigned threads) {
    set_max_threads(threads);
    std::vector<double> out(5000);
    parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        Rng r = Rng::stream(77, {tags::kPath, i});
        out[i] = r.normal() + r.uniform();
      }
    });
    return out;
  };
  const auto one = run(1);
  CHECK(run(3) == one);
  CHECK(run(8) == one);
  set_max_threads(0);
}

TEST_CASE("parallel_for rethrows worker exceptions", "[parallel]") {
  set_max_threads(4);
  CHECK_THROWS_AS(parallel_for(1000, [](std::size_t b, std::size_t) {
                    if (b > 0) throw std::runtime_error("boom");
                  }, 10),
                  std::runtime_error);
  set_max_threads(0);
}
