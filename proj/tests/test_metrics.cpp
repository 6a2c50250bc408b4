#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "motionact/bodymodel.hpp"
#include "motionact/io.hpp"
#include "motionact/metrics.hpp"
#include "oracles.hpp"

using namespace motionact;
using namespace motionact::metrics;

namespace {

std::vector<Tensor> gaussian_samples(Rng& rng, const std::vector<double>& mu,
                                     const std::vector<double>& diag_var, int n) {
  std::vector<Tensor> out;
  auto d = static_cast<int64_t>(mu.size());
  for (int i = 0; i < n; i++) {
    Tensor v({d});
    for (int64_t k = 0; k < d; k++)
      v.data[static_cast<size_t>(k)] =
          mu[static_cast<size_t>(k)] + rng.normal() * std::sqrt(diag_var[static_cast<size_t>(k)]);
    out.push_back(std::move(v));
  }
  return out;
}

// closed-form Frechet distance between diagonal Gaussians
double frechet_diag(const std::vector<double>& mu1, const std::vector<double>& v1,
                    const std::vector<double>& mu2, const std::vector<double>& v2) {
  double acc = 0.0;
  for (size_t i = 0; i < mu1.size(); i++) {
    double dm = mu1[i] - mu2[i];
    acc += dm * dm + v1[i] + v2[i] - 2.0 * std::sqrt(v1[i] * v2[i]);
  }
  return acc;
}

Tensor constant_motion(int64_t t_len, double value = 0.0) {
  return Tensor({t_len, body::kHybridDims}, value);
}

}  // namespace

TEST_CASE("fid of identical sets is zero") {
  Rng rng(1);
  std::vector<Tensor> set;
  for (int i = 0; i < 20; i++) set.push_back(rng.normal_tensor({6}));
  CHECK(fid(set, set) <= 1e-8);
}

TEST_CASE("fid of constant 0 vs constant 1 in 1-D is about 1") {
  std::vector<Tensor> a(5, Tensor({1}, 0.0));
  std::vector<Tensor> b(5, Tensor({1}, 1.0));
  CHECK(fid(a, b) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fid within 5 percent of the closed form for 4-D Gaussians at n=5000") {
  Rng rng(2024);
  std::vector<double> mu1 = {0.0, 1.0, -0.5, 2.0}, v1 = {1.0, 0.5, 2.0, 0.2};
  std::vector<double> mu2 = {0.5, 0.0, 0.5, 1.0}, v2 = {0.5, 1.5, 1.0, 0.8};
  auto a = gaussian_samples(rng, mu1, v1, 5000);
  auto b = gaussian_samples(rng, mu2, v2, 5000);
  double want = frechet_diag(mu1, v1, mu2, v2);
  double got = fid(a, b);
  CHECK(std::fabs(got - want) / want <= 0.05);
}

TEST_CASE("fid is symmetric and rejects tiny sets") {
  Rng rng(5);
  std::vector<Tensor> a, b;
  for (int i = 0; i < 8; i++) {
    a.push_back(rng.normal_tensor({3}));
    b.push_back(rng.normal_tensor({3}, 2.0));
  }
  CHECK(fid(a, b) == doctest::Approx(fid(b, a)).epsilon(1e-9));
  std::vector<Tensor> tiny = {rng.normal_tensor({3})};
  CHECK_THROWS_AS(fid(tiny, b), std::runtime_error);
}

TEST_CASE("fid is invariant under a shared rigid feature map") {
  // Frechet distance is preserved by orthogonal maps plus shifts (general
  // full-rank affine maps rescale the mean term, so "affine" here means rigid).
  Rng rng(7);
  const int64_t d = 3;
  std::vector<Tensor> a, b;
  for (int i = 0; i < 40; i++) {
    a.push_back(rng.normal_tensor({d}));
    b.push_back(rng.normal_tensor({d}, 1.5));
  }
  double base = fid(a, b);

  // Householder reflection as the orthogonal map, plus a shift
  Tensor u = rng.normal_tensor({d});
  double un = 0.0;
  for (double v : u.data) un += v * v;
  auto apply = [&](const Tensor& x) {
    Tensor y({d});
    double dot = 0.0;
    for (int64_t i = 0; i < d; i++) dot += u.data[static_cast<size_t>(i)] * x.data[static_cast<size_t>(i)];
    for (int64_t i = 0; i < d; i++)
      y.data[static_cast<size_t>(i)] =
          x.data[static_cast<size_t>(i)] - 2.0 * dot / un * u.data[static_cast<size_t>(i)] + 0.7 * (i + 1);
    return y;
  };
  std::vector<Tensor> a2, b2;
  for (const auto& x : a) a2.push_back(apply(x));
  for (const auto& x : b) b2.push_back(apply(x));
  CHECK(std::fabs(fid(a2, b2) - base) <= 1e-6 * (1.0 + base));
}

TEST_CASE("constant pose has no motion beats") {
  CHECK(detect_motion_beats(constant_motion(60), 30.0).empty());
}

TEST_CASE("a single stop inside a moving clip lands one beat at k/fps") {
  const int64_t t_len = 40, k = 17;
  Tensor motion({t_len, body::kHybridDims});
  // steady drift, except frame k repeats frame k-1 (a stop)
  double pos = 0.0;
  for (int64_t t = 0; t < t_len; t++) {
    if (t != k) pos += 0.02;
    for (int64_t c = 0; c < body::kHybridDims; c += 3) motion.at(t, c) = pos;
  }
  auto beats = detect_motion_beats(motion, 30.0);
  REQUIRE(beats.size() == 1);
  CHECK(beats[0] == doctest::Approx(k / 30.0).epsilon(1e-12));
}

TEST_CASE("time reversal mirrors motion beats") {
  Rng rng(11);
  const int64_t t_len = 90;
  // smooth random walk over a few joints
  Tensor motion({t_len, body::kHybridDims});
  double state[6] = {0, 0, 0, 0, 0, 0};
  double vel[6] = {0, 0, 0, 0, 0, 0};
  for (int64_t t = 0; t < t_len; t++) {
    for (int s = 0; s < 6; s++) {
      vel[s] = 0.9 * vel[s] + 0.05 * rng.normal();
      state[s] += vel[s];
      motion.at(t, s * 9) = state[s];
    }
  }
  Tensor rev({t_len, body::kHybridDims});
  for (int64_t t = 0; t < t_len; t++)
    for (int64_t c = 0; c < body::kHybridDims; c++) rev.at(t, c) = motion.at(t_len - 1 - t, c);

  auto fwd = detect_motion_beats(motion, 30.0);
  auto bwd = detect_motion_beats(rev, 30.0);
  // speed index t (transition t-1 -> t) maps to T-t under reversal
  std::vector<double> mirrored;
  for (auto it = fwd.rbegin(); it != fwd.rend(); ++it)
    mirrored.push_back((static_cast<double>(t_len) - *it * 30.0) / 30.0);
  REQUIRE(bwd.size() == mirrored.size());
  for (size_t i = 0; i < bwd.size(); i++) CHECK(bwd[i] == doctest::Approx(mirrored[i]).epsilon(1e-9));
}

TEST_CASE("beat_align basics") {
  std::vector<double> beats = {0.5, 1.0, 1.5, 2.0};
  CHECK(beat_align(beats, beats, 0.1) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(beat_align({1.0}, {1.1}, 0.1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  CHECK(beat_align(beats, {}, 0.1) == 0.0);
  CHECK_THROWS_AS(beat_align({}, beats, 0.1), std::runtime_error);

  // reordering the lists does not change the score
  std::vector<double> shuffled = {2.0, 0.5, 1.5, 1.0};
  CHECK(beat_align(beats, shuffled, 0.1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beat_align strictly decreases as a uniform offset grows") {
  std::vector<double> grid;
  for (int i = 0; i < 8; i++) grid.push_back(0.25 + 0.5 * i);
  double prev = 2.0;
  for (double off = 0.0; off <= 0.26; off += 0.05) {
    std::vector<double> moved;
    for (double g : grid) moved.push_back(g + off);
    double score = beat_align(grid, moved, 0.1);
    CHECK(score < prev);
    prev = score;
  }
}

TEST_CASE("div_in of a constant pose is zero; two-frame case matches the loop oracle") {
  CHECK(div_in(constant_motion(10, 0.3)) == 0.0);

  const double d = 0.05;
  Tensor two({2, body::kHybridDims}, 0.0);
  for (int64_t c = 0; c < body::kHybridDims; c++) two.at(1, c) = d;
  // every coordinate differs by d -> distance d*sqrt(1458)
  CHECK(div_in(two) == doctest::Approx(d * std::sqrt(1458.0)).epsilon(1e-12));

  Rng rng(3);
  Tensor m = rng.normal_tensor({5, 12});
  double want = 0.0;
  int pairs = 0;
  for (int64_t i = 0; i < 5; i++)
    for (int64_t j = i + 1; j < 5; j++) {
      double acc = 0.0;
      for (int64_t c = 0; c < 12; c++) {
        double diff = m.at(i, c) - m.at(j, c);
        acc += diff * diff;
      }
      want += std::sqrt(acc);
      pairs++;
    }
  CHECK(div_in(m) == doctest::Approx(want / pairs).epsilon(1e-12));
}

TEST_CASE("div_out of identical samples is zero and matches the loop oracle") {
  Rng rng(9);
  Tensor a = rng.normal_tensor({7, 9});
  CHECK(div_out(a, a) == 0.0);
  Tensor b = rng.normal_tensor({7, 9});
  double want = 0.0;
  for (int64_t t = 0; t < 7; t++) {
    double acc = 0.0;
    for (int64_t c = 0; c < 9; c++) {
      double diff = a.at(t, c) - b.at(t, c);
      acc += diff * diff;
    }
    want += std::sqrt(acc);
  }
  CHECK(div_out(a, b) == doctest::Approx(want / 7.0).epsilon(1e-12));
  Tensor c({6, 9});
  CHECK_THROWS_AS(div_out(a, c), std::runtime_error);
}

TEST_CASE("fsr counts exactly the constructed skating transitions") {
  body::KinematicTree tree = body::build_minibody();
  const int64_t t_len = 11;  // 10 transitions
  Tensor motion({t_len, body::kHybridDims});
  // keypoint columns for the left ankle
  auto set_foot = [&](int64_t t, int32_t joint, double x, double y) {
    int64_t base = body::kSurfacePoints * 3 + joint * 3;
    motion.at(t, base + 0) = x;
    motion.at(t, base + 1) = y;
  };
  // feet low; the left ankle steps 4 cm at transitions 3, 6, 9 and holds,
  // so exactly 3 of the 10 transitions slide
  for (int64_t t = 0; t < t_len; t++) {
    double x = 0.0;
    for (int64_t step : {3, 6, 9})
      if (t >= step) x += 0.04;
    for (int32_t j : tree.foot_joints) set_foot(t, j, 0.0, 0.02);
    set_foot(t, tree.foot_joints[0], x, 0.02);
  }
  CHECK(fsr(motion, tree) == doctest::Approx(0.3).epsilon(1e-12));

  SUBCASE("planted feet never skate") {
    Tensor still({t_len, body::kHybridDims});
    for (int64_t t = 0; t < t_len; t++)
      for (int32_t j : tree.foot_joints) {
        int64_t base = body::kSurfacePoints * 3 + j * 3;
        still.at(t, base + 1) = 0.01;
      }
    CHECK(fsr(still, tree) == 0.0);
  }

  SUBCASE("a lifted foot may slide without counting") {
    Tensor lifted({t_len, body::kHybridDims});
    for (int64_t t = 0; t < t_len; t++)
      for (int32_t j : tree.foot_joints) set_foot(t, j, 0.1 * static_cast<double>(t), 0.2);
    CHECK(fsr(lifted, tree) == 0.0);
  }
}

TEST_CASE("lvd and ld identities and loop oracle") {
  Rng rng(21);
  Tensor a = rng.normal_tensor({6, 53});
  CHECK(lvd(a, a) == 0.0);
  CHECK(ld(a, a) == 0.0);

  // constant offset, constant in time: no velocity difference
  Tensor b = a;
  for (auto& v : b.data) v += 0.2;
  CHECK(lvd(b, a) <= 1e-12);
  CHECK(ld(b, a) == doctest::Approx(0.2 * std::sqrt(53.0)).epsilon(1e-12));

  Tensor c = rng.normal_tensor({6, 53});
  double want_ld = 0.0;
  for (int64_t t = 0; t < 6; t++) {
    double acc = 0.0;
    for (int64_t k = 0; k < 53; k++) {
      double diff = a.at(t, k) - c.at(t, k);
      acc += diff * diff;
    }
    want_ld += std::sqrt(acc);
  }
  CHECK(ld(a, c) == doctest::Approx(want_ld / 6.0).epsilon(1e-12));

  double want_lvd = 0.0;
  for (int64_t t = 0; t < 5; t++) {
    double acc = 0.0;
    for (int64_t k = 0; k < 53; k++) {
      double va = a.at(t + 1, k) - a.at(t, k);
      double vc = c.at(t + 1, k) - c.at(t, k);
      acc += (va - vc) * (va - vc);
    }
    want_lvd += std::sqrt(acc);
  }
  CHECK(lvd(a, c) == doctest::Approx(want_lvd / 5.0).epsilon(1e-12));
}

TEST_CASE("translation invariance of the pose metrics") {
  Rng rng(33);
  body::KinematicTree tree = body::build_minibody();
  Tensor a = rng.normal_tensor({8, body::kHybridDims}, 0.1);
  Tensor b = rng.normal_tensor({8, body::kHybridDims}, 0.1);
  double shift[3] = {1.3, 0.0, -2.0};  // horizontal shift keeps fsr heights valid
  auto translate = [&](const Tensor& m) {
    Tensor out = m;
    for (int64_t t = 0; t < m.shape[0]; t++)
      for (int64_t p = 0; p < body::kHybridPoints; p++)
        for (int k = 0; k < 3; k++) out.at(t, p * 3 + k) += shift[k];
    return out;
  };
  Tensor at = translate(a), bt = translate(b);
  CHECK(div_in(at) == doctest::Approx(div_in(a)).epsilon(1e-9));
  CHECK(div_out(at, bt) == doctest::Approx(div_out(a, b)).epsilon(1e-9));
  CHECK(fsr(at, tree) == doctest::Approx(fsr(a, tree)).epsilon(1e-12));
  CHECK(lvd(at, bt) == doctest::Approx(lvd(a, b)).epsilon(1e-9));
  CHECK(ld(at, bt) == doctest::Approx(ld(a, b)).epsilon(1e-9));
}

TEST_CASE("feature extractors have the declared dimensions") {
  Rng rng(40);
  Tensor motion = rng.normal_tensor({12, body::kHybridDims}, 0.1);
  CHECK(kinetic_features(motion, 30.0).shape == Shape{110});
  CHECK(geometric_features(motion).shape == Shape{432});
}

TEST_CASE("report files round-trip") {
  MetricReport r;
  r.fid_k = 1.25;
  r.beat_align = 0.8;
  r.n_clips = 20;
  r.n_samples = 40;
  write_report_binary("/tmp/ma_report.mrpt", r, "k=v\n");
  MetricReport back = read_report_binary("/tmp/ma_report.mrpt");
  CHECK(back.fid_k == r.fid_k);
  CHECK(back.beat_align == r.beat_align);
  CHECK(back.n_clips == 20);
  write_report_text("/tmp/ma_report.txt", r, "k=v\n");
  auto bytes = read_file_bytes("/tmp/ma_report.txt");
  std::string text(bytes.begin(), bytes.end());
  CHECK(text.find("fid_k 1.25") != std::string::npos);
  CHECK(text.find("# k=v") != std::string::npos);
  std::remove("/tmp/ma_report.mrpt");
  std::remove("/tmp/ma_report.txt");
}
