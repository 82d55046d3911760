#include "doctest.h"

#include <cmath>

#include "specmatch/encoder.hpp"
#include "specmatch/loss.hpp"
#include "specmatch/rng.hpp"
#include "specmatch/spectral.hpp"
#include "specmatch/tape.hpp"

using namespace specmatch;

namespace {

Eigen::MatrixXd random_unit_rows(int n, int d, Rng& rng) {
  Eigen::MatrixXd z(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
    z.row(i) /= z.row(i).norm();
  }
  return z;
}

// Independent reference implementation: literal double loop over anchors and
// candidates, no log-sum-exp shift.
double info_nce_reference(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double tau) {
  const int n = static_cast<int>(z1.rows());
  Eigen::MatrixXd zcat(2 * n, z1.cols());
  zcat << z1, z2;
  double total = 0.0;
  for (int r = 0; r < 2 * n; ++r) {
    const int p = r < n ? r + n : r - n;
    double denom = 0.0;
    for (int c = 0; c < 2 * n; ++c) {
      if (c != r) denom += std::exp(zcat.row(c).dot(zcat.row(r)) / tau);
    }
    const double pos = std::exp(zcat.row(p).dot(zcat.row(r)) / tau);
    total += -std::log(pos / denom);
  }
  return total;
}

} // namespace

TEST_SUITE("loss") {

TEST_CASE("similarity_matrix on canonical embeddings") {
  SUBCASE("orthonormal rows give the identity") {
    const Eigen::MatrixXd s = similarity_matrix(Eigen::MatrixXd::Identity(4, 4));
    CHECK((s - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("duplicated row gives off-diagonal one") {
    Eigen::MatrixXd z(2, 3);
    z << 1.0, 0.0, 0.0,
         1.0, 0.0, 0.0;
    const Eigen::MatrixXd s = similarity_matrix(z);
    CHECK(s(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("hand-computed dot product") {
    Eigen::MatrixXd z(2, 2);
    z << 1.0, 0.0,
         0.6, 0.8;
    const Eigen::MatrixXd s = similarity_matrix(z);
    CHECK(s(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(s(1, 0) == s(0, 1));
    CHECK(s(0, 0) == 1.0);
    CHECK(s(1, 1) == 1.0);
  }
  SUBCASE("result is symmetric with unit diagonal on random input") {
    Rng rng(41);
    const Eigen::MatrixXd z = random_unit_rows(7, 5, rng);
    const Eigen::MatrixXd s = similarity_matrix(z);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 7; ++i) CHECK(s(i, i) == 1.0);
  }
}

TEST_CASE("percentile_threshold uses the nearest-rank rule on off-diagonal values") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
  s(0, 1) = s(1, 0) = 0.1;
  s(0, 2) = s(2, 0) = 0.5;
  s(1, 2) = s(2, 1) = 0.9;
  // Upper triangle holds {0.1, 0.5, 0.9}: rank ceil(0.8 * 3) = 3 -> 0.9.
  CHECK(percentile_threshold(s, 80.0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(percentile_threshold(s, 100.0) == doctest::Approx(0.9).epsilon(1e-15));
  // rank ceil(0.01 * 3) = 1 -> smallest value.
  CHECK(percentile_threshold(s, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
  // rank ceil(0.5 * 3) = 2 -> middle value.
  CHECK(percentile_threshold(s, 50.0) == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("all-equal off-diagonals give that value at any percentile") {
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 4, 0.3);
    c.diagonal().setOnes();
    for (double p : {5.0, 50.0, 80.0, 100.0}) {
      CHECK(percentile_threshold(c, p) == doctest::Approx(0.3).epsilon(1e-15));
    }
  }
  SUBCASE("a single graph has no off-diagonal pairs") {
    CHECK_THROWS_AS(percentile_threshold(Eigen::MatrixXd::Identity(1, 1), 80.0),
                    std::invalid_argument);
  }
}

TEST_CASE("adjacency applies a strict threshold off the diagonal") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
  s(0, 1) = s(1, 0) = 0.1;
  s(0, 2) = s(2, 0) = 0.5;
  s(1, 2) = s(2, 1) = 0.9;

  SUBCASE("threshold at the maximum empties the graph") {
    const Eigen::MatrixXd a = adjacency(s, 0.9);
    CHECK(a.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("threshold below the minimum gives the complete graph") {
    const Eigen::MatrixXd a = adjacency(s, -1.0);
    CHECK(a.sum() == doctest::Approx(6.0));
    CHECK(a.diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("equality does not pass the strict comparison") {
    const Eigen::MatrixXd a = adjacency(s, 0.5);
    CHECK(a(1, 2) == 1.0);
    CHECK(a(0, 2) == 0.0); // s(0,2) == theta exactly
    CHECK(a(0, 1) == 0.0);
  }
}

TEST_CASE("soft_weights clip negatives and obey the mask") {
  Eigen::MatrixXd s(2, 2);
  s << 1.0, -0.4,
       -0.4, 1.0;
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0,
       1.0, 0.0;
  const Eigen::MatrixXd w = soft_weights(s, a);
  CHECK(w(0, 1) == 0.0); // negative similarity clipped
  CHECK(w(0, 0) == 0.0); // diagonal masked

  s(0, 1) = s(1, 0) = 0.7;
  const Eigen::MatrixXd w2 = soft_weights(s, a);
  CHECK(w2(0, 1) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("normalized_laplacian on canonical graphs") {
  SUBCASE("single edge") {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, 1.0,
         1.0, 0.0;
    const Eigen::MatrixXd lap = normalized_laplacian(a);
    Eigen::MatrixXd expected(2, 2);
    expected << 1.0, -1.0,
                -1.0, 1.0;
    CHECK((lap - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("uniform edge weights cancel in the normalization") {
    Eigen::MatrixXd w(2, 2);
    w << 0.0, 2.0,
         2.0, 0.0;
    const Eigen::MatrixXd lap = normalized_laplacian(w);
    CHECK(lap(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(lap(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("isolated node becomes an identity row") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 1) = a(1, 0) = 1.0;
    const Eigen::MatrixXd lap = normalized_laplacian(a);
    CHECK(lap(2, 2) == 1.0);
    CHECK(lap(2, 0) == 0.0);
    CHECK(lap(2, 1) == 0.0);
  }
  SUBCASE("negative weights are rejected") {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, -0.5,
         -0.5, 0.0;
    CHECK_THROWS_AS(normalized_laplacian(a), std::invalid_argument);
  }
  SUBCASE("eigenvalues stay in [0, 2]") {
    Rng rng(43);
    const Eigen::MatrixXd z = random_unit_rows(8, 4, rng);
    LossConfig cfg;
    cfg.percentile = 60.0;
    const ViewGraph vg = build_view_graph(z, cfg);
    const auto eig = eigh(vg.lap);
    CHECK(eig.eigenvalues.minCoeff() > -1e-10);
    CHECK(eig.eigenvalues.maxCoeff() < 2.0 + 1e-10);
  }
}

TEST_CASE("spectral_match_loss is the squared Frobenius gap") {
  const Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
  CHECK(spectral_match_loss(i3, i3) == 0.0);

  const double r = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd path_lap(3, 3);
  path_lap << 1.0, -r, 0.0,
              -r, 1.0, -r,
              0.0, -r, 1.0;
  // Difference is the four off-diagonal entries of magnitude 1/sqrt(2).
  CHECK(spectral_match_loss(path_lap, i3) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("info_nce frozen oracles") {
  SUBCASE("a single pair has no negatives and zero loss") {
    Eigen::MatrixXd z(1, 3);
    z << 1.0, 0.0, 0.0;
    CHECK(info_nce(z, z, 0.5) == 0.0);
    Eigen::MatrixXd w(1, 2);
    w << 0.6, 0.8;
    CHECK(info_nce(w, w, 0.2) == 0.0);
  }
  SUBCASE("two identical pairs at tau 1") {
    Eigen::MatrixXd z(2, 2);
    z << 1.0, 0.0,
         1.0, 0.0;
    // Every anchor: positive sim 1, both negatives sim 1 -> loss ln 3 each.
    CHECK(info_nce(z, z, 1.0) == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("two orthogonal pairs at tau 1") {
    Eigen::MatrixXd z(2, 2);
    z << 1.0, 0.0,
         0.0, 1.0;
    // Positive sim 1, negatives orthogonal: loss ln(1 + 2/e) per anchor.
    const double expected = 4.0 * std::log(1.0 + 2.0 / std::exp(1.0));
    CHECK(info_nce(z, z, 1.0) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("agrees with an independent double-loop implementation") {
    Rng rng(47);
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 2 + trial;
      const Eigen::MatrixXd z1 = random_unit_rows(n, 4, rng);
      const Eigen::MatrixXd z2 = random_unit_rows(n, 4, rng);
      for (double tau : {0.2, 0.5, 1.0}) {
        CHECK(info_nce(z1, z2, tau) ==
              doctest::Approx(info_nce_reference(z1, z2, tau)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("invariant under a shared permutation of the batch") {
    Rng rng(53);
    const Eigen::MatrixXd z1 = random_unit_rows(5, 3, rng);
    const Eigen::MatrixXd z2 = random_unit_rows(5, 3, rng);
    std::vector<int> perm = {3, 1, 4, 0, 2};
    Eigen::MatrixXd p1(5, 3), p2(5, 3);
    for (int i = 0; i < 5; ++i) {
      p1.row(i) = z1.row(perm[static_cast<size_t>(i)]);
      p2.row(i) = z2.row(perm[static_cast<size_t>(i)]);
    }
    CHECK(info_nce(p1, p2, 0.5) == doctest::Approx(info_nce(z1, z2, 0.5)).epsilon(1e-12));
  }
  SUBCASE("rejects bad input") {
    Eigen::MatrixXd z(2, 2);
    z << 1.0, 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(info_nce(z, z, 0.0), std::invalid_argument);
    Eigen::MatrixXd w(3, 2);
    w.setZero();
    CHECK_THROWS_AS(info_nce(z, w, 0.5), std::invalid_argument);
  }
}

TEST_CASE("build_view_graph satisfies its structural invariants") {
  Rng rng(59);
  const Eigen::MatrixXd z = random_unit_rows(10, 6, rng);
  LossConfig cfg;
  cfg.percentile = 80.0;

  SUBCASE("binary mode") {
    cfg.adjacency_mode = AdjacencyMode::Binary;
    const ViewGraph vg = build_view_graph(z, cfg);
    CHECK_NOTHROW(vg.validate());
    CHECK(vg.theta == percentile_threshold(vg.s, cfg.percentile));
    CHECK(vg.w.size() == 0);
    // Laplacian built from the binary adjacency.
    CHECK((vg.lap - normalized_laplacian(vg.a)).cwiseAbs().maxCoeff() == 0.0);
    // Adjacency matches a strict threshold of s.
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const double expected = (i != j && vg.s(i, j) > vg.theta) ? 1.0 : 0.0;
        CHECK(vg.a(i, j) == expected);
      }
  }
  SUBCASE("soft mode") {
    cfg.adjacency_mode = AdjacencyMode::Soft;
    const ViewGraph vg = build_view_graph(z, cfg);
    CHECK_NOTHROW(vg.validate());
    REQUIRE(vg.w.rows() == 10);
    // Weights vanish exactly where the mask does and are never negative.
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        if (vg.a(i, j) == 0.0) CHECK(vg.w(i, j) == 0.0);
        CHECK(vg.w(i, j) >= 0.0);
      }
    CHECK((vg.lap - normalized_laplacian(vg.w)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("total_loss composes the two terms") {
  Rng rng(61);
  const Eigen::MatrixXd z1 = random_unit_rows(8, 4, rng);
  const Eigen::MatrixXd z2 = random_unit_rows(8, 4, rng);

  for (AdjacencyMode mode : {AdjacencyMode::Binary, AdjacencyMode::Soft}) {
    LossConfig cfg;
    cfg.tau = 0.4;
    cfg.beta = 0.7;
    cfg.percentile = 70.0;
    cfg.adjacency_mode = mode;

    const TotalLoss tl = total_loss(z1, z2, cfg);
    CHECK(tl.contrastive == doctest::Approx(info_nce(z1, z2, cfg.tau)).epsilon(1e-12));
    const double expected_spec = spectral_match_loss(tl.view1.lap, tl.view2.lap);
    CHECK(tl.spectral == doctest::Approx(expected_spec).epsilon(1e-12));
    CHECK(tl.total == doctest::Approx(tl.contrastive + cfg.beta * tl.spectral).epsilon(1e-12));
  }

  SUBCASE("beta zero reduces to the contrastive term") {
    LossConfig cfg;
    cfg.beta = 0.0;
    const TotalLoss tl = total_loss(z1, z2, cfg);
    CHECK(tl.total == tl.contrastive);
  }
  SUBCASE("identical views have zero spectral loss") {
    LossConfig cfg;
    const TotalLoss tl = total_loss(z1, z1, cfg);
    CHECK(tl.spectral == 0.0);
    CHECK(tl.total == tl.contrastive);
  }
}

TEST_CASE("taped loss value matches the eager loss in both modes") {
  Rng rng(67);
  Eigen::MatrixXd raw1(6, 4), raw2(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) {
      raw1(i, j) = rng.normal();
      raw2(i, j) = rng.normal();
    }

  for (AdjacencyMode mode : {AdjacencyMode::Binary, AdjacencyMode::Soft}) {
    LossConfig cfg;
    cfg.tau = 0.3;
    cfg.beta = 0.5;
    cfg.percentile = 60.0;
    cfg.adjacency_mode = mode;

    Tape tape;
    const NodeId n1 = tape.leaf(raw1, true);
    const NodeId n2 = tape.leaf(raw2, true);
    const TapedLoss tl = taped_total_loss(tape, n1, n2, cfg);

    const Eigen::MatrixXd z1 = normalize_rows(raw1);
    const Eigen::MatrixXd z2 = normalize_rows(raw2);
    const TotalLoss eager = total_loss(z1, z2, cfg);

    CHECK(tape.value(tl.total)(0, 0) == doctest::Approx(eager.total).epsilon(1e-9));
    CHECK(tape.value(tl.contrastive)(0, 0) == doctest::Approx(eager.contrastive).epsilon(1e-9));
    CHECK(tape.value(tl.spectral)(0, 0) == doctest::Approx(eager.spectral).epsilon(1e-9));
  }
}

TEST_CASE("binary-mode spectral term contributes no gradient") {
  Rng rng(71);
  Eigen::MatrixXd raw1(6, 4), raw2(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) {
      raw1(i, j) = rng.normal();
      raw2(i, j) = rng.normal();
    }

  LossConfig cfg;
  cfg.adjacency_mode = AdjacencyMode::Binary;
  cfg.beta = 0.8;
  cfg.percentile = 60.0;

  // Gradient of the total objective...
  Tape tape_total;
  const NodeId t1 = tape_total.leaf(raw1, true);
  const NodeId t2 = tape_total.leaf(raw2, true);
  const TapedLoss tl = taped_total_loss(tape_total, t1, t2, cfg);
  tape_total.backward(tl.total);

  // ...equals the gradient of the contrastive term alone.
  Tape tape_c;
  const NodeId c1 = tape_c.leaf(raw1, true);
  const NodeId c2 = tape_c.leaf(raw2, true);
  const TapedLoss cl = taped_total_loss(tape_c, c1, c2, cfg);
  tape_c.backward(cl.contrastive);

  CHECK((tape_total.grad(t1) - tape_c.grad(c1)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((tape_total.grad(t2) - tape_c.grad(c2)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("soft-mode gradients match finite differences through the whole objective") {
  Rng rng(73);
  Eigen::MatrixXd raw1(6, 4), raw2(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) {
      raw1(i, j) = rng.normal();
      raw2(i, j) = rng.normal();
    }

  LossConfig cfg;
  cfg.adjacency_mode = AdjacencyMode::Soft;
  cfg.tau = 0.5;
  cfg.beta = 0.6;
  cfg.percentile = 60.0;

  Tape tape;
  const NodeId n1 = tape.leaf(raw1, true);
  const NodeId n2 = tape.leaf(raw2, true);
  const TapedLoss tl = taped_total_loss(tape, n1, n2, cfg);
  tape.backward(tl.total);

  auto eval = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return total_loss(normalize_rows(a), normalize_rows(b), cfg).total;
  };
  const double h = 1e-6;
  Rng pick(79);
  for (int trial = 0; trial < 24; ++trial) {
    const int i = pick.uniform_int(0, 5);
    const int j = pick.uniform_int(0, 3);
    const bool first = pick.bernoulli(0.5);
    Eigen::MatrixXd up1 = raw1, dn1 = raw1, up2 = raw2, dn2 = raw2;
    double g = 0.0;
    double fd = 0.0;
    if (first) {
      up1(i, j) += h;
      dn1(i, j) -= h;
      fd = (eval(up1, raw2) - eval(dn1, raw2)) / (2.0 * h);
      g = tape.grad(n1)(i, j);
    } else {
      up2(i, j) += h;
      dn2(i, j) -= h;
      fd = (eval(raw1, up2) - eval(raw1, dn2)) / (2.0 * h);
      g = tape.grad(n2)(i, j);
    }
    CHECK(std::abs(fd - g) <= 1e-4 * (1.0 + std::abs(g)));
  }
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.tau = 0.2;
  cfg.beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.beta = 0.5;
  cfg.percentile = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.percentile = 101.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  CHECK(adjacency_mode_from_name(adjacency_mode_name(AdjacencyMode::Binary)) ==
        AdjacencyMode::Binary);
  CHECK(adjacency_mode_from_name(adjacency_mode_name(AdjacencyMode::Soft)) ==
        AdjacencyMode::Soft);
  CHECK_THROWS(adjacency_mode_from_name("fuzzy"));
}

} // TEST_SUITE
