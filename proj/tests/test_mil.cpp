#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "veriprobe/mil.hpp"

using namespace veriprobe;

namespace {

Bag bag_of(const Eigen::MatrixXd& x, int label, Eigen::VectorXi mask = {}) {
  if (mask.size() == 0) mask = Eigen::VectorXi::Ones(x.rows());
  return {x, label, mask};
}

}  // namespace

TEST(Mil, SingleInstancePositiveBagCollapses) {
  std::vector<Bag> pos{bag_of((Eigen::MatrixXd(1, 2) << 1, 2).finished(), 1)};
  std::vector<Bag> neg{bag_of((Eigen::MatrixXd(2, 2) << -1, 0, 0, -1).finished(), 0)};
  const auto p = build_smil_problem(pos, neg, 1.0);
  EXPECT_EQ(p.size(), 3);
  EXPECT_TRUE(p.instances.row(0).isApprox(pos[0].instances.row(0)));
  EXPECT_DOUBLE_EQ(p.margins[0], 1.0);
  EXPECT_DOUBLE_EQ(p.margins[1], 1.0);
  EXPECT_DOUBLE_EQ(p.targets[1], -1.0);
}

TEST(Mil, IdenticalPairHasZeroMargin) {
  std::vector<Bag> pos{bag_of((Eigen::MatrixXd(2, 2) << 0.5, 1, 0.5, 1).finished(), 1)};
  std::vector<Bag> neg{bag_of((Eigen::MatrixXd(1, 2) << -1, 0).finished(), 0)};
  const auto p = build_smil_problem(pos, neg, 1.0);
  EXPECT_TRUE(p.instances.row(0).isApprox((Eigen::RowVector2d() << 0.5, 1).finished()));
  EXPECT_DOUBLE_EQ(p.margins[0], 0.0);
}

TEST(Mil, SmilMatchesHandBuiltOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(1, 3);
  std::vector<Bag> pos, neg;
  for (int i = 0; i < 3; ++i) pos.push_back(bag_of(fixture::gaussian_matrix(rng, len(rng), 2).array() + 1.0, 1));
  for (int i = 0; i < 2; ++i) neg.push_back(bag_of(fixture::gaussian_matrix(rng, 1, 2).array() - 1.0, 0));
  neg.push_back(bag_of(fixture::gaussian_matrix(rng, 2, 2).array() - 1.0, 0));

  // Reduced problem assembled independently of build_smil_problem.
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> y, m;
  for (const auto& b : pos) {
    rows.push_back(b.instances.colwise().sum() / static_cast<double>(b.size()));
    y.push_back(1);
    m.push_back((2.0 - static_cast<double>(b.size())) / static_cast<double>(b.size()));
  }
  for (const auto& b : neg)
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      rows.push_back(b.instances.row(r));
      y.push_back(-1);
      m.push_back(1);
    }
  SvmProblem hand;
  hand.instances.resize(static_cast<Eigen::Index>(rows.size()), 2);
  hand.targets.resize(hand.instances.rows());
  hand.margins.resize(hand.instances.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    hand.instances.row(static_cast<Eigen::Index>(i)) = rows[i];
    hand.targets[static_cast<Eigen::Index>(i)] = y[i];
    hand.margins[static_cast<Eigen::Index>(i)] = m[i];
  }
  hand.cost = 1.0;
  hand.class_weights = inverse_frequency_weights(hand.targets);

  MilConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 200000;
  const auto s = solve_smil(pos, neg, cfg);
  EXPECT_NEAR(s.objective, oracle::svm_dual_optimum(hand), 1e-6);
}

TEST(Mil, NearestRankQuantile) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(nearest_rank_quantile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(nearest_rank_quantile(std::vector<double>(10, 0.0), 0.9), 0.0);
  std::vector<double> ten(10);
  std::iota(ten.begin(), ten.end(), 1.0);
  EXPECT_DOUBLE_EQ(nearest_rank_quantile(ten, 1.0 - 0.1), 9.0);
}

TEST(Mil, RelabelIsMaskConjunction) {
  const std::vector<double> scores{3, 2, 5, 5};
  const std::vector<int> mask{0, 1, 0, 1};
  EXPECT_EQ(relabel_positive_instances(scores, mask, 1.0), (std::vector<int>{-1, 1, -1, 1}));
  EXPECT_EQ(relabel_positive_instances(scores, std::vector<int>{0, 0, 0, 1}, 0.0), (std::vector<int>{-1, -1, -1, 1}));
}

TEST(Mil, RelabelCountsAndMonotonicity) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::bernoulli_distribution coin(0.6);
  std::vector<double> scores(200);
  std::vector<int> mask(200);
  for (auto& s : scores) s = n(rng);
  for (auto& m : mask) m = coin(rng) ? 1 : 0;
  std::size_t previous = scores.size() + 1;
  for (double eta : {1.0, 0.7, 0.4, 0.1, 0.01}) {
    const double q = nearest_rank_quantile(scores, 1.0 - eta);
    const auto labels = relabel_positive_instances(scores, mask, q);
    std::size_t plus = 0, above = 0, masked = 0, both = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      plus += labels[j] == 1;
      above += scores[j] >= q;
      masked += mask[j] == 1;
      both += scores[j] >= q && mask[j] == 1;
    }
    EXPECT_EQ(plus, both);
    EXPECT_LE(plus, above);
    EXPECT_LE(plus, masked);
    EXPECT_LE(plus, previous);
    previous = plus;
  }
}

TEST(Mil, EtaOneRelabelsEveryMaskedPositive) {
  const auto data = fixture::planted_bags(8, 4, 20);
  std::vector<Bag> pos = data.positive;
  for (auto& b : pos) b.mask.setOnes();
  MilConfig cfg;
  cfg.eta = 1.0;
  const auto model = train_sawmil(pos, data.negative, cfg);
  Eigen::Index total = 0;
  for (const auto& b : pos) total += b.size();
  EXPECT_EQ(static_cast<Eigen::Index>(model.relabeled_positive), total);
}

TEST(Mil, BagScoreIsMaxInstanceScore) {
  std::mt19937_64 rng(12);
  const Eigen::VectorXd theta = fixture::gaussian_vector(rng, 3);
  const Bag b = bag_of(fixture::gaussian_matrix(rng, 5, 3), 1);
  double best = -1e300;
  for (Eigen::Index r = 0; r < 5; ++r) best = std::max(best, score(theta, 0.25, b.instances.row(r).transpose()));
  EXPECT_DOUBLE_EQ(bag_score(theta, 0.25, b), best);
  EXPECT_DOUBLE_EQ(bag_score(Eigen::VectorXd::Zero(3), 1.5, b), 1.5);
  const Bag one = bag_of(b.instances.topRows(1), 1);
  EXPECT_DOUBLE_EQ(bag_score(theta, 0.0, one), one.instances.row(0).dot(theta));
  EXPECT_THROW(bag_score(Eigen::VectorXd::Zero(2), 0.0, b), Error);
}

TEST(Mil, SingletonBagsBehaveLikePlainSvm) {
  std::mt19937_64 rng(21);
  std::vector<Bag> pos, neg;
  SvmProblem flat;
  flat.instances.resize(40, 2);
  flat.targets.resize(40);
  for (int i = 0; i < 20; ++i) {
    Eigen::MatrixXd a = fixture::gaussian_matrix(rng, 1, 2).array() + 1.5;
    Eigen::MatrixXd c = fixture::gaussian_matrix(rng, 1, 2).array() - 1.5;
    pos.push_back(bag_of(a, 1));
    neg.push_back(bag_of(c, 0));
    flat.instances.row(i) = a.row(0);
    flat.instances.row(20 + i) = c.row(0);
    flat.targets[i] = 1;
    flat.targets[20 + i] = -1;
  }
  flat.margins = Eigen::VectorXd::Ones(40);
  flat.class_weights = inverse_frequency_weights(flat.targets);
  MilConfig cfg;
  cfg.eta = 1.0;
  cfg.tol = 1e-9;
  cfg.max_iter = 100000;
  const auto model = train_sawmil(pos, neg, cfg);
  const auto plain = solve_svm(flat, cfg.svm_options());
  for (Eigen::Index j = 0; j < 40; ++j) {
    const double a = score(model.solution.theta, model.solution.intercept, flat.instances.row(j).transpose());
    const double b = score(plain.theta, plain.intercept, flat.instances.row(j).transpose());
    EXPECT_EQ(a > 0, b > 0);
  }
}

TEST(Mil, PlantedDirectionIsRecovered) {
  auto data = fixture::planted_bags(99, 8, 150, 4.0, true);
  const auto model = train_sawmil(data.positive, data.negative, MilConfig{});
  const double cosine = model.solution.theta.normalized().dot(data.u);
  EXPECT_GE(cosine, 0.95);
}

TEST(Mil, DegenerateFilterIsNamed) {
  // Masks that exclude every above-quantile instance leave nothing to relabel.
  std::vector<Bag> pos{bag_of((Eigen::MatrixXd(2, 1) << 5, -5).finished(), 1, (Eigen::VectorXi(2) << 0, 1).finished())};
  std::vector<Bag> neg{bag_of((Eigen::MatrixXd(2, 1) << -6, -7).finished(), 0)};
  MilConfig cfg;
  cfg.eta = 0.1;  // only the top-scoring instance clears the quantile, and its mask is 0
  try {
    train_sawmil(pos, neg, cfg);
    FAIL() << "expected degenerate filter";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_filter);
  }
}

TEST(Mil, ValidationErrors) {
  std::vector<Bag> none;
  std::vector<Bag> neg{bag_of(Eigen::MatrixXd::Zero(1, 2), 0)};
  EXPECT_THROW(solve_smil(none, neg, MilConfig{}), Error);
  std::vector<Bag> bad{bag_of(Eigen::MatrixXd::Zero(2, 2), 1, Eigen::VectorXi::Zero(2))};
  EXPECT_THROW(solve_smil(bad, neg, MilConfig{}), Error);
  MilConfig cfg;
  cfg.eta = 0.0;
  EXPECT_THROW(validate(cfg), Error);
}
