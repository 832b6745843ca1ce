#include <doctest.h>

#include <algorithm>
#include <atomic>

#include "eval.hpp"
#include "helpers.hpp"

using namespace l2t;
using namespace l2t::testing;

namespace {

const Shape kShape{3, 16, 16};

// A constant-logit model that always predicts `label`.
ModelWeights constant_model(ArchId arch, int classes, int label) {
  ModelWeights m = zero_model(arch, kShape, classes);
  std::get<Dense>(m.layers.back()).bias[label] = 1.0;
  return m;
}

Zoo two_model_zoo() {
  Zoo zoo;
  zoo.members.push_back(random_model(ArchId::kConvSmall, kShape, 4, 1));
  zoo.members.push_back(random_model(ArchId::kMlp, kShape, 4, 2));
  zoo.members.push_back(random_model(ArchId::kConvDeep, kShape, 4, 3));
  return zoo;
}

}  // namespace

TEST_CASE("attack_success_rate counts misclassifications") {
  Zoo zoo;
  zoo.members.push_back(constant_model(ArchId::kConvSmall, 3, 0));
  zoo.members.push_back(constant_model(ArchId::kMlp, 3, 1));
  const std::vector<Image> images{random_image(kShape, 1), random_image(kShape, 2)};

  SUBCASE("benign-equivalent adversarials give zero ASR") {
    Zoo agree;
    agree.members.push_back(constant_model(ArchId::kConvSmall, 3, 2));
    agree.members.push_back(constant_model(ArchId::kMlp, 3, 2));
    const std::vector<int> labels{2, 2};
    const TransferReport r = attack_success_rate(agree, images, labels);
    CHECK(r.asr == std::vector<double>{0.0, 0.0});
    CHECK(r.average_asr == 0.0);
    CHECK(r.fooled_histogram == std::vector<int>{2, 0});
  }
  SUBCASE("mixed outcomes") {
    const std::vector<int> labels{0, 1};
    const TransferReport r = attack_success_rate(zoo, images, labels);
    CHECK(r.asr == std::vector<double>{0.5, 0.5});
    CHECK(r.average_asr == 0.5);
    CHECK(r.average_transfer_asr == 0.5);
    CHECK(r.fooled_counts == std::vector<int>{1, 0});
    CHECK(r.is_surrogate == std::vector<bool>{true, false});
  }
  SUBCASE("one target, one image") {
    Zoo one;
    one.members.push_back(constant_model(ArchId::kConvSmall, 3, 1));
    const std::vector<Image> img{images[0]};
    const std::vector<int> label{0};
    CHECK(attack_success_rate(one, img, label).asr == std::vector<double>{1.0});
  }
  CHECK_THROWS_AS(attack_success_rate(zoo, images, std::vector<int>{0}), InvalidArgument);
}

TEST_CASE("fooled_count") {
  const ModelWeights a = constant_model(ArchId::kConvSmall, 3, 0);
  const ModelWeights b = constant_model(ArchId::kMlp, 3, 0);
  const std::vector<const ModelWeights*> targets{&a, &b};
  const Image x = random_image(kShape, 1);
  CHECK(fooled_count(targets, x, 0) == 0);
  CHECK(fooled_count(targets, x, 2) == 2);
}

TEST_CASE("parallel_for covers every index and surfaces errors") {
  for (int jobs : {1, 3}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, jobs,
                                 [](std::size_t i) {
                                   if (i == 7) throw InvalidArgument("boom");
                                 }),
                    InvalidArgument);
  }
}

TEST_CASE("evaluate_method is independent of the worker count") {
  const Zoo zoo = two_model_zoo();
  EvalSet eval;
  for (int i = 0; i < 6; ++i) {
    eval.images.push_back(random_image(kShape, 10 + i));
    eval.labels.push_back(predict(zoo.members[0], eval.images.back()));
  }
  std::vector<Image> pool{random_image(kShape, 1)};
  const OpCatalog catalog = OpCatalog::build(all_categories(), kShape, pool);
  AttackConfig cfg;
  cfg.num_transforms = 2;
  std::vector<AttackResult> r1;
  std::vector<AttackResult> r3;
  const TransferReport a = evaluate_method(Method::kL2t, zoo, eval, cfg, catalog, 5, 1, &r1);
  const TransferReport b = evaluate_method(Method::kL2t, zoo, eval, cfg, catalog, 5, 3, &r3);
  CHECK(a.asr == b.asr);
  for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i].adversarial == r3[i].adversarial);
  CHECK(a.method == "l2t");
  CHECK(image_seed(5, 0) != image_seed(5, 1));
}

TEST_CASE("trajectory oracle") {
  const Zoo zoo = two_model_zoo();
  const std::vector<const ModelWeights*> targets{&zoo.members[1], &zoo.members[2]};
  std::vector<Image> pool_images{random_image(kShape, 1)};
  const OpCatalog catalog = OpCatalog::build(all_categories(), kShape, pool_images);
  const Image x = random_image(kShape, 4);
  const int y = predict(zoo.members[0], x);
  AttackConfig cfg;
  cfg.seed = 9;

  SUBCASE("identity pool gives the single MI-FGSM trajectory") {
    const std::vector<std::size_t> pool{catalog.find(Category::kRotate, 9)};
    const TrajectoryOracleResult r = brute_force_trajectory(zoo.members[0], targets, x, y, pool, 4, catalog, cfg);
    REQUIRE(r.trajectories.size() == 1);
    AttackConfig c4 = cfg;
    c4.iterations = 4;
    const Image mi = mifgsm(zoo.members[0], x, y, c4).adversarial;
    double expect = 0.0;
    for (const ModelWeights* m : targets) expect += loss_only(*m, mi, y);
    CHECK(r.best_value() == expect / 2.0);
  }
  SUBCASE("five ops over three iterations") {
    const std::vector<std::size_t> pool{catalog.find(Category::kRotate, 1), catalog.find(Category::kScale, 0),
                                        catalog.find(Category::kMask, 0), catalog.find(Category::kShuffle, 0),
                                        catalog.find(Category::kSpectrum, 4)};
    const TrajectoryOracleResult r = brute_force_trajectory(zoo.members[0], targets, x, y, pool, 3, catalog, cfg);
    CHECK(r.trajectories.size() == 125);
    CHECK(r.objective.size() == 125);
    CHECK(r.trajectories.front() == std::vector<std::size_t>{pool[0], pool[0], pool[0]});
    CHECK(r.trajectories[1] == std::vector<std::size_t>{pool[0], pool[0], pool[1]});
    CHECK(r.trajectories.back() == std::vector<std::size_t>{pool[4], pool[4], pool[4]});
    for (double v : r.objective) CHECK(r.best_value() >= v);
    for (std::size_t i = 0; i < r.best; ++i) CHECK(r.objective[i] < r.best_value());
    CHECK(trajectory_objective(zoo.members[0], targets, x, y, r.best_trajectory(), catalog, cfg) == r.best_value());
  }
  SUBCASE("ties go to the earliest trajectory") {
    const std::size_t id = catalog.find(Category::kRotate, 9);
    const std::vector<std::size_t> pool{id, id};
    const TrajectoryOracleResult r = brute_force_trajectory(zoo.members[0], targets, x, y, pool, 2, catalog, cfg);
    CHECK(r.trajectories.size() == 4);
    CHECK(r.best == 0);
  }
  SUBCASE("enumeration guard") {
    std::vector<std::size_t> pool(10);
    for (std::size_t i = 0; i < 10; ++i) pool[i] = i;
    CHECK_THROWS_AS(brute_force_trajectory(zoo.members[0], targets, x, y, pool, 7, catalog, cfg), InvalidArgument);
    CHECK_THROWS_AS(brute_force_trajectory(zoo.members[0], targets, x, y, std::vector<std::size_t>{}, 2, catalog, cfg),
                    InvalidArgument);
  }
}

TEST_CASE("ablation runs one report per grid point and seed") {
  const Zoo zoo = two_model_zoo();
  EvalSet eval;
  for (int i = 0; i < 3; ++i) {
    eval.images.push_back(random_image(kShape, 30 + i));
    eval.labels.push_back(predict(zoo.members[0], eval.images.back()));
  }
  AblationInputs in;
  in.zoo = &zoo;
  in.eval = &eval;
  in.categories = {Category::kScale, Category::kMask, Category::kShuffle};
  in.base.num_transforms = 2;
  in.base.iterations = 3;
  in.seeds = {1, 2};
  const std::vector<std::string> grid{"1", "2"};
  const AblationTable t = run_ablation(AblationAxis::kNumOps, grid, in);
  REQUIRE(t.points.size() == 2);
  CHECK(t.points[0].reports.size() == 2);
  CHECK(t.points[0].reports[0].seed == t.points[1].reports[0].seed);
  const std::vector<std::string> removal{"none", "mask"};
  CHECK(run_ablation(AblationAxis::kCategoryRemoval, removal, in).points.size() == 2);
  const std::vector<std::string> bad{"0"};
  CHECK_THROWS_AS(run_ablation(AblationAxis::kNumTransforms, bad, in), ConfigError);
  const std::vector<std::string> absent{"crop"};
  CHECK_THROWS_AS(run_ablation(AblationAxis::kCategoryRemoval, absent, in), ConfigError);
  CHECK(parse_axis("category-removal") == AblationAxis::kCategoryRemoval);
  CHECK_THROWS_AS(parse_axis("Q"), ConfigError);
}

TEST_CASE("mean and sample standard deviation") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(mean(v) == 2.5);
  CHECK(sample_stddev(v) == doctest::Approx(1.2909944487358056));
  CHECK(sample_stddev(std::vector<double>{3.0}) == 0.0);
}
