#include <cmath>

#include "doctest.h"
#include "evireg/dataset.hpp"
#include "evireg/training.hpp"

using namespace evireg;

namespace {

Dataset noiseless_cubic(int n) {
  CubicOptions opts;
  opts.noise_std = 0.0;
  return gen_cubic(n, 4, opts).train;
}

}  // namespace

TEST_CASE("training lowers the loss on noiseless cubic data") {
  MLPConfig c;
  c.hidden_widths = {32, 32};
  c.seed = 1;
  const Model m = Model::create(c, HeadSpec{});
  TrainOptions opts;
  opts.epochs = 200;
  opts.batch_size = 64;
  const TrainResult r = train(m, noiseless_cubic(256), LossSpec{}, opts);
  REQUIRE(r.log.size() == 200);
  CHECK(r.log.back().total < r.log.front().total);
  CHECK(r.log.back().train_rmse < r.log.front().train_rmse);
  CHECK(r.adam.step == 200 * 4);
  CHECK(r.diverged_at_epoch == 0);
}

TEST_CASE("training is deterministic") {
  MLPConfig c;
  c.hidden_widths = {16};
  c.seed = 2;
  const Model m = Model::create(c, HeadSpec{});
  TrainOptions opts;
  opts.epochs = 20;
  opts.batch_size = 32;
  opts.seed = 9;
  LossSpec loss;
  loss.weights = {0.01, 0.1};
  const Dataset d = noiseless_cubic(100);
  const TrainResult a = train(m, d, loss, opts);
  const TrainResult b = train(m, d, loss, opts);
  CHECK(a.model.weights.identical(b.model.weights));
  CHECK(a.adam.m.identical(b.adam.m));
  opts.seed = 10;
  CHECK_FALSE(train(m, d, loss, opts).model.weights.identical(a.model.weights));
}

TEST_CASE("callback sees every epoch") {
  MLPConfig c;
  c.hidden_widths = {4};
  int seen = 0;
  TrainOptions opts;
  opts.epochs = 5;
  (void)train(Model::create(c, HeadSpec{}), noiseless_cubic(20), LossSpec{}, opts,
              [&](const EpochLog& log, const Model&) { CHECK(log.epoch == ++seen); });
  CHECK(seen == 5);
}

TEST_CASE("divergence either throws or stops at the last finite epoch") {
  MLPConfig c;
  c.hidden_widths = {16};
  c.seed = 3;
  const Model m = Model::create(c, HeadSpec{});
  TrainOptions opts;
  opts.epochs = 50;
  opts.lr = 1e200;
  const Dataset d = noiseless_cubic(64);
  CHECK_THROWS_AS((void)train(m, d, LossSpec{}, opts), std::runtime_error);
  opts.stop_on_divergence = true;
  const TrainResult r = train(m, d, LossSpec{}, opts);
  CHECK(r.diverged_at_epoch > 0);
  CHECK_FALSE(r.divergence_reason.empty());
  CHECK(r.model.weights.all_finite());
  CHECK(static_cast<int>(r.log.size()) == r.diverged_at_epoch - 1);
}

TEST_CASE("input dimension mismatch is rejected") {
  MLPConfig c;
  c.input_dim = 2;
  CHECK_THROWS((void)train(Model::create(c, HeadSpec{}), noiseless_cubic(10), LossSpec{}, TrainOptions{}));
}
