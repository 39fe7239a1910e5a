#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "evireg/checkpoint.hpp"

using namespace evireg;

namespace {

Checkpoint sample_checkpoint() {
  MLPConfig c;
  c.hidden_widths = {5, 3};
  c.seed = 77;
  Checkpoint ck{Model::create(c, HeadSpec{HeadSpec::Kind::NIG, ActivationKind::Exp, 1}), {}};
  ck.adam = AdamState::for_weights(ck.model.weights, 1e-3);
  ck.adam.step = 12;
  // awkward doubles that need all 17 digits
  ck.model.weights.layers[0].w(0, 0) = 0.1 + 0.2;
  ck.model.weights.layers[1].b(2) = -1.0 / 3.0;
  ck.model.weights.layers[2].w(1, 1) = 5e-324;
  ck.adam.m.layers[0].b(1) = 1e300;
  return ck;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("round trip is bit-exact") {
  const Checkpoint ck = sample_checkpoint();
  const std::string text = checkpoint_to_string(ck);
  const Checkpoint back = checkpoint_from_string(text);
  CHECK(back.model.weights.identical(ck.model.weights));
  CHECK(back.adam.m.identical(ck.adam.m));
  CHECK(back.adam.v.identical(ck.adam.v));
  CHECK(back.adam.step == 12);
  CHECK(back.adam.lr == 1e-3);
  CHECK(back.model.config == ck.model.config);
  CHECK(back.model.head == ck.model.head);
  CHECK(checkpoint_to_string(back) == text);
}

TEST_CASE("save and load through a file") {
  const auto dir = std::filesystem::temp_directory_path() / "evireg_ckpt_test";
  std::filesystem::create_directories(dir);
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(ck, dir / "c.json");
  CHECK(load_checkpoint(dir / "c.json").model.weights.identical(ck.model.weights));
  CHECK_THROWS_AS((void)load_checkpoint(dir / "missing.json"), CheckpointError);
}

TEST_CASE("errors name the offending field") {
  const std::string text = checkpoint_to_string(sample_checkpoint());
  try {
    (void)checkpoint_from_string(replace_once(text, "\"version\": 1", "\"version\": 2"));
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.field() == "version");
    CHECK(std::string(e.what()).find("unsupported version") != std::string::npos);
  }
  try {
    (void)checkpoint_from_string(replace_once(text, "\"t\": 12", "\"t\": \"x\""));
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.field() == "adam.t");
  }
  try {
    (void)checkpoint_from_string("{not json");
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.field() == "<document>");
  }
}

TEST_CASE("non-finite weights are refused") {
  Checkpoint ck = sample_checkpoint();
  ck.model.weights.layers[0].b(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS((void)checkpoint_to_string(ck), CheckpointError);
}
