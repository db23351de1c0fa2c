#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tineuvox/checkpoint.hpp"

using namespace tnv;

namespace {

TrainConfig small_cfg() {
  TrainConfig cfg;
  cfg.grid_nx = cfg.grid_ny = cfg.grid_nz = 16;
  cfg.cv = 3;
  cfg.pe_f = 2;
  cfg.ct = 15;
  cfg.ch = 16;
  cfg.strides = {1, 2};
  cfg.total_iters = 100;
  cfg.upscale_iters = {20};
  cfg.half_precision_last = 10;
  cfg.checkpoint_every = 50;
  return cfg;
}

// A model mid-upscale (grid smaller than the configured base resolution)
// with every serialized section populated.
Model<float> populated_model() {
  Model<float> m(small_cfg(), 6, 5, 4);
  Rng rng(99);
  m.init_weights(rng);
  for (std::size_t i = 0; i < m.grid.num_values(); ++i)
    m.grid.set_value(i, static_cast<float>(rng.uniform(-2.0, 2.0)));
  int k = 0;
  for (LinearLayer<float>* l : m.all_net_layers()) l->bias.setConstant(0.125f * ++k);
  return m;
}

AdamGroup<float> patterned_group(const std::string& id, double lr, std::size_t n,
                                 std::int64_t steps) {
  AdamGroup<float> g;
  g.id = id;
  g.base_lr = lr;
  g.step_count = steps;
  g.m.resize(n);
  g.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.m[i] = 0.01f * static_cast<float>(i) - 0.3f;
    g.v[i] = 0.001f * static_cast<float>(i);
  }
  return g;
}

}  // namespace

TEST_CASE("checkpoint round trip preserves every section exactly") {
  const std::string dir = oracle::scratch_dir("ckpt_roundtrip");
  const std::string path = dir + "/state.tnvc";

  Model<float> model = populated_model();
  Rng rng(4242);
  (void)rng.uniform(0.0, 1.0);
  const std::string rng_state = rng.save_state();

  const auto opt_v = patterned_group("voxels", 0.08, model.grid.num_values(), 17);
  const auto opt_d = patterned_group("deform_net", 6e-4, 25, 17);
  const auto opt_m = patterned_group("other_mlps", 8e-4, 40, 17);
  const std::vector<double> norms = {1.5, 0.25};

  save_checkpoint(path, 77, model, rng_state, &opt_v, &opt_d, &opt_m, norms);
  const Checkpoint ck = load_checkpoint(path);

  CHECK(ck.iteration == 77);
  CHECK(ck.rng_state == rng_state);
  CHECK(serialize_train_config(ck.model.cfg) == serialize_train_config(model.cfg));
  CHECK(ck.stride_grad_norms == norms);

  REQUIRE(ck.model.grid.nx() == 6);
  REQUIRE(ck.model.grid.ny() == 5);
  REQUIRE(ck.model.grid.nz() == 4);
  CHECK(ck.model.grid.strides() == model.grid.strides());
  CHECK(ck.model.grid.bbox_min() == model.grid.bbox_min());
  CHECK_FALSE(ck.model.grid.half_mode());
  CHECK(ck.model.grid.raw_data() == model.grid.raw_data());

  const auto got = ck.model.all_net_layers();
  const auto want = model.all_net_layers();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i]->weight == want[i]->weight);
    CHECK(got[i]->bias == want[i]->bias);
  }

  REQUIRE(ck.has_optimizer);
  CHECK(ck.opt_voxels.id == "voxels");
  CHECK(ck.opt_voxels.base_lr == model.cfg.lr_voxels);
  CHECK(ck.opt_voxels.step_count == 17);
  CHECK(ck.opt_voxels.m == opt_v.m);
  CHECK(ck.opt_voxels.v == opt_v.v);
  CHECK(ck.opt_deform.m == opt_d.m);
  CHECK(ck.opt_mlps.v == opt_m.v);

  // Re-saving the loaded state reproduces the file byte for byte.
  const std::string resaved = dir + "/resaved.tnvc";
  save_checkpoint(resaved, ck.iteration, ck.model, ck.rng_state, &ck.opt_voxels, &ck.opt_deform,
                  &ck.opt_mlps, ck.stride_grad_norms);
  CHECK(oracle::read_file(resaved) == oracle::read_file(path));
}

TEST_CASE("checkpoint without optimizer state") {
  const std::string dir = oracle::scratch_dir("ckpt_noopt");
  const std::string path = dir + "/bare.tnvc";
  Model<float> model = populated_model();

  save_checkpoint(path, 0, model, "rngstate", nullptr, nullptr, nullptr, {});
  const Checkpoint ck = load_checkpoint(path);
  CHECK_FALSE(ck.has_optimizer);
  CHECK(ck.opt_voxels.m.empty());
  CHECK(ck.stride_grad_norms.empty());
  CHECK(ck.model.grid.raw_data() == model.grid.raw_data());

  const auto opt = patterned_group("voxels", 0.08, model.grid.num_values(), 1);
  CHECK(oracle::throws_kind(TnvError::Kind::invalid_input, [&] {
    save_checkpoint(path, 0, model, "", &opt, nullptr, nullptr, {});
  }));
}

TEST_CASE("half-precision grids persist as two-byte payloads") {
  const std::string dir = oracle::scratch_dir("ckpt_half");
  Model<float> model = populated_model();

  save_checkpoint(dir + "/f32.tnvc", 5, model, "s", nullptr, nullptr, nullptr, {});
  model.grid.quantize_half();
  save_checkpoint(dir + "/f16.tnvc", 5, model, "s", nullptr, nullptr, nullptr, {});

  const std::string f32 = oracle::read_file(dir + "/f32.tnvc");
  const std::string f16 = oracle::read_file(dir + "/f16.tnvc");
  // Identical layout except the grid payload: 4 vs 2 bytes per value.
  CHECK(f32.size() - f16.size() == 2 * model.grid.num_values());

  const Checkpoint ck = load_checkpoint(dir + "/f16.tnvc");
  REQUIRE(ck.model.grid.half_mode());
  CHECK(ck.model.grid.raw_half_data() == model.grid.raw_half_data());
  // Interpolation sees the dequantized values.
  CHECK(ck.model.grid.value(0) == model.grid.value(0));
}

TEST_CASE("checkpoint rejects missing, corrupt, and truncated files") {
  using K = TnvError::Kind;
  const std::string dir = oracle::scratch_dir("ckpt_corrupt");
  const std::string path = dir + "/good.tnvc";
  Model<float> model = populated_model();
  save_checkpoint(path, 3, model, "state", nullptr, nullptr, nullptr, {0.5});
  const std::string good = oracle::read_file(path);

  CHECK(oracle::throws_kind(K::io, [&] { (void)load_checkpoint(dir + "/absent.tnvc"); }));

  oracle::write_file(dir + "/magic.tnvc", "XXXX" + good.substr(4));
  CHECK(oracle::throws_kind(K::parse, [&] { (void)load_checkpoint(dir + "/magic.tnvc"); }));

  std::string bumped = good;
  bumped[4] = 2;  // unsupported version
  oracle::write_file(dir + "/version.tnvc", bumped);
  CHECK(oracle::throws_kind(K::parse, [&] { (void)load_checkpoint(dir + "/version.tnvc"); }));

  oracle::write_file(dir + "/trunc.tnvc", good.substr(0, good.size() - 6));
  CHECK(oracle::throws_kind(K::io, [&] { (void)load_checkpoint(dir + "/trunc.tnvc"); }));

  oracle::write_file(dir + "/tiny.tnvc", good.substr(0, 3));
  CHECK(oracle::throws_kind(K::parse, [&] { (void)load_checkpoint(dir + "/tiny.tnvc"); }));
}
