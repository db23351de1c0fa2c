#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tineuvox/synth.hpp"
#include "tineuvox/trainer.hpp"

using namespace tnv;

namespace {

Image pattern_image(int width, int height, double phase) {
  Image img(width, height);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (int k = 0; k < 3; ++k)
        img.at(r, c, k) = 0.5f + 0.5f * static_cast<float>(std::sin(0.3 * r + 0.7 * c + k + phase));
  return img;
}

FrameRecord make_frame(int index, int count, double time, double phase) {
  FrameRecord fr;
  fr.image = pattern_image(16, 12, phase);
  fr.pose = look_at_pose(3.0 * fibonacci_dir(index, count, 0.2), Vec3d::Zero(), Vec3d(0, 0, 1));
  fr.focal = 10.0;
  fr.time = time;
  fr.name = "frame_" + std::to_string(index);
  return fr;
}

Dataset make_dataset() {
  Dataset ds;
  ds.train = {make_frame(0, 3, 0.0, 0.0), make_frame(1, 3, 0.5, 1.3), make_frame(2, 3, 1.0, 2.1)};
  ds.val = {make_frame(0, 1, 0.25, 0.7)};
  return ds;
}

TrainConfig trainer_cfg() {
  TrainConfig cfg;
  cfg.grid_nx = cfg.grid_ny = cfg.grid_nz = 16;
  cfg.cv = 2;
  cfg.pe_f = 1;
  cfg.ct = 6;
  cfg.strides = {1, 2};
  cfg.ch = 16;
  cfg.pe_x = 4;
  cfg.pe_d = 2;
  cfg.pe_t = 3;
  cfg.total_iters = 12;
  cfg.batch_rays = 48;
  cfg.upscale_iters = {6};
  cfg.half_precision_last = 3;
  cfg.checkpoint_every = 5;
  cfg.val_every = 4;
  cfg.seed = 11;
  return cfg;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST_CASE("evaluate_frames scores a self-rendering at the psnr cap") {
  TrainConfig cfg = trainer_cfg();
  Model<float> model(cfg, 4, 4, 4);
  Rng rng(5);
  model.init_weights(rng);
  for (std::size_t i = 0; i < model.grid.num_values(); ++i)
    model.grid.set_value(i, static_cast<float>(rng.uniform(-1.0, 1.0)));

  const RenderOptions<float> opts = render_options_from<float>(cfg);
  std::vector<FrameRecord> frames = {make_frame(0, 2, 0.0, 0.0), make_frame(1, 2, 1.0, 0.5)};
  for (FrameRecord& fr : frames)
    fr.image = render_image(model, fr.pose, fr.focal, fr.image.width, fr.image.height, fr.time, opts);

  const MetricReport rep = evaluate_frames(model, frames, opts);
  REQUIRE(rep.psnr.size() == 2);
  CHECK(rep.psnr[0] == 99.0);
  CHECK(rep.psnr[1] == 99.0);
  CHECK(rep.mean_psnr == 99.0);
  CHECK(rep.ssim[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metric_report_csv formats rows and the mean") {
  MetricReport rep;
  rep.add(20.0, 0.8);
  rep.add(30.5, 0.75);
  rep.finalize();
  CHECK(metric_report_csv(rep, {"a", "b"}) ==
        "frame,psnr,ssim\n"
        "a,20.000000,0.800000\n"
        "b,30.500000,0.750000\n"
        "mean,25.250000,0.775000\n");
  CHECK(oracle::throws_kind(TnvError::Kind::invalid_input,
                            [&] { (void)metric_report_csv(rep, {"a"}); }));
}

TEST_CASE("trainer runs events, checkpoints, and the loss csv") {
  const std::string dir = oracle::scratch_dir("trainer_run");
  const Dataset ds = make_dataset();
  Trainer trainer(trainer_cfg(), &ds, dir);
  trainer.run();

  CHECK(trainer.iteration() == 12);
  CHECK(std::isfinite(trainer.last_loss().total));
  REQUIRE(trainer.stride_grad_norms().size() == 2);
  CHECK(trainer.stride_grad_norms()[0] >= 0.0);

  namespace fs = std::filesystem;
  REQUIRE(fs::exists(dir + "/ckpt_0000005.tnvc"));
  REQUIRE(fs::exists(dir + "/ckpt_0000010.tnvc"));
  REQUIRE(fs::exists(dir + "/final.tnvc"));
  REQUIRE(fs::exists(dir + "/loss.csv"));

  const auto rows = parse_csv(oracle::read_file(dir + "/loss.csv"));
  REQUIRE(rows.size() == 13);  // header + 12 iterations
  CHECK(rows[0] == std::vector<std::string>{"iter", "photo", "all_pts", "bg_entropy", "total",
                                            "lr_voxels", "psnr_eval"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 7);
    CHECK(rows[i][0] == std::to_string(i - 1));
    // Validation PSNR appears exactly every val_every iterations.
    const bool has_eval = (i % 4) == 0;
    CHECK(rows[i][6].empty() == !has_eval);
    if (has_eval) CHECK(std::stod(rows[i][6]) > 0.0);
  }
  CHECK(rows[1][5] == "0.08");  // lr column starts at the base voxel lr
  CHECK(std::stod(rows[12][4]) < std::stod(rows[1][4]));  // loss went down

  // Mid-run checkpoint: pre-upscale resolution, optimizer state, stride
  // norms from the matching checkpoint boundary.
  const Checkpoint mid = load_checkpoint(dir + "/ckpt_0000005.tnvc");
  CHECK(mid.iteration == 5);
  CHECK(mid.model.grid.nx() == 2);
  CHECK_FALSE(mid.model.grid.half_mode());
  REQUIRE(mid.has_optimizer);
  CHECK(mid.stride_grad_norms.size() == 2);

  // Final checkpoint: upscaled at iter 6, half precision from iter 9.
  const Checkpoint fin = load_checkpoint(dir + "/final.tnvc");
  CHECK(fin.iteration == 12);
  CHECK(fin.model.grid.nx() == 4);
  CHECK(fin.model.grid.half_mode());
  CHECK(fin.stride_grad_norms == trainer.stride_grad_norms());
}

TEST_CASE("training is bitwise deterministic in the seed") {
  const std::string dir_a = oracle::scratch_dir("trainer_det_a");
  const std::string dir_b = oracle::scratch_dir("trainer_det_b");
  const Dataset ds = make_dataset();

  Trainer a(trainer_cfg(), &ds, dir_a);
  a.run();
  Trainer b(trainer_cfg(), &ds, dir_b);
  b.run();

  CHECK(oracle::read_file(dir_a + "/loss.csv") == oracle::read_file(dir_b + "/loss.csv"));
  CHECK(oracle::read_file(dir_a + "/final.tnvc") == oracle::read_file(dir_b + "/final.tnvc"));

  TrainConfig other = trainer_cfg();
  other.seed = 12;
  const std::string dir_c = oracle::scratch_dir("trainer_det_c");
  Trainer c(other, &ds, dir_c);
  c.run();
  CHECK(oracle::read_file(dir_a + "/final.tnvc") != oracle::read_file(dir_c + "/final.tnvc"));
}

TEST_CASE("resume from a mid-run checkpoint reproduces the full run") {
  const std::string dir_full = oracle::scratch_dir("trainer_resume_full");
  const std::string dir_cont = oracle::scratch_dir("trainer_resume_cont");
  const Dataset ds = make_dataset();

  Trainer full(trainer_cfg(), &ds, dir_full);
  full.run();

  Trainer cont(trainer_cfg(), &ds, dir_cont);
  cont.resume_from(dir_full + "/ckpt_0000005.tnvc");
  CHECK(cont.iteration() == 5);
  CHECK(cont.config().total_iters == 12);
  cont.run();

  CHECK(oracle::read_file(dir_cont + "/final.tnvc") == oracle::read_file(dir_full + "/final.tnvc"));

  // The resumed process logs only its own iterations.
  const auto rows = parse_csv(oracle::read_file(dir_cont + "/loss.csv"));
  REQUIRE(rows.size() == 8);
  CHECK(rows[1][0] == "5");
  CHECK(rows[7][0] == "11");
  // Its rows match the uninterrupted run's tail byte for byte.
  const auto full_rows = parse_csv(oracle::read_file(dir_full + "/loss.csv"));
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i] == full_rows[i + 5]);
}

TEST_CASE("zero-iteration run writes an untrained final checkpoint") {
  TrainConfig cfg = trainer_cfg();
  cfg.total_iters = 0;
  cfg.upscale_iters.clear();
  cfg.half_precision_last = 0;

  const std::string dir = oracle::scratch_dir("trainer_zero");
  const Dataset ds = make_dataset();
  Trainer trainer(cfg, &ds, dir);
  trainer.run();

  CHECK(trainer.iteration() == 0);
  const Checkpoint ck = load_checkpoint(dir + "/final.tnvc");
  CHECK(ck.iteration == 0);
  CHECK(ck.stride_grad_norms.empty());  // no gradients were ever recorded
  CHECK(ck.model.grid.nx() == 2);

  const auto rows = parse_csv(oracle::read_file(dir + "/loss.csv"));
  CHECK(rows.size() == 1);  // header only

  // An empty out_dir disables file output entirely.
  Trainer silent(cfg, &ds, "");
  silent.run();
  CHECK(silent.iteration() == 0);
}

TEST_CASE("a poisoned parameter aborts with a batch dump") {
  TrainConfig cfg = trainer_cfg();
  cfg.total_iters = 2;
  cfg.upscale_iters.clear();
  cfg.half_precision_last = 0;
  cfg.checkpoint_every = 0;
  cfg.val_every = 0;

  const std::string dir = oracle::scratch_dir("trainer_nan");
  const Dataset ds = make_dataset();
  Trainer trainer(cfg, &ds, dir);
  trainer.model().radiance_net.density.bias(0) = std::numeric_limits<float>::quiet_NaN();

  CHECK(oracle::throws_kind(TnvError::Kind::numeric, [&] { trainer.run(); }));
  const std::string dump = oracle::read_file(dir + "/nan_batch_dump.txt");
  CHECK(dump.find("iteration 0") != std::string::npos);
  CHECK(dump.find("frame_") != std::string::npos);
}

TEST_CASE("trainer constructor and resume validation") {
  using K = TnvError::Kind;
  const Dataset ds = make_dataset();
  CHECK(oracle::throws_kind(K::invalid_input, [&] { Trainer t(trainer_cfg(), nullptr, ""); }));

  Dataset empty;
  CHECK(oracle::throws_kind(K::invalid_input, [&] { Trainer t(trainer_cfg(), &empty, ""); }));

  // Evaluation-style setup: no iterations, no train split required.
  TrainConfig cfg0 = trainer_cfg();
  cfg0.total_iters = 0;
  cfg0.upscale_iters.clear();
  cfg0.half_precision_last = 0;
  Trainer ok(cfg0, &empty, "");
  ok.run();

  // A checkpoint without optimizer state cannot seed a resume.
  const std::string dir = oracle::scratch_dir("trainer_badresume");
  Model<float> model(cfg0, 2, 2, 2);
  Rng rng(1);
  model.init_weights(rng);
  save_checkpoint(dir + "/bare.tnvc", 0, model, rng.save_state(), nullptr, nullptr, nullptr, {});
  Trainer t(cfg0, &ds, "");
  CHECK(oracle::throws_kind(K::state, [&] { t.resume_from(dir + "/bare.tnvc"); }));
}
