#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "oracles.hpp"
#include "tineuvox/config.hpp"
#include "tineuvox/synth.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TNV_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string cli_cfg_text(std::int64_t total_iters) {
  tnv::TrainConfig cfg;
  cfg.grid_nx = cfg.grid_ny = cfg.grid_nz = 16;
  cfg.cv = 2;
  cfg.pe_f = 1;
  cfg.ct = 6;
  cfg.strides = {1, 2};
  cfg.ch = 16;
  cfg.pe_x = 4;
  cfg.pe_d = 2;
  cfg.pe_t = 3;
  cfg.total_iters = total_iters;
  cfg.batch_rays = 32;
  cfg.upscale_iters.clear();
  cfg.half_precision_last = 0;
  cfg.checkpoint_every = 0;
  cfg.val_every = 0;
  cfg.seed = 31;
  return tnv::serialize_train_config(cfg);
}

}  // namespace

TEST_CASE("cli usage: help exits 0, malformed invocations exit 2") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("synth --help") == 0);
  CHECK(run_cli("") == 2);               // a subcommand is required
  CHECK(run_cli("flybywire") == 2);      // unknown subcommand
  CHECK(run_cli("synth --out /tmp/x") == 2);  // missing required --spec
  CHECK(run_cli("train --data /tmp/x --config /tmp/c") == 2);  // missing --out
}

TEST_CASE("cli end-to-end chain and error exits") {
  const std::string root = oracle::scratch_dir("cli_chain");
  const std::string spec = root + "/scene.json";
  oracle::write_file(spec,
                     "{\"primitives\": [{\"type\": \"sphere\", \"radius\": 0.4,"
                     " \"density\": 30, \"albedo\": [0.85, 0.4, 0.2],"
                     " \"center\": {\"base\": [-0.5, 0, 0], \"linear\": [1, 0, 0]}}]}");
  oracle::write_file(root + "/train.cfg", cli_cfg_text(6));
  oracle::write_file(root + "/zero.cfg", cli_cfg_text(0));

  // synth
  CHECK(run_cli("synth --spec " + spec + " --out " + root + "/data --cameras 4 --res 12x12"
                " --seed 5") == 0);
  REQUIRE(fs::exists(root + "/data/transforms_train.json"));
  CHECK(run_cli("synth --spec " + spec + " --out " + root + "/data2 --res 12") == 2);
  CHECK(run_cli("synth --spec " + root + "/missing.json --out " + root + "/data3") == 2);

  // train
  CHECK(run_cli("train --data " + root + "/data --config " + root + "/train.cfg --out " + root +
                "/run") == 0);
  REQUIRE(fs::exists(root + "/run/final.tnvc"));
  REQUIRE(fs::exists(root + "/run/loss.csv"));
  CHECK(run_cli("train --data " + root + "/nodata --config " + root + "/train.cfg --out " + root +
                "/run2") == 2);
  oracle::write_file(root + "/bad.cfg", "grid_nx = potato\n");
  CHECK(run_cli("train --data " + root + "/data --config " + root + "/bad.cfg --out " + root +
                "/run3") == 2);

  // render
  const std::string ckpt = root + "/run/final.tnvc";
  CHECK(run_cli("render --ckpt " + ckpt + " --orbit 3 --time 0:1:2 --res 8x8 --out " + root +
                "/orbit") == 0);
  CHECK(fs::exists(root + "/orbit/frame_0002.png"));  // max(orbit, steps) frames
  CHECK_FALSE(fs::exists(root + "/orbit/frame_0003.png"));

  const tnv::Mat4d pose =
      tnv::look_at_pose(tnv::Vec3d(0, -4, 0.5), tnv::Vec3d::Zero(), tnv::Vec3d(0, 0, 1));
  std::string pose_text;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) pose_text += std::to_string(pose(r, c)) + " ";
    pose_text += "\n";
  }
  oracle::write_file(root + "/pose.txt", pose_text);
  CHECK(run_cli("render --ckpt " + ckpt + " --pose " + root + "/pose.txt --time 0:1:3"
                " --res 8x8 --out " + root + "/fixed") == 0);
  CHECK(fs::exists(root + "/fixed/frame_0002.png"));
  CHECK_FALSE(fs::exists(root + "/fixed/frame_0003.png"));

  CHECK(run_cli("render --ckpt " + ckpt + " --res 8x8 --out " + root + "/x") == 2);  // no camera
  CHECK(run_cli("render --ckpt " + ckpt + " --pose " + root + "/pose.txt --orbit 3 --res 8x8"
                " --out " + root + "/x") == 2);  // both cameras
  CHECK(run_cli("render --ckpt " + ckpt + " --orbit 3 --time 0:1:0 --res 8x8 --out " + root +
                "/x") == 2);  // zero steps
  CHECK(run_cli("render --ckpt " + ckpt + " --orbit 3 --time nonsense --res 8x8 --out " + root +
                "/x") == 2);
  CHECK(run_cli("render --ckpt " + ckpt + " --orbit 3 --res 8x8x8 --out " + root + "/x") == 2);

  // eval
  CHECK(run_cli("eval --ckpt " + ckpt + " --data " + root + "/data --split val --out " + root +
                "/eval.csv") == 0);
  CHECK(oracle::read_file(root + "/eval.csv").rfind("frame,psnr,ssim\n", 0) == 0);
  CHECK(run_cli("eval --ckpt " + ckpt + " --data " + root + "/data --split bogus --out " + root +
                "/e2.csv") == 2);

  // gradcheck plumbing (the full sweep runs elsewhere)
  CHECK(run_cli("gradcheck --config " + root + "/missing.cfg") == 2);

  // diag: trained checkpoint succeeds ...
  CHECK(run_cli("diag --ckpt " + ckpt + " --out " + root + "/diag") == 0);
  CHECK(fs::exists(root + "/diag/stride_grads.csv"));
  CHECK(fs::exists(root + "/diag/deform_field.csv"));

  // ... an untrained one exits with the state code.
  CHECK(run_cli("train --data " + root + "/data --config " + root + "/zero.cfg --out " + root +
                "/zero_run") == 0);
  CHECK(run_cli("diag --ckpt " + root + "/zero_run/final.tnvc --out " + root + "/diag0") == 4);
}
