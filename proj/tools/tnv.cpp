#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "tineuvox.h"

namespace {

constexpr int kUsageError = TNV_ERR_CONFIG;

bool parse_res(const std::string& res, int& width, int& height) {
  int w = 0, h = 0;
  char extra = 0;
  if (std::sscanf(res.c_str(), "%dx%d%c", &w, &h, &extra) != 2 || w < 1 || h < 1) return false;
  width = w;
  height = h;
  return true;
}

bool parse_time_range(const std::string& range, double& t0, double& t1, int& steps) {
  double a = 0, b = 0;
  int s = 0;
  char extra = 0;
  if (std::sscanf(range.c_str(), "%lf:%lf:%d%c", &a, &b, &s, &extra) != 3 || s < 1) return false;
  t0 = a;
  t1 = b;
  steps = s;
  return true;
}

int report(int rc, const char* err) {
  if (rc != TNV_OK) std::fprintf(stderr, "error: %s\n", err);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tineuvox: train, render, and evaluate dynamic radiance fields"};
  app.require_subcommand(1);
  char err[1024] = {0};

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dynamic-scene dataset");
  std::string synth_spec, synth_out, synth_res = "64x64";
  int synth_cameras = 20;
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", synth_spec, "scene spec JSON file")->required();
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--cameras", synth_cameras, "training cameras (default 20)");
  synth->add_option("--res", synth_res, "image resolution WxH (default 64x64)");
  synth->add_option("--seed", synth_seed, "camera placement seed");

  auto* train = app.add_subcommand("train", "Train a model on a dataset directory");
  std::string train_data, train_config, train_out, train_resume;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--config", train_config, "training config file")->required();
  train->add_option("--out", train_out, "output directory (checkpoints, loss.csv)")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");

  auto* render = app.add_subcommand("render", "Render novel time-view frames from a checkpoint");
  std::string render_ckpt, render_pose, render_time = "0:0:1", render_res = "400x400",
              render_out;
  int render_orbit = 0;
  double render_focal = 0;
  render->add_option("--ckpt", render_ckpt, "checkpoint file")->required();
  render->add_option("--pose", render_pose, "camera pose file (4x4 matrix or JSON)");
  render->add_option("--orbit", render_orbit, "orbit the scene over N frames");
  render->add_option("--time", render_time, "time range T0:T1:STEPS, inclusive (default 0:0:1)");
  render->add_option("--res", render_res, "image resolution WxH (default 400x400)");
  render->add_option("--focal", render_focal, "focal length in pixels (default: 50 deg fov)");
  render->add_option("--out", render_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "Score a checkpoint against a dataset split");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "train|val|test (default test)");
  eval->add_option("--out", eval_out, "output CSV path")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  std::string gc_config;
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--config", gc_config, "config overriding the built-in tiny model");
  gradcheck->add_option("--seed", gc_seed, "scene seed");

  auto* diag = app.add_subcommand("diag", "Dump per-stride gradient norms and deformation field");
  std::string diag_ckpt, diag_out;
  diag->add_option("--ckpt", diag_ckpt, "checkpoint file")->required();
  diag->add_option("--out", diag_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;  // help/version exit 0; usage errors exit 2
  }

  if (*synth) {
    int w = 0, h = 0;
    if (!parse_res(synth_res, w, h)) return report(kUsageError, "--res must look like 64x64");
    return report(tnv_synth(synth_spec.c_str(), synth_out.c_str(), synth_cameras, w, h,
                            synth_seed, err, sizeof(err)),
                  err);
  }
  if (*train) {
    return report(tnv_train(train_data.c_str(), train_config.c_str(), train_out.c_str(),
                            train_resume.empty() ? nullptr : train_resume.c_str(), err,
                            sizeof(err)),
                  err);
  }
  if (*render) {
    if (render_pose.empty() && render_orbit <= 0)
      return report(kUsageError, "render needs --pose FILE or --orbit N");
    if (!render_pose.empty() && render_orbit > 0)
      return report(kUsageError, "--pose and --orbit are mutually exclusive");
    int w = 0, h = 0;
    if (!parse_res(render_res, w, h)) return report(kUsageError, "--res must look like 400x400");
    double t0 = 0, t1 = 0;
    int steps = 1;
    if (!parse_time_range(render_time, t0, t1, steps))
      return report(kUsageError, "--time must look like T0:T1:STEPS with STEPS >= 1");
    return report(tnv_render_sequence(render_ckpt.c_str(),
                                      render_pose.empty() ? nullptr : render_pose.c_str(),
                                      render_orbit, t0, t1, steps, w, h, render_focal,
                                      render_out.c_str(), err, sizeof(err)),
                  err);
  }
  if (*eval) {
    return report(tnv_eval(eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(),
                           eval_out.c_str(), err, sizeof(err)),
                  err);
  }
  if (*gradcheck) {
    double max_err = 0;
    const int rc = tnv_gradcheck(gc_config.empty() ? nullptr : gc_config.c_str(), gc_seed,
                                 &max_err, err, sizeof(err));
    if (rc == TNV_OK)
      std::fprintf(stderr, "gradcheck passed: max relative error %.3g\n", max_err);
    return report(rc, err);
  }
  if (*diag) {
    return report(tnv_diag(diag_ckpt.c_str(), diag_out.c_str(), err, sizeof(err)), err);
  }
  return kUsageError;
}
