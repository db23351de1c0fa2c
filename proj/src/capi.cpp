#include "tineuvox.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "tineuvox/diag.hpp"
#include "tineuvox/gradcheck.hpp"
#include "tineuvox/synth.hpp"
#include "tineuvox/trainer.hpp"

struct tnv_model {
  tnv::Model<float> m;
};

namespace {

void put_err(char* err, size_t err_len, const char* msg) {
  if (err == nullptr || err_len == 0) return;
  std::strncpy(err, msg, err_len - 1);
  err[err_len - 1] = '\0';
}

int map_kind(tnv::TnvError::Kind kind) {
  switch (kind) {
    case tnv::TnvError::Kind::numeric:
      return TNV_ERR_NUMERIC;
    case tnv::TnvError::Kind::state:
      return TNV_ERR_STATE;
    default:
      return TNV_ERR_CONFIG;
  }
}

template <class Fn>
int guarded(char* err, size_t err_len, Fn&& fn) {
  try {
    return fn();
  } catch (const tnv::TnvError& e) {
    put_err(err, err_len, e.what());
    return map_kind(e.kind());
  } catch (const std::exception& e) {
    put_err(err, err_len, e.what());
    return TNV_ERR_CONFIG;
  }
}

int require(const void* p, const char* what, char* err, size_t err_len) {
  if (p != nullptr) return TNV_OK;
  put_err(err, err_len, (std::string(what) + " must not be NULL").c_str());
  return TNV_ERR_CONFIG;
}

double default_focal(int width) {
  constexpr double kFovDeg = 50.0;
  return 0.5 * width / std::tan(0.5 * kFovDeg * EIGEN_PI / 180.0);
}

tnv::Vec3<float> dataset_background(const tnv::TrainConfig& cfg) {
  return cfg.white_background() ? tnv::Vec3<float>::Ones() : tnv::Vec3<float>::Zero();
}

}  // namespace

int tnv_synth(const char* spec_path, const char* out_dir, int cameras, int width, int height,
              uint64_t seed, char* err, size_t err_len) {
  if (int rc = require(spec_path, "spec_path", err, err_len)) return rc;
  if (int rc = require(out_dir, "out_dir", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    const tnv::SceneSpec spec = tnv::load_scene_spec(spec_path);
    tnv::synth_scene(spec, cameras, width, height, seed, out_dir);
    return TNV_OK;
  });
}

int tnv_train(const char* data_dir, const char* config_path, const char* out_dir,
              const char* resume_ckpt, char* err, size_t err_len) {
  if (int rc = require(data_dir, "data_dir", err, err_len)) return rc;
  if (int rc = require(config_path, "config_path", err, err_len)) return rc;
  if (int rc = require(out_dir, "out_dir", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    const tnv::TrainConfig cfg = tnv::load_train_config(config_path);
    const tnv::Dataset data = tnv::load_dnerf(data_dir, dataset_background(cfg));
    tnv::Trainer trainer(cfg, &data, out_dir);
    if (resume_ckpt != nullptr && resume_ckpt[0] != '\0') trainer.resume_from(resume_ckpt);
    trainer.run();
    if (!data.val.empty()) {
      const auto opts = tnv::render_options_from<float>(trainer.config());
      const tnv::MetricReport report = tnv::evaluate_frames(trainer.model(), data.val, opts);
      std::vector<std::string> names;
      for (const auto& fr : data.val) names.push_back(fr.name);
      tnv::atomic_write_file(std::string(out_dir) + "/val_report.csv",
                             tnv::metric_report_csv(report, names));
    }
    return TNV_OK;
  });
}

int tnv_model_load(const char* ckpt_path, tnv_model** out_model, char* err, size_t err_len) {
  if (int rc = require(ckpt_path, "ckpt_path", err, err_len)) return rc;
  if (int rc = require(out_model, "out_model", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    tnv::Checkpoint ck = tnv::load_checkpoint(ckpt_path);
    *out_model = new tnv_model{std::move(ck.model)};
    return TNV_OK;
  });
}

void tnv_model_free(tnv_model* model) { delete model; }

int tnv_model_render(const tnv_model* model, const double* pose, double focal, int width,
                     int height, double time, const char* out_png, char* err, size_t err_len) {
  if (int rc = require(model, "model", err, err_len)) return rc;
  if (int rc = require(pose, "pose", err, err_len)) return rc;
  if (int rc = require(out_png, "out_png", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    tnv::Mat4d p;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) p(r, c) = pose[4 * r + c];
    const double f = focal > 0 ? focal : default_focal(width);
    const auto opts = tnv::render_options_from<float>(model->m.cfg);
    const tnv::Image img = tnv::render_image(model->m, p, f, width, height, time, opts);
    tnv::save_png(img, out_png);
    return TNV_OK;
  });
}

int tnv_render_sequence(const char* ckpt_path, const char* pose_path, int orbit_frames, double t0,
                        double t1, int steps, int width, int height, double focal,
                        const char* out_dir, char* err, size_t err_len) {
  if (int rc = require(ckpt_path, "ckpt_path", err, err_len)) return rc;
  if (int rc = require(out_dir, "out_dir", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    if (steps < 1) throw tnv::invalid_input("time steps must be >= 1");
    tnv::Checkpoint ck = tnv::load_checkpoint(ckpt_path);
    const tnv::Model<float>& model = ck.model;
    const double f = focal > 0 ? focal : default_focal(width);
    const auto opts = tnv::render_options_from<float>(model.cfg);

    const bool orbit = pose_path == nullptr || pose_path[0] == '\0';
    tnv::Mat4d fixed_pose = tnv::Mat4d::Identity();
    if (!orbit) fixed_pose = tnv::load_pose(pose_path);

    const int frames = orbit ? std::max(std::max(orbit_frames, 1), steps) : steps;
    const tnv::Vec3d center = 0.5 * (model.grid.bbox_min() + model.grid.bbox_max());
    const double radius =
        2.7 * 0.5 * (model.grid.bbox_max() - model.grid.bbox_min()).maxCoeff();
    constexpr double kElevation = 30.0 * EIGEN_PI / 180.0;

    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < frames; ++i) {
      const double time = frames == 1 ? t0 : t0 + (t1 - t0) * i / (frames - 1);
      tnv::Mat4d pose = fixed_pose;
      if (orbit) {
        const double az = 2.0 * EIGEN_PI * i / frames;
        const tnv::Vec3d eye =
            center + radius * tnv::Vec3d(std::cos(az) * std::cos(kElevation), std::sin(kElevation),
                                         std::sin(az) * std::cos(kElevation));
        pose = tnv::look_at_pose(eye, center, tnv::Vec3d(0, 1, 0));
      }
      const tnv::Image img = tnv::render_image(model, pose, f, width, height, time, opts);
      char name[64];
      std::snprintf(name, sizeof(name), "/frame_%04d.png", i);
      tnv::save_png(img, std::string(out_dir) + name);
    }
    return TNV_OK;
  });
}

int tnv_eval(const char* ckpt_path, const char* data_dir, const char* split, const char* out_csv,
             char* err, size_t err_len) {
  if (int rc = require(ckpt_path, "ckpt_path", err, err_len)) return rc;
  if (int rc = require(data_dir, "data_dir", err, err_len)) return rc;
  if (int rc = require(split, "split", err, err_len)) return rc;
  if (int rc = require(out_csv, "out_csv", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    tnv::Checkpoint ck = tnv::load_checkpoint(ckpt_path);
    const tnv::Dataset data = tnv::load_dnerf(data_dir, dataset_background(ck.model.cfg));
    const auto& frames = data.split(split);
    if (frames.empty())
      throw tnv::invalid_input("split '" + std::string(split) + "' has no frames");
    const auto opts = tnv::render_options_from<float>(ck.model.cfg);
    const tnv::MetricReport report = tnv::evaluate_frames(ck.model, frames, opts);
    std::vector<std::string> names;
    for (const auto& fr : frames) names.push_back(fr.name);
    tnv::atomic_write_file(out_csv, tnv::metric_report_csv(report, names));
    return TNV_OK;
  });
}

int tnv_gradcheck(const char* config_path, uint64_t seed, double* max_rel_err, char* err,
                  size_t err_len) {
  return guarded(err, err_len, [&] {
    const tnv::TrainConfig cfg = (config_path != nullptr && config_path[0] != '\0')
                                     ? tnv::load_train_config(config_path)
                                     : tnv::gradcheck_default_config();
    const tnv::GradCheckReport report = tnv::run_gradcheck(cfg, seed);
    if (max_rel_err != nullptr) *max_rel_err = report.max_rel_err;
    if (!report.ok) {
      put_err(err, err_len,
              ("gradient check failed: worst parameter " + report.worst_param +
               " relative error " + std::to_string(report.max_rel_err))
                  .c_str());
      return TNV_ERR_NUMERIC;
    }
    return TNV_OK;
  });
}

int tnv_diag(const char* ckpt_path, const char* out_dir, char* err, size_t err_len) {
  if (int rc = require(ckpt_path, "ckpt_path", err, err_len)) return rc;
  if (int rc = require(out_dir, "out_dir", err, err_len)) return rc;
  return guarded(err, err_len, [&] {
    const tnv::Checkpoint ck = tnv::load_checkpoint(ckpt_path);
    tnv::write_diagnostics(ck, out_dir);
    return TNV_OK;
  });
}
