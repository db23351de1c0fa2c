#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tineuvox/checkpoint.hpp"
#include "tineuvox/dataset.hpp"
#include "tineuvox/loss.hpp"
#include "tineuvox/metrics.hpp"
#include "tineuvox/render.hpp"

namespace tnv {

/// Renders every frame and scores it against its reference image.
MetricReport evaluate_frames(const Model<float>& model, const std::vector<FrameRecord>& frames,
                             const RenderOptions<float>& opts);

/// "frame,psnr,ssim" rows (one per frame, in order) plus a final mean row.
std::string metric_report_csv(const MetricReport& report, const std::vector<std::string>& names);

/// Full training loop over a dataset's train split.
///
/// Each iteration draws batch_rays pixels uniformly with replacement from
/// the global pixel pool, runs the differentiable renderer forward and
/// backward, and applies one Adam step per parameter group (voxels,
/// deformation network, remaining networks) under the exponential lr
/// schedule. Scheduled events: progressive grid upscaling (voxel moments
/// reset), the half-precision storage switch for the last
/// half_precision_last iterations, periodic checkpoints, and a loss CSV.
///
/// With a fixed worker count the loop is bitwise deterministic: batches
/// come from one seeded generator on the coordinating thread, workers
/// accumulate into private gradient buffers, and merges happen in worker
/// order. Resuming from a checkpoint restores parameters, optimizer
/// moments, and the RNG stream, so an interrupted run finishes with
/// byte-identical artifacts.
class Trainer {
 public:
  /// `out_dir` may be empty to disable all file output (checkpoints, CSV).
  Trainer(const TrainConfig& cfg, const Dataset* data, std::string out_dir);

  /// Restores a training checkpoint; run() then continues from its
  /// iteration. The checkpoint's embedded config replaces the current one.
  void resume_from(const std::string& ckpt_path);

  /// Runs iterations [current, total_iters), then writes loss.csv and
  /// final.tnvc (when out_dir is set). total_iters = 0 leaves the
  /// initialized model untouched.
  void run();

  Model<float>& model() { return model_; }
  const Model<float>& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  std::int64_t iteration() const { return next_iter_; }
  const LossBreakdown& last_loss() const { return last_loss_; }
  const std::vector<double>& stride_grad_norms() const { return stride_norms_; }

 private:
  struct BatchRay {
    Ray ray;
    double time = 0;
    Vec3<float> target = Vec3<float>::Zero();
    std::size_t frame = 0;
    int row = 0, col = 0;
  };

  struct Slot {
    TimeNet<float> time_net;
    DeformNet<float> deform_net;
    RadianceNet<float> radiance_net;
    GridGrads<float> gg;
    RayWorkspace<float> ws;
    double photo = 0, all_pts = 0, bg = 0;
  };

  void apply_events(std::int64_t iter);
  void train_iteration(std::int64_t iter);
  void draw_batch();
  void save_state(const std::string& filename, std::int64_t completed) const;
  void write_loss_csv() const;
  std::vector<LinearLayer<float>*> mlp_group_layers();

  TrainConfig cfg_;
  const Dataset* data_ = nullptr;
  std::string out_dir_;

  Model<float> model_;
  Rng rng_;
  AdamGroup<float> g_vox_, g_def_, g_mlp_;
  std::int64_t next_iter_ = 0;

  std::vector<std::size_t> frame_offsets_;  // prefix pixel counts over train frames
  std::size_t pool_size_ = 0;
  std::vector<BatchRay> batch_;
  std::vector<Slot> slots_;

  LossBreakdown last_loss_;
  std::vector<double> stride_norms_;
  std::string loss_rows_;
};

}  // namespace tnv
