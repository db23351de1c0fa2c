#include "tineuvox/trainer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "tineuvox/threads.hpp"

namespace tnv {

MetricReport evaluate_frames(const Model<float>& model, const std::vector<FrameRecord>& frames,
                             const RenderOptions<float>& opts) {
  MetricReport report;
  for (const FrameRecord& fr : frames) {
    const Image rendered =
        render_image(model, fr.pose, fr.focal, fr.image.width, fr.image.height, fr.time, opts);
    report.add(psnr(rendered, fr.image), ssim(rendered, fr.image));
  }
  report.finalize();
  return report;
}

std::string metric_report_csv(const MetricReport& report, const std::vector<std::string>& names) {
  if (names.size() != report.psnr.size())
    throw invalid_input("metric_report_csv: name/score count mismatch");
  std::ostringstream os;
  os << "frame,psnr,ssim\n";
  char buf[128];
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f\n", report.psnr[i], report.ssim[i]);
    os << names[i] << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f\n", report.mean_psnr, report.mean_ssim);
  os << buf;
  return os.str();
}

Trainer::Trainer(const TrainConfig& cfg, const Dataset* data, std::string out_dir)
    : cfg_(cfg), data_(data), out_dir_(std::move(out_dir)), rng_(cfg.seed) {
  validate_train_config(cfg_);
  if (data_ == nullptr) throw invalid_input("trainer requires a dataset");
  if (cfg_.total_iters > 0 && data_->train.empty())
    throw invalid_input("training requires a non-empty train split");

  model_ = Model<float>(cfg_, grid_resolution_at(cfg_.grid_nx, cfg_.upscale_iters, 0),
                        grid_resolution_at(cfg_.grid_ny, cfg_.upscale_iters, 0),
                        grid_resolution_at(cfg_.grid_nz, cfg_.upscale_iters, 0));
  model_.init_weights(rng_);

  g_vox_ = AdamGroup<float>("voxels", cfg_.lr_voxels, model_.grid.num_values());
  std::size_t n_def = 0;
  for (auto* l : model_.deform_net.layers()) n_def += l->param_count();
  g_def_ = AdamGroup<float>("deform_net", cfg_.lr_deform, n_def);
  std::size_t n_mlp = 0;
  for (auto* l : mlp_group_layers()) n_mlp += l->param_count();
  g_mlp_ = AdamGroup<float>("other_mlps", cfg_.lr_mlps, n_mlp);

  frame_offsets_.assign(1, 0);
  for (const FrameRecord& fr : data_->train)
    frame_offsets_.push_back(frame_offsets_.back() +
                             static_cast<std::size_t>(fr.image.width) * fr.image.height);
  pool_size_ = frame_offsets_.back();

  if (!out_dir_.empty()) std::filesystem::create_directories(out_dir_);
}

std::vector<LinearLayer<float>*> Trainer::mlp_group_layers() {
  std::vector<LinearLayer<float>*> out;
  for (auto* l : model_.time_net.layers()) out.push_back(l);
  for (auto* l : model_.radiance_net.layers()) out.push_back(l);
  return out;
}

void Trainer::resume_from(const std::string& ckpt_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  if (!ck.has_optimizer)
    throw state_error("checkpoint '" + ckpt_path + "' has no optimizer state; cannot resume");
  cfg_ = ck.model.cfg;
  if (cfg_.total_iters > 0 && data_->train.empty())
    throw invalid_input("training requires a non-empty train split");
  model_ = std::move(ck.model);
  g_vox_ = std::move(ck.opt_voxels);
  g_def_ = std::move(ck.opt_deform);
  g_mlp_ = std::move(ck.opt_mlps);
  rng_.load_state(ck.rng_state);
  next_iter_ = ck.iteration;
  stride_norms_ = ck.stride_grad_norms;
  slots_.clear();
  std::cerr << "[tnv] resumed from '" << ckpt_path << "' at iteration " << next_iter_ << "\n";
}

void Trainer::apply_events(std::int64_t iter) {
  for (std::int64_t u : cfg_.upscale_iters) {
    if (iter != u) continue;
    model_.upscale(cfg_.grid_nx, cfg_.grid_ny, cfg_.grid_nz);
    g_vox_.reset(model_.grid.num_values());
    std::cerr << "[tnv] iter " << iter << ": grid upscaled to " << model_.grid.nx() << "x"
              << model_.grid.ny() << "x" << model_.grid.nz() << ", voxel moments reset\n";
  }
  if (cfg_.half_precision_last > 0 && iter == cfg_.total_iters - cfg_.half_precision_last &&
      !model_.grid.half_mode()) {
    model_.grid.quantize_half();
    std::cerr << "[tnv] iter " << iter << ": voxel storage switched to half precision\n";
  }
}

void Trainer::draw_batch() {
  batch_.resize(static_cast<std::size_t>(cfg_.batch_rays));
  const std::vector<FrameRecord>& train = data_->train;
  for (BatchRay& br : batch_) {
    const std::size_t idx = rng_.uniform_index(pool_size_);
    const std::size_t f =
        static_cast<std::size_t>(std::upper_bound(frame_offsets_.begin(), frame_offsets_.end(),
                                                  idx) -
                                 frame_offsets_.begin()) -
        1;
    const FrameRecord& fr = train[f];
    const std::size_t p = idx - frame_offsets_[f];
    br.frame = f;
    br.row = static_cast<int>(p / static_cast<std::size_t>(fr.image.width));
    br.col = static_cast<int>(p % static_cast<std::size_t>(fr.image.width));
    br.ray = generate_ray(fr.pose, fr.focal, fr.image.width, fr.image.height, br.row, br.col);
    br.time = fr.time;
    for (int k = 0; k < 3; ++k) br.target[k] = fr.image.at(br.row, br.col, k);
  }
}

void Trainer::train_iteration(std::int64_t iter) {
  apply_events(iter);

  const bool record_strides =
      (cfg_.checkpoint_every > 0 && (iter + 1) % cfg_.checkpoint_every == 0) ||
      iter + 1 == cfg_.total_iters;
  GridGrads<float>& gg = model_.grid.grads;
  if (gg.total.size() != model_.grid.num_values() || gg.per_stride_enabled() != record_strides)
    gg.reset(model_.grid.num_values(), model_.grid.num_strides(), record_strides);
  else
    gg.zero();

  draw_batch();

  const int workers = ThreadPool::instance().size();
  slots_.resize(static_cast<std::size_t>(workers));
  for (Slot& s : slots_) {
    s.time_net = model_.time_net;  // weights with freshly zeroed grads
    s.deform_net = model_.deform_net;
    s.radiance_net = model_.radiance_net;
    if (s.gg.total.size() != gg.total.size() || s.gg.per_stride_enabled() != record_strides)
      s.gg.reset(gg.total.size(), model_.grid.num_strides(), record_strides);
    else
      s.gg.zero();
    s.photo = s.all_pts = s.bg = 0;
  }

  const RenderOptions<float> opts = render_options_from<float>(cfg_);
  const double inv_rays = 1.0 / static_cast<double>(batch_.size());
  ThreadPool::instance().parallel_for(
      static_cast<std::int64_t>(batch_.size()), [&](std::int64_t begin, std::int64_t end, int w) {
        Slot& s = slots_[static_cast<std::size_t>(w)];
        ModelView<float> mv(model_);
        mv.time_net = &s.time_net;
        mv.deform_net = &s.deform_net;
        mv.radiance_net = &s.radiance_net;
        RayLoss<float> rl;
        for (std::int64_t b = begin; b < end; ++b) {
          const BatchRay& br = batch_[static_cast<std::size_t>(b)];
          render_ray_forward(mv, br.ray, br.time, opts, s.ws);
          compute_ray_loss(s.ws, br.target, opts.background, cfg_.lambda_all, cfg_.lambda_bg,
                           inv_rays, rl);
          s.photo += rl.photo;
          s.all_pts += rl.all_pts;
          s.bg += rl.bg;
          render_ray_backward(mv, s.ws, rl.d_c_hat, rl.d_t_last, rl.d_weight, rl.d_color, s.gg);
        }
      });

  const auto master_layers = model_.all_net_layers();
  double photo = 0, all_pts = 0, bg = 0;
  for (Slot& s : slots_) {  // worker order keeps merges deterministic
    std::vector<LinearLayer<float>*> slot_layers;
    for (auto* l : s.time_net.layers()) slot_layers.push_back(l);
    for (auto* l : s.deform_net.layers()) slot_layers.push_back(l);
    for (auto* l : s.radiance_net.layers()) slot_layers.push_back(l);
    for (std::size_t i = 0; i < master_layers.size(); ++i) {
      master_layers[i]->dweight += slot_layers[i]->dweight;
      master_layers[i]->dbias += slot_layers[i]->dbias;
    }
    gg.merge(s.gg);
    photo += s.photo;
    all_pts += s.all_pts;
    bg += s.bg;
  }
  photo *= inv_rays;
  all_pts *= inv_rays;
  bg *= inv_rays;

  last_loss_.photo = photo;
  last_loss_.all_pts = all_pts;
  last_loss_.bg_entropy = bg;
  last_loss_.total = photo + cfg_.lambda_all * all_pts + cfg_.lambda_bg * bg;

  if (!std::isfinite(last_loss_.total)) {
    std::ostringstream dump;
    dump << "iteration " << iter << ": loss " << last_loss_.total << " (photo " << photo
         << ", all_pts " << all_pts << ", bg_entropy " << bg << ")\n";
    dump << "batch rays (frame, row, col, time, target):\n";
    for (const BatchRay& br : batch_)
      dump << "  " << data_->train[br.frame].name << " " << br.row << " " << br.col << " "
           << br.time << " " << br.target.transpose() << "\n";
    std::string where = "stderr";
    if (!out_dir_.empty()) {
      where = out_dir_ + "/nan_batch_dump.txt";
      atomic_write_file(where, dump.str());
    } else {
      std::cerr << dump.str();
    }
    throw numeric_error("non-finite loss at iteration " + std::to_string(iter) +
                        "; offending batch dumped to " + where);
  }

  if (record_strides) {
    gg.finalize_total();
    stride_norms_ = gg.stride_norms();
  }

  adam_step_voxels(g_vox_, model_.grid, lr_schedule(cfg_.lr_voxels, iter, cfg_.total_iters));
  adam_step_layers(g_def_, model_.deform_net.layers(),
                   lr_schedule(cfg_.lr_deform, iter, cfg_.total_iters));
  const auto mlp_layers = mlp_group_layers();
  adam_step_layers(g_mlp_, mlp_layers, lr_schedule(cfg_.lr_mlps, iter, cfg_.total_iters));

  std::string psnr_eval;
  if (cfg_.val_every > 0 && (iter + 1) % cfg_.val_every == 0 && !data_->val.empty()) {
    const RenderOptions<float> eval_opts = render_options_from<float>(cfg_);
    const MetricReport report = evaluate_frames(model_, data_->val, eval_opts);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", report.mean_psnr);
    psnr_eval = buf;
  }

  char row[256];
  std::snprintf(row, sizeof(row), "%" PRId64 ",%.9g,%.9g,%.9g,%.9g,%.9g,%s\n", iter, photo,
                all_pts, bg, last_loss_.total, lr_schedule(cfg_.lr_voxels, iter, cfg_.total_iters),
                psnr_eval.c_str());
  loss_rows_ += row;

  const std::int64_t done = iter + 1;
  const std::int64_t log_every = std::max<std::int64_t>(1, cfg_.total_iters / 20);
  if (done % log_every == 0 || done == cfg_.total_iters)
    std::cerr << "[tnv] iter " << done << "/" << cfg_.total_iters << " loss " << last_loss_.total
              << " (photo " << photo << ")" << (psnr_eval.empty() ? "" : " val psnr " + psnr_eval)
              << "\n";

  if (cfg_.checkpoint_every > 0 && done % cfg_.checkpoint_every == 0 &&
      done < cfg_.total_iters && !out_dir_.empty()) {
    char name[64];
    std::snprintf(name, sizeof(name), "ckpt_%07" PRId64 ".tnvc", done);
    save_state(name, done);
    write_loss_csv();
  }
}

void Trainer::save_state(const std::string& filename, std::int64_t completed) const {
  if (out_dir_.empty()) return;
  save_checkpoint(out_dir_ + "/" + filename, completed, model_, rng_.save_state(), &g_vox_,
                  &g_def_, &g_mlp_, stride_norms_);
}

void Trainer::write_loss_csv() const {
  if (out_dir_.empty()) return;
  atomic_write_file(out_dir_ + "/loss.csv",
                    "iter,photo,all_pts,bg_entropy,total,lr_voxels,psnr_eval\n" + loss_rows_);
}

void Trainer::run() {
  for (std::int64_t iter = next_iter_; iter < cfg_.total_iters; ++iter) {
    train_iteration(iter);
    next_iter_ = iter + 1;
  }
  write_loss_csv();
  save_state("final.tnvc", cfg_.total_iters);
}

}  // namespace tnv
