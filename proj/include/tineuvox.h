#ifndef TINEUVOX_H
#define TINEUVOX_H

/* C interface to the tineuvox dynamic radiance-field engine.
 *
 * Every function returns a status code; on failure a human-readable
 * message is copied into `err` (NUL-terminated, truncated to err_len).
 * Passing err = NULL or err_len = 0 discards the message. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI reuses them as exit codes. */
#define TNV_OK 0
#define TNV_ERR_CONFIG 2  /* bad usage, config, input file, or parse failure */
#define TNV_ERR_NUMERIC 3 /* numerical abort: non-finite loss, failed gradient check */
#define TNV_ERR_STATE 4   /* operation invalid for the object's current state */

/* Opaque handle to a loaded model (checkpoint contents). */
typedef struct tnv_model tnv_model;

/* Renders a synthetic dynamic scene described by a JSON spec into a
 * loadable dataset directory (transforms_{train,val,test}.json + PNGs). */
int tnv_synth(const char* spec_path, const char* out_dir, int cameras, int width, int height,
              uint64_t seed, char* err, size_t err_len);

/* Trains on a dataset directory under a config file; writes checkpoints,
 * loss.csv, and val_report.csv into out_dir. resume_ckpt (nullable)
 * continues an interrupted run bitwise. */
int tnv_train(const char* data_dir, const char* config_path, const char* out_dir,
              const char* resume_ckpt, char* err, size_t err_len);

int tnv_model_load(const char* ckpt_path, tnv_model** out_model, char* err, size_t err_len);
void tnv_model_free(tnv_model* model);

/* Renders one frame to a PNG. `pose` is a row-major 4x4 camera-to-world
 * matrix; focal <= 0 selects a 50-degree horizontal field of view. */
int tnv_model_render(const tnv_model* model, const double* pose, double focal, int width,
                     int height, double time, const char* out_png, char* err, size_t err_len);

/* Renders frames across the inclusive time range [t0, t1]. With a pose
 * file the camera is fixed and `steps` frames are written; otherwise the
 * camera completes one orbit over max(orbit_frames, steps) frames while
 * time advances. Frames are written as out_dir/frame_NNNN.png. */
int tnv_render_sequence(const char* ckpt_path, const char* pose_path, int orbit_frames, double t0,
                        double t1, int steps, int width, int height, double focal,
                        const char* out_dir, char* err, size_t err_len);

/* Renders every frame of a dataset split and writes frame,psnr,ssim rows
 * (plus a mean row) to out_csv. */
int tnv_eval(const char* ckpt_path, const char* data_dir, const char* split, const char* out_csv,
             char* err, size_t err_len);

/* Compares analytic against finite-difference gradients for every
 * parameter of a small seeded model (config_path nullable: built-in tiny
 * config). Writes the largest relative error to max_rel_err (nullable).
 * Returns TNV_ERR_NUMERIC when any parameter exceeds the tolerance. */
int tnv_gradcheck(const char* config_path, uint64_t seed, double* max_rel_err, char* err,
                  size_t err_len);

/* Writes stride_grads.csv and deform_field.csv for a trained checkpoint. */
int tnv_diag(const char* ckpt_path, const char* out_dir, char* err, size_t err_len);

#ifdef __cplusplus
}
#endif

#endif /* TINEUVOX_H */
