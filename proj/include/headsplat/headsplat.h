/*
 * Copyright Contributors to the headsplat project
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the headsplat engine. All objects are opaque handles
 * released with their matching *_free function. Functions return an
 * hs_status; on failure hs_last_error() describes the problem for the
 * calling thread until its next failing call.
 */

#ifndef HEADSPLAT_H
#define HEADSPLAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HS_API __declspec(dllexport)
#else
#define HS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum hs_status {
    HS_OK            = 0,
    HS_ERR_RUNTIME   = 1, /* I/O, bind, subprocess failures */
    HS_ERR_USAGE     = 2, /* bad arguments */
    HS_ERR_PARSE     = 3, /* missing or malformed input file */
    HS_ERR_INVALID   = 4, /* invariant violation */
    HS_ERR_NUMERICAL = 5  /* degenerate or non-finite computation */
} hs_status;

typedef struct hs_config hs_config;
typedef struct hs_scene hs_scene;
typedef struct hs_frame hs_frame;
typedef struct hs_server hs_server;

HS_API const char *hs_version(void);
HS_API const char *hs_last_error(void);
HS_API const char *hs_status_name(hs_status status);
/* Frees strings returned through char ** out-parameters. */
HS_API void hs_string_free(char *s);

/* ---- configuration ------------------------------------------------------ */

/* NULL or "" yields the defaults. Unknown keys are parse errors. */
HS_API hs_status hs_config_load(const char *path, hs_config **out);
/* Overlays a partial JSON document with the same layout as the file. */
HS_API hs_status hs_config_merge_json(hs_config *config, const char *json);
HS_API hs_status hs_config_to_json(const hs_config *config, char **out);
HS_API hs_status hs_config_save(const hs_config *config, const char *path);
HS_API void hs_config_free(hs_config *config);

/* ---- scenes ------------------------------------------------------------- */

/* "fixture" selects the built-in synthetic scene, anything else is a
 * scene bundle directory. */
HS_API hs_status hs_scene_load(const char *spec, hs_scene **out);
HS_API hs_status hs_scene_save(const hs_scene *scene, const char *dir);
/* Partial head-parameter update: {"expression": [...], "pose": [[...]], ...}. */
HS_API hs_status hs_scene_set_params_json(hs_scene *scene, const char *json);
HS_API hs_status hs_scene_set_params_file(hs_scene *scene, const char *path);
/* {"head_gaussians", "background_gaussians", "cameras": [...], "params": {...}} */
HS_API hs_status hs_scene_info_json(const hs_scene *scene, char **out);
HS_API void hs_scene_free(hs_scene *scene);

/* ---- rendering ---------------------------------------------------------- */

HS_API hs_status hs_render(const hs_scene *scene, const hs_config *config, const char *camera,
                           hs_frame **out);
HS_API int hs_frame_width(const hs_frame *frame);
HS_API int hs_frame_height(const hs_frame *frame);
/* Copies width*height*4 floats (RGB + alpha) into dst. */
HS_API hs_status hs_frame_read_rgba(const hs_frame *frame, float *dst, size_t count);
HS_API hs_status hs_frame_save_png(const hs_frame *frame, const char *path);
/* Float raster of the expected depth (+inf where empty). */
HS_API hs_status hs_frame_save_depth(const hs_frame *frame, const char *path);
HS_API void hs_frame_free(hs_frame *frame);

/* Renders every frame of an animation track to <out_dir>/frame_00000.png... */
HS_API hs_status hs_animate(const hs_scene *scene, const hs_config *config, const char *track_path,
                            const char *camera, const char *out_dir, int *frames_written);

/* ---- batch tools -------------------------------------------------------- */

/* Appearance transfer from a guidance directory. Writes the updated scene
 * bundle to <out_dir>/scene, loss.csv and, when snapshots are enabled,
 * snapshots/head_<iteration>.ply. */
HS_API hs_status hs_optimize(const hs_scene *scene, const hs_config *config,
                             const char *guidance_dir, const char *out_dir);

/* Solves a head-to-background alignment problem file and writes
 * {"transform": [16 numbers]} to out_path. */
HS_API hs_status hs_align(const char *problem_path, const char *out_path, double tolerance);

/* Labels person Gaussians of a splat file from masked views. Writes
 * labels.csv, cleaned.ply and removal_report.csv into out_dir. */
HS_API hs_status hs_label_person(const hs_config *config, const char *splat_path,
                                 const char *views_dir, const char *out_dir, size_t *flagged);

typedef struct hs_compose_inputs {
    const char *background; /* splat file replacing the scene background, or NULL */
    const char *labels;     /* label sidecar; flagged points are dropped, or NULL */
    const char *transform;  /* alignment result JSON, or NULL */
    const char *head_asset; /* head asset to rebind with the binding config, or NULL */
} hs_compose_inputs;

HS_API hs_status hs_compose(const hs_scene *scene, const hs_config *config,
                            const hs_compose_inputs *inputs, const char *out_dir);

/* Re-encodes an asset, choosing the conversion from the file extensions:
 * .ply -> .ply, .hsa -> .hsa, .raster -> .png, .png -> .raster. */
HS_API hs_status hs_convert(const char *in_path, const char *out_path);
HS_API hs_status hs_make_synthetic_head(uint64_t seed, int vertices, int joints, int shape_dims,
                                        int expression_dims, const char *out_path);

/* ---- live service ------------------------------------------------------- */

typedef struct hs_server_options {
    const char *bind;   /* "host:port"; port 0 picks a free port */
    const char *ui_dir; /* static files served over HTTP, or NULL */
    const char *camera; /* initial camera name, or NULL for "cam0" */
    int continuous;     /* render at the fps cap even without updates */
} hs_server_options;

/* Starts serving in background threads. Frame rate, format and queue
 * depth come from the service section of the config. */
HS_API hs_status hs_server_start(const hs_scene *scene, const hs_config *config,
                                 const hs_server_options *options, hs_server **out);
HS_API int hs_server_port(const hs_server *server);
HS_API hs_status hs_server_stats_json(const hs_server *server, char **out);
HS_API void hs_server_stop(hs_server *server);
HS_API void hs_server_free(hs_server *server);

/* ---- self test ---------------------------------------------------------- */

typedef void (*hs_selftest_callback)(const char *name, int passed, const char *detail,
                                     void *user);

/* Runs the built-in property checks, reporting each through the callback.
 * failures receives the number of failed checks. */
HS_API hs_status hs_selftest(int quick, int workers, hs_selftest_callback callback, void *user,
                             int *failures);

#ifdef __cplusplus
}
#endif

#endif /* HEADSPLAT_H */
