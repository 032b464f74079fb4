#ifndef THINSTRUCT_H
#define THINSTRUCT_H

/* C interface to the thin-structure detection library.
 *
 * All handles are opaque. Functions returning ts_status leave a message for
 * ts_last_error() on failure (per thread). Status values double as CLI exit
 * codes. */

#include <stddef.h>

#if defined(_WIN32)
#define TS_API __declspec(dllexport)
#elif defined(TS_BUILDING_LIBRARY)
#define TS_API __attribute__((visibility("default")))
#else
#define TS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ts_status {
  TS_OK = 0,
  TS_ERR_INTERNAL = 1,
  TS_ERR_INPUT = 2,
  TS_ERR_NUMERICAL = 3
} ts_status;

TS_API const char* ts_version(void);
/* Message of the most recent failure on this thread, "" if none. */
TS_API const char* ts_last_error(void);
/* Caps worker threads used by parallel stages (default 1). */
TS_API void ts_set_threads(int n);

/* ---- configuration ---------------------------------------------------- */

typedef struct ts_config ts_config;

TS_API ts_status ts_config_create(ts_config** out);
TS_API void ts_config_destroy(ts_config* cfg);
TS_API ts_status ts_config_set_number(ts_config* cfg, const char* key, double value);
TS_API ts_status ts_config_set_string(ts_config* cfg, const char* key, const char* value);
TS_API ts_status ts_config_set_bool(ts_config* cfg, const char* key, int value);
/* Overlays a JSON object; unknown keys are rejected. */
TS_API ts_status ts_config_merge_json(ts_config* cfg, const char* json);
TS_API ts_status ts_config_load_file(ts_config* cfg, const char* path);
/* Full configuration as JSON; valid until the next call on cfg. */
TS_API const char* ts_config_json(ts_config* cfg);

/* ---- pipelines -------------------------------------------------------- */

typedef struct ts_result ts_result;

/* Edge detection on a grayscale raster (row-major, width * height values). */
TS_API ts_status ts_detect_edges(const ts_config* cfg, const double* pixels, int width, int height,
                                 ts_result** out);
/* Same, reading a PGM (P2/P5) file. */
TS_API ts_status ts_detect_edges_file(const ts_config* cfg, const char* pgm_path, ts_result** out);
/* Curve fitting on points (count * dim values, dim 2 or 3). */
TS_API ts_status ts_fit_points(const ts_config* cfg, const double* coords, size_t count, int dim, ts_result** out);
TS_API ts_status ts_fit_points_file(const ts_config* cfg, const char* csv_path, ts_result** out);
/* Vessel center-lines from a vesselness field file. */
TS_API ts_status ts_detect_vessels_file(const ts_config* cfg, const char* vfield_path, ts_result** out);
/* Tangents on hysteresis ridges (config keys "low" and "high") of a vesselness field file. */
TS_API ts_status ts_fit_ridges_file(const ts_config* cfg, const char* vfield_path, ts_result** out);

TS_API void ts_result_destroy(ts_result* r);
TS_API size_t ts_result_site_count(const ts_result* r);
TS_API int ts_result_dim(const ts_result* r);
/* Projected point, unit direction and marginal of site i (arrays of 3). */
TS_API ts_status ts_result_tangent(const ts_result* r, size_t i, double point[3], double direction[3],
                                   double* q);
/* Tangent CSV: id,x,y,px,py,dx,dy,q in 2D, id,x,y,z,dx,dy,dz,q in 3D. */
TS_API ts_status ts_result_write_tangents(const ts_result* r, const char* path);
/* Edges: 16-bit sub-pixel probability PGM. Ridges: 8-bit binary PGM with the
 * z slices stacked vertically (nx by ny*nz). */
TS_API ts_status ts_result_write_mask(const ts_result* r, const char* path);
TS_API ts_status ts_result_write_report(const ts_result* r, const char* path);
/* Report JSON (config echo, energy trace, timings, counts). Owned by r. */
TS_API const char* ts_result_report(const ts_result* r);

/* ---- synthetic data --------------------------------------------------- */

/* Writes a synthetic instance under out_dir with file names starting with
 * stem, plus <stem>.json listing the files and parameters. Shapes: circle,
 * line, square, rounded-square, disk, polygon, step-edge, gap-image, tube3d.
 * params is a JSON object (may be NULL). */
TS_API ts_status ts_synth(const char* shape, const char* params, const char* out_dir, const char* stem);

/* ---- evaluation ------------------------------------------------------- */

typedef struct ts_eval ts_eval;

/* predicted: probabilities in [0,1]; truth: nonzero = boundary pixel. */
TS_API ts_status ts_eval_arrays(const double* predicted, const unsigned char* truth, int width, int height,
                                double tolerance, int steps, ts_eval** out);
TS_API ts_status ts_eval_files(const char* predicted_pgm, const char* truth_pgm, double tolerance, int steps,
                               ts_eval** out);
TS_API void ts_eval_destroy(ts_eval* e);
TS_API size_t ts_eval_count(const ts_eval* e);
TS_API ts_status ts_eval_point(const ts_eval* e, size_t k, double* threshold, double* precision, double* recall,
                               double* f);
/* Index of the threshold with the largest F. */
TS_API size_t ts_eval_best(const ts_eval* e);
TS_API ts_status ts_eval_write_curve(const ts_eval* e, const char* path);

#ifdef __cplusplus
}
#endif

#endif
