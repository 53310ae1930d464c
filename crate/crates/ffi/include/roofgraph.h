#ifndef ROOFGRAPH_H
#define ROOFGRAPH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum RgStatus {
  RG_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  RG_STATUS_NULL_POINTER = 1,
  /*
   An argument or parameter value is out of range.
   */
  RG_STATUS_INVALID_ARGUMENT = 2,
  /*
   A file could not be parsed.
   */
  RG_STATUS_PARSE = 3,
  /*
   The cloud could not be triangulated.
   */
  RG_STATUS_TRIANGULATION = 4,
  /*
   A file could not be opened, read or written.
   */
  RG_STATUS_IO = 5,
  /*
   An unexpected internal failure.
   */
  RG_STATUS_INTERNAL = 6,
} RgStatus;

/*
 Corner selection strategy.
 */
typedef enum RgCornerMethod {
  RG_CORNER_METHOD_PLANAR = 0,
  RG_CORNER_METHOD_NMS = 1,
} RgCornerMethod;

/*
 Wire selection strategy.
 */
typedef enum RgWireMethod {
  RG_WIRE_METHOD_PLANAR = 0,
  RG_WIRE_METHOD_PATH_SCORE = 1,
} RgWireMethod;

/*
 Opaque point cloud.
 */
typedef struct RgCloud RgCloud;

/*
 Opaque scored Delaunay graph.
 */
typedef struct RgScoredGraph RgScoredGraph;

/*
 Opaque wireframe.
 */
typedef struct RgWireframe RgWireframe;

/*
 Reconstruction parameters; obtain defaults from [`rg_params_default`].
 */
typedef struct RgParams {
  size_t k;
  double nms_radius;
  double corner_threshold;
  double wire_scale_threshold;
  double max_straightness_deviation;
  double xy_epsilon;
  bool exclude_boundary_edges;
  enum RgCornerMethod corner_method;
  enum RgWireMethod wire_method;
  double plane_tolerance;
  double min_region_area;
  double long_edge_factor;
  double simplify_tolerance;
  double crease_distance;
  double min_side_length;
  double max_corner_shift;
  double corner_merge_radius;
} RgParams;

/*
 Evaluation metrics: distances in cloud units, percentages in `[0, 100]`.
 */
typedef struct RgEvalReport {
  double wed;
  double aco;
  double cp;
  double cr;
  double cf1;
  double ep;
  double er;
  double ef1;
} RgEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next failing call on the same thread.
 */
const char *rg_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *rg_version(void);

/*
 Writes the default reconstruction parameters to `out`.

 # Safety
 `out` must be null or point to writable memory for one `RgParams`.
 */
enum RgStatus rg_params_default(struct RgParams *out);

/*
 Checks `params` for out-of-range values.

 # Safety
 `params` must be null or point to a valid `RgParams`.
 */
enum RgStatus rg_params_validate(const struct RgParams *params);

/*
 Builds a cloud from `count` interleaved `x, y, z` triples.

 # Safety
 `xyz` must point to `3 * count` readable doubles; `out` must be writable.
 */
enum RgStatus rg_cloud_new(const double *xyz, size_t count, struct RgCloud **out);

/*
 Reads a whitespace-separated XYZ file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RgStatus rg_cloud_read(const char *path, struct RgCloud **out);

/*
 Number of points, 0 for a null handle.

 # Safety
 `cloud` must be null or a live handle.
 */
size_t rg_cloud_len(const struct RgCloud *cloud);

/*
 # Safety
 `cloud` must be null or a handle not freed before.
 */
void rg_cloud_free(struct RgCloud *cloud);

/*
 Reconstructs the wireframe of `cloud`, in the cloud's coordinates.
 A null `params` uses the defaults.

 # Safety
 `cloud` must be a live handle, `params` null or valid, `out` writable.
 */
enum RgStatus rg_reconstruct(const struct RgCloud *cloud,
                             const struct RgParams *params,
                             struct RgWireframe **out);

/*
 Builds a wireframe from `corner_count` interleaved `x, y, z` triples and
 `wire_count` pairs of corner indices.

 # Safety
 `corners` must point to `3 * corner_count` doubles, `wires` to
 `2 * wire_count` indices; `out` must be writable.
 */
enum RgStatus rg_wireframe_new(const double *corners,
                               size_t corner_count,
                               const size_t *wires,
                               size_t wire_count,
                               struct RgWireframe **out);

/*
 Reads a wireframe OBJ file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RgStatus rg_wireframe_read(const char *path, struct RgWireframe **out);

/*
 Writes a wireframe as OBJ.

 # Safety
 `wireframe` must be a live handle; `path` a NUL-terminated string.
 */
enum RgStatus rg_wireframe_write(const struct RgWireframe *wireframe, const char *path);

/*
 Copies up to `capacity` corners as `x, y, z` triples into `out` (which
 may be null) and returns the number of corners.

 # Safety
 `wireframe` must be null or live; `out` null or writable for
 `3 * capacity` doubles.
 */
size_t rg_wireframe_corners(const struct RgWireframe *wireframe, double *out, size_t capacity);

/*
 Copies up to `capacity` wires as index pairs into `out` (which may be
 null) and returns the number of wires.

 # Safety
 `wireframe` must be null or live; `out` null or writable for
 `2 * capacity` indices.
 */
size_t rg_wireframe_wires(const struct RgWireframe *wireframe, size_t *out, size_t capacity);

/*
 # Safety
 `wireframe` must be null or a handle not freed before.
 */
void rg_wireframe_free(struct RgWireframe *wireframe);

/*
 Evaluates `pred` against `gt` with corner match distance `threshold`.
 When `frame` is not null both wireframes are first mapped into that
 cloud's normalized frame.

 # Safety
 `pred` and `gt` must be live handles, `frame` null or live, `out`
 writable.
 */
enum RgStatus rg_evaluate(const struct RgWireframe *pred,
                          const struct RgWireframe *gt,
                          double threshold,
                          const struct RgCloud *frame,
                          struct RgEvalReport *out);

/*
 Triangulates and scores `cloud` as given (no normalization).

 # Safety
 `cloud` must be a live handle; `out` writable.
 */
enum RgStatus rg_score(const struct RgCloud *cloud, double xy_epsilon, struct RgScoredGraph **out);

/*
 Copies up to `capacity` vertex corner scores into `out` (which may be
 null) and returns the number of graph vertices.

 # Safety
 `graph` must be null or live; `out` null or writable for `capacity`
 doubles.
 */
size_t rg_scored_corner_scores(const struct RgScoredGraph *graph, double *out, size_t capacity);

/*
 Copies up to `capacity` edges as vertex index pairs into `edges` and
 their dihedral angles into `angles` (either may be null) and returns the
 number of edges.

 # Safety
 `graph` must be null or live; `edges` null or writable for
 `2 * capacity` indices; `angles` null or writable for `capacity` doubles.
 */
size_t rg_scored_edges(const struct RgScoredGraph *graph,
                       size_t *edges,
                       double *angles,
                       size_t capacity);

/*
 Copies up to `capacity` graph vertex positions as `x, y, z` triples
 into `out` (which may be null) and returns the number of vertices.
 Vertices are the cloud's points with `(x, y)` duplicates merged.

 # Safety
 `graph` must be null or live; `out` null or writable for `3 * capacity`
 doubles.
 */
size_t rg_scored_vertices(const struct RgScoredGraph *graph, double *out, size_t capacity);

/*
 # Safety
 `graph` must be null or a handle not freed before.
 */
void rg_scored_free(struct RgScoredGraph *graph);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROOFGRAPH_H */
