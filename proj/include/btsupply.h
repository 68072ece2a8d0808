/* btsupply — C API for the torrent-supply measurement pipeline.
 *
 * Opaque handles + status codes. Every function returning bts_status gives
 * BTS_OK on success; on failure the handle's last_error() (or
 * bts_last_error() for handle-creating calls) carries the message. Strings
 * returned through char** are heap-allocated; release them with
 * bts_string_free.
 */
#ifndef BTSUPPLY_H
#define BTSUPPLY_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bts_status {
    BTS_OK = 0,
    BTS_ERROR = 1,         /* runtime failure */
    BTS_CONFIG_ERROR = 2,  /* bad configuration or arguments */
    BTS_INVALID_HANDLE = 3
} bts_status;

const char* bts_version(void);

/* Message from the most recent failed handle-creating call on this thread. */
const char* bts_last_error(void);

void bts_string_free(char* s);

/* -------------------------------------------------------------------------
 * Pipeline: the crawl/parse/match/export/report stages over one store.
 */
typedef struct bts_pipeline bts_pipeline;

/* config_path may be NULL for an empty configuration. */
bts_status bts_pipeline_open(const char* config_path, bts_pipeline** out);
bts_status bts_pipeline_open_text(const char* config_text, bts_pipeline** out);
void bts_pipeline_close(bts_pipeline* p);

bts_status bts_pipeline_set(bts_pipeline* p, const char* key, const char* value);
/* stage: simulate | crawl | parse | match | export | report */
bts_status bts_pipeline_run(bts_pipeline* p, const char* stage);
const char* bts_pipeline_last_error(const bts_pipeline* p);

/* -------------------------------------------------------------------------
 * Release-name parsing (stateless helpers).
 */

/* JSON object with the parsed fields; free via bts_string_free. */
bts_status bts_parse_release_name(const char* name, char** json_out);
/* is_video set to 1 for video extensions, else 0. */
bts_status bts_classify_file(const char* path, int* is_video);

/* -------------------------------------------------------------------------
 * Title matching over a catalog TSV.
 */
typedef struct bts_matcher bts_matcher;

bts_status bts_matcher_open(const char* catalog_tsv_path, bts_matcher** out);
void bts_matcher_close(bts_matcher* m);
const char* bts_matcher_last_error(const bts_matcher* m);

/* JSON array of {catalog_id, score, accepted}, descending score. */
bts_status bts_matcher_match(bts_matcher* m, const char* title, int top_k, char** json_out);
bts_status bts_matcher_set_threshold(bts_matcher* m, double threshold);

#ifdef __cplusplus
}
#endif

#endif /* BTSUPPLY_H */
