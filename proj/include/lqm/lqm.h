/* C interface to the LQM toolkit. All strings are UTF-8. Functions return an
 * lqm_status; on failure lqm_last_error() describes the problem for the
 * calling thread. Strings returned through char** out-parameters are owned by
 * the caller and released with lqm_string_free. */
#ifndef LQM_LQM_H
#define LQM_LQM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define LQM_API __attribute__((visibility("default")))
#else
#define LQM_API
#endif

typedef enum lqm_status {
  LQM_OK = 0,
  LQM_ERR_VALIDATION = 1,
  LQM_ERR_USAGE = 2,
  LQM_ERR_IO = 3,
  LQM_ERR_NOT_FOUND = 4,
  LQM_ERR_CONFLICT = 5,
  LQM_ERR_INTERNAL = 6
} lqm_status;

typedef struct lqm_taxonomy lqm_taxonomy;
typedef struct lqm_corpus lqm_corpus;
typedef struct lqm_annotations lqm_annotations;
typedef struct lqm_server lqm_server;

LQM_API const char* lqm_version(void);
LQM_API const char* lqm_last_error(void);
LQM_API const char* lqm_status_name(lqm_status status);
LQM_API void lqm_string_free(char* s);

/* Taxonomies: "LQM" / "MQM" built-ins or a taxonomy file. */
LQM_API lqm_status lqm_taxonomy_builtin(const char* name, lqm_taxonomy** out);
LQM_API lqm_status lqm_taxonomy_load(const char* path, lqm_taxonomy** out);
LQM_API lqm_status lqm_taxonomy_parse(const char* text, size_t len, lqm_taxonomy** out);
LQM_API lqm_status lqm_taxonomy_to_json(const lqm_taxonomy* t, char** out);
LQM_API void lqm_taxonomy_free(lqm_taxonomy* t);

/* Segments (segments.jsonl). */
LQM_API lqm_status lqm_corpus_load(const char* path, lqm_corpus** out);
LQM_API lqm_status lqm_corpus_parse(const char* jsonl, size_t len, const char* source_name,
                                    lqm_corpus** out);
LQM_API size_t lqm_corpus_size(const lqm_corpus* c);
LQM_API void lqm_corpus_free(lqm_corpus* c);

/* Span annotations (annotations.jsonl), validated against corpus and taxonomy. */
LQM_API lqm_status lqm_annotations_load(const char* path, const lqm_corpus* c,
                                        const lqm_taxonomy* t, lqm_annotations** out);
LQM_API lqm_status lqm_annotations_parse(const char* jsonl, size_t len, const char* source_name,
                                         const lqm_corpus* c, const lqm_taxonomy* t,
                                         lqm_annotations** out);
LQM_API size_t lqm_annotations_span_count(const lqm_annotations* a);
LQM_API void lqm_annotations_free(lqm_annotations* a);

/* Summary of a validated corpus and (optional) annotations, as JSON. */
LQM_API lqm_status lqm_validate_summary(const lqm_corpus* c, const lqm_annotations* a, char** out);

/* Score report. options_json may be NULL or an object with
 *   "weights_path": weights file, "weights": inline weights object,
 *   "annotator": string, "covered_only": bool. */
LQM_API lqm_status lqm_score(const lqm_corpus* c, const lqm_annotations* a, const char* options_json,
                             char** out);

/* Agreement between two annotators over their doubly covered segments. */
LQM_API lqm_status lqm_iaa(const lqm_corpus* c, const lqm_annotations* a, const lqm_taxonomy* t,
                           const char* annotator_a, const char* annotator_b, size_t min_overlap,
                           char** out);

/* Sentence BLEU per segment. tokenizer: "whitespace", "pretok" or "subword:PATH". */
LQM_API lqm_status lqm_bleu(const lqm_corpus* c, const char* hyp_field, const char* tokenizer,
                            int lowercase, char** out);

/* Analyses. report: "dist", "attrib", "corr" or "buckets". options_json may be
 * NULL or an object with "level", "direction", "model", "dialect",
 * "annotator", "exact" (bool), "weights_path", "weights". bleu_json is the
 * output of lqm_bleu and is required for "corr". */
LQM_API lqm_status lqm_analyze(const lqm_corpus* c, const lqm_annotations* a, const lqm_taxonomy* t,
                               const char* report, const char* options_json, const char* bleu_json,
                               char** out);

/* Renders a JSON report as text tables. kind: "score", "bleu", "iaa", or an
 * analyze report name. */
LQM_API lqm_status lqm_render_table(const char* kind, const char* report_json, char** out);

/* Writes through a temporary file and rename. */
LQM_API lqm_status lqm_write_file(const char* path, const char* data, size_t len);

/* Writes a stored project's segments.jsonl and annotations.jsonl into out_dir. */
LQM_API lqm_status lqm_export_project(const char* data_dir, const char* project_id, const char* out_dir);

/* Annotation server. options_json: {"data_dir", "host", "port", "admin_token"}. */
LQM_API lqm_status lqm_server_create(const char* options_json, lqm_server** out);
/* Loads projects and binds; writes the bound port. */
LQM_API lqm_status lqm_server_bind(lqm_server* s, int* port);
/* Blocks until lqm_server_stop is called from another thread. */
LQM_API lqm_status lqm_server_run(lqm_server* s);
LQM_API void lqm_server_stop(lqm_server* s);
LQM_API void lqm_server_free(lqm_server* s);

#ifdef __cplusplus
}
#endif

#endif /* LQM_LQM_H */
