#ifndef TRANSIT_DEIA_H
#define TRANSIT_DEIA_H

#include <stdbool.h>
#include <stddef.h>

typedef enum TdStatus {
  TD_STATUS_OK = 0,
  TD_STATUS_NULL_POINTER = 1,
  TD_STATUS_INVALID_UTF8 = 2,
  TD_STATUS_IO = 3,
  TD_STATUS_PARSE = 4,
  TD_STATUS_INVALID_ARGUMENT = 5,
  TD_STATUS_PANIC = 6,
} TdStatus;

typedef enum TdSentiment {
  TD_SENTIMENT_NEGATIVE = 0,
  TD_SENTIMENT_NEUTRAL = 1,
  TD_SENTIMENT_POSITIVE = 2,
} TdSentiment;

// `Missing` marks an absent or NaN input.
typedef enum TdDemoClass {
  TD_DEMO_CLASS_MISSING = 0,
  TD_DEMO_CLASS_LOW = 1,
  TD_DEMO_CLASS_MEDIUM = 2,
  TD_DEMO_CLASS_HIGH = 3,
  TD_DEMO_CLASS_VERY_HIGH = 4,
} TdDemoClass;

// Two-stage keyword filter handle.
typedef struct TdRelevance TdRelevance;

// Sentiment scorer handle.
typedef struct TdScorer TdScorer;

// Census tract polygons handle.
typedef struct TdTracts TdTracts;

typedef struct TdScore {
  double compound;
  enum TdSentiment sentiment;
  // Tokens found in the lexicon.
  size_t hit_count;
} TdScore;

typedef struct TdRelevanceTag {
  bool dei;
  // Only set for posts that passed the DEI stage.
  bool transport;
  bool relevant;
} TdRelevanceTag;

typedef struct TdClassification {
  enum TdDemoClass income;
  enum TdDemoClass female;
  enum TdDemoClass hispanic_latino;
  enum TdDemoClass black;
} TdClassification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next call into this library from the same thread.
const char *td_last_error(void);

// Library version, e.g. "0.1.0". Static; do not free.
const char *td_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void td_string_free(char *s);

// Lowercases and strips URLs, mentions, emoji and punctuation.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum TdStatus td_clean_text(const char *text, char **out);

// Creates a scorer. A null `lexicon_path` uses the bundled lexicon.
// `neutral_band` is the half-width of the neutral class around zero.
//
// # Safety
// `lexicon_path` must be null or NUL-terminated; `out` must be writable.
enum TdStatus td_scorer_new(const char *lexicon_path,
                            bool heuristics,
                            double neutral_band,
                            struct TdScorer **out);

// # Safety
// `h` must be null or come from [`td_scorer_new`], freed once.
void td_scorer_free(struct TdScorer *h);

// Cleans, tokenizes and scores raw post text.
//
// # Safety
// `h` must be a live scorer; `text` NUL-terminated; `out` writable.
enum TdStatus td_score_text(const struct TdScorer *h, const char *text, struct TdScore *out);

// Creates a keyword filter. Null paths use the bundled lists; `substring`
// switches from whole-token to substring matching.
//
// # Safety
// Paths must be null or NUL-terminated; `out` must be writable.
enum TdStatus td_relevance_new(const char *dei_path,
                               const char *transport_path,
                               bool substring,
                               struct TdRelevance **out);

// # Safety
// `h` must be null or come from [`td_relevance_new`], freed once.
void td_relevance_free(struct TdRelevance *h);

// # Safety
// `h` must be a live filter; `text` NUL-terminated; `out` writable.
enum TdStatus td_relevance_tag(const struct TdRelevance *h,
                               const char *text,
                               struct TdRelevanceTag *out);

// Loads tract polygons from a GeoJSON FeatureCollection. Features that fail
// to parse are skipped and counted in `skipped` (which may be null).
//
// # Safety
// `path` NUL-terminated; `out` writable; `skipped` null or writable.
enum TdStatus td_tracts_load(const char *path, struct TdTracts **out, size_t *skipped);

// # Safety
// `h` must be null or come from [`td_tracts_load`], freed once.
void td_tracts_free(struct TdTracts *h);

// Number of polygons (a multipolygon tract counts once per part).
//
// # Safety
// `h` must be null or a live handle.
size_t td_tracts_len(const struct TdTracts *h);

// Finds the tract containing (lon, lat). `*geoid` is set to a new string, or
// to null when no tract contains the point.
//
// # Safety
// `h` must be a live handle; `geoid` writable.
enum TdStatus td_tracts_assign(const struct TdTracts *h, double lon, double lat, char **geoid);

// Classifies one tract's demographics. Pass NaN for a missing field.
//
// # Safety
// `out` must be writable.
enum TdStatus td_classify_tract(double income_per_capita,
                                double pct_female,
                                double pct_hispanic_latino,
                                double pct_black,
                                struct TdClassification *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSIT_DEIA_H */
