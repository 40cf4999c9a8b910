#ifndef FDQN_H
#define FDQN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FdqnAlgo {
  FDQN_ALGO_DQN = 0,
  FDQN_ALGO_DDQN = 1,
  FDQN_ALGO_DUELING_DQN = 2,
  FDQN_ALGO_DUELING_DDQN = 3,
} FdqnAlgo;

typedef enum FdqnStatus {
  FDQN_STATUS_OK = 0,
  FDQN_STATUS_NULL_POINTER = 1,
  FDQN_STATUS_INVALID_ARGUMENT = 2,
  FDQN_STATUS_PARSE = 3,
  FDQN_STATUS_DIMENSION_MISMATCH = 4,
  FDQN_STATUS_ZERO_MAGNITUDE = 5,
  FDQN_STATUS_PANIC = 6,
} FdqnStatus;

// An occupancy grid.
typedef struct FdqnGrid FdqnGrid;

// A Q-network together with the variant it was built for.
typedef struct FdqnNetwork FdqnNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call into the library on this thread.
const char *fdqn_last_error(void);

// Releases a string returned by the library. Null is ignored.
void fdqn_string_free(char *s);

// Parses map text (`#` wall, `.` free, `S` start).
enum FdqnStatus fdqn_grid_from_map(const char *map_text, struct FdqnGrid **out);

// Parses a plain (`P2`) PGM image of a grid.
enum FdqnStatus fdqn_grid_from_pgm(const char *pgm_text, struct FdqnGrid **out);

void fdqn_grid_free(struct FdqnGrid *grid);

enum FdqnStatus fdqn_grid_dims(const struct FdqnGrid *grid, size_t *width, size_t *height);

// Renders the grid as a PGM string; free it with [`fdqn_string_free`].
enum FdqnStatus fdqn_grid_to_pgm(const struct FdqnGrid *grid, char **out);

// Cosine similarity of pooled map features and whether it clears the gate.
enum FdqnStatus fdqn_map_similarity(const struct FdqnGrid *reference,
                                    const struct FdqnGrid *candidate,
                                    double *score,
                                    bool *pass);

// A freshly initialized network for `algo`, seeded deterministically.
enum FdqnStatus fdqn_network_init(enum FdqnAlgo algo, uint64_t seed, struct FdqnNetwork **out);

// Loads a network from checkpoint text.
enum FdqnStatus fdqn_network_load(const char *checkpoint, struct FdqnNetwork **out);

// Serializes a network as checkpoint text; free it with [`fdqn_string_free`].
enum FdqnStatus fdqn_network_save(const struct FdqnNetwork *net, char **out);

void fdqn_network_free(struct FdqnNetwork *net);

enum FdqnStatus fdqn_network_algo(const struct FdqnNetwork *net, enum FdqnAlgo *algo);

// Q-values for a 36-element state; `q_out` must hold `q_len >= 10` values.
enum FdqnStatus fdqn_network_forward(const struct FdqnNetwork *net,
                                     const double *state,
                                     size_t state_len,
                                     double *q_out,
                                     size_t q_len);

// Greedy slot for a state, with zero-padded centroid slots masked by `penalty`.
enum FdqnStatus fdqn_network_select_action(const struct FdqnNetwork *net,
                                           const double *state,
                                           size_t state_len,
                                           double penalty,
                                           size_t *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDQN_H */
