#pragma once

#include "ssde/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace ssde {

// Uniform grid of m + 1 knots on [start, end].
struct TimeGrid {
  ObservationWindow window;
  int m = 0;
  std::vector<double> t;

  double start() const { return t.front(); }
  double end() const { return t.back(); }
  double dt() const { return (window.b - window.a) / m; }

  static TimeGrid over(const ObservationWindow& window, int m);
  static TimeGrid uniform(double start, double end, int m);
};

bool same_grid(const TimeGrid& lhs, const TimeGrid& rhs);

struct PathPair {
  TimeGrid grid;
  std::vector<double> y;
  std::vector<double> x;
  std::optional<std::vector<double>> dw_y;
  std::optional<std::vector<double>> dw_x;
  std::uint64_t seed = 0;
};

enum class LatentDrift { full, null };

struct SimOptions {
  // Run the recursion from t = 0 (same step) and keep only knots in the window.
  bool burn_in = false;
  bool store_increments = true;
};

// Abort threshold on |state|.
inline constexpr double blowup_threshold = 1e12;

// RNG stream ids under a path seed.
inline constexpr std::uint64_t stream_w_y = 1;
inline constexpr std::uint64_t stream_w_x = 2;
inline constexpr std::uint64_t stream_burn_w_y = 3;
inline constexpr std::uint64_t stream_burn_w_x = 4;

// iid N(0, dt) increments; a pure function of (seed, stream, index).
std::vector<double> wiener_increments(int m, double dt, std::uint64_t seed,
                                      std::uint64_t stream = 0);

PathPair simulate_pair(const StateSpaceModel& model, const ParamVector& theta,
                       const TimeGrid& grid, std::uint64_t seed,
                       const SimOptions& options = {});

// Euler-Maruyama on a caller-supplied Brownian driver, one increment per step.
PathPair simulate_pair_driven(const StateSpaceModel& model, const ParamVector& theta,
                              const TimeGrid& grid, const std::vector<double>& dw_y,
                              const std::vector<double>& dw_x);

// Sums consecutive blocks of `factor` increments: the same Brownian path on a
// grid with factor times fewer steps.
std::vector<double> coarsen_increments(const std::vector<double>& fine, int factor);

struct LatentBatch {
  TimeGrid grid;
  std::vector<std::vector<double>> paths;
};

// Sub-seed of path i in a batch: independent of the batch size.
std::uint64_t latent_path_seed(std::uint64_t seed, std::size_t path_index);

std::vector<double> simulate_latent(const StateSpaceModel& model, double phi_x,
                                    const TimeGrid& grid, std::uint64_t path_seed,
                                    LatentDrift drift);

LatentBatch simulate_latent_batch(const StateSpaceModel& model, const ParamVector& theta,
                                  const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                  LatentDrift drift, int threads = 1);

// Header `t,y,x`, one row per knot, 17 significant digits.
void write_path_csv(std::ostream& os, const PathPair& path);

}  // namespace ssde
