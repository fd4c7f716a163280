#include "ssde/simulate.hpp"

#include "ssde/errors.hpp"
#include "ssde/parallel.hpp"
#include "ssde/rng.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace ssde {

TimeGrid TimeGrid::over(const ObservationWindow& window, int m) {
  require(m >= 2, ErrorKind::invalid_argument, "time grid needs m >= 2 steps");
  require(window.b > window.a, ErrorKind::invalid_argument, "time grid needs end > start");
  TimeGrid grid;
  grid.window = window;
  grid.m = m;
  grid.t.resize(static_cast<std::size_t>(m) + 1);
  const double dt = (window.b - window.a) / m;
  for (int k = 0; k <= m; ++k) grid.t[static_cast<std::size_t>(k)] = window.a + k * dt;
  grid.t.back() = window.b;
  return grid;
}

TimeGrid TimeGrid::uniform(double start, double end, int m) {
  return over(ObservationWindow{end - start, start, end}, m);
}

bool same_grid(const TimeGrid& lhs, const TimeGrid& rhs) {
  return lhs.m == rhs.m && lhs.window.a == rhs.window.a && lhs.window.b == rhs.window.b;
}

std::vector<double> wiener_increments(int m, double dt, std::uint64_t seed,
                                      std::uint64_t stream) {
  require(m >= 1, ErrorKind::invalid_argument, "wiener_increments needs m >= 1");
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::invalid_argument,
          "wiener_increments needs a positive step");
  const CounterRng rng(seed, stream);
  const double scale = std::sqrt(dt);
  std::vector<double> dw(static_cast<std::size_t>(m));
  for (std::size_t k = 0; k < dw.size(); ++k) dw[k] = scale * rng.normal(k);
  return dw;
}

namespace {

void guard(double value, std::size_t step, const char* which) {
  if (!std::isfinite(value) || std::abs(value) > blowup_threshold) {
    std::ostringstream os;
    os << which << " state left the finite range at step " << step;
    fail(ErrorKind::simulation_blowup, os.str(), step);
  }
}

struct State {
  double y;
  double x;
};

State euler_step(const StateSpaceModel& model, const MapValues& phi, State s, double t,
                 double dt, double dwy, double dwx) {
  const double x_next =
      s.x + phi.phi_x * model.b_x(s.x, t) * dt + model.sigma_x(s.x, t) * dwx;
  const double y_next =
      s.y + phi.phi_y * model.b_y(s.y, s.x, t) * dt + model.sigma_y(s.y, s.x, t) * dwy;
  return {y_next, x_next};
}

PathPair run_driven(const StateSpaceModel& model, const MapValues& phi, const TimeGrid& grid,
                    State state, const std::vector<double>& dwy, const std::vector<double>& dwx) {
  const double dt = grid.dt();
  const auto m = static_cast<std::size_t>(grid.m);
  PathPair path;
  path.grid = grid;
  path.y.resize(m + 1);
  path.x.resize(m + 1);
  path.y[0] = state.y;
  path.x[0] = state.x;
  for (std::size_t k = 0; k < m; ++k) {
    state = euler_step(model, phi, state, grid.t[k], dt, dwy[k], dwx[k]);
    guard(state.x, k + 1, "latent");
    guard(state.y, k + 1, "observation");
    path.y[k + 1] = state.y;
    path.x[k + 1] = state.x;
  }
  return path;
}

}  // namespace

PathPair simulate_pair(const StateSpaceModel& model, const ParamVector& theta,
                       const TimeGrid& grid, std::uint64_t seed, const SimOptions& options) {
  model.validate();
  require(grid.m >= 2, ErrorKind::invalid_argument, "time grid needs m >= 2 steps");
  const MapValues phi = map_values(model.maps, theta);
  const double dt = grid.dt();

  State state{model.y0, model.x0};
  if (options.burn_in && grid.start() > 0.0) {
    const auto burn_steps = static_cast<int>(std::floor(grid.start() / dt));
    if (burn_steps >= 1) {
      const auto bwy = wiener_increments(burn_steps, dt, seed, stream_burn_w_y);
      const auto bwx = wiener_increments(burn_steps, dt, seed, stream_burn_w_x);
      double t = grid.start() - burn_steps * dt;
      for (std::size_t k = 0; k < static_cast<std::size_t>(burn_steps); ++k) {
        state = euler_step(model, phi, state, t, dt, bwy[k], bwx[k]);
        guard(state.x, k + 1, "latent burn-in");
        guard(state.y, k + 1, "observation burn-in");
        t += dt;
      }
    }
  }

  auto dwy = wiener_increments(grid.m, dt, seed, stream_w_y);
  auto dwx = wiener_increments(grid.m, dt, seed, stream_w_x);
  PathPair path = run_driven(model, phi, grid, state, dwy, dwx);
  path.seed = seed;
  if (options.store_increments) {
    path.dw_y = std::move(dwy);
    path.dw_x = std::move(dwx);
  }
  return path;
}

PathPair simulate_pair_driven(const StateSpaceModel& model, const ParamVector& theta,
                              const TimeGrid& grid, const std::vector<double>& dw_y,
                              const std::vector<double>& dw_x) {
  model.validate();
  require(dw_y.size() == static_cast<std::size_t>(grid.m) && dw_x.size() == dw_y.size(),
          ErrorKind::invalid_argument, "simulate_pair_driven: need one increment per step");
  PathPair path = run_driven(model, map_values(model.maps, theta), grid,
                             State{model.y0, model.x0}, dw_y, dw_x);
  path.dw_y = dw_y;
  path.dw_x = dw_x;
  return path;
}

std::vector<double> coarsen_increments(const std::vector<double>& fine, int factor) {
  require(factor >= 1 && fine.size() % static_cast<std::size_t>(factor) == 0,
          ErrorKind::invalid_argument, "coarsen_increments: factor must divide the step count");
  std::vector<double> out(fine.size() / static_cast<std::size_t>(factor), 0.0);
  for (std::size_t k = 0; k < fine.size(); ++k) out[k / static_cast<std::size_t>(factor)] += fine[k];
  return out;
}

std::uint64_t latent_path_seed(std::uint64_t seed, std::size_t path_index) {
  return derive_seed(seed, 0x1000 + path_index);
}

std::vector<double> simulate_latent(const StateSpaceModel& model, double phi_x,
                                    const TimeGrid& grid, std::uint64_t path_seed,
                                    LatentDrift drift) {
  const double dt = grid.dt();
  const auto m = static_cast<std::size_t>(grid.m);
  const auto dwx = wiener_increments(grid.m, dt, path_seed, stream_w_x);
  std::vector<double> x(m + 1);
  x[0] = model.x0;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = grid.t[k];
    double next = x[k] + model.sigma_x(x[k], t) * dwx[k];
    if (drift == LatentDrift::full) next += phi_x * model.b_x(x[k], t) * dt;
    guard(next, k + 1, "latent");
    x[k + 1] = next;
  }
  return x;
}

LatentBatch simulate_latent_batch(const StateSpaceModel& model, const ParamVector& theta,
                                  const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                  LatentDrift drift, int threads) {
  require(n_paths >= 1, ErrorKind::invalid_argument, "latent batch needs n_paths >= 1");
  require(grid.m >= 2, ErrorKind::invalid_argument, "time grid needs m >= 2 steps");
  const double phi_x = drift == LatentDrift::full ? map_values(model.maps, theta).phi_x : 0.0;
  LatentBatch batch;
  batch.grid = grid;
  batch.paths.resize(static_cast<std::size_t>(n_paths));
  parallel_for(batch.paths.size(), threads, [&](std::size_t i) {
    batch.paths[i] = simulate_latent(model, phi_x, grid, latent_path_seed(seed, i), drift);
  });
  return batch;
}

void write_path_csv(std::ostream& os, const PathPair& path) {
  os << "t,y,x\n";
  char line[96];
  for (std::size_t k = 0; k < path.y.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", path.grid.t[k], path.y[k], path.x[k]);
    os << line;
  }
}

}  // namespace ssde
