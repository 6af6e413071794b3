//! Desk-scale synthetic fire/smoke generator.
//!
//! A fire front is a zero level set of `psi` advanced by
//! `psi_t + S ||grad psi|| = 0` with a heterogeneous spread rate `S >= 0`,
//! discretized with the first-order Godunov upwind gradient and forward
//! Euler. Because `psi` never increases, the burned set `{psi < 0}` never
//! shrinks; recording each cell's first crossing time yields the
//! time-since-ignition input field `f`.
//!
//! Smoke is a column-averaged 2D concentration `c` advanced by upwind
//! finite-volume advection, centered diffusion, and an explicit source:
//! cells emit `emission_factor` for a fixed window of steps after ignition.
//! The cumulative output field `g` is the running sum of `c` over
//! checkpoints, which makes `g` non-decreasing in time by construction.
//!
//! Everything is explicit in time, so scenario validation enforces CFL
//! bounds; the transport step additionally requires the combined advective
//! plus diffusive CFL number to stay at or below one, which is what actually
//! guarantees positivity for the upwind/centered scheme (the two separate
//! bounds allow a sum up to 1.8, and a cell can then be drained below zero).

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par;
use crate::tensorio::{Grid2D, SnapshotLabel, SnapshotMatrix};
use crate::{Error, Result};

/// Margin kept by every CFL bound.
pub const CFL_LIMIT: f64 = 0.9;

/// How boundary faces are treated by the transport step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Zero-gradient ghost cells: smoke leaves through the domain edge.
    Outflow,
    /// No advective or diffusive flux through the edge; exists so mass
    /// conservation tests are exact.
    ZeroFlux,
}

/// Optional seeded perturbation applied by [`run_scenario`] before
/// validation: uniform multiplicative noise on the spread rate and uniform
/// additive noise on both wind components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Relative spread-rate amplitude; each cell is scaled by a factor in
    /// `[1 - amp, 1 + amp]`, clamped to stay non-negative.
    pub spread_rel: f64,
    /// Absolute wind amplitude in m/s, drawn per cell from `[-amp, amp]`.
    pub wind_abs: f64,
}

/// Fully specified single-fire scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireScenario {
    pub grid: Grid2D,
    /// Spread rate `S(x, y) >= 0` in m/s, flattened per [`Grid2D::idx`].
    pub spread_rate: Vec<f64>,
    /// Ignition cell `(ix, iy)`.
    pub ignition: (usize, usize),
    /// Radius of the initially burned disk around the ignition cell center,
    /// in meters.
    pub initial_radius: f64,
    /// Wind components in m/s, per cell.
    pub wind_u: Vec<f64>,
    pub wind_v: Vec<f64>,
    /// Smoke diffusivity in m^2/s.
    pub diffusivity: f64,
    /// Source strength per burning cell, concentration per second.
    pub emission_factor: f64,
    /// Steps a cell keeps emitting after it ignites.
    pub burn_duration_steps: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub checkpoint_every: usize,
    pub boundary: BoundaryMode,
    pub condition: String,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

/// One checkpointed state of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FireSmokeSnapshot {
    /// Seconds since each cell ignited; 0 for unburned cells.
    pub time_since_ignition: Vec<f64>,
    /// Running checkpoint sum of the instantaneous concentration.
    pub cumulative_smoke: Vec<f64>,
    /// Simulation time in seconds.
    pub t: f64,
}

/// Scenario result with the internals the snapshots do not carry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub snapshots: Vec<FireSmokeSnapshot>,
    /// Instantaneous concentration after the last step.
    pub final_concentration: Vec<f64>,
    /// First-crossing time per cell, `f64::INFINITY` where unburned.
    pub ignition_time: Vec<f64>,
    /// Total number of (cell, step) pairs that emitted smoke.
    pub burning_cell_steps: u64,
}

impl FireScenario {
    /// Checks shapes, parameter ranges, and the CFL invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.cell_count();
        for (name, field) in [
            ("spread_rate", &self.spread_rate),
            ("wind_u", &self.wind_u),
            ("wind_v", &self.wind_v),
        ] {
            if field.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} cells, grid has {n}",
                    field.len()
                )));
            }
            if field.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} contains non-finite values"
                )));
            }
        }
        if self.spread_rate.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidInput(
                "spread rate must be non-negative".into(),
            ));
        }
        if self.ignition.0 >= self.grid.nx || self.ignition.1 >= self.grid.ny {
            return Err(Error::InvalidInput(format!(
                "ignition cell {:?} outside {}x{} grid",
                self.ignition, self.grid.nx, self.grid.ny
            )));
        }
        if !(self.initial_radius > 0.0) || !self.initial_radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "initial radius must be positive, got {}",
                self.initial_radius
            )));
        }
        if !(self.diffusivity >= 0.0) || !(self.emission_factor >= 0.0) {
            return Err(Error::InvalidInput(
                "diffusivity and emission factor must be non-negative".into(),
            ));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_steps == 0 || self.checkpoint_every == 0 || self.checkpoint_every > self.n_steps {
            return Err(Error::InvalidInput(format!(
                "need 1 <= checkpoint_every <= n_steps, got {} and {}",
                self.checkpoint_every, self.n_steps
            )));
        }

        let (dx, dy) = (self.grid.dx, self.grid.dy);
        let max_s = self.spread_rate.iter().cloned().fold(0.0, f64::max);
        let front_cfl = self.dt * max_s * (1.0 / dx + 1.0 / dy);
        if front_cfl > CFL_LIMIT {
            return Err(Error::InvalidInput(format!(
                "front CFL {front_cfl:.3} exceeds {CFL_LIMIT}"
            )));
        }
        let max_u = self.wind_u.iter().map(|u| u.abs()).fold(0.0, f64::max);
        let max_v = self.wind_v.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let adv_cfl = self.dt * (max_u / dx + max_v / dy);
        if adv_cfl > CFL_LIMIT {
            return Err(Error::InvalidInput(format!(
                "advective CFL {adv_cfl:.3} exceeds {CFL_LIMIT}"
            )));
        }
        let diff_cfl = 2.0 * self.diffusivity * self.dt * (1.0 / (dx * dx) + 1.0 / (dy * dy));
        if diff_cfl > CFL_LIMIT {
            return Err(Error::InvalidInput(format!(
                "diffusive CFL {diff_cfl:.3} exceeds {CFL_LIMIT}"
            )));
        }
        if adv_cfl + diff_cfl > 1.0 {
            return Err(Error::InvalidInput(format!(
                "combined transport CFL {:.3} exceeds 1; positivity not guaranteed",
                adv_cfl + diff_cfl
            )));
        }
        Ok(())
    }
}

/// One forward-Euler step of `psi_t + S ||grad psi|| = 0` with the Godunov
/// upwind gradient for non-negative `S` (one-sided differences at edges).
pub fn propagate_front(psi: &[f64], spread: &[f64], grid: &Grid2D, dt: f64) -> Result<Vec<f64>> {
    let n = grid.cell_count();
    if psi.len() != n || spread.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "psi ({}) or spread ({}) does not match grid ({n})",
            psi.len(),
            spread.len()
        )));
    }
    let max_s = spread.iter().cloned().fold(0.0, f64::max);
    if dt * max_s * (1.0 / grid.dx + 1.0 / grid.dy) > CFL_LIMIT {
        return Err(Error::InvalidInput(format!(
            "front CFL {:.3} exceeds {CFL_LIMIT}",
            dt * max_s * (1.0 / grid.dx + 1.0 / grid.dy)
        )));
    }

    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = vec![0.0; n];
    for iy in 0..ny {
        for ix in 0..nx {
            let i = grid.idx(ix, iy);
            let here = psi[i];
            let bw_x = if ix > 0 {
                (here - psi[grid.idx(ix - 1, iy)]) / grid.dx
            } else {
                0.0
            };
            let fw_x = if ix + 1 < nx {
                (psi[grid.idx(ix + 1, iy)] - here) / grid.dx
            } else {
                0.0
            };
            let bw_y = if iy > 0 {
                (here - psi[grid.idx(ix, iy - 1)]) / grid.dy
            } else {
                0.0
            };
            let fw_y = if iy + 1 < ny {
                (psi[grid.idx(ix, iy + 1)] - here) / grid.dy
            } else {
                0.0
            };
            let gx = bw_x.max(0.0).powi(2).max(fw_x.min(0.0).powi(2));
            let gy = bw_y.max(0.0).powi(2).max(fw_y.min(0.0).powi(2));
            out[i] = here - dt * spread[i] * (gx + gy).sqrt();
        }
    }
    Ok(out)
}

/// Time-since-ignition field at time `t` from recorded first-crossing times
/// (`f64::INFINITY` marks unburned cells).
pub fn time_since_ignition(ignition_time: &[f64], t: f64) -> Vec<f64> {
    ignition_time
        .iter()
        .map(|&t0| {
            if t0.is_finite() && t >= t0 {
                t - t0
            } else {
                0.0
            }
        })
        .collect()
}

/// One finite-volume step of the smoke transport equation
/// `c_t - kappa lap(c) + div(u c) = source`.
///
/// Face velocities are averages of the adjacent cell winds and the advective
/// face flux is upwind. Preconditions: non-negative `c` and `source`, and
/// the scenario CFL bounds including the combined bound of one that makes
/// the update a convex combination (so `c' >= 0`).
pub fn transport_smoke(
    c: &[f64],
    wind_u: &[f64],
    wind_v: &[f64],
    diffusivity: f64,
    source: &[f64],
    dt: f64,
    grid: &Grid2D,
    boundary: BoundaryMode,
) -> Result<Vec<f64>> {
    let n = grid.cell_count();
    for (name, field) in [
        ("c", c),
        ("wind_u", wind_u),
        ("wind_v", wind_v),
        ("source", source),
    ] {
        if field.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} has {} cells, grid has {n}",
                field.len()
            )));
        }
    }
    if c.iter().any(|&v| v < 0.0) || source.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "concentration and source must be non-negative".into(),
        ));
    }
    if !(diffusivity >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "diffusivity must be non-negative, got {diffusivity}"
        )));
    }
    let (dx, dy) = (grid.dx, grid.dy);
    let max_u = wind_u.iter().map(|u| u.abs()).fold(0.0, f64::max);
    let max_v = wind_v.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let adv_cfl = dt * (max_u / dx + max_v / dy);
    let diff_cfl = 2.0 * diffusivity * dt * (1.0 / (dx * dx) + 1.0 / (dy * dy));
    if adv_cfl > CFL_LIMIT || diff_cfl > CFL_LIMIT || adv_cfl + diff_cfl > 1.0 {
        return Err(Error::InvalidInput(format!(
            "transport CFL violated: advective {adv_cfl:.3}, diffusive {diff_cfl:.3}"
        )));
    }

    let (nx, ny) = (grid.nx, grid.ny);
    // Upwind flux through the face between `up` (lower index side) and `dn`.
    let face_flux =
        |vel: f64, c_up: f64, c_dn: f64| if vel >= 0.0 { vel * c_up } else { vel * c_dn };

    let mut out = vec![0.0; n];
    for iy in 0..ny {
        for ix in 0..nx {
            let i = grid.idx(ix, iy);

            // Advective fluxes on the four faces.
            let fx_right = if ix + 1 < nx {
                let j = grid.idx(ix + 1, iy);
                face_flux(0.5 * (wind_u[i] + wind_u[j]), c[i], c[j])
            } else {
                match boundary {
                    BoundaryMode::ZeroFlux => 0.0,
                    BoundaryMode::Outflow => face_flux(wind_u[i], c[i], c[i]),
                }
            };
            let fx_left = if ix > 0 {
                let j = grid.idx(ix - 1, iy);
                face_flux(0.5 * (wind_u[j] + wind_u[i]), c[j], c[i])
            } else {
                match boundary {
                    BoundaryMode::ZeroFlux => 0.0,
                    BoundaryMode::Outflow => face_flux(wind_u[i], c[i], c[i]),
                }
            };
            let fy_up = if iy + 1 < ny {
                let j = grid.idx(ix, iy + 1);
                face_flux(0.5 * (wind_v[i] + wind_v[j]), c[i], c[j])
            } else {
                match boundary {
                    BoundaryMode::ZeroFlux => 0.0,
                    BoundaryMode::Outflow => face_flux(wind_v[i], c[i], c[i]),
                }
            };
            let fy_down = if iy > 0 {
                let j = grid.idx(ix, iy - 1);
                face_flux(0.5 * (wind_v[j] + wind_v[i]), c[j], c[i])
            } else {
                match boundary {
                    BoundaryMode::ZeroFlux => 0.0,
                    BoundaryMode::Outflow => face_flux(wind_v[i], c[i], c[i]),
                }
            };

            // Centered diffusion; missing neighbors mirror the cell value,
            // which zeroes the diffusive flux through the edge in both
            // boundary modes.
            let cl = if ix > 0 {
                c[grid.idx(ix - 1, iy)]
            } else {
                c[i]
            };
            let cr = if ix + 1 < nx {
                c[grid.idx(ix + 1, iy)]
            } else {
                c[i]
            };
            let cd = if iy > 0 {
                c[grid.idx(ix, iy - 1)]
            } else {
                c[i]
            };
            let cu = if iy + 1 < ny {
                c[grid.idx(ix, iy + 1)]
            } else {
                c[i]
            };
            let lap = (cl - 2.0 * c[i] + cr) / (dx * dx) + (cd - 2.0 * c[i] + cu) / (dy * dy);

            out[i] = c[i] - dt * ((fx_right - fx_left) / dx + (fy_up - fy_down) / dy)
                + dt * diffusivity * lap
                + dt * source[i];
            debug_assert!(
                out[i] >= -1e-12 * (1.0 + c[i].abs()),
                "positivity lost at {i}"
            );
            if out[i] < 0.0 {
                out[i] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Signed distance to a circle of the given radius centered on the
/// ignition cell's center; the burned region is where it is negative.
pub fn initial_psi(grid: &Grid2D, ignition: (usize, usize), radius: f64) -> Vec<f64> {
    let (cx, cy) = (
        (ignition.0 as f64 + 0.5) * grid.dx,
        (ignition.1 as f64 + 0.5) * grid.dy,
    );
    let mut psi = vec![0.0; grid.cell_count()];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let x = (ix as f64 + 0.5) * grid.dx;
            let y = (iy as f64 + 0.5) * grid.dy;
            psi[grid.idx(ix, iy)] = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - radius;
        }
    }
    psi
}

/// Runs a scenario to completion, recording a snapshot every
/// `checkpoint_every` steps. The seed only matters when the scenario carries
/// a [`Perturbation`]; the perturbed fields are validated before stepping.
pub fn run_scenario(scenario: &FireScenario, seed: u64) -> Result<Vec<FireSmokeSnapshot>> {
    Ok(run_scenario_detailed(scenario, seed)?.snapshots)
}

/// As [`run_scenario`], also returning the final instantaneous concentration
/// and the ignition bookkeeping needed by mass-budget checks.
pub fn run_scenario_detailed(scenario: &FireScenario, seed: u64) -> Result<ScenarioRun> {
    let mut scenario = scenario.clone();
    if let Some(p) = scenario.perturbation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if !(p.spread_rel >= 0.0 && p.wind_abs >= 0.0) {
            return Err(Error::InvalidInput(
                "perturbation amplitudes must be non-negative".into(),
            ));
        }
        for s in scenario.spread_rate.iter_mut() {
            *s = (*s * (1.0 + rng.random_range(-p.spread_rel..=p.spread_rel))).max(0.0);
        }
        for u in scenario.wind_u.iter_mut() {
            *u += rng.random_range(-p.wind_abs..=p.wind_abs);
        }
        for v in scenario.wind_v.iter_mut() {
            *v += rng.random_range(-p.wind_abs..=p.wind_abs);
        }
    }
    scenario.validate()?;

    let grid = scenario.grid;
    let n = grid.cell_count();
    let mut psi = initial_psi(&grid, scenario.ignition, scenario.initial_radius);
    let mut ignition_time: Vec<f64> = psi
        .iter()
        .map(|&p| if p < 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    let mut c = vec![0.0; n];
    let mut cumulative = vec![0.0; n];
    let mut snapshots = Vec::with_capacity(scenario.n_steps / scenario.checkpoint_every);
    let mut burning_cell_steps = 0u64;
    let mut source = vec![0.0; n];
    let burn_window = scenario.burn_duration_steps as f64 * scenario.dt;

    for step in 1..=scenario.n_steps {
        let t = step as f64 * scenario.dt;
        psi = propagate_front(&psi, &scenario.spread_rate, &grid, scenario.dt)?;
        for i in 0..n {
            if psi[i] < 0.0 && !ignition_time[i].is_finite() {
                ignition_time[i] = t;
            }
        }
        // Cells emit from the step they ignite until the burn window closes.
        for i in 0..n {
            let burning = ignition_time[i].is_finite() && t - ignition_time[i] < burn_window;
            source[i] = if burning {
                burning_cell_steps += 1;
                scenario.emission_factor
            } else {
                0.0
            };
        }
        c = transport_smoke(
            &c,
            &scenario.wind_u,
            &scenario.wind_v,
            scenario.diffusivity,
            &source,
            scenario.dt,
            &grid,
            scenario.boundary,
        )?;
        if step % scenario.checkpoint_every == 0 {
            for i in 0..n {
                cumulative[i] += c[i];
            }
            snapshots.push(FireSmokeSnapshot {
                time_since_ignition: time_since_ignition(&ignition_time, t),
                cumulative_smoke: cumulative.clone(),
                t,
            });
        }
    }
    Ok(ScenarioRun {
        snapshots,
        final_concentration: c,
        ignition_time,
        burning_cell_steps,
    })
}

/// One condition regime a sampled fire can belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionLevel {
    pub name: String,
    pub emission_multiplier: f64,
    pub wind_multiplier: f64,
}

/// Sampler configuration for [`generate_dataset`]. Ranges are inclusive
/// `(low, high)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub grid: Grid2D,
    pub n_fires: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub checkpoint_every: usize,
    /// Uniform floor of the spread-rate field in m/s.
    pub base_spread: f64,
    /// Number of Gaussian bumps added to the spread rate.
    pub bump_count: usize,
    /// Bump amplitude range in m/s.
    pub bump_amplitude: (f64, f64),
    /// Bump radius range in meters.
    pub bump_radius: (f64, f64),
    /// Extra spread rate added downwind of the ignition point, as a fraction
    /// of the wind speed; couples the fire shape to the wind so inputs carry
    /// the plume direction.
    pub wind_coupling: f64,
    /// Wind speed range in m/s (before the condition multiplier).
    pub wind_speed: (f64, f64),
    /// Wind direction range in radians, measured from the +x axis.
    pub wind_angle: (f64, f64),
    pub diffusivity: f64,
    pub emission_factor: f64,
    pub burn_duration_steps: usize,
    /// Fraction of the domain on each side excluded from ignition sampling.
    pub ignition_margin: f64,
    pub boundary: BoundaryMode,
    /// Detection floor: recorded cumulative smoke below this absolute value
    /// is written as exactly zero. The explicit transport scheme leaves
    /// exponentially small positive residue everywhere it has ever touched;
    /// without a floor, the "smoke present" support of every field is the
    /// whole reachable domain and coverage thresholds degenerate to ranking
    /// round-off. The default is ~10 orders of magnitude below typical
    /// per-cell signal, so it only removes numerical dust.
    pub smoke_floor: f64,
    pub conditions: Vec<ConditionLevel>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            grid: Grid2D {
                nx: 80,
                ny: 64,
                dx: 50.0,
                dy: 50.0,
            },
            n_fires: 12,
            dt: 10.0,
            n_steps: 200,
            checkpoint_every: 40,
            base_spread: 0.2,
            bump_count: 2,
            bump_amplitude: (0.03, 0.10),
            bump_radius: (250.0, 600.0),
            wind_coupling: 0.6,
            wind_speed: (0.55, 0.85),
            wind_angle: (-std::f64::consts::PI, std::f64::consts::PI),
            diffusivity: 20.0,
            emission_factor: 1.0,
            burn_duration_steps: 18,
            ignition_margin: 0.44,
            boundary: BoundaryMode::Outflow,
            smoke_floor: 1e-2,
            conditions: vec![
                ConditionLevel {
                    name: "low".into(),
                    emission_multiplier: 0.5,
                    wind_multiplier: 0.75,
                },
                ConditionLevel {
                    name: "medium".into(),
                    emission_multiplier: 1.0,
                    wind_multiplier: 1.0,
                },
                ConditionLevel {
                    name: "high".into(),
                    emission_multiplier: 2.0,
                    wind_multiplier: 1.25,
                },
            ],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fires < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 fires, got {}",
                self.n_fires
            )));
        }
        if self.conditions.is_empty() {
            return Err(Error::InvalidInput(
                "need at least one condition level".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("bump_amplitude", self.bump_amplitude),
            ("bump_radius", self.bump_radius),
            ("wind_speed", self.wind_speed),
            ("wind_angle", self.wind_angle),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidInput(format!(
                    "{name} range ({lo}, {hi}) is not an ordered finite pair"
                )));
            }
        }
        if self.bump_amplitude.0 < 0.0 || self.bump_radius.0 <= 0.0 || self.wind_speed.0 < 0.0 {
            return Err(Error::InvalidInput(
                "bump amplitudes, radii, and wind speeds must be non-negative".into(),
            ));
        }
        if !(self.base_spread >= 0.0 && self.wind_coupling >= 0.0) {
            return Err(Error::InvalidInput(
                "base spread and wind coupling must be non-negative".into(),
            ));
        }
        if !(self.ignition_margin >= 0.0 && self.ignition_margin < 0.5) {
            return Err(Error::InvalidInput(format!(
                "ignition margin must lie in [0, 0.5), got {}",
                self.ignition_margin
            )));
        }
        if !(self.smoke_floor >= 0.0) || !self.smoke_floor.is_finite() {
            return Err(Error::InvalidInput(format!(
                "smoke floor must be finite and non-negative, got {}",
                self.smoke_floor
            )));
        }
        for c in &self.conditions {
            if !(c.emission_multiplier >= 0.0 && c.wind_multiplier >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "condition '{}' has negative multipliers",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

/// Samples one scenario. Exposed so callers can inspect or rerun individual
/// fires; `generate_dataset` uses stream `fire_index + 1` of the dataset
/// seed, so fires are independent of each other and of how many run.
pub fn sample_scenario(
    config: &GeneratorConfig,
    seed: u64,
    fire_index: usize,
) -> Result<FireScenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fire_index as u64 + 1);
    let grid = config.grid;
    let condition = &config.conditions[fire_index % config.conditions.len()];

    let margin_x = ((grid.nx as f64) * config.ignition_margin).ceil() as usize;
    let margin_y = ((grid.ny as f64) * config.ignition_margin).ceil() as usize;
    if 2 * margin_x + 1 > grid.nx || 2 * margin_y + 1 > grid.ny {
        return Err(Error::InvalidInput(
            "ignition margin leaves no interior cells".into(),
        ));
    }
    let ix = rng.random_range(margin_x..grid.nx - margin_x);
    let iy = rng.random_range(margin_y..grid.ny - margin_y);

    let speed =
        rng.random_range(config.wind_speed.0..=config.wind_speed.1) * condition.wind_multiplier;
    let angle = rng.random_range(config.wind_angle.0..=config.wind_angle.1);
    let (wind_u0, wind_v0) = (speed * angle.cos(), speed * angle.sin());

    let width = grid.nx as f64 * grid.dx;
    let height = grid.ny as f64 * grid.dy;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..config.bump_count)
        .map(|_| {
            let amp = rng.random_range(config.bump_amplitude.0..=config.bump_amplitude.1);
            let cx = rng.random_range(0.0..width);
            let cy = rng.random_range(0.0..height);
            let radius = rng.random_range(config.bump_radius.0..=config.bump_radius.1);
            (amp, cx, cy, radius)
        })
        .collect();

    let n = grid.cell_count();
    let mut spread = vec![config.base_spread; n];
    let (igx, igy) = ((ix as f64 + 0.5) * grid.dx, (iy as f64 + 0.5) * grid.dy);
    for iyy in 0..grid.ny {
        for ixx in 0..grid.nx {
            let x = (ixx as f64 + 0.5) * grid.dx;
            let y = (iyy as f64 + 0.5) * grid.dy;
            let i = grid.idx(ixx, iyy);
            for &(amp, cx, cy, radius) in &bumps {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                spread[i] += amp * (-d2 / (2.0 * radius * radius)).exp();
            }
            // Downwind alignment: cells ahead of the wind direction relative
            // to the ignition point spread faster.
            let (rx, ry) = (x - igx, y - igy);
            let dist = (rx * rx + ry * ry).sqrt();
            if dist > 0.0 && speed > 0.0 {
                let along = (rx * wind_u0 + ry * wind_v0) / (dist * speed);
                spread[i] += config.wind_coupling * speed * along.max(0.0);
            }
        }
    }

    Ok(FireScenario {
        grid,
        spread_rate: spread,
        ignition: (ix, iy),
        initial_radius: 0.75 * grid.dx.min(grid.dy),
        wind_u: vec![wind_u0; n],
        wind_v: vec![wind_v0; n],
        diffusivity: config.diffusivity,
        emission_factor: config.emission_factor * condition.emission_multiplier,
        burn_duration_steps: config.burn_duration_steps,
        dt: config.dt,
        n_steps: config.n_steps,
        checkpoint_every: config.checkpoint_every,
        boundary: config.boundary,
        condition: condition.name.clone(),
        perturbation: None,
    })
}

/// Generates the full dataset: one scenario per fire, all checkpoints as
/// columns. Inputs are time-since-ignition fields, outputs the cumulative
/// smoke fields, with aligned labels. Fires run in parallel but columns are
/// assembled in fire order, so the result is bitwise deterministic.
pub fn generate_dataset(
    config: &GeneratorConfig,
    seed: u64,
) -> Result<(SnapshotMatrix, SnapshotMatrix)> {
    config.validate()?;
    let per_fire = par::try_map_indexed(
        config.n_fires,
        |fire| -> Result<(String, Vec<FireSmokeSnapshot>)> {
            let scenario = sample_scenario(config, seed, fire)?;
            let snaps = run_scenario(&scenario, seed)?;
            Ok((scenario.condition, snaps))
        },
    )?;

    let n = config.grid.cell_count();
    let checkpoints = config.n_steps / config.checkpoint_every;
    let m = config.n_fires * checkpoints;
    let mut inputs = DMatrix::zeros(n, m);
    let mut outputs = DMatrix::zeros(n, m);
    let mut labels = Vec::with_capacity(m);
    for (fire, (condition, snaps)) in per_fire.into_iter().enumerate() {
        debug_assert_eq!(snaps.len(), checkpoints);
        for (k, snap) in snaps.into_iter().enumerate() {
            let col = fire * checkpoints + k;
            for i in 0..n {
                inputs[(i, col)] = snap.time_since_ignition[i];
                // Apply the detection floor at recording time. Because the
                // per-cell cumulative field is non-decreasing and the floor
                // is a fixed absolute value, floored columns stay
                // non-decreasing too.
                let g = snap.cumulative_smoke[i];
                outputs[(i, col)] = if g < config.smoke_floor { 0.0 } else { g };
            }
            labels.push(SnapshotLabel {
                fire_id: fire as u64,
                time_index: k as u32,
                condition: condition.clone(),
            });
        }
    }
    let inputs = SnapshotMatrix::new(config.grid, inputs, labels.clone())?;
    let outputs = SnapshotMatrix::new(config.grid, outputs, labels)?;
    Ok((inputs, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> Grid2D {
        Grid2D {
            nx: 20,
            ny: 16,
            dx: 10.0,
            dy: 10.0,
        }
    }

    fn basic_scenario() -> FireScenario {
        let grid = small_grid();
        let n = grid.cell_count();
        FireScenario {
            grid,
            spread_rate: vec![0.4; n],
            ignition: (10, 8),
            initial_radius: 8.0,
            wind_u: vec![0.3; n],
            wind_v: vec![0.1; n],
            diffusivity: 1.5,
            emission_factor: 2.0,
            burn_duration_steps: 5,
            dt: 5.0,
            n_steps: 40,
            checkpoint_every: 10,
            boundary: BoundaryMode::Outflow,
            condition: "medium".into(),
            perturbation: None,
        }
    }

    #[test]
    fn zero_spread_leaves_front_unchanged() {
        let grid = small_grid();
        let psi = initial_psi(&grid, (5, 5), 12.0);
        let next = propagate_front(&psi, &vec![0.0; grid.cell_count()], &grid, 5.0).unwrap();
        assert_eq!(psi, next);
    }

    #[test]
    fn front_cfl_violation_rejected() {
        let grid = small_grid();
        let psi = initial_psi(&grid, (5, 5), 12.0);
        // dt * S * (1/dx + 1/dy) = 5 * 1.0 * 0.2 = 1.0 > 0.9.
        let err = propagate_front(&psi, &vec![1.0; grid.cell_count()], &grid, 5.0).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "got {err:?}");
    }

    #[test]
    fn burned_set_never_shrinks() {
        let scenario = basic_scenario();
        let grid = scenario.grid;
        let mut psi = initial_psi(&grid, scenario.ignition, scenario.initial_radius);
        for _ in 0..30 {
            let next = propagate_front(&psi, &scenario.spread_rate, &grid, scenario.dt).unwrap();
            for i in 0..grid.cell_count() {
                assert!(next[i] <= psi[i] + 1e-15, "psi grew at cell {i}");
            }
            psi = next;
        }
    }

    #[test]
    fn time_since_ignition_definition() {
        let ig = vec![0.0, 30.0, f64::INFINITY, 90.0];
        let f = time_since_ignition(&ig, 100.0);
        assert_eq!(f, vec![100.0, 70.0, 0.0, 10.0]);
    }

    #[test]
    fn transport_identity_without_forcing() {
        let grid = small_grid();
        let n = grid.cell_count();
        let c: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        let out = transport_smoke(
            &c,
            &vec![0.0; n],
            &vec![0.0; n],
            0.0,
            &vec![0.0; n],
            5.0,
            &grid,
            BoundaryMode::Outflow,
        )
        .unwrap();
        assert_eq!(c, out);
    }

    #[test]
    fn diffusion_conserves_mass_with_zero_flux() {
        let grid = small_grid();
        let n = grid.cell_count();
        let mut c = vec![0.0; n];
        c[grid.idx(10, 8)] = 100.0;
        let total0: f64 = c.iter().sum();
        let mut peak = 100.0;
        for _ in 0..50 {
            c = transport_smoke(
                &c,
                &vec![0.0; n],
                &vec![0.0; n],
                2.0,
                &vec![0.0; n],
                5.0,
                &grid,
                BoundaryMode::ZeroFlux,
            )
            .unwrap();
            let total: f64 = c.iter().sum();
            assert!(
                (total - total0).abs() <= 1e-10 * total0,
                "mass drifted to {total}"
            );
            let new_peak = c.iter().cloned().fold(0.0, f64::max);
            assert!(new_peak <= peak + 1e-12, "peak grew under pure diffusion");
            peak = new_peak;
        }
    }

    #[test]
    fn advected_blob_centroid_tracks_wind() {
        let grid = Grid2D {
            nx: 60,
            ny: 20,
            dx: 10.0,
            dy: 10.0,
        };
        let n = grid.cell_count();
        let mut c = vec![0.0; n];
        // Gaussian blob centered at x = 100 m.
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let x = (ix as f64 + 0.5) * grid.dx;
                let y = (iy as f64 + 0.5) * grid.dy;
                let d2 = (x - 100.0).powi(2) + (y - 100.0).powi(2);
                c[grid.idx(ix, iy)] = (-d2 / (2.0 * 20.0f64.powi(2))).exp();
            }
        }
        let u0 = 0.8;
        let centroid_x = |c: &[f64]| -> f64 {
            let mut num = 0.0;
            let mut den = 0.0;
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let x = (ix as f64 + 0.5) * grid.dx;
                    num += x * c[grid.idx(ix, iy)];
                    den += c[grid.idx(ix, iy)];
                }
            }
            num / den
        };
        let x0 = centroid_x(&c);
        let dt = 5.0;
        for _ in 0..50 {
            c = transport_smoke(
                &c,
                &vec![u0; n],
                &vec![0.0; n],
                0.0,
                &vec![0.0; n],
                dt,
                &grid,
                BoundaryMode::ZeroFlux,
            )
            .unwrap();
        }
        let drift = centroid_x(&c) - x0;
        let expected = u0 * dt * 50.0;
        assert!(
            (drift - expected).abs() <= grid.dx,
            "centroid drifted {drift} m, expected {expected} m"
        );
    }

    #[test]
    fn scenario_fields_monotone_and_positive() {
        let run = run_scenario_detailed(&basic_scenario(), 0).unwrap();
        assert_eq!(run.snapshots.len(), 4);
        for w in run.snapshots.windows(2) {
            for i in 0..w[0].time_since_ignition.len() {
                assert!(w[1].time_since_ignition[i] >= w[0].time_since_ignition[i]);
                assert!(w[1].cumulative_smoke[i] >= w[0].cumulative_smoke[i]);
                assert!(w[0].time_since_ignition[i] >= 0.0);
                assert!(w[0].cumulative_smoke[i] >= 0.0);
            }
        }
    }

    #[test]
    fn zero_emission_means_zero_smoke() {
        let mut scenario = basic_scenario();
        scenario.emission_factor = 0.0;
        let snaps = run_scenario(&scenario, 0).unwrap();
        for s in &snaps {
            assert!(s.cumulative_smoke.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn zero_spread_burns_only_the_initial_disk() {
        let mut scenario = basic_scenario();
        scenario.spread_rate = vec![0.0; scenario.grid.cell_count()];
        scenario.initial_radius = 4.0; // strictly inside one cell
        let run = run_scenario_detailed(&scenario, 0).unwrap();
        let burned: Vec<usize> = run
            .ignition_time
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_finite())
            .map(|(i, _)| i)
            .collect();
        assert_eq!(burned, vec![scenario.grid.idx(10, 8)]);
        let last = run.snapshots.last().unwrap();
        assert_eq!(last.time_since_ignition[scenario.grid.idx(10, 8)], last.t);
        // Smoke exists and stems from that single emitting cell.
        assert!(last.cumulative_smoke.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn mass_budget_closes_when_unvented() {
        let mut scenario = basic_scenario();
        scenario.boundary = BoundaryMode::ZeroFlux;
        let run = run_scenario_detailed(&scenario, 0).unwrap();
        let total: f64 = run.final_concentration.iter().sum();
        let expected = scenario.emission_factor * scenario.dt * run.burning_cell_steps as f64;
        assert!(
            (total - expected).abs() <= 1e-8 * expected,
            "mass {total} vs emitted {expected}"
        );
    }

    #[test]
    fn perturbation_changes_fields_deterministically() {
        let mut scenario = basic_scenario();
        scenario.perturbation = Some(Perturbation {
            spread_rel: 0.2,
            wind_abs: 0.1,
        });
        let a = run_scenario(&scenario, 7).unwrap();
        let b = run_scenario(&scenario, 7).unwrap();
        assert_eq!(a, b);
        let c = run_scenario(&scenario, 8).unwrap();
        assert_ne!(a, c);
    }

    /// Generator settings that satisfy every CFL bound on the 10 m test grid.
    fn small_config(n_fires: usize) -> GeneratorConfig {
        GeneratorConfig {
            grid: small_grid(),
            n_fires,
            n_steps: 40,
            checkpoint_every: 10,
            dt: 5.0,
            base_spread: 0.25,
            bump_amplitude: (0.02, 0.08),
            bump_radius: (30.0, 80.0),
            wind_coupling: 0.2,
            wind_speed: (0.2, 0.4),
            diffusivity: 1.5,
            ignition_margin: 0.3,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn dataset_bookkeeping_and_determinism() {
        let config = small_config(3);
        let (inputs, outputs) = generate_dataset(&config, 42).unwrap();
        assert_eq!(inputs.n_snapshots(), 12);
        assert_eq!(outputs.n_snapshots(), 12);
        assert_eq!(inputs.labels, outputs.labels);
        for (m, label) in inputs.labels.iter().enumerate() {
            assert_eq!(label.fire_id, (m / 4) as u64);
            assert_eq!(label.time_index, (m % 4) as u32);
        }
        let (i2, o2) = generate_dataset(&config, 42).unwrap();
        assert_eq!(inputs.data, i2.data);
        assert_eq!(outputs.data, o2.data);
        for (a, b) in inputs.data.iter().zip(i2.data.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let (i3, _) = generate_dataset(&config, 43).unwrap();
        assert_ne!(inputs.data, i3.data);
    }

    #[test]
    fn emission_multipliers_order_total_smoke() {
        let config = small_config(9);
        let (_, outputs) = generate_dataset(&config, 11).unwrap();
        let mut totals = std::collections::BTreeMap::<String, (f64, usize)>::new();
        for (m, label) in outputs.labels.iter().enumerate() {
            if label.time_index == 3 {
                let entry = totals.entry(label.condition.clone()).or_insert((0.0, 0));
                entry.0 += outputs.data.column(m).sum();
                entry.1 += 1;
            }
        }
        let mean = |name: &str| {
            let (sum, count) = totals[name];
            sum / count as f64
        };
        assert!(mean("low") < mean("medium"));
        assert!(mean("medium") < mean("high"));
    }
}
