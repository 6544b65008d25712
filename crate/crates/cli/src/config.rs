//! Scenario files: strict TOML schema, dotted-key overrides, and validation
//! into ready-to-run core objects.

use std::fmt;

use hjqm_core::born::TwoStateWeights;
use hjqm_core::hj_classical::RayLaunch;
use hjqm_core::multiverse::Sampling;
use hjqm_core::states::{self, Exchange};
use hjqm_core::tdse::{step_count, Potential, PropagatorConfig, Scheme};
use hjqm_core::{Boundary, Grid, Wavefunction};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub physics: Option<Physics>,
    pub grid: Option<GridSpec>,
    pub initial: Option<StateSpec>,
    pub run: Option<RunSpec>,
    #[serde(default)]
    pub analyses: Analyses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub hbar: f64,
    pub mass: f64,
    #[serde(default = "free")]
    pub potential: Potential,
}

fn free() -> Potential {
    Potential::Free
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub dimension: usize,
    pub points: usize,
    pub length: f64,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
}

fn one() -> usize {
    1
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Gaussian {
        sigma0: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        p0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        focus_time: Option<f64>,
    },
    PlaneWave {
        p0: f64,
    },
    HarmonicEigenstate {
        n: usize,
        /// defaults to the harmonic potential's ω
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    BoxEigenstate {
        n: usize,
    },
    TwoParticle {
        first: Box<StateSpec>,
        second: Box<StateSpec>,
        exchange: Exchange,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one")]
    pub steps_per_output: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    #[serde(default)]
    pub madelung: bool,
    #[serde(default)]
    pub uncertainty: bool,
    pub trajectories: Option<TrajectorySpec>,
    pub classical_rays: Option<RaySpec>,
    pub born: Option<BornSpec>,
    pub delta_limit: Option<DeltaLimitSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub count: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    pub n_rays: usize,
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub launch: RayLaunch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornSpec {
    pub p: f64,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub n_universes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaLimitSpec {
    pub widths: Vec<f64>,
}

/// A rejected config: the dotted field path and the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalid {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn reject(field: impl Into<String>, reason: impl fmt::Display) -> Invalid {
    Invalid { field: field.into(), reason: reason.to_string().replace('\n', " ") }
}

/// Core errors raised while building objects for one config section.
fn core_error(section: &str) -> impl Fn(hjqm_core::Error) -> Invalid + '_ {
    move |e| match e {
        hjqm_core::Error::InvalidParameter { name, reason } => reject(format!("{section}.{name}"), reason),
        other => reject(section, other),
    }
}

/// Parses TOML text, applies `key=value` overrides to the tree and then
/// deserializes strictly.
pub fn parse(text: &str, overrides: &[String]) -> Result<Scenario, Invalid> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| reject("config", e.message()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    Scenario::deserialize(Value::Table(table)).map_err(|e| reject("config", e.message()))
}

fn apply_override(table: &mut Table, item: &str) -> Result<(), Invalid> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| reject("--override", format!("expected key=value, got `{item}`")))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(reject("--override", format!("malformed key `{key}`")));
    }
    // TOML literal if it parses as one, bare string otherwise
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for (depth, part) in parents.iter().enumerate() {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| reject(path[..=depth].join("."), "is not a table and cannot take sub-keys"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Time evolution ready to start.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub psi: Wavefunction,
    pub potential: Potential,
    pub config: PropagatorConfig,
    pub t_final: f64,
    pub steps: usize,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub grid: Option<Grid>,
    pub evolution: Option<Evolution>,
}

impl Prepared {
    pub fn physics(&self) -> Option<&Physics> {
        self.scenario.physics.as_ref()
    }
}

fn positive(field: &str, v: f64) -> Result<(), Invalid> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(reject(field, format!("must be positive, got {v}")))
    }
}

/// Checks every field and builds the grid, initial state and propagator.
pub fn prepare(scenario: Scenario) -> Result<Prepared, Invalid> {
    let s = &scenario;
    if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
        return Err(reject("name", "must be a non-empty identifier of [a-z0-9_]"));
    }
    if let Some(p) = &s.physics {
        positive("physics.hbar", p.hbar)?;
        positive("physics.mass", p.mass)?;
        p.potential.validate().map_err(core_error("physics.potential"))?;
    }
    let grid = match &s.grid {
        Some(g) => {
            if s.physics.is_none() {
                return Err(reject("physics", "required when a grid is given"));
            }
            Some(Grid::new(g.dimension, g.points, g.length, g.boundary).map_err(core_error("grid"))?)
        }
        None => None,
    };

    let evolution = match (&s.initial, &s.run) {
        (None, None) => None,
        (Some(_), None) => return Err(reject("run", "required when an initial state is given")),
        (None, Some(_)) => return Err(reject("initial", "required when a run section is given")),
        (Some(init), Some(run)) => {
            let grid = grid.ok_or_else(|| reject("grid", "required when an initial state is given"))?;
            let physics = s.physics.as_ref().expect("checked with the grid");
            Some(build_evolution(init, run, grid, physics)?)
        }
    };

    let a = &s.analyses;
    let needs_state = |field: &str| -> Result<&Evolution, Invalid> {
        evolution.as_ref().ok_or_else(|| reject(field, "needs an initial state and a run section"))
    };
    let needs_1d = |field: &str| -> Result<(), Invalid> {
        match grid {
            Some(g) if g.dimension() == 1 => Ok(()),
            _ => Err(reject(field, "needs a one-dimensional grid")),
        }
    };
    if a.madelung {
        needs_state("analyses.madelung")?;
    }
    if a.uncertainty {
        needs_state("analyses.uncertainty")?;
        needs_1d("analyses.uncertainty")?;
    }
    if let Some(t) = &a.trajectories {
        needs_state("analyses.trajectories")?;
        needs_1d("analyses.trajectories")?;
        if t.count == 0 {
            return Err(reject("analyses.trajectories.count", "must be positive"));
        }
    }
    if let Some(r) = &a.classical_rays {
        let ev = needs_state("analyses.classical_rays")?;
        needs_1d("analyses.classical_rays")?;
        if r.n_rays < 16 {
            return Err(reject("analyses.classical_rays.n_rays", format!("need at least 16 rays, got {}", r.n_rays)));
        }
        if r.lambda.is_empty() {
            return Err(reject("analyses.classical_rays.lambda", "list is empty"));
        }
        if let Some(l) = r.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(reject("analyses.classical_rays.lambda", format!("values must lie in [0, 1], got {l}")));
        }
        if matches!(ev.potential, Potential::Barrier { .. } | Potential::Custom { .. }) {
            return Err(reject("analyses.classical_rays", "rays need a differentiable closed-form potential"));
        }
    }
    if let Some(b) = &a.born {
        TwoStateWeights::new(b.p).map_err(core_error("analyses.born"))?;
        if b.n.is_empty() {
            return Err(reject("analyses.born.N", "list is empty"));
        }
        if let Some(n) = b.n.iter().find(|&&n| n == 0 || n > hjqm_core::born::MAX_MEASUREMENTS) {
            return Err(reject("analyses.born.N", format!("values must lie in 1..={}, got {n}", hjqm_core::born::MAX_MEASUREMENTS)));
        }
        if b.n_universes < 1000 {
            return Err(reject("analyses.born.n_universes", format!("must be at least 1000, got {}", b.n_universes)));
        }
    }
    if let Some(d) = &a.delta_limit {
        needs_1d("analyses.delta_limit")?;
        let g = grid.expect("checked above");
        if d.widths.is_empty() || d.widths.windows(2).any(|w| w[1] >= w[0]) {
            return Err(reject("analyses.delta_limit.widths", "must be a non-empty, strictly decreasing list"));
        }
        if let Some(w) = d.widths.iter().find(|&&w| w < 4.0 * g.spacing()) {
            return Err(reject(
                "analyses.delta_limit.widths",
                format!("σ = {w} is below the resolution floor 4h = {}", 4.0 * g.spacing()),
            ));
        }
    }
    Ok(Prepared { grid, evolution, scenario })
}

fn build_evolution(init: &StateSpec, run: &RunSpec, grid: Grid, physics: &Physics) -> Result<Evolution, Invalid> {
    positive("run.dt", run.dt)?;
    if !(run.t_final >= 0.0 && run.t_final.is_finite()) {
        return Err(reject("run.t_final", format!("must be non-negative, got {}", run.t_final)));
    }
    if run.steps_per_output == 0 {
        return Err(reject("run.steps_per_output", "must be positive"));
    }
    let steps = step_count(run.t_final, run.dt).map_err(core_error("run"))?;
    let config = PropagatorConfig::new(run.scheme, run.dt, run.steps_per_output);
    config.validate(&grid).map_err(|e| match e {
        hjqm_core::Error::NotSpectral { .. } => reject("run.scheme", format!("{e}; use crank_nicolson or a power-of-two periodic grid")),
        other => core_error("run")(other),
    })?;
    let psi = match init {
        StateSpec::TwoParticle { first, second, exchange } => {
            if grid.dimension() != 2 {
                return Err(reject("initial.kind", "two_particle needs grid.dimension = 2"));
            }
            let line = Grid::new(1, grid.points(), grid.length(), grid.boundary()).map_err(core_error("grid"))?;
            let a = single(first, line, physics, "initial.first")?;
            let b = single(second, line, physics, "initial.second")?;
            states::two_particle(grid, &a, &b, *exchange).map_err(core_error("initial"))?
        }
        other => {
            if grid.dimension() != 1 {
                return Err(reject("initial.kind", "single-particle states need grid.dimension = 1"));
            }
            single(other, grid, physics, "initial")?
        }
    };
    // V is sampled once here so tabulated potentials are checked against the grid
    physics.potential.evaluate(&grid, physics.mass, 0.0).map_err(core_error("physics.potential"))?;
    Ok(Evolution { psi, potential: physics.potential.clone(), config, t_final: run.t_final, steps })
}

fn single(spec: &StateSpec, grid: Grid, physics: &Physics, field: &str) -> Result<Wavefunction, Invalid> {
    let (hbar, mass) = (physics.hbar, physics.mass);
    let built = match *spec {
        StateSpec::Gaussian { sigma0, x0, p0, focus_time } => {
            positive(&format!("{field}.sigma0"), sigma0)?;
            states::chirped_gaussian(grid, hbar, mass, sigma0, x0, p0, focus_time)
        }
        StateSpec::PlaneWave { p0 } => states::plane_wave(grid, hbar, mass, p0),
        StateSpec::HarmonicEigenstate { n, omega } => {
            let omega = match (omega, &physics.potential) {
                (Some(w), _) => w,
                (None, Potential::Harmonic { omega }) => *omega,
                (None, _) => return Err(reject(format!("{field}.omega"), "required unless the potential is harmonic")),
            };
            positive(&format!("{field}.omega"), omega)?;
            states::harmonic_eigenstate(grid, hbar, mass, omega, n)
        }
        StateSpec::BoxEigenstate { n } => states::box_eigenstate(grid, hbar, mass, n),
        StateSpec::TwoParticle { .. } => return Err(reject(format!("{field}.kind"), "two_particle states cannot be nested")),
    };
    built.map_err(core_error(field))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
[physics]
hbar = 1.0
mass = 1.0
[grid]
points = 128
length = 20.0
[initial]
kind = "gaussian"
sigma0 = 1.0
[run]
scheme = "split_step_spectral"
dt = 0.01
t_final = 0.1
"#;

    fn check(text: &str, overrides: &[&str]) -> Result<Prepared, Invalid> {
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        prepare(parse(text, &overrides)?)
    }

    #[test]
    fn minimal_config_prepares() {
        let p = check(BASE, &[]).unwrap();
        assert_eq!(p.evolution.unwrap().steps, 10);
    }

    #[test]
    fn unknown_keys_are_fatal() {
        let e = check(&BASE.replace("sigma0", "sigma"), &[]).unwrap_err();
        assert_eq!(e.field, "config");
        assert!(e.reason.contains("sigma"), "{e}");
        let e = check(&format!("{BASE}\n[analyses]\nmadelun = true\n"), &[]).unwrap_err();
        assert!(e.reason.contains("madelun"));
    }

    #[test]
    fn negative_dt_names_the_field() {
        let e = check(BASE, &["run.dt=-0.01"]).unwrap_err();
        assert_eq!(e.field, "run.dt");
        assert!(!e.to_string().contains('\n'));
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let p = check(BASE, &["grid.points=256", "physics.potential.kind=harmonic", "physics.potential.omega=2.0"]).unwrap();
        assert_eq!(p.grid.unwrap().points(), 256);
        assert_eq!(p.evolution.unwrap().potential, Potential::Harmonic { omega: 2.0 });
        assert_eq!(check(BASE, &["name=other"]).unwrap().scenario.name, "other");
        assert!(check(BASE, &["name.x=1"]).is_err());
        assert!(check(BASE, &["nonsense"]).is_err());
    }

    #[test]
    fn analyses_are_checked_against_the_setup() {
        let e = check(BASE, &["analyses.classical_rays.n_rays=8", "analyses.classical_rays.lambda=[0.0]"]).unwrap_err();
        assert_eq!(e.field, "analyses.classical_rays.n_rays");
        let e = check(BASE, &["analyses.born.p=1.5", "analyses.born.N=[10]", "analyses.born.n_universes=1000"]).unwrap_err();
        assert_eq!(e.field, "analyses.born.p");
        let e = check(BASE, &["analyses.delta_limit.widths=[1.0, 0.1]"]).unwrap_err();
        assert_eq!(e.field, "analyses.delta_limit.widths");
        let e = check(BASE, &["run.scheme=\"split_step_spectral\"", "grid.points=100"]).unwrap_err();
        assert_eq!(e.field, "run.scheme");
    }

    #[test]
    fn born_only_scenarios_need_no_grid() {
        let text = "name = \"b\"\n[analyses.born]\np = 0.3\nN = [10]\nn_universes = 1000\n";
        let p = check(text, &[]).unwrap();
        assert!(p.evolution.is_none() && p.grid.is_none());
        assert!(check(text, &["analyses.madelung=true"]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let p = check(BASE, &["analyses.trajectories.count=10"]).unwrap();
        let text = toml::to_string(&p.scenario).unwrap();
        assert_eq!(parse(&text, &[]).unwrap(), p.scenario);
    }
}
