//! Executes a prepared scenario and writes its result files.

use std::fs;
use std::path::{Path, PathBuf};

use hjqm_core::born::{self, TwoStateWeights};
use hjqm_core::hj_classical::{trace_scaled, RayConfig, RayTrace, SmoothingHistory};
use hjqm_core::madelung::{continuity_residual, decompose, exchange_defect, MadelungFields, DEFAULT_R_FLOOR};
use hjqm_core::multiverse::{equivariance_check, Advection, TrajectoryEnsemble};
use hjqm_core::tdse::{energy, Propagator};
use hjqm_core::uncertainty::{delta_limit_study, scaling_exponent, uncertainty_report};
use hjqm_core::{observables, Wavefunction};
use serde::Serialize;
use toml::Table;

use crate::config::{Evolution, Prepared};

#[derive(Debug)]
pub enum RunError {
    Numerical(hjqm_core::Error),
    Io(String),
}

impl From<hjqm_core::Error> for RunError {
    fn from(e: hjqm_core::Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv {
    writer: csv::Writer<fs::File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(dir.join(name))?;
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectories_flagged: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory_order_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_limit_exponent: Option<f64>,
}

#[derive(Serialize)]
struct CausticRecord {
    lambda: f64,
    formed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    location: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rays_involved: Option<[usize; 2]>,
}

#[derive(Serialize)]
struct CausticFile {
    caustic: Vec<CausticRecord>,
}

/// Runs everything the scenario asks for and writes the files into `out`,
/// creating the directory if needed. Returns the list of files written.
pub fn execute(prepared: &Prepared, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut summary = Summary::default();
    let analyses = &prepared.scenario.analyses;

    if let Some(ev) = &prepared.evolution {
        evolve(prepared, ev, out, &mut summary, &mut written)?;
    }
    if let Some(b) = &analyses.born {
        born_tables(b.p, &b.n, b.n_universes, prepared.scenario.seed, out, &mut written)?;
    }
    if let Some(d) = &analyses.delta_limit {
        let grid = prepared.grid.expect("validated");
        let physics = prepared.physics().expect("validated");
        let rows = delta_limit_study(grid, physics.hbar, physics.mass, &d.widths)?;
        let mut csv = Csv::create(out, "delta_limit.csv", &["sigma", "dx2", "dp2", "hj_quantum_term", "product"])?;
        for r in &rows {
            csv.row(&[num(r.sigma), num(r.dx2), num(r.dp2), num(r.hj_quantum_term), num(r.product)])?;
        }
        csv.finish()?;
        written.push(out.join("delta_limit.csv"));
        if rows.len() >= 2 {
            summary.delta_limit_exponent = Some(scaling_exponent(&rows)?);
        }
    }

    let mut manifest = Table::new();
    let mut versions = Table::new();
    versions.insert("hjqm_cli".into(), env!("CARGO_PKG_VERSION").into());
    versions.insert("hjqm_core".into(), hjqm_core::VERSION.into());
    manifest.insert("seed".into(), toml::Value::Integer(prepared.scenario.seed as i64));
    manifest.insert("versions".into(), versions.into());
    manifest.insert("scenario".into(), to_table(&prepared.scenario).into());
    manifest.insert("summary".into(), to_table(&summary).into());
    let path = out.join("manifest.toml");
    fs::write(&path, toml::to_string(&manifest).map_err(|e| RunError::Io(e.to_string()))?)?;
    written.insert(0, path);
    Ok(written)
}

fn to_table(value: &impl Serialize) -> Table {
    Table::try_from(value).expect("plain data serializes to a table")
}

fn fields(psi: &Wavefunction) -> Result<MadelungFields> {
    Ok(decompose(psi, DEFAULT_R_FLOOR)?)
}

fn evolve(prepared: &Prepared, ev: &Evolution, out: &Path, summary: &mut Summary, written: &mut Vec<PathBuf>) -> Result<()> {
    let a = &prepared.scenario.analyses;
    let one_d = ev.psi.grid().dimension() == 1;
    let scheme = ev.config.scheme;
    let (dt, every, steps) = (ev.config.dt, ev.config.steps_per_output, ev.steps);
    let smoothing_rays = a.classical_rays.as_ref().is_some_and(|r| r.lambda.iter().any(|&l| l > 0.0));
    let every_step = a.madelung || a.trajectories.is_some() || smoothing_rays;
    let mass = ev.psi.mass();

    let mut header = vec!["time", "norm_sq", "energy"];
    if one_d {
        header.extend(["mean_x", "mean_p", "var_x", "var_p"]);
    } else {
        header.extend(["symmetric_defect", "antisymmetric_defect"]);
    }
    if a.madelung {
        header.extend(["continuity_l2", "continuity_excluded"]);
    }
    if a.uncertainty {
        header.extend([
            "dx2",
            "dp2_spectral",
            "dp2_hj",
            "hj_drift_term",
            "hj_quantum_term",
            "parts_identity_gap",
            "excluded_measure",
            "product",
            "g_min_alpha",
            "g_min",
        ]);
    }
    let ks_column = a.trajectories.is_some_and(|t| t.count >= 1000);
    if a.trajectories.is_some() {
        header.push("flagged_paths");
    }
    if ks_column {
        header.push("ks_equivariance");
    }
    let mut series = Csv::create(out, "timeseries.csv", &header)?;

    let mut prop = Propagator::new(&ev.psi, &ev.potential, ev.config)?;
    let t0 = ev.psi.time;
    let mut cur = ev.psi.clone();
    let first = if every_step { Some(fields(&cur)?) } else { None };

    let mut history = smoothing_rays.then(|| SmoothingHistory::empty(*cur.grid()));
    let mut advection = match (&a.trajectories, &first) {
        (Some(t), Some(m)) => {
            let ens = TrajectoryEnsemble::sample(m, t.count, t.sampling, prepared.scenario.seed)?;
            Some(Advection::new(ens, m, mass, dt)?.with_record_stride(every))
        }
        _ => None,
    };
    if let (Some(h), Some(m)) = (&mut history, &first) {
        h.push(m)?;
    }

    // the first row's residual uses the first step, computed on a copy
    let first_residual = match (&first, a.madelung && steps > 0) {
        (Some(m), true) => {
            let mut probe = cur.clone();
            prop.advance(&mut probe)?;
            probe.time = t0 + dt;
            Some(continuity_residual(m, &fields(&probe)?, mass, dt)?)
        }
        _ => None,
    };

    let mut row = |psi: &Wavefunction, residual: Option<&hjqm_core::madelung::ContinuityResidual>, adv: Option<&Advection>, m: Option<&MadelungFields>| -> Result<()> {
        let mut cells = vec![num(psi.time), num(psi.norm_sq()), num(energy(psi, &ev.potential, scheme)?)];
        if one_d {
            let o = observables(psi)?;
            cells.extend([num(o.mean_x), num(o.mean_p), num(o.var_x), num(o.var_p)]);
        } else {
            let d = exchange_defect(psi)?;
            cells.extend([num(d.symmetric), num(d.antisymmetric)]);
        }
        if a.madelung {
            match residual {
                Some(r) => cells.extend([num(r.l2), r.excluded.to_string()]),
                None => cells.extend([String::new(), String::new()]),
            }
        }
        if a.uncertainty {
            let u = uncertainty_report(psi)?;
            cells.extend([
                num(u.dx2),
                num(u.dp2_spectral),
                num(u.dp2_hj),
                num(u.hj_drift_term),
                num(u.hj_quantum_term),
                num(u.parts_identity_gap),
                num(u.excluded_measure),
                num(u.product),
                num(u.g_min_alpha),
                num(u.g_min),
            ]);
        }
        if let Some(adv) = adv {
            cells.push(adv.ensemble().flagged_count().to_string());
            if ks_column {
                cells.push(num(equivariance_check(adv.ensemble(), m.expect("fields exist with trajectories"))?));
            }
        }
        series.row(&cells)
    };

    row(&cur, first_residual.as_ref(), advection.as_ref(), first.as_ref())?;
    let mut prev = first;
    for k in 1..=steps {
        prop.advance(&mut cur)?;
        cur.time = t0 + k as f64 * dt;
        let m = if every_step { Some(fields(&cur)?) } else { None };
        if let Some(m) = &m {
            if let Some(adv) = &mut advection {
                adv.push(m)?;
            }
            if let Some(h) = &mut history {
                h.push(m)?;
            }
        }
        if k % every == 0 || k == steps {
            let residual = match (&prev, &m, a.madelung) {
                (Some(p), Some(m), true) => Some(continuity_residual(p, m, mass, dt)?),
                _ => None,
            };
            row(&cur, residual.as_ref(), advection.as_ref(), m.as_ref())?;
        }
        prev = m;
    }
    series.finish()?;
    written.push(out.join("timeseries.csv"));
    summary.steps = Some(steps);
    summary.final_time = Some(cur.time);

    if let Some(adv) = advection {
        let ens = adv.finish();
        let mut csv = Csv::create(out, "trajectories.csv", &["time", "universe", "x", "flagged", "aborted"])?;
        for (j, &t) in ens.times.iter().enumerate() {
            for (i, path) in ens.paths.iter().enumerate() {
                csv.row(&[
                    num(t),
                    i.to_string(),
                    num(path[j]),
                    u8::from(ens.flagged[i]).to_string(),
                    u8::from(ens.aborted[i]).to_string(),
                ])?;
            }
        }
        csv.finish()?;
        written.push(out.join("trajectories.csv"));
        summary.trajectories_flagged = Some(ens.flagged_count());
        summary.trajectory_order_violations = Some(ens.order_violations.len());
    }

    if let Some(r) = &a.classical_rays {
        let m0 = fields(&ev.psi)?;
        let history = history.unwrap_or_else(|| SmoothingHistory::empty(*ev.psi.grid()));
        let mut cfg = RayConfig::new(dt, ev.t_final, r.n_rays);
        cfg.launch = r.launch;
        cfg.record_every = every;
        let mut csv = Csv::create(out, "rays.csv", &["lambda", "time", "ray", "x", "p", "jacobian_right"])?;
        let mut records = Vec::new();
        for &lambda in &r.lambda {
            let trace: RayTrace = if lambda == 0.0 {
                hjqm_core::hj_classical::trace_classical(&m0, &ev.potential, mass, cfg)?
            } else {
                trace_scaled(&m0, &ev.potential, mass, cfg, lambda, &history)?
            };
            for b in &trace.bundles {
                for i in 0..b.positions.len() {
                    csv.row(&[
                        num(lambda),
                        num(b.time),
                        i.to_string(),
                        num(b.positions[i]),
                        num(b.momenta[i]),
                        b.jacobian.get(i).map(|&j| num(j)).unwrap_or_default(),
                    ])?;
                }
            }
            let c = trace.caustic;
            records.push(CausticRecord {
                lambda,
                formed: c.formed,
                first_time: c.first_time,
                location: c.location,
                rays_involved: c.rays_involved.map(|(a, b)| [a, b]),
            });
        }
        csv.finish()?;
        written.push(out.join("rays.csv"));
        let path = out.join("caustic.toml");
        let text = toml::to_string(&CausticFile { caustic: records }).map_err(|e| RunError::Io(e.to_string()))?;
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(())
}

fn born_tables(p: f64, ns: &[usize], universes: usize, seed: u64, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let w = TwoStateWeights::new(p)?;
    let mut hist = Csv::create(out, "born_histogram.csv", &["N", "r", "f", "prob_exact", "count", "frequency"])?;
    let mut summary = Csv::create(
        out,
        "born_summary.csv",
        &["N", "p", "mean_f", "var_f", "var_f_exact", "var_ratio", "ks_distance", "tail_mass_0.05"],
    )?;
    for (i, &n) in ns.iter().enumerate() {
        let exact = born::branch_distribution(w, n)?;
        let sim = born::simulate_branching(w, n, universes, seed.wrapping_add(i as u64))?;
        for r in 0..=n {
            hist.row(&[
                n.to_string(),
                r.to_string(),
                num(r as f64 / n as f64),
                num(exact.probs[r]),
                sim.counts[r].to_string(),
                num(sim.counts[r] as f64 / universes as f64),
            ])?;
        }
        let pq = w.p() * w.q();
        summary.row(&[
            n.to_string(),
            num(p),
            num(sim.mean_f),
            num(sim.var_f),
            num(exact.var_f),
            if pq > 0.0 { num(sim.var_f * n as f64 / pq) } else { String::new() },
            num(sim.ks_distance),
            num(born::tail_mass(w, n, 0.05)?),
        ])?;
    }
    hist.finish()?;
    summary.finish()?;
    written.push(out.join("born_histogram.csv"));
    written.push(out.join("born_summary.csv"));
    Ok(())
}

