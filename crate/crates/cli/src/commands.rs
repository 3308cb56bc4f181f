//! Subcommand implementations. Each writes its files through [`Output`],
//! which records them in the manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;

use dkg_core::analysis::{energy, fit_decay, mass_sweep, monitor_dirac_l2, sup_series, SweepSetup};
use dkg_core::fields::{gaussian_data, Field, InitialData, ScalarField, SpinorField};
use dkg_core::gamma::{dirac_symbol, GammaSet, InteractionPair, Mat4};
use dkg_core::grid::Grid;
use dkg_core::io::{format_number, opt, read_series, write_csv, write_trajectory};
use dkg_core::picard::{iterate, SolutionMap};
use dkg_core::propagate::{DiracPropagatorPlan, KgPropagatorPlan, SourceSample};
use dkg_core::trajectory::{TimeGrid, Trajectory};
use dkg_core::vecfields::identity_suite;

use crate::config::{ConfigError, RunConfig};
use crate::manifest::{validate, FileEntry, Manifest, ManifestError, MANIFEST_NAME, MANIFEST_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] dkg_core::Error),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, field) = match self {
            CliError::Config(ConfigError::Field { field, .. }) => ("config", Some(field.clone())),
            CliError::Config(_) => ("config", None),
            CliError::Core(_) => ("numerics", None),
            CliError::Manifest(_) => ("manifest", None),
            CliError::Io(_) => ("io", None),
            CliError::Json(_) => ("json", None),
        };
        json!({ "error": { "kind": kind, "field": field, "message": self.to_string() } })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Output directory whose files end up in the manifest.
pub struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Output {
    /// Creates `dir`. Files of an earlier run listed in its manifest are
    /// removed unless `keep` is set, in which case they stay listed.
    pub fn new(dir: &Path, keep: bool) -> CliResult<Output> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        if let Ok(text) = std::fs::read_to_string(dir.join(MANIFEST_NAME)) {
            if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
                if keep {
                    files = old.files;
                } else {
                    for f in old.files {
                        let _ = std::fs::remove_file(dir.join(f.path));
                    }
                    std::fs::remove_file(dir.join(MANIFEST_NAME))?;
                }
            }
        }
        Ok(Output {
            dir: dir.to_path_buf(),
            files,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str, kind: &str) -> CliResult<()> {
        let bytes = std::fs::metadata(self.path(name))?.len();
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            kind: kind.to_string(),
            bytes,
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        write_csv(&self.path(name), header, rows)?;
        self.record(name, "csv")
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        std::fs::write(self.path(name), serde_json::to_string_pretty(value)? + "\n")?;
        self.record(name, "json")
    }

    /// Whitespace-separated `t value` lines.
    pub fn data(&mut self, name: &str, series: &[(f64, f64)]) -> CliResult<()> {
        let text: String = series
            .iter()
            .map(|(t, v)| format!("{} {}\n", format_number(*t), format_number(*v)))
            .collect();
        std::fs::write(self.path(name), text)?;
        self.record(name, "data")
    }

    pub fn trajectory<F: Field>(&mut self, name: &str, traj: &Trajectory<F>) -> CliResult<()> {
        write_trajectory(&self.path(name), traj)?;
        self.record(name, "field")
    }

    pub fn finish(
        self,
        command: &str,
        cfg: &RunConfig,
        times: Vec<f64>,
        interaction: Option<InteractionPair>,
    ) -> CliResult<PathBuf> {
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            config: cfg.clone(),
            grid: (cfg.grid.n, cfg.grid.half_length),
            times,
            masses: (cfg.masses.dirac, cfg.masses.kg),
            interaction,
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        validate(&self.dir)?;
        Ok(path)
    }
}

struct Setup {
    gamma: GammaSet,
    grid: Grid,
    pair: InteractionPair,
    data: InitialData,
    times: TimeGrid,
}

fn setup(cfg: &RunConfig) -> CliResult<Setup> {
    let gamma = GammaSet::standard();
    let grid = Grid::new(cfg.grid.n, cfg.grid.half_length)?;
    let pair = cfg.interaction_pair(&gamma)?;
    let data = gaussian_data(cfg.data.epsilon, cfg.data.sigma, &grid, cfg.data.seed)?;
    let times = TimeGrid::spanning(0.0, cfg.time.t_max, cfg.time.dt)?;
    Ok(Setup {
        gamma,
        grid,
        pair,
        data,
        times,
    })
}

fn num(x: f64) -> String {
    format_number(x)
}

/// Decay fit of a series on the configured window, if it has enough samples.
fn fit(series: &[(f64, f64)], window: (f64, f64)) -> Option<f64> {
    fit_decay(series, window).ok().map(|f| f.exponent)
}

pub fn check_algebra(cfg: &RunConfig) -> CliResult<serde_json::Value> {
    let gamma = GammaSet::standard();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.data.seed);
    let mut symbol = 0.0f64;
    for _ in 0..100 {
        let xi = [0; 4].map(|_| rng.gen_range(-5.0..5.0));
        let mass = rng.gen_range(0.0..1.0);
        let h = dirac_symbol(&gamma, xi, mass);
        let r2 = xi.iter().map(|x| x * x).sum::<f64>() + mass * mass;
        symbol = symbol.max((h * h - Mat4::identity().scale_re(r2)).max_abs());
    }
    let pair = cfg.interaction_pair(&gamma)?;
    let (f_defect, h_defect) = pair.validate(&gamma);
    let report = json!({
        "clifford_violation": gamma.clifford_violation(),
        "adjoint_violation": gamma.adjoint_violation(),
        "volume_form_violation": gamma.volume_form_violation(),
        "symbol_square_violation": symbol,
        "interaction_f_defect": f_defect,
        "interaction_h_defect": h_defect,
    });
    let mut out = Output::new(&cfg.out, false)?;
    out.json("algebra.json", &report)?;
    out.finish("check-algebra", cfg, Vec::new(), Some(pair))?;
    Ok(report)
}

pub fn verify_identities(cfg: &RunConfig) -> CliResult<serde_json::Value> {
    let gamma = GammaSet::standard();
    let mut rows = Vec::new();
    let mut worst = Vec::new();
    for &n in &cfg.identities.resolutions {
        let grid = Grid::new(n, cfg.identities.half_length)?;
        let residuals = identity_suite(&grid, &gamma, cfg.identities.time)?;
        let max = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
        worst.push(json!({ "n": n, "max_residual": max }));
        rows.extend(
            residuals
                .into_iter()
                .map(|r| vec![r.identity, r.n.to_string(), num(r.residual), num(r.seam_fraction)]),
        );
    }
    let mut out = Output::new(&cfg.out, false)?;
    out.csv("identities.csv", &["identity", "n", "residual", "seam_fraction"], &rows)?;
    let summary = json!({ "rows": rows.len(), "worst": worst });
    out.json("identities.json", &summary)?;
    out.finish("verify-identities", cfg, Vec::new(), None)?;
    Ok(summary)
}

pub fn evolve_linear(cfg: &RunConfig) -> CliResult<serde_json::Value> {
    let s = setup(cfg)?;
    let psi = DiracPropagatorPlan::new(&s.grid, cfg.masses.dirac, &s.gamma)?.evolve(&s.data.psi0, None, &s.times)?;
    let v = KgPropagatorPlan::new(&s.grid, cfg.masses.kg)?.evolve(&s.data.v0, &s.data.v1, None, &s.times)?;
    let zero: Vec<SourceSample<SpinorField>> = (0..psi.len())
        .map(|_| SourceSample {
            value: SpinorField::zeros(&s.grid),
            rate: SpinorField::zeros(&s.grid),
        })
        .collect();
    let monitor = monitor_dirac_l2(&psi, &zero)?;
    let energies: Vec<f64> = v
        .jets()
        .iter()
        .map(|j| energy(j.value(), &j.derivs[1], cfg.masses.kg))
        .collect();
    let rows: Vec<Vec<String>> = (0..psi.len())
        .map(|k| {
            vec![
                num(s.times.time(k)),
                num(psi.snapshot(k).l2_norm()),
                num(energies[k]),
                num(psi.snapshot(k).max_modulus()),
                num(v.snapshot(k).max_modulus()),
                num(monitor.slack[k]),
            ]
        })
        .collect();
    let rel = |xs: &[f64]| xs.iter().map(|x| (x - xs[0]).abs() / xs[0].max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    let l2: Vec<f64> = psi.values().map(Field::l2_norm).collect();
    let summary = json!({
        "dirac_l2_drift": rel(&l2),
        "kg_energy_drift": rel(&energies),
        "dirac_monitor_worst_slack": monitor.worst_slack,
    });
    let mut out = Output::new(&cfg.out, false)?;
    out.csv(
        "linear.csv",
        &["t", "psi_l2", "kg_energy", "psi_sup", "v_sup", "dirac_l2_slack"],
        &rows,
    )?;
    out.trajectory("psi.bin", &psi)?;
    out.trajectory("v.bin", &v)?;
    out.json("summary.json", &summary)?;
    out.finish("evolve-linear", cfg, s.times.times(), None)?;
    Ok(summary)
}

fn series_rows(psi: &[(f64, SpinorField)], v: &[(f64, ScalarField)]) -> Vec<Vec<String>> {
    psi.iter()
        .zip(v)
        .map(|((t, p), (_, u))| {
            vec![
                num(*t),
                num(p.l2_norm()),
                num(u.l2_norm()),
                num(p.max_modulus()),
                num(u.max_modulus()),
            ]
        })
        .collect()
}

const SERIES_HEADER: [&str; 5] = ["t", "psi_l2", "v_l2", "psi_sup", "v_sup"];

pub fn iterate_command(cfg: &RunConfig) -> CliResult<serde_json::Value> {
    let s = setup(cfg)?;
    let clock = Instant::now();
    let map = SolutionMap::new(s.data.clone(), s.pair, cfg.masses.dirac, cfg.masses.kg, &s.gamma, s.times)?;
    let state = iterate(&map, &cfg.x_norm, &cfg.iteration)?;
    let rows: Vec<Vec<String>> = state
        .records
        .iter()
        .map(|r| vec![r.step.to_string(), num(r.distance), opt(r.ratio)])
        .collect();
    let psi_sup = sup_series(&state.phi);
    let v_sup = sup_series(&state.u);
    let summary = json!({
        "converged": state.converged,
        "iterations": state.iterations(),
        "seed_norm": state.seed_norm,
        "first_norm": state.first_norm,
        "final_distance": state.records.last().map(|r| r.distance),
        "final_ratio": state.final_ratio(),
        "psi_decay": fit(&psi_sup, cfg.sweep.window),
        "v_decay": fit(&v_sup, cfg.sweep.window),
        "step_seconds": state.records.iter().map(|r| r.seconds).collect::<Vec<_>>(),
        "wall_seconds": clock.elapsed().as_secs_f64(),
    });
    let mut out = Output::new(&cfg.out, false)?;
    out.csv("iteration.csv", &["step", "distance", "ratio"], &rows)?;
    let psi: Vec<(f64, SpinorField)> = state.phi.jets().iter().map(|j| (j.time, j.value().clone())).collect();
    let v: Vec<(f64, ScalarField)> = state.u.jets().iter().map(|j| (j.time, j.value().clone())).collect();
    out.csv("series.csv", &SERIES_HEADER, &series_rows(&psi, &v))?;
    out.trajectory("psi.bin", &state.phi)?;
    out.trajectory("v.bin", &state.u)?;
    out.json("summary.json", &summary)?;
    out.finish("iterate", cfg, s.times.times(), Some(s.pair))?;
    Ok(summary)
}

pub fn sweep(cfg: &RunConfig) -> CliResult<serde_json::Value> {
    let s = setup(cfg)?;
    let clock = Instant::now();
    let sweep_setup = SweepSetup {
        data: &s.data,
        pair: s.pair,
        gamma: &s.gamma,
        times: s.times,
        norm: cfg.x_norm,
        iteration: cfg.iteration,
        window: cfg.sweep.window,
    };
    let table = mass_sweep(&sweep_setup, &cfg.sweep.dirac_masses, &cfg.sweep.kg_masses)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                num(r.dirac_mass),
                num(r.kg_mass),
                r.converged.to_string(),
                r.iterations.to_string(),
                num(r.x_norm),
                opt(r.ratio),
                opt(r.psi_decay),
                opt(r.v_decay),
                num(r.mass_weighted_sup),
                num(r.mass_weighted_bound),
                r.error.clone().unwrap_or_default().replace(',', ";"),
            ]
        })
        .collect();
    let ok: Vec<f64> = table.iter().filter(|r| r.error.is_none()).map(|r| r.x_norm).collect();
    let spread = if ok.is_empty() {
        None
    } else {
        let max = ok.iter().copied().fold(0.0, f64::max);
        let min = ok.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max / min)
    };
    let summary = json!({
        "rows": table.len(),
        "all_converged": table.iter().all(|r| r.converged),
        "x_norm_spread": spread,
        "max_mass_weighted_sup_over_epsilon": table.iter().map(|r| r.mass_weighted_sup / cfg.data.epsilon).fold(0.0, f64::max),
        "wall_seconds": clock.elapsed().as_secs_f64(),
    });
    let mut out = Output::new(&cfg.out, false)?;
    out.csv(
        "sweep.csv",
        &[
            "dirac_mass",
            "kg_mass",
            "converged",
            "iterations",
            "x_norm",
            "ratio",
            "psi_decay",
            "v_decay",
            "mass_weighted_sup",
            "mass_weighted_bound",
            "error",
        ],
        &rows,
    )?;
    out.json("summary.json", &summary)?;
    out.finish("sweep", cfg, s.times.times(), Some(s.pair))?;
    Ok(summary)
}

/// Re-renders series, decay data and fits from `psi.bin` and `v.bin` in
/// `input`, writing into the configured output directory.
pub fn report(cfg: &RunConfig, input: &Path) -> CliResult<serde_json::Value> {
    let psi: Vec<(f64, SpinorField)> = read_series(&input.join("psi.bin"))?;
    let v: Vec<(f64, ScalarField)> = read_series(&input.join("v.bin"))?;
    if psi.len() != v.len() || psi.iter().zip(&v).any(|(a, b)| a.0 != b.0) {
        return Err(dkg_core::Error::Format("psi.bin and v.bin hold different times".into()).into());
    }
    let psi_sup: Vec<(f64, f64)> = psi.iter().map(|(t, f)| (*t, f.max_modulus())).collect();
    let v_sup: Vec<(f64, f64)> = v.iter().map(|(t, f)| (*t, f.max_modulus())).collect();
    let gamma = GammaSet::standard();
    let pair = cfg.interaction_pair(&gamma)?;
    let summary = json!({
        "samples": psi.len(),
        "window": cfg.sweep.window,
        "psi_decay": fit(&psi_sup, cfg.sweep.window),
        "v_decay": fit(&v_sup, cfg.sweep.window),
        "final_psi_l2": psi.last().map(|p| p.1.l2_norm()),
        "final_v_l2": v.last().map(|p| p.1.l2_norm()),
    });
    let same = input.canonicalize().ok() == cfg.out.canonicalize().ok();
    let mut out = Output::new(&cfg.out, same)?;
    out.csv("series.csv", &SERIES_HEADER, &series_rows(&psi, &v))?;
    out.data("psi_sup.dat", &psi_sup)?;
    out.data("v_sup.dat", &v_sup)?;
    out.json("report.json", &summary)?;
    out.finish("report", cfg, psi.iter().map(|p| p.0).collect(), Some(pair))?;
    Ok(summary)
}
