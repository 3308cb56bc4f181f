//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Select criteria with `cargo test --test acceptance -- 1 5 9`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dkg_core::analysis::{energy, fit_decay, mass_sweep, monitor_dirac_l2, monitor_kg_energy, SweepSetup};
use dkg_core::fields::{gaussian_data, lebesgue_norm, Field, Norm, ScalarField, SpinorField};
use dkg_core::gamma::{dirac_symbol, GammaSet, InteractionPair, Mat4};
use dkg_core::grid::Grid;
use dkg_core::picard::{calibrate_epsilon, iterate, IterationConfig, SolutionMap, XNormConfig};
use dkg_core::propagate::{
    coupled_direct_observe, dirac_evolve, kg_evolve, Analytic, CoupledProblem, SeparableSource, SourceSample,
    TimeSource,
};
use dkg_core::trajectory::TimeGrid;
use dkg_core::vecfields::identity_suite;
use dkg_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const FLOOR: f64 = 1e-12;

fn bump(grid: &Grid, c: [f64; 4], w: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
    })
}

fn random_bump(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let c = [0; 4].map(|_| rng.gen_range(-1.0..1.0));
    bump(grid, c, rng.gen_range(0.8..1.4))
}

fn scalar_source(grid: &Grid, rng: &mut ChaCha8Rng) -> SeparableSource<ScalarField> {
    let mut s = SeparableSource::new();
    for _ in 0..rng.gen_range(2..=3) {
        let p = random_bump(grid, rng).scaled(rng.gen_range(-1.0..1.0));
        s = s.with_term(p, rng.gen_range(0.0..3.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    s
}

fn spinor_source(grid: &Grid, rng: &mut ChaCha8Rng) -> SeparableSource<SpinorField> {
    let mut s = SeparableSource::new();
    for _ in 0..rng.gen_range(2..=3) {
        let b = random_bump(grid, rng);
        let w = [0; 4].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let p = SpinorField::from_values(grid, b.values().iter().map(|&g| w.map(|z| z * g)).collect()).unwrap();
        s = s.with_term(p, rng.gen_range(0.0..3.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    s
}

fn samples<F: Field>(source: &dyn TimeSource<F>, times: &TimeGrid) -> Vec<SourceSample<F>> {
    times
        .times()
        .into_iter()
        .map(|t| SourceSample {
            value: source.value(t),
            rate: source.rate(t),
        })
        .collect()
}

fn relative_l2<F: Field>(a: &F, b: &F) -> f64 {
    a.difference(b).l2_norm() / b.l2_norm()
}

fn within(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

fn algebra() -> Outcome {
    let clock = Instant::now();
    let gamma = GammaSet::standard();
    let clifford = gamma.clifford_violation();
    let adjoint = gamma.adjoint_violation();
    let volume = gamma.volume_form_violation();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut symbol = 0.0f64;
    for _ in 0..100 {
        let xi = [0; 4].map(|_| rng.gen_range(-3.0..3.0));
        let mass: f64 = rng.gen_range(0.0..1.0);
        let h = dirac_symbol(&gamma, xi, mass);
        let r2 = xi.iter().map(|x| x * x).sum::<f64>() + mass * mass;
        symbol = symbol.max((h * h - Mat4::identity().scale_re(r2)).max_abs());
    }
    let elapsed = clock.elapsed();
    Ok((
        clifford <= 1e-14 && adjoint == 0.0 && volume == 0.0 && symbol <= 1e-12 && within(elapsed, Duration::from_secs(1)),
        format!("clifford {clifford:e}, adjoint {adjoint:e}, symbol {symbol:e}, {elapsed:.2?}"),
    ))
}

fn conservation() -> Outcome {
    let clock = Instant::now();
    let grid = Grid::new(16, 8.0)?;
    let gamma = GammaSet::standard();
    let data = gaussian_data(1.0, 1.0, &grid, 3)?;
    let times = TimeGrid::new(0.0, 0.25, 24)?;
    let psi = dirac_evolve(&data.psi0, None, 0.5, &gamma, &times)?;
    let v = kg_evolve(&data.v0, &data.v1, None, 0.5, &times)?;
    let l2: Vec<f64> = psi.values().map(Field::l2_norm).collect();
    let e: Vec<f64> = v.jets().iter().map(|j| energy(&j.derivs[0], &j.derivs[1], 0.5)).collect();
    let drift = |q: &[f64]| q.iter().map(|x| (x - q[0]).abs() / q[0]).fold(0.0, f64::max);
    let (dl, de) = (drift(&l2), drift(&e));
    let elapsed = clock.elapsed();
    Ok((
        dl <= 1e-10 && de <= 1e-10 && within(elapsed, Duration::from_secs(60)),
        format!("Dirac L2 drift {dl:e}, KG energy drift {de:e}, {elapsed:.2?}"),
    ))
}

fn constant_one() -> Outcome {
    let clock = Instant::now();
    let grid = Grid::new(16, 8.0)?;
    let gamma = GammaSet::standard();
    let times = TimeGrid::new(0.0, 1.0 / 64.0, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut dirac, mut kg) = (f64::INFINITY, f64::INFINITY);
    for run in 0..20 {
        let data = gaussian_data(rng.gen_range(0.1..1.0), 1.0, &grid, run)?;
        let ds = spinor_source(&grid, &mut rng);
        let ks = scalar_source(&grid, &mut rng);
        let (dm, km) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let psi = dirac_evolve(&data.psi0, Some(&Analytic(&ds)), dm, &gamma, &times)?;
        dirac = dirac.min(monitor_dirac_l2(&psi, &samples(&ds, &times))?.worst_slack);
        let v = kg_evolve(&data.v0, &data.v1, Some(&Analytic(&ks)), km, &times)?;
        kg = kg.min(monitor_kg_energy(&v, &samples(&ks, &times), km)?.worst_slack);
    }
    let elapsed = clock.elapsed();
    Ok((
        dirac >= -1e-8 && kg >= -1e-8 && within(elapsed, Duration::from_secs(600)),
        format!("worst slack Dirac {dirac:e}, KG energy {kg:e} over 20 runs each, {elapsed:.2?}"),
    ))
}

fn oracle_equivalence() -> Outcome {
    let clock = Instant::now();
    let grid = Grid::new(16, 8.0)?;
    let gamma = GammaSet::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = gaussian_data(1.0, 1.0, &grid, 2)?;
    let ds = spinor_source(&grid, &mut rng);
    let ks = scalar_source(&grid, &mut rng);
    let times = TimeGrid::new(0.0, 1.0 / 16.0, 16)?;
    let psi = dirac_evolve(&data.psi0, Some(&Analytic(&ds)), 0.4, &gamma, &times)?;
    let v = kg_evolve(&data.v0, &data.v1, Some(&Analytic(&ks)), 0.7, &times)?;
    let mut problem = CoupledProblem::new(&gamma, InteractionPair::decoupled(), 0.4, 0.7);
    problem.dirac_source = Some(&ds);
    problem.kg_source = Some(&ks);
    let mut linear = 0.0f64;
    coupled_direct_observe(problem, &data, &times, 1.0 / 64.0, |k, _, p, _, u, _, _| {
        linear = linear
            .max(relative_l2(psi.snapshot(k), p))
            .max(relative_l2(v.snapshot(k), u));
    })?;

    let data = gaussian_data(0.01, 1.0, &grid, 1)?;
    let pair = InteractionPair::identity_gamma0(&gamma);
    let times = TimeGrid::new(0.0, 0.25, 16)?;
    let map = SolutionMap::new(data.clone(), pair, 0.5, 0.5, &gamma, times)?;
    let state = iterate(&map, &XNormConfig::default(), &IterationConfig { tol: 1e-10, max_iter: 10, ball_cap: None })?;
    let mut nonlinear = (f64::NAN, f64::NAN);
    coupled_direct_observe(CoupledProblem::new(&gamma, pair, 0.5, 0.5), &data, &times, 1.0 / 32.0, |k, _, p, _, u, _, _| {
        if k == times.steps {
            nonlinear = (relative_l2(state.phi.snapshot(k), p), relative_l2(state.u.snapshot(k), u));
        }
    })?;
    let elapsed = clock.elapsed();
    Ok((
        linear <= 1e-6
            && state.converged
            && nonlinear.0 <= 1e-4
            && nonlinear.1 <= 1e-4
            && within(elapsed, Duration::from_secs(1800)),
        format!(
            "linear {linear:e}; Picard ({} steps) vs oracle at t=4: psi {:e}, v {:e}; {elapsed:.2?}",
            state.iterations(),
            nonlinear.0,
            nonlinear.1
        ),
    ))
}

fn identities() -> Outcome {
    let clock = Instant::now();
    let gamma = GammaSet::standard();
    let coarse = identity_suite(&Grid::new(16, 8.0)?, &gamma, 0.5)?;
    let fine = identity_suite(&Grid::new(32, 8.0)?, &gamma, 0.5)?;
    let mut worst = 0.0f64;
    let mut weakest = f64::INFINITY;
    let mut failures = Vec::new();
    for (a, b) in coarse.iter().zip(&fine) {
        worst = worst.max(b.residual);
        let at_floor = a.residual <= FLOOR || b.residual <= FLOOR;
        if !at_floor {
            weakest = weakest.min(a.residual / b.residual);
        }
        if b.residual > 1e-8 || !(at_floor || a.residual / b.residual >= 100.0) {
            failures.push(b.identity.clone());
        }
    }
    let elapsed = clock.elapsed();
    Ok((
        failures.is_empty() && coarse.len() == fine.len() && within(elapsed, Duration::from_secs(600)),
        format!(
            "{} identities, worst n=32 residual {worst:e}, smallest reduction {weakest:.3e}, failing {failures:?}, {elapsed:.2?}",
            fine.len()
        ),
    ))
}

fn contraction() -> Outcome {
    let clock = Instant::now();
    let grid = Grid::new(16, 8.0)?;
    let gamma = GammaSet::standard();
    let pair = InteractionPair::identity_gamma0(&gamma);
    let times = TimeGrid::new(0.0, 0.25, 16)?;
    let cfg = XNormConfig::default();
    let build = |eps: f64| SolutionMap::new(gaussian_data(eps, 1.0, &grid, 1)?, pair, 0.5, 0.5, &gamma, times);
    let cal = calibrate_epsilon(build, &cfg, 0.5, 0.5, 0.1, 10)?;
    let mut all_below = true;
    let mut scaled = Vec::new();
    let mut detail = format!("eps0 {:.4} (first ratio {:.3})", cal.epsilon, cal.ratio);
    for div in [1.0, 2.0, 4.0] {
        let eps = cal.epsilon / div;
        let state = iterate(&build(eps)?, &cfg, &IterationConfig { tol: 1e-14, max_iter: 4, ball_cap: None })?;
        let ratios = state.ratios();
        all_below &= !ratios.is_empty() && ratios.iter().all(|&r| r < 1.0);
        let stable = state.final_ratio().unwrap_or(f64::NAN);
        scaled.push(stable / eps);
        detail += &format!("; eps {eps:.4}: ratios {:?}", ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>());
    }
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let elapsed = clock.elapsed();
    Ok((
        all_below && spread <= 2.0 && within(elapsed, Duration::from_secs(3600 + 1800)),
        format!("{detail}; (ratio/eps) spread {spread:.3}; {elapsed:.2?}"),
    ))
}

fn uniform_in_mass() -> Outcome {
    let clock = Instant::now();
    let grid = Grid::new(16, 8.0)?;
    let gamma = GammaSet::standard();
    let eps = 0.01;
    let data = gaussian_data(eps, 1.0, &grid, 1)?;
    let setup = SweepSetup {
        data: &data,
        pair: InteractionPair::identity_gamma0(&gamma),
        gamma: &gamma,
        times: TimeGrid::new(0.0, 0.25, 16)?,
        norm: XNormConfig::default(),
        iteration: IterationConfig { tol: 1e-7, max_iter: 20, ball_cap: None },
        window: (2.0, 4.0),
    };
    let lattice = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows = mass_sweep(&setup, &lattice, &lattice)?;
    let converged = rows.iter().filter(|r| r.converged).count();
    let norms: Vec<f64> = rows.iter().map(|r| r.x_norm).collect();
    let spread = norms.iter().cloned().fold(0.0, f64::max) / norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = rows.iter().map(|r| r.mass_weighted_bound).fold(0.0, f64::max) / eps;
    let sup = rows.iter().map(|r| r.mass_weighted_sup).fold(0.0, f64::max);
    let elapsed = clock.elapsed();
    Ok((
        converged == rows.len() && rows.len() == 25 && spread <= 2.0 && sup <= c * eps && within(elapsed, Duration::from_secs(4 * 3600)),
        format!(
            "{converged}/{} converged, X-norm spread {spread:.3}, max m sup|v| {sup:e} <= C eps with C = {c:.4}, {elapsed:.2?}",
            rows.len()
        ),
    ))
}

fn decay() -> Outcome {
    let clock = Instant::now();
    let grid = Grid::new(32, 10.0)?;
    let gamma = GammaSet::standard();
    let data = gaussian_data(0.01, 1.0, &grid, 1)?;
    let times = TimeGrid::new(0.0, 0.25, 24)?;
    let (mut psi, mut v) = (Vec::new(), Vec::new());
    let problem = CoupledProblem::new(&gamma, InteractionPair::identity_gamma0(&gamma), 0.0, 0.0);
    coupled_direct_observe(problem, &data, &times, 1.0 / 16.0, |_, t, p, _, u, _, _| {
        psi.push((t, lebesgue_norm(p, Norm::Inf)));
        v.push((t, lebesgue_norm(u, Norm::Inf)));
    })?;
    let fp = fit_decay(&psi, (2.0, 6.0))?;
    let fv = fit_decay(&v, (2.0, 6.0))?;
    let elapsed = clock.elapsed();
    Ok((
        fp.exponent <= -1.1 && fv.exponent <= -0.9,
        format!(
            "max|psi| exponent {:.3} (<= -1.1), max|v| exponent {:.3} (<= -0.9), soft, {elapsed:.2?}",
            fp.exponent, fv.exponent
        ),
    ))
}

fn csv_files(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path)?));
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let clock = Instant::now();
    let dir = tempfile::tempdir()?;
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_dkg"))
            .args(["iterate", "--out"])
            .arg(&out)
            .args(["--override", "time.t_max=2"])
            .output()?;
        if !status.status.success() {
            return Ok((false, String::from_utf8_lossy(&status.stderr).into_owned()));
        }
        outputs.push(csv_files(&out)?);
    }
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    Ok((
        !outputs[0].is_empty() && outputs[0] == outputs[1],
        format!("{names:?} identical across two runs, {:.2?}", clock.elapsed()),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Clifford algebra", algebra),
        ("free conservation", conservation),
        ("constant-one inequalities", constant_one),
        ("oracle equivalence", oracle_equivalence),
        ("identity suite", identities),
        ("contraction", contraction),
        ("uniform in mass", uniform_in_mass),
        ("decay fits", decay),
        ("determinism", determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("criterion {id} {name}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
