//! Stages behind the CLI: simulate → invert → reconstruct → score, each
//! writing its artifacts and a manifest into an output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::carleman::{carleman_diagnostic, write_diagnostic_csv, DiagnosticRow};
use crate::config::{validate_config, NoiseStage, RunConfig};
use crate::driver::{iterate, RunHistory, StopReason};
use crate::elliptic::{EllipticSystem, FourierField, NonlinearTerm};
use crate::error::{Error, Result};
use crate::forward::{
    add_noise, add_noise_projected, make_phantom, project_cauchy, solve_wave_observed, BoundaryVectors, PhantomKind,
    Potential, TraceRecorder, WaveProblem,
};
use crate::io::{load_field, load_grid, read_grid_csv, save_field, save_grid, write_grid_csv, Dataset, Manifest};
use crate::reconstruct::{compute_c, score, Metrics};
use crate::time_basis::{build_basis_with, TimeBasis};

/// Output of the forward stage for one phantom.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub dataset: Dataset,
    /// Projections before noise.
    pub clean: BoundaryVectors<f64>,
    /// The phantom on `Ω`.
    pub truth: Potential<f64>,
}

pub fn build_basis_for(config: &RunConfig) -> Result<TimeBasis<f64>> {
    build_basis_with(config.basis.modes, config.time_grid()?, config.arithmetic()?)
}

/// Forward run on `G`, traces on `∂Ω`, projection and noise.
pub fn simulate(config: &RunConfig, basis: &TimeBasis<f64>, phantom: &PhantomKind) -> Result<Simulation> {
    let omega = config.omega()?;
    let outer = config.outer()?;
    let time = config.time_grid()?;
    let f = config.nonlinearity()?;
    let p = config.initial();
    let potential = make_phantom(phantom, &outer)?;
    let truth = make_phantom(phantom, &omega)?;
    let mut recorder = TraceRecorder::new(&outer, &omega)?;
    let problem = WaveProblem {
        grid: &outer,
        time: &time,
        potential: &potential.values,
        nonlinearity: &f,
        initial: &p,
        start: config.start_rule()?,
    };
    solve_wave_observed(&problem, |_, u| recorder.record(u))?;
    let series = recorder.finish(time)?;
    let clean = project_cauchy(&series, basis)?;
    let (level, seed) = (config.noise.level, config.noise.seed);
    let (series, vectors) = match config.noise_stage()? {
        NoiseStage::Series => {
            let noisy = add_noise(&series, level, seed)?;
            let vectors = project_cauchy(&noisy, basis)?;
            (noisy, vectors)
        }
        NoiseStage::Projected => {
            let vectors = add_noise_projected(&clean, level, seed)?;
            (series, vectors)
        }
    };
    Ok(Simulation {
        dataset: Dataset {
            seed,
            level,
            series,
            vectors,
        },
        clean,
        truth,
    })
}

/// The assembled and factored system plus the nonlinear term; independent of
/// the data, so one setup serves every phantom and noise level.
pub struct Inversion {
    pub system: EllipticSystem<f64>,
    pub term: NonlinearTerm<f64>,
    pub norm_weights: Vec<f64>,
}

impl Inversion {
    pub fn new(config: &RunConfig, basis: &TimeBasis<f64>) -> Result<Self> {
        let omega = config.omega()?;
        let weight = config.weight();
        let system = EllipticSystem::with_carleman(
            &omega,
            basis.stiffness(),
            &weight,
            config.solver.epsilon,
            config.backend()?,
        )?;
        let term = NonlinearTerm::new(&omega, basis, &config.nonlinearity()?, &config.initial())?;
        Ok(Self {
            system,
            term,
            norm_weights: weight.sample(&omega),
        })
    }

    /// Same system with another nonlinearity.
    pub fn with_nonlinearity(mut self, config: &RunConfig, basis: &TimeBasis<f64>) -> Result<Self> {
        self.term = NonlinearTerm::new(self.system.grid(), basis, &config.nonlinearity()?, &config.initial())?;
        Ok(self)
    }

    pub fn run(
        &self,
        config: &RunConfig,
        data: &BoundaryVectors<f64>,
        observer: impl FnMut(usize, &FourierField<f64>),
    ) -> Result<RunHistory<f64>> {
        iterate(
            &self.system,
            &self.term,
            data,
            &self.norm_weights,
            config.cutoff_factor(),
            &config.stop_rule(),
            observer,
        )
    }
}

/// Raw and clipped `c_comp`.
pub fn reconstruct(config: &RunConfig, basis: &TimeBasis<f64>, field: &FourierField<f64>) -> Result<(Potential<f64>, Potential<f64>)> {
    let f = config.nonlinearity()?;
    let p = config.initial();
    Ok((compute_c(field, basis, &p, &f, false)?, compute_c(field, basis, &p, &f, true)?))
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn csv_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn save_potential(p: &Potential<f64>, dir: &Path, stem: &str, manifest: &mut Manifest) -> Result<()> {
    save_grid(p, &dir.join(format!("{stem}.bin")))?;
    write_grid_csv(p, csv_file(dir, &format!("{stem}.csv"))?)?;
    manifest.add_output(dir, &format!("{stem}.bin"))?;
    manifest.add_output(dir, &format!("{stem}.csv"))
}

/// Reads a grid from `.bin` or `.csv` by extension.
pub fn load_potential(path: &Path) -> Result<Potential<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_grid_csv(File::open(path)?),
        _ => load_grid(path),
    }
}

pub const DATASET_FILE: &str = "dataset.bin";
pub const TRUTH_STEM: &str = "c_true";
pub const FIELD_FILE: &str = "u_comp.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const SOLVER_FILE: &str = "solver.csv";
pub const RAW_STEM: &str = "c_comp";
pub const CLIPPED_STEM: &str = "c_comp_clipped";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CARLEMAN_FILE: &str = "carleman.csv";

fn write_simulation(sim: &Simulation, out: &Path, manifest: &mut Manifest) -> Result<()> {
    sim.dataset.save(&out.join(DATASET_FILE))?;
    manifest.add_output(out, DATASET_FILE)?;
    sim.dataset.write_series_csv(csv_file(out, "dataset_series.csv")?)?;
    manifest.add_output(out, "dataset_series.csv")?;
    sim.dataset.write_projected_csv(csv_file(out, "dataset_projected.csv")?)?;
    manifest.add_output(out, "dataset_projected.csv")?;
    save_potential(&sim.truth, out, TRUTH_STEM, manifest)
}

/// `simulate`: one dataset per configured phantom, in `out/<phantom>/` when
/// more than one is listed.
pub fn stage_simulate(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    validate_config(config).into_result()?;
    let basis = build_basis_for(config)?;
    let mut dirs = Vec::new();
    for (kind, dir) in phantom_dirs(config, out)? {
        create_dir(&dir)?;
        let mut manifest = Manifest::new("simulate", Some(config.clone()));
        manifest.results.insert("phantom".into(), kind.tag().into());
        manifest.save(&dir)?;
        let sim = simulate(config, &basis, &kind)?;
        write_simulation(&sim, &dir, &mut manifest)?;
        manifest.complete = true;
        manifest.save(&dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

fn phantom_dirs(config: &RunConfig, out: &Path) -> Result<Vec<(PhantomKind, PathBuf)>> {
    let kinds = config.phantoms()?;
    let single = kinds.len() == 1;
    Ok(kinds
        .into_iter()
        .map(|k| {
            let dir = if single { out.to_path_buf() } else { out.join(k.tag()) };
            (k, dir)
        })
        .collect())
}

fn check_dataset(config: &RunConfig, dataset: &Dataset) -> Result<()> {
    let omega = config.omega()?;
    let time = config.time_grid()?;
    if dataset.grid() != &omega || dataset.time() != &time || dataset.modes() != config.basis.modes {
        return Err(Error::GridMismatch(format!(
            "dataset has {} nodes, {} intervals, N = {}; configuration expects {}, {}, {}",
            dataset.grid().nodes(),
            dataset.time().intervals(),
            dataset.modes(),
            omega.nodes(),
            time.intervals(),
            config.basis.modes
        )));
    }
    Ok(())
}

fn write_solver_csv(history: &RunHistory<f64>, dir: &Path, inversion: &Inversion) -> Result<()> {
    let mut w = csv::Writer::from_writer(csv_file(dir, SOLVER_FILE)?);
    w.write_record(["k [1]", "unknowns [count]", "nonzeros [count]", "iterations [count]", "relative_residual [1]"])?;
    for r in &history.records {
        w.write_record([
            r.k.to_string(),
            inversion.system.unknowns().to_string(),
            inversion.system.nonzeros().to_string(),
            r.solve.iterations.to_string(),
            format!("{:.6e}", r.solve.relative_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the iteration on `dataset` and writes history, solver log, the final
/// field and optional checkpoints. A diverged run leaves its partial
/// artifacts behind with `complete = false` and returns the error.
pub fn invert_into(
    config: &RunConfig,
    inversion: &Inversion,
    dataset: &Dataset,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<RunHistory<f64>> {
    check_dataset(config, dataset)?;
    let every = config.run.checkpoint_every;
    let mut checkpoint_error = None;
    let mut checkpoints = Vec::new();
    let history = inversion.run(config, &dataset.vectors, |k, u| {
        if every > 0 && k % every == 0 && checkpoint_error.is_none() {
            let name = format!("u_{k:03}.bin");
            match save_field(u, &dir.join(&name)) {
                Ok(()) => checkpoints.push(name),
                Err(e) => checkpoint_error = Some(e),
            }
        }
    })?;
    if let Some(e) = checkpoint_error {
        return Err(e);
    }
    for name in &checkpoints {
        manifest.add_output(dir, name)?;
    }
    history.write_csv(csv_file(dir, HISTORY_FILE)?)?;
    manifest.add_output(dir, HISTORY_FILE)?;
    write_solver_csv(&history, dir, inversion)?;
    manifest.add_output(dir, SOLVER_FILE)?;
    save_field(&history.final_field, &dir.join(FIELD_FILE))?;
    manifest.add_output(dir, FIELD_FILE)?;
    manifest.results.insert("stop".into(), history.stop.tag().into());
    if let Some(last) = history.records.last() {
        manifest.results.insert("iterations".into(), last.k.to_string());
        manifest.results.insert("final_cost".into(), format!("{:.6e}", last.cost));
    }
    if let StopReason::Diverged { .. } = history.stop {
        manifest.save(dir)?;
        return history.into_result();
    }
    Ok(history)
}

/// `invert`: reads `dataset.bin`, writes into `out`.
pub fn stage_invert(config: &RunConfig, dataset_path: &Path, out: &Path) -> Result<RunHistory<f64>> {
    validate_config(config).into_result()?;
    create_dir(out)?;
    let mut manifest = Manifest::new("invert", Some(config.clone()));
    manifest.add_input(dataset_path)?;
    manifest.save(out)?;
    let dataset = Dataset::load(dataset_path)?;
    let basis = build_basis_for(config)?;
    let inversion = Inversion::new(config, &basis)?;
    let history = invert_into(config, &inversion, &dataset, out, &mut manifest)?;
    manifest.complete = true;
    manifest.save(out)?;
    Ok(history)
}

fn reconstruct_into(
    config: &RunConfig,
    basis: &TimeBasis<f64>,
    field: &FourierField<f64>,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<(Potential<f64>, Potential<f64>)> {
    let (raw, clipped) = reconstruct(config, basis, field)?;
    save_potential(&raw, dir, RAW_STEM, manifest)?;
    save_potential(&clipped, dir, CLIPPED_STEM, manifest)?;
    Ok((raw, clipped))
}

/// `reconstruct`: `c_comp` (raw and clipped at 0) from a saved field.
pub fn stage_reconstruct(config: &RunConfig, field_path: &Path, out: &Path) -> Result<(Potential<f64>, Potential<f64>)> {
    create_dir(out)?;
    let mut manifest = Manifest::new("reconstruct", Some(config.clone()));
    manifest.add_input(field_path)?;
    manifest.save(out)?;
    let field = load_field(field_path)?;
    if field.grid() != &config.omega()? {
        return Err(Error::GridMismatch("field grid differs from the configured Ω".into()));
    }
    let basis = build_basis_for(config)?;
    let result = reconstruct_into(config, &basis, &field, out, &mut manifest)?;
    manifest.complete = true;
    manifest.save(out)?;
    Ok(result)
}

fn score_into(computed: &Potential<f64>, truth: &Potential<f64>, dir: &Path, manifest: &mut Manifest) -> Result<Metrics> {
    let metrics = score(computed, truth)?;
    metrics.write_csv(csv_file(dir, METRICS_FILE)?)?;
    manifest.add_output(dir, METRICS_FILE)?;
    manifest.results.insert("relative_l2".into(), format!("{:.6e}", metrics.relative_l2));
    manifest.results.insert("support_score".into(), format!("{:.6e}", metrics.min_component_score()));
    Ok(metrics)
}

/// `score`: compares two grids (`.bin` or `.csv`).
pub fn stage_score(computed_path: &Path, truth_path: &Path, out: &Path) -> Result<Metrics> {
    create_dir(out)?;
    let mut manifest = Manifest::new("score", None);
    manifest.add_input(computed_path)?;
    manifest.add_input(truth_path)?;
    manifest.save(out)?;
    let metrics = score_into(&load_potential(computed_path)?, &load_potential(truth_path)?, out, &mut manifest)?;
    manifest.complete = true;
    manifest.save(out)?;
    Ok(metrics)
}

/// Result of one phantom in [`stage_pipeline`].
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub phantom: String,
    pub dir: PathBuf,
    pub history: Result<RunHistory<f64>, String>,
    pub metrics: Option<Metrics>,
}

/// `pipeline`: every stage for every configured phantom. A diverged phantom
/// is recorded and the others still run.
pub fn stage_pipeline(config: &RunConfig, out: &Path) -> Result<Vec<PipelineRun>> {
    validate_config(config).into_result()?;
    create_dir(out)?;
    let basis = build_basis_for(config)?;
    let inversion = Inversion::new(config, &basis)?;
    let mut runs = Vec::new();
    for (kind, dir) in phantom_dirs(config, out)? {
        create_dir(&dir)?;
        let mut manifest = Manifest::new("pipeline", Some(config.clone()));
        manifest.results.insert("phantom".into(), kind.tag().into());
        manifest.save(&dir)?;
        let sim = simulate(config, &basis, &kind)?;
        write_simulation(&sim, &dir, &mut manifest)?;
        let (history, metrics) = match invert_into(config, &inversion, &sim.dataset, &dir, &mut manifest) {
            Ok(h) => {
                let (raw, _) = reconstruct_into(config, &basis, &h.final_field, &dir, &mut manifest)?;
                let m = score_into(&raw, &sim.truth, &dir, &mut manifest)?;
                manifest.complete = true;
                (Ok(h), Some(m))
            }
            Err(e @ Error::Diverged { .. }) => {
                log::error!("{}: {e}", kind.tag());
                (Err(e.to_string()), None)
            }
            Err(e) => return Err(e),
        };
        manifest.save(&dir)?;
        runs.push(PipelineRun {
            phantom: kind.tag().into(),
            dir,
            history,
            metrics,
        });
    }
    Ok(runs)
}

/// `diagnose-carleman`: ratio table over `lambdas` on `Ω`.
pub fn stage_diagnose(config: &RunConfig, lambdas: &[f64], trials: usize, out: &Path) -> Result<Vec<DiagnosticRow>> {
    create_dir(out)?;
    let mut manifest = Manifest::new("diagnose-carleman", Some(config.clone()));
    manifest.save(out)?;
    let rows = carleman_diagnostic(&config.weight(), &config.omega()?, lambdas, trials, config.noise.seed)?;
    write_diagnostic_csv(&rows, csv_file(out, CARLEMAN_FILE)?)?;
    manifest.add_output(out, CARLEMAN_FILE)?;
    manifest.complete = true;
    manifest.save(out)?;
    Ok(rows)
}
