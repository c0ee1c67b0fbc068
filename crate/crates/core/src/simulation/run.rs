//! Time loop, recording and output files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::cases::init_case;
use super::config::{SimulationConfig, SolverKind};
use super::diagnostics::{tt_diagnostics, write_diagnostics, write_efield, write_ranks, DiagnosticsRecord};
use super::projection::{project_conserve, ConservationTargets};
use super::stepper::{tolerance_schedule, Stepper};
use crate::error::Result;
use crate::field::SpatialField;
use crate::tt::{write_snapshot, DenseTensor, TTTensor, TruncationControl};

/// State at the end of a run.
#[derive(Clone, Debug)]
pub enum FinalState {
    Tt(TTTensor),
    Dense(DenseTensor),
}

impl FinalState {
    pub fn to_dense(&self) -> Result<DenseTensor> {
        match self {
            FinalState::Tt(t) => t.to_dense(),
            FinalState::Dense(d) => Ok(d.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    /// Every bond rank including the outer ones, per recorded step.
    pub rank_history: Vec<(f64, Vec<usize>)>,
    /// Field samples, kept only when requested in the output section.
    pub efield: Vec<(f64, Vec<SpatialField>)>,
    pub final_state: FinalState,
    pub peak_stored: usize,
}

/// Collects diagnostics every `cadence` steps and at the final step.
pub(crate) struct Recorder {
    cadence: usize,
    steps: usize,
    keep_field: bool,
    pub(crate) out: Vec<DiagnosticsRecord>,
    pub(crate) ranks: Vec<(f64, Vec<usize>)>,
    pub(crate) efield: Vec<(f64, Vec<SpatialField>)>,
    pub(crate) peak: usize,
}

impl Recorder {
    pub(crate) fn new(cfg: &SimulationConfig) -> Self {
        Self {
            cadence: cfg.output.cadence,
            steps: cfg.steps(),
            keep_field: cfg.output.efield,
            out: Vec::new(),
            ranks: Vec::new(),
            efield: Vec::new(),
            peak: 0,
        }
    }

    pub(crate) fn wants(&self, step: usize) -> bool {
        step % self.cadence == 0 || step == self.steps
    }

    pub(crate) fn push(&mut self, rec: DiagnosticsRecord, ranks: Vec<usize>, e: &[SpatialField]) {
        log::debug!(
            "t = {:.4}: electric energy {:.6e}, ranks {:?}",
            rec.time,
            rec.electric_energy_total(),
            rec.ranks
        );
        self.peak = self.peak.max(rec.stored_doubles);
        if self.keep_field {
            self.efield.push((rec.time, e.to_vec()));
        }
        self.ranks.push((rec.time, ranks));
        self.out.push(rec);
    }

    pub(crate) fn finish(self, final_state: FinalState) -> RunOutput {
        RunOutput {
            records: self.out,
            rank_history: self.ranks,
            efield: self.efield,
            final_state,
            peak_stored: self.peak,
        }
    }
}

/// Runs the configured solver.
pub fn run(cfg: &SimulationConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.run.solver {
        SolverKind::Tt => run_tt(cfg),
        SolverKind::Dense => crate::reference::dense_run(cfg),
    }
}

/// Tensor-train run. Initial data are rounded at `ε_final / N_t`; with
/// `relative_threshold` every tolerance is scaled by the norm of the unrounded
/// initial tensor.
pub fn run_tt(cfg: &SimulationConfig) -> Result<RunOutput> {
    let stepper = Stepper::from_config(cfg)?;
    let grid = &stepper.grid;
    let steps = cfg.steps();
    let mut eps = cfg.tt.epsilon;
    if cfg.tt.relative_threshold {
        eps *= init_case(&cfg.case, grid, &TruncationControl::exact())?.norm();
    }
    let ctrl_at = |j: usize| -> TruncationControl {
        let e = if cfg.tt.schedule { tolerance_schedule(j, steps, eps) } else { eps };
        TruncationControl::new(e).with_max_rank(cfg.tt.max_rank)
    };
    let mut f = init_case(&cfg.case, grid, &TruncationControl::new(eps / steps.max(1) as f64).with_max_rank(cfg.tt.max_rank))?;
    let mut e = stepper.field(&f)?;
    cfg.check_field_bound(e.iter().map(SpatialField::max_abs).fold(0.0, f64::max))?;
    let targets = ConservationTargets::of(&f, grid)?;
    let mut rec = Recorder::new(cfg);
    rec.push(tt_diagnostics(0.0, &f, &e, grid)?, f.ranks(), &e);
    for j in 1..=steps {
        let ctrl = ctrl_at(j);
        let (next, _) = stepper.step(&f, &e, &ctrl)?;
        f = if cfg.tt.projection { project_conserve(&next, &targets, grid)? } else { next };
        e = stepper.field(&f)?;
        if rec.wants(j) {
            rec.push(tt_diagnostics(j as f64 * cfg.time.dt, &f, &e, grid)?, f.ranks(), &e);
        }
    }
    Ok(rec.finish(FinalState::Tt(f)))
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug, Default)]
pub struct OutputFiles {
    pub diagnostics: PathBuf,
    pub ranks: PathBuf,
    pub efield: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
}

impl OutputFiles {
    pub fn all(&self) -> Vec<PathBuf> {
        let mut v = vec![self.diagnostics.clone(), self.ranks.clone()];
        v.extend(self.efield.clone());
        v.extend(self.snapshot.clone());
        v
    }
}

/// Writes `diagnostics.csv`, `ranks.csv`, and optionally `efield.csv` and the
/// final TT snapshot `final.ttsl` into `dir`.
pub fn write_outputs(cfg: &SimulationConfig, out: &RunOutput, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let d = cfg.grid.spatial_dims;
    let mut files = OutputFiles {
        diagnostics: dir.join("diagnostics.csv"),
        ranks: dir.join("ranks.csv"),
        ..Default::default()
    };
    write_diagnostics(BufWriter::new(File::create(&files.diagnostics)?), d, &out.records)?;
    write_ranks(BufWriter::new(File::create(&files.ranks)?), &out.rank_history)?;
    if cfg.output.efield {
        let p = dir.join("efield.csv");
        write_efield(BufWriter::new(File::create(&p)?), &out.efield)?;
        files.efield = Some(p);
    }
    if let (true, FinalState::Tt(t)) = (cfg.output.snapshot, &out.final_state) {
        let p = dir.join("final.ttsl");
        write_snapshot(t, BufWriter::new(File::create(&p)?))?;
        files.snapshot = Some(p);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::diagnostics::read_table;

    const TINY: &str = r#"
[run]
name = "tiny"

[grid]
spatial_dims = 1
nx = 16
nv = 32

[case]
id = "landau_aligned"
alpha = 0.05

[time]
dt = 0.125
t_final = 1.0

[tt]
epsilon = 1e-6

[output]
efield = true
cadence = 3
"#;

    #[test]
    fn records_every_cadence_and_final_step() {
        let cfg = SimulationConfig::from_toml(TINY).unwrap();
        let out = run(&cfg).unwrap();
        let times: Vec<f64> = out.records.iter().map(|r| r.time).collect();
        assert_eq!(times, vec![0.0, 0.375, 0.75, 1.0]);
        assert_eq!(out.efield.len(), 4);
        assert!(out.peak_stored > 0);
    }

    #[test]
    fn writes_files() {
        let cfg = SimulationConfig::from_toml(TINY).unwrap();
        let out = run(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&cfg, &out, dir.path()).unwrap();
        let t = read_table(File::open(&files.diagnostics).unwrap()).unwrap();
        assert_eq!(t.rows.len(), 4);
        let r = read_table(File::open(&files.ranks).unwrap()).unwrap();
        assert_eq!(r.columns, vec!["time", "r_0", "r_1", "r_2"]);
        let snap = crate::tt::read_snapshot(File::open(files.snapshot.unwrap()).unwrap()).unwrap();
        match &out.final_state {
            FinalState::Tt(t) => assert_eq!(snap.ranks(), t.ranks()),
            FinalState::Dense(_) => unreachable!(),
        }
        assert!(files.efield.is_some());
    }

    #[test]
    fn relative_threshold_scales_by_initial_norm() {
        let abs = SimulationConfig::from_toml(TINY).unwrap();
        let grid = abs.grid().unwrap();
        let norm = init_case(&abs.case, &grid, &TruncationControl::exact()).unwrap().norm();
        let mut rel = abs.clone();
        rel.tt.relative_threshold = true;
        rel.tt.epsilon = abs.tt.epsilon / norm;
        let (a, b) = (run(&abs).unwrap(), run(&rel).unwrap());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.ranks, y.ranks);
            assert!((x.electric_energy_total() - y.electric_energy_total()).abs() <= 1e-12 * x.electric_energy_total());
        }
    }

    #[test]
    fn projection_keeps_mass_and_momentum() {
        let mut cfg = SimulationConfig::from_toml(TINY).unwrap();
        cfg.tt.projection = true;
        cfg.tt.epsilon = 1e-3;
        let out = run(&cfg).unwrap();
        let m0 = out.records[0].mass;
        for r in &out.records {
            assert!((r.mass - m0).abs() <= 1e-9 * m0);
            assert!((r.momentum[0] - out.records[0].momentum[0]).abs() <= 1e-9 * m0);
        }
    }
}
