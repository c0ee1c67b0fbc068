//! Run configuration, read from and written to TOML.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::advection::AdvectionMode;
use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::interpolation::Scheme;
use crate::tt::TruncationControl;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Tt,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    LandauAligned,
    LandauDiag,
    #[serde(rename = "two_stream_1d")]
    TwoStream1d,
    #[serde(rename = "two_stream_4d_equilibrium")]
    TwoStream4dEquilibrium,
    #[serde(rename = "two_stream_4d_product")]
    TwoStream4dProduct,
}

/// Sub-step order of one time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOrder {
    /// x half step, field, v full step, x half step.
    Standard,
    /// v half step, x half step, field, v half step.
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Kernelwise,
    MatrixSplit,
}

impl From<ModeName> for AdvectionMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Kernelwise => AdvectionMode::Kernelwise,
            ModeName::MatrixSplit => AdvectionMode::MatrixSplit,
        }
    }
}

/// Scheme as written in config files: `linear`, `cubic_spline`, `lagrange5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeName(pub Scheme);

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Scheme::Linear => write!(f, "linear"),
            Scheme::CubicSpline => write!(f, "cubic_spline"),
            Scheme::Lagrange(p) => write!(f, "lagrange{p}"),
        }
    }
}

impl FromStr for SchemeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let scheme = match s {
            "linear" => Scheme::Linear,
            "cubic_spline" => Scheme::CubicSpline,
            other => match other.strip_prefix("lagrange").map(str::parse::<usize>) {
                Some(Ok(p)) => Scheme::Lagrange(p),
                _ => return Err(Error::Config(format!("unknown scheme {s:?}"))),
            },
        };
        scheme.validate()?;
        Ok(SchemeName(scheme))
    }
}

impl Serialize for SchemeName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SchemeName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub spatial_dims: usize,
    /// Points per spatial axis.
    pub nx: usize,
    /// Points per velocity axis.
    pub nv: usize,
    /// Spatial period; defaults to `2π/k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Tensor axis order such as `["v1", "x1", "x2", "v2"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub id: CaseId,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_v0")]
    pub v0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_order")]
    pub step_order: StepOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtSection {
    /// Rounding tolerance at the final time.
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rank: Option<usize>,
    /// Relaxed CFL factor for spatial advection.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_x_scheme")]
    pub x_scheme: SchemeName,
    /// Velocity scheme; must be a Lagrange scheme when `spatial_dims > 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_scheme: Option<SchemeName>,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default = "default_matrix_tol")]
    pub matrix_tol_factor: f64,
    #[serde(default)]
    pub projection: bool,
    /// Scale the tolerance linearly with the step index.
    #[serde(default = "default_true")]
    pub schedule: bool,
    /// Read `epsilon` relative to the norm of the initial tensor instead of
    /// as an absolute bound.
    #[serde(default)]
    pub relative_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Record diagnostics every `cadence` steps.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_true")]
    pub snapshot: bool,
    /// Write the electric field on the spatial grid at every recorded step.
    #[serde(default)]
    pub efield: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            cadence: default_cadence(),
            snapshot: true,
            efield: false,
        }
    }
}

/// A complete run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub case: CaseSection,
    pub time: TimeSection,
    pub tt: TtSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_name() -> String {
    "run".into()
}
fn default_solver() -> SolverKind {
    SolverKind::Tt
}
fn default_v_max() -> f64 {
    6.0
}
fn default_alpha() -> f64 {
    0.01
}
fn default_k() -> f64 {
    0.5
}
fn default_v0() -> f64 {
    2.4
}
fn default_order() -> StepOrder {
    StepOrder::Standard
}
fn default_m() -> usize {
    1
}
fn default_x_scheme() -> SchemeName {
    SchemeName(Scheme::CubicSpline)
}
fn default_mode() -> ModeName {
    ModeName::Kernelwise
}
fn default_matrix_tol() -> f64 {
    0.25
}
fn default_true() -> bool {
    true
}
fn default_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_cadence() -> usize {
    1
}

impl SimulationConfig {
    /// Parses TOML text; syntax and type errors map to [`Error::Parse`],
    /// violated bounds to [`Error::Config`].
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn grid(&self) -> Result<PhaseSpaceGrid> {
        let d = self.grid.spatial_dims;
        let x_max = self.grid.x_max.unwrap_or(2.0 * PI / self.case.k);
        let ordering = match &self.grid.ordering {
            Some(names) => Some(names.iter().map(|s| Axis::parse(s)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        PhaseSpaceGrid::new(
            vec![self.grid.nx; d],
            vec![self.grid.nv; d],
            vec![(0.0, x_max); d],
            vec![(-self.grid.v_max, self.grid.v_max); d],
            ordering,
        )
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt).round() as usize
    }

    pub fn x_scheme(&self) -> Scheme {
        self.tt.x_scheme.0
    }

    /// Velocity scheme; defaults to the spline in 1D and five-point Lagrange otherwise.
    pub fn v_scheme(&self) -> Scheme {
        match self.tt.v_scheme {
            Some(s) => s.0,
            None if self.grid.spatial_dims == 1 => Scheme::CubicSpline,
            None => Scheme::Lagrange(5),
        }
    }

    /// Final-time truncation control.
    pub fn control(&self) -> TruncationControl {
        TruncationControl::new(self.tt.epsilon).with_max_rank(self.tt.max_rank)
    }

    /// Static checks that need no initial data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return bad(format!("time.dt must be positive, got {}", self.time.dt));
        }
        if !(self.time.t_final >= 0.0 && self.time.t_final.is_finite()) {
            return bad(format!("time.t_final must be non-negative, got {}", self.time.t_final));
        }
        let n = self.time.t_final / self.time.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return bad(format!(
                "time.t_final = {} is not a whole number of steps of {}",
                self.time.t_final, self.time.dt
            ));
        }
        if !(self.tt.epsilon >= 0.0 && self.tt.epsilon.is_finite()) {
            return bad(format!("tt.epsilon must be non-negative, got {}", self.tt.epsilon));
        }
        if self.tt.m == 0 {
            return bad("tt.m must be at least 1".into());
        }
        if !(self.tt.matrix_tol_factor > 0.0) {
            return bad("tt.matrix_tol_factor must be positive".into());
        }
        if self.output.cadence == 0 {
            return bad("output.cadence must be at least 1".into());
        }
        if !(self.case.k > 0.0) {
            return bad(format!("case.k must be positive, got {}", self.case.k));
        }
        let d = self.grid.spatial_dims;
        match self.case.id {
            CaseId::TwoStream1d if d != 1 => return bad("two_stream_1d needs spatial_dims = 1".into()),
            CaseId::TwoStream4dEquilibrium | CaseId::TwoStream4dProduct if d != 2 => {
                return bad(format!("{:?} needs spatial_dims = 2", self.case.id))
            }
            _ => {}
        }
        if d > 1 && !matches!(self.v_scheme(), Scheme::Lagrange(_)) {
            return bad("velocity advection with spatial_dims > 1 needs a Lagrange scheme (tt.v_scheme)".into());
        }
        let grid = self.grid()?;
        // Spatial advection over a half step moves at most m cells; the bound is
        // checked for a full step as a margin.
        for i in 0..d {
            let disp = self.time.dt * self.grid.v_max / grid.dx(i);
            if disp > self.tt.m as f64 {
                return bad(format!(
                    "CFL bound dt·v_max ≤ m·dx violated on x{}: dt·v_max/dx = {disp:.4} > m = {}",
                    i + 1,
                    self.tt.m
                ));
            }
        }
        if self.run.solver == SolverKind::Dense {
            crate::reference::check_dense_size(&grid).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Checks `dt · max|E| ≤ dv` for an estimate of the field magnitude.
    pub fn check_field_bound(&self, e_max: f64) -> Result<()> {
        let grid = self.grid()?;
        for i in 0..self.grid.spatial_dims {
            let disp = self.time.dt * e_max / grid.dv(i);
            if disp > 1.0 {
                return Err(Error::Config(format!(
                    "CFL bound dt·max|E| ≤ dv violated on v{}: dt·max|E|/dv = {disp:.4} > 1",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEAK: &str = r#"
[run]
name = "weak"

[grid]
spatial_dims = 1
nx = 32
nv = 128

[case]
id = "landau_aligned"
alpha = 0.01
k = 0.5

[time]
dt = 0.0625
t_final = 30.0

[tt]
epsilon = 4e-6
"#;

    #[test]
    fn parses_with_defaults() {
        let c = SimulationConfig::from_toml(WEAK).unwrap();
        assert_eq!(c.run.solver, SolverKind::Tt);
        assert_eq!(c.steps(), 480);
        assert_eq!(c.x_scheme(), Scheme::CubicSpline);
        assert_eq!(c.v_scheme(), Scheme::CubicSpline);
        assert_eq!(c.time.step_order, StepOrder::Standard);
        let g = c.grid().unwrap();
        assert!((g.x_length(0) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn round_trip() {
        let mut c = SimulationConfig::from_toml(WEAK).unwrap();
        c.tt.v_scheme = Some(SchemeName(Scheme::Lagrange(5)));
        c.grid.ordering = Some(vec!["v1".into(), "x1".into()]);
        let back = SimulationConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_and_validation_errors_differ() {
        assert!(matches!(SimulationConfig::from_toml("[run\n"), Err(Error::Parse(_))));
        assert!(matches!(
            SimulationConfig::from_toml(&WEAK.replace("epsilon", "epsilonn")),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            SimulationConfig::from_toml(&WEAK.replace("dt = 0.0625", "dt = 0.5")),
            Err(Error::Config(msg)) if msg.contains("CFL")
        ));
        assert!(matches!(
            SimulationConfig::from_toml(&WEAK.replace("nx = 32", "nx = 30")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scheme_names() {
        for s in ["linear", "cubic_spline", "lagrange3", "lagrange5"] {
            assert_eq!(s.parse::<SchemeName>().unwrap().to_string(), s);
        }
        assert!("lagrange4".parse::<SchemeName>().is_err());
        assert!("quintic".parse::<SchemeName>().is_err());
    }

    #[test]
    fn dense_size_guard_is_a_validation_error() {
        let six = WEAK
            .replace("spatial_dims = 1", "spatial_dims = 3")
            .replace("[run]", "[run]\nsolver = \"dense\"");
        assert!(matches!(SimulationConfig::from_toml(&six), Err(Error::Config(m)) if m.contains("guard")));
    }

    #[test]
    fn field_bound() {
        let c = SimulationConfig::from_toml(WEAK).unwrap();
        assert!(c.check_field_bound(1.0).is_ok());
        assert!(c.check_field_bound(2.0).is_err());
    }
}
