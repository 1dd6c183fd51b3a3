//! Run configuration: a flat `key = value` format grouped in `[sections]`.
//!
//! ```text
//! [scenario]
//! name = checkerboard
//! pe = 1e4
//! mask = LR,UL
//!
//! [mesh]
//! kind = graded
//! nx = 4
//! ny = 4
//! ratio = 0.25
//!
//! [discretization]
//! p = 2
//! dp = 0
//! refinements = 4
//! ```
//!
//! Parsing is strict: unknown sections or keys and malformed values are
//! rejected with the offending line number.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::fe_space::{TestTrace, MAX_POINTS};
use crate::mesh::{graded_lines, InterfaceLine, Mesh};
use crate::problem::{QuadrantMask, Scenario};
use crate::solver::SolverOptions;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioName {
    Manufactured,
    Homogeneous,
    Checkerboard,
    VariableConvection,
    Polynomial,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::Manufactured,
        ScenarioName::Homogeneous,
        ScenarioName::Checkerboard,
        ScenarioName::VariableConvection,
        ScenarioName::Polynomial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Manufactured => "manufactured",
            ScenarioName::Homogeneous => "homogeneous",
            ScenarioName::Checkerboard => "checkerboard",
            ScenarioName::VariableConvection => "variable_convection",
            ScenarioName::Polynomial => "polynomial",
        }
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| format!("unknown scenario '{s}'"))
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    Uniform,
    Graded,
    Unstructured,
}

impl FromStr for MeshKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(MeshKind::Uniform),
            "graded" => Ok(MeshKind::Graded),
            "unstructured" => Ok(MeshKind::Unstructured),
            _ => Err(format!("unknown mesh kind '{s}' (uniform, graded, unstructured)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshSpec {
    pub kind: MeshKind,
    pub nx: usize,
    pub ny: usize,
    /// Last-to-first cell size ratio per graded segment.
    pub ratio: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            kind: MeshKind::Uniform,
            nx: 4,
            ny: 4,
            ratio: 1.0,
            amplitude: 0.25,
            seed: 1,
        }
    }
}

impl MeshSpec {
    /// Initial mesh for a scenario. Graded meshes restart the progression at
    /// every interface line so the lines stay mesh lines.
    pub fn build(&self, scenario: &Scenario) -> Result<Mesh> {
        let breaks = |vertical: bool| -> Vec<f64> {
            scenario
                .interfaces
                .iter()
                .filter_map(|l| match (*l, vertical) {
                    (InterfaceLine::Vertical(x), true) | (InterfaceLine::Horizontal(x), false) => Some(x),
                    _ => None,
                })
                .collect()
        };
        let mesh = match self.kind {
            MeshKind::Uniform | MeshKind::Unstructured => Mesh::uniform(self.nx, self.ny)?,
            MeshKind::Graded => {
                let xs = graded_lines(self.nx, self.ratio, &breaks(true))?;
                let ys = graded_lines(self.ny, self.ratio, &breaks(false))?;
                Mesh::tensor(&xs, &ys)?
            }
        };
        let rule = scenario.boundary.clone();
        Ok(mesh.with_boundary_tags(move |x| rule(x)))
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Label used for output directories; the config file stem by default.
    pub label: String,
    pub scenario: ScenarioName,
    pub pe: f64,
    pub mask: QuadrantMask,
    pub mesh: MeshSpec,
    pub p: usize,
    pub dp: usize,
    pub test_trace: TestTrace,
    pub refinements: usize,
    pub solver: SolverOptions,
    pub out_dir: Option<PathBuf>,
    pub write_vtk: bool,
    /// Intervals of the diagonal line sample; `None` picks the scenario
    /// default (on for the layer scenarios).
    pub line_samples: Option<usize>,
    pub debug_element: Option<usize>,
    pub deterministic: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            label: "run".into(),
            scenario: ScenarioName::Manufactured,
            pe: 10.0,
            mask: QuadrantMask::off_diagonal(),
            mesh: MeshSpec::default(),
            p: 2,
            dp: 0,
            test_trace: TestTrace::default(),
            refinements: 0,
            solver: SolverOptions::default(),
            out_dir: None,
            write_vtk: true,
            line_samples: None,
            debug_element: None,
            deterministic: true,
            threads: None,
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(Some(line), format!("invalid value '{raw}' for key '{key}'")))
}

fn boolean(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(Some(line), format!("invalid boolean '{raw}' for key '{key}'"))),
    }
}

fn parsed<T, E: fmt::Display>(line: usize, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| Error::config(Some(line), e.to_string()))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(stem) = path.file_stem() {
            cfg.label = stem.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut saw_name = false;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(Some(ln), "unterminated section header"))?
                    .trim();
                if !matches!(name, "scenario" | "mesh" | "discretization" | "solver" | "output" | "run") {
                    return Err(Error::config(Some(ln), format!("unknown section '[{name}]'")));
                }
                section = name.to_string();
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::config(Some(ln), format!("expected 'key = value', got '{line}'")))?;
            let (key, val) = (key.trim(), val.trim());
            match (section.as_str(), key) {
                ("scenario", "name") => {
                    cfg.scenario = parsed(ln, val.parse())?;
                    saw_name = true;
                }
                ("scenario", "pe") => cfg.pe = value(ln, key, val)?,
                ("scenario", "mask") => {
                    cfg.mask = QuadrantMask::parse(val)
                        .ok_or_else(|| Error::config(Some(ln), format!("invalid quadrant mask '{val}'")))?
                }
                ("mesh", "kind") => cfg.mesh.kind = parsed(ln, val.parse())?,
                ("mesh", "nx") => cfg.mesh.nx = value(ln, key, val)?,
                ("mesh", "ny") => cfg.mesh.ny = value(ln, key, val)?,
                ("mesh", "ratio") => cfg.mesh.ratio = value(ln, key, val)?,
                ("mesh", "amplitude") => cfg.mesh.amplitude = value(ln, key, val)?,
                ("mesh", "seed") => cfg.mesh.seed = value(ln, key, val)?,
                ("discretization", "p") => cfg.p = value(ln, key, val)?,
                ("discretization", "dp") => cfg.dp = value(ln, key, val)?,
                ("discretization", "refinements") => cfg.refinements = value(ln, key, val)?,
                ("discretization", "test_trace") => {
                    cfg.test_trace = match val {
                        "vanish_on_dirichlet" => TestTrace::VanishOnDirichlet,
                        "unconstrained" => TestTrace::Unconstrained,
                        _ => return Err(Error::config(Some(ln), format!("invalid test_trace '{val}'"))),
                    }
                }
                ("solver", "direct_limit") => cfg.solver.direct_limit = value(ln, key, val)?,
                ("solver", "cg_tolerance") => cfg.solver.cg_tolerance = value(ln, key, val)?,
                ("solver", "cg_max_factor") => cfg.solver.cg_max_factor = value(ln, key, val)?,
                ("solver", "verify_routes") => cfg.solver.verify_routes = boolean(ln, key, val)?,
                ("output", "dir") => cfg.out_dir = Some(PathBuf::from(val)),
                ("output", "vtk") => cfg.write_vtk = boolean(ln, key, val)?,
                ("output", "line_samples") => cfg.line_samples = Some(value(ln, key, val)?),
                ("output", "debug_element") => cfg.debug_element = Some(value(ln, key, val)?),
                ("run", "deterministic") => cfg.deterministic = boolean(ln, key, val)?,
                ("run", "threads") => cfg.threads = Some(value(ln, key, val)?),
                ("", _) => return Err(Error::config(Some(ln), format!("key '{key}' outside of any section"))),
                (s, _) => return Err(Error::config(Some(ln), format!("unknown key '{key}' in section [{s}]"))),
            }
        }
        if !saw_name {
            return Err(Error::config(None, "missing required key 'name' in [scenario]"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(None, m));
        if !(self.pe > 0.0 && self.pe.is_finite()) {
            return bad(format!("pe must be positive and finite, got {}", self.pe));
        }
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return bad("mesh nx and ny must be at least 1".into());
        }
        if !(self.mesh.ratio > 0.0 && self.mesh.ratio.is_finite()) {
            return bad(format!("mesh ratio must be positive, got {}", self.mesh.ratio));
        }
        if !(0.0..0.5).contains(&self.mesh.amplitude) {
            return bad(format!("mesh amplitude must lie in [0, 0.5), got {}", self.mesh.amplitude));
        }
        if self.p == 0 {
            return bad("trial degree p must be at least 1".into());
        }
        if self.dp > 3 {
            return bad(format!("enrichment dp must lie in 0..=3, got {}", self.dp));
        }
        if self.p + self.dp + 2 > MAX_POINTS {
            return bad(format!("p + dp = {} exceeds the quadrature table", self.p + self.dp));
        }
        if self.scenario == ScenarioName::Checkerboard && (!self.mesh.nx.is_multiple_of(2) || !self.mesh.ny.is_multiple_of(2)) {
            return bad("checkerboard needs even nx and ny so the quadrant interfaces are mesh lines".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn build_scenario(&self) -> Scenario {
        match self.scenario {
            ScenarioName::Manufactured => Scenario::manufactured(self.pe),
            ScenarioName::Homogeneous => Scenario::homogeneous(self.pe),
            ScenarioName::Checkerboard => Scenario::checkerboard(self.pe, self.mask),
            ScenarioName::VariableConvection => Scenario::variable_convection(self.pe),
            ScenarioName::Polynomial => Scenario::polynomial(1.0 / self.pe, [1.0, 1.0]),
        }
    }

    /// Diagonal line-sample intervals for this run, if any.
    pub fn line_intervals(&self) -> Option<usize> {
        match self.line_samples {
            Some(0) => None,
            Some(n) => Some(n),
            None => matches!(self.scenario, ScenarioName::Homogeneous | ScenarioName::Checkerboard).then_some(2000),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scenario={} pe={:e} mesh={:?} {}x{} ratio={} amplitude={} seed={} p={} dp={} trace={:?} refinements={}",
            self.scenario,
            self.pe,
            self.mesh.kind,
            self.mesh.nx,
            self.mesh.ny,
            self.mesh.ratio,
            self.mesh.amplitude,
            self.mesh.seed,
            self.p,
            self.dp,
            self.test_trace,
            self.refinements
        )?;
        if self.scenario == ScenarioName::Checkerboard {
            write!(f, " mask={}", self.mask)?;
        }
        Ok(())
    }
}

/// Configs shipped with the crate, as `(label, text)`, in suite order.
pub const SHIPPED: &[(&str, &str)] = &[
    ("convergence_p1", include_str!("../configs/convergence_p1.cfg")),
    ("convergence_p2", include_str!("../configs/convergence_p2.cfg")),
    ("convergence_p3", include_str!("../configs/convergence_p3.cfg")),
    ("convergence_p4", include_str!("../configs/convergence_p4.cfg")),
    ("homo_pe1e6", include_str!("../configs/homo_pe1e6.cfg")),
    ("unstructured_pe400", include_str!("../configs/unstructured_pe400.cfg")),
    ("checkerboard_pe1e4", include_str!("../configs/checkerboard_pe1e4.cfg")),
    ("shock_pe1e9", include_str!("../configs/shock_pe1e9.cfg")),
];

/// Parses a shipped config by label.
pub fn shipped(label: &str) -> Result<RunConfig> {
    let (_, text) = SHIPPED
        .iter()
        .find(|(l, _)| *l == label)
        .ok_or_else(|| Error::config(None, format!("no shipped config '{label}'")))?;
    let mut cfg = RunConfig::parse(text)?;
    cfg.label = label.to_string();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# comment
[scenario]
name = checkerboard
pe = 1e4
mask = LR,UL   ; trailing comment

[mesh]
kind = graded
nx = 4
ny = 4
ratio = 0.25

[discretization]
p = 2
dp = 1
refinements = 3

[solver]
verify_routes = true

[output]
dir = out/cb
line_samples = 100
";

    #[test]
    fn parses_all_sections() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.scenario, ScenarioName::Checkerboard);
        assert_eq!(c.pe, 1e4);
        assert_eq!(c.mask, QuadrantMask::off_diagonal());
        assert_eq!(c.mesh.kind, MeshKind::Graded);
        assert_eq!((c.p, c.dp, c.refinements), (2, 1, 3));
        assert!(c.solver.verify_routes);
        assert_eq!(c.out_dir, Some(PathBuf::from("out/cb")));
        assert_eq!(c.line_intervals(), Some(100));
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "[scenario]\nname = manufactured\npeclet_numbr = 10\n";
        let err = RunConfig::parse(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key 'peclet_numbr'"), "{msg}");
        assert!(matches!(err, Error::Config { line: Some(3), .. }));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "[scenario]\nname = nope\n",
            "[scenery]\nname = manufactured\n",
            "name = manufactured\n",
            "[scenario]\nname = manufactured\npe = -1\n",
            "[scenario]\nname = manufactured\n[discretization]\np = 0\n",
            "[scenario]\nname = manufactured\n[discretization]\ndp = 4\n",
            "[scenario]\nname = manufactured\n[mesh]\namplitude = 0.5\n",
            "[scenario]\nname = checkerboard\n[mesh]\nnx = 3\n",
            "[scenario]\nname = manufactured\n[output]\nvtk = maybe\n",
            "[mesh]\nnx = 2\n",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config { .. })), "{text}");
        }
    }

    #[test]
    fn shipped_configs_parse() {
        for (label, _) in SHIPPED {
            let c = shipped(label).unwrap();
            assert_eq!(c.label, *label);
        }
        assert_eq!(shipped("convergence_p2").unwrap().refinements, 5);
    }

    #[test]
    fn graded_checkerboard_mesh_is_aligned() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        let s = c.build_scenario();
        let m = c.mesh.build(&s).unwrap();
        m.check_alignment(&s.interfaces).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-12);
    }
}
