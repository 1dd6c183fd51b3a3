//! Refinement studies: build the mesh sequence, solve every level,
//! post-process and write the artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;

use crate::analysis::export::{
    write_flux_csv, write_line_csv, write_records_csv, write_solution_vtk, FluxComparison,
};
use crate::analysis::{conservation_residuals, error_norms, fit_rates, sample_line, ConvergenceRecord, ErrorNorms, RateFit};
use crate::config::{MeshKind, RunConfig};
use crate::local::{ElementSystem, LocalOptions, ReferenceTables};
use crate::mesh::Mesh;
use crate::problem::Scenario;
use crate::solver::{energy_indicator, solve, SolutionField, SolveReport};
use crate::{Error, Result};

/// Produces the meshes of a study. Unstructured meshes are perturbed once,
/// on the first mesh that has interior vertices, and refined afterwards.
#[derive(Clone, Debug)]
pub struct MeshSequence {
    current: Mesh,
    kind: MeshKind,
    amplitude: f64,
    seed: u64,
    perturbed: bool,
}

impl MeshSequence {
    pub fn new(cfg: &RunConfig, scenario: &Scenario) -> Result<Self> {
        let mut seq = MeshSequence {
            current: cfg.mesh.build(scenario)?,
            kind: cfg.mesh.kind,
            amplitude: cfg.mesh.amplitude,
            seed: cfg.mesh.seed,
            perturbed: false,
        };
        seq.maybe_perturb()?;
        Ok(seq)
    }

    fn maybe_perturb(&mut self) -> Result<()> {
        let has_interior = self.current.num_vertices() > self.current.edges().iter().filter(|e| e.is_boundary()).count();
        if self.kind == MeshKind::Unstructured && !self.perturbed && has_interior {
            self.current = self.current.perturb_unstructured(self.amplitude, self.seed)?;
            self.perturbed = true;
        }
        Ok(())
    }

    pub fn current(&self) -> &Mesh {
        &self.current
    }

    pub fn refine(&mut self) -> Result<()> {
        self.current = self.current.refine_uniform();
        self.maybe_perturb()
    }
}

/// Everything measured on one refinement level.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub elements: usize,
    pub h: f64,
    pub dofs: usize,
    pub report: SolveReport,
    pub max_abs_u: f64,
    pub finite: bool,
    pub route_defect: Option<f64>,
    pub norms: Option<ErrorNorms>,
    pub eta: f64,
    pub conservation_max: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub label: String,
    pub levels: Vec<LevelResult>,
    pub records: Vec<ConvergenceRecord>,
    pub flux: Vec<FluxComparison>,
    pub rates: Option<RateFit>,
    /// Solution on the finest level.
    pub solution: SolutionField,
    pub out_dir: Option<PathBuf>,
}

struct RunLog {
    file: Option<(PathBuf, BufWriter<File>)>,
}

impl RunLog {
    fn open(dir: Option<&Path>) -> Result<Self> {
        let file = match dir {
            Some(d) => {
                let path = d.join("run.log");
                let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
                Some((path, BufWriter::new(f)))
            }
            None => None,
        };
        Ok(RunLog { file })
    }

    fn line(&mut self, text: &str) -> Result<()> {
        info!("{text}");
        if let Some((path, w)) = self.file.as_mut() {
            writeln!(w, "{text}").and_then(|_| w.flush()).map_err(|e| Error::io(path.clone(), e))?;
        }
        Ok(())
    }
}

/// Runs the configured study; writes artifacts when `cfg.out_dir` is set.
pub fn run_study(cfg: &RunConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let scenario = cfg.build_scenario();
    let out = cfg.out_dir.clone();
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut log = RunLog::open(out.as_deref())?;
    log.line(&format!("config {}: {cfg}", cfg.label))?;
    log.line(&format!(
        "threads={} deterministic={}",
        rayon::current_num_threads(),
        cfg.deterministic
    ))?;

    let options = LocalOptions {
        trial_degree: cfg.p,
        enrichment: cfg.dp,
        test_trace: cfg.test_trace,
    };
    let tables = ReferenceTables::new(options)?;
    let mut meshes = MeshSequence::new(cfg, &scenario)?;
    let mut levels = Vec::new();
    let mut records = Vec::new();
    let mut flux = Vec::new();
    let mut last = None;

    for level in 0..=cfg.refinements {
        if level > 0 {
            meshes.refine()?;
        }
        let mesh = Arc::new(meshes.current().clone());
        let context = format!(
            "{} level {level} ({} elements, p={})",
            scenario.name,
            mesh.num_elements(),
            cfg.p
        );
        let result = solve_level(cfg, &scenario, &tables, mesh, level, out.as_deref()).map_err(|e| e.context(context))?;
        let (lr, solution) = result;
        log.line(&format!(
            "level {} elements={} h={:.6e} dofs={} max|u|={:.6e} eta={:.6e} conservation={:.3e}{} {} total={:.3}s",
            lr.level,
            lr.elements,
            lr.h,
            lr.dofs,
            lr.max_abs_u,
            lr.eta,
            lr.conservation_max,
            lr.route_defect.map(|d| format!(" routes={d:.3e}")).unwrap_or_default(),
            lr.report,
            lr.seconds
        ))?;
        if let Some(n) = &lr.norms {
            log.line(&format!(
                "  errors L2(u)={:.6e} H1(u)={:.6e} L2(q)={:.6e} L2(grad u)={:.6e} L2(D^-1 q)={:.6e} L2(div q)={:.6e} U={:.6e}",
                n.l2_u, n.h1_u, n.l2_q, n.l2_gradu, n.l2_q_scaled, n.l2_divq, n.unorm
            ))?;
            records.push(ConvergenceRecord::new(level, lr.h, lr.dofs, n, lr.eta));
            flux.push(FluxComparison {
                level,
                h: lr.h,
                err_l2_q: n.l2_q,
                err_l2_gradu: n.l2_gradu,
                err_l2_q_scaled: n.l2_q_scaled,
                err_l2_divq: n.l2_divq,
            });
        } else {
            records.push(ConvergenceRecord::without_errors(level, lr.h, lr.dofs, lr.eta));
        }
        levels.push(lr);
        last = Some(solution);
    }

    let rates = if scenario.has_exact() && records.len() >= 3 {
        Some(fit_rates(&records)?)
    } else {
        None
    };
    if let Some(r) = &rates {
        log.line(&format!("rates (last 3 levels): {r}"))?;
    }
    if let Some(dir) = &out {
        write_records_csv(&dir.join("records.csv"), &records)?;
        if !flux.is_empty() {
            write_flux_csv(&dir.join("flux_comparison.csv"), &flux)?;
        }
    }
    Ok(StudyResult {
        label: cfg.label.clone(),
        levels,
        records,
        flux,
        rates,
        solution: last.expect("at least one level"),
        out_dir: out,
    })
}

fn solve_level(
    cfg: &RunConfig,
    scenario: &Scenario,
    tables: &ReferenceTables,
    mesh: Arc<Mesh>,
    level: usize,
    out: Option<&Path>,
) -> Result<(LevelResult, SolutionField)> {
    let start = Instant::now();
    if let (Some(dir), Some(e), 0) = (out, cfg.debug_element, level) {
        if e >= mesh.num_elements() {
            return Err(Error::config(None, format!("debug_element {e} exceeds element count {}", mesh.num_elements())));
        }
        let debug = dir.join("debug");
        std::fs::create_dir_all(&debug).map_err(|err| Error::io(&debug, err))?;
        ElementSystem::build(&mesh, e, scenario, tables)?.write_debug(&debug)?;
    }
    let (solution, report, system) = solve(mesh.clone(), scenario, tables, &cfg.solver)?;
    let route_defect = system.route_defect;
    drop(system);
    let eta = energy_indicator(&solution, scenario, tables)?.global;
    let norms = if scenario.has_exact() {
        Some(error_norms(&solution, scenario)?)
    } else {
        None
    };
    let conservation_max = conservation_residuals(&solution, scenario)?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(dir) = out {
        if cfg.write_vtk {
            write_solution_vtk(&solution, &dir.join(format!("solution_level{level}.vtk")), &format!("{} level {level}", cfg.label))?;
        }
        if let Some(n) = cfg.line_intervals() {
            let sample = sample_line(&solution, [0.0, 0.0], [1.0, 1.0], n)?;
            write_line_csv(&dir.join(format!("line_level{level}.csv")), &sample)?;
        }
    }
    let lr = LevelResult {
        level,
        elements: mesh.num_elements(),
        h: mesh.max_diameter(),
        dofs: solution.coeffs.len(),
        max_abs_u: solution.max_abs_u(),
        finite: solution.is_finite(),
        report,
        route_defect,
        norms,
        eta,
        conservation_max,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((lr, solution))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text).unwrap()
    }

    #[test]
    fn unstructured_sequence_counts() {
        let c = cfg("[scenario]\nname = homogeneous\npe = 400\n[mesh]\nkind = unstructured\nnx = 1\nny = 1\namplitude = 0.3\n");
        let s = c.build_scenario();
        let mut seq = MeshSequence::new(&c, &s).unwrap();
        let count = |m: &Mesh| crate::fe_space::TrialDofMap::new(m, 2).num_dofs();
        assert_eq!(count(seq.current()), 27);
        seq.refine().unwrap();
        assert_eq!(count(seq.current()), 75);
        let centre = seq.current().vertices().iter().find(|v| (0.01..0.99).contains(&v[0]) && (0.01..0.99).contains(&v[1])).copied().unwrap();
        assert_ne!(centre, [0.5, 0.5]);
        seq.refine().unwrap();
        assert!((seq.current().area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_study_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg("[scenario]\nname = manufactured\npe = 10\n[mesh]\nnx = 2\nny = 2\n[discretization]\np = 2\nrefinements = 2\n[output]\ndebug_element = 1\n");
        c.out_dir = Some(dir.path().to_path_buf());
        let r = run_study(&c).unwrap();
        assert_eq!(r.records.len(), 3);
        assert_eq!(r.records[0].dofs, 75);
        assert!(r.rates.is_some());
        for f in ["records.csv", "flux_comparison.csv", "run.log", "solution_level2.vtk", "debug/element_1_T.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("line_level0.csv").exists());
    }

    #[test]
    fn solver_failure_names_level() {
        let mut c = cfg("[scenario]\nname = manufactured\n[mesh]\nnx = 4\nny = 4\n");
        c.solver.direct_limit = 0;
        c.solver.cg_max_factor = 0;
        let msg = run_study(&c).unwrap_err().to_string();
        assert!(msg.contains("manufactured level 0 (16 elements, p=2)"), "{msg}");
    }
}
