//! Point location and evaluation along straight segments.

use crate::solver::SolutionField;
use crate::{Error, Point, Result};

const NEWTON_TOL: f64 = 1e-12;
/// Slack on the master square and on bounding boxes.
const INSIDE_TOL: f64 = 1e-9;

/// `n + 1` equally spaced evaluations from `a` to `b`; `s` is arclength.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LineSample {
    pub s: Vec<f64>,
    pub points: Vec<Point>,
    pub u: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
}

impl LineSample {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Finds an element containing `x` and its master coordinates.
pub fn locate(solution: &SolutionField, x: Point) -> Result<(usize, Point)> {
    let mesh = &solution.mesh;
    for e in 0..mesh.num_elements() {
        let map = mesh.element_map(e);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for c in &map.corners {
            for i in 0..2 {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        if (0..2).any(|i| x[i] < lo[i] - INSIDE_TOL || x[i] > hi[i] + INSIDE_TOL) {
            continue;
        }
        if let Some(xi) = map.inverse(x, NEWTON_TOL) {
            if xi.iter().all(|v| v.abs() <= 1.0 + INSIDE_TOL) {
                return Ok((e, xi.map(|v| v.clamp(-1.0, 1.0))));
            }
        }
    }
    Err(Error::PointNotFound(x[0], x[1]))
}

pub fn sample_line(solution: &SolutionField, a: Point, b: Point, n: usize) -> Result<LineSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let mut out = LineSample::default();
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let (e, xi) = locate(solution, x)?;
        let v = solution.evaluate(e, xi)?;
        out.s.push(t * len);
        out.points.push(x);
        out.u.push(v.u);
        out.qx.push(v.q[0]);
        out.qy.push(v.q[1]);
    }
    Ok(out)
}
