//! Coefficients, boundary conditions and the named test scenarios.

use std::fmt;
use std::sync::Arc;

use crate::mesh::{EdgeTag, InterfaceLine};
use crate::Point;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
pub type BoundaryRule = Arc<dyn Fn(Point) -> EdgeTag + Send + Sync>;

/// Data of `-div(D grad u) + b . grad u = f` with `D grad u . n = g` on the
/// Neumann boundary.
#[derive(Clone)]
pub struct CoefficientField {
    pub diffusion: TensorFn,
    pub convection: VectorFn,
    pub source: ScalarFn,
    pub neumann: ScalarFn,
}

impl CoefficientField {
    pub fn constant(d: f64, b: [f64; 2], f: f64) -> Self {
        CoefficientField {
            diffusion: Arc::new(move |_| [[d, 0.0], [0.0, d]]),
            convection: Arc::new(move |_| b),
            source: Arc::new(move |_| f),
            neumann: Arc::new(|_| 0.0),
        }
    }
}

/// Closed-form solution used for error measurement.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad_u: VectorFn,
    /// `q = D grad u`
    pub flux: VectorFn,
    /// `div q`
    pub div_flux: ScalarFn,
}

/// Which quadrants of the unit square carry the large diffusion `Pe`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QuadrantMask {
    pub lower_left: bool,
    pub lower_right: bool,
    pub upper_left: bool,
    pub upper_right: bool,
}

impl QuadrantMask {
    /// Lower-right and upper-left quadrants diffusion dominated.
    pub fn off_diagonal() -> Self {
        QuadrantMask {
            lower_right: true,
            upper_left: true,
            ..Default::default()
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        match (x[0] >= 0.5, x[1] >= 0.5) {
            (false, false) => self.lower_left,
            (true, false) => self.lower_right,
            (false, true) => self.upper_left,
            (true, true) => self.upper_right,
        }
    }

    /// Parses a comma separated list of `LL`, `LR`, `UL`, `UR` (or `none`).
    pub fn parse(s: &str) -> Option<Self> {
        let mut m = QuadrantMask::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_uppercase().as_str() {
                "LL" => m.lower_left = true,
                "LR" => m.lower_right = true,
                "UL" => m.upper_left = true,
                "UR" => m.upper_right = true,
                "NONE" => {}
                _ => return None,
            }
        }
        Some(m)
    }

    /// Quadrant rectangles `[x0, x1] x [y0, y1]` that are marked.
    pub fn marked_quadrants(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        if self.lower_left {
            out.push([0.0, 0.5, 0.0, 0.5]);
        }
        if self.lower_right {
            out.push([0.5, 1.0, 0.0, 0.5]);
        }
        if self.upper_left {
            out.push([0.0, 0.5, 0.5, 1.0]);
        }
        if self.upper_right {
            out.push([0.5, 1.0, 0.5, 1.0]);
        }
        out
    }
}

impl fmt::Display for QuadrantMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.lower_left, "LL"),
            (self.lower_right, "LR"),
            (self.upper_left, "UL"),
            (self.upper_right, "UR"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join(","))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Manufactured,
    Homogeneous,
    Checkerboard,
    VariableConvection,
    Custom,
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub pe: f64,
    pub coefficients: CoefficientField,
    pub boundary: BoundaryRule,
    pub exact: Option<ExactSolution>,
    pub interfaces: Vec<InterfaceLine>,
    pub mask: Option<QuadrantMask>,
    /// Qualitative features the solution is expected to show.
    pub features: Vec<String>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("pe", &self.pe)
            .field("interfaces", &self.interfaces)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

fn all_dirichlet() -> BoundaryRule {
    Arc::new(|_| EdgeTag::Dirichlet)
}

/// The 1D factor `x + (e^{Pe x} - 1) / (1 - e^{Pe})` and its first two
/// derivatives, written with `e^{Pe (x-1)}` so nothing overflows.
#[derive(Clone, Copy, Debug)]
pub struct LayerProfile {
    pe: f64,
}

impl LayerProfile {
    pub fn new(pe: f64) -> Self {
        LayerProfile { pe }
    }

    fn denom(&self) -> f64 {
        -(-self.pe).exp_m1()
    }

    pub fn value(&self, x: f64) -> f64 {
        let pe = self.pe;
        x - ((pe * (x - 1.0)).exp() - (-pe).exp()) / self.denom()
    }

    pub fn d1(&self, x: f64) -> f64 {
        1.0 - self.pe * (self.pe * (x - 1.0)).exp() / self.denom()
    }

    pub fn d2(&self, x: f64) -> f64 {
        -self.pe * self.pe * (self.pe * (x - 1.0)).exp() / self.denom()
    }
}

impl Scenario {
    /// Smooth boundary-layer solution `u = X(x) X(y)` with `D = 1/Pe`,
    /// `b = (1, 1)` and the matching source.
    pub fn manufactured(pe: f64) -> Scenario {
        assert!(pe > 0.0, "Peclet number must be positive");
        let d = 1.0 / pe;
        let b = [1.0, 1.0];
        let prof = LayerProfile::new(pe);

        let source: ScalarFn = Arc::new(move |x: Point| {
            let (px, py) = (prof.value(x[0]), prof.value(x[1]));
            let lap = prof.d2(x[0]) * py + px * prof.d2(x[1]);
            -d * lap + b[0] * prof.d1(x[0]) * py + b[1] * px * prof.d1(x[1])
        });
        let grad: VectorFn = Arc::new(move |x: Point| {
            [prof.d1(x[0]) * prof.value(x[1]), prof.value(x[0]) * prof.d1(x[1])]
        });
        let g2 = grad.clone();
        let exact = ExactSolution {
            u: Arc::new(move |x: Point| prof.value(x[0]) * prof.value(x[1])),
            grad_u: grad,
            flux: Arc::new(move |x: Point| {
                let g = g2(x);
                [d * g[0], d * g[1]]
            }),
            div_flux: Arc::new(move |x: Point| {
                d * (prof.d2(x[0]) * prof.value(x[1]) + prof.value(x[0]) * prof.d2(x[1]))
            }),
        };
        Scenario {
            name: "manufactured".into(),
            kind: ScenarioKind::Manufactured,
            pe,
            coefficients: CoefficientField {
                diffusion: Arc::new(move |_| [[d, 0.0], [0.0, d]]),
                convection: Arc::new(move |_| b),
                source,
                neumann: Arc::new(|_| 0.0),
            },
            boundary: all_dirichlet(),
            exact: Some(exact),
            interfaces: Vec::new(),
            mask: None,
            features: vec!["smooth boundary layers along x=1 and y=1".into()],
        }
    }

    /// Constant coefficients `D = 1/Pe`, `b = (1, 1)`, `f = 1`.
    pub fn homogeneous(pe: f64) -> Scenario {
        assert!(pe > 0.0, "Peclet number must be positive");
        Scenario {
            name: "homogeneous".into(),
            kind: ScenarioKind::Homogeneous,
            pe,
            coefficients: CoefficientField::constant(1.0 / pe, [1.0, 1.0], 1.0),
            boundary: all_dirichlet(),
            exact: None,
            interfaces: Vec::new(),
            mask: None,
            features: vec![format!(
                "boundary layer of width 1/Pe = {:e} along x=1 and y=1",
                1.0 / pe
            )],
        }
    }

    /// Piecewise constant diffusion: `Pe` on the masked quadrants, `1/Pe`
    /// elsewhere; `b = (1, 1)`, `f = 1`.
    pub fn checkerboard(pe: f64, mask: QuadrantMask) -> Scenario {
        assert!(pe > 0.0, "Peclet number must be positive");
        let (hi, lo) = (pe, 1.0 / pe);
        let mut s = Scenario::homogeneous(pe);
        s.name = "checkerboard".into();
        s.kind = ScenarioKind::Checkerboard;
        s.coefficients.diffusion = Arc::new(move |x| {
            let d = if mask.contains(x) { hi } else { lo };
            [[d, 0.0], [0.0, d]]
        });
        s.interfaces = vec![InterfaceLine::Vertical(0.5), InterfaceLine::Horizontal(0.5)];
        s.mask = Some(mask);
        s.features = vec![
            format!("solution vanishes in diffusion-dominated quadrants ({mask})"),
            "internal layers at interfaces with diffusion-dominated quadrants".into(),
        ];
        s
    }

    /// `D = 1/Pe`, `b = ((1 - 2x)/2, 0)`, which vanishes on `x = 1/2` and
    /// produces an internal layer there.
    pub fn variable_convection(pe: f64) -> Scenario {
        assert!(pe > 0.0, "Peclet number must be positive");
        let d = 1.0 / pe;
        Scenario {
            name: "variable_convection".into(),
            kind: ScenarioKind::VariableConvection,
            pe,
            coefficients: CoefficientField {
                diffusion: Arc::new(move |_| [[d, 0.0], [0.0, d]]),
                convection: Arc::new(|x: Point| [0.5 * (1.0 - 2.0 * x[0]), 0.0]),
                source: Arc::new(move |x: Point| {
                    (4.0 * x[0] - 2.0) / pe + x[1] * (1.0 - x[1] * x[1]) * (8.0 * x[0] - 4.0)
                }),
                neumann: Arc::new(|_| 0.0),
            },
            boundary: all_dirichlet(),
            exact: None,
            interfaces: Vec::new(),
            mask: None,
            features: vec!["sharp internal layer along x = 1/2".into()],
        }
    }

    /// `u = x(1-x) y(1-y)` with `D = d`, constant `b`. Both `u` and
    /// `q = d grad u` have per-direction degree 2, so any trial degree
    /// `p >= 2` reproduces them exactly.
    pub fn polynomial(d: f64, b: [f64; 2]) -> Scenario {
        let bubble = |t: f64| t * (1.0 - t);
        let dbubble = |t: f64| 1.0 - 2.0 * t;
        let grad = move |x: Point| [dbubble(x[0]) * bubble(x[1]), bubble(x[0]) * dbubble(x[1])];
        let lap = move |x: Point| -2.0 * bubble(x[1]) - 2.0 * bubble(x[0]);
        Scenario {
            name: "polynomial".into(),
            kind: ScenarioKind::Custom,
            pe: 1.0 / d,
            coefficients: CoefficientField {
                diffusion: Arc::new(move |_| [[d, 0.0], [0.0, d]]),
                convection: Arc::new(move |_| b),
                source: Arc::new(move |x| {
                    let g = grad(x);
                    -d * lap(x) + b[0] * g[0] + b[1] * g[1]
                }),
                neumann: Arc::new(|_| 0.0),
            },
            boundary: all_dirichlet(),
            exact: Some(ExactSolution {
                u: Arc::new(move |x| bubble(x[0]) * bubble(x[1])),
                grad_u: Arc::new(grad),
                flux: Arc::new(move |x| {
                    let g = grad(x);
                    [d * g[0], d * g[1]]
                }),
                div_flux: Arc::new(move |x| d * lap(x)),
            }),
            interfaces: Vec::new(),
            mask: None,
            features: Vec::new(),
        }
    }

    /// All data zero; the unique solution is zero.
    pub fn zero() -> Scenario {
        Scenario {
            name: "zero".into(),
            kind: ScenarioKind::Custom,
            pe: 1.0,
            coefficients: CoefficientField::constant(1.0, [1.0, 1.0], 0.0),
            boundary: all_dirichlet(),
            exact: Some(ExactSolution {
                u: Arc::new(|_| 0.0),
                grad_u: Arc::new(|_| [0.0, 0.0]),
                flux: Arc::new(|_| [0.0, 0.0]),
                div_flux: Arc::new(|_| 0.0),
            }),
            interfaces: Vec::new(),
            mask: None,
            features: Vec::new(),
        }
    }

    /// Switches the boundary pieces selected by `is_neumann` (given the
    /// edge midpoint) to Neumann, with `g = q . n` taken from the exact
    /// solution. The normal is the outward normal of the unit square.
    pub fn with_exact_neumann(mut self, is_neumann: impl Fn(Point) -> bool + Send + Sync + 'static) -> Scenario {
        let exact = self
            .exact
            .clone()
            .expect("Neumann data from the exact solution needs an exact solution");
        let is_neumann = Arc::new(is_neumann);
        let sel = is_neumann.clone();
        self.boundary = Arc::new(move |x| {
            if sel(x) {
                EdgeTag::Neumann
            } else {
                EdgeTag::Dirichlet
            }
        });
        self.coefficients.neumann = Arc::new(move |x: Point| {
            let q = (exact.flux)(x);
            let n = unit_square_normal(x);
            q[0] * n[0] + q[1] * n[1]
        });
        self
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }
}

/// Outward normal of the unit square at a boundary point (nearest side).
fn unit_square_normal(x: Point) -> [f64; 2] {
    let d = [x[0], 1.0 - x[0], x[1], 1.0 - x[1]];
    let k = (0..4).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
    [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]][k]
}

pub fn scenario_manufactured(pe: f64) -> Scenario {
    Scenario::manufactured(pe)
}

pub fn scenario_homogeneous(pe: f64) -> Scenario {
    Scenario::homogeneous(pe)
}

pub fn scenario_checkerboard(pe: f64, mask: QuadrantMask) -> Scenario {
    Scenario::checkerboard(pe, mask)
}

pub fn scenario_variable_convection(pe: f64) -> Scenario {
    Scenario::variable_convection(pe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive closed form straight from the definition; fine for small Pe.
    fn naive_factor(pe: f64, x: f64) -> f64 {
        x + ((pe * x).exp() - 1.0) / (1.0 - pe.exp())
    }

    #[test]
    fn stable_profile_matches_naive_form() {
        for pe in [0.5, 10.0, 40.0] {
            let prof = LayerProfile::new(pe);
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                assert_relative_eq!(prof.value(x), naive_factor(pe, x), epsilon = 1e-12, max_relative = 1e-12);
            }
        }
        // Large Pe stays finite and respects the boundary values.
        let prof = LayerProfile::new(1e9);
        assert_eq!(prof.value(0.0), 0.0);
        assert_abs_diff_eq!(prof.value(1.0), 0.0, epsilon = 1e-15);
        assert!(prof.value(0.5).is_finite());
    }

    #[test]
    fn manufactured_boundary_and_center() {
        let s = Scenario::manufactured(10.0);
        let ex = s.exact.as_ref().unwrap();
        for i in 0..=10 {
            let y = i as f64 / 10.0;
            assert_abs_diff_eq!((ex.u)([1.0, y]), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!((ex.u)([0.0, y]), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!((ex.u)([y, 0.0]), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!((ex.u)([y, 1.0]), 0.0, epsilon = 1e-15);
        }
        // (0.5 - 1/(e^5+1))^2, evaluated to 30 digits with mpmath:
        // 0.24335194332920984508600146549585576
        assert_abs_diff_eq!((ex.u)([0.5, 0.5]), 0.243_351_943_329_209_84, epsilon = 1e-15);
    }

    /// Centered differences of the closed-form u reproduce the analytic f.
    #[test]
    fn manufactured_source_matches_finite_differences() {
        let pe = 10.0;
        let s = Scenario::manufactured(pe);
        let u = s.exact.as_ref().unwrap().u.clone();
        let d = 1.0 / pe;
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: Point = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
            let ux = (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h);
            let uy = (u([x[0], x[1] + h]) - u([x[0], x[1] - h])) / (2.0 * h);
            let uxx = (u([x[0] + h, x[1]]) - 2.0 * u(x) + u([x[0] - h, x[1]])) / (h * h);
            let uyy = (u([x[0], x[1] + h]) - 2.0 * u(x) + u([x[0], x[1] - h])) / (h * h);
            let fd = -d * (uxx + uyy) + ux + uy;
            let f = (s.coefficients.source)(x);
            assert!((fd - f).abs() <= 1e-4 * f.abs().max(1.0), "{fd} vs {f}");
        }
    }

    #[test]
    fn manufactured_flux_and_divergence_consistent() {
        let s = Scenario::manufactured(10.0);
        let ex = s.exact.as_ref().unwrap();
        let h = 1e-6;
        for x in [[0.2, 0.3], [0.7, 0.9], [0.95, 0.5]] {
            let qx = |p: Point| (ex.flux)(p)[0];
            let qy = |p: Point| (ex.flux)(p)[1];
            let div = (qx([x[0] + h, x[1]]) - qx([x[0] - h, x[1]])) / (2.0 * h)
                + (qy([x[0], x[1] + h]) - qy([x[0], x[1] - h])) / (2.0 * h);
            assert_abs_diff_eq!(div, (ex.div_flux)(x), epsilon = 1e-6);
            // PDE: -div q + b . grad u = f
            let g = (ex.grad_u)(x);
            assert_abs_diff_eq!(-(ex.div_flux)(x) + g[0] + g[1], (s.coefficients.source)(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn homogeneous_values() {
        let s = Scenario::homogeneous(1e6);
        let c = &s.coefficients;
        assert_eq!((c.diffusion)([0.2, 0.2]), [[1e-6, 0.0], [0.0, 1e-6]]);
        assert_eq!((c.source)([0.3, 0.7]), 1.0);
        assert_eq!((c.convection)([0.9, 0.1]), [1.0, 1.0]);
        assert!(s.exact.is_none());
    }

    #[test]
    fn checkerboard_values() {
        let s = Scenario::checkerboard(1e4, QuadrantMask::off_diagonal());
        let d = |x: Point| (s.coefficients.diffusion)(x)[0][0];
        assert_eq!(d([0.75, 0.25]), 1e4);
        assert_eq!(d([0.25, 0.75]), 1e4);
        assert_eq!(d([0.25, 0.25]), 1e-4);
        assert_eq!(d([0.75, 0.75]), 1e-4);
        assert_eq!(s.interfaces.len(), 2);
    }

    #[test]
    fn empty_mask_is_homogeneous() {
        let a = Scenario::checkerboard(1e4, QuadrantMask::default());
        let b = Scenario::homogeneous(1e4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x: Point = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            assert_eq!((a.coefficients.diffusion)(x), (b.coefficients.diffusion)(x));
            assert_eq!((a.coefficients.convection)(x), (b.coefficients.convection)(x));
            assert_eq!((a.coefficients.source)(x), (b.coefficients.source)(x));
        }
    }

    #[test]
    fn variable_convection_values() {
        let s = Scenario::variable_convection(1e9);
        let c = &s.coefficients;
        for y in [0.0, 0.3, 1.0] {
            assert_eq!((c.convection)([0.5, y]), [0.0, 0.0]);
            assert_eq!((c.source)([0.5, y]), 0.0);
        }
        assert_abs_diff_eq!((c.source)([1.0, 0.5]), 2e-9 + 1.5, epsilon = 1e-15);
    }

    #[test]
    fn diffusion_spd_and_jumps_only_on_interfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scenarios = [
            Scenario::manufactured(10.0),
            Scenario::homogeneous(1e6),
            Scenario::checkerboard(1e4, QuadrantMask::off_diagonal()),
            Scenario::variable_convection(1e9),
        ];
        for s in &scenarios {
            for _ in 0..1000 {
                let x: Point = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
                let d = (s.coefficients.diffusion)(x);
                let tr = d[0][0] + d[1][1];
                let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
                assert!(d[0][1] == d[1][0] && tr > 0.0 && det > 0.0);
                // Small moves that do not cross a declared line keep D fixed.
                let y: Point = [x[0] + 1e-3, x[1] + 1e-3];
                let crosses = s.interfaces.iter().any(|l| match *l {
                    InterfaceLine::Vertical(c) => (x[0] - c) * (y[0] - c) <= 0.0,
                    InterfaceLine::Horizontal(c) => (x[1] - c) * (y[1] - c) <= 0.0,
                });
                if !crosses && y[0] < 1.0 && y[1] < 1.0 {
                    assert_eq!((s.coefficients.diffusion)(y), d);
                }
            }
        }
    }

    #[test]
    fn mask_parse_round_trip() {
        let m = QuadrantMask::parse("LR, UL").unwrap();
        assert_eq!(m, QuadrantMask::off_diagonal());
        assert_eq!(QuadrantMask::parse(&m.to_string()), Some(m));
        assert_eq!(QuadrantMask::parse("none"), Some(QuadrantMask::default()));
        assert!(QuadrantMask::parse("XX").is_none());
    }

    #[test]
    fn exact_neumann_data() {
        let s = Scenario::manufactured(10.0).with_exact_neumann(|x| x[0] > 0.999);
        assert_eq!((s.boundary)([1.0, 0.5]), EdgeTag::Neumann);
        assert_eq!((s.boundary)([0.0, 0.5]), EdgeTag::Dirichlet);
        let q = (s.exact.as_ref().unwrap().flux)([1.0, 0.3]);
        assert_eq!((s.coefficients.neumann)([1.0, 0.3]), q[0]);
    }
}
