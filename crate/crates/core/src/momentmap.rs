//! Moment maps `𝓟 = (p_1, …, p_n)` of the bundled integrable systems and
//! numerical rank / Morse checks on the cosphere `𝓒_x = {p_1(x, ·) = E_1}`.
//!
//! The rank of a system at `(x, ξ)` is the dimension of the span of
//! `∂_ξ p_2, …, ∂_ξ p_n` after projection onto the tangent space `T_ξ 𝓒_x`.
//! The ellipsoid lives on `T*S²` embedded in `ℝ³ × ℝ³`; its fibre carries the
//! linear constraint `x·ξ = 0`, which the tangent space also respects.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use thiserror::Error;

use crate::geometry::Profile;

pub type PhaseFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync>;
type PeriodicFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentMapError {
    #[error("Liouville condition min a > max b violated: min a = {min_a}, max b = {max_b}")]
    LiouvilleCondition { min_a: f64, max_b: f64 },
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("cosphere Newton solve did not converge (residual {residual:e})")]
    Solve { residual: f64 },
    #[error("∂_ξ p_1 vanishes at this point: not of real principal type")]
    PrincipalType,
    #[error("tolerance {0:e} outside [1e-12, 1e-2]")]
    Tolerance(f64),
    #[error("base point violates the phase-space constraint: {0}")]
    Constraint(String),
    #[error("grid of {grid} points too coarse: adjacent sign changes of dq/dθ near θ = {theta}")]
    Resolution { grid: usize, theta: f64 },
    #[error("operation needs a two-dimensional cosphere parametrization")]
    NotPlanar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    SurfaceOfRevolution,
    LiouvilleTorus,
    Ellipsoid,
    FlatTorus,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SurfaceOfRevolution => "sor",
            Self::LiouvilleTorus => "liouville_torus",
            Self::Ellipsoid => "ellipsoid",
            Self::FlatTorus => "flat_torus",
        })
    }
}

/// Periodic functions `a(x₁)`, `b(x₂)` of a Liouville metric
/// `(a(x₁) + b(x₂))(dx₁² + dx₂²)` on `ℝ²/ℤ²`.
#[derive(Clone)]
pub struct LiouvilleParams {
    pub a: PeriodicFn,
    pub b: PeriodicFn,
}

impl LiouvilleParams {
    pub fn constant(a: f64, b: f64) -> Self {
        Self { a: Arc::new(move |_| a), b: Arc::new(move |_| b) }
    }

    /// `a = a0 + a1 cos 2πx₁`, `b = b0 + b1 cos 2πx₂`.
    pub fn trigonometric(a0: f64, a1: f64, b0: f64, b1: f64) -> Self {
        Self {
            a: Arc::new(move |x| a0 + a1 * (TAU * x).cos()),
            b: Arc::new(move |x| b0 + b1 * (TAU * x).cos()),
        }
    }
}

/// Which family to build, with its parameters.
#[derive(Clone)]
pub enum SystemSpec {
    SurfaceOfRevolution(Profile),
    LiouvilleTorus(LiouvilleParams),
    /// Semi-axes `(a1, a2, a3)` with `a1 > a2 > a3 > 0`.
    Ellipsoid([f64; 3]),
    /// Torus dimension and the 0-based coordinates used as momenta
    /// (`n − 1` distinct indices).
    FlatTorus { n: usize, momenta: Vec<usize> },
}

/// An n-tuple of principal symbols with analytic ξ-gradients.
#[derive(Clone)]
pub struct SymbolSystem {
    pub label: String,
    pub kind: SystemKind,
    pub dim_x: usize,
    /// Ambient dimension of the fibre coordinates ξ.
    pub dim_xi: usize,
    /// Homogeneity degree of `p_1` in ξ.
    pub degree: f64,
    symbols: Vec<PhaseFn>,
    grads: Vec<GradFn>,
    /// `T*S² ⊂ ℝ³ × ℝ³`: base `|x| = 1`, fibre `x·ξ = 0`.
    sphere_constraint: bool,
    frame: Option<Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>>,
}

impl fmt::Debug for SymbolSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolSystem")
            .field("label", &self.label)
            .field("n", &self.n())
            .field("dim_x", &self.dim_x)
            .field("dim_xi", &self.dim_xi)
            .finish()
    }
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Constructs the symbol system of one of the bundled families.
pub fn build_system(spec: SystemSpec) -> Result<SymbolSystem, MomentMapError> {
    match spec {
        SystemSpec::SurfaceOfRevolution(profile) => Ok(sor_system(profile)),
        SystemSpec::LiouvilleTorus(params) => liouville_system(params),
        SystemSpec::Ellipsoid(axes) => ellipsoid_system(axes),
        SystemSpec::FlatTorus { n, momenta } => flat_torus_system(n, &momenta),
    }
}

fn sor_system(profile: Profile) -> SymbolSystem {
    let (pa, pb, pc) = (profile.clone(), profile.clone(), profile.clone());
    let p1: PhaseFn = Arc::new(move |x, xi| {
        let f = pa.f(x[0]);
        xi[0] * xi[0] + xi[1] * xi[1] / (f * f)
    });
    let g1: GradFn = Arc::new(move |x, xi| {
        let f = pb.f(x[0]);
        dvec(&[2.0 * xi[0], 2.0 * xi[1] / (f * f)])
    });
    let p2: PhaseFn = Arc::new(|_, xi| xi[1]);
    let g2: GradFn = Arc::new(|_, _| dvec(&[0.0, 1.0]));
    SymbolSystem {
        label: format!("sor[{}]", profile.name),
        kind: SystemKind::SurfaceOfRevolution,
        dim_x: 2,
        dim_xi: 2,
        degree: 2.0,
        symbols: vec![p1, p2],
        grads: vec![g1, g2],
        sphere_constraint: false,
        // cosphere ellipse (cos θ, f sin θ)
        frame: Some(Arc::new(move |x| {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, pc.f(x[0])])
        })),
    }
}

fn liouville_system(params: LiouvilleParams) -> Result<SymbolSystem, MomentMapError> {
    const GRID: usize = 256;
    let (mut min_a, mut max_b) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..GRID {
        let s = i as f64 / GRID as f64;
        min_a = min_a.min((params.a)(s));
        max_b = max_b.max((params.b)(s));
    }
    if !(min_a > max_b) || !(max_b > 0.0) {
        return Err(MomentMapError::LiouvilleCondition { min_a, max_b });
    }
    let ab = |params: &LiouvilleParams, x: &[f64]| ((params.a)(x[0]), (params.b)(x[1]));
    let (q1, q2, q3, q4) = (params.clone(), params.clone(), params.clone(), params);
    let p1: PhaseFn = Arc::new(move |x, xi| {
        let (a, b) = ab(&q1, x);
        (xi[0] * xi[0] + xi[1] * xi[1]) / (a + b)
    });
    let g1: GradFn = Arc::new(move |x, xi| {
        let (a, b) = ab(&q2, x);
        dvec(&[2.0 * xi[0] / (a + b), 2.0 * xi[1] / (a + b)])
    });
    let p2: PhaseFn = Arc::new(move |x, xi| {
        let (a, b) = ab(&q3, x);
        (b * xi[0] * xi[0] - a * xi[1] * xi[1]) / (a + b)
    });
    let g2: GradFn = Arc::new(move |x, xi| {
        let (a, b) = ab(&q4, x);
        dvec(&[2.0 * b * xi[0] / (a + b), -2.0 * a * xi[1] / (a + b)])
    });
    Ok(SymbolSystem {
        label: "liouville_torus".into(),
        kind: SystemKind::LiouvilleTorus,
        dim_x: 2,
        dim_xi: 2,
        degree: 2.0,
        symbols: vec![p1, p2],
        grads: vec![g1, g2],
        sphere_constraint: false,
        frame: Some(Arc::new(|_| DMatrix::identity(2, 2))),
    })
}

/// Angular-momentum components `(L₁, L₂, L₃) = (x₃ξ₂ − x₂ξ₃, x₁ξ₃ − x₃ξ₁, x₁ξ₂ − ξ₁x₂)`
/// with their ξ-gradients.
fn angular_momenta(x: &[f64], xi: &[f64]) -> ([f64; 3], [[f64; 3]; 3]) {
    let l1 = x[2] * xi[1] - x[1] * xi[2];
    let l2 = x[0] * xi[2] - x[2] * xi[0];
    let l3 = x[0] * xi[1] - xi[0] * x[1];
    let d1 = [0.0, x[2], -x[1]];
    let d2 = [-x[2], 0.0, x[0]];
    let d3 = [-x[1], x[0], 0.0];
    ([l1, l2, l3], [d1, d2, d3])
}

/// Quadratic form `Σ c_k L_k²` and its ξ-gradient.
fn weighted_momentum_sq(coef: [f64; 3]) -> (PhaseFn, GradFn) {
    let value: PhaseFn = Arc::new(move |x, xi| {
        let (l, _) = angular_momenta(x, xi);
        coef[0] * l[0] * l[0] + coef[1] * l[1] * l[1] + coef[2] * l[2] * l[2]
    });
    let grad: GradFn = Arc::new(move |x, xi| {
        let (l, d) = angular_momenta(x, xi);
        let mut g = DVector::zeros(3);
        for k in 0..3 {
            for i in 0..3 {
                g[i] += 2.0 * coef[k] * l[k] * d[k][i];
            }
        }
        g
    });
    (value, grad)
}

/// Orthonormal basis of `x^⊥` in ℝ³ as the columns of a 3×2 matrix.
fn tangent_plane_basis(x: &[f64]) -> DMatrix<f64> {
    let xv = nalgebra::Vector3::new(x[0], x[1], x[2]).normalize();
    let axis = (0..3)
        .min_by(|&i, &j| xv[i].abs().total_cmp(&xv[j].abs()))
        .expect("three axes");
    let mut a = nalgebra::Vector3::zeros();
    a[axis] = 1.0;
    let e1 = a.cross(&xv).normalize();
    let e2 = xv.cross(&e1);
    DMatrix::from_column_slice(3, 2, &[e1[0], e1[1], e1[2], e2[0], e2[1], e2[2]])
}

fn ellipsoid_system(axes: [f64; 3]) -> Result<SymbolSystem, MomentMapError> {
    let [a1, a2, a3] = axes;
    if !(a1 > a2 && a2 > a3 && a3 > 0.0) || axes.iter().any(|v| !v.is_finite()) {
        return Err(MomentMapError::Parameter(format!(
            "ellipsoid semi-axes must satisfy a1 > a2 > a3 > 0, got ({a1}, {a2}, {a3})"
        )));
    }
    // H = a3 L3² + a2 L2² + a1 L1², P = |L|²
    let (h, gh) = weighted_momentum_sq([a1, a2, a3]);
    let (p, gp) = weighted_momentum_sq([1.0, 1.0, 1.0]);
    Ok(SymbolSystem {
        label: format!("ellipsoid({a1},{a2},{a3})"),
        kind: SystemKind::Ellipsoid,
        dim_x: 3,
        dim_xi: 3,
        degree: 2.0,
        symbols: vec![h, p],
        grads: vec![gh, gp],
        sphere_constraint: true,
        frame: Some(Arc::new(tangent_plane_basis)),
    })
}

fn flat_torus_system(n: usize, momenta: &[usize]) -> Result<SymbolSystem, MomentMapError> {
    if n < 2 {
        return Err(MomentMapError::Parameter(format!("flat torus needs n ≥ 2, got {n}")));
    }
    let mut seen = vec![false; n];
    if momenta.len() != n - 1 {
        return Err(MomentMapError::Parameter(format!(
            "flat torus of dimension {n} needs {} momentum indices, got {}",
            n - 1,
            momenta.len()
        )));
    }
    for &i in momenta {
        if i >= n || seen[i] {
            return Err(MomentMapError::Parameter(format!("bad momentum index set {momenta:?}")));
        }
        seen[i] = true;
    }
    let p1: PhaseFn = Arc::new(|_, xi| xi.iter().map(|v| v * v).sum::<f64>().sqrt());
    let g1: GradFn = Arc::new(|_, xi| {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            DVector::zeros(xi.len())
        } else {
            dvec(xi) / r
        }
    });
    let mut symbols = vec![p1];
    let mut grads = vec![g1];
    for &i in momenta {
        symbols.push(Arc::new(move |_, xi| xi[i]));
        grads.push(Arc::new(move |_, xi| {
            let mut g = DVector::zeros(xi.len());
            g[i] = 1.0;
            g
        }));
    }
    let label = format!(
        "flat_torus(n={n}; momenta {})",
        momenta.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
    );
    Ok(SymbolSystem {
        label,
        kind: SystemKind::FlatTorus,
        dim_x: n,
        dim_xi: n,
        degree: 1.0,
        symbols,
        grads,
        sphere_constraint: false,
        frame: (n == 2).then(|| Arc::new(|_: &[f64]| DMatrix::identity(2, 2)) as Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>),
    })
}

impl SymbolSystem {
    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn eval(&self, j: usize, x: &[f64], xi: &[f64]) -> f64 {
        (self.symbols[j])(x, xi)
    }

    pub fn grad(&self, j: usize, x: &[f64], xi: &[f64]) -> DVector<f64> {
        (self.grads[j])(x, xi)
    }

    pub fn values(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        self.symbols.iter().map(|p| p(x, xi)).collect()
    }

    pub fn has_constraint(&self) -> bool {
        self.sphere_constraint
    }

    /// Orthonormal normals of the fibre constraints at `x` (empty when the
    /// fibre is the whole of ℝ^dim_xi).
    pub fn fiber_normals(&self, x: &[f64]) -> Vec<DVector<f64>> {
        if self.sphere_constraint {
            vec![dvec(x).normalize()]
        } else {
            Vec::new()
        }
    }

    /// Checks that `x` is an admissible base point.
    pub fn check_point(&self, x: &[f64]) -> Result<(), MomentMapError> {
        if x.len() != self.dim_x {
            return Err(MomentMapError::Constraint(format!(
                "expected {} coordinates, got {}",
                self.dim_x,
                x.len()
            )));
        }
        if self.sphere_constraint {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if (r2 - 1.0).abs() > 1e-10 {
                return Err(MomentMapError::Constraint(format!("|x|² = {r2}, expected 1")));
            }
        }
        if self.kind == SystemKind::SurfaceOfRevolution {
            // p1 divides by f(t)²; the frame at x tells us f(t).
            let f = self.frame.as_ref().map(|fr| fr(x)[(1, 1)]).unwrap_or(1.0);
            if !(f > crate::geometry::POLE_RADIUS) {
                return Err(MomentMapError::Constraint(format!("t = {} is a pole", x[0])));
            }
        }
        Ok(())
    }

    /// Linear map from `(cos θ, sin θ)` to a fibre direction, for systems
    /// whose cosphere is a closed curve.
    pub fn cosphere_frame(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.frame.as_ref().map(|f| f(x))
    }

    /// Replaces `p_j` by `c·p_j` (`j ≥ 1`).
    pub fn scaled(&self, j: usize, c: f64) -> Self {
        let mut out = self.clone();
        let (p, g) = (self.symbols[j].clone(), self.grads[j].clone());
        out.symbols[j] = Arc::new(move |x, xi| c * p(x, xi));
        out.grads[j] = Arc::new(move |x, xi| g(x, xi) * c);
        out
    }

    /// Reorders `p_2, …, p_n` (`order` is a permutation of `1..n`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        for (slot, &src) in order.iter().enumerate() {
            out.symbols[slot + 1] = self.symbols[src].clone();
            out.grads[slot + 1] = self.grads[src].clone();
        }
        out
    }

    /// Appends the symbol `g(p_1, …, p_n)` given `g` and its partial
    /// derivatives.
    pub fn with_function_of(
        &self,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        dg: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let mut out = self.clone();
        let base = self.clone();
        let base2 = self.clone();
        out.symbols.push(Arc::new(move |x, xi| g(&base.values(x, xi))));
        out.grads.push(Arc::new(move |x, xi| {
            let w = dg(&base2.values(x, xi));
            let mut acc = DVector::zeros(xi.len());
            for (j, wj) in w.iter().enumerate() {
                acc += base2.grad(j, x, xi) * *wj;
            }
            acc
        }));
        out.label = format!("{}+derived", self.label);
        out
    }
}

fn project_out(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut w = v.clone();
    for b in basis {
        let c = w.dot(b);
        w -= b * c;
    }
    w
}

/// Scales `direction` (first projected onto the fibre constraint plane) to
/// the cosphere `p_1(x, ·) = e1` by Newton's method from `c = 1`.
pub fn cosphere_solve(sys: &SymbolSystem, x: &[f64], direction: &[f64], e1: f64) -> Result<DVector<f64>, MomentMapError> {
    sys.check_point(x)?;
    if direction.len() != sys.dim_xi {
        return Err(MomentMapError::Parameter(format!(
            "direction has {} components, fibre has {}",
            direction.len(),
            sys.dim_xi
        )));
    }
    if !(e1 > 0.0) {
        return Err(MomentMapError::Parameter(format!("energy must be positive, got {e1}")));
    }
    let d = project_out(&dvec(direction), &sys.fiber_normals(x));
    if d.norm() <= 1e-14 {
        return Err(MomentMapError::Parameter("direction has no component in the fibre".into()));
    }
    let mut c = 1.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..50 {
        let xi = &d * c;
        residual = sys.eval(0, x, xi.as_slice()) - e1;
        if residual.abs() <= 1e-12 * e1.max(1.0) {
            return Ok(xi);
        }
        let slope = sys.grad(0, x, xi.as_slice()).dot(&d);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = c - residual / slope;
        // stay on the ray
        c = if next > 0.0 { next } else { 0.5 * c };
    }
    Err(MomentMapError::Solve { residual })
}

/// How the symbol gradients are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankMode {
    /// Project `∂_ξ p_j` onto `T_ξ 𝓒_x` first.
    #[default]
    Tangential,
    /// Use the raw gradients (for comparison only).
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// Singular values of the (projected) gradient matrix, descending.
    pub singular_values: Vec<f64>,
    /// Absolute threshold actually applied: `tol · max(σ_max, 1)`.
    pub tol_used: f64,
    /// Orthonormal basis of `T_ξ 𝓒_x`, one column per tangent direction.
    pub tangent_basis: DMatrix<f64>,
}

/// Orthonormal basis of the tangent space of the cosphere at ξ.
pub fn cosphere_tangent_basis(sys: &SymbolSystem, x: &[f64], xi: &[f64]) -> Result<DMatrix<f64>, MomentMapError> {
    let mut normals = sys.fiber_normals(x);
    let g1 = project_out(&sys.grad(0, x, xi), &normals);
    let scale = sys.grad(0, x, xi).norm().max(1e-300);
    if g1.norm() <= 1e-12 * scale.max(1.0) || !g1.norm().is_finite() {
        return Err(MomentMapError::PrincipalType);
    }
    normals.push(g1.normalize());
    let dim = sys.dim_xi;
    let mut tangent: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        if normals.len() + tangent.len() == dim {
            break;
        }
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        let w = project_out(&project_out(&e, &normals), &tangent);
        // second pass for numerical orthogonality
        let w = project_out(&project_out(&w, &normals), &tangent);
        if w.norm() > 1e-8 {
            tangent.push(w.normalize());
        }
    }
    Ok(DMatrix::from_columns(&tangent))
}

/// Rank of `{∂_ξ p_2, …, ∂_ξ p_n}` as a subspace of `T_ξ 𝓒_x`.
pub fn rank_at(sys: &SymbolSystem, x: &[f64], xi: &[f64], tol: f64) -> Result<RankReport, MomentMapError> {
    rank_at_with(sys, x, xi, tol, RankMode::Tangential)
}

pub fn rank_at_with(sys: &SymbolSystem, x: &[f64], xi: &[f64], tol: f64, mode: RankMode) -> Result<RankReport, MomentMapError> {
    if !(1e-12..=1e-2).contains(&tol) {
        return Err(MomentMapError::Tolerance(tol));
    }
    sys.check_point(x)?;
    let basis = cosphere_tangent_basis(sys, x, xi)?;
    let rows = sys.n() - 1;
    let gradients: Vec<DVector<f64>> = (1..sys.n()).map(|j| sys.grad(j, x, xi)).collect();
    let m = match mode {
        RankMode::Tangential => {
            let mut m = DMatrix::zeros(rows, basis.ncols());
            for (r, g) in gradients.iter().enumerate() {
                for c in 0..basis.ncols() {
                    m[(r, c)] = g.dot(&basis.column(c));
                }
            }
            m
        }
        RankMode::Full => {
            let mut m = DMatrix::zeros(rows, sys.dim_xi);
            for (r, g) in gradients.iter().enumerate() {
                m.row_mut(r).copy_from(&g.transpose());
            }
            m
        }
    };
    let mut singular_values: Vec<f64> = if m.ncols() == 0 || m.nrows() == 0 {
        Vec::new()
    } else {
        m.svd(false, false).singular_values.iter().copied().collect()
    };
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tol_used = tol * sigma_max.max(1.0);
    let rank = singular_values.iter().filter(|&&s| s > tol_used).count();
    Ok(RankReport { rank, singular_values, tol_used, tangent_basis: basis })
}

/// One scanned cosphere direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    /// Angle in the cosphere parametrization, when it is a closed curve.
    pub theta: Option<f64>,
    pub xi: DVector<f64>,
    pub report: RankReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankScan {
    pub min_rank: usize,
    pub max_rank: usize,
    pub points: Vec<ScanPoint>,
    /// Indices into `points` with rank below `max_rank`.
    pub degenerate: Vec<usize>,
}

impl RankScan {
    pub fn degenerate_thetas(&self) -> Vec<f64> {
        self.degenerate.iter().filter_map(|&i| self.points[i].theta).collect()
    }
}

/// Cosphere point at angle θ of the system's cosphere frame, `p_1 = 1`.
pub fn cosphere_point(sys: &SymbolSystem, x: &[f64], theta: f64) -> Result<DVector<f64>, MomentMapError> {
    let frame = sys.cosphere_frame(x).ok_or(MomentMapError::NotPlanar)?;
    let dir = &frame * nalgebra::Vector2::new(theta.cos(), theta.sin());
    cosphere_solve(sys, x, dir.as_slice(), 1.0)
}

/// Directions for fibres of dimension ≥ 3: a Fibonacci sphere in ℝ³,
/// seeded Gaussian directions otherwise.
fn sphere_design(dim: usize, samples: usize) -> Vec<Vec<f64>> {
    if dim == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..samples)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / samples as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                vec![r * a.cos(), r * a.sin(), z]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc05_9e7e);
        (0..samples)
            .map(|_| {
                // Box–Muller
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                        let u2: f64 = rng.random();
                        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
                    })
                    .collect();
                let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.into_iter().map(|a| a / r).collect()
            })
            .collect()
    }
}

/// Rank over a grid of cosphere directions at `x`.
pub fn rank_scan(sys: &SymbolSystem, x: &[f64], samples: usize, tol: f64) -> Result<RankScan, MomentMapError> {
    if samples == 0 {
        return Err(MomentMapError::Parameter("rank scan needs at least one sample".into()));
    }
    let mut points = Vec::with_capacity(samples);
    if sys.cosphere_frame(x).is_some() {
        for k in 0..samples {
            let theta = TAU * k as f64 / samples as f64;
            let xi = cosphere_point(sys, x, theta)?;
            let report = rank_at(sys, x, xi.as_slice(), tol)?;
            points.push(ScanPoint { theta: Some(theta), xi, report });
        }
    } else {
        for dir in sphere_design(sys.dim_xi, samples) {
            let xi = cosphere_solve(sys, x, &dir, 1.0)?;
            let report = rank_at(sys, x, xi.as_slice(), tol)?;
            points.push(ScanPoint { theta: None, xi, report });
        }
    }
    let min_rank = points.iter().map(|p| p.report.rank).min().unwrap_or(0);
    let max_rank = points.iter().map(|p| p.report.rank).max().unwrap_or(0);
    let degenerate = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.report.rank < max_rank)
        .map(|(i, _)| i)
        .collect();
    Ok(RankScan { min_rank, max_rank, points, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub theta: f64,
    /// `q(θ)` on the cosphere `p_1 = 1`.
    pub value: f64,
    pub second_derivative: f64,
    pub nondegenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseReport {
    pub critical_points: Vec<CriticalPoint>,
    pub all_nondegenerate: bool,
}

/// Critical points of `q(θ) = combiner(p_1, …, p_n)(x, ξ(θ))` along the
/// cosphere and their second derivatives.
pub fn morse_check(
    sys: &SymbolSystem,
    combiner: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    grid: usize,
    tol: f64,
) -> Result<MorseReport, MomentMapError> {
    if grid < 8 {
        return Err(MomentMapError::Parameter(format!("Morse grid needs ≥ 8 points, got {grid}")));
    }
    sys.check_point(x)?;
    sys.cosphere_frame(x).ok_or(MomentMapError::NotPlanar)?;
    let q = |theta: f64| -> Result<f64, MomentMapError> {
        let xi = cosphere_point(sys, x, theta)?;
        Ok(combiner(&sys.values(x, xi.as_slice())))
    };
    const D1: f64 = 1e-5;
    const D2: f64 = 1e-4;
    let dq = |theta: f64| -> Result<f64, MomentMapError> { Ok((q(theta + D1)? - q(theta - D1)?) / (2.0 * D1)) };
    let d2q = |theta: f64| -> Result<f64, MomentMapError> {
        Ok((q(theta + D2)? - 2.0 * q(theta)? + q(theta - D2)?) / (D2 * D2))
    };

    // Half-cell offset keeps exact critical angles off the nodes.
    let node = |i: usize| TAU * (i as f64 + 0.5) / grid as f64;
    let slopes = (0..grid).map(|i| dq(node(i))).collect::<Result<Vec<_>, _>>()?;
    let changes: Vec<bool> = (0..grid)
        .map(|i| {
            let (a, b) = (slopes[i], slopes[(i + 1) % grid]);
            a * b < 0.0 || (b == 0.0 && a != 0.0)
        })
        .collect();
    let mut critical_points = Vec::new();
    for i in 0..grid {
        if !changes[i] {
            continue;
        }
        if changes[(i + 1) % grid] {
            return Err(MomentMapError::Resolution { grid, theta: node(i + 1) });
        }
        let (mut lo, mut hi) = (node(i), node(i) + TAU / grid as f64);
        let s_lo = slopes[i].signum();
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let s = dq(mid)?;
            if s == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if s.signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        let theta = (0.5 * (lo + hi)).rem_euclid(TAU);
        let second = d2q(theta)?;
        critical_points.push(CriticalPoint {
            theta,
            value: q(theta)?,
            second_derivative: second,
            nondegenerate: second.abs() > tol,
        });
    }
    critical_points.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let all_nondegenerate = critical_points.iter().all(|c| c.nondegenerate);
    Ok(MorseReport { critical_points, all_nondegenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn flat(n: usize, momenta: &[usize]) -> SymbolSystem {
        build_system(SystemSpec::FlatTorus { n, momenta: momenta.to_vec() }).unwrap()
    }

    #[test]
    fn liouville_p2_on_cosphere() {
        let sys = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::constant(2.0, 1.0))).unwrap();
        let x = [0.3, 0.7];
        for theta in [0.0, 0.4, 1.3, 2.9] {
            let xi = cosphere_point(&sys, &x, theta).unwrap();
            let (u, v) = (xi[0], xi[1]);
            assert!((u * u + v * v - 3.0).abs() < 1e-11);
            let p2 = sys.eval(1, &x, xi.as_slice());
            assert!((p2 - (u * u - 2.0 * v * v) / 3.0).abs() < 1e-14);
            // β cos²θ − α sin²θ
            assert!((p2 - (theta.cos().powi(2) - 2.0 * theta.sin().powi(2))).abs() < 1e-11);
        }
    }

    #[test]
    fn liouville_condition_enforced() {
        let r = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::constant(1.0, 2.0)));
        assert!(matches!(r, Err(MomentMapError::LiouvilleCondition { .. })));
        let r = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::trigonometric(2.0, 0.6, 1.0, 0.5)));
        assert!(matches!(r, Err(MomentMapError::LiouvilleCondition { .. })));
    }

    #[test]
    fn ellipsoid_axes_must_be_ordered() {
        assert!(matches!(build_system(SystemSpec::Ellipsoid([1.0, 2.0, 3.0])), Err(MomentMapError::Parameter(_))));
    }

    #[test]
    fn ellipsoid_p_is_h_over_a2_on_gamma() {
        let sys = build_system(SystemSpec::Ellipsoid([3.0, 2.0, 1.0])).unwrap();
        let alpha: f64 = 0.7;
        let x = [alpha.cos(), 0.0, alpha.sin()];
        for c in [0.5, 1.0, 2.0] {
            let xi = [-alpha.sin() * c, 0.0, alpha.cos() * c];
            let (h, p) = (sys.eval(0, &x, &xi), sys.eval(1, &x, &xi));
            assert!((p - h / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_torus_momentum_gradient_is_constant() {
        let sys = flat(3, &[1, 2]);
        let xi = [0.3, -0.2, 0.9];
        assert_eq!(sys.values(&[0.0; 3], &xi)[1], -0.2);
        assert_eq!(sys.grad(1, &[0.0; 3], &xi).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn cosphere_solve_examples() {
        let xi = cosphere_solve(&flat(2, &[1]), &[0.0, 0.0], &[0.6, 0.8], 1.0).unwrap();
        assert!((xi[0] - 0.6).abs() < 1e-14 && (xi[1] - 0.8).abs() < 1e-14);

        let sor = build_system(SystemSpec::SurfaceOfRevolution(Profile::sphere())).unwrap();
        let xi = cosphere_solve(&sor, &[FRAC_PI_3, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!(xi[0].abs() < 1e-15 && (xi[1] - 0.5).abs() < 1e-12);

        let lv = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::constant(2.0, 1.0))).unwrap();
        let xi = cosphere_solve(&lv, &[0.1, 0.2], &[1.0, 0.0], 1.0).unwrap();
        assert!((xi[0] - 3f64.sqrt()).abs() < 1e-12 && xi[1] == 0.0);
    }

    #[test]
    fn sor_rank_examples() {
        let sor = build_system(SystemSpec::SurfaceOfRevolution(Profile::sphere())).unwrap();
        let x = [FRAC_PI_4, 0.0];
        let vertical = cosphere_point(&sor, &x, FRAC_PI_2).unwrap();
        assert_eq!(rank_at(&sor, &x, vertical.as_slice(), 1e-8).unwrap().rank, 0);
        let oblique = cosphere_point(&sor, &x, 0.3).unwrap();
        assert_eq!(rank_at(&sor, &x, oblique.as_slice(), 1e-8).unwrap().rank, 1);
    }

    #[test]
    fn flat_torus_frame_change_raises_rank() {
        let p = flat(3, &[1, 2]);
        let q = flat(3, &[0, 2]);
        let xi = [0.0, 1.0, 0.0];
        assert_eq!(rank_at(&p, &[0.0; 3], &xi, 1e-8).unwrap().rank, 1);
        assert_eq!(rank_at(&q, &[0.0; 3], &xi, 1e-8).unwrap().rank, 2);
    }

    #[test]
    fn principal_type_failure_at_zero_covector() {
        let p = flat(2, &[1]);
        assert_eq!(rank_at(&p, &[0.0; 2], &[0.0, 0.0], 1e-8), Err(MomentMapError::PrincipalType));
    }

    #[test]
    fn rank_tolerance_range() {
        let p = flat(2, &[1]);
        assert!(matches!(rank_at(&p, &[0.0; 2], &[1.0, 0.0], 0.5), Err(MomentMapError::Tolerance(_))));
    }

    #[test]
    fn liouville_scan_finds_axis_directions() {
        let sys = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::constant(2.0, 1.0))).unwrap();
        let scan = rank_scan(&sys, &[0.2, 0.6], 360, 1e-8).unwrap();
        assert_eq!((scan.min_rank, scan.max_rank), (0, 1));
        let thetas = scan.degenerate_thetas();
        assert_eq!(thetas.len(), 4);
        for (t, k) in thetas.iter().zip(0..) {
            assert!((t - k as f64 * FRAC_PI_2).abs() <= TAU / 360.0);
        }
    }

    #[test]
    fn flat_scan_degenerate_at_poles_of_momentum() {
        let scan = rank_scan(&flat(2, &[1]), &[0.0, 0.0], 64, 1e-8).unwrap();
        let thetas = scan.degenerate_thetas();
        assert_eq!(thetas.len(), 2);
        assert!((thetas[0] - FRAC_PI_2).abs() < 1e-12 && (thetas[1] - 3.0 * FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn full_mode_ignores_tangency() {
        let sor = build_system(SystemSpec::SurfaceOfRevolution(Profile::sphere())).unwrap();
        let x = [FRAC_PI_4, 0.0];
        let vertical = cosphere_point(&sor, &x, FRAC_PI_2).unwrap();
        let r = rank_at_with(&sor, &x, vertical.as_slice(), 1e-8, RankMode::Full).unwrap();
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn liouville_morse_second_derivatives() {
        let sys = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::constant(2.0, 1.0))).unwrap();
        let r = morse_check(&sys, &|p| p[1], &[0.1, 0.9], 360, 1e-6).unwrap();
        assert!(r.all_nondegenerate);
        assert_eq!(r.critical_points.len(), 4);
        for (c, k) in r.critical_points.iter().zip(0..) {
            assert!((c.theta - k as f64 * FRAC_PI_2).abs() < 1e-8, "{c:?}");
            // q = β cos²θ − α sin²θ: q'' = −6 at even k, +6 at odd k
            let expected = if k % 2 == 0 { -6.0 } else { 6.0 };
            assert!((c.second_derivative - expected).abs() < 1e-5, "{c:?}");
            let value = if k % 2 == 0 { 1.0 } else { -2.0 };
            assert!((c.value - value).abs() < 1e-10);
        }
    }

    #[test]
    fn sor_morse_at_vertical_covectors() {
        let sor = build_system(SystemSpec::SurfaceOfRevolution(Profile::sphere())).unwrap();
        let r = morse_check(&sor, &|p| p[1], &[FRAC_PI_4, 0.0], 180, 1e-6).unwrap();
        assert_eq!(r.critical_points.len(), 2);
        let f = FRAC_PI_4.cos();
        assert!((r.critical_points[0].theta - FRAC_PI_2).abs() < 1e-8);
        assert!((r.critical_points[0].second_derivative + f).abs() < 1e-5);
        assert!((r.critical_points[1].theta - 3.0 * FRAC_PI_2).abs() < 1e-8);
        assert!((r.critical_points[1].second_derivative - f).abs() < 1e-5);
        assert!(r.all_nondegenerate);
    }

    #[test]
    fn coarse_morse_grid_is_rejected() {
        // q = cos(40 sin θ) oscillates faster than a 64-point grid resolves near θ = 0
        let sys = flat(2, &[1]);
        let r = morse_check(&sys, &|p| (40.0 * p[1]).cos(), &[0.0, 0.0], 64, 1e-6);
        assert!(matches!(r, Err(MomentMapError::Resolution { .. })), "{r:?}");
        let fine = morse_check(&sys, &|p| (40.0 * p[1]).cos(), &[0.0, 0.0], 4096, 1e-6).unwrap();
        // cos θ · sin(40 sin θ) = 0: θ = ±π/2 and sin θ = kπ/40, |k| ≤ 12
        assert_eq!(fine.critical_points.len(), 2 + 2 * 25);
    }
}
