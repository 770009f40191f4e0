//! Composite objectives `F = f + g`, reproducible test instances, and the
//! reference solver that certifies `F*` and `x*`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::prox::{ProxOracle, Regularizer};

/// Default tolerance used when an instance needs `F*` certified numerically.
pub const REFERENCE_TOLERANCE: f64 = 1e-12;
/// Default iteration budget of [`reference_solve`].
pub const REFERENCE_BUDGET: usize = 1_000_000;

const POWER_ITERATION_TOL: f64 = 1e-10;
const POWER_ITERATION_MAX: usize = 10_000;

/// A convex, `L`-smooth function with optional strong convexity modulus.
pub trait SmoothOracle: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    /// Strong convexity modulus; zero when only convex.
    fn strong_convexity(&self) -> f64;
}

/// `f(x) = ½⟨Ax, x⟩ − ⟨b, x⟩` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lipschitz: f64,
    mu: f64,
}

impl Quadratic {
    /// Builds the quadratic with declared constants `lipschitz` and `mu`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, lipschitz: f64, mu: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: b.len(),
                actual: a.nrows(),
            });
        }
        check_constants(lipschitz, mu)?;
        Ok(Quadratic { a, b, lipschitz, mu })
    }

    /// Reads `L` and `μ` off the symmetric eigendecomposition of `A`.
    pub fn from_matrix(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        let eig = a.clone().symmetric_eigen();
        let lipschitz = eig.eigenvalues.max();
        let mu = eig.eigenvalues.min().max(0.0);
        Self::new(a, b, lipschitz, mu)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothOracle for Quadratic {
    fn dimension(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.a * x).dot(x) - self.b.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }
}

/// `f(x) = ½‖Mx − b‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    m: DMatrix<f64>,
    b: DVector<f64>,
    lipschitz: f64,
}

impl LeastSquares {
    /// `L` is the largest eigenvalue of `MᵀM`, found by power iteration.
    pub fn new(m: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if m.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                actual: b.len(),
            });
        }
        let lipschitz = power_iteration(
            |v| m.tr_mul(&(&m * v)),
            m.ncols(),
            POWER_ITERATION_TOL,
            POWER_ITERATION_MAX,
        );
        check_constants(lipschitz, 0.0)?;
        Ok(LeastSquares { m, b, lipschitz })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothOracle for LeastSquares {
    fn dimension(&self) -> usize {
        self.m.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.m * x - &self.b).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.m.tr_mul(&(&self.m * x - &self.b))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        0.0
    }
}

fn check_constants(lipschitz: f64, mu: f64) -> Result<()> {
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::config("L", format!("must be finite and > 0, got {lipschitz}")));
    }
    if !(mu.is_finite() && mu >= 0.0 && mu <= lipschitz) {
        return Err(Error::config(
            "mu",
            format!("must lie in [0, L = {lipschitz}], got {mu}"),
        ));
    }
    Ok(())
}

/// Largest eigenvalue of a symmetric positive semidefinite operator.
///
/// Iterates from the normalized all-ones vector and stops once the Rayleigh
/// quotient changes by at most `rel_tol` relative to its current value.
pub fn power_iteration(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    dimension: usize,
    rel_tol: f64,
    max_iterations: usize,
) -> f64 {
    let mut v = DVector::from_element(dimension, 1.0 / (dimension as f64).sqrt());
    let mut estimate = apply(&v).dot(&v);
    for _ in 0..max_iterations {
        let w = apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let next = apply(&v).dot(&v);
        let done = (next - estimate).abs() <= rel_tol * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Recipe for regenerating an instance from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDocument", into = "InstanceDocument")]
pub enum InstanceDescriptor {
    Quadratic {
        dimension: usize,
        condition_number: f64,
        seed: u64,
        regularizer: Regularizer,
    },
    Lasso {
        rows: usize,
        cols: usize,
        reg_weight: f64,
        seed: u64,
    },
}

impl InstanceDescriptor {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            InstanceDescriptor::Quadratic {
                dimension,
                condition_number,
                seed,
                regularizer,
            } => make_regularized_quadratic(*dimension, *condition_number, regularizer.clone(), *seed),
            InstanceDescriptor::Lasso {
                rows,
                cols,
                reg_weight,
                seed,
            } => make_lasso(*rows, *cols, *reg_weight, *seed),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InstanceDescriptor::Quadratic { .. } => "quadratic",
            InstanceDescriptor::Lasso { .. } => "lasso",
        }
    }

    /// Short human-readable label, e.g. `lasso(20x40,reg=0.5,seed=7)`.
    pub fn label(&self) -> String {
        match self {
            InstanceDescriptor::Quadratic {
                dimension,
                condition_number,
                seed,
                regularizer,
            } => {
                let reg = match regularizer {
                    Regularizer::Zero => String::new(),
                    Regularizer::L1 { weight } => format!(",l1={weight}"),
                    Regularizer::SquaredL2 { weight } => format!(",l2={weight}"),
                    Regularizer::BoxIndicator { .. } => ",box".to_string(),
                };
                format!("quadratic(dim={dimension},cond={condition_number}{reg},seed={seed})")
            }
            InstanceDescriptor::Lasso {
                rows,
                cols,
                reg_weight,
                seed,
            } => format!("lasso({rows}x{cols},reg={reg_weight},seed={seed})"),
        }
    }
}

/// JSON form of an instance: `{kind, dimension, seed, parameters, L, mu,
/// known_minimum?}`. Matrices are regenerated from the seed and never
/// serialized; `L`, `mu` and `known_minimum` are informational on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub kind: String,
    pub dimension: usize,
    pub seed: u64,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_minimum: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticParameters {
    condition_number: f64,
    #[serde(default)]
    regularizer: Regularizer,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LassoParameters {
    rows: usize,
    reg_weight: f64,
}

impl TryFrom<InstanceDocument> for InstanceDescriptor {
    type Error = Error;

    fn try_from(doc: InstanceDocument) -> Result<Self> {
        let params = Value::Object(doc.parameters);
        let bad = |e: serde_json::Error| Error::config("parameters", e.to_string());
        match doc.kind.as_str() {
            "quadratic" => {
                let p: QuadraticParameters = serde_json::from_value(params).map_err(bad)?;
                Ok(InstanceDescriptor::Quadratic {
                    dimension: doc.dimension,
                    condition_number: p.condition_number,
                    seed: doc.seed,
                    regularizer: p.regularizer,
                })
            }
            "lasso" => {
                let p: LassoParameters = serde_json::from_value(params).map_err(bad)?;
                Ok(InstanceDescriptor::Lasso {
                    rows: p.rows,
                    cols: doc.dimension,
                    reg_weight: p.reg_weight,
                    seed: doc.seed,
                })
            }
            other => Err(Error::config("kind", format!("unknown instance kind {other:?}"))),
        }
    }
}

impl From<InstanceDescriptor> for InstanceDocument {
    fn from(d: InstanceDescriptor) -> Self {
        let mut parameters = Map::new();
        let (kind, dimension, seed) = match d {
            InstanceDescriptor::Quadratic {
                dimension,
                condition_number,
                seed,
                regularizer,
            } => {
                parameters.insert("condition_number".into(), condition_number.into());
                parameters.insert(
                    "regularizer".into(),
                    serde_json::to_value(regularizer).expect("regularizer serializes"),
                );
                ("quadratic", dimension, seed)
            }
            InstanceDescriptor::Lasso {
                rows,
                cols,
                reg_weight,
                seed,
            } => {
                parameters.insert("rows".into(), rows.into());
                parameters.insert("reg_weight".into(), reg_weight.into());
                ("lasso", cols, seed)
            }
        };
        InstanceDocument {
            kind: kind.to_string(),
            dimension,
            seed,
            parameters,
            lipschitz: None,
            mu: None,
            known_minimum: None,
        }
    }
}

/// An `(f, g)` pair with certified reference data when available.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub f: Arc<dyn SmoothOracle>,
    pub g: Regularizer,
    pub known_minimum: Option<f64>,
    pub known_minimizer: Option<DVector<f64>>,
    pub seed: u64,
    pub descriptor: Option<InstanceDescriptor>,
}

impl ProblemInstance {
    pub fn new(f: Arc<dyn SmoothOracle>, g: Regularizer) -> Result<Self> {
        g.validate(Some(f.dimension()))?;
        Ok(ProblemInstance {
            f,
            g,
            known_minimum: None,
            known_minimizer: None,
            seed: 0,
            descriptor: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.f.dimension()
    }

    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz()
    }

    pub fn strong_convexity(&self) -> f64 {
        self.f.strong_convexity()
    }

    /// `F(x) = f(x) + g(x)`, `+∞` outside `dom g`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let g = self.g.value(x);
        if g == f64::INFINITY {
            return f64::INFINITY;
        }
        self.f.value(x) + g
    }

    /// One proximal-gradient step `prox(s, x − s∇f(x))`.
    pub fn prox_grad_step(&self, x: &DVector<f64>, s: f64) -> DVector<f64> {
        let grad = self.f.gradient(x);
        self.g.prox(s, &(x - grad * s))
    }

    /// `‖x − prox(s, x − s∇f(x))‖`; zero exactly at minimizers.
    pub fn fixed_point_residual(&self, x: &DVector<f64>, s: f64) -> f64 {
        (x - self.prox_grad_step(x, s)).norm()
    }

    /// Certified `(x*, F*)`: the stored values if present, otherwise a fresh
    /// [`reference_solve`] at the default tolerance and budget.
    pub fn reference(&self) -> Result<(DVector<f64>, f64)> {
        match (&self.known_minimizer, self.known_minimum) {
            (Some(x), Some(v)) => Ok((x.clone(), v)),
            (Some(x), None) => Ok((x.clone(), self.objective(x))),
            _ => {
                let sol = reference_solve(self, &ReferenceOptions::default())?;
                Ok((sol.minimizer, sol.minimum))
            }
        }
    }

    /// Fills `known_minimizer`/`known_minimum` from [`reference_solve`].
    pub fn certify(mut self) -> Result<Self> {
        let sol = reference_solve(&self, &ReferenceOptions::default())?;
        self.known_minimizer = Some(sol.minimizer);
        self.known_minimum = Some(sol.minimum);
        Ok(self)
    }

    pub fn to_document(&self) -> Option<InstanceDocument> {
        let mut doc: InstanceDocument = self.descriptor.clone()?.into();
        doc.lipschitz = Some(self.lipschitz());
        doc.mu = Some(self.strong_convexity());
        doc.known_minimum = self.known_minimum;
        Some(doc)
    }
}

/// Explicit quadratic `½⟨Ax,x⟩ − ⟨b,x⟩ + g` with `L`, `μ` from the spectrum of
/// `A`. The minimizer is filled by a direct solve when `g = 0` and `A ≻ 0`,
/// otherwise by [`reference_solve`].
pub fn quadratic_from_parts(a: DMatrix<f64>, b: DVector<f64>, g: Regularizer) -> Result<ProblemInstance> {
    let f = Quadratic::from_matrix(a, b)?;
    let direct = if g.is_zero() {
        f.a.clone().cholesky().map(|c| c.solve(&f.b))
    } else {
        None
    };
    let instance = ProblemInstance::new(Arc::new(f), g)?;
    match direct {
        Some(x) => Ok(with_minimizer(instance, x)),
        None => instance.certify(),
    }
}

/// Explicit lasso `½‖Mx − b‖² + reg_weight·‖x‖₁`, certified by
/// [`reference_solve`].
pub fn lasso_from_parts(m: DMatrix<f64>, b: DVector<f64>, reg_weight: f64) -> Result<ProblemInstance> {
    let g = Regularizer::l1(reg_weight)
        .map_err(|_| Error::config("reg_weight", format!("must be > 0, got {reg_weight}")))?;
    let f = LeastSquares::new(m, b)?;
    ProblemInstance::new(Arc::new(f), g)?.certify()
}

fn with_minimizer(mut instance: ProblemInstance, x: DVector<f64>) -> ProblemInstance {
    instance.known_minimum = Some(instance.objective(&x));
    instance.known_minimizer = Some(x);
    instance
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill order is part of the reproducibility contract
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Strongly convex quadratic with `g = 0`. See
/// [`make_regularized_quadratic`].
pub fn make_quadratic(dimension: usize, condition_number: f64, seed: u64) -> Result<ProblemInstance> {
    make_regularized_quadratic(dimension, condition_number, Regularizer::Zero, seed)
}

/// `f(x) = ½⟨Ax, x⟩ − ⟨b, x⟩` with `A = Q diag(λ) Qᵀ`, `Q` a seeded random
/// orthogonal matrix and eigenvalues log-spaced over `[1/κ, 1]`, so that
/// `L = 1` and `μ = 1/κ`. `b` is standard normal.
pub fn make_regularized_quadratic(
    dimension: usize,
    condition_number: f64,
    regularizer: Regularizer,
    seed: u64,
) -> Result<ProblemInstance> {
    if dimension == 0 {
        return Err(Error::config("dimension", "must be >= 1"));
    }
    if !condition_number.is_finite() || condition_number < 1.0 {
        return Err(Error::config(
            "condition_number",
            format!("must be finite and >= 1, got {condition_number}"),
        ));
    }
    regularizer.validate(Some(dimension))?;

    let lipschitz = 1.0;
    let mu = lipschitz / condition_number;
    let eigenvalues = DVector::from_fn(dimension, |i, _| {
        if dimension == 1 {
            lipschitz
        } else {
            let frac = i as f64 / (dimension - 1) as f64;
            mu * condition_number.powf(frac)
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = gaussian_matrix(&mut rng, dimension, dimension).qr().q();
    let b = gaussian_vector(&mut rng, dimension);
    let a = &q * DMatrix::from_diagonal(&eigenvalues) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;

    let f = Quadratic::new(a, b, lipschitz, mu)?;
    let direct = if regularizer.is_zero() {
        Some(
            f.a.clone()
                .cholesky()
                .ok_or_else(|| Error::config("condition_number", "generated matrix is not positive definite"))?
                .solve(&f.b),
        )
    } else {
        None
    };
    let mut instance = ProblemInstance::new(Arc::new(f), regularizer.clone())?;
    instance.seed = seed;
    instance.descriptor = Some(InstanceDescriptor::Quadratic {
        dimension,
        condition_number,
        seed,
        regularizer,
    });
    match direct {
        Some(x) => Ok(with_minimizer(instance, x)),
        None => instance.certify(),
    }
}

/// Lasso `½‖Mx − b‖² + reg_weight·‖x‖₁` with `M` having i.i.d.
/// `N(0, 1/rows)` entries and `b ~ N(0, I)`.
pub fn make_lasso(rows: usize, cols: usize, reg_weight: f64, seed: u64) -> Result<ProblemInstance> {
    if rows == 0 || cols == 0 {
        return Err(Error::config("rows/cols", "must be >= 1"));
    }
    if !(reg_weight.is_finite() && reg_weight > 0.0) {
        return Err(Error::config("reg_weight", format!("must be > 0, got {reg_weight}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = gaussian_matrix(&mut rng, rows, cols) / (rows as f64).sqrt();
    let b = gaussian_vector(&mut rng, rows);
    let f = LeastSquares::new(m, b)?;
    let mut instance = ProblemInstance::new(Arc::new(f), Regularizer::L1 { weight: reg_weight })?;
    instance.seed = seed;
    instance.descriptor = Some(InstanceDescriptor::Lasso {
        rows,
        cols,
        reg_weight,
        seed,
    });
    instance.certify()
}

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting point; zero when absent.
    pub start: Option<DVector<f64>>,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            tolerance: REFERENCE_TOLERANCE,
            max_iterations: REFERENCE_BUDGET,
            start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub minimizer: DVector<f64>,
    pub minimum: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Plain proximal gradient with `s = 1/L`, run until
/// `‖x − prox(s, x − s∇f(x))‖ ≤ tolerance·(1 + ‖x‖)`.
///
/// This is the `F*` oracle for every certificate check. It deliberately
/// shares no code with the accelerated solvers.
pub fn reference_solve(instance: &ProblemInstance, options: &ReferenceOptions) -> Result<ReferenceSolution> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::config(
            "tolerance",
            format!("must be > 0, got {}", options.tolerance),
        ));
    }
    let n = instance.dimension();
    let s = 1.0 / instance.lipschitz();
    let mut x = match &options.start {
        Some(x0) if x0.len() != n => {
            return Err(Error::Dimension {
                expected: n,
                actual: x0.len(),
            })
        }
        Some(x0) => x0.clone(),
        None => DVector::zeros(n),
    };
    let mut residual = f64::INFINITY;
    for iteration in 0..=options.max_iterations {
        let next = instance.prox_grad_step(&x, s);
        residual = (&x - &next).norm();
        if residual <= options.tolerance * (1.0 + x.norm()) {
            let minimum = instance.objective(&x);
            return Ok(ReferenceSolution {
                minimizer: x,
                minimum,
                iterations: iteration,
                residual,
            });
        }
        if iteration < options.max_iterations {
            x = next;
        }
    }
    Err(Error::Unconverged {
        iterations: options.max_iterations,
        residual,
    })
}

/// Largest componentwise error between the gradient and central differences
/// of the value, relative to `max(1, |∂ᵢf|)`.
pub fn check_gradient(oracle: &dyn SmoothOracle, point: &DVector<f64>, step: f64) -> f64 {
    let grad = oracle.gradient(point);
    let mut worst: f64 = 0.0;
    let mut probe = point.clone();
    for i in 0..point.len() {
        let xi = point[i];
        probe[i] = xi + step;
        let plus = oracle.value(&probe);
        probe[i] = xi - step;
        let minus = oracle.value(&probe);
        probe[i] = xi;
        let fd = (plus - minus) / (2.0 * step);
        let err = (fd - grad[i]).abs() / grad[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
