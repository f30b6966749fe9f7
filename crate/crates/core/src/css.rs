//! Column subset selection as row-sparse reconstruction.
//!
//! Choosing `k` columns of `X` is cast as minimizing `l(X − XV)` over
//! `V ∈ R^{d×d}` with at most `k` nonzero rows: the nonzero rows of `V` are
//! the selected columns. Coordinates of `vec(V)` are row-major, so group `i`
//! is row `i` of `V`.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Objective, QuadraticObjective};
use crate::partition::GroupPartition;
use crate::selection::{select, SelectParams, SelectionConfig, SelectionFailure, SelectionTrace};

/// Largest `d` for which the `d² × d²` quadratic form is materialized.
const MAX_QUADRATIC_DIM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CssLoss {
    /// Squared Frobenius norm of the residual.
    Frobenius,
    /// `Σ δ²(√(1 + (r/δ)²) − 1)` over residual entries.
    PseudoHuber { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CssInstance {
    pub x: DMatrix<f64>,
    pub loss: CssLoss,
    /// Ridge `ρ‖V‖_F²` added to the loss.
    pub ridge: f64,
    pub k: usize,
}

impl CssInstance {
    pub fn new(x: DMatrix<f64>, loss: CssLoss, ridge: f64, k: usize) -> Result<Self> {
        if k > x.ncols() {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds {} columns", x.ncols())));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
        }
        if let CssLoss::PseudoHuber { delta } = loss {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::InvalidArgument(format!("pseudo-Huber delta must be > 0, got {delta}")));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        Ok(CssInstance { x, loss, ridge, k })
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }
}

/// `V ↦ l(X − XV) + ρ‖V‖_F²` over `vec(V)`.
#[derive(Debug)]
pub struct CssObjective {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    loss: CssLoss,
    ridge: f64,
    strictly_convex: bool,
    lambda_max: f64,
    quadratic: OnceLock<Option<QuadraticObjective>>,
}

impl CssObjective {
    pub fn new(inst: &CssInstance) -> Self {
        let gram = inst.x.transpose() * &inst.x;
        let eig = gram.clone().symmetric_eigen().eigenvalues;
        let lmin = eig.min();
        let lambda_max = eig.max().max(0.0);
        let floor = 1e-12 * (1.0 + lambda_max);
        CssObjective {
            x: inst.x.clone(),
            gram,
            loss: inst.loss,
            ridge: inst.ridge,
            strictly_convex: lmin + inst.ridge > floor,
            lambda_max,
            quadratic: OnceLock::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn unvec(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_row_slice(d, d, v.as_slice())
    }

    pub fn vec(&self, v: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(v.transpose().as_slice())
    }

    fn residual(&self, v: &DVector<f64>) -> DMatrix<f64> {
        &self.x - &self.x * self.unvec(v)
    }

    /// The Frobenius objective as an explicit quadratic in `vec(V)`:
    /// `A = 2(XᵀX + ρI) ⊗ I`, `b = −2 vec(XᵀX)`, `c = ‖X‖_F²`.
    pub fn to_quadratic(&self) -> Option<&QuadraticObjective> {
        self.quadratic
            .get_or_init(|| {
                if self.loss != CssLoss::Frobenius || self.d() > MAX_QUADRATIC_DIM {
                    return None;
                }
                let d = self.d();
                let n = d * d;
                let mut a = DMatrix::zeros(n, n);
                for i in 0..d {
                    for i2 in 0..d {
                        let g = 2.0 * (self.gram[(i, i2)] + if i == i2 { self.ridge } else { 0.0 });
                        for j in 0..d {
                            a[(i * d + j, i2 * d + j)] = g;
                        }
                    }
                }
                let b = -2.0 * self.vec(&self.gram);
                QuadraticObjective::new(a, b, self.x.norm_squared(), self.strictly_convex).ok()
            })
            .as_ref()
    }

    /// Rows of `V` fully contained in `coords`, if `coords` is exactly a union of rows.
    fn whole_rows(&self, coords: &[usize]) -> Option<Vec<usize>> {
        let d = self.d();
        if !coords.len().is_multiple_of(d) {
            return None;
        }
        let rows: Vec<usize> = coords.chunks(d).map(|c| c[0] / d).collect();
        let exact =
            coords.chunks(d).zip(&rows).all(|(c, &r)| c.iter().enumerate().all(|(j, &idx)| idx == r * d + j));
        exact.then_some(rows)
    }
}

impl Objective for CssObjective {
    fn dim(&self) -> usize {
        self.d() * self.d()
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        let r = self.residual(v);
        let data = match self.loss {
            CssLoss::Frobenius => r.norm_squared(),
            CssLoss::PseudoHuber { delta } => r
                .iter()
                .map(|&e| {
                    let z = e / delta;
                    // δ²(√(1+z²) − 1) written without cancellation.
                    delta * delta * z * z / ((1.0 + z * z).sqrt() + 1.0)
                })
                .sum(),
        };
        data + self.ridge * v.norm_squared()
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let r = self.residual(v);
        let psi = match self.loss {
            CssLoss::Frobenius => 2.0 * r,
            CssLoss::PseudoHuber { delta } => r.map(|e| e / (1.0 + (e / delta).powi(2)).sqrt()),
        };
        let g = -(self.x.transpose() * psi);
        self.vec(&g) + 2.0 * self.ridge * v
    }

    fn is_strictly_convex(&self) -> bool {
        self.strictly_convex
    }

    fn restricted_solve(&self, coords: &[usize]) -> Option<Result<DVector<f64>>> {
        if self.loss != CssLoss::Frobenius {
            return None;
        }
        let rows = self.whole_rows(coords)?;
        let d = self.d();
        // Column j of V on rows R solves (G_RR + ρI) v = G_{R,j}.
        let k = rows.len();
        let sys = DMatrix::from_fn(k, k, |a, b| {
            self.gram[(rows[a], rows[b])] + if a == b { self.ridge } else { 0.0 }
        });
        let rhs = DMatrix::from_fn(k, d, |a, j| self.gram[(rows[a], j)]);
        let sol = match sys.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match sys.lu().solve(&rhs) {
                Some(s) => s,
                None => {
                    return Some(Err(Error::NotStrictlyConvex(
                        "selected columns are linearly dependent; add a ridge".into(),
                    )))
                }
            },
        };
        let mut out = DVector::zeros(d * d);
        for (a, &i) in rows.iter().enumerate() {
            for j in 0..d {
                out[i * d + j] = sol[(a, j)];
            }
        }
        Some(Ok(out))
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(match self.loss {
            CssLoss::Frobenius => 2.0 * (self.lambda_max + self.ridge),
            CssLoss::PseudoHuber { .. } => self.lambda_max + 2.0 * self.ridge,
        })
    }

    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        self.to_quadratic()
    }
}

/// The objective over `vec(V)` and the partition of its coordinates into rows.
pub fn css_objective(inst: &CssInstance) -> Result<(CssObjective, Arc<GroupPartition>)> {
    let d = inst.d();
    if d == 0 {
        return Err(Error::InvalidArgument("matrix has no columns".into()));
    }
    let obj = CssObjective::new(inst);
    let p = GroupPartition::contiguous(&vec![d; d])?;
    Ok((obj, Arc::new(p)))
}

/// `‖X − X_S (X_S)⁺ X‖_F²`, the residual of projecting `X` onto the span of
/// the columns `cols`.
pub fn projection_residual(x: &DMatrix<f64>, cols: &[usize]) -> Result<f64> {
    if cols.is_empty() {
        return Ok(x.norm_squared());
    }
    let xs = x.select_columns(cols);
    let pinv = xs
        .clone()
        .pseudo_inverse(1e-12 * x.norm().max(1.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((x - &xs * (pinv * x)).norm_squared())
}

#[derive(Debug, Clone)]
pub struct CssResult {
    /// Selected columns in selection order.
    pub columns: Vec<usize>,
    /// The reconstruction matrix, nonzero only on the selected rows.
    pub v: DMatrix<f64>,
    /// `min l(X − XV) + ρ‖V‖²` over `V` supported on the selected rows.
    pub value: f64,
    pub trace: SelectionTrace,
}

/// Selects columns of `inst.x` with any of the selection algorithms.
pub fn css_select(
    inst: &CssInstance,
    params: &SelectParams,
    cfg: &SelectionConfig,
) -> std::result::Result<CssResult, SelectionFailure> {
    let (obj, p) =
        css_objective(inst).map_err(|error| SelectionFailure { error, trace: SelectionTrace::default() })?;
    let out = select(&obj, &p, params, cfg)?;
    Ok(CssResult {
        columns: out.selected,
        v: obj.unvec(out.beta.values()),
        value: out.value,
        trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::finite_difference_error;
    use crate::rng::{gaussian, seeded};
    use crate::selection::{restricted_value, Algorithm};

    fn random_x(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(n, d, |_, _| gaussian(&mut rng))
    }

    fn params(algorithm: Algorithm, k_prime: usize) -> SelectParams {
        SelectParams { algorithm, k: k_prime, k_prime, rounds: 3, delta: 1e-2 }
    }

    #[test]
    fn value_at_zero_and_identity() {
        let inst = CssInstance::new(random_x(1, 8, 5), CssLoss::Frobenius, 0.0, 2).unwrap();
        let (obj, _) = css_objective(&inst).unwrap();
        let zero = DVector::zeros(25);
        assert!((obj.value(&zero) - inst.x.norm_squared()).abs() < 1e-12);
        let eye = obj.vec(&DMatrix::identity(5, 5));
        assert!(obj.value(&eye).abs() < 1e-20);
    }

    #[test]
    fn gradient_matches_matrix_form_and_differences() {
        let x = random_x(2, 7, 4);
        for loss in [CssLoss::Frobenius, CssLoss::PseudoHuber { delta: 0.7 }] {
            let inst = CssInstance::new(x.clone(), loss, 0.3, 2).unwrap();
            let (obj, _) = css_objective(&inst).unwrap();
            let mut rng = seeded(3);
            let v = DVector::from_fn(16, |_, _| 0.5 * gaussian(&mut rng));
            assert!(finite_difference_error(&obj, &v, 1e-6) < 1e-5, "{loss:?}");
            if loss == CssLoss::Frobenius {
                let vm = obj.unvec(&v);
                let expected = -2.0 * x.transpose() * (&x - &x * &vm) + 2.0 * 0.3 * &vm;
                assert!((obj.unvec(&obj.gradient(&v)) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn explicit_quadratic_agrees() {
        let inst = CssInstance::new(random_x(4, 6, 4), CssLoss::Frobenius, 0.1, 2).unwrap();
        let (obj, _) = css_objective(&inst).unwrap();
        let q = obj.to_quadratic().unwrap();
        let mut rng = seeded(5);
        for _ in 0..5 {
            let v = DVector::from_fn(16, |_, _| gaussian(&mut rng));
            assert!((q.value(&v) - obj.value(&v)).abs() < 1e-10 * (1.0 + obj.value(&v).abs()));
        }
    }

    #[test]
    fn restricted_optimum_is_projection_residual() {
        let x = random_x(6, 8, 5);
        let inst = CssInstance::new(x.clone(), CssLoss::Frobenius, 0.0, 2).unwrap();
        let (obj, p) = css_objective(&inst).unwrap();
        let cfg = crate::solvers::SolverConfig::default();
        for cols in [vec![0, 3], vec![1, 2, 4], vec![4]] {
            let (_, value) = restricted_value(&obj, &p, &cols, &cfg).unwrap();
            let proj = projection_residual(&x, &cols).unwrap();
            assert!((value - proj).abs() < 1e-8 * (1.0 + proj), "{cols:?}: {value} vs {proj}");
        }
    }

    #[test]
    fn orthogonal_columns_pick_largest_norms() {
        let q = random_x(7, 9, 5).qr().q();
        let scales = [0.5, 3.0, 1.0, 2.0, 0.1];
        let x = DMatrix::from_fn(9, 5, |i, j| q[(i, j)] * scales[j]);
        let inst = CssInstance::new(x, CssLoss::Frobenius, 0.0, 3).unwrap();
        let out = css_select(&inst, &params(Algorithm::Omp, 3), &SelectionConfig::default()).unwrap();
        assert_eq!(out.columns, vec![1, 3, 2]);
    }

    #[test]
    fn all_columns_reconstruct_exactly() {
        let inst = CssInstance::new(random_x(8, 8, 5), CssLoss::Frobenius, 0.0, 5).unwrap();
        let out = css_select(&inst, &params(Algorithm::Omp, 5), &SelectionConfig::default()).unwrap();
        assert!(out.value < 1e-10 * inst.x.norm_squared());
    }

    #[test]
    fn omp_residual_is_monotone_in_budget() {
        let inst = CssInstance::new(random_x(9, 10, 6), CssLoss::Frobenius, 1e-6, 1).unwrap();
        let cfg = SelectionConfig::default();
        let values: Vec<f64> =
            (0..=6).map(|kp| css_select(&inst, &params(Algorithm::Omp, kp), &cfg).unwrap().value).collect();
        for w in values.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * (1.0 + w[0]));
        }
    }

    #[test]
    fn pseudo_huber_runs_through_sequential_lasso() {
        let inst =
            CssInstance::new(random_x(10, 8, 4), CssLoss::PseudoHuber { delta: 1.0 }, 1e-3, 2).unwrap();
        let out = css_select(&inst, &params(Algorithm::SeqLasso, 2), &SelectionConfig::default()).unwrap();
        assert_eq!(out.columns.len(), 2);
        for rec in &out.trace.iterations {
            assert_eq!(rec.in_argmax_set, Some(true));
        }
        let unselected: Vec<usize> = (0..4).filter(|r| !out.columns.contains(r)).collect();
        for r in unselected {
            assert!(out.v.row(r).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(CssInstance::new(random_x(11, 3, 3), CssLoss::Frobenius, 0.0, 4).is_err());
        assert!(CssInstance::new(random_x(11, 3, 3), CssLoss::PseudoHuber { delta: 0.0 }, 0.0, 1).is_err());
        assert!(CssInstance::new(random_x(11, 3, 3), CssLoss::Frobenius, -1.0, 1).is_err());
    }
}
