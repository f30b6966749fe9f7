//! Seeded random instance families.
//!
//! | family | objective | groups |
//! |---|---|---|
//! | `ridge-quadratic` | least squares, `m ∈ [⌈n/2⌉, 2n]` Gaussian rows, `ρ ~ U[0.05, 0.5]` | `t ~ U{2..10}`, sizes `U{1..4}` |
//! | `logistic` | ridge logistic, `m ~ U{20..60}`, `ρ ~ U[0.05, 0.5]` | `t ~ U{2..6}`, sizes `U{1..3}` |
//! | `quadratic` | least squares, `m = 2n`, `ρ = 0.1` | `t` fixed, sizes `U{1..2}` |
//! | `near-isotropic` | `A = 2I + QΛQᵀ`, `Λ ~ U[0, spread]`, `Q` Haar | `t` singletons |
//! | `isotropic` | `A = 2I` | `t` singletons |
//! | `css` | Gaussian `n × d` matrix | rows of `V` |
//!
//! Responses are `y = Xβ₀ + ½ξ` with `β₀` supported on about half the
//! groups; logistic labels are `sign(Xβ₀ + ½ξ)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::css::CssLoss;
use crate::io::{InstanceFile, MatrixJson, ObjectiveSpec};
use crate::partition::GroupPartition;
use crate::rng::{gaussian, seeded};

use super::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    RidgeQuadratic,
    Logistic,
    Quadratic { t: usize },
    NearIsotropic { t: usize, spread: f64 },
    Isotropic { t: usize },
    Css { n: usize, d: usize, loss: CssLoss, ridge: f64 },
}

impl Family {
    pub fn generate(&self, seed: u64) -> Instance {
        let mut rng = seeded(seed);
        match *self {
            Family::RidgeQuadratic => {
                let t = rng.random_range(2..=10);
                let sizes: Vec<usize> = (0..t).map(|_| rng.random_range(1..=4)).collect();
                let n: usize = sizes.iter().sum();
                let m = rng.random_range(n.div_ceil(2)..=2 * n);
                let ridge = rng.random_range(0.05..=0.5);
                let (x, y) = regression(&mut rng, &sizes, m);
                Instance::Objective(InstanceFile {
                    partition: GroupPartition::contiguous(&sizes).expect("sizes are positive"),
                    objective: ObjectiveSpec::LeastSquares {
                        x: MatrixJson::from(&x),
                        y: y.as_slice().to_vec(),
                        ridge: Some(ridge),
                    },
                })
            }
            Family::Logistic => {
                let t = rng.random_range(2..=6);
                let sizes: Vec<usize> = (0..t).map(|_| rng.random_range(1..=3)).collect();
                let m = rng.random_range(20..=60);
                let ridge = rng.random_range(0.05..=0.5);
                let (x, y) = regression(&mut rng, &sizes, m);
                let labels: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
                Instance::Objective(InstanceFile {
                    partition: GroupPartition::contiguous(&sizes).expect("sizes are positive"),
                    objective: ObjectiveSpec::Logistic { x: MatrixJson::from(&x), y: labels, ridge },
                })
            }
            Family::Quadratic { t } => {
                let sizes: Vec<usize> = (0..t).map(|_| rng.random_range(1..=2)).collect();
                let n: usize = sizes.iter().sum();
                let (x, y) = regression(&mut rng, &sizes, 2 * n);
                Instance::Objective(InstanceFile {
                    partition: GroupPartition::contiguous(&sizes).expect("sizes are positive"),
                    objective: ObjectiveSpec::LeastSquares {
                        x: MatrixJson::from(&x),
                        y: y.as_slice().to_vec(),
                        ridge: Some(0.1),
                    },
                })
            }
            Family::NearIsotropic { t, spread } => {
                let q = haar_orthogonal(&mut rng, t);
                let lam = DVector::from_fn(t, |_, _| rng.random_range(0.0..=spread));
                let a = DMatrix::identity(t, t) * 2.0 + &q * DMatrix::from_diagonal(&lam) * q.transpose();
                let a = (&a + a.transpose()) * 0.5;
                let b = linear_term(&mut rng, &a);
                quadratic_instance(a, b)
            }
            Family::Isotropic { t } => {
                let a = DMatrix::identity(t, t) * 2.0;
                let b = linear_term(&mut rng, &a);
                quadratic_instance(a, b)
            }
            Family::Css { n, d, loss, ridge } => Instance::Css {
                x: MatrixJson::from(&DMatrix::from_fn(n, d, |_, _| gaussian(&mut rng))),
                loss,
                ridge,
            },
        }
    }
}

fn regression(rng: &mut ChaCha8Rng, sizes: &[usize], m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n: usize = sizes.iter().sum();
    let x = DMatrix::from_fn(m, n, |_, _| gaussian(rng));
    let mut beta0 = DVector::zeros(n);
    let mut offset = 0;
    for &s in sizes {
        if rng.random_bool(0.5) {
            for j in offset..offset + s {
                beta0[j] = gaussian(rng);
            }
        }
        offset += s;
    }
    let noise = DVector::from_fn(m, |_, _| 0.5 * gaussian(rng));
    let y = &x * beta0 + noise;
    (x, y)
}

/// `b = −Aβ₀ + ξ/10` so that the minimizer is near a sparse `β₀`.
fn linear_term(rng: &mut ChaCha8Rng, a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let beta0 = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { gaussian(rng) } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| 0.1 * gaussian(rng));
    -(a * beta0) + noise
}

fn haar_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column signs so the distribution is Haar.
    let signs = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| r[(i, i)].signum()));
    q * signs
}

fn quadratic_instance(a: DMatrix<f64>, b: DVector<f64>) -> Instance {
    let n = a.nrows();
    Instance::Objective(InstanceFile {
        partition: GroupPartition::singletons(n),
        objective: ObjectiveSpec::Quadratic { a: MatrixJson::from(&a), b: b.as_slice().to_vec(), c: 0.0 },
    })
}

/// Two groups with identical gradient norm at zero: `A = 2I`, `b = (−1, −1, −0.3)`.
pub fn tied_instance() -> Instance {
    quadratic_instance(DMatrix::identity(3, 3) * 2.0, DVector::from_vec(vec![-1.0, -1.0, -0.3]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_instance() {
        for fam in [Family::RidgeQuadratic, Family::Logistic, Family::NearIsotropic { t: 5, spread: 0.3 }] {
            assert_eq!(fam.generate(7), fam.generate(7));
            assert_ne!(fam.generate(7), fam.generate(8));
        }
    }

    #[test]
    fn ridge_quadratic_respects_ranges() {
        for seed in 0..50 {
            let Instance::Objective(inst) = Family::RidgeQuadratic.generate(seed) else {
                panic!("expected an objective instance")
            };
            let t = inst.partition.num_groups();
            assert!((2..=10).contains(&t));
            assert!(inst.partition.n() <= 40);
            let ObjectiveSpec::LeastSquares { x, ridge, .. } = &inst.objective else {
                panic!("expected least squares")
            };
            assert!(x.rows * 2 >= x.cols && x.rows <= 2 * x.cols);
            assert!((0.05..=0.5).contains(&ridge.unwrap()));
            inst.build().unwrap();
        }
    }

    #[test]
    fn logistic_labels_are_signs() {
        let Instance::Objective(inst) = Family::Logistic.generate(3) else {
            panic!("expected an objective instance")
        };
        let ObjectiveSpec::Logistic { x, y, .. } = &inst.objective else { panic!("expected logistic") };
        assert!(x.rows <= 60);
        assert!(y.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn haar_matrix_is_orthogonal() {
        let q = haar_orthogonal(&mut seeded(1), 6);
        assert!((q.transpose() * &q - DMatrix::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn near_isotropic_spectrum_in_range() {
        let Instance::Objective(inst) = (Family::NearIsotropic { t: 8, spread: 0.3 }).generate(4) else {
            panic!("expected an objective instance")
        };
        let ObjectiveSpec::Quadratic { a, .. } = &inst.objective else { panic!("expected quadratic") };
        let eig = a.to_matrix().unwrap().symmetric_eigen().eigenvalues;
        assert!(eig.min() >= 2.0 - 1e-12 && eig.max() <= 2.3 + 1e-12);
    }
}
