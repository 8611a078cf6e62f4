//! Spectrum of a symmetric stochastic matrix and the expander check for the
//! sticky chain, whose nontrivial eigenvalues all equal the mixing bias.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::chain::{transition_matrix, StochasticMatrix, WalkParams};
use crate::error::{Error, Result};
use crate::numerics::{self, int, rat};

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const SOLVER_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// `aI + b(J - I)` has spectrum `{a + (m-1)b, (a-b)^(m-1)}`.
    ClosedForm,
    Jacobi,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    pub second_largest_magnitude: f64,
    /// Diagonal minus off-diagonal for a sticky matrix.
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
    pub method: SpectrumMethod,
    /// Largest gap between the closed form and Jacobi eigenvalues.
    pub solver_agreement: Option<f64>,
    /// `|P w - delta w|_inf` for `w = e_0 - (1/p) 1`, set by
    /// [`verify_expander`].
    pub witness_residual: Option<f64>,
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let m = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

fn second_magnitude(sorted_desc: &[f64]) -> f64 {
    sorted_desc.iter().skip(1).map(|x| x.abs()).fold(0.0, f64::max)
}

/// Spectrum of a symmetric stochastic matrix. Sticky matrices use the closed
/// form, cross-checked by Jacobi; others use Jacobi alone.
pub fn spectrum(matrix: &StochasticMatrix) -> Result<SpectrumReport> {
    if !matrix.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let m = matrix.size();
    let jacobi = jacobi_eigenvalues(&matrix.to_f64());
    let report = match matrix.sticky_form() {
        Some((diag, off)) => {
            let top = &diag + &off * int(m as i64 - 1);
            let gap = numerics::to_f64(&(&diag - &off));
            let mut eigenvalues = vec![numerics::to_f64(&top)];
            eigenvalues.extend(std::iter::repeat_n(gap, m - 1));
            eigenvalues.sort_by(|x, y| y.total_cmp(x));
            let agreement = eigenvalues
                .iter()
                .zip(&jacobi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let second = second_magnitude(&eigenvalues);
            SpectrumReport {
                second_largest_magnitude: second,
                predicted: Some(gap),
                residual: Some((second - gap).abs()),
                eigenvalues,
                method: SpectrumMethod::ClosedForm,
                solver_agreement: Some(agreement),
                witness_residual: None,
            }
        }
        None => SpectrumReport {
            second_largest_magnitude: second_magnitude(&jacobi),
            eigenvalues: jacobi,
            predicted: None,
            residual: None,
            method: SpectrumMethod::Jacobi,
            solver_agreement: None,
            witness_residual: None,
        },
    };
    if (report.eigenvalues[0] - 1.0).abs() > EIGEN_TOLERANCE {
        return Err(Error::Invariant(format!(
            "top eigenvalue {} is not 1",
            report.eigenvalues[0]
        )));
    }
    Ok(report)
}

/// Checks that the second eigenvalue magnitude equals `delta`, that
/// `e_0 - (1/p) 1` is an exact `delta`-eigenvector, and that both solvers
/// agree.
pub fn verify_expander(params: &WalkParams) -> Result<SpectrumReport> {
    let p = params.p();
    let matrix = transition_matrix(params);
    let mut report = spectrum(&matrix)?;
    let delta = params.delta();
    let witness: Vec<BigRational> = (0..p)
        .map(|i| if i == 0 { int(1) } else { BigRational::zero() } - rat(1, p as i64))
        .collect();
    let image: Vec<BigRational> = (0..p)
        .map(|i| (0..p).map(|j| matrix.entry(i, j) * &witness[j]).sum())
        .collect();
    let witness_residual = image
        .iter()
        .zip(&witness)
        .map(|(a, w)| numerics::to_f64(&(a - delta * w)).abs())
        .fold(0.0, f64::max);
    let exact = image.iter().zip(&witness).all(|(a, w)| *a == delta * w);
    report.witness_residual = Some(witness_residual);
    let delta_f = numerics::to_f64(delta);
    let residual = (report.second_largest_magnitude - delta_f).abs();
    report.residual = Some(residual);
    if residual > EIGEN_TOLERANCE {
        return Err(Error::Invariant(format!(
            "second eigenvalue magnitude {} differs from delta {delta_f} by {residual:e}",
            report.second_largest_magnitude
        )));
    }
    if !exact || witness_residual > EIGEN_TOLERANCE {
        return Err(Error::Invariant(format!(
            "witness eigenvector residual {witness_residual:e}"
        )));
    }
    if let Some(gap) = report.solver_agreement.filter(|g| *g > SOLVER_AGREEMENT) {
        return Err(Error::Invariant(format!("closed form and Jacobi differ by {gap:e}")));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::group_states;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(p: usize, delta: BigRational) -> WalkParams {
        WalkParams::from_mixture(p, 3, delta).unwrap()
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&transition_matrix(&params(5, BigRational::zero()))).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues[1..].iter().all(|x| x.abs() < 1e-12));

        let w = WalkParams::from_lambda(3, 3, rat(1, 20)).unwrap();
        let s = spectrum(&transition_matrix(&w)).unwrap();
        for (got, want) in s.eigenvalues.iter().zip([1.0, 0.15, 0.15]) {
            assert!((got - want).abs() < 1e-10);
        }

        let s = spectrum(&transition_matrix(&params(2, rat(2, 7)))).unwrap();
        assert!((s.eigenvalues[1] - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn non_symmetric_input_is_rejected() {
        let m = StochasticMatrix::new(vec![vec![rat(1, 3), rat(2, 3)], vec![rat(1, 2), rat(1, 2)]]).unwrap();
        assert!(matches!(spectrum(&m), Err(Error::NotSymmetric)));
    }

    #[test]
    fn jacobi_on_general_symmetric_matrix() {
        let m = StochasticMatrix::new(vec![
            vec![rat(1, 2), rat(1, 4), rat(1, 4)],
            vec![rat(1, 4), rat(1, 2), rat(1, 4)],
            vec![rat(1, 4), rat(1, 4), rat(1, 2)],
        ])
        .unwrap();
        assert_eq!(spectrum(&m).unwrap().method, SpectrumMethod::ClosedForm);
        let m = StochasticMatrix::new(vec![
            vec![rat(1, 2), rat(1, 2), rat(0, 1)],
            vec![rat(1, 2), rat(0, 1), rat(1, 2)],
            vec![rat(0, 1), rat(1, 2), rat(1, 2)],
        ])
        .unwrap();
        let s = spectrum(&m).unwrap();
        assert_eq!(s.method, SpectrumMethod::Jacobi);
        // Path-like chain: eigenvalues 1, 1/2, -1/2.
        for (got, want) in s.eigenvalues.iter().zip([1.0, 0.5, -0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn expander_examples() {
        let w = WalkParams::from_lambda(6, 3, rat(1, 30)).unwrap();
        let s = verify_expander(&w).unwrap();
        assert!((s.second_largest_magnitude - 0.2).abs() < 1e-10);
        let s = verify_expander(&params(7, BigRational::zero())).unwrap();
        assert!(s.second_largest_magnitude.abs() < 1e-12);
    }

    #[test]
    fn random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = rng.random_range(2..=16);
            let d = rat(rng.random_range(0..1000), 1000);
            let s = verify_expander(&params(p, d.clone())).unwrap();
            let df = numerics::to_f64(&d);
            assert!((s.eigenvalues[0] - 1.0).abs() < 1e-10);
            assert!(s.eigenvalues[1..].iter().all(|x| (x - df).abs() < 1e-10));
            assert!(s.solver_agreement.unwrap() < SOLVER_AGREEMENT);
        }
    }

    #[test]
    fn relabeling_preserves_spectrum() {
        let m = StochasticMatrix::new(vec![
            vec![rat(1, 2), rat(1, 2), rat(0, 1)],
            vec![rat(1, 2), rat(0, 1), rat(1, 2)],
            vec![rat(0, 1), rat(1, 2), rat(1, 2)],
        ])
        .unwrap();
        let base = spectrum(&m).unwrap().eigenvalues;
        for perm in [[1, 2, 0], [2, 0, 1], [0, 2, 1]] {
            let other = spectrum(&m.permuted(&perm).unwrap()).unwrap().eigenvalues;
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn grouping_keeps_second_eigenvalue() {
        for p in 2..=12 {
            for k in (2..=p).filter(|k| p % k == 0) {
                let d = rat(3, 11);
                let g = group_states(&params(p, d.clone()), k).unwrap();
                let s = spectrum(&g.grouped).unwrap();
                if k > 1 {
                    assert!((s.second_largest_magnitude - numerics::to_f64(&d)).abs() < 1e-10);
                }
            }
        }
    }
}
