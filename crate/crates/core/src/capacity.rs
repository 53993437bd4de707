//! Log-det rate, truncated SVD and water-filling.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_SLACK: f64 = 1e-9;

/// Transmit covariance `Q` with its power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance {
    pub q: CMatrix,
    pub budget: f64,
}

impl TransmitCovariance {
    /// Validating constructor. Tolerances are relative to the budget so that
    /// watt-scale and milliwatt-scale problems are treated alike.
    pub fn new(q: CMatrix, budget: f64) -> Result<Self> {
        let c = TransmitCovariance { q, budget };
        c.check()?;
        Ok(c)
    }

    pub fn zero(n: usize, budget: f64) -> Self {
        TransmitCovariance { q: CMatrix::zeros(n, n), budget }
    }

    /// `(P / N_t) I`.
    pub fn uniform(n: usize, budget: f64) -> Self {
        TransmitCovariance {
            q: CMatrix::identity(n, n) * C64::new(budget / n as f64, 0.0),
            budget,
        }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.q.trace().re
    }

    pub fn check(&self) -> Result<()> {
        if !self.q.is_square() {
            return Err(Error::ContractViolation("covariance is not square".into()));
        }
        let scale = self.budget.max(f64::MIN_POSITIVE);
        let asym = (&self.q - self.q.adjoint()).norm();
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::ContractViolation(format!("covariance not Hermitian (asymmetry {asym:e})")));
        }
        if self.trace() > self.budget * (1.0 + TRACE_SLACK) {
            return Err(Error::ContractViolation(format!(
                "covariance trace {} exceeds budget {}",
                self.trace(),
                self.budget
            )));
        }
        let min_eig = hermitian_part(&self.q).symmetric_eigenvalues().min();
        if min_eig < -HERMITIAN_TOL * scale {
            return Err(Error::ContractViolation(format!("covariance not PSD (eigenvalue {min_eig:e})")));
        }
        Ok(())
    }

    /// `U_Q Sigma_Q^{1/2}` from the eigendecomposition, so that
    /// `F F^H = Q`.
    pub fn sqrt_factor(&self) -> CMatrix {
        let eig = SymmetricEigen::new(hermitian_part(&self.q));
        let mut f = eig.eigenvectors;
        for (j, mut col) in f.column_iter_mut().enumerate() {
            col *= C64::new(eig.eigenvalues[j].max(0.0).sqrt(), 0.0);
        }
        f
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `log2 det(I + H Q H^H / sigma2)` via a Cholesky factorization.
pub fn log_det_rate(h: &CMatrix, q: &TransmitCovariance, sigma2: f64) -> Result<f64> {
    q.check()?;
    if h.ncols() != q.dim() {
        return Err(Error::ContractViolation(format!(
            "channel has {} columns but covariance is {}x{}",
            h.ncols(),
            q.dim(),
            q.dim()
        )));
    }
    Ok(log_det_identity_plus(&(h * &q.q * h.adjoint()), sigma2))
}

/// `log2 det(I + G / sigma2)` for Hermitian PSD `G`.
pub(crate) fn log_det_identity_plus(g: &CMatrix, sigma2: f64) -> f64 {
    let n = g.nrows();
    let m = CMatrix::identity(n, n) + hermitian_part(g) / C64::new(sigma2, 0.0);
    match Cholesky::new(m.clone()) {
        Some(ch) => {
            let l = ch.l_dirty();
            (0..n).map(|i| l[(i, i)].re.log2()).sum::<f64>() * 2.0
        }
        // only reachable through rounding on near-singular G
        None => m.symmetric_eigenvalues().iter().map(|e| e.max(f64::MIN_POSITIVE).log2()).sum(),
    }
}

/// `log2 det(M)` of a Hermitian positive definite matrix.
pub(crate) fn log2_det_hpd(m: &CMatrix) -> f64 {
    match Cholesky::new(hermitian_part(m)) {
        Some(ch) => {
            let l = ch.l_dirty();
            (0..m.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>() * 2.0
        }
        None => hermitian_part(m).symmetric_eigenvalues().iter().map(|e| e.max(f64::MIN_POSITIVE).log2()).sum(),
    }
}

/// Truncated SVD of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// The `K` retained singular values, descending.
    pub singular_values: Vec<f64>,
    /// `N_t x K` right singular vectors.
    pub right_vectors: CMatrix,
    pub numerical_rank: usize,
    /// Every singular value, descending, including discarded ones.
    pub all_singular_values: Vec<f64>,
}

/// SVD keeping singular values above `rank_tol * delta_1`.
pub fn spectral(h: &CMatrix, rank_tol: f64) -> SpectralDecomposition {
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let all: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = all.first().copied().unwrap_or(0.0);
    let k = if top > 0.0 { all.iter().filter(|&&d| d > rank_tol * top).count() } else { 0 };
    let mut v = CMatrix::zeros(h.ncols(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        v.set_column(c, &v_t.row(i).adjoint());
    }
    SpectralDecomposition {
        singular_values: all[..k].to_vec(),
        right_vectors: v,
        numerical_rank: k,
        all_singular_values: all,
    }
}

/// Water-filling power levels over a set of eigenchannels.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub levels: Vec<f64>,
    pub water_level: f64,
}

/// Water-filling by bisection on the water level.
pub fn waterfill(deltas: &[f64], power: f64, sigma2: f64) -> Result<PowerAllocation> {
    if !(power > 0.0) {
        return Err(Error::ContractViolation(format!("power budget must be positive, got {power}")));
    }
    let floors: Vec<f64> = deltas
        .iter()
        .map(|&d| if d > 0.0 { sigma2 / (d * d) } else { f64::INFINITY })
        .collect();
    let finite: Vec<f64> = floors.iter().copied().filter(|f| f.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let lowest = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let highest = finite.iter().copied().fold(0.0, f64::max);
    let filled = |mu: f64| floors.iter().map(|f| (mu - f).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (lowest, highest + power);
    let tol = 1e-12 * power;
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(mid) > power {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(PowerAllocation {
        levels: floors.iter().map(|f| (mu - f).max(0.0)).collect(),
        water_level: mu,
    })
}

/// Optimal covariance together with the spectrum and allocation it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSolution {
    pub covariance: TransmitCovariance,
    pub spectrum: SpectralDecomposition,
    pub allocation: PowerAllocation,
    pub rate: f64,
}

/// `Q = V diag(P_k) V^H` over the retained eigenchannels.
pub fn optimal_covariance_detailed(h: &CMatrix, power: f64, sigma2: f64) -> Result<CovarianceSolution> {
    let spectrum = spectral(h, DEFAULT_RANK_TOL);
    let allocation = waterfill(&spectrum.singular_values, power, sigma2)?;
    let v = &spectrum.right_vectors;
    let mut q = CMatrix::zeros(h.ncols(), h.ncols());
    for (k, &p) in allocation.levels.iter().enumerate() {
        if p > 0.0 {
            let col = v.column(k);
            q += (col * col.adjoint()) * C64::new(p, 0.0);
        }
    }
    let q = hermitian_part(&q);
    let rate = spectrum
        .singular_values
        .iter()
        .zip(&allocation.levels)
        .map(|(d, p)| (1.0 + p * d * d / sigma2).log2())
        .sum();
    Ok(CovarianceSolution {
        covariance: TransmitCovariance { q, budget: power },
        spectrum,
        allocation,
        rate,
    })
}

pub fn optimal_covariance(h: &CMatrix, power: f64, sigma2: f64) -> Result<TransmitCovariance> {
    Ok(optimal_covariance_detailed(h, power, sigma2)?.covariance)
}
