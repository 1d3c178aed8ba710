//! Gaussian states in shot-noise units with quadrature ordering
//! `(q_1, p_1, q_2, p_2, ...)`.
//!
//! This is the first-principles route to Eve's Holevo information: build the
//! covariance matrix of the entangling-cloner attack, condition on Bob's homodyne
//! outcome by a Schur complement, and sum bosonic entropies of the symplectic
//! eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::bosonic_entropy;

const SYMMETRY_TOL: f64 = 1e-12;
const PHYSICAL_TOL: f64 = 1e-9;
const EIGENVALUE_FLOOR: f64 = 1e-6;
const SYMPLECTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Q,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::Q => 0,
            Quadrature::P => 1,
        }
    }
}

/// Block-diagonal symplectic form with blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    cov: DMatrix<f64>,
    mean: DVector<f64>,
}

impl GaussianState {
    /// Validates symmetry and the uncertainty principle.
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || !n.is_multiple_of(2) || cov.ncols() != n {
            return Err(Error::Unphysical(format!(
                "covariance must be a nonempty 2n x 2n matrix, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::Unphysical("covariance has non-finite entries".into()));
        }
        let scale = cov.amax().max(1.0);
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Unphysical(format!("covariance is not symmetric ({asym:e})")));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let state = GaussianState { mean: DVector::zeros(n), cov };
        let nu = state.raw_symplectic_eigenvalues()?;
        let smallest = nu.last().copied().unwrap_or(1.0);
        if smallest < 1.0 - PHYSICAL_TOL * scale {
            return Err(Error::Unphysical(format!(
                "symplectic eigenvalue {smallest} violates the uncertainty principle"
            )));
        }
        Ok(state)
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.cov.nrows() {
            return Err(Error::Unphysical(format!(
                "mean has length {} for a {}-mode state",
                mean.len(),
                self.n_modes()
            )));
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn vacuum(n_modes: usize) -> Self {
        GaussianState { cov: DMatrix::identity(2 * n_modes, 2 * n_modes), mean: DVector::zeros(2 * n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `self ⊗ other`: modes of `other` are appended after those of `self`.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (a, b) = (self.cov.nrows(), other.cov.nrows());
        let mut cov = DMatrix::zeros(a + b, a + b);
        cov.view_mut((0, 0), (a, a)).copy_from(&self.cov);
        cov.view_mut((a, a), (b, b)).copy_from(&other.cov);
        let mean = DVector::from_iterator(a + b, self.mean.iter().chain(other.mean.iter()).copied());
        GaussianState { cov, mean }
    }

    fn check_modes(&self, modes: &[usize]) -> Result<()> {
        let n = self.n_modes();
        for (i, &m) in modes.iter().enumerate() {
            if m >= n {
                return Err(Error::ModeIndex { index: m, n_modes: n });
            }
            if modes[..i].contains(&m) {
                return Err(Error::DuplicateMode(m));
            }
        }
        Ok(())
    }

    /// Applies `S` to the listed modes (in the given order), identity elsewhere.
    pub fn apply(&self, transform: &SymplecticTransform, modes: &[usize]) -> Result<GaussianState> {
        if transform.n_modes() != modes.len() {
            return Err(Error::ModeCount { expected: transform.n_modes(), got: modes.len() });
        }
        self.check_modes(modes)?;
        let dim = self.cov.nrows();
        let mut full = DMatrix::identity(dim, dim);
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                full[(r, c)] = transform.matrix[(i, j)];
            }
        }
        let cov = &full * &self.cov * full.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianState { cov, mean: &full * &self.mean })
    }

    /// Marginal on the listed modes, in the given order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<GaussianState> {
        if keep.is_empty() {
            return Err(Error::ModeCount { expected: 1, got: 0 });
        }
        self.check_modes(keep)?;
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        Ok(GaussianState { cov: self.cov.select_rows(&idx).select_columns(&idx), mean: self.mean.select_rows(&idx) })
    }

    /// State of the remaining modes after homodyning one quadrature of
    /// `measured_mode`. The covariance does not depend on the outcome, so the
    /// mean is left as the unconditioned marginal mean.
    pub fn homodyne_condition(&self, measured_mode: usize, quadrature: Quadrature) -> Result<GaussianState> {
        let n = self.n_modes();
        if n < 2 {
            return Err(Error::ModeCount { expected: 2, got: n });
        }
        self.check_modes(&[measured_mode])?;
        let keep: Vec<usize> = (0..n).filter(|&m| m != measured_mode).collect();
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let col = 2 * measured_mode + quadrature.offset();
        let variance = self.cov[(col, col)];
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::SingularMeasurement(variance));
        }
        // (X B X)^+ = diag(1/B_qq, 0) for q, diag(0, 1/B_pp) for p.
        let a = self.cov.select_rows(&idx).select_columns(&idx);
        let c = DVector::from_iterator(idx.len(), idx.iter().map(|&r| self.cov[(r, col)]));
        let cov = a - (&c * c.transpose()) / variance;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianState { cov, mean: self.mean.select_rows(&idx) })
    }

    /// Symplectic spectrum as the singular values of the antisymmetric matrix
    /// `M = V^{1/2} Omega V^{1/2}`, which are the `nu_k`, each twice.
    fn raw_symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n_modes();
        let eig = SymmetricEigen::new(self.cov.clone());
        let min_eig = eig.eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::Unphysical(format!("covariance is not positive definite (eigenvalue {min_eig:e})")));
        }
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
        let m = &root * symplectic_form(n) * &root;
        let mut nu: Vec<f64> = m.singular_values().iter().copied().collect();
        nu.sort_by(|a, b| b.total_cmp(a));
        Ok(nu.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
    }

    /// The `n` symplectic eigenvalues, descending.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let nu = self.raw_symplectic_eigenvalues()?;
        if let Some(&low) = nu.last() {
            if low < 1.0 - EIGENVALUE_FLOOR {
                return Err(Error::Unphysical(format!("symplectic eigenvalue {low} is below 1")));
            }
        }
        Ok(nu)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> Result<f64> {
        self.symplectic_eigenvalues()?.into_iter().map(|nu| bosonic_entropy(nu.max(1.0))).sum()
    }

    /// Largest deviation from 1 of any symplectic eigenvalue.
    pub fn purity_defect(&self) -> Result<f64> {
        Ok(self.symplectic_eigenvalues()?.iter().map(|nu| (nu - 1.0).abs()).fold(0.0, f64::max))
    }
}

/// Symplectic eigenvalues of `state`, descending.
pub fn symplectic_eigenvalues(state: &GaussianState) -> Result<Vec<f64>> {
    state.symplectic_eigenvalues()
}

/// Von Neumann entropy of `state` in bits.
pub fn von_neumann_entropy(state: &GaussianState) -> Result<f64> {
    state.entropy()
}

/// Single-mode thermal state with quadrature variance `variance`.
pub fn thermal_state(variance: f64) -> Result<GaussianState> {
    if !(variance >= 1.0 - PHYSICAL_TOL) || !variance.is_finite() {
        return Err(Error::domain("thermal variance", variance, "must be >= 1"));
    }
    Ok(GaussianState { cov: DMatrix::from_diagonal_element(2, 2, variance.max(1.0)), mean: DVector::zeros(2) })
}

/// Two-mode squeezed vacuum with local variance `w` on both modes.
pub fn two_mode_squeezed(w: f64) -> Result<GaussianState> {
    if !(w >= 1.0) || !w.is_finite() {
        return Err(Error::domain("two-mode squeezing variance", w, "must be >= 1"));
    }
    let c = (w * w - 1.0).sqrt();
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        w,   0.0, c,   0.0,
        0.0, w,   0.0, -c,
        c,   0.0, w,   0.0,
        0.0, -c,  0.0, w,
    ]);
    Ok(GaussianState { cov, mean: DVector::zeros(4) })
}

/// A real symplectic matrix acting on quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    matrix: DMatrix<f64>,
}

impl SymplecticTransform {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || !n.is_multiple_of(2) || matrix.ncols() != n {
            return Err(Error::NotSymplectic(f64::NAN));
        }
        let omega = symplectic_form(n / 2);
        let defect = (&matrix * &omega * matrix.transpose() - &omega).amax();
        if !(defect <= SYMPLECTIC_TOL * matrix.amax().powi(2).max(1.0)) {
            return Err(Error::NotSymplectic(defect));
        }
        Ok(SymplecticTransform { matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        SymplecticTransform { matrix: DMatrix::identity(2 * n_modes, 2 * n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `S^{-1} = -Omega S^T Omega`.
    pub fn inverse(&self) -> SymplecticTransform {
        let omega = symplectic_form(self.n_modes());
        SymplecticTransform { matrix: -(&omega * self.matrix.transpose() * &omega) }
    }
}

/// Two-port beam splitter of transmissivity `eta`:
/// `out_1 = sqrt(eta) in_1 + sqrt(1-eta) in_2`,
/// `out_2 = -sqrt(1-eta) in_1 + sqrt(eta) in_2`, on `q` and `p` alike.
pub fn beam_splitter(eta: f64) -> Result<SymplecticTransform> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain("beam splitter transmissivity", eta, "must lie in [0, 1]"));
    }
    let t = eta.sqrt();
    let r = (1.0 - eta).sqrt();
    #[rustfmt::skip]
    let matrix = DMatrix::from_row_slice(4, 4, &[
        t,   0.0, r,   0.0,
        0.0, t,   0.0, r,
        -r,  0.0, t,   0.0,
        0.0, -r,  0.0, t,
    ]);
    SymplecticTransform::new(matrix)
}

/// Joint state of the entangling-cloner attack on one parallel channel.
///
/// Modes: 0 = Bob, 1 = Eve's stored EPR arm `e`, 2 = Eve's beam-splitter output `E'`.
/// Alice's ensemble-average mode is thermal with variance `alice_variance`; Eve
/// injects one arm of a two-mode squeezed vacuum of variance `eve_noise`.
pub fn entangling_cloner_state(transmittance: f64, alice_variance: f64, eve_noise: f64) -> Result<GaussianState> {
    let alice = thermal_state(alice_variance)?;
    let epr = two_mode_squeezed(eve_noise)?;
    let joint = alice.tensor(&epr);
    joint.apply(&beam_splitter(transmittance)?, &[0, 2])
}

/// Pure four-mode extension of [`entangling_cloner_state`]: Alice's thermal mode is
/// one arm of a two-mode squeezed vacuum whose other arm is kept as mode 0.
///
/// Modes: 0 = Alice's reference, 1 = Bob, 2 = `e`, 3 = `E'`.
pub fn purified_cloner_state(transmittance: f64, alice_variance: f64, eve_noise: f64) -> Result<GaussianState> {
    let alice = two_mode_squeezed(alice_variance)?;
    let epr = two_mode_squeezed(eve_noise)?;
    let joint = alice.tensor(&epr);
    joint.apply(&beam_splitter(transmittance)?, &[1, 3])
}

/// Eve's Holevo information on Bob's homodyne outcome, `S(E) - S(E | x_B)`, in bits.
pub fn holevo_exact(transmittance: f64, alice_variance: f64, eve_noise: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::domain("transmittance", transmittance, "must lie in [0, 1]"));
    }
    if !(alice_variance >= 1.0) {
        return Err(Error::domain("alice_variance", alice_variance, "must be >= 1"));
    }
    let state = entangling_cloner_state(transmittance, alice_variance, eve_noise)?;
    let eve = state.partial_trace(&[1, 2])?;
    let conditioned = state.homodyne_condition(0, Quadrature::Q)?;
    let chi = eve.entropy()? - conditioned.entropy()?;
    Ok(chi.max(0.0))
}
