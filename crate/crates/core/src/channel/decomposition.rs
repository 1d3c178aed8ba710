use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A singular value counts as nonzero when it exceeds this fraction of the largest.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Channels whose largest singular value is below this are opaque.
pub const OPAQUE_FLOOR: f64 = 1e-30;

/// Transmittances above 1 by more than this are reported as non-physical.
const TRANSMITTANCE_SLACK: f64 = 1e-9;

/// SVD of the channel and the parallel eigenmode channels it induces.
#[derive(Debug, Clone)]
pub struct ChannelDecomposition {
    pub matrix: DMatrix<Complex64>,
    /// `N_r x N_r` unitary; Bob combines with its adjoint.
    pub left_u: DMatrix<Complex64>,
    /// `N_t x N_t` unitary; Alice precodes with it.
    pub right_v: DMatrix<Complex64>,
    /// Nonzero eigenvalues of `H^dagger H`, descending.
    pub transmittances: Vec<f64>,
    pub rank: usize,
    /// `sqrt(1 - T_i)` for the `rank` eigenmodes, then 1 up to `min(N_r, N_t)`.
    pub eve_mix: Vec<f64>,
}

impl ChannelDecomposition {
    pub fn trace_gram(&self) -> f64 {
        self.transmittances.iter().sum()
    }

    /// `|| U^dagger H V - Sigma ||_F`, with `Sigma` the `N_r x N_t` matrix carrying
    /// `sqrt(T_i)` on its leading diagonal.
    pub fn beamforming_residual(&self) -> f64 {
        let mut diag = self.left_u.adjoint() * &self.matrix * &self.right_v;
        for (i, t) in self.transmittances.iter().enumerate() {
            diag[(i, i)] -= Complex64::new(t.sqrt(), 0.0);
        }
        diag.norm()
    }

    /// Largest deviation from unitarity of `U` and `V` (Frobenius).
    pub fn unitarity_defect(&self) -> f64 {
        let du = &self.left_u.adjoint() * &self.left_u - DMatrix::identity(self.left_u.nrows(), self.left_u.nrows());
        let dv =
            &self.right_v.adjoint() * &self.right_v - DMatrix::identity(self.right_v.nrows(), self.right_v.nrows());
        du.norm().max(dv.norm())
    }
}

/// Squares the singular values above the rank cutoff, checking the opaque floor
/// and `T <= 1`. Returns the transmittances (descending) and the rank.
pub(crate) fn transmittances_from_singular_values(singular: &[f64], rank_tolerance: f64) -> Result<(Vec<f64>, usize)> {
    let mut s: Vec<f64> = singular.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let s_max = s.first().copied().unwrap_or(0.0);
    if !(s_max >= OPAQUE_FLOOR) {
        return Err(Error::OpaqueChannel(s_max));
    }
    let cutoff = rank_tolerance * s_max;
    let t: Vec<f64> = s.iter().take_while(|&&x| x > cutoff).map(|x| x * x).collect();
    if t[0] > 1.0 + TRANSMITTANCE_SLACK {
        return Err(Error::NonPhysicalTransmittance(t[0]));
    }
    let t: Vec<f64> = t.into_iter().map(|x| x.min(1.0)).collect();
    let r = t.len();
    Ok((t, r))
}

/// Extends orthonormal columns to a full unitary basis by Gram-Schmidt against the
/// standard basis, always taking the candidate with the largest residual.
fn complete_unitary(columns: DMatrix<Complex64>, dim: usize) -> DMatrix<Complex64> {
    let mut basis: Vec<DVector<Complex64>> = columns.column_iter().map(|c| c.into_owned()).collect();
    let project_out = |v: &mut DVector<Complex64>, basis: &[DVector<Complex64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = b.dotc(v);
                *v -= b * c;
            }
        }
    };
    while basis.len() < dim {
        let mut best: Option<DVector<Complex64>> = None;
        let mut best_norm = -1.0;
        for k in 0..dim {
            let mut e = DVector::<Complex64>::zeros(dim);
            e[k] = Complex64::new(1.0, 0.0);
            project_out(&mut e, &basis);
            let n = e.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(e);
            }
        }
        let mut v = best.expect("dim > 0");
        v /= Complex64::new(best_norm, 0.0);
        basis.push(v);
    }
    DMatrix::from_columns(&basis)
}

/// Right singular vectors from the Hermitian eigenproblem of `H^dagger H`, with
/// `sigma_i = |H v_i|`, sorted by descending singular value.
fn right_singular(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(h.adjoint() * h);
    let mut order: Vec<usize> = (0..h.ncols()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let v = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    let sigma = (0..v.ncols()).map(|i| (h * v.column(i)).norm()).collect();
    (sigma, v)
}

/// SVD `H = U Sigma V^dagger` with full unitaries and the parallel-channel
/// transmittances `T_i = sigma_i^2`.
///
/// The vectors come from the Hermitian eigenproblem on the smaller side: the
/// complex SVD with vectors in nalgebra 0.35 can return a wrong factorization for
/// rank-one steering-vector channels.
pub fn decompose(h: &DMatrix<Complex64>, rank_tolerance: f64) -> Result<ChannelDecomposition> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(Error::InvalidGeometry("empty channel matrix".into()));
    }
    if h.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidGeometry("channel matrix is not finite".into()));
    }
    let (n_r, n_t) = h.shape();
    let transpose = n_r < n_t;
    let work = if transpose { h.adjoint() } else { h.clone() };
    let (sigma, right) = right_singular(&work);
    let (transmittances, rank) = transmittances_from_singular_values(&sigma, rank_tolerance)?;
    let left = DMatrix::from_columns(
        &(0..rank).map(|i| &work * right.column(i) / Complex64::new(sigma[i], 0.0)).collect::<Vec<_>>(),
    );
    let right = right.columns(0, rank).into_owned();
    let (u_thin, v_thin) = if transpose { (right, left) } else { (left, right) };
    let left_u = complete_unitary(u_thin, n_r);
    let right_v = complete_unitary(v_thin, n_t);
    let m = n_r.min(n_t);
    let eve_mix = (0..m).map(|i| transmittances.get(i).map_or(1.0, |t| (1.0 - t).sqrt())).collect();
    Ok(ChannelDecomposition { matrix: h.clone(), left_u, right_v, transmittances, rank, eve_mix })
}

/// The transmittances of the `r` parallel channels obtained by precoding with `V`
/// and combining with `U^dagger`; `U^dagger H V` is diagonal with entries `sqrt(T_i)`.
pub fn effective_parallel_channels(dec: &ChannelDecomposition) -> Vec<f64> {
    debug_assert!(dec.beamforming_residual() <= 1e-10 * dec.matrix.norm().max(f64::MIN_POSITIVE));
    dec.transmittances.clone()
}
