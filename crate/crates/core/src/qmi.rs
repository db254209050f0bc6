//! Partitioned symmetric matrices, quadratic matrix inequalities (QMIs) and
//! their solution sets.
//!
//! A partitioned symmetric matrix `M` with split `(u, v)` defines the QMI
//! solution set `Z(M) = { Z in R^{v x u} : [I; Z]^T M [I; Z] >= 0 }`. Every
//! object this crate reasons about lives in this form: the noise model `Pi`,
//! the parameter set `Theta = Z(N)`, the system set `Sigma = Z(M)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    psd_inv_sqrt, psd_sqrt, spectral_norm, sym_eigen, sym_pinv, symmetrize, tol_for, TOL_BASE,
};

/// Symmetric matrix with a declared `(u, v)` block split. `M21` is stored
/// implicitly as `M12^T`.
#[derive(Debug, Clone)]
pub struct PartitionedSymmetric {
    m11: DMatrix<f64>,
    m12: DMatrix<f64>,
    m22: DMatrix<f64>,
}

impl PartitionedSymmetric {
    /// Builds from blocks; the diagonal blocks are symmetrized.
    pub fn new(m11: DMatrix<f64>, m12: DMatrix<f64>, m22: DMatrix<f64>) -> Result<Self> {
        let (u, v) = (m11.nrows(), m22.nrows());
        if u == 0 || v == 0 {
            return Err(Error::DimensionMismatch(
                "both split sizes must be at least 1".into(),
            ));
        }
        if m11.ncols() != u || m22.ncols() != v || m12.nrows() != u || m12.ncols() != v {
            return Err(Error::DimensionMismatch(format!(
                "blocks ({}x{}, {}x{}, {}x{}) do not form a (u,v)=({u},{v}) split",
                m11.nrows(),
                m11.ncols(),
                m12.nrows(),
                m12.ncols(),
                m22.nrows(),
                m22.ncols()
            )));
        }
        Ok(Self {
            m11: symmetrize(&m11),
            m12,
            m22: symmetrize(&m22),
        })
    }

    /// Splits a full symmetric matrix at row/column `u`. The input must be
    /// symmetric to within the assembly tolerance.
    pub fn from_full(full: &DMatrix<f64>, u: usize) -> Result<Self> {
        let n = full.nrows();
        if full.ncols() != n || u == 0 || u >= n {
            return Err(Error::DimensionMismatch(format!(
                "cannot split a {}x{} matrix at u={u}",
                full.nrows(),
                full.ncols()
            )));
        }
        let asym = (full - full.transpose()).norm();
        let scale = full.norm().max(1.0);
        if asym > 1e-8 * scale {
            return Err(Error::Invalid(format!(
                "matrix is not symmetric (|M - M^T| = {asym:.3e})"
            )));
        }
        let s = symmetrize(full);
        let v = n - u;
        Ok(Self {
            m11: s.view((0, 0), (u, u)).into_owned(),
            m12: s.view((0, u), (u, v)).into_owned(),
            m22: s.view((u, u), (v, v)).into_owned(),
        })
    }

    pub fn u(&self) -> usize {
        self.m11.nrows()
    }

    pub fn v(&self) -> usize {
        self.m22.nrows()
    }

    pub fn m11(&self) -> &DMatrix<f64> {
        &self.m11
    }

    pub fn m12(&self) -> &DMatrix<f64> {
        &self.m12
    }

    pub fn m22(&self) -> &DMatrix<f64> {
        &self.m22
    }

    /// Assembles the full `(u+v) x (u+v)` symmetric matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        let (u, v) = (self.u(), self.v());
        let mut out = DMatrix::zeros(u + v, u + v);
        out.view_mut((0, 0), (u, u)).copy_from(&self.m11);
        out.view_mut((0, u), (u, v)).copy_from(&self.m12);
        out.view_mut((u, 0), (v, u)).copy_from(&self.m12.transpose());
        out.view_mut((u, u), (v, v)).copy_from(&self.m22);
        out
    }

    /// `blkdiag(M, 0_pad)`, used to border LMIs.
    pub fn embed(&self, pad: usize) -> DMatrix<f64> {
        let full = self.assemble();
        let n = full.nrows();
        let mut out = DMatrix::zeros(n + pad, n + pad);
        out.view_mut((0, 0), (n, n)).copy_from(&full);
        out
    }

    /// Schur complement `M|M22 = M11 - M12 M22^† M21`, symmetrized. The
    /// pseudoinverse handles singular `M22`.
    pub fn schur_complement(&self) -> DMatrix<f64> {
        let m22_pinv = sym_pinv(&self.m22);
        symmetrize(&(&self.m11 - &self.m12 * m22_pinv * self.m12.transpose()))
    }
}

/// Schur complement of a partitioned symmetric matrix with respect to its
/// lower-right block.
pub fn schur_complement(m: &PartitionedSymmetric) -> DMatrix<f64> {
    m.schur_complement()
}

/// `[I; Z]^T M [I; Z]` for `Z` of shape `v x u`.
pub fn qmi_value(m: &PartitionedSymmetric, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.nrows() != m.v() || z.ncols() != m.u() {
        return Err(Error::DimensionMismatch(format!(
            "Z is {}x{}, expected {}x{}",
            z.nrows(),
            z.ncols(),
            m.v(),
            m.u()
        )));
    }
    let val = &m.m11 + &m.m12 * z + z.transpose() * m.m12.transpose() + z.transpose() * &m.m22 * z;
    Ok(symmetrize(&val))
}

/// Outcome of a set-membership test.
#[derive(Debug, Clone, Copy)]
pub struct Membership {
    /// Smallest eigenvalue of the QMI value at the tested point.
    pub min_eig: f64,
    /// True iff `min_eig >= -tol`.
    pub is_member: bool,
}

/// Tests `Z in Z(M)` and reports the smallest eigenvalue of the QMI value.
pub fn qmi_membership(m: &PartitionedSymmetric, z: &DMatrix<f64>) -> Result<Membership> {
    let val = qmi_value(m, z)?;
    let eig = sym_eigen(&val);
    let tol = tol_for(TOL_BASE, eig.spectral_norm());
    Ok(Membership {
        min_eig: eig.lambda_min(),
        is_member: eig.lambda_min() >= -tol,
    })
}

/// A validated noise model `Pi` with split `(m, T)`: `Pi22 < 0` and
/// `Pi|Pi22 >= 0`, so that `Z(Pi)` is nonempty, convex and bounded.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pi: PartitionedSymmetric,
    lambda_max_pi22: f64,
    lambda_min_schur: f64,
    schur: DMatrix<f64>,
}

impl NoiseModel {
    /// Output dimension `m`.
    pub fn output_dim(&self) -> usize {
        self.pi.u()
    }

    /// Sample count `T`.
    pub fn samples(&self) -> usize {
        self.pi.v()
    }

    pub fn pi(&self) -> &PartitionedSymmetric {
        &self.pi
    }

    /// Cached `lambda_max(Pi22)` (validity certificate, strictly negative).
    pub fn lambda_max_pi22(&self) -> f64 {
        self.lambda_max_pi22
    }

    /// Cached `lambda_min(Pi|Pi22)` (validity certificate, >= -tol).
    pub fn lambda_min_schur(&self) -> f64 {
        self.lambda_min_schur
    }

    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    /// Center of `Z(Pi)`: `-Pi22^† Pi21`, of shape `T x m`.
    pub fn center(&self) -> DMatrix<f64> {
        -sym_pinv(self.pi.m22()) * self.pi.m12().transpose()
    }

    /// The common energy-bound model `W W^T <= Q`, i.e. `Pi = blkdiag(Q, -I_T)`.
    pub fn energy_bound(q: DMatrix<f64>, t: usize) -> Result<Self> {
        let m = q.nrows();
        if q.ncols() != m {
            return Err(Error::DimensionMismatch("Q must be square".into()));
        }
        let pi = PartitionedSymmetric::new(
            q,
            DMatrix::zeros(m, t),
            -DMatrix::<f64>::identity(t, t),
        )?;
        validate_noise_model(pi)
    }
}

/// Checks `Pi22 < 0` (strictly) and `Pi|Pi22 >= 0`, caching the eigen
/// extremes as the validity certificate.
pub fn validate_noise_model(pi: PartitionedSymmetric) -> Result<NoiseModel> {
    let eig22 = sym_eigen(pi.m22());
    let tol22 = tol_for(TOL_BASE, eig22.spectral_norm());
    if eig22.lambda_max() >= -tol22 {
        return Err(Error::NotNegativeDefinite {
            lambda_max: eig22.lambda_max(),
        });
    }
    let schur = pi.schur_complement();
    let eig_s = sym_eigen(&schur);
    let tol_s = tol_for(TOL_BASE, eig_s.spectral_norm());
    if eig_s.lambda_min() < -tol_s {
        return Err(Error::SchurNotPsd {
            lambda_min: eig_s.lambda_min(),
        });
    }
    Ok(NoiseModel {
        pi,
        lambda_max_pi22: eig22.lambda_max(),
        lambda_min_schur: eig_s.lambda_min(),
        schur,
    })
}

/// The set `Theta = Z(N)` of parameters consistent with the measurements,
/// with cached least-squares estimate and Schur complement.
///
/// Members are `k x m` matrices `theta`; `phi^theta(z) = theta^T b(z)`.
#[derive(Debug, Clone)]
pub struct ParameterSet {
    n: PartitionedSymmetric,
    schur: DMatrix<f64>,
    lse: DMatrix<f64>,
    neg_n22_pinv: DMatrix<f64>,
    compact: bool,
    tol_base: f64,
}

impl ParameterSet {
    /// Builds the set from an already-assembled data matrix `N` with split
    /// `(m, k)`. Compactness is decided by `lambda_max(N22) < -tol`.
    pub fn from_data_matrix(n: PartitionedSymmetric) -> Self {
        Self::with_tolerance(n, TOL_BASE)
    }

    pub fn with_tolerance(n: PartitionedSymmetric, tol_base: f64) -> Self {
        let eig22 = sym_eigen(n.m22());
        let compact = eig22.lambda_max() < -tol_for(tol_base, eig22.spectral_norm());
        let n22_pinv = sym_pinv(n.m22());
        let lse = -&n22_pinv * n.m12().transpose();
        // Round-off in the Schur complement turns into sqrt-scale errors in
        // every closed form built on it; eigenvalues below the data scale's
        // tolerance are genuinely zero.
        let schur_raw = n.schur_complement();
        let scale = n.assemble().amax();
        let floor = tol_for(tol_base, scale);
        let eig_s = sym_eigen(&schur_raw);
        let mut d = DMatrix::zeros(schur_raw.nrows(), schur_raw.nrows());
        for i in 0..schur_raw.nrows() {
            d[(i, i)] = if eig_s.values[i].abs() <= floor {
                0.0
            } else {
                eig_s.values[i]
            };
        }
        let schur = symmetrize(&(&eig_s.vectors * d * eig_s.vectors.transpose()));
        let neg_n22_pinv = -n22_pinv;
        ParameterSet {
            n,
            schur,
            lse,
            neg_n22_pinv,
            compact,
            tol_base,
        }
    }

    /// Output dimension `m`.
    pub fn output_dim(&self) -> usize {
        self.n.u()
    }

    /// Basis-function count `k`.
    pub fn basis_count(&self) -> usize {
        self.n.v()
    }

    pub fn n(&self) -> &PartitionedSymmetric {
        &self.n
    }

    /// Cached `N|N22`.
    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    /// Cached `(-N22)^†`.
    pub fn neg_n22_pinv(&self) -> &DMatrix<f64> {
        &self.neg_n22_pinv
    }

    /// True iff `N22 < 0`, equivalently the regressor has full row rank.
    pub fn is_compact(&self) -> bool {
        self.compact
    }

    /// Overrides the compact flag; the data builders set it from the row
    /// rank of the regressor, which is the authoritative test.
    pub fn with_compact_flag(mut self, compact: bool) -> Self {
        self.compact = compact;
        self
    }

    pub fn tol_base(&self) -> f64 {
        self.tol_base
    }

    /// `theta_lse = -N22^† N21`, always a member of the set.
    pub fn lse_estimate(&self) -> &DMatrix<f64> {
        &self.lse
    }

    /// `phi_lse(z) = theta_lse^T b(z)` evaluated at a regressor vector.
    pub fn phi_lse(&self, bvec: &DVector<f64>) -> DVector<f64> {
        self.lse.transpose() * bvec
    }

    /// Membership test for a candidate `k x m` parameter.
    pub fn membership(&self, theta: &DMatrix<f64>) -> Result<Membership> {
        qmi_membership(&self.n, theta)
    }

    /// Whether `b` lies in the range of the regressor, decided through the
    /// projector residual `(I - N22 N22^†) b` with relative tolerance 1e-8.
    pub fn range_contains(&self, bvec: &DVector<f64>) -> bool {
        let n22 = self.n.m22();
        let resid = bvec - n22 * (sym_pinv(n22) * bvec);
        resid.norm() <= 1e-8 * bvec.norm().max(f64::MIN_POSITIVE)
    }

    /// Does `N` have at least one positive eigenvalue? (Hypothesis of the
    /// norm-bound conditions; when false those give upper bounds only.)
    pub fn has_positive_eigenvalue(&self) -> bool {
        let eig = sym_eigen(&self.n.assemble());
        eig.lambda_max() > tol_for(self.tol_base, eig.spectral_norm())
    }
}

/// Returns the least-squares estimate `-N22^† N21` of a parameter set.
pub fn lse_estimate(set: &ParameterSet) -> DMatrix<f64> {
    set.lse_estimate().clone()
}

/// Whether samples are drawn from the interior or the boundary of the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Interior,
    Boundary,
}

/// Samples members of a compact set `Z(N)` through the ellipsoidal
/// parameterization `theta = theta_lse + (-N22)^{-1/2} V (N|N22)^{1/2}` with
/// `||V||_2 <= 1` (boundary: `||V||_2 = 1`).
pub fn sample_parameter_set(
    set: &ParameterSet,
    count: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    if !set.is_compact() {
        return Err(Error::NotCompact);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape_left = psd_inv_sqrt(&-set.n().m22());
    let shape_right = psd_sqrt(set.schur());
    let (k, m) = (set.basis_count(), set.output_dim());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let g = DMatrix::from_fn(k, m, |_, _| rng.gen_range(-1.0..1.0f64));
        let s = spectral_norm(&g);
        let v = if s > 0.0 {
            match mode {
                SampleMode::Boundary => &g / s,
                SampleMode::Interior => &g * (rng.gen_range(0.0..1.0f64) / s),
            }
        } else {
            g
        };
        out.push(&set.lse + &shape_left * v * &shape_right);
    }
    Ok(out)
}

/// The member of `Z(N)` attaining `sup_theta c^T theta^T b` at the given
/// regressor vector `b` and direction `c` (the worst case behind the closed
/// forms). Requires compactness.
pub fn extremal_member(
    set: &ParameterSet,
    bvec: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if !set.is_compact() {
        return Err(Error::NotCompact);
    }
    if bvec.len() != set.basis_count() || c.len() != set.output_dim() {
        return Err(Error::DimensionMismatch(
            "extremal_member: b or c has the wrong length".into(),
        ));
    }
    let left = psd_inv_sqrt(&-set.n().m22());
    let right = psd_sqrt(set.schur());
    let w = &left * bvec;
    let sc = &right * c;
    let wn = w.norm();
    let scn = sc.norm();
    let v = if wn > 0.0 && scn > 0.0 {
        (&w / wn) * (sc / scn).transpose()
    } else {
        DMatrix::zeros(set.basis_count(), set.output_dim())
    };
    Ok(&set.lse + left * v * right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// The worked linear-regression instance used throughout the tests:
    /// Y = [[1,0,1],[1,1,0]], Phi = [[1,1,1],[0,1,0],[0,0,1]], Pi = blkdiag(I2,-I3).
    pub(crate) fn example1_n() -> PartitionedSymmetric {
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let phi = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let n11 = DMatrix::identity(2, 2) - &y * y.transpose();
        let n12 = &y * phi.transpose();
        let n22 = -(&phi * phi.transpose());
        PartitionedSymmetric::new(n11, n12, n22).unwrap()
    }

    #[test]
    fn schur_of_identity_is_identity() {
        let m = PartitionedSymmetric::from_full(&DMatrix::identity(5, 5), 2).unwrap();
        assert_relative_eq!(m.schur_complement(), DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn schur_with_zero_m22_returns_m11() {
        let m11 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = PartitionedSymmetric::new(
            m11.clone(),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        assert_relative_eq!(m.schur_complement(), m11, epsilon = 1e-14);
    }

    #[test]
    fn example1_schur_cross_checked_against_lse_reconstruction() {
        let n = example1_n();
        let direct = n.schur_complement();
        // N|N22 = N11 + N12 * theta_lse since theta_lse = -N22^† N21.
        let set = ParameterSet::from_data_matrix(n.clone());
        let rec = n.m11() + n.m12() * set.lse_estimate();
        assert_relative_eq!(direct, symmetrize(&rec), epsilon = 1e-10);
        // Printed in the worked example as the 2x2 identity.
        assert_relative_eq!(direct, DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn example1_lse_matches_printed_value() {
        let set = ParameterSet::from_data_matrix(example1_n());
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        assert_relative_eq!(*set.lse_estimate(), expected, epsilon = 1e-12);
        let mem = set.membership(&expected).unwrap();
        assert!(mem.is_member);
        // QMI value at the lse equals N|N22.
        let val = qmi_value(set.n(), &expected).unwrap();
        assert_relative_eq!(val, *set.schur(), epsilon = 1e-10);
    }

    #[test]
    fn lse_with_zero_n12_is_zero() {
        let n = PartitionedSymmetric::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 3),
            -DMatrix::<f64>::identity(3, 3),
        )
        .unwrap();
        let set = ParameterSet::from_data_matrix(n);
        assert_eq!(*set.lse_estimate(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn membership_block_diagonal_cases() {
        let pos = PartitionedSymmetric::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 3),
            -DMatrix::<f64>::identity(3, 3),
        )
        .unwrap();
        let z = DMatrix::zeros(3, 2);
        assert!(qmi_membership(&pos, &z).unwrap().is_member);

        let neg = PartitionedSymmetric::new(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 3),
            -DMatrix::<f64>::identity(3, 3),
        )
        .unwrap();
        assert!(!qmi_membership(&neg, &z).unwrap().is_member);
    }

    #[test]
    fn membership_shape_mismatch_errors() {
        let m = PartitionedSymmetric::from_full(&DMatrix::identity(4, 4), 2).unwrap();
        assert!(qmi_membership(&m, &DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn noise_model_energy_bound_accepts_psd_q() {
        assert!(NoiseModel::energy_bound(DMatrix::identity(2, 2), 3).is_ok());
        assert!(NoiseModel::energy_bound(DMatrix::zeros(2, 2), 3).is_ok());
        // Q with a negative eigenvalue makes Pi|Pi22 indefinite.
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(
            NoiseModel::energy_bound(bad, 3),
            Err(Error::SchurNotPsd { .. })
        ));
    }

    #[test]
    fn noise_model_rejects_positive_pi22() {
        let pi = PartitionedSymmetric::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 3),
            DMatrix::<f64>::identity(3, 3),
        )
        .unwrap();
        assert!(matches!(
            validate_noise_model(pi),
            Err(Error::NotNegativeDefinite { .. })
        ));
    }

    #[test]
    fn noise_model_rejects_negative_schur() {
        let pi = PartitionedSymmetric::new(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 3),
            -DMatrix::<f64>::identity(3, 3),
        )
        .unwrap();
        assert!(matches!(
            validate_noise_model(pi),
            Err(Error::SchurNotPsd { .. })
        ));
    }

    #[test]
    fn sampling_respects_membership_and_boundary() {
        let set = ParameterSet::from_data_matrix(example1_n());
        let interior = sample_parameter_set(&set, 200, SampleMode::Interior, 7).unwrap();
        for theta in &interior {
            assert!(set.membership(theta).unwrap().is_member);
        }
        let boundary = sample_parameter_set(&set, 200, SampleMode::Boundary, 8).unwrap();
        for theta in &boundary {
            let mem = set.membership(theta).unwrap();
            assert!(mem.is_member);
            assert!(mem.min_eig.abs() <= 1e-8, "boundary min_eig = {}", mem.min_eig);
        }
    }

    #[test]
    fn sampling_degenerate_schur_returns_lse_only() {
        // Zero-noise data: Q = 0 makes the set a singleton at theta_hat.
        let phi = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0]);
        let theta_hat = DMatrix::from_row_slice(2, 1, &[0.5, -1.5]);
        let y = theta_hat.transpose() * &phi;
        let n11 = -(&y * y.transpose());
        let n12 = &y * phi.transpose();
        let n22 = -(&phi * phi.transpose());
        let set = ParameterSet::from_data_matrix(
            PartitionedSymmetric::new(n11, n12, n22).unwrap(),
        );
        let samples = sample_parameter_set(&set, 20, SampleMode::Boundary, 3).unwrap();
        for s in &samples {
            assert_relative_eq!(*s, theta_hat, epsilon = 1e-8);
        }
    }

    #[test]
    fn sampling_noncompact_errors() {
        // Rank-deficient regressor: only one basis direction excited.
        let phi = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let n22 = -(&phi * phi.transpose());
        let set = ParameterSet::from_data_matrix(
            PartitionedSymmetric::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 2), n22).unwrap(),
        );
        assert!(matches!(
            sample_parameter_set(&set, 5, SampleMode::Interior, 0),
            Err(Error::NotCompact)
        ));
    }

    #[test]
    fn lse_maximizes_qmi_value_over_samples() {
        let set = ParameterSet::from_data_matrix(example1_n());
        let lse_val = qmi_value(set.n(), set.lse_estimate()).unwrap();
        let lse_min = sym_eigen(&lse_val).lambda_min();
        for theta in sample_parameter_set(&set, 1000, SampleMode::Interior, 11).unwrap() {
            let v = qmi_value(set.n(), &theta).unwrap();
            // N|N22 >= [I;theta]^T N [I;theta] for every member.
            let diff = &lse_val - &v;
            assert!(sym_eigen(&diff).lambda_min() >= -1e-9);
            assert!(sym_eigen(&v).lambda_min() <= lse_min + 1e-9);
        }
    }

    #[test]
    fn extremal_member_attains_uncertainty() {
        let set = ParameterSet::from_data_matrix(example1_n());
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let theta = extremal_member(&set, &b, &c).unwrap();
        assert!(set.membership(&theta).unwrap().is_member);
        let reach = (c.transpose() * theta.transpose() * &b)[(0, 0)];
        // c^T phi_lse(b) = 2, uncertainty sqrt(2): worst case 2 + sqrt(2).
        assert_relative_eq!(reach, 2.0 + 2.0f64.sqrt(), epsilon = 1e-10);
    }
}
