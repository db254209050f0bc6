//! Basis-function families `b : R^n -> R^k` with analytic Jacobians and the
//! regularity metadata the certificates need (per-component curvature, global
//! Lipschitz/Jacobian-norm bounds, coordinate-component bookkeeping).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Declared curvature of a single basis component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Unknown,
    Affine,
    Convex,
    StrictlyConvex,
}

impl Curvature {
    pub fn is_convex(self) -> bool {
        !matches!(self, Curvature::Unknown)
    }

    pub fn is_strictly_convex(self) -> bool {
        matches!(self, Curvature::StrictlyConvex)
    }
}

type EvalFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A vector of basis functions with Jacobian and regularity metadata.
#[derive(Clone)]
pub struct BasisSet {
    name: String,
    input_dim: usize,
    count: usize,
    eval: EvalFn,
    jacobian: Option<JacFn>,
    approximate_jacobian: bool,
    curvature: Vec<Curvature>,
    lipschitz_bound: Option<f64>,
    jacobian_norm_bound: Option<f64>,
    gram_bound: Option<DMatrix<f64>>,
    coordinate_indices: Option<Vec<usize>>,
}

impl fmt::Debug for BasisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisSet")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("count", &self.count)
            .finish()
    }
}

impl BasisSet {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Input dimension `n`.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of basis functions `k`.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Evaluates `b(z)`.
    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        assert_eq!(z.len(), self.input_dim, "point dimension mismatch");
        let out = (self.eval)(z);
        assert_eq!(out.len(), self.count, "basis evaluator returned wrong length");
        out
    }

    /// `k x n` Jacobian of `b` at `z` (central finite differences with step
    /// 1e-6 when no analytic Jacobian was supplied).
    pub fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(z),
            None => self.fd_jacobian(z),
        }
    }

    fn fd_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let h = 1e-6;
        let mut out = DMatrix::zeros(self.count, self.input_dim);
        for j in 0..self.input_dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let col = (self.eval(&zp) - self.eval(&zm)) / (2.0 * h);
            out.set_column(j, &col);
        }
        out
    }

    /// True when the Jacobian is a finite-difference approximation; such
    /// bases are rejected by certificates that require the exact `J(b)`.
    pub fn jacobian_is_approximate(&self) -> bool {
        self.approximate_jacobian
    }

    pub fn require_exact_jacobian(&self) -> Result<()> {
        if self.approximate_jacobian {
            Err(Error::MissingJacobian(format!(
                "basis '{}' only has a finite-difference Jacobian",
                self.name
            )))
        } else {
            Ok(())
        }
    }

    pub fn curvature(&self) -> &[Curvature] {
        &self.curvature
    }

    /// `L_b` with `||b(z) - b(z*)||_2 <= L_b ||z - z*||_2` (unweighted input
    /// norm), when declared.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    /// `sup_z ||J(b)(z)||_2`, when declared.
    pub fn jacobian_norm_bound(&self) -> Option<f64> {
        self.jacobian_norm_bound
    }

    /// `M` with `b(z) b(z)^T <= M` on the declared region, when available.
    pub fn gram_bound(&self) -> Option<&DMatrix<f64>> {
        self.gram_bound.as_ref()
    }

    /// For bases containing the coordinate functions `z_j`, the basis index
    /// of each coordinate, in coordinate order.
    pub fn coordinate_indices(&self) -> Option<&[usize]> {
        self.coordinate_indices.as_deref()
    }
}

/// `Phi = [b(z_1) ... b(z_T)]` for points given as columns of an `n x T`
/// matrix. An empty point list yields a `k x 0` matrix.
pub fn eval_regressor(basis: &BasisSet, points: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(points.nrows(), basis.input_dim(), "points must be n x T");
    let t = points.ncols();
    let mut phi = DMatrix::zeros(basis.count(), t);
    for i in 0..t {
        phi.set_column(i, &basis.eval(&points.column(i).into_owned()));
    }
    phi
}

/// Builtin families selectable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `(1, z_1, ..., z_n)`.
    Affine { dim: usize },
    /// All monomials of total degree `<= degree`, graded lexicographic.
    Polynomial { dim: usize, degree: usize },
    /// The six-component trigonometric family on R^2:
    /// `(z1, z2, sin z1 - 1, sin z2 - 1, cos z1, cos z2)`.
    TrigSixComponent,
}

/// Constructs a builtin basis family.
pub fn builtin_basis(family: &Family) -> Result<BasisSet> {
    match family {
        Family::Affine { dim } => {
            if *dim == 0 {
                return Err(Error::UnknownFamily("affine basis needs dim >= 1".into()));
            }
            Ok(affine_basis(*dim))
        }
        Family::Polynomial { dim, degree } => {
            if *dim == 0 {
                return Err(Error::UnknownFamily(
                    "polynomial basis needs dim >= 1".into(),
                ));
            }
            Ok(polynomial_basis(*dim, *degree))
        }
        Family::TrigSixComponent => Ok(trig_paper_basis()),
    }
}

/// `(1, z_1, ..., z_n)`. `J(b) = [0; I_n]`, so `L_b = 1`.
pub fn affine_basis(n: usize) -> BasisSet {
    let count = n + 1;
    let eval: EvalFn = Arc::new(move |z: &DVector<f64>| {
        let mut b = DVector::zeros(n + 1);
        b[0] = 1.0;
        for i in 0..n {
            b[i + 1] = z[i];
        }
        b
    });
    let jac: JacFn = Arc::new(move |_z: &DVector<f64>| {
        let mut j = DMatrix::zeros(n + 1, n);
        for i in 0..n {
            j[(i + 1, i)] = 1.0;
        }
        j
    });
    BasisSet {
        name: format!("affine({n})"),
        input_dim: n,
        count,
        eval,
        jacobian: Some(jac),
        approximate_jacobian: false,
        curvature: vec![Curvature::Affine; count],
        lipschitz_bound: Some(1.0),
        jacobian_norm_bound: Some(1.0),
        gram_bound: None,
        coordinate_indices: Some((1..=n).collect()),
    }
}

/// Monomial exponent tuples of total degree `<= max_degree` in graded
/// lexicographic order (constant first, then the coordinates).
pub fn monomial_exponents(n: usize, max_degree: usize) -> Vec<Vec<usize>> {
    fn of_degree(n: usize, d: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![d]];
        }
        let mut out = Vec::new();
        for first in (0..=d).rev() {
            for mut rest in of_degree(n - 1, d - first) {
                let mut e = vec![first];
                e.append(&mut rest);
                out.push(e);
            }
        }
        out
    }
    let mut out = Vec::new();
    for d in 0..=max_degree {
        out.extend(of_degree(n, d));
    }
    out
}

/// Monomial basis of total degree `<= degree`.
pub fn polynomial_basis(n: usize, degree: usize) -> BasisSet {
    let exps = monomial_exponents(n, degree);
    let count = exps.len();
    let curvature = exps
        .iter()
        .map(|e| {
            let total: usize = e.iter().sum();
            if total <= 1 {
                Curvature::Affine
            } else if total == 2 && e.iter().filter(|&&x| x > 0).count() == 1 {
                // A pure square z_i^2.
                Curvature::StrictlyConvex
            } else {
                Curvature::Unknown
            }
        })
        .collect();
    let coordinate_indices = if degree >= 1 {
        let mut idx = vec![0usize; n];
        for (pos, e) in exps.iter().enumerate() {
            if e.iter().sum::<usize>() == 1 {
                let coord = e.iter().position(|&x| x == 1).unwrap();
                idx[coord] = pos;
            }
        }
        Some(idx)
    } else {
        None
    };
    let exps_eval = exps.clone();
    let eval: EvalFn = Arc::new(move |z: &DVector<f64>| {
        DVector::from_iterator(
            exps_eval.len(),
            exps_eval.iter().map(|e| {
                e.iter()
                    .enumerate()
                    .map(|(i, &p)| z[i].powi(p as i32))
                    .product::<f64>()
            }),
        )
    });
    let exps_jac = exps.clone();
    let jac: JacFn = Arc::new(move |z: &DVector<f64>| {
        let mut out = DMatrix::zeros(exps_jac.len(), n);
        for (row, e) in exps_jac.iter().enumerate() {
            for j in 0..n {
                if e[j] == 0 {
                    continue;
                }
                let mut d = e[j] as f64;
                for (i, &p) in e.iter().enumerate() {
                    let pow = if i == j { p - 1 } else { p };
                    d *= z[i].powi(pow as i32);
                }
                out[(row, j)] = d;
            }
        }
        out
    });
    BasisSet {
        name: format!("polynomial({n}, degree {degree})"),
        input_dim: n,
        count,
        eval,
        jacobian: Some(jac),
        approximate_jacobian: false,
        curvature,
        lipschitz_bound: None,
        jacobian_norm_bound: None,
        gram_bound: None,
        coordinate_indices,
    }
}

/// The trigonometric family used by the contraction example:
/// `b(z) = (z1, z2, sin z1 - 1, sin z2 - 1, cos z1, cos z2)`.
/// `J(b)^T J(b) = 2 I_2` pointwise, so `||J(b)||_2 = sqrt(2)` everywhere.
pub fn trig_paper_basis() -> BasisSet {
    let eval: EvalFn = Arc::new(|z: &DVector<f64>| {
        DVector::from_vec(vec![
            z[0],
            z[1],
            z[0].sin() - 1.0,
            z[1].sin() - 1.0,
            z[0].cos(),
            z[1].cos(),
        ])
    });
    let jac: JacFn = Arc::new(|z: &DVector<f64>| {
        DMatrix::from_row_slice(
            6,
            2,
            &[
                1.0,
                0.0,
                0.0,
                1.0,
                z[0].cos(),
                0.0,
                0.0,
                z[1].cos(),
                -z[0].sin(),
                0.0,
                0.0,
                -z[1].sin(),
            ],
        )
    });
    BasisSet {
        name: "trig6".into(),
        input_dim: 2,
        count: 6,
        eval,
        jacobian: Some(jac),
        approximate_jacobian: false,
        curvature: vec![
            Curvature::Affine,
            Curvature::Affine,
            Curvature::Unknown,
            Curvature::Unknown,
            Curvature::Unknown,
            Curvature::Unknown,
        ],
        lipschitz_bound: Some(2.0f64.sqrt()),
        jacobian_norm_bound: Some(2.0f64.sqrt()),
        gram_bound: None,
        coordinate_indices: Some(vec![0, 1]),
    }
}

/// Builder for user-supplied bases.
pub struct CustomBasis {
    name: String,
    input_dim: usize,
    count: usize,
    eval: EvalFn,
    jacobian: Option<JacFn>,
    curvature: Option<Vec<Curvature>>,
    lipschitz_bound: Option<f64>,
    jacobian_norm_bound: Option<f64>,
    gram_bound: Option<DMatrix<f64>>,
    coordinate_indices: Option<Vec<usize>>,
}

impl CustomBasis {
    pub fn new(
        name: impl Into<String>,
        input_dim: usize,
        count: usize,
        eval: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        CustomBasis {
            name: name.into(),
            input_dim,
            count,
            eval: Arc::new(eval),
            jacobian: None,
            curvature: None,
            lipschitz_bound: None,
            jacobian_norm_bound: None,
            gram_bound: None,
            coordinate_indices: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_curvature(mut self, curvature: Vec<Curvature>) -> Self {
        self.curvature = Some(curvature);
        self
    }

    pub fn with_lipschitz_bound(mut self, lb: f64) -> Self {
        self.lipschitz_bound = Some(lb);
        self
    }

    pub fn with_jacobian_norm_bound(mut self, jb: f64) -> Self {
        self.jacobian_norm_bound = Some(jb);
        self
    }

    pub fn with_gram_bound(mut self, m: DMatrix<f64>) -> Self {
        self.gram_bound = Some(m);
        self
    }

    pub fn with_coordinate_indices(mut self, idx: Vec<usize>) -> Self {
        self.coordinate_indices = Some(idx);
        self
    }

    pub fn build(self) -> Result<BasisSet> {
        if let Some(c) = &self.curvature {
            if c.len() != self.count {
                return Err(Error::MissingMetadata(
                    "curvature list must have one entry per component".into(),
                ));
            }
        }
        let approximate = self.jacobian.is_none();
        Ok(BasisSet {
            name: self.name,
            input_dim: self.input_dim,
            count: self.count,
            eval: self.eval,
            jacobian: self.jacobian,
            approximate_jacobian: approximate,
            curvature: self
                .curvature
                .unwrap_or_else(|| vec![Curvature::Unknown; self.count]),
            lipschitz_bound: self.lipschitz_bound,
            jacobian_norm_bound: self.jacobian_norm_bound,
            gram_bound: self.gram_bound,
            coordinate_indices: self.coordinate_indices,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_jacobian_against_fd(basis: &BasisSet, points: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..points {
            let z = DVector::from_fn(basis.input_dim(), |_, _| rng.gen_range(-2.0..2.0));
            let fd = basis.fd_jacobian(&z);
            let an = basis.jacobian(&z);
            let denom = an.norm().max(1.0);
            assert!(
                (an - fd).norm() / denom <= 1e-5,
                "jacobian mismatch for {}",
                basis.name()
            );
        }
    }

    #[test]
    fn affine_basis_matches_worked_example_points() {
        let basis = affine_basis(2);
        assert_eq!(basis.count(), 3);
        let pts = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let phi = eval_regressor(&basis, &pts);
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(phi, expected, epsilon = 1e-15);
    }

    #[test]
    fn empty_point_list_gives_zero_columns() {
        let basis = affine_basis(2);
        let phi = eval_regressor(&basis, &DMatrix::zeros(2, 0));
        assert_eq!(phi.ncols(), 0);
        assert_eq!(phi.nrows(), 3);
    }

    #[test]
    fn trig_basis_at_origin() {
        let basis = trig_paper_basis();
        let b0 = basis.eval(&DVector::from_vec(vec![0.0, 0.0]));
        let expected = DVector::from_vec(vec![0.0, 0.0, -1.0, -1.0, 1.0, 1.0]);
        assert_relative_eq!(b0, expected, epsilon = 1e-15);
        // J(b) at 0 contains cos(0) = 1 rows.
        let j = basis.jacobian(&DVector::from_vec(vec![0.0, 0.0]));
        assert_relative_eq!(j[(2, 0)], 1.0);
        assert_relative_eq!(j[(3, 1)], 1.0);
    }

    #[test]
    fn trig_jacobian_norm_is_sqrt2_everywhere() {
        let basis = trig_paper_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z = DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
            let j = basis.jacobian(&z);
            assert_relative_eq!(
                crate::linalg::spectral_norm(&j),
                2.0f64.sqrt(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn degree_zero_polynomial_is_constant() {
        let basis = polynomial_basis(2, 0);
        assert_eq!(basis.count(), 1);
        let b = basis.eval(&DVector::from_vec(vec![3.0, -4.0]));
        assert_relative_eq!(b[0], 1.0);
        let j = basis.jacobian(&DVector::from_vec(vec![3.0, -4.0]));
        assert_eq!(j, DMatrix::zeros(1, 2));
    }

    #[test]
    fn polynomial_ordering_and_curvature() {
        let basis = polynomial_basis(2, 2);
        // 1, z1, z2, z1^2, z1 z2, z2^2
        assert_eq!(basis.count(), 6);
        let b = basis.eval(&DVector::from_vec(vec![2.0, 3.0]));
        assert_relative_eq!(
            b,
            DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]),
            epsilon = 1e-14
        );
        assert_eq!(basis.curvature()[0], Curvature::Affine);
        assert_eq!(basis.curvature()[3], Curvature::StrictlyConvex);
        assert_eq!(basis.curvature()[4], Curvature::Unknown);
        assert_eq!(basis.coordinate_indices(), Some(&[1usize, 2][..]));
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        check_jacobian_against_fd(&affine_basis(3), 100, 1);
        check_jacobian_against_fd(&polynomial_basis(2, 3), 100, 2);
        check_jacobian_against_fd(&trig_paper_basis(), 100, 3);
    }

    #[test]
    fn custom_basis_without_jacobian_is_flagged_approximate() {
        let basis = CustomBasis::new("exp", 1, 1, |z| DVector::from_vec(vec![z[0].exp()]))
            .build()
            .unwrap();
        assert!(basis.jacobian_is_approximate());
        assert!(basis.require_exact_jacobian().is_err());
        let j = basis.jacobian(&DVector::from_vec(vec![0.3]));
        assert_relative_eq!(j[(0, 0)], 0.3f64.exp(), epsilon = 1e-6);
    }

    #[test]
    fn unknown_family_errors() {
        assert!(builtin_basis(&Family::Affine { dim: 0 }).is_err());
    }
}
