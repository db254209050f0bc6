//! Data-based regularity certificates: parameter nonnegativity, convexity of
//! the worst-case bounds, their gradients, Lipschitz constants, and set-wise
//! verification through vertices and coverings.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{BasisSet, Curvature};
use crate::bounds::{g_at, gc_at, radius_quadratic, schur_quadratic};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_pinv, tol_for};
use crate::lmi::{bisect_feasible_threshold, AffineLmi, FeasibilityResult, SolveOptions};
use crate::qmi::ParameterSet;

/// Which branch of the nonnegativity test fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonnegBranch {
    /// `c^T(N|N22)c = 0` and the least-squares coefficients are nonnegative:
    /// only the least-squares estimate is compatible along `c`.
    Degenerate,
    /// `c^T(N|N22)c > 0`, strictly positive least-squares coefficients, and
    /// the per-coordinate inequality holds.
    Strict,
}

#[derive(Debug, Clone)]
pub struct NonnegVerdict {
    pub nonneg: bool,
    pub branch: Option<NonnegBranch>,
}

/// Tests `theta c >= 0` (elementwise) for every `theta` in the set.
pub fn nonneg_params(set: &ParameterSet, c: &DVector<f64>) -> Result<NonnegVerdict> {
    if c.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if !set.is_compact() {
        return Ok(NonnegVerdict {
            nonneg: false,
            branch: None,
        });
    }
    let k = set.basis_count();
    let s = schur_quadratic(set, c);
    let tol = tol_for(set.tol_base(), set.schur().amax());
    let lse_c = set.lse_estimate() * c; // = -N22^{-1} N21 c
    if s <= tol {
        let ok = lse_c.iter().all(|&x| x >= -tol);
        return Ok(NonnegVerdict {
            nonneg: ok,
            branch: ok.then_some(NonnegBranch::Degenerate),
        });
    }
    if !lse_c.iter().all(|&x| x > tol) {
        return Ok(NonnegVerdict {
            nonneg: false,
            branch: None,
        });
    }
    let n22_inv = sym_pinv(set.n().m22());
    let n21c = set.n().m12().transpose() * c;
    let v = &n22_inv * &n21c; // = -theta_lse c
    for i in 0..k {
        let denom = n22_inv[(i, i)];
        // e_i^T N22^{-1} e_i < 0 since N22 < 0.
        let val = s + (v[i] * v[i]) / denom;
        if val > tol {
            return Ok(NonnegVerdict {
                nonneg: false,
                branch: None,
            });
        }
    }
    Ok(NonnegVerdict {
        nonneg: true,
        branch: Some(NonnegBranch::Strict),
    })
}

/// Range of the coefficient `(theta c)_i` over the whole set; the same
/// worst-case algebra as the linear bound with `b := e_i`.
pub fn coefficient_range(set: &ParameterSet, c: &DVector<f64>, i: usize) -> Result<(f64, f64)> {
    if !set.is_compact() {
        return Err(Error::NotCompact);
    }
    let mut e = DVector::zeros(set.basis_count());
    e[i] = 1.0;
    let mid = (c.transpose() * set.phi_lse(&e))[(0, 0)];
    let half = (schur_quadratic(set, c) * radius_quadratic(set, &e)).sqrt();
    Ok((mid - half, mid + half))
}

/// Convexity conclusions for `g_c(.; Theta)` along a direction.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub direction: DVector<f64>,
    /// `theta c >= 0` for all members.
    pub params_nonneg: bool,
    pub branch: Option<NonnegBranch>,
    /// True-function route: convex basis components + nonnegative parameters.
    pub convex_true_route: bool,
    /// Least-squares + uncertainty route.
    pub convex_lse_route: bool,
    /// The `-N22^{-1} b(z) >= 0 for all z` premise was only checked on the
    /// supplied grid (not a proof over all z).
    pub sampled_premise: bool,
    /// Strict convexity: strictly convex basis flags and `0 not in Z(N_c)`.
    pub strict: bool,
    /// Any route certified convexity.
    pub convex: bool,
}

/// Certifies convexity of `g_c(.; Theta)`. The uncertainty-route premise
/// `-N22^{-1} b(z) >= 0` is verified on the caller-supplied grid only and the
/// report says so; for purely affine bases the uncertainty is a norm of an
/// affine map and the premise is not needed.
pub fn convexity_certificate(
    set: &ParameterSet,
    basis: &BasisSet,
    c: &DVector<f64>,
    grid: &[DVector<f64>],
) -> Result<ConvexityReport> {
    if c.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if basis
        .curvature()
        .iter()
        .all(|&cv| cv == Curvature::Unknown)
    {
        return Err(Error::MissingMetadata(
            "basis declares no convexity information".into(),
        ));
    }
    let all_convex = basis.curvature().iter().all(|cv| cv.is_convex());
    let all_affine = basis
        .curvature()
        .iter()
        .all(|&cv| cv == Curvature::Affine);
    let nn = nonneg_params(set, c)?;
    let convex_true_route = all_convex && nn.nonneg;

    // Strictness: strictly convex components, nonnegative parameters, and
    // 0 not in Z(N_c) <=> c^T N11 c < 0.
    let c_n11_c = (c.transpose() * set.n().m11() * c)[(0, 0)];
    let strict = convex_true_route
        && basis.curvature().iter().all(|cv| cv.is_strictly_convex())
        && c_n11_c < 0.0;

    // Route via g_c = c^T phi_lse + U_c.
    let mut sampled_premise = false;
    let lse_part_convex = if all_affine {
        true
    } else if set.is_compact() {
        let lse_c = set.lse_estimate() * c;
        basis
            .curvature()
            .iter()
            .zip(lse_c.iter())
            .all(|(cv, &coef)| match cv {
                Curvature::Affine => true,
                Curvature::Convex | Curvature::StrictlyConvex => coef >= 0.0,
                Curvature::Unknown => false,
            })
    } else {
        false
    };
    let uncertainty_convex = if all_affine && set.is_compact() {
        true
    } else if set.is_compact() && all_convex && !grid.is_empty() {
        sampled_premise = true;
        let n22_inv = sym_pinv(set.n().m22());
        grid.iter().all(|z| {
            let b = basis.eval(z);
            let w = -(&n22_inv * &b);
            w.iter().all(|&x| x >= -1e-9)
        })
    } else {
        false
    };
    let convex_lse_route = lse_part_convex && uncertainty_convex;

    Ok(ConvexityReport {
        direction: c.clone(),
        params_nonneg: nn.nonneg,
        branch: nn.branch,
        convex_true_route,
        convex_lse_route,
        sampled_premise,
        strict,
        convex: convex_true_route || convex_lse_route,
    })
}

/// Gradient (as a row turned column) of `z -> g_c(z; Theta)` from the closed
/// form. Requires a compact set, `b(z) != 0`, and an exact Jacobian.
pub fn grad_gc(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !set.is_compact() {
        return Err(Error::NotCompact);
    }
    basis.require_exact_jacobian()?;
    let bvec = basis.eval(z);
    if bvec.norm() == 0.0 {
        return Err(Error::ZeroBasisVector);
    }
    let sq = radius_quadratic(set, &bvec);
    let s = schur_quadratic(set, c);
    if s > 0.0 && sq < 1e-14 * bvec.norm_squared() {
        // The square-root term degenerates; the formula's hypothesis
        // excludes this point.
        return Err(Error::ZeroBasisVector);
    }
    let jac = basis.jacobian(z);
    let c_n12 = (c.transpose() * set.n().m12()).transpose();
    let mut row = c_n12;
    if s > 0.0 && sq > 0.0 {
        row += &bvec * (s.sqrt() / sq.sqrt());
    }
    let grad = (row.transpose() * set.neg_n22_pinv() * jac).transpose();
    Ok(grad)
}

/// Feasible domains for the cautious minimization.
#[derive(Debug, Clone)]
pub enum Domain {
    Box { lo: DVector<f64>, hi: DVector<f64> },
    Hull { vertices: Vec<DVector<f64>> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Hull { vertices } => vertices.first().map(|v| v.len()).unwrap_or(0),
        }
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Domain::Box { lo, hi } => {
                DVector::from_fn(lo.len(), |i, _| x[i].clamp(lo[i], hi[i]))
            }
            Domain::Hull { vertices } => project_onto_hull(vertices, x),
        }
    }

    /// A deterministic interior point.
    pub fn center(&self) -> DVector<f64> {
        match self {
            Domain::Box { lo, hi } => (lo + hi) * 0.5,
            Domain::Hull { vertices } => {
                let mut c = DVector::zeros(self.dim());
                for v in vertices {
                    c += v;
                }
                c / vertices.len() as f64
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            Domain::Box { lo, hi } => {
                DVector::from_fn(lo.len(), |i, _| rng.gen_range(0.0..1.0) * (hi[i] - lo[i]) + lo[i])
            }
            Domain::Hull { vertices } => {
                // Random convex combination (not uniform, but inside).
                let mut w: Vec<f64> = (0..vertices.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                if s == 0.0 {
                    return vertices[0].clone();
                }
                w.iter_mut().for_each(|x| *x /= s);
                let mut out = DVector::zeros(self.dim());
                for (wi, v) in w.iter().zip(vertices) {
                    out += v * *wi;
                }
                out
            }
        }
    }
}

/// Euclidean projection onto `conv(vertices)` via projected gradient on the
/// simplex weights (deterministic).
pub fn project_onto_hull(vertices: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    let q = vertices.len();
    assert!(q > 0, "hull needs at least one vertex");
    let n = vertices[0].len();
    let mut vmat = DMatrix::zeros(n, q);
    for (j, v) in vertices.iter().enumerate() {
        vmat.set_column(j, v);
    }
    let gram = vmat.transpose() * &vmat;
    let vtx = vmat.transpose() * x;
    let lip = sym_eigen(&gram).lambda_max().max(1e-12);
    let mut lam = DVector::from_element(q, 1.0 / q as f64);
    for _ in 0..500 {
        let grad = &gram * &lam - &vtx;
        let next = project_onto_simplex(&(&lam - &grad / lip));
        if (&next - &lam).norm() <= 1e-13 {
            lam = next;
            break;
        }
        lam = next;
    }
    &vmat * lam
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_onto_simplex(y: &DVector<f64>) -> DVector<f64> {
    let n = y.len();
    let mut u: Vec<f64> = y.iter().cloned().collect();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    if rho == 0 {
        // All mass on the largest coordinate.
        let mut out = DVector::zeros(n);
        let arg = y.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        out[arg] = 1.0;
        return out;
    }
    DVector::from_fn(n, |i, _| (y[i] - theta).max(0.0))
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub z: DVector<f64>,
    pub value: f64,
    pub converged: bool,
    /// Set when convexity was not certified: the result is a local verdict.
    pub local_only: bool,
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub starts: usize,
    pub seed: u64,
    /// Caller-supplied convexity advice (from `convexity_certificate`).
    pub convexity_certified: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 10_000,
            grad_tol: 1e-8,
            armijo_c1: 1e-4,
            starts: 4,
            seed: 0,
            convexity_certified: false,
        }
    }
}

/// Projected gradient descent with Armijo backtracking on `z -> g_c(z)` over
/// a box or hull. Returns the best iterate; when convexity was not certified
/// the result is labeled local.
pub fn minimize_gc(
    set: &ParameterSet,
    basis: &BasisSet,
    c: &DVector<f64>,
    domain: &Domain,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    let objective = |z: &DVector<f64>| gc_at(set, &basis.eval(z), c);
    let use_analytic = set.is_compact() && !basis.jacobian_is_approximate();
    let gradient = |z: &DVector<f64>| -> DVector<f64> {
        if use_analytic {
            if let Ok(g) = grad_gc(set, basis, z, c) {
                return g;
            }
        }
        // Central differences on the bound itself.
        let h = 1e-6;
        DVector::from_fn(z.len(), |i, _| {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            (objective(&zp) - objective(&zm)) / (2.0 * h)
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<MinimizeResult> = None;
    for start in 0..opts.starts.max(1) {
        let mut z = if start == 0 {
            domain.project(&domain.center())
        } else {
            domain.project(&domain.sample(&mut rng))
        };
        let mut fz = objective(&z);
        let mut step = 1.0f64;
        let mut converged = false;
        for _ in 0..opts.max_iters {
            let g = gradient(&z);
            // Projected-gradient stationarity measure.
            let trial = domain.project(&(&z - &g));
            if (&trial - &z).norm() <= opts.grad_tol * (1.0 + z.norm()) {
                converged = true;
                break;
            }
            // Armijo backtracking along the projection arc.
            let mut t = step * 2.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = domain.project(&(&z - &g * t));
                let fc = objective(&cand);
                let decrease = (&cand - &z).dot(&g);
                if fc <= fz + opts.armijo_c1 * decrease.min(0.0) && fc < fz {
                    z = cand;
                    fz = fc;
                    step = t;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                converged = true;
                break;
            }
        }
        let cand = MinimizeResult {
            z,
            value: fz,
            converged,
            local_only: !opts.convexity_certified,
        };
        if best.as_ref().map(|b| cand.value < b.value).unwrap_or(true) {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Positive-definiteness check for weight matrices.
fn require_spd(p: &DMatrix<f64>, name: &str) -> Result<()> {
    let eig = sym_eigen(p);
    if eig.lambda_min() <= tol_for(1e-12, eig.spectral_norm()) {
        return Err(Error::Invalid(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// Weighted norm `||x||_{2,Q^{1/2}} = sqrt(x^T Q x)`.
pub fn weighted_norm(q: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (x.transpose() * q * x)[(0, 0)].max(0.0).sqrt()
}

/// Pairwise Lipschitz certificate at `(z, z*)`:
/// `||phi^theta(z)-phi^theta(z*)||_{2,P^{1/2}} <= L ||z-z*||_{2,Q^{1/2}}`
/// for all members, decided through the bordered LMI.
pub fn lipschitz_pair_check(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
    z_star: &DVector<f64>,
    l: f64,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<FeasibilityResult> {
    require_spd(p, "P")?;
    require_spd(q, "Q")?;
    let dist = weighted_norm(q, &(z - z_star));
    if dist <= 1e-14 {
        return Err(Error::CoincidentPoints);
    }
    let d = (basis.eval(z) - basis.eval(z_star)) / dist;
    let (m, k) = (set.output_dim(), set.basis_count());
    let dim = m + k + 1;
    let mut constant = DMatrix::zeros(dim, dim);
    let p_inv = sym_pinv(p);
    constant
        .view_mut((0, 0), (m, m))
        .copy_from(&(&p_inv * (l * l)));
    for i in 0..k {
        constant[(m + i, m + k)] = d[i];
        constant[(m + k, m + i)] = d[i];
    }
    constant[(m + k, m + k)] = 1.0;
    AffineLmi::new(constant, vec![-set.n().embed(1)], vec![Some(0.0)])
        .map(|lmi| lmi.max_min_eig(&SolveOptions::default()))
}

/// Jacobian-form Lipschitz certificate at `z`:
/// `||J(phi^theta)(z)||_2 <= L` for all members.
pub fn lipschitz_jacobian_check(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
    l: f64,
) -> Result<FeasibilityResult> {
    basis.require_exact_jacobian()?;
    let jac = basis.jacobian(z);
    let (m, k, n) = (set.output_dim(), set.basis_count(), basis.input_dim());
    let dim = m + k + n;
    let mut constant = DMatrix::zeros(dim, dim);
    for i in 0..m {
        constant[(i, i)] = l * l;
    }
    constant.view_mut((m, m + k), (k, n)).copy_from(&jac);
    constant
        .view_mut((m + k, m), (n, k))
        .copy_from(&jac.transpose());
    constant
        .view_mut((m + k, m + k), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    AffineLmi::new(constant, vec![-set.n().embed(n)], vec![Some(0.0)])
        .map(|lmi| lmi.max_min_eig(&SolveOptions::default()))
}

/// Smallest `L` certified by the Jacobian-form LMI at `z` (bisection on
/// `L^2`).
pub fn min_jacobian_lipschitz(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
) -> Result<f64> {
    basis.require_exact_jacobian()?;
    let jac = basis.jacobian(z);
    let lo = crate::linalg::spectral_norm(&(set.lse_estimate().transpose() * &jac));
    let mut hi = (lo * 2.0).max(1.0);
    let mut ok = false;
    for _ in 0..80 {
        if lipschitz_jacobian_check(set, basis, z, hi)?.feasible {
            ok = true;
            break;
        }
        hi *= 2.0;
    }
    if !ok {
        return Ok(f64::INFINITY);
    }
    let (_, hi2, _) = bisect_feasible_threshold(lo * lo, hi * hi, 60, |l2| {
        lipschitz_jacobian_check(set, basis, z, l2.sqrt())
            .ok()
            .filter(|r| r.feasible)
            .map(|r| r.witness)
    });
    Ok(hi2.sqrt())
}

/// Single global Lipschitz check: `blkdiag(L^2 P^{-1}, -L_b^2 I_k) - alpha N >= 0`
/// certifies the pairwise property for all `z, z*` at once, given a basis
/// Lipschitz constant `L_b` for the chosen input weighting.
pub fn lipschitz_global_check(
    set: &ParameterSet,
    l: f64,
    l_b: f64,
    p: &DMatrix<f64>,
) -> Result<FeasibilityResult> {
    require_spd(p, "P")?;
    let (m, k) = (set.output_dim(), set.basis_count());
    let mut constant = DMatrix::zeros(m + k, m + k);
    constant
        .view_mut((0, 0), (m, m))
        .copy_from(&(sym_pinv(p) * (l * l)));
    for i in 0..k {
        constant[(m + i, m + i)] = -l_b * l_b;
    }
    AffineLmi::new(constant, vec![-set.n().assemble()], vec![Some(0.0)])
        .map(|lmi| lmi.max_min_eig(&SolveOptions::default()))
}

/// Which bound a set-wise operation works on.
#[derive(Debug, Clone)]
pub enum Objective {
    Linear(DVector<f64>),
    Norm,
}

impl Objective {
    pub fn eval(&self, set: &ParameterSet, basis: &BasisSet, z: &DVector<f64>) -> f64 {
        let b = basis.eval(z);
        match self {
            Objective::Linear(c) => gc_at(set, &b, c),
            Objective::Norm => g_at(set, &b).value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VertexMax {
    pub value: f64,
    pub argmax: usize,
    /// Set when the caller did not certify convexity: the bound over the
    /// hull is then unverified.
    pub unverified_premise: bool,
}

/// Maximum of the bound over a finite vertex set; certifies the bound over
/// the convex hull when the bound is convex (caller responsibility, recorded
/// in the output). First index wins ties.
pub fn vertex_max_bound(
    set: &ParameterSet,
    basis: &BasisSet,
    vertices: &[DVector<f64>],
    objective: &Objective,
    convexity_certified: bool,
) -> Result<VertexMax> {
    if vertices.is_empty() {
        return Err(Error::EmptyVertexSet);
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0usize;
    for (i, v) in vertices.iter().enumerate() {
        let val = objective.eval(set, basis, v);
        if val > best {
            best = val;
            arg = i;
        }
    }
    Ok(VertexMax {
        value: best,
        argmax: arg,
        unverified_premise: !convexity_certified,
    })
}

/// A finite point set within distance `epsilon` of every target point.
#[derive(Debug, Clone)]
pub struct CoveringGrid {
    pub points: Vec<DVector<f64>>,
    pub epsilon: f64,
}

impl CoveringGrid {
    pub fn cardinality(&self) -> usize {
        self.points.len()
    }
}

/// Uniform lattice covering of an axis-aligned box: cell centers with
/// per-dimension spacing at most `2 epsilon / sqrt(n)`.
pub fn make_covering(lo: &DVector<f64>, hi: &DVector<f64>, epsilon: f64) -> Result<CoveringGrid> {
    if epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    let n = lo.len();
    if hi.len() != n {
        return Err(Error::DimensionMismatch("box corners differ in length".into()));
    }
    let spacing = 2.0 * epsilon / (n as f64).sqrt();
    let mut counts = Vec::with_capacity(n);
    let mut total: usize = 1;
    for i in 0..n {
        let width = (hi[i] - lo[i]).max(0.0);
        let m = ((width / spacing).ceil() as usize).max(1);
        total = total.saturating_mul(m);
        counts.push(m);
    }
    if total > 5_000_000 {
        return Err(Error::Invalid(format!(
            "covering would need {total} points; loosen epsilon"
        )));
    }
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    loop {
        let p = DVector::from_fn(n, |i, _| {
            let width = (hi[i] - lo[i]).max(0.0);
            lo[i] + width * (2 * idx[i] + 1) as f64 / (2 * counts[i]) as f64
        });
        points.push(p);
        // Odometer increment.
        let mut dim = 0;
        loop {
            if dim == n {
                return Ok(CoveringGrid { points, epsilon });
            }
            idx[dim] += 1;
            if idx[dim] < counts[dim] {
                break;
            }
            idx[dim] = 0;
            dim += 1;
        }
    }
}

/// Interval `[min_G bound - eps L, max_G bound + eps L]` containing the bound
/// at every point of the covered set, given a Lipschitz constant `L` of the
/// bound function.
pub fn covering_bounds(
    set: &ParameterSet,
    basis: &BasisSet,
    grid: &CoveringGrid,
    l: f64,
    objective: &Objective,
) -> Result<(f64, f64)> {
    if grid.points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &grid.points {
        let v = objective.eval(set, basis, p);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo - grid.epsilon * l, hi + grid.epsilon * l))
}
