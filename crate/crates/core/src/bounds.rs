//! Worst-case norm and linear bounds `g(z; Theta)`, `g_c(z; Theta)`, the
//! uncertainties `U`, `U_c`, and their closed forms.
//!
//! Infinite bounds are first-class values (`f64::INFINITY`), never errors:
//! when `b(z)` leaves the range of the regressor and `c != 0`, the worst
//! case genuinely is unbounded.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::linalg::{lambda_max, tol_for};
use crate::lmi::{bisect_feasible_threshold, AffineLmi, SolveOptions};
use crate::qmi::{ParameterSet, PartitionedSymmetric};

/// How a bound value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Explicit formula.
    ClosedForm,
    /// Bisection over LMI feasibility; exact under the route's hypotheses.
    LmiBisection,
    /// Same computation without the positive-eigenvalue hypothesis: an upper
    /// bound only.
    Relaxed,
}

/// A computed worst-case bound.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub value: f64,
    pub route: Route,
    /// Multiplier witness from the LMI search, when one was produced.
    pub alpha: Option<f64>,
}

impl BoundResult {
    fn closed(value: f64) -> Self {
        BoundResult {
            value,
            route: Route::ClosedForm,
            alpha: None,
        }
    }
}

/// `c^T (N|N22) c`, clamped at zero against rounding.
pub fn schur_quadratic(set: &ParameterSet, c: &DVector<f64>) -> f64 {
    (c.transpose() * set.schur() * c)[(0, 0)].max(0.0)
}

/// `b^T (-N22)^† b`, clamped at zero.
pub fn radius_quadratic(set: &ParameterSet, bvec: &DVector<f64>) -> f64 {
    (bvec.transpose() * set.neg_n22_pinv() * bvec)[(0, 0)].max(0.0)
}

/// Closed-form `g_c` at a precomputed regressor vector.
pub fn gc_at(set: &ParameterSet, bvec: &DVector<f64>, c: &DVector<f64>) -> f64 {
    if c.norm() == 0.0 {
        return 0.0;
    }
    if !set.range_contains(bvec) {
        return f64::INFINITY;
    }
    let mean = (c.transpose() * set.phi_lse(bvec))[(0, 0)];
    mean + (schur_quadratic(set, c) * radius_quadratic(set, bvec)).sqrt()
}

/// Worst-case linear bound `g_c(z; Theta)` by the explicit formula.
pub fn linear_bound_gc(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
    c: &DVector<f64>,
) -> BoundResult {
    BoundResult::closed(gc_at(set, &basis.eval(z), c))
}

/// `N_c`: the scalarization of `N` along direction `c`, split `(1, k)`.
pub fn nc_matrix(set: &ParameterSet, c: &DVector<f64>) -> PartitionedSymmetric {
    let n = set.n();
    let n11c = (c.transpose() * n.m11() * c)[(0, 0)];
    let c_n12 = c.transpose() * n.m12();
    PartitionedSymmetric::new(
        DMatrix::from_element(1, 1, n11c),
        DMatrix::from_row_slice(1, set.basis_count(), c_n12.as_slice()),
        n.m22().clone(),
    )
    .expect("N_c assembly")
}

/// `g_c` through bisection over the scalar LMI condition. Requires the
/// route's hypothesis `c^T (N|N22) c > 0`; agrees with the closed form.
pub fn linear_bound_gc_lmi(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<BoundResult> {
    let bvec = basis.eval(z);
    let s = schur_quadratic(set, c);
    let scale_tol = tol_for(set.tol_base(), set.schur().amax());
    if s <= scale_tol {
        return Err(Error::HypothesisViolated(format!(
            "c^T (N|N22) c = {s:.3e} is not positive; use the closed form"
        )));
    }
    let closed = gc_at(set, &bvec, c);
    if !closed.is_finite() {
        return Ok(BoundResult {
            value: f64::INFINITY,
            route: Route::LmiBisection,
            alpha: None,
        });
    }
    let k = set.basis_count();
    let nc = nc_matrix(set, c).assemble();
    let mut border = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        border[(0, i + 1)] = -bvec[i];
        border[(i + 1, 0)] = -bvec[i];
    }
    let probe_lmi = |delta: f64| -> AffineLmi {
        let mut constant = border.clone();
        constant[(0, 0)] = 2.0 * delta;
        AffineLmi::new(constant, vec![-&nc], vec![Some(0.0)]).expect("gc lmi")
    };

    let lo0 = (c.transpose() * set.phi_lse(&bvec))[(0, 0)];
    let mut hi = closed + 1e-9 * (1.0 + closed.abs());
    let mut warm: Option<Vec<f64>> = None;
    let mut opts = SolveOptions::default();
    // Establish the upper bracket.
    let mut hi_ok = false;
    for _ in 0..60 {
        let r = probe_lmi(hi).max_min_eig(&opts);
        if r.feasible {
            warm = Some(r.witness);
            hi_ok = true;
            break;
        }
        hi = 1e-9 + hi.abs() * 2.0 + 1.0;
    }
    if !hi_ok {
        return Ok(BoundResult {
            value: f64::INFINITY,
            route: Route::LmiBisection,
            alpha: None,
        });
    }
    let (_, hi_final, witness) = bisect_feasible_threshold(lo0.min(hi), hi, 60, |delta| {
        opts.warm_start = warm.clone();
        let r = probe_lmi(delta).max_min_eig(&opts);
        if r.feasible {
            warm = Some(r.witness.clone());
            Some(r.witness)
        } else {
            None
        }
    });
    Ok(BoundResult {
        value: hi_final,
        route: Route::LmiBisection,
        alpha: witness.map(|w| w[0]),
    })
}

/// Closed-form uncertainty `U_c(z; Theta)` at a regressor vector.
pub fn uc_at(set: &ParameterSet, bvec: &DVector<f64>, c: &DVector<f64>) -> f64 {
    if c.norm() == 0.0 {
        return 0.0;
    }
    if !set.range_contains(bvec) {
        return f64::INFINITY;
    }
    (schur_quadratic(set, c) * radius_quadratic(set, bvec)).sqrt()
}

/// `U_c(z; Theta) = sup_theta c^T (phi^theta(z) - phi_lse(z))`.
pub fn uncertainty_uc(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
    c: &DVector<f64>,
) -> f64 {
    uc_at(set, &basis.eval(z), c)
}

/// Closed-form uncertainty `U(z; Theta)` at a regressor vector.
pub fn u_at(set: &ParameterSet, bvec: &DVector<f64>) -> f64 {
    if !set.range_contains(bvec) {
        return f64::INFINITY;
    }
    (lambda_max(set.schur()).max(0.0) * radius_quadratic(set, bvec)).sqrt()
}

/// `U(z; Theta) = sup_theta ||phi^theta(z) - phi_lse(z)||_2`.
pub fn uncertainty_u(set: &ParameterSet, basis: &BasisSet, z: &DVector<f64>) -> f64 {
    u_at(set, &basis.eval(z))
}

/// Closed-form upper bound on the worst-case norm bound:
/// `||phi_lse(z)|| + U(z; Theta)`. Errors when `b(z)` leaves the regressor
/// range (the uncertainty is infinite there).
pub fn g_upper_at(set: &ParameterSet, bvec: &DVector<f64>) -> Result<f64> {
    if !set.range_contains(bvec) {
        return Err(Error::NotInRange);
    }
    Ok(set.phi_lse(bvec).norm() + u_at(set, bvec))
}

pub fn norm_bound_g_upper(
    set: &ParameterSet,
    basis: &BasisSet,
    z: &DVector<f64>,
) -> Result<BoundResult> {
    Ok(BoundResult::closed(g_upper_at(set, &basis.eval(z))?))
}

/// Exact worst-case norm bound `g(z; Theta)` by bisection on `delta^2` over
/// the norm LMI condition. When `N` has no positive eigenvalue the same
/// computation is only an upper bound and the result is flagged `Relaxed`.
pub fn g_at(set: &ParameterSet, bvec: &DVector<f64>) -> BoundResult {
    let route = if set.has_positive_eigenvalue() {
        Route::LmiBisection
    } else {
        Route::Relaxed
    };
    if !set.range_contains(bvec) {
        // Free parameter directions reach b: the supremum is infinite.
        return BoundResult {
            value: f64::INFINITY,
            route,
            alpha: None,
        };
    }
    if set.schur().amax() == 0.0 {
        // Degenerate set: every member agrees with the least-squares
        // estimate on the regressor range, so the bound is exact.
        return BoundResult {
            value: set.phi_lse(bvec).norm(),
            route: Route::ClosedForm,
            alpha: None,
        };
    }
    let (m, k) = (set.output_dim(), set.basis_count());
    let dim = m + k + 1;
    let mut base = DMatrix::zeros(dim, dim);
    for i in 0..k {
        base[(m + i, m + k)] = bvec[i];
        base[(m + k, m + i)] = bvec[i];
    }
    base[(m + k, m + k)] = 1.0;
    let term = -set.n().embed(1);
    let probe_lmi = |delta2: f64| -> AffineLmi {
        let mut constant = base.clone();
        for i in 0..m {
            constant[(i, i)] = delta2;
        }
        AffineLmi::new(constant, vec![term.clone()], vec![Some(0.0)]).expect("g lmi")
    };

    let lo = set.phi_lse(bvec).norm();
    let mut hi = match g_upper_at(set, bvec) {
        Ok(u) => (u + 1e-9 * (1.0 + u)).max(lo),
        Err(_) => lo.max(1.0),
    };
    let mut warm: Option<Vec<f64>> = None;
    let mut opts = SolveOptions::default();
    let mut hi_ok = false;
    for _ in 0..80 {
        let r = probe_lmi(hi * hi).max_min_eig(&opts);
        if r.feasible {
            warm = Some(r.witness);
            hi_ok = true;
            break;
        }
        hi = hi * 2.0 + 1.0;
    }
    if !hi_ok {
        return BoundResult {
            value: f64::INFINITY,
            route,
            alpha: None,
        };
    }
    let (_, hi2, witness) = bisect_feasible_threshold(lo * lo, hi * hi, 60, |d2| {
        opts.warm_start = warm.clone();
        let r = probe_lmi(d2).max_min_eig(&opts);
        if r.feasible {
            warm = Some(r.witness.clone());
            Some(r.witness)
        } else {
            None
        }
    });
    BoundResult {
        value: hi2.sqrt(),
        route,
        alpha: witness.map(|w| w[0]),
    }
}

pub fn norm_bound_g(set: &ParameterSet, basis: &BasisSet, z: &DVector<f64>) -> BoundResult {
    g_at(set, &basis.eval(z))
}

/// Inflates the data matrix to `N_lambda = N + blkdiag(lambda(2+lambda) N|N22, 0)`,
/// so that `g_c(z; Z(N_lambda)) = g_c(z; Theta) + lambda U_c(z; Theta)`.
pub fn lambda_inflate(set: &ParameterSet, lambda: f64) -> Result<ParameterSet> {
    if lambda < 0.0 {
        return Err(Error::NegativeLambda(lambda));
    }
    let n = set.n();
    let inflated = PartitionedSymmetric::new(
        n.m11() + set.schur() * (lambda * (2.0 + lambda)),
        n.m12().clone(),
        n.m22().clone(),
    )?;
    Ok(ParameterSet::with_tolerance(inflated, set.tol_base()).with_compact_flag(set.is_compact()))
}

/// A bound independent of `z`: the least `delta >= 0` with
/// `blkdiag(delta^2 I, -M) - alpha N >= 0` for some `alpha >= 0`. Valid as an
/// upper bound of `g(z; Theta)` at every `z` where `b(z) b(z)^T <= M_bound`.
pub fn global_norm_bound(set: &ParameterSet, m_bound: &DMatrix<f64>) -> BoundResult {
    let (m, k) = (set.output_dim(), set.basis_count());
    assert_eq!(m_bound.nrows(), k, "M_bound must be k x k");
    let term = -set.n().assemble();
    let probe_lmi = |delta2: f64| -> AffineLmi {
        let mut constant = DMatrix::zeros(m + k, m + k);
        for i in 0..m {
            constant[(i, i)] = delta2;
        }
        constant.view_mut((m, m), (k, k)).copy_from(&(-m_bound));
        AffineLmi::new(constant, vec![term.clone()], vec![Some(0.0)]).expect("global lmi")
    };
    let mut opts = SolveOptions::default();
    let mut warm: Option<Vec<f64>> = None;
    let mut hi = 1.0f64;
    let mut hi_ok = false;
    for _ in 0..80 {
        let r = probe_lmi(hi * hi).max_min_eig(&opts);
        if r.feasible {
            warm = Some(r.witness);
            hi_ok = true;
            break;
        }
        hi *= 2.0;
    }
    if !hi_ok {
        return BoundResult {
            value: f64::INFINITY,
            route: Route::LmiBisection,
            alpha: None,
        };
    }
    let (_, hi2, witness) = bisect_feasible_threshold(0.0, hi * hi, 60, |d2| {
        opts.warm_start = warm.clone();
        let r = probe_lmi(d2).max_min_eig(&opts);
        if r.feasible {
            warm = Some(r.witness.clone());
            Some(r.witness)
        } else {
            None
        }
    });
    BoundResult {
        value: hi2.sqrt(),
        route: Route::LmiBisection,
        alpha: witness.map(|w| w[0]),
    }
}

/// Direction of the unit sphere maximizing `g_c(z; Theta)`; the maximum over
/// directions equals `g(z; Theta)`, which makes this an independent route to
/// the norm bound. Fixed-point iteration on the sphere from seeded random
/// starts.
pub fn norm_extremal_direction(
    set: &ParameterSet,
    bvec: &DVector<f64>,
    starts: usize,
    seed: u64,
) -> (DVector<f64>, f64) {
    let m = set.output_dim();
    let phi = set.phi_lse(bvec);
    let r = radius_quadratic(set, bvec).sqrt();
    let s = set.schur();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_c = DVector::zeros(m);
    let mut best_v = f64::NEG_INFINITY;
    for start in 0..starts.max(1) {
        let mut c = if start == 0 && phi.norm() > 0.0 {
            &phi / phi.norm()
        } else {
            let g = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0f64));
            let n = g.norm();
            if n == 0.0 {
                continue;
            }
            g / n
        };
        for _ in 0..200 {
            let sq = (c.transpose() * s * &c)[(0, 0)].max(0.0);
            let mut grad = phi.clone();
            if sq > 1e-300 {
                grad += (s * &c) * (r / sq.sqrt());
            }
            let gn = grad.norm();
            if gn <= 1e-300 {
                break;
            }
            let next = grad / gn;
            if (&next - &c).norm() < 1e-15 {
                c = next;
                break;
            }
            c = next;
        }
        let v = (c.transpose() * &phi)[(0, 0)]
            + ((c.transpose() * s * &c)[(0, 0)].max(0.0)).sqrt() * r;
        if v > best_v {
            best_v = v;
            best_c = c;
        }
    }
    (best_c, best_v)
}
