//! Scratch experiment runner for tuning acceptance-test parameters.

use cautious_core::basis::{affine_basis, eval_regressor, trig_paper_basis};
use cautious_core::certificates::min_jacobian_lipschitz;
use cautious_core::control::{
    epsilon_minus, osl_lse_margin, osl_upper_estimate, quadratic_stability, rk4_states,
    suboptimal_regulation, RegulationOptions,
};
use cautious_core::data::{build_parameter_set, build_system_set, Dataset, SystemDataset};
use cautious_core::linalg::{lambda_max, sym_eigen};
use cautious_core::online::{MeasurementOracle, NoiseMode};
use cautious_core::qmi::{NoiseModel, SampleMode};
use nalgebra::{DMatrix, DVector};

fn theta_contraction() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        2,
        &[
            -6.0, 0.0, 1.0, -6.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0,
        ],
    )
}

fn contraction_experiment(seed: u64, sigma: f64) -> (f64, f64, bool, f64, f64) {
    let basis = trig_paper_basis();
    let theta_hat = theta_contraction();
    let f = |z: &DVector<f64>| theta_hat.transpose() * basis.eval(z);
    let states = rk4_states(f, &DVector::from_vec(vec![10.0, -20.0]), 0.01, 25, 50);
    let t = states.ncols();
    let phi = eval_regressor(&basis, &states);
    let noise = NoiseModel::energy_bound(DMatrix::identity(2, 2) * 10.0, t).unwrap();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // iid gaussian entries, rescaled if the energy bound would be violated.
    let mut w = DMatrix::from_fn(2, t, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma
    });
    let snorm = cautious_core::linalg::spectral_norm(&w);
    if snorm > 0.999 * 10f64.sqrt() {
        w *= 0.999 * 10f64.sqrt() / snorm;
    }
    let y = theta_hat.transpose() * &phi + &w;
    let set = build_parameter_set(&Dataset::new(y, phi, None, noise).unwrap());
    let n22_lmax = sym_eigen(set.n().m22()).lambda_max();
    let l_weighted = 2.0f64.sqrt() / (-n22_lmax).sqrt();
    let margin = osl_lse_margin(&set, &basis, &DMatrix::identity(2, 2), l_weighted).unwrap();
    (
        -margin.correction,
        margin.lse_osl_estimate,
        margin.gamma_threshold < 0.0,
        lambda_max(set.schur()),
        -n22_lmax,
    )
}

fn gaussian_admissible(
    rows: usize,
    cols: usize,
    sigma: f64,
    budget_spectral: f64,
    seed: u64,
) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::from_fn(rows, cols, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma
    });
    let s = cautious_core::linalg::spectral_norm(&w);
    if s > 0.999 * budget_spectral {
        w *= 0.999 * budget_spectral / s;
    }
    w
}

fn uav_experiment(seed: u64) -> (bool, f64, f64, f64, f64) {
    let a_cont = DMatrix::from_row_slice(
        4,
        4,
        &[
            -0.240, 0.345, -0.411, 0.0, -1.905, -10.695, 0.0, 0.941, 0.0, 0.0, 0.0, 1.0, 0.457,
            -250.513, 0.0, -8.844,
        ],
    );
    let b_cont = DMatrix::from_row_slice(4, 1, &[0.0, -0.301, 0.0, -98.658]);
    let a_hat = DMatrix::identity(4, 4) + &a_cont / 20.0;
    let b_hat = &b_cont / 20.0;
    let t = 20;
    // System trajectory with process noise Ws Ws^T <= 1e-4 I.
    let s_noise = NoiseModel::energy_bound(DMatrix::identity(4, 4) * 1e-4, t).unwrap();
    let w_s = gaussian_admissible(4, t, 2.0e-3, 1e-2, seed);
    let mut states = DMatrix::zeros(4, t + 1);
    states.set_column(0, &DVector::from_element(4, 1.0));
    let inputs = DMatrix::from_element(1, t, -4.0);
    for k in 0..t {
        let next = &a_hat * states.column(k) + &b_hat * inputs.column(k) + w_s.column(k);
        states.set_column(k + 1, &next);
    }
    let sys_data = SystemDataset::new(states.clone(), inputs, s_noise).unwrap();
    let sigma = build_system_set(&sys_data);
    let search = quadratic_stability(&sigma).unwrap();
    let cert = match search.certificate {
        Some(c) => c,
        None => {
            println!("   [no certificate; best min eig {:.4e}]", search.best_min_eig);
            return (false, 0.0, 0.0, 0.0, 0.0);
        }
    };
    let sigma = sigma.with_stability(cert);

    // Cost data at z_i = x(i-1).
    let basis = affine_basis(4);
    let x_hat = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let mut theta_hat = DMatrix::zeros(5, 4);
    theta_hat
        .view_mut((0, 0), (1, 4))
        .copy_from(&(-x_hat.transpose()));
    theta_hat
        .view_mut((1, 0), (4, 4))
        .copy_from(&DMatrix::identity(4, 4));
    let pts = states.view((0, 0), (4, t)).into_owned();
    let phi = eval_regressor(&basis, &pts);
    let c_noise = NoiseModel::energy_bound(DMatrix::identity(4, 4), t).unwrap();
    let w_c = gaussian_admissible(4, t, 0.15, 1.0, seed ^ 0x5a5a);
    let y = theta_hat.transpose() * &phi + &w_c;
    let set = build_parameter_set(&Dataset::new(y, phi, None, c_noise).unwrap());

    let l = min_jacobian_lipschitz(&set, &basis, &DVector::zeros(4)).unwrap();
    let reg = suboptimal_regulation(
        &set,
        &basis,
        &sigma,
        l,
        &RegulationOptions {
            box_lo: DVector::from_element(4, -2.0),
            box_hi: DVector::from_element(4, 2.0),
            starts: 6,
            max_iters: 40,
            seed: 42,
        },
    )
    .unwrap();
    // Soundness: sampled fixed points within eps of x*.
    let eps = epsilon_minus(&sigma, &reg.x_star).unwrap();
    let mut all_in = true;
    for (am, bm) in sigma.sample_members(200, SampleMode::Boundary, 7).unwrap() {
        let fp = (DMatrix::identity(4, 4) - &am).try_inverse().unwrap() * &bm * &reg.u_star;
        if (&fp - &reg.x_star).norm() > eps.value + 1e-6 {
            all_in = false;
        }
    }
    (all_in, l, reg.bound, reg.eps_minus_at_x, reg.u_star[0])
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("contraction");
    match which {
        "contraction" => {
            let theta_hat = theta_contraction();
            let basis = trig_paper_basis();
            let est = osl_upper_estimate(&theta_hat, &basis, None).unwrap();
            println!("analytic osl estimate: {est}");
            let sigma = args
                .get(2)
                .and_then(|s| s.parse::<f64>().ok())
                .unwrap_or(0.35);
            let mut ok = 0;
            let mut in_band = 0;
            for seed in 0..20 {
                let (threshold, est, success, lmax_s, lmin_phi) =
                    contraction_experiment(seed, sigma);
                println!(
                    "seed {seed:2}: threshold {threshold:8.4}  lse-est {est:8.4}  cert {success}  lmaxS {lmax_s:7.3}  lminPhiPhiT {lmin_phi:7.3}"
                );
                if success {
                    ok += 1;
                }
                if (-2.2..=-1.4).contains(&threshold) {
                    in_band += 1;
                }
            }
            println!("certified {ok}/20, threshold in band {in_band}/20 (sigma {sigma})");
        }
        "uav" => {
            let n = args
                .get(2)
                .and_then(|s| s.parse::<u64>().ok())
                .unwrap_or(5);
            for seed in 0..n {
                let t0 = std::time::Instant::now();
                let (sound, l, bound, eps, u) = uav_experiment(seed);
                println!(
                    "seed {seed:2}: sound {sound}  L {l:.4}  bound {bound:.4}  eps {eps:.4}  u* {u:.4}  ({:.1}s)",
                    t0.elapsed().as_secs_f64()
                );
            }
        }
        "noise" => {
            // How big is a NearBoundary realization relative to the budget?
            let noise = NoiseModel::energy_bound(DMatrix::identity(2, 2) * 10.0, 26).unwrap();
            let mut oracle = MeasurementOracle::new(DMatrix::zeros(6, 2), noise.clone(), NoiseMode::NearBoundary, 1);
            for _ in 0..5 {
                let w = oracle.measure(&DMatrix::zeros(6, 26)).unwrap();
                println!(
                    "||W||_2 = {:.4} (budget {:.4}), lmax(WW^T) = {:.4}",
                    cautious_core::linalg::spectral_norm(&w),
                    10f64.sqrt(),
                    lambda_max(&(&w * w.transpose()))
                );
            }
        }
        "uavdiag" => {
            let a_cont = DMatrix::from_row_slice(
                4,
                4,
                &[
                    -0.240, 0.345, -0.411, 0.0, -1.905, -10.695, 0.0, 0.941, 0.0, 0.0, 0.0, 1.0,
                    0.457, -250.513, 0.0, -8.844,
                ],
            );
            let b_cont = DMatrix::from_row_slice(4, 1, &[0.0, -0.301, 0.0, -98.658]);
            let a_hat = DMatrix::identity(4, 4) + &a_cont / 20.0;
            let b_hat = &b_cont / 20.0;
            println!("rho(A_hat) eigen magnitudes:");
            let sch = a_hat.clone().schur();
            let cplx = sch.complex_eigenvalues();
            for e in cplx.iter() {
                println!("  |lambda| = {:.6} ({:.4} + {:.4}i)", e.norm(), e.re, e.im);
            }
            let t = 20;
            let s_noise = NoiseModel::energy_bound(DMatrix::identity(4, 4) * 1e-4, t).unwrap();
            let mut s_oracle = MeasurementOracle::new(
                DMatrix::zeros(5, 4),
                s_noise.clone(),
                NoiseMode::NearBoundary,
                0,
            );
            let w_s = s_oracle.measure(&DMatrix::zeros(5, t)).unwrap();
            let mut states = DMatrix::zeros(4, t + 1);
            states.set_column(0, &DVector::from_element(4, 1.0));
            let inputs = DMatrix::from_element(1, t, -4.0);
            for k in 0..t {
                let next = &a_hat * states.column(k) + &b_hat * inputs.column(k) + w_s.column(k);
                states.set_column(k + 1, &next);
            }
            println!("state row maxima:");
            for i in 0..4 {
                let m = (0..=t).map(|k| states[(i, k)].abs()).fold(0.0f64, f64::max);
                println!("  |x{}| <= {:.3}", i + 1, m);
            }
            let sys_data = SystemDataset::new(states, inputs, s_noise).unwrap();
            let sigma = build_system_set(&sys_data);
            let m_full = sigma.set().n().assemble();
            println!("||M||_amax = {:.3e}", m_full.amax());
            // Paper's printed P_bar candidate against this realization.
            let p_paper = DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0072, 0.0015, 0.0004, -0.0102, 0.0015, 0.1665, 0.1218, 0.1496, 0.0004,
                    0.1218, 0.1648, -1.3489, -0.0102, 0.1496, -1.3489, 45.00437,
                ],
            );
            for beta in [1e-6, 1e-5, 1e-4, 1e-3] {
                let mut lmi = -&m_full;
                for i in 0..4 {
                    for j in 0..4 {
                        lmi[(i, j)] += p_paper[(i, j)];
                        lmi[(4 + i, 4 + j)] -= p_paper[(i, j)];
                    }
                    lmi[(i, i)] -= beta;
                }
                println!(
                    "paper P_bar, beta {beta:.0e}: lambda_min(LMI) = {:.4e}",
                    sym_eigen(&lmi).lambda_min()
                );
            }
            match quadratic_stability(&sigma).unwrap().certificate {
                Some(c) => println!("search found: beta {:.3e} min_eig {:.3e}", c.beta, c.min_eig),
                None => println!("search found nothing"),
            }
        }
        "uavrho2" => {
            // Max sampled spectral radius per seed of the regenerated noise,
            // with the same law as the uav experiment.
            for seed in 0..8u64 {
                let a_cont = DMatrix::from_row_slice(
                    4,
                    4,
                    &[
                        -0.240, 0.345, -0.411, 0.0, -1.905, -10.695, 0.0, 0.941, 0.0, 0.0, 0.0,
                        1.0, 0.457, -250.513, 0.0, -8.844,
                    ],
                );
                let b_cont = DMatrix::from_row_slice(4, 1, &[0.0, -0.301, 0.0, -98.658]);
                let a_hat = DMatrix::identity(4, 4) + &a_cont / 20.0;
                let b_hat = &b_cont / 20.0;
                let t = 20;
                let s_noise =
                    NoiseModel::energy_bound(DMatrix::identity(4, 4) * 1e-4, t).unwrap();
                let w_s = gaussian_admissible(4, t, 2.0e-3, 1e-2, seed);
                let mut states = DMatrix::zeros(4, t + 1);
                states.set_column(0, &DVector::from_element(4, 1.0));
                let inputs = DMatrix::from_element(1, t, -4.0);
                for k in 0..t {
                    let next =
                        &a_hat * states.column(k) + &b_hat * inputs.column(k) + w_s.column(k);
                    states.set_column(k + 1, &next);
                }
                let sys_data = SystemDataset::new(states, inputs, s_noise).unwrap();
                let sigma = build_system_set(&sys_data);
                let mut rho_max = 0.0f64;
                for (am, _) in sigma
                    .sample_members(20000, SampleMode::Boundary, 77)
                    .unwrap()
                {
                    let r = am
                        .schur()
                        .complex_eigenvalues()
                        .iter()
                        .map(|e| e.norm())
                        .fold(0.0f64, f64::max);
                    rho_max = rho_max.max(r);
                }
                println!("seed {seed}: max sampled rho(A) = {rho_max:.6}");
            }
        }
        "uavrho" => {
            // Necessary condition: every member of Sigma must be Schur
            // stable. Track the max sampled spectral radius for both noise
            // laws.
            let a_cont = DMatrix::from_row_slice(
                4,
                4,
                &[
                    -0.240, 0.345, -0.411, 0.0, -1.905, -10.695, 0.0, 0.941, 0.0, 0.0, 0.0, 1.0,
                    0.457, -250.513, 0.0, -8.844,
                ],
            );
            let b_cont = DMatrix::from_row_slice(4, 1, &[0.0, -0.301, 0.0, -98.658]);
            let a_hat = DMatrix::identity(4, 4) + &a_cont / 20.0;
            let b_hat = &b_cont / 20.0;
            let t = 20;
            for sigma_w in [0.0, 3e-4, 1.5e-3] {
                let s_noise =
                    NoiseModel::energy_bound(DMatrix::identity(4, 4) * 1e-4, t).unwrap();
                let w_s = gaussian_admissible(4, t, sigma_w, 1e-2, 3);
                let mut states = DMatrix::zeros(4, t + 1);
                states.set_column(0, &DVector::from_element(4, 1.0));
                let inputs = DMatrix::from_element(1, t, -4.0);
                for k in 0..t {
                    let next =
                        &a_hat * states.column(k) + &b_hat * inputs.column(k) + w_s.column(k);
                    states.set_column(k + 1, &next);
                }
                let sys_data = SystemDataset::new(states, inputs, s_noise).unwrap();
                let sigma = build_system_set(&sys_data);
                let z = sys_data_regressor_min(&sigma);
                let mut rho_max = 0.0f64;
                for (am, _) in sigma
                    .sample_members(2000, SampleMode::Boundary, 17)
                    .unwrap()
                {
                    let r = am
                        .schur()
                        .complex_eigenvalues()
                        .iter()
                        .map(|e| e.norm())
                        .fold(0.0f64, f64::max);
                    rho_max = rho_max.max(r);
                }
                println!(
                    "sigma_w {sigma_w:.1e}: max sampled rho(A) = {rho_max:.6}, sigma_min(Z) = {z:.4e}"
                );
            }
        }
        "uavdykstra" => {
            let a_cont = DMatrix::from_row_slice(
                4,
                4,
                &[
                    -0.240, 0.345, -0.411, 0.0, -1.905, -10.695, 0.0, 0.941, 0.0, 0.0, 0.0, 1.0,
                    0.457, -250.513, 0.0, -8.844,
                ],
            );
            let b_cont = DMatrix::from_row_slice(4, 1, &[0.0, -0.301, 0.0, -98.658]);
            let a_hat = DMatrix::identity(4, 4) + &a_cont / 20.0;
            let b_hat = &b_cont / 20.0;
            let t = 20;
            let s_noise = NoiseModel::energy_bound(DMatrix::identity(4, 4) * 1e-4, t).unwrap();
            let w_s = gaussian_admissible(4, t, 1.5e-3, 1e-2, 0);
            let mut states = DMatrix::zeros(4, t + 1);
            states.set_column(0, &DVector::from_element(4, 1.0));
            let inputs = DMatrix::from_element(1, t, -4.0);
            for k in 0..t {
                let next = &a_hat * states.column(k) + &b_hat * inputs.column(k) + w_s.column(k);
                states.set_column(k + 1, &next);
            }
            let sys_data = SystemDataset::new(states, inputs, s_noise).unwrap();
            let sigma = build_system_set(&sys_data);
            let m_full = sigma.set().n().assemble();
            let n = 4usize;
            let r = 1usize;
            let m_dim = 2 * n + r;
            // Scale states: d_i = sqrt(M22_ii).
            let mut dvec = DVector::from_fn(n, |i, _| m_full[(n + i, n + i)].abs().sqrt().max(1e-9));
            let lm = dvec.iter().map(|x: &f64| x.ln()).sum::<f64>() / n as f64;
            dvec /= lm.exp();
            let mut s_diag = DVector::from_element(m_dim, 1.0);
            for i in 0..n {
                s_diag[i] = 1.0 / dvec[i];
                s_diag[n + i] = 1.0 / dvec[i];
            }
            let mut m_t = m_full.clone();
            for i in 0..m_dim {
                for j in 0..m_dim {
                    m_t[(i, j)] *= s_diag[i] * s_diag[j];
                }
            }
            println!("scaled ||M|| = {:.3e}", m_t.amax());
            // Alternating projections between
            //   A = { blkdiag(P - beta I, -P, 0) - M : P sym, beta in R }
            //   K = PSD cone.
            // with a tiny margin pushed into the cone projection.
            let proj_affine = |s: &DMatrix<f64>| -> (DMatrix<f64>, f64) {
                // least squares: minimize || blkdiag(P - bI, -P, 0) - M - S ||_F over (P, b).
                // Solve entrywise: off-block entries are fixed (-M - S residual ignored);
                // P_ij appears in (i,j) and (n+i, n+j) slots.
                let y = s + &m_t; // want blkdiag(P - bI, -P, 0) ~ y
                // For i != j: P_ij minimizes (P_ij - y_ij)^2 + (-P_ij - y_{n+i,n+j})^2
                //   -> P_ij = (y_ij - y_{n+i,n+j})/2.
                // Diagonal couples beta: P_ii - b ~ y_ii, -P_ii ~ y_{n+i,n+i}.
                // First set P from the offdiag rule, then b by averaging.
                let mut p = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        p[(i, j)] = 0.5 * (y[(i, j)] - y[(n + i, n + j)]);
                    }
                }
                let p = cautious_core::linalg::symmetrize(&p);
                // beta: minimize sum_i (p_ii - b - y_ii)^2 -> b = mean(p_ii - y_ii),
                // subject to b >= beta_floor.
                let mut b = (0..n).map(|i| p[(i, i)] - y[(i, i)]).sum::<f64>() / n as f64;
                if b < 1e-9 {
                    b = 1e-9;
                }
                (p, b)
            };
            let assemble = |p: &DMatrix<f64>, b: f64| -> DMatrix<f64> {
                let mut s = -&m_t;
                for i in 0..n {
                    for j in 0..n {
                        s[(i, j)] += p[(i, j)];
                        s[(n + i, n + j)] -= p[(i, j)];
                    }
                    s[(i, i)] -= b;
                }
                s
            };
            let mut p = DMatrix::<f64>::identity(n, n);
            let mut b = 1e-6;
            let mut best = f64::NEG_INFINITY;
            let t0 = std::time::Instant::now();
            for it in 0..40000 {
                let s = assemble(&p, b);
                let eig = sym_eigen(&s);
                let lmin = eig.lambda_min();
                if lmin > best {
                    best = lmin;
                }
                if it % 4000 == 0 {
                    println!("it {it:6}: lambda_min = {lmin:.6e} (best {best:.3e})");
                }
                if lmin >= 0.0 {
                    println!("FEASIBLE at iteration {it}: lambda_min = {lmin:.3e}");
                    break;
                }
                // PSD projection (clamp negative eigenvalues to +margin).
                let mut dm = DMatrix::zeros(m_dim, m_dim);
                for i in 0..m_dim {
                    dm[(i, i)] = eig.values[i].max(1e-9);
                }
                let s_psd = &eig.vectors * dm * eig.vectors.transpose();
                let (pn, bn) = proj_affine(&s_psd);
                p = pn;
                b = bn;
            }
            println!("best lambda_min {best:.6e} in {:.1}s", t0.elapsed().as_secs_f64());
        }
        _ => eprintln!("unknown experiment"),
    }
}

fn sys_data_regressor_min(sigma: &cautious_core::control::SystemSet) -> f64 {
    // smallest singular value of the stacked regressor via -M22.
    let m22 = sigma.set().n().m22();
    cautious_core::linalg::sym_eigen(&-m22.clone()).lambda_min().max(0.0).sqrt()
}
