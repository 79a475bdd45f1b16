//! Shared oracle toolbox for the integration suites.
//!
//! Everything here re-derives results along an independent computational
//! path from the library: dense full-size matrices instead of per-block
//! structures, naive powf products instead of log-domain evaluation, a
//! hand-rolled Jacobi eigensolver instead of the iterative solver, and
//! literal index-loop rate formulas.

#![allow(dead_code)]

use fblsec::channel::ChannelRealization;
use fblsec::forms::{BoundCoefficients, PrecoderState, QuadraticFormSet};
use fblsec::math::{gaussian_q_inv, FblParams, LOG2_E};
use fblsec::{C64, CMat, CVec, EveUserMat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Random unit-norm stacked precoder.
pub fn random_precoder(n: usize, k: usize, rng: &mut ChaCha8Rng) -> PrecoderState {
    let v = CVec::from_fn(n * k, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    PrecoderState::from_stacked(v, n, k).unwrap()
}

/// Synthetic channel realization with i.i.d. complex Gaussian small-scale
/// vectors and log-uniform large-scale gains; covariances are identity
/// placeholders (geometry-free instances for algebraic checks).
pub fn synthetic_channels(n: usize, k: usize, m: usize, rng: &mut ChaCha8Rng) -> ChannelRealization {
    let gauss_vec = |rng: &mut ChaCha8Rng| {
        CVec::from_fn(n, |_, _| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            c(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
    };
    let log_uniform =
        |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo * (hi / lo).powf(rng.gen::<f64>());
    ChannelRealization {
        h: (0..k).map(|_| gauss_vec(rng)).collect(),
        g: (0..m).map(|_| gauss_vec(rng)).collect(),
        gamma: (0..k).map(|_| log_uniform(rng, 1e-9, 1e-6)).collect(),
        gamma_e: (0..m).map(|_| log_uniform(rng, 1e-9, 1e-6)).collect(),
        cov_user: (0..k).map(|_| CMat::identity(n, n)).collect(),
        cov_eve: (0..m).map(|_| CMat::identity(n, n)).collect(),
        aod_user: vec![0.0; k],
        aod_eve: vec![0.0; m],
        user_pos: vec![[10.0, 0.0]; k],
        eve_pos: vec![[12.0, 0.0]; m],
        eve_anchor: vec![0; m],
        noise_power: 1e-12,
    }
}

/// Dense full-size quadratic-form matrices assembled literally.
pub struct DenseForms {
    pub a: Vec<CMat>,
    pub b: Vec<CMat>,
    pub c: Vec<CMat>,
    pub d: Vec<Vec<CMat>>, // d[m][k]
    pub n: usize,
    pub k: usize,
    pub m: usize,
}

pub fn dense_forms(channels: &ChannelRealization, params: &FblParams) -> DenseForms {
    let n = channels.antennas();
    let k = channels.users();
    let m = channels.eves();
    let nk = n * k;
    let place = |block: &CMat, at: usize| {
        let mut out = CMat::zeros(nk, nk);
        out.view_mut((at * n, at * n), (n, n)).copy_from(block);
        out
    };
    let repeat = |block: &CMat| {
        let mut out = CMat::zeros(nk, nk);
        for j in 0..k {
            out.view_mut((j * n, j * n), (n, n)).copy_from(block);
        }
        out
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for ku in 0..k {
        let gain = (&channels.h[ku] * channels.h[ku].adjoint()) * c(channels.gamma[ku], 0.0);
        let full = repeat(&gain) + CMat::identity(nk, nk) * c(params.user_loading(), 0.0);
        let hole = place(&gain, ku);
        a.push(full.clone());
        b.push(full - hole);
    }
    let mut cm = Vec::new();
    let mut d = Vec::new();
    for mi in 0..m {
        let gain = (&channels.g[mi] * channels.g[mi].adjoint()) * c(channels.gamma_e[mi], 0.0);
        let full = repeat(&gain) + CMat::identity(nk, nk) * c(params.eve_loading(), 0.0);
        let mut row = Vec::new();
        for ku in 0..k {
            row.push(&full - place(&gain, ku));
        }
        cm.push(full);
        d.push(row);
    }
    DenseForms { a, b, c: cm, d, n, k, m }
}

pub fn quad(mat: &CMat, v: &CVec) -> f64 {
    v.dotc(&(mat * v)).re
}

/// Dense KKT operators computed naively: direct powf softmax weights, no
/// log-domain shifts. Returns the unscaled pair plus the two log
/// prefactors.
pub fn dense_kkt(
    f: &CVec,
    df: &DenseForms,
    coeffs: &BoundCoefficients,
    include_eves: bool,
) -> (CMat, CMat, f64, f64) {
    let nk = df.n * df.k;
    let ln2 = std::f64::consts::LN_2;
    let mut a_op = CMat::zeros(nk, nk);
    let mut b_op = CMat::zeros(nk, nk);
    let mut ln_num = 0.0;
    let mut ln_den = 0.0;
    for ku in 0..df.k {
        let qa = quad(&df.a[ku], f);
        let qb = quad(&df.b[ku], f);
        let w = coeffs.omega_user[ku];
        a_op += &df.a[ku] * c(w / ln2 / qa, 0.0);
        b_op += &df.b[ku] * c(w / ln2 / qb, 0.0);
        ln_num += w * (qa / qb).ln();

        if include_eves {
            // Naive softmax over eavesdroppers.
            let terms: Vec<f64> = (0..df.m)
                .map(|mi| {
                    let ratio = quad(&df.c[mi], f) / quad(&df.d[mi][ku], f);
                    coeffs.ln_beta.get(mi, ku).exp() * ratio.powf(coeffs.omega_eve.get(mi, ku))
                })
                .collect();
            let denom: f64 = terms.iter().sum();
            ln_den += ln2 / coeffs.alpha * denom.ln();
            for mi in 0..df.m {
                let softmax = terms[mi] / denom;
                let scale = softmax * coeffs.omega_eve.get(mi, ku) / coeffs.alpha;
                let qc = quad(&df.c[mi], f);
                let qd = quad(&df.d[mi][ku], f);
                a_op += &df.d[mi][ku] * c(scale / qd, 0.0);
                b_op += &df.c[mi] * c(scale / qc, 0.0);
            }
        }
    }
    (a_op, b_op, ln_num, ln_den)
}

/// Hand-rolled lower-triangular Cholesky of a Hermitian PD matrix.
pub fn cholesky_lower(a: &CMat) -> Option<CMat> {
    let n = a.nrows();
    let mut l = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for p in 0..j {
                sum -= l[(i, p)] * l[(j, p)].conj();
            }
            if i == j {
                if sum.re <= 0.0 {
                    return None;
                }
                l[(i, j)] = c(sum.re.sqrt(), 0.0);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Forward substitution: solve L x = b for lower-triangular L.
pub fn solve_lower(l: &CMat, b: &CVec) -> CVec {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        for j in 0..i {
            let prod = l[(i, j)] * x[j];
            x[i] -= prod;
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Back substitution: solve L^H x = b.
pub fn solve_lower_adjoint(l: &CMat, b: &CVec) -> CVec {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for j in i + 1..n {
            let prod = l[(j, i)].conj() * x[j];
            x[i] -= prod;
        }
        x[i] /= l[(i, i)].conj();
    }
    x
}

/// Cyclic Jacobi eigensolver for complex Hermitian matrices.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns,
/// unsorted. Quadratically convergent; 60 sweeps are far more than needed
/// for the small matrices the oracles use.
pub fn hermitian_eigen_jacobi(a0: &CMat) -> (Vec<f64>, CMat) {
    let n = a0.nrows();
    let mut a = a0.clone();
    let mut v = CMat::identity(n, n);
    let scale = a.norm().max(1e-300);
    for _ in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                let phase = apq / c(mag, 0.0);
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * mag).atan2(app - aqq);
                let (s, co) = theta.sin_cos();
                // 2x2 unitary J = [[e^{i phi} c, -e^{i phi} s], [s, c]]
                let j11 = phase * c(co, 0.0);
                let j12 = -phase * c(s, 0.0);
                let j21 = c(s, 0.0);
                let j22 = c(co, 0.0);
                // A <- J^H A J (columns then rows), V <- V J.
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * j11 + aiq * j21;
                    a[(i, q)] = aip * j12 + aiq * j22;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * j11 + viq * j21;
                    v[(i, q)] = vip * j12 + viq * j22;
                }
                for i in 0..n {
                    let api = a[(p, i)];
                    let aqi = a[(q, i)];
                    a[(p, i)] = j11.conj() * api + j21.conj() * aqi;
                    a[(q, i)] = j12.conj() * api + j22.conj() * aqi;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[(i, i)].re).collect();
    (eig, v)
}

/// Principal generalized eigenvector of the Hermitian-definite pair
/// `(A, B)`: reduce with the hand-rolled Cholesky, run Jacobi, map back.
pub fn principal_generalized_eigenvector(a: &CMat, b: &CMat) -> CVec {
    let n = a.nrows();
    let l = cholesky_lower(b).expect("B must be positive definite");
    // S = L^{-1} A L^{-H}, built column by column.
    let mut s = CMat::zeros(n, n);
    for j in 0..n {
        let ej = CVec::from_fn(n, |i, _| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let col = solve_lower_adjoint(&l, &ej); // L^{-H} e_j
        let acol = a * col;
        let scol = solve_lower(&l, &acol);
        s.set_column(j, &scol);
    }
    // Hermitize against round-off before Jacobi.
    let s = (s.clone() + s.adjoint()) * c(0.5, 0.0);
    let (eigs, vecs) = hermitian_eigen_jacobi(&s);
    let best = eigs
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let w = vecs.column(best).clone_owned();
    let v = solve_lower_adjoint(&l, &w);
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Central finite differences of `ln lambda` treated as a function of the
/// stacked complex vector; returns the conjugate-coordinate gradient.
pub fn fd_gradient_ln_lambda(
    f0: &CVec,
    forms: &QuadraticFormSet,
    coeffs: &BoundCoefficients,
    params: &FblParams,
    h: f64,
) -> CVec {
    let n = forms.antennas();
    let k = forms.users();
    let eval = |v: &CVec| -> f64 {
        let p = PrecoderState::from_stacked(v.clone(), n, k).unwrap();
        fblsec::forms::objective_log_lambda(&p, forms, coeffs, params) * std::f64::consts::LN_2
    };
    CVec::from_fn(f0.len(), |i, _| {
        let mut plus = f0.clone();
        let mut minus = f0.clone();
        plus[i] += c(h, 0.0);
        minus[i] -= c(h, 0.0);
        let d_re = (eval(&plus) - eval(&minus)) / (2.0 * h);
        let mut plus = f0.clone();
        let mut minus = f0.clone();
        plus[i] += c(0.0, h);
        minus[i] -= c(0.0, h);
        let d_im = (eval(&plus) - eval(&minus)) / (2.0 * h);
        c(d_re / 2.0, d_im / 2.0)
    })
}

/// Literal re-implementation of the per-user secrecy rate from the rate
/// and dispersion definitions, index loops only.
pub fn secrecy_rates_straightline(
    precoder: &PrecoderState,
    channels: &ChannelRealization,
    eps: &[f64],
    delta: &EveUserMat,
    params: &FblParams,
) -> Vec<f64> {
    let n = channels.antennas();
    let k = channels.users();
    let m = channels.eves();
    let l = params.blocklength as f64;
    let inner = |a: &CVec, state: &PrecoderState, user: usize| -> C64 {
        let mut acc = c(0.0, 0.0);
        for i in 0..n {
            acc += a[i].conj() * state.stacked()[user * n + i];
        }
        acc
    };
    let mut out = Vec::with_capacity(k);
    for ku in 0..k {
        let mut sig = 0.0;
        let mut intf = 0.0;
        for l2 in 0..k {
            let p = channels.gamma[ku] * inner(&channels.h[ku], precoder, l2).norm_sqr();
            if l2 == ku {
                sig = p;
            } else {
                intf += p;
            }
        }
        let rho = sig / (intf + params.noise_user / params.symbol_power);
        let v = 2.0 * rho / (1.0 + rho) * LOG2_E * LOG2_E;
        let rate = (1.0 + rho).log2() - (v / l).sqrt() * gaussian_q_inv(eps[ku]).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for mi in 0..m {
            let mut sig_e = 0.0;
            let mut intf_e = 0.0;
            for l2 in 0..k {
                let p = channels.gamma_e[mi] * inner(&channels.g[mi], precoder, l2).norm_sqr();
                if l2 == ku {
                    sig_e = p;
                } else {
                    intf_e += p;
                }
            }
            let rho_e = sig_e / (intf_e + params.noise_eve / params.symbol_power);
            let v_e = 2.0 * rho_e / (1.0 + rho_e) * LOG2_E * LOG2_E;
            let term =
                (1.0 + rho_e).log2() + (v_e / l).sqrt() * gaussian_q_inv(delta.get(mi, ku)).unwrap();
            worst = worst.max(term);
        }
        out.push(rate - worst);
    }
    out
}

/// Unit-gain instance: i.i.d. CN(0,1) channels, unit large-scale gains.
/// With [`unit_params`] the per-stream SNR headroom sits around 10 dB,
/// the canonical well-scaled testbed for solver fixed-point checks.
pub fn unit_gain_channels(n: usize, k: usize, m: usize, rng: &mut ChaCha8Rng) -> ChannelRealization {
    let mut channels = synthetic_channels(n, k, m, rng);
    channels.gamma = vec![1.0; k];
    channels.gamma_e = vec![1.0; m];
    channels
}

/// Parameters pairing with [`unit_gain_channels`]: unit symbol power and a
/// 0.1 noise loading.
pub fn unit_params(blocklength: u32, weight: f64) -> FblParams {
    FblParams {
        blocklength,
        symbol_power: 1.0,
        noise_user: 0.1,
        noise_eve: 0.1,
        alpha: 10.0,
        weight,
    }
}

/// Default finite-blocklength parameters at the given transmit power.
pub fn params_at(p_dbm: f64, blocklength: u32, weight: f64) -> FblParams {
    FblParams {
        blocklength,
        symbol_power: fblsec::channel::dbm_to_watts(p_dbm),
        noise_user: fblsec::channel::dbm_to_watts(-99.0),
        noise_eve: fblsec::channel::dbm_to_watts(-99.0),
        alpha: 10.0,
        weight,
    }
}
