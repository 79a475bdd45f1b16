//! Block-diagonal quadratic forms behind the Rayleigh-quotient objective.
//!
//! For a stacked unit-norm precoder the per-user SINR ratios become ratios
//! of Hermitian quadratic forms: `1 + rho_k = (f^H A_k f)/(f^H B_k f)` for
//! the legitimate links and `1 + rho^e_{m,k} = (f^H C_m f)/(f^H D_{m,k} f)`
//! for the wiretap links. All four families are block diagonal with `K`
//! identical (up to one removed block) `N x N` blocks, so only the per-block
//! gain matrices and the diagonal loadings are stored; dense `NK x NK`
//! assembly exists only in test oracles.
//!
//! The same structures carry the covariance-only variant: when the wiretap
//! channels are known only through their spatial covariances, the rank-one
//! gain `gamma^e g g^H` is replaced by `gamma^e R^e` and every downstream
//! formula reads the resulting averaged SINRs instead.
//!
//! `BoundCoefficients` holds the tangent-bound weights that turn the
//! back-off terms into exponents of those ratios. Weights of the
//! `beta * ratio^omega` kind are kept in log domain throughout; for sharp
//! smooth-max parameters the direct form overflows.

use crate::channel::ChannelRealization;
use crate::math::{
    dispersion, dispersion_sqrt_tangent, gaussian_q_inv, log_sum_exp, FblParams, LOG2_E,
};
use crate::{C64, CMat, CVec, Error, EveUserMat, Result};

/// Floor applied to tangent anchors; the tangent slope is singular at zero.
pub const SINR_ANCHOR_FLOOR: f64 = 1e-9;
/// Floor for the clamped user weight; a negative weight would flip the
/// optimization direction at low SINR.
pub const OMEGA_FLOOR: f64 = 1e-3;

/// What the transmitter knows about the wiretap channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CsitMode {
    /// Instantaneous wiretap channels available.
    Perfect,
    /// Only wiretap spatial covariances available.
    Covariance,
}

/// Stacked per-user precoding vector with unit total power.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderState {
    stacked: CVec,
    antennas: usize,
    users: usize,
}

impl PrecoderState {
    /// Build from a stacked `N*K` vector; normalizes to unit norm.
    pub fn from_stacked(stacked: CVec, antennas: usize, users: usize) -> Result<Self> {
        if stacked.len() != antennas * users {
            return Err(Error::Config(format!(
                "stacked precoder length {} != N*K = {}",
                stacked.len(),
                antennas * users
            )));
        }
        let norm = stacked.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NonFinite {
                op: "PrecoderState::from_stacked",
                msg: format!("precoder norm {norm}"),
            });
        }
        let mut state = Self { stacked: stacked / C64::new(norm, 0.0), antennas, users };
        state.phase_fix();
        Ok(state)
    }

    /// Stack per-user beamformers and normalize.
    pub fn from_columns(columns: &[CVec]) -> Result<Self> {
        let users = columns.len();
        let antennas = columns[0].len();
        let mut stacked = CVec::zeros(antennas * users);
        for (k, col) in columns.iter().enumerate() {
            stacked.rows_mut(k * antennas, antennas).copy_from(col);
        }
        Self::from_stacked(stacked, antennas, users)
    }

    #[inline]
    pub fn stacked(&self) -> &CVec {
        &self.stacked
    }

    #[inline]
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    #[inline]
    pub fn users(&self) -> usize {
        self.users
    }

    /// View of user `k`'s beamformer.
    #[inline]
    pub fn user(&self, k: usize) -> nalgebra::DVectorView<'_, C64> {
        self.stacked.rows(k * self.antennas, self.antennas)
    }

    /// Rotate the global phase so the largest-magnitude entry is real
    /// positive. Makes iterate trajectories comparable and deterministic.
    pub fn phase_fix(&mut self) {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, v) in self.stacked.iter().enumerate() {
            let m = v.norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let pivot = self.stacked[best];
            let rot = pivot.conj() / C64::new(pivot.norm(), 0.0);
            self.stacked *= rot;
        }
    }

    /// Rotate the global phase so the inner product with `reference` is
    /// real positive. Successive iterates measured this way differ by
    /// their true chordal distance, not by an arbitrary phase jump.
    pub fn align_phase_to(&mut self, reference: &PrecoderState) {
        let c = reference.stacked.dotc(&self.stacked);
        let mag = c.norm();
        if mag > 0.0 {
            self.stacked *= c.conj() / C64::new(mag, 0.0);
        }
    }
}

/// Per-entity gain matrices plus diagonal loadings: everything needed to
/// evaluate the four quadratic-form families without dense assembly.
#[derive(Debug, Clone)]
pub struct QuadraticFormSet {
    antennas: usize,
    users: usize,
    eves: usize,
    /// `gamma_k h_k h_k^H`, one per user.
    user_gain: Vec<CMat>,
    /// `gamma^e_m g_m g_m^H` (perfect) or `gamma^e_m R^e_m` (covariance).
    eve_gain: Vec<CMat>,
    user_load: f64,
    eve_load: f64,
    mode: CsitMode,
}

/// All quadratic forms of one precoder, evaluated in one pass.
#[derive(Debug, Clone)]
pub struct QuadValues {
    /// `f^H A_k f` per user.
    pub a: Vec<f64>,
    /// `f^H B_k f` per user.
    pub b: Vec<f64>,
    /// `f^H C_m f` per eavesdropper.
    pub c: Vec<f64>,
    /// `f^H D_{m,k} f` per (eavesdropper, user).
    pub d: EveUserMat,
}

impl QuadValues {
    /// User SINR implied by the form ratio.
    #[inline]
    pub fn sinr_user(&self, k: usize) -> f64 {
        self.a[k] / self.b[k] - 1.0
    }

    /// Wiretap SINR implied by the form ratio.
    #[inline]
    pub fn sinr_eve(&self, m: usize, k: usize) -> f64 {
        self.c[m] / self.d.get(m, k) - 1.0
    }
}

fn herm_quad(mat: &CMat, x: nalgebra::DVectorView<'_, C64>) -> f64 {
    let mx = mat * x;
    x.dotc(&mx).re
}

/// Assemble the quadratic forms for perfect wiretap CSIT.
pub fn build_forms(channels: &ChannelRealization, params: &FblParams) -> QuadraticFormSet {
    let user_gain = channels
        .h
        .iter()
        .zip(&channels.gamma)
        .map(|(h, &gamma)| (h * h.adjoint()) * C64::new(gamma, 0.0))
        .collect();
    let eve_gain = channels
        .g
        .iter()
        .zip(&channels.gamma_e)
        .map(|(g, &gamma)| (g * g.adjoint()) * C64::new(gamma, 0.0))
        .collect();
    QuadraticFormSet {
        antennas: channels.antennas(),
        users: channels.users(),
        eves: channels.eves(),
        user_gain,
        eve_gain,
        user_load: params.user_loading(),
        eve_load: params.eve_loading(),
        mode: CsitMode::Perfect,
    }
}

/// Assemble the covariance-only variant: wiretap rank-one gains replaced by
/// the spatial covariances.
pub fn build_forms_partial(channels: &ChannelRealization, params: &FblParams) -> QuadraticFormSet {
    let mut forms = build_forms(channels, params);
    forms.eve_gain = channels
        .cov_eve
        .iter()
        .zip(&channels.gamma_e)
        .map(|(r, &gamma)| r * C64::new(gamma, 0.0))
        .collect();
    forms.mode = CsitMode::Covariance;
    forms
}

impl QuadraticFormSet {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn eves(&self) -> usize {
        self.eves
    }

    pub fn mode(&self) -> CsitMode {
        self.mode
    }

    pub fn user_loading(&self) -> f64 {
        self.user_load
    }

    pub fn eve_loading(&self) -> f64 {
        self.eve_load
    }

    /// Per-user gain block `gamma_k h_k h_k^H`.
    pub fn user_gain(&self, k: usize) -> &CMat {
        &self.user_gain[k]
    }

    /// Per-eavesdropper gain block.
    pub fn eve_gain(&self, m: usize) -> &CMat {
        &self.eve_gain[m]
    }

    /// Evaluate every quadratic form of `precoder` in one pass.
    pub fn quad_values(&self, precoder: &PrecoderState) -> QuadValues {
        let k = self.users;
        let m = self.eves;
        let norm_sq = precoder.stacked().norm_squared();

        // user_q[ku][l] = f_l^H G_ku f_l, eve_q[mi][l] likewise.
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        let mut sig_user = vec![0.0; k];
        for ku in 0..k {
            let gain = &self.user_gain[ku];
            let mut total = 0.0;
            for l in 0..k {
                let q = herm_quad(gain, precoder.user(l));
                total += q;
                if l == ku {
                    sig_user[ku] = q;
                }
            }
            a[ku] = total + self.user_load * norm_sq;
            b[ku] = a[ku] - sig_user[ku];
        }

        let mut c = vec![0.0; m];
        let mut d = EveUserMat::filled(m, k, 0.0);
        for mi in 0..m {
            let gain = &self.eve_gain[mi];
            let mut per_user = vec![0.0; k];
            let mut total = 0.0;
            for l in 0..k {
                let q = herm_quad(gain, precoder.user(l));
                per_user[l] = q;
                total += q;
            }
            c[mi] = total + self.eve_load * norm_sq;
            for l in 0..k {
                d.set(mi, l, c[mi] - per_user[l]);
            }
        }
        QuadValues { a, b, c, d }
    }

    /// Sum secrecy rate in the infinite-blocklength limit at `precoder`,
    /// read off the form ratios (barred variant under covariance mode).
    pub fn sum_secrecy_infinite(&self, precoder: &PrecoderState) -> f64 {
        let q = self.quad_values(precoder);
        (0..self.users)
            .map(|ku| {
                let worst = (0..self.eves)
                    .map(|mi| (q.c[mi] / q.d.get(mi, ku)).log2())
                    .fold(f64::NEG_INFINITY, f64::max);
                (q.a[ku] / q.b[ku]).log2() - worst
            })
            .sum()
    }

    /// Per-user secrecy rate at finite blocklength with the worst-case
    /// wiretap term taken as a hard max, evaluated from the form ratios.
    /// Equals the exact rate under perfect CSIT and the covariance-averaged
    /// rate otherwise.
    pub fn secrecy_rates(
        &self,
        precoder: &PrecoderState,
        eps: &[f64],
        delta: &EveUserMat,
        params: &FblParams,
    ) -> Result<Vec<f64>> {
        let q = self.quad_values(precoder);
        let l = params.blocklength as f64;
        let mut out = Vec::with_capacity(self.users);
        for ku in 0..self.users {
            let rate = (q.a[ku] / q.b[ku]).log2();
            let v = dispersion(q.sinr_user(ku))?;
            let backoff = (v / l).sqrt() * gaussian_q_inv(eps[ku])?;
            let mut worst = f64::NEG_INFINITY;
            for mi in 0..self.eves {
                let re = (q.c[mi] / q.d.get(mi, ku)).log2();
                let ve = dispersion(q.sinr_eve(mi, ku))?;
                let be = (ve / l).sqrt() * gaussian_q_inv(delta.get(mi, ku))?;
                worst = worst.max(re + be);
            }
            out.push(rate - backoff - worst);
        }
        Ok(out)
    }
}

/// Tangent-bound weights at one linearization point.
///
/// `omega_user` is clamped to `[OMEGA_FLOOR, 1]` and is what the solver
/// uses; `omega_user_raw` is the exact value and is what the certified
/// lower bound uses (clamping would push the bound above the true rate at
/// very low SINR).
#[derive(Debug, Clone)]
pub struct BoundCoefficients {
    pub omega_user: Vec<f64>,
    pub omega_user_raw: Vec<f64>,
    pub psi_user: Vec<f64>,
    pub omega_eve: EveUserMat,
    pub psi_eve: EveUserMat,
    pub ln_beta: EveUserMat,
    /// Linearization anchors (current-iterate SINRs).
    pub anchor_user: Vec<f64>,
    pub anchor_eve: EveUserMat,
    /// Smooth-max sharpness the weights were built for.
    pub alpha: f64,
    /// How many user weights hit the clamp.
    pub clamp_count: usize,
}

impl BoundCoefficients {
    /// Weights in the infinite-blocklength limit: back-off terms vanish.
    pub fn infinite_blocklength(users: usize, eves: usize, alpha: f64) -> Self {
        Self {
            omega_user: vec![1.0; users],
            omega_user_raw: vec![1.0; users],
            psi_user: vec![0.0; users],
            omega_eve: EveUserMat::filled(eves, users, alpha / std::f64::consts::LN_2),
            psi_eve: EveUserMat::filled(eves, users, 0.0),
            ln_beta: EveUserMat::filled(eves, users, 0.0),
            anchor_user: vec![1.0; users],
            anchor_eve: EveUserMat::filled(eves, users, 1.0),
            alpha,
            clamp_count: 0,
        }
    }
}

fn check_probability(op: &'static str, label: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::domain(op, format!("{label} must lie in (0, 1/2], got {p}")));
    }
    Ok(())
}

/// Compute the tangent-bound weights at the SINRs of `precoder`.
pub fn bound_coeffs_at(
    precoder: &PrecoderState,
    forms: &QuadraticFormSet,
    eps: &[f64],
    delta: &EveUserMat,
    params: &FblParams,
) -> Result<BoundCoefficients> {
    let k = forms.users();
    let m = forms.eves();
    let sqrt_l = (params.blocklength as f64).sqrt();
    let quads = forms.quad_values(precoder);

    let mut omega_user = Vec::with_capacity(k);
    let mut omega_user_raw = Vec::with_capacity(k);
    let mut psi_user = Vec::with_capacity(k);
    let mut anchor_user = Vec::with_capacity(k);
    let mut clamp_count = 0usize;
    for ku in 0..k {
        check_probability("bound_coeffs_at", "eps", eps[ku])?;
        let anchor = quads.sinr_user(ku).max(SINR_ANCHOR_FLOOR);
        let (q, r) = dispersion_sqrt_tangent(anchor)?;
        let qinv = gaussian_q_inv(eps[ku])?;
        let raw = 1.0 - qinv * q / sqrt_l;
        let clamped = raw.clamp(OMEGA_FLOOR, 1.0);
        if clamped != raw {
            clamp_count += 1;
        }
        omega_user_raw.push(raw);
        omega_user.push(clamped);
        psi_user.push(qinv * LOG2_E * r / sqrt_l);
        anchor_user.push(anchor);
    }
    if clamp_count > 0 {
        log::warn!("clamped {clamp_count} user weight(s) to [{OMEGA_FLOOR}, 1]");
    }

    let mut omega_eve = EveUserMat::filled(m, k, 0.0);
    let mut psi_eve = EveUserMat::filled(m, k, 0.0);
    let mut ln_beta = EveUserMat::filled(m, k, 0.0);
    let mut anchor_eve = EveUserMat::filled(m, k, 0.0);
    for ku in 0..k {
        for mi in 0..m {
            check_probability("bound_coeffs_at", "delta", delta.get(mi, ku))?;
            let anchor = quads.sinr_eve(mi, ku).max(SINR_ANCHOR_FLOOR);
            let (q, r) = dispersion_sqrt_tangent(anchor)?;
            let qinv = gaussian_q_inv(delta.get(mi, ku))?;
            let omega = params.alpha / std::f64::consts::LN_2 * (1.0 + qinv * q / sqrt_l);
            let psi = qinv * LOG2_E * r / sqrt_l;
            omega_eve.set(mi, ku, omega);
            psi_eve.set(mi, ku, psi);
            ln_beta.set(mi, ku, params.alpha * psi);
            anchor_eve.set(mi, ku, anchor);
        }
    }

    Ok(BoundCoefficients {
        omega_user,
        omega_user_raw,
        psi_user,
        omega_eve,
        psi_eve,
        ln_beta,
        anchor_user,
        anchor_eve,
        alpha: params.alpha,
        clamp_count,
    })
}

/// Per-user pieces of the smoothed objective at fixed coefficients.
///
/// Returns `(user_term_bits, slse_nats)` where `user_term = omega_k *
/// log2(a_k/b_k)` (clamped or raw weight per `raw`) and `slse_k` is the
/// shifted log-sum-exp over eavesdroppers of
/// `ln beta_{m,k} + omega^e_{m,k} ln(c_m/d_{m,k})`.
fn objective_terms(
    precoder: &PrecoderState,
    forms: &QuadraticFormSet,
    coeffs: &BoundCoefficients,
    raw: bool,
) -> (Vec<f64>, Vec<f64>) {
    let quads = forms.quad_values(precoder);
    let k = forms.users();
    let m = forms.eves();
    let mut user_terms = Vec::with_capacity(k);
    let mut slse = Vec::with_capacity(k);
    let mut exponents = vec![0.0; m];
    for ku in 0..k {
        let omega = if raw { coeffs.omega_user_raw[ku] } else { coeffs.omega_user[ku] };
        user_terms.push(omega * (quads.a[ku] / quads.b[ku]).log2());
        for (mi, e) in exponents.iter_mut().enumerate() {
            *e = coeffs.ln_beta.get(mi, ku)
                + coeffs.omega_eve.get(mi, ku) * (quads.c[mi] / quads.d.get(mi, ku)).ln();
        }
        slse.push(log_sum_exp(&exponents));
    }
    (user_terms, slse)
}

/// The smoothed objective `log2 lambda` the power iteration maximizes.
///
/// Scale invariant in the precoder; evaluated entirely through shifted
/// log-sum-exp so sharp smoothing parameters cannot overflow.
pub fn objective_log_lambda(
    precoder: &PrecoderState,
    forms: &QuadraticFormSet,
    coeffs: &BoundCoefficients,
    params: &FblParams,
) -> f64 {
    let (user_terms, slse) = objective_terms(precoder, forms, coeffs, false);
    user_terms
        .iter()
        .zip(&slse)
        .map(|(u, s)| u - s / params.alpha)
        .sum()
}

/// Certified per-user lower bound on the secrecy rate at the coefficients'
/// linearization point (uses the unclamped user weights).
pub fn secrecy_lb(
    precoder: &PrecoderState,
    forms: &QuadraticFormSet,
    coeffs: &BoundCoefficients,
    params: &FblParams,
) -> Vec<f64> {
    let (user_terms, slse) = objective_terms(precoder, forms, coeffs, true);
    (0..forms.users())
        .map(|ku| user_terms[ku] - coeffs.psi_user[ku] - slse[ku] / params.alpha)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_drop, ScenarioConfig};
    use crate::math;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_params(l: u32) -> FblParams {
        FblParams {
            blocklength: l,
            symbol_power: crate::channel::dbm_to_watts(20.0),
            noise_user: crate::channel::dbm_to_watts(-99.0),
            noise_eve: crate::channel::dbm_to_watts(-99.0),
            alpha: 10.0,
            weight: 0.01,
        }
    }

    fn random_precoder(n: usize, k: usize, seed: u64) -> PrecoderState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CVec::from_fn(n * k, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        PrecoderState::from_stacked(v, n, k).unwrap()
    }

    fn small_drop(seed: u64) -> crate::channel::ChannelRealization {
        let config = ScenarioConfig { antennas: 4, users: 2, eves: 3, seed, ..Default::default() };
        generate_drop(&config).unwrap()
    }

    #[test]
    fn precoder_unit_norm_and_views() {
        let p = random_precoder(3, 2, 9);
        assert_relative_eq!(p.stacked().norm(), 1.0, epsilon = 1e-12);
        assert_eq!(p.user(0).len(), 3);
        assert_eq!(p.user(1).len(), 3);
    }

    #[test]
    fn form_ratio_matches_direct_sinr() {
        let drop = small_drop(3);
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 17);
        let q = forms.quad_values(&p);
        let rho = math::sinr_users(&p, &drop, &params);
        let rho_e = math::sinr_eves(&p, &drop, &params);
        for ku in 0..2 {
            assert_relative_eq!(q.a[ku] / q.b[ku], 1.0 + rho[ku], max_relative = 1e-10);
        }
        for mi in 0..3 {
            for ku in 0..2 {
                assert_relative_eq!(
                    q.c[mi] / q.d.get(mi, ku),
                    1.0 + rho_e.get(mi, ku),
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn single_user_interference_form_is_pure_loading() {
        let config = ScenarioConfig { antennas: 4, users: 1, eves: 1, seed: 8, ..Default::default() };
        let drop = generate_drop(&config).unwrap();
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 1, 2);
        let q = forms.quad_values(&p);
        assert_relative_eq!(q.d.get(0, 0), params.eve_loading(), max_relative = 1e-12);
        assert_relative_eq!(q.b[0], params.user_loading(), max_relative = 1e-12);
    }

    #[test]
    fn zero_wiretap_channels_give_unit_ratio() {
        let mut drop = small_drop(4);
        for g in &mut drop.g {
            g.fill(C64::new(0.0, 0.0));
        }
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 5);
        let q = forms.quad_values(&p);
        for mi in 0..3 {
            assert_relative_eq!(q.c[mi], params.eve_loading(), max_relative = 1e-12);
            for ku in 0..2 {
                assert_relative_eq!(q.c[mi] / q.d.get(mi, ku), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_covariance_degenerates_to_perfect() {
        let mut drop = small_drop(6);
        for (cov, g) in drop.cov_eve.iter_mut().zip(&drop.g) {
            *cov = g * g.adjoint();
        }
        let params = test_params(200);
        let perfect = build_forms(&drop, &params);
        let barred = build_forms_partial(&drop, &params);
        let p = random_precoder(4, 2, 31);
        let qp = perfect.quad_values(&p);
        let qb = barred.quad_values(&p);
        for mi in 0..3 {
            assert_relative_eq!(qp.c[mi], qb.c[mi], max_relative = 1e-12);
            for ku in 0..2 {
                assert_relative_eq!(qp.d.get(mi, ku), qb.d.get(mi, ku), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn barred_ratio_reproduces_covariance_rate_formula() {
        let drop = small_drop(12);
        let params = test_params(200);
        let barred = build_forms_partial(&drop, &params);
        let p = random_precoder(4, 2, 3);
        let q = barred.quad_values(&p);
        for mi in 0..3 {
            for ku in 0..2 {
                // Direct formula: gamma^e f_k^H R^e f_k over interference + loading.
                let r = &drop.cov_eve[mi];
                let quad = |l: usize| {
                    let fl = p.user(l);
                    let rx = r * fl;
                    fl.dotc(&rx).re * drop.gamma_e[mi]
                };
                let sig = quad(ku);
                let mut intf = 0.0;
                for l in 0..2 {
                    if l != ku {
                        intf += quad(l);
                    }
                }
                let direct = (1.0 + sig / (intf + params.eve_loading())).log2();
                let via_forms = (q.c[mi] / q.d.get(mi, ku)).log2();
                assert_relative_eq!(via_forms, direct, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn coeff_limits_at_half_and_infinite_blocklength() {
        let drop = small_drop(19);
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 23);
        let eps = vec![0.5; 2];
        let delta = EveUserMat::filled(3, 2, 0.5);
        let coeffs = bound_coeffs_at(&p, &forms, &eps, &delta, &params).unwrap();
        for ku in 0..2 {
            assert_relative_eq!(coeffs.omega_user[ku], 1.0, epsilon = 1e-14);
            assert_relative_eq!(coeffs.psi_user[ku], 0.0, epsilon = 1e-14);
        }
        for (_, _, v) in coeffs.omega_eve.iter() {
            assert_relative_eq!(v, params.alpha / std::f64::consts::LN_2, epsilon = 1e-12);
        }
        for (_, _, v) in coeffs.ln_beta.iter() {
            assert_relative_eq!(v, 0.0, epsilon = 1e-14);
        }

        // Huge blocklength approaches the infinite-blocklength weights for
        // any eps/delta.
        let params_l = test_params(4_000_000_000);
        let forms_l = build_forms(&drop, &params_l);
        let eps = vec![1e-6; 2];
        let delta = EveUserMat::filled(3, 2, 1e-6);
        let coeffs_l = bound_coeffs_at(&p, &forms_l, &eps, &delta, &params_l).unwrap();
        let inf = BoundCoefficients::infinite_blocklength(2, 3, params_l.alpha);
        for ku in 0..2 {
            assert_relative_eq!(coeffs_l.omega_user[ku], inf.omega_user[ku], epsilon = 1e-2);
            assert!(coeffs_l.psi_user[ku].abs() < 1e-3);
        }
    }

    #[test]
    fn ln_beta_is_alpha_times_psi() {
        let drop = small_drop(29);
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 7);
        let eps = vec![1e-6, 2e-6];
        let delta = EveUserMat::from_fn(3, 2, |m, k| 1e-6 * (1.0 + 0.2 * (m + k) as f64));
        let coeffs = bound_coeffs_at(&p, &forms, &eps, &delta, &params).unwrap();
        for (m, k, v) in coeffs.ln_beta.iter() {
            assert_eq!(v, params.alpha * coeffs.psi_eve.get(m, k));
        }
        for &w in &coeffs.omega_user {
            assert!(w <= 1.0 && w >= OMEGA_FLOOR);
        }
        for (_, _, w) in coeffs.omega_eve.iter() {
            assert!(w >= params.alpha / std::f64::consts::LN_2 - 1e-12);
        }
    }

    #[test]
    fn objective_scale_and_phase_invariant() {
        let drop = small_drop(37);
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 41);
        let eps = vec![1e-6, 2e-6];
        let delta = EveUserMat::filled(3, 2, 1.5e-6);
        let coeffs = bound_coeffs_at(&p, &forms, &eps, &delta, &params).unwrap();
        let base = objective_log_lambda(&p, &forms, &coeffs, &params);
        for &scale in &[0.5, 2.0] {
            let scaled = PrecoderState {
                stacked: p.stacked() * C64::new(scale, 0.0),
                antennas: 4,
                users: 2,
            };
            let v = objective_log_lambda(&scaled, &forms, &coeffs, &params);
            assert_relative_eq!(v, base, epsilon = 1e-10);
        }
        let rotated = PrecoderState {
            stacked: p.stacked() * C64::new(0.6, 0.8),
            antennas: 4,
            users: 2,
        };
        let v = objective_log_lambda(&rotated, &forms, &coeffs, &params);
        assert_relative_eq!(v, base, epsilon = 1e-10);
    }

    #[test]
    fn objective_matches_naive_direct_evaluation() {
        let drop = small_drop(43);
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 47);
        let eps = vec![1e-4, 1e-4];
        let delta = EveUserMat::filled(3, 2, 1e-4);
        let coeffs = bound_coeffs_at(&p, &forms, &eps, &delta, &params).unwrap();
        let q = forms.quad_values(&p);
        // No log-domain tricks: powf products and a literal sum.
        let mut naive = 0.0;
        for ku in 0..2usize {
            let mut sum = 0.0;
            for mi in 0..3usize {
                sum += coeffs.ln_beta.get(mi, ku).exp()
                    * (q.c[mi] / q.d.get(mi, ku)).powf(coeffs.omega_eve.get(mi, ku));
            }
            naive += coeffs.omega_user[ku] * (q.a[ku] / q.b[ku]).log2() - sum.ln() / params.alpha;
        }
        let smart = objective_log_lambda(&p, &forms, &coeffs, &params);
        assert_relative_eq!(smart, naive, max_relative = 1e-8);
    }

    #[test]
    fn lower_bound_below_exact_rate() {
        let params = test_params(200);
        for seed in 0..30u64 {
            let drop = small_drop(100 + seed);
            let forms = build_forms(&drop, &params);
            let p = random_precoder(4, 2, 1000 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eps: Vec<f64> = (0..2).map(|_| 10f64.powf(-10.0 * rng.gen::<f64>() - 0.4)).collect();
            let delta = EveUserMat::from_fn(3, 2, |_, _| 10f64.powf(-10.0 * rng.gen::<f64>() - 0.4));
            let coeffs = bound_coeffs_at(&p, &forms, &eps, &delta, &params).unwrap();
            let lb = secrecy_lb(&p, &forms, &coeffs, &params);
            let exact = math::secrecy_rate_exact(&p, &drop, &eps, &delta, &params).unwrap();
            for ku in 0..2 {
                assert!(
                    lb[ku] <= exact[ku] + 1e-9,
                    "bound above exact at seed {seed}, user {ku}: {} > {}",
                    lb[ku],
                    exact[ku]
                );
            }
        }
    }

    #[test]
    fn zero_wiretap_single_eve_bound_reduces_to_user_rate() {
        let config = ScenarioConfig { antennas: 4, users: 2, eves: 1, seed: 77, ..Default::default() };
        let mut drop = generate_drop(&config).unwrap();
        drop.g[0].fill(C64::new(0.0, 0.0));
        let params = test_params(200);
        let forms = build_forms(&drop, &params);
        let p = random_precoder(4, 2, 53);
        let eps = vec![0.5, 0.5];
        let delta = EveUserMat::filled(1, 2, 0.5);
        let coeffs = bound_coeffs_at(&p, &forms, &eps, &delta, &params).unwrap();
        let lb = secrecy_lb(&p, &forms, &coeffs, &params);
        let rho = math::sinr_users(&p, &drop, &params);
        for ku in 0..2 {
            assert_relative_eq!(lb[ku], rho[ku].ln_1p() * LOG2_E, epsilon = 1e-10);
        }
    }
}
