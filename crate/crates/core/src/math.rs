//! Scalar numerical primitives shared by every optimization stage.
//!
//! The finite-blocklength rate penalties are built from the Gaussian tail
//! function `Q`, its inverse, and the channel dispersion
//! `V(rho) = 2 rho / (1 + rho) * (log2 e)^2`. Reliability targets reach down
//! to 1e-11 (and the closed-form minimizers push them further), so `Q^{-1}`
//! must stay accurate deep into the tail: a rational quantile approximation
//! is polished with Halley steps of the exact Gaussian density, giving
//! round-trip accuracy of ~1e-14 relative down to p = 1e-300.
//!
//! The smooth-max approximation of the worst-case wiretap term and the
//! tangent-line bound on the square-root dispersion term also live here;
//! both are evaluated in shifted log domain so large sharpness parameters
//! do not overflow.

use crate::channel::ChannelRealization;
use crate::forms::PrecoderState;
use crate::{Error, EveUserMat, Result};

/// log2(e), the nat-to-bit conversion factor.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Global simulation parameters for one finite-blocklength instance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FblParams {
    /// Coding blocklength in channel uses.
    pub blocklength: u32,
    /// Per-symbol transmit power, linear watts.
    pub symbol_power: f64,
    /// Noise power at legitimate users, linear watts.
    pub noise_user: f64,
    /// Noise power at eavesdroppers, linear watts.
    pub noise_eve: f64,
    /// Sharpness of the smooth-max approximation.
    pub alpha: f64,
    /// Rate-vs-reliability weight in [0, 1].
    pub weight: f64,
}

impl FblParams {
    pub fn validate(&self) -> Result<()> {
        if self.blocklength < 1 {
            return Err(Error::Config("blocklength must be >= 1".into()));
        }
        for (name, v) in [
            ("symbol_power", self.symbol_power),
            ("noise_user", self.noise_user),
            ("noise_eve", self.noise_eve),
            ("alpha", self.alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::Config(format!(
                "weight must be in [0, 1], got {}",
                self.weight
            )));
        }
        Ok(())
    }

    /// Noise-to-power loading for legitimate links.
    #[inline]
    pub fn user_loading(&self) -> f64 {
        self.noise_user / self.symbol_power
    }

    /// Noise-to-power loading for wiretap links.
    #[inline]
    pub fn eve_loading(&self) -> f64 {
        self.noise_eve / self.symbol_power
    }
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
///
/// Monotone decreasing, total on finite reals.
#[inline]
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Rational quantile approximation (Acklam), |relative error| < 1.15e-9,
// used as the seed for the Halley polish below.
fn quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse Gaussian tail function: the `x` with `Q(x) = p`.
///
/// Strictly decreasing in `p`; accurate down to `p = 1e-300`.
pub fn gaussian_q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "gaussian_q_inv",
            format!("p must lie in (0, 1), got {p}"),
        ));
    }
    // Phi^{-1}(p) = -Q^{-1}(p).
    let mut x = -quantile_seed(p);
    // Halley polish on f(x) = Q(x) - p; two steps leave the round-trip error
    // at the level of the erfc evaluation itself (~1 ulp).
    for _ in 0..2 {
        let e = gaussian_q(x) - p;
        if e == 0.0 {
            break;
        }
        let pdf = normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        x += 2.0 * e / (2.0 * pdf - e * x);
    }
    Ok(x)
}

/// Channel dispersion `V(rho) = 2 rho / (1 + rho) * (log2 e)^2`.
///
/// Monotone increasing in `rho`, bounded by `2 (log2 e)^2`.
pub fn dispersion(rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::domain(
            "dispersion",
            format!("SINR must be nonnegative, got {rho}"),
        ));
    }
    Ok(2.0 * rho / (1.0 + rho) * LOG2_E * LOG2_E)
}

/// Shifted log-sum-exp: `ln(sum_i exp(v_i))`, stable for any magnitudes.
///
/// Returns `NEG_INFINITY` on an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    let sum: f64 = values.iter().map(|v| (v - hi).exp()).sum();
    hi + sum.ln()
}

/// Smooth maximum `(1/alpha) ln sum_i exp(alpha x_i)`.
///
/// Over-approximates max by at most `ln(len)/alpha`.
pub fn smooth_max(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("smooth_max", "empty value list"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(
            "smooth_max",
            format!("alpha must be positive, got {alpha}"),
        ));
    }
    let scaled: Vec<f64> = values.iter().map(|v| v * alpha).collect();
    Ok(log_sum_exp(&scaled) / alpha)
}

/// Tangent-line majorization of the square-root dispersion factor.
///
/// For any anchor `rho_t > 0` returns `(q, r)` with
/// `sqrt(2x/(1+x)) <= q ln(1+x) + r` for all `x > 0`, with equality at
/// `x = rho_t`. This is what turns the back-off term into a multiple of the
/// log-rate so the objective collapses to a product of Rayleigh quotients.
pub fn dispersion_sqrt_tangent(rho_t: f64) -> Result<(f64, f64)> {
    if !(rho_t > 0.0) {
        return Err(Error::domain(
            "dispersion_sqrt_tangent",
            format!("anchor SINR must be positive, got {rho_t}"),
        ));
    }
    let q = 1.0 / (2.0 * rho_t * (1.0 + rho_t)).sqrt();
    let r = (2.0 * rho_t / (1.0 + rho_t)).sqrt() - q * rho_t.ln_1p();
    Ok((q, r))
}

/// SINRs of every legitimate user for a given precoder (direct evaluation).
pub fn sinr_users(
    precoder: &PrecoderState,
    channels: &ChannelRealization,
    params: &FblParams,
) -> Vec<f64> {
    let k = channels.users();
    let mut out = Vec::with_capacity(k);
    for ku in 0..k {
        let h = &channels.h[ku];
        let mut signal = 0.0;
        let mut interference = 0.0;
        for l in 0..k {
            let gain = channels.gamma[ku] * h.dotc(&precoder.user(l)).norm_sqr();
            if l == ku {
                signal = gain;
            } else {
                interference += gain;
            }
        }
        out.push(signal / (interference + params.user_loading()));
    }
    out
}

/// SINRs of every (eavesdropper, user) stream pair (direct evaluation).
pub fn sinr_eves(
    precoder: &PrecoderState,
    channels: &ChannelRealization,
    params: &FblParams,
) -> EveUserMat {
    let k = channels.users();
    let m = channels.eves();
    EveUserMat::from_fn(m, k, |mi, ki| {
        let g = &channels.g[mi];
        let mut signal = 0.0;
        let mut interference = 0.0;
        for l in 0..k {
            let gain = channels.gamma_e[mi] * g.dotc(&precoder.user(l)).norm_sqr();
            if l == ki {
                signal = gain;
            } else {
                interference += gain;
            }
        }
        signal / (interference + params.eve_loading())
    })
}

/// Per-user finite-blocklength secrecy rate.
///
/// `R_k - sqrt(V_k/L) Q^{-1}(eps_k) - max_m { R^e_{m,k} + sqrt(V^e_{m,k}/L)
/// Q^{-1}(delta_{m,k}) }`, evaluated with the exact per-stream SINRs. The
/// raw value may be negative; see [`clip_rates`] for the reporting variant.
pub fn secrecy_rate_exact(
    precoder: &PrecoderState,
    channels: &ChannelRealization,
    eps: &[f64],
    delta: &EveUserMat,
    params: &FblParams,
) -> Result<Vec<f64>> {
    let k = channels.users();
    let m = channels.eves();
    debug_assert_eq!(eps.len(), k);
    debug_assert_eq!((delta.eves(), delta.users()), (m, k));
    let l = params.blocklength as f64;
    let rho_u = sinr_users(precoder, channels, params);
    let rho_e = sinr_eves(precoder, channels, params);

    let mut rates = Vec::with_capacity(k);
    for ku in 0..k {
        let user_rate = rho_u[ku].ln_1p() * LOG2_E;
        let backoff = (dispersion(rho_u[ku])? / l).sqrt() * gaussian_q_inv(eps[ku])?;
        let mut worst_eve = f64::NEG_INFINITY;
        for mi in 0..m {
            let re = rho_e.get(mi, ku).ln_1p() * LOG2_E;
            let be =
                (dispersion(rho_e.get(mi, ku))? / l).sqrt() * gaussian_q_inv(delta.get(mi, ku))?;
            worst_eve = worst_eve.max(re + be);
        }
        rates.push(user_rate - backoff - worst_eve);
    }
    Ok(rates)
}

/// Per-user secrecy rate with the back-off terms removed (infinite
/// blocklength limit).
pub fn secrecy_rate_infinite(
    precoder: &PrecoderState,
    channels: &ChannelRealization,
    params: &FblParams,
) -> Vec<f64> {
    let k = channels.users();
    let m = channels.eves();
    let rho_u = sinr_users(precoder, channels, params);
    let rho_e = sinr_eves(precoder, channels, params);
    (0..k)
        .map(|ku| {
            let worst = (0..m)
                .map(|mi| rho_e.get(mi, ku).ln_1p() * LOG2_E)
                .fold(f64::NEG_INFINITY, f64::max);
            rho_u[ku].ln_1p() * LOG2_E - worst
        })
        .collect()
}

/// Clip per-user rates at zero for reporting.
pub fn clip_rates(rates: &[f64]) -> Vec<f64> {
    rates.iter().map(|r| r.max(0.0)).collect()
}
