//! Alternating joint optimization: precoder updates and closed-form
//! reliability updates, stopped by a weighted-sum objective.
//!
//! Each outer round runs the power iteration at the current error/leakage
//! point, then recomputes the closed-form optimal error/leakage at the new
//! precoder. The normalization constant (the infinite-blocklength sum
//! secrecy rate of the back-off-free solver) depends only on the channel,
//! so it is computed once per drop and reused. Alternation carries no
//! monotonicity guarantee, so the trajectory is recorded and the
//! best-objective iterate is returned; the initialization point (matched
//! filter at the caps) is entry zero of the trajectory, which makes
//! improvement over the starting point structural.

use crate::baselines::default_gpi_init;
use crate::channel::ChannelRealization;
use crate::forms::{build_forms, build_forms_partial, CsitMode, PrecoderState, QuadraticFormSet};
use crate::gpi::{gpi_solve, gpi_solve_infinite_blocklength, GpiObjective, GpiResult, GpiSettings};
use crate::math::FblParams;
use crate::reliability::{solve_phase2, ReliabilityCaps};
use crate::{Error, EveUserMat, Result};

/// Controls for the outer alternation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JointSettings {
    /// Stop once the objective increment drops to this level (negative
    /// increments stop too; the best iterate is returned either way).
    pub outer_tol: f64,
    /// Outer iteration cap.
    pub outer_max_iters: usize,
    /// Inner power-iteration controls.
    pub gpi: GpiSettings,
    /// Wiretap channel knowledge the optimizer is allowed to use.
    pub csit: CsitMode,
}

impl Default for JointSettings {
    fn default() -> Self {
        Self {
            outer_tol: 0.01,
            outer_max_iters: 5,
            gpi: GpiSettings::default(),
            csit: CsitMode::Perfect,
        }
    }
}

/// Output of one joint solve.
#[derive(Debug, Clone)]
pub struct JointResult {
    pub precoder: PrecoderState,
    pub eps: Vec<f64>,
    pub delta: EveUserMat,
    /// Weighted objective at the initialization point and after every
    /// outer round.
    pub objective_traj: Vec<f64>,
    /// Normalization constant used by the weighted objective.
    pub r_inf: f64,
    /// Sum secrecy rate at the returned point, evaluated on the true
    /// channels (raw, possibly negative).
    pub sum_secrecy: f64,
    /// Same with per-user clipping at zero.
    pub sum_secrecy_clipped: f64,
    pub max_error: f64,
    pub max_leakage: f64,
    pub outer_iters: usize,
    /// Total inner power-iteration updates across the run (including the
    /// normalization solve).
    pub inner_iters: usize,
}

/// Weighted-sum objective: normalized sum secrecy rate plus the headroom of
/// the worst error probability and worst leakage rate under their caps.
///
/// Rates are read from `forms`, so the covariance variant scores itself
/// with the information it actually has.
pub fn weighted_objective(
    precoder: &PrecoderState,
    forms: &QuadraticFormSet,
    eps: &[f64],
    delta: &EveUserMat,
    r_inf: f64,
    caps: &ReliabilityCaps,
    params: &FblParams,
) -> Result<f64> {
    let w = params.weight;
    let rates = forms.secrecy_rates(precoder, eps, delta, params)?;
    let sum: f64 = rates.iter().sum();
    let tau = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xi = delta.max();
    let r = r_inf.max(crate::reliability::R_INF_FLOOR);
    Ok(w / r * sum
        + (1.0 - w)
            * ((caps.eps_max() - tau) / caps.eps_max() + (caps.delta_max() - xi) / caps.delta_max()))
}

/// Run the alternating optimization on one channel drop.
pub fn joint_solve(
    channels: &ChannelRealization,
    caps: &ReliabilityCaps,
    params: &FblParams,
    settings: &JointSettings,
) -> Result<JointResult> {
    params.validate()?;
    caps.validate()?;
    if settings.outer_max_iters < 1 || !(settings.outer_tol > 0.0) {
        return Err(Error::Config(
            "joint settings need outer_max_iters >= 1 and outer_tol > 0".into(),
        ));
    }
    let forms = match settings.csit {
        CsitMode::Perfect => build_forms(channels, params),
        CsitMode::Covariance => build_forms_partial(channels, params),
    };
    let init = default_gpi_init(channels, params)?;
    let mut inner_iters = 0usize;

    // Normalization constant: depends only on the channel, computed once.
    let (norm_run, r_inf) =
        gpi_solve_infinite_blocklength(&forms, params, &settings.gpi, &init)?;
    inner_iters += norm_run.iterations;

    let mut eps = caps.eps_hat.clone();
    let mut delta = caps.delta_hat.clone();
    let mut current = init.clone();
    let mut objective_traj =
        vec![weighted_objective(&current, &forms, &eps, &delta, r_inf, caps, params)?];
    let mut best = (objective_traj[0], current.clone(), eps.clone(), delta.clone());
    let mut outer_iters = 0usize;

    for _ in 1..=settings.outer_max_iters {
        let run: GpiResult = gpi_solve(
            &forms,
            GpiObjective::Secrecy { eps: &eps, delta: &delta },
            params,
            &settings.gpi,
            &current,
        )?;
        inner_iters += run.iterations;
        current = run.precoder;

        let rel = solve_phase2(&current, &forms, caps, r_inf, params)?;
        eps = rel.eps;
        delta = rel.delta;

        let obj = weighted_objective(&current, &forms, &eps, &delta, r_inf, caps, params)?;
        let increment = obj - *objective_traj.last().unwrap();
        objective_traj.push(obj);
        outer_iters += 1;
        if obj > best.0 {
            best = (obj, current.clone(), eps.clone(), delta.clone());
        }
        if increment <= settings.outer_tol {
            break;
        }
    }

    let (_, precoder, eps, delta) = best;
    // Reported rates always use the true channels, whatever the optimizer
    // was allowed to see.
    let rates = crate::math::secrecy_rate_exact(&precoder, channels, &eps, &delta, params)?;
    let sum_secrecy: f64 = rates.iter().sum();
    let sum_secrecy_clipped: f64 = crate::math::clip_rates(&rates).iter().sum();
    let max_error = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_leakage = delta.max();

    Ok(JointResult {
        precoder,
        eps,
        delta,
        objective_traj,
        r_inf,
        sum_secrecy,
        sum_secrecy_clipped,
        max_error,
        max_leakage,
        outer_iters,
        inner_iters,
    })
}
