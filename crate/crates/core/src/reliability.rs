//! Closed-form optimal error probability and information leakage for a
//! fixed precoder.
//!
//! For a given precoder the weighted-sum problem over the error vector and
//! the leakage grid is convex (the inverse tail function is convex below
//! one half), and its KKT conditions say each entry sits either at its cap
//! or at a common level: `tau` for the error side, `xi` for the leakage
//! side. The common level satisfies a stationarity relation whose solution
//! is `Q(sqrt(2 ln A))` with `A` the ratio of the reliability weight to the
//! rate weight times the relevant dispersion mass. What remains is a small
//! combinatorial search for the set of entries that stay capped, done
//! exhaustively over the sorted caps.
//!
//! An `A <= 1` signals the cap-saturated regime (reliability weight too
//! small to pull below the caps): every entry stays at its cap.

use crate::forms::{PrecoderState, QuadraticFormSet};
use crate::math::{dispersion, gaussian_q, gaussian_q_inv, FblParams};
use crate::{Error, EveUserMat, Result};

/// Smallest probability the closed forms return; keeps every output inside
/// the open interval required by the inverse tail function. Reached only
/// when the relevant dispersion mass is zero (fully nulled links).
pub const PROB_FLOOR: f64 = 1e-300;

/// Guard for the normalization constant when a degenerate drop yields a
/// non-positive infinite-blocklength rate.
pub(crate) const R_INF_FLOOR: f64 = 1e-12;

/// Per-user error caps and per-(eve, user) leakage caps.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReliabilityCaps {
    pub eps_hat: Vec<f64>,
    pub delta_hat: EveUserMat,
}

impl ReliabilityCaps {
    /// Caps evenly spaced over `[lo, hi]` in index order, identical leakage
    /// caps across users for each eavesdropper.
    pub fn evenly_spaced(users: usize, eves: usize, lo: f64, hi: f64) -> Self {
        let step = |i: usize, n: usize| {
            if n <= 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        Self {
            eps_hat: (0..users).map(|k| step(k, users)).collect(),
            delta_hat: EveUserMat::from_fn(eves, users, |m, _| step(m, eves)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_hat.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(Error::Config("error caps must lie in (0, 1/2)".into()));
        }
        if self.delta_hat.iter().any(|(_, _, d)| !(d > 0.0 && d < 0.5)) {
            return Err(Error::Config("leakage caps must lie in (0, 1/2)".into()));
        }
        Ok(())
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_hat.max()
    }
}

/// Optimized reliability point for one precoder.
#[derive(Debug, Clone)]
pub struct ReliabilityState {
    /// Per-user error probabilities.
    pub eps: Vec<f64>,
    /// Per-(eve, user) leakage rates.
    pub delta: EveUserMat,
    /// `max_k eps_k`.
    pub tau: f64,
    /// `max_{m,k} delta_{m,k}`.
    pub xi: f64,
    /// 1-based threshold in the cap-sorted user order: users at positions
    /// `>= ell` share the common level. `K + 1` means every user is capped.
    pub ell: usize,
    /// Per-user-column 1-based thresholds for the leakage grid; `M + 1`
    /// means the whole column is capped.
    pub j_of_k: Vec<usize>,
    /// The error side returned all caps (common level above every cap).
    pub eps_saturated: bool,
    /// The leakage side returned all caps.
    pub delta_saturated: bool,
}

/// Common error level for the uncapped tail: `Q(sqrt(2 ln A))` with
/// `A = sqrt(L) (1-w) R_inf / (eps_hat_max w sqrt(2 pi) sum sqrt(V))`.
///
/// `None` signals the cap-saturated regime (`A <= 1`, e.g. `w` near one or
/// a non-positive normalization constant): the caller keeps every entry at
/// its cap. A zero dispersion sum drives the level to the floor instead.
pub fn tau_star(
    dispersions_tail: &[f64],
    r_inf: f64,
    weight: f64,
    cap_max: f64,
    blocklength: u32,
) -> Option<f64> {
    let sqrt_v_sum: f64 = dispersions_tail.iter().map(|v| v.sqrt()).sum();
    let l = blocklength as f64;
    let denom = cap_max * weight * (2.0 * std::f64::consts::PI).sqrt() * sqrt_v_sum;
    let numer = l.sqrt() * (1.0 - weight) * r_inf;
    if denom == 0.0 {
        // Either w = 0 (reliability term dominates completely) or all
        // relevant links are fully nulled; both push the level to zero.
        return (numer > 0.0).then_some(PROB_FLOOR);
    }
    let a = numer / denom;
    if !(a > 1.0) {
        return None;
    }
    Some(gaussian_q((2.0 * a.ln()).sqrt()).max(PROB_FLOOR))
}

/// Common leakage level; same closed form with the leakage cap and the
/// wiretap dispersion mass.
pub fn xi_star(
    dispersions_tail: &[f64],
    r_inf: f64,
    weight: f64,
    cap_max: f64,
    blocklength: u32,
) -> Option<f64> {
    tau_star(dispersions_tail, r_inf, weight, cap_max, blocklength)
}

/// The scalar minimization objective both search loops compare against:
/// weighted dispersion back-off mass plus the normalized worst-case levels.
pub fn phase2_objective(
    eps: &[f64],
    delta: &EveUserMat,
    v_user: &[f64],
    v_eve: &EveUserMat,
    r_inf: f64,
    caps: &ReliabilityCaps,
    params: &FblParams,
) -> Result<f64> {
    let l = params.blocklength as f64;
    let w = params.weight;
    let r = r_inf.max(R_INF_FLOOR);
    let mut backoff = 0.0;
    for (k, &e) in eps.iter().enumerate() {
        backoff += (v_user[k] / l).sqrt() * gaussian_q_inv(e)?;
    }
    for (m, k, d) in delta.iter() {
        backoff += (v_eve.get(m, k) / l).sqrt() * gaussian_q_inv(d)?;
    }
    let tau = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xi = delta.max();
    Ok(w / r * backoff + (1.0 - w) * (tau / caps.eps_max() + xi / caps.delta_max()))
}

struct ErrorSideSolution {
    eps: Vec<f64>,
    tau: f64,
    ell: usize,
    saturated: bool,
}

// Exhaustive threshold search over the sorted caps. Every candidate is
// assembled feasibly (levels clipped at caps) and scored by its share of
// the minimization objective; the consistent candidate wins that score
// when it exists.
fn solve_error_side(
    v_user: &[f64],
    caps: &[f64],
    r_inf: f64,
    params: &FblParams,
    norm_cap: f64,
) -> Result<ErrorSideSolution> {
    let k = caps.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| caps[a].partial_cmp(&caps[b]).unwrap().then(a.cmp(&b)));
    let sorted_caps: Vec<f64> = order.iter().map(|&i| caps[i]).collect();
    let sorted_v: Vec<f64> = order.iter().map(|&i| v_user[i]).collect();
    let l = params.blocklength as f64;
    let w = params.weight;
    let r = r_inf.max(R_INF_FLOOR);

    let score = |eps_sorted: &[f64]| -> Result<f64> {
        let mut backoff = 0.0;
        for (i, &e) in eps_sorted.iter().enumerate() {
            backoff += (sorted_v[i] / l).sqrt() * gaussian_q_inv(e)?;
        }
        let tau = eps_sorted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(w / r * backoff + (1.0 - w) * tau / norm_cap)
    };

    // All-caps fallback candidate.
    let mut best_eps = sorted_caps.clone();
    let mut best_score = score(&best_eps)?;
    let mut best_ell = k + 1;
    let mut best_tau = None;
    let mut found_consistent = false;

    for ell in 1..=k {
        let Some(tau) = tau_star(&sorted_v[ell - 1..], r_inf, w, norm_cap, params.blocklength)
        else {
            continue;
        };
        let lower = if ell >= 2 { sorted_caps[ell - 2] } else { 0.0 };
        let consistent = tau > lower && tau <= sorted_caps[ell - 1];
        let mut eps_sorted = sorted_caps.clone();
        for e in eps_sorted.iter_mut().skip(ell - 1) {
            *e = tau.min(*e);
        }
        let s = score(&eps_sorted)?;
        let better = if consistent && !found_consistent {
            true
        } else if !consistent && found_consistent {
            false
        } else {
            s < best_score
        };
        if better {
            best_score = s;
            best_eps = eps_sorted;
            best_ell = ell;
            best_tau = Some(tau);
            found_consistent |= consistent;
        }
    }

    // Undo the sort.
    let mut eps = vec![0.0; k];
    for (pos, &user) in order.iter().enumerate() {
        eps[user] = best_eps[pos];
    }
    let saturated = best_tau.is_none();
    let tau = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ErrorSideSolution { eps, tau, ell: best_ell, saturated })
}

struct LeakSideSolution {
    delta: EveUserMat,
    xi: f64,
    j_of_k: Vec<usize>,
    saturated: bool,
}

fn assemble_leak(
    entries: &[(usize, usize)],
    caps: &EveUserMat,
    cut: usize,
    xi: Option<f64>,
) -> EveUserMat {
    let mut delta = caps.clone();
    if let Some(level) = xi {
        for &(m, k) in &entries[cut..] {
            let c = caps.get(m, k);
            delta.set(m, k, level.min(c));
        }
    }
    delta
}

// Leakage side: the active set is determined by a single global threshold on
// the caps. A fixed-point pass (recompute the level, reassign the active
// set) handles the typical case in a couple of rounds; the exhaustive scan
// over all cut points backs it up and the better-scoring state wins.
fn solve_leak_side(
    v_eve: &EveUserMat,
    caps: &EveUserMat,
    r_inf: f64,
    params: &FblParams,
    norm_cap: f64,
) -> Result<LeakSideSolution> {
    let m = caps.eves();
    let k = caps.users();
    let mut entries: Vec<(usize, usize)> = Vec::with_capacity(m * k);
    for ku in 0..k {
        for mi in 0..m {
            entries.push((mi, ku));
        }
    }
    entries.sort_by(|&(m1, k1), &(m2, k2)| {
        caps.get(m1, k1)
            .partial_cmp(&caps.get(m2, k2))
            .unwrap()
            .then((k1, m1).cmp(&(k2, m2)))
    });
    let total = entries.len();
    let l = params.blocklength as f64;
    let w = params.weight;
    let r = r_inf.max(R_INF_FLOOR);

    let tail_dispersions = |cut: usize| -> Vec<f64> {
        entries[cut..].iter().map(|&(mi, ku)| v_eve.get(mi, ku)).collect()
    };
    let score = |delta: &EveUserMat| -> Result<f64> {
        let mut backoff = 0.0;
        for (mi, ku, d) in delta.iter() {
            backoff += (v_eve.get(mi, ku) / l).sqrt() * gaussian_q_inv(d)?;
        }
        Ok(w / r * backoff + (1.0 - w) * delta.max() / norm_cap)
    };

    // Fixed-point pass: start with everything active.
    let mut cut = 0usize;
    let mut fixed_point: Option<usize> = None;
    for _ in 0..=total {
        match xi_star(&tail_dispersions(cut), r_inf, w, norm_cap, params.blocklength) {
            None => {
                // Saturated for this active set: caps win.
                fixed_point = None;
                break;
            }
            Some(level) => {
                let next = entries.partition_point(|&(mi, ku)| caps.get(mi, ku) < level);
                if next == cut {
                    fixed_point = Some(cut);
                    break;
                }
                cut = next;
            }
        }
    }

    let mut best: Option<(f64, usize, Option<f64>, EveUserMat)> = None;
    let mut consider = |cut: usize, xi: Option<f64>| -> Result<()> {
        let delta = assemble_leak(&entries, caps, cut, xi);
        let s = score(&delta)?;
        if best.as_ref().map_or(true, |(bs, ..)| s < *bs) {
            best = Some((s, cut, xi, delta));
        }
        Ok(())
    };

    if let Some(fp) = fixed_point {
        let xi = xi_star(&tail_dispersions(fp), r_inf, w, norm_cap, params.blocklength);
        consider(fp, xi)?;
    }
    // Exhaustive scan over every cut point plus the all-caps state.
    for cut in 0..total {
        let xi = xi_star(&tail_dispersions(cut), r_inf, w, norm_cap, params.blocklength);
        if xi.is_some() {
            consider(cut, xi)?;
        }
    }
    consider(total, None)?;

    let (_, _, xi_opt, delta) = best.expect("at least the all-caps candidate exists");
    let saturated = xi_opt.is_none();
    // Per-column thresholds implied by the winning level: entries whose cap
    // sits below the level stay capped.
    let j_of_k: Vec<usize> = (0..k)
        .map(|ku| match xi_opt {
            None => m + 1,
            Some(level) => (0..m).filter(|&mi| caps.get(mi, ku) < level).count() + 1,
        })
        .collect();
    let xi = delta.max();
    Ok(LeakSideSolution { delta, xi, j_of_k, saturated })
}

/// Optimal `(eps, delta)` for a fixed precoder, its dispersion state read
/// from `forms` (use covariance forms and the matching normalization
/// constant for the partial-CSIT variant).
pub fn solve_phase2(
    precoder: &PrecoderState,
    forms: &QuadraticFormSet,
    caps: &ReliabilityCaps,
    r_inf: f64,
    params: &FblParams,
) -> Result<ReliabilityState> {
    caps.validate()?;
    params.validate()?;
    let quads = forms.quad_values(precoder);
    let k = forms.users();
    let m = forms.eves();
    let v_user: Vec<f64> =
        (0..k).map(|ku| dispersion(quads.sinr_user(ku).max(0.0))).collect::<Result<_>>()?;
    let v_eve = {
        let mut v = EveUserMat::filled(m, k, 0.0);
        for ku in 0..k {
            for mi in 0..m {
                v.set(mi, ku, dispersion(quads.sinr_eve(mi, ku).max(0.0))?);
            }
        }
        v
    };

    let err = solve_error_side(&v_user, &caps.eps_hat, r_inf, params, caps.eps_max())?;
    let leak = solve_leak_side(&v_eve, &caps.delta_hat, r_inf, params, caps.delta_max())?;

    Ok(ReliabilityState {
        eps: err.eps,
        delta: leak.delta,
        tau: err.tau,
        xi: leak.xi,
        ell: err.ell,
        j_of_k: leak.j_of_k,
        eps_saturated: err.saturated,
        delta_saturated: leak.saturated,
    })
}

/// Partial-CSIT variant: identical machinery over the covariance-averaged
/// dispersions and the matching normalization constant.
pub fn solve_phase2_partial(
    precoder: &PrecoderState,
    barred_forms: &QuadraticFormSet,
    caps: &ReliabilityCaps,
    r_inf_barred: f64,
    params: &FblParams,
) -> Result<ReliabilityState> {
    solve_phase2(precoder, barred_forms, caps, r_inf_barred, params)
}
