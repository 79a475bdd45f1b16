//! Reference linear precoders: MRT, (regularized) zero forcing, and the
//! eavesdropper-aware variants that spend spare spatial dimensions on
//! nulling the strongest wiretap channels.

use crate::channel::ChannelRealization;
use crate::forms::PrecoderState;
use crate::math::FblParams;
use crate::{C64, CMat, CVec, Error, Result};

/// Which reference precoder to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BaselineKind {
    Mrt,
    Zf,
    Rzf,
    ZfEve,
    RzfEve,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Mrt => "MRT",
            BaselineKind::Zf => "ZF",
            BaselineKind::Rzf => "RZF",
            BaselineKind::ZfEve => "ZF-EVE",
            BaselineKind::RzfEve => "RZF-EVE",
        }
    }
}

/// Default starting point for the power iteration: the regularized
/// zero-forcing beams (interference-aware, so the iteration starts close
/// to its fixed point), falling back to matched filtering when the user
/// channel matrix is rank deficient.
pub fn default_gpi_init(
    channels: &ChannelRealization,
    params: &FblParams,
) -> Result<PrecoderState> {
    match baseline_precoder(BaselineKind::Rzf, channels, params) {
        Ok(p) => Ok(p),
        Err(_) => mrt_precoder(channels),
    }
}

/// Matched-filter precoder: per-user beams along the channel directions,
/// equal power.
pub fn mrt_precoder(channels: &ChannelRealization) -> Result<PrecoderState> {
    let cols: Vec<CVec> = channels
        .h
        .iter()
        .map(|h| {
            let norm = h.norm();
            h / C64::new(norm, 0.0)
        })
        .collect();
    PrecoderState::from_columns(&cols)
}

// Columns of M (M^H M + kappa I)^{-1} restricted to the first `keep`
// columns. kappa = 0 is the plain pseudo-inverse and goes through a
// column-equilibrated QR: forming the gram matrix squares the condition
// number and loses the deep nulls the zero-forcing variants are for.
fn precoder_columns(m: &CMat, kappa: f64, keep: usize, kind: &str) -> Result<Vec<CVec>> {
    if kappa == 0.0 {
        return pinv_columns_qr(m, keep, kind);
    }
    let mut gram = m.adjoint() * m;
    for i in 0..gram.nrows() {
        gram[(i, i)] += C64::new(kappa, 0.0);
    }
    let chol = nalgebra::linalg::Cholesky::new(gram)
        .ok_or_else(|| Error::RankDeficient { kind: kind.to_string() })?;
    let inv = chol.inverse();
    let w = m * inv;
    Ok((0..keep).map(|k| w.column(k).clone_owned()).collect())
}

// W = M (M^H M)^{-1} via thin QR of the column-normalized matrix:
// with M = Q R, W = Q R^{-H}; per-column scales divide back out.
fn pinv_columns_qr(m: &CMat, keep: usize, kind: &str) -> Result<Vec<CVec>> {
    let cols = m.ncols();
    let mut scaled = m.clone();
    let mut norms = Vec::with_capacity(cols);
    for j in 0..cols {
        let norm = scaled.column(j).norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::RankDeficient { kind: kind.to_string() });
        }
        let inv = C64::new(1.0 / norm, 0.0);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= inv;
        }
        norms.push(norm);
    }
    let qr = scaled.qr();
    let r = qr.r();
    for j in 0..cols {
        // Normalized columns put the diagonal at O(1); a tiny pivot means
        // genuinely dependent channels.
        if r[(j, j)].norm() < 1e-10 {
            return Err(Error::RankDeficient { kind: kind.to_string() });
        }
    }
    let inv_l = r
        .adjoint()
        .solve_lower_triangular(&CMat::identity(cols, cols))
        .ok_or_else(|| Error::RankDeficient { kind: kind.to_string() })?;
    let w = qr.q() * inv_l;
    Ok((0..keep)
        .map(|k| w.column(k).clone_owned() / C64::new(norms[k], 0.0))
        .collect())
}

// Scaled legitimate channel matrix [sqrt(gamma_k) h_k].
fn user_matrix(channels: &ChannelRealization) -> CMat {
    let n = channels.antennas();
    let k = channels.users();
    CMat::from_fn(n, k, |i, j| channels.h[j][i] * C64::new(channels.gamma[j].sqrt(), 0.0))
}

/// Indices of the strongest wiretap channels by received power
/// `gamma^e_m ||g_m||^2`, descending, ties broken by lower index.
pub fn strongest_eves(channels: &ChannelRealization, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..channels.eves()).collect();
    idx.sort_by(|&a, &b| {
        let pa = channels.gamma_e[a] * channels.g[a].norm_squared();
        let pb = channels.gamma_e[b] * channels.g[b].norm_squared();
        pb.partial_cmp(&pa).unwrap().then(a.cmp(&b))
    });
    idx.truncate(count);
    idx
}

/// Build the requested reference precoder, stacked and normalized to unit
/// total power.
pub fn baseline_precoder(
    kind: BaselineKind,
    channels: &ChannelRealization,
    params: &FblParams,
) -> Result<PrecoderState> {
    let n = channels.antennas();
    let k = channels.users();
    let kappa = k as f64 * params.noise_user / params.symbol_power;
    match kind {
        BaselineKind::Mrt => mrt_precoder(channels),
        BaselineKind::Zf | BaselineKind::Rzf => {
            if n < k {
                return Err(Error::Config(format!(
                    "{} needs antennas >= users, got N={n} K={k}",
                    kind.name()
                )));
            }
            let h = user_matrix(channels);
            let reg = if kind == BaselineKind::Zf { 0.0 } else { kappa };
            let cols = precoder_columns(&h, reg, k, kind.name())?;
            PrecoderState::from_columns(&cols)
        }
        BaselineKind::ZfEve | BaselineKind::RzfEve => {
            if n <= k {
                return Err(Error::Config(format!(
                    "{} needs at least one spare antenna, got N={n} K={k}",
                    kind.name()
                )));
            }
            let spare = (n - k).min(channels.eves());
            let picks = strongest_eves(channels, spare);
            let mut aug = CMat::zeros(n, k + picks.len());
            aug.view_mut((0, 0), (n, k)).copy_from(&user_matrix(channels));
            for (j, &mi) in picks.iter().enumerate() {
                let scale = C64::new(channels.gamma_e[mi].sqrt(), 0.0);
                for i in 0..n {
                    aug[(i, k + j)] = channels.g[mi][i] * scale;
                }
            }
            let reg = if kind == BaselineKind::ZfEve { 0.0 } else { kappa };
            let cols = precoder_columns(&aug, reg, k, kind.name())?;
            PrecoderState::from_columns(&cols)
        }
    }
}
