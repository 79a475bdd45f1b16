//! Secure precoding and reliability optimization for multi-user downlink
//! channels coded at finite blocklength.
//!
//! An access point with `N` antennas serves `K` single-antenna users while
//! `M` single-antenna eavesdroppers overhear. Short-packet coding makes the
//! achievable secrecy rate pay a dispersion back-off that couples the
//! precoder with the per-user decoding error probabilities and the
//! per-eavesdropper information leakage rates. This crate implements the
//! whole optimization stack:
//!
//! * [`math`] — Gaussian Q / inverse-Q, channel dispersion, smooth max and
//!   the tangent-bound coefficients used to linearize the back-off terms.
//! * [`channel`] — scenario geometry, ITU-R indoor pathloss, one-ring
//!   spatial covariances and seeded Monte-Carlo channel drops.
//! * [`forms`] — block-diagonal Hermitian quadratic forms behind the
//!   Rayleigh-quotient objective, for both perfect and covariance-only
//!   wiretap channel knowledge.
//! * [`gpi`] — the generalized power iteration that drives the precoder to
//!   a stationary point of the smoothed secrecy objective.
//! * [`reliability`] — closed-form optimal maximum error probability and
//!   leakage rate for a fixed precoder.
//! * [`joint`] — the alternating two-phase algorithm combining the above.
//! * [`baselines`] — MRT/ZF/RZF reference precoders and their
//!   eavesdropper-nulling variants.
//! * [`harness`] — deterministic Monte-Carlo sweeps with CSV/JSON output.

pub mod baselines;
pub mod channel;
pub mod forms;
pub mod gpi;
pub mod harness;
pub mod joint;
pub mod math;
pub mod reliability;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dynamically sized complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dynamically sized complex vector.
pub type CVec = nalgebra::DVector<C64>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },
    /// A matrix expected to be positive (semi-)definite was not.
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    /// A linear system or pseudo-inverse was rank deficient.
    #[error("rank-deficient system while constructing {kind}")]
    RankDeficient { kind: String },
    /// Configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A non-finite value surfaced where a finite one is required.
    #[error("non-finite value in {op}: {msg}")]
    NonFinite { op: &'static str, msg: String },
    /// I/O failure with path context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }
}

/// Convenience result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Dense row-major `M x K` grid of per-(eavesdropper, user) scalars.
///
/// Used for leakage rates, leakage caps and the per-pair bound
/// coefficients. Entry `(m, k)` refers to eavesdropper `m` and user `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveUserMat {
    m: usize,
    k: usize,
    data: Vec<f64>,
}

impl EveUserMat {
    pub fn filled(m: usize, k: usize, value: f64) -> Self {
        Self { m, k, data: vec![value; m * k] }
    }

    pub fn from_fn(m: usize, k: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(m * k);
        for ki in 0..k {
            for mi in 0..m {
                data.push(f(mi, ki));
            }
        }
        Self { m, k, data }
    }

    #[inline]
    pub fn eves(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn users(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.data[k * self.m + m]
    }

    #[inline]
    pub fn set(&mut self, m: usize, k: usize, value: f64) {
        self.data[k * self.m + m] = value;
    }

    /// Maximum entry; `NEG_INFINITY` for an empty grid.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Iterate `(m, k, value)` in column-major (per-user) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.m;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i % m, i / m, v))
    }
}
