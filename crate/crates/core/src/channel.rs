//! Log-normally distributed AR(1) fading process: parameterization, seeded
//! trace generation, autocorrelation estimation, spectral density, and a
//! finite-state Markov discretization.
//!
//! The autoregression runs on the log-gain X = ln h, so the marginal of every
//! slot stays exactly lognormal:
//!
//!   X_0 ~ N(m, sigma^2)
//!   X_j = m (1 - a1) + a1 X_{j-1} + w_j,   w_j ~ N(0, sigma^2 (1 - a1^2))
//!
//! with a1 = exp(-2 pi fd Ts). The innovation variance keeps the process
//! stationary with marginal N(m, sigma^2) for any a1 in [0, 1].

use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_quantile, SQRT_2PI};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{PI, TAU};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Mean and standard deviation of the natural-log channel gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalParams {
    m: f64,
    sigma: f64,
}

impl LognormalParams {
    /// `sigma` must be strictly positive.
    pub fn new(m: f64, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::domain(format!(
                "LognormalParams.sigma must be > 0, got {sigma}"
            )));
        }
        if !m.is_finite() {
            return Err(Error::domain(format!(
                "LognormalParams.m must be finite, got {m}"
            )));
        }
        Ok(Self { m, sigma })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// One-step autocorrelation of the log-gain process, tied to the Doppler
/// spread and slot period by a1 = exp(-2 pi fd Ts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Params {
    fd: f64,
    ts: f64,
    a1: f64,
}

impl Ar1Params {
    /// Build from a Doppler spread (Hz) and slot period (s). `fd = 0` gives
    /// the degenerate static channel (a1 = 1).
    pub fn from_doppler(fd: f64, ts: f64) -> Result<Self> {
        if !(fd >= 0.0) {
            return Err(Error::domain(format!("Ar1Params.fd must be >= 0, got {fd}")));
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Error::domain(format!("Ar1Params.Ts must be > 0, got {ts}")));
        }
        let a1 = (-TAU * fd * ts).exp();
        Ok(Self { fd, ts, a1 })
    }

    /// Build from the correlation coefficient directly; `fd` is derived so
    /// the stored triple satisfies a1 = exp(-2 pi fd Ts) exactly (the stored
    /// a1 is re-canonicalized and may differ from the request in the last
    /// couple of ulps).
    pub fn from_a1(a1: f64, ts: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a1) {
            return Err(Error::domain(format!(
                "Ar1Params.a1 must lie in [0, 1], got {a1}"
            )));
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Error::domain(format!("Ar1Params.Ts must be > 0, got {ts}")));
        }
        let fd = -a1.ln() / (TAU * ts);
        let a1 = (-TAU * fd * ts).exp();
        Ok(Self { fd, ts, a1 })
    }

    pub fn fd(&self) -> f64 {
        self.fd
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    /// Normalized fading rate beta = 2 pi fd Ts.
    pub fn beta(&self) -> f64 {
        TAU * self.fd * self.ts
    }
}

// ---------------------------------------------------------------------------
// Channel trace
// ---------------------------------------------------------------------------

/// A generated sequence of positive channel gains, one per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    gains: Vec<f64>,
    slot: f64,
    seed: Option<u64>,
}

impl ChannelTrace {
    /// Wrap an explicit gain sequence (all entries must be > 0).
    pub fn from_gains(gains: Vec<f64>, slot: f64) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::domain("ChannelTrace needs at least one gain"));
        }
        if let Some(bad) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::domain(format!(
                "ChannelTrace gains must be positive and finite, got {bad}"
            )));
        }
        if !(slot > 0.0) {
            return Err(Error::domain(format!("slot duration must be > 0, got {slot}")));
        }
        Ok(Self {
            gains,
            slot,
            seed: None,
        })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn slot(&self) -> f64 {
        self.slot
    }

    /// Seed used by the generator, `None` for hand-built traces.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn log_gains(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g.ln()).collect()
    }
}

/// Generates the stationary log-domain AR(1) trace. Identical
/// (params, seed) inputs reproduce the identical sequence bit-for-bit.
pub fn gen_ar1_trace(
    p: &LognormalParams,
    a: &Ar1Params,
    n_slots: usize,
    seed: u64,
) -> Result<ChannelTrace> {
    if n_slots == 0 {
        return Err(Error::domain("n_slots must be >= 1"));
    }
    let a1 = a.a1();
    let innovation_sd = p.sigma() * (1.0 - a1 * a1).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gains = Vec::with_capacity(n_slots);
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut x = p.m() + p.sigma() * z0;
    gains.push(x.exp());
    for _ in 1..n_slots {
        let w: f64 = StandardNormal.sample(&mut rng);
        x = p.m() * (1.0 - a1) + a1 * x + innovation_sd * w;
        gains.push(x.exp());
    }
    Ok(ChannelTrace {
        gains,
        slot: a.ts(),
        seed: Some(seed),
    })
}

// ---------------------------------------------------------------------------
// Density and moments
// ---------------------------------------------------------------------------

/// Lognormal density (1 / (h sigma sqrt(2 pi))) exp(-(ln h - m)^2 / (2 sigma^2)).
pub fn lognormal_pdf(h: f64, p: &LognormalParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::domain(format!("gain must be > 0, got {h}")));
    }
    let z = (h.ln() - p.m()) / p.sigma();
    Ok((-0.5 * z * z).exp() / (h * p.sigma() * SQRT_2PI))
}

/// Mean exp(m + sigma^2/2) and variance exp(2m + sigma^2)(exp(sigma^2) - 1).
pub fn lognormal_moments(p: &LognormalParams) -> (f64, f64) {
    let s2 = p.sigma() * p.sigma();
    let mean = (p.m() + 0.5 * s2).exp();
    let variance = (2.0 * p.m() + s2).exp() * (s2.exp() - 1.0);
    (mean, variance)
}

// ---------------------------------------------------------------------------
// Autocorrelation estimation
// ---------------------------------------------------------------------------

/// Lag-1 sample autocorrelation of the log-gains (Yule-Walker estimate of
/// the AR(1) coefficient): R(1)/R(0) on the mean-removed ln h_j.
pub fn estimate_a1(trace: &ChannelTrace) -> Result<f64> {
    let logs = trace.log_gains();
    if logs.len() < 2 {
        return Err(Error::domain("trace must hold at least 2 slots"));
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let r0: f64 = logs.iter().map(|x| (x - mean) * (x - mean)).sum();
    if r0 == 0.0 {
        return Err(Error::Degenerate(
            "constant trace has zero variance; autocorrelation undefined".into(),
        ));
    }
    let r1: f64 = logs
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    Ok(r1 / r0)
}

// ---------------------------------------------------------------------------
// Power spectral density
// ---------------------------------------------------------------------------

/// Rational AR(1) spectrum sigma^2 / |1 + a1 e^{-j 2 pi f}|^2 at normalized
/// frequency `f`. This is the literal denominator convention, which puts the
/// spectral minimum at DC; see [`psd_doppler_lorentzian`] for the low-pass
/// Doppler form.
pub fn psd_ar1(f: f64, a: &Ar1Params, p: &LognormalParams) -> f64 {
    let a1 = a.a1();
    let s2 = p.sigma() * p.sigma();
    let phase = TAU * f;
    let denom = 1.0 + 2.0 * a1 * phase.cos() + a1 * a1;
    s2 / denom
}

/// Lorentzian Doppler spectrum (sigma^2 / (pi fd)) / (1 + (f/fd)^2): the
/// low-pass form that peaks at DC and decays with the Doppler spread.
pub fn psd_doppler_lorentzian(f: f64, a: &Ar1Params, p: &LognormalParams) -> Result<f64> {
    let fd = a.fd();
    if !(fd > 0.0) || !fd.is_finite() {
        return Err(Error::domain(format!(
            "Lorentzian form needs a positive finite Doppler spread, got {fd}"
        )));
    }
    let s2 = p.sigma() * p.sigma();
    let r = f / fd;
    Ok((s2 / (PI * fd)) / (1.0 + r * r))
}

// ---------------------------------------------------------------------------
// Finite-state discretization
// ---------------------------------------------------------------------------

/// K representative gains plus a K x K one-step transition matrix that
/// approximates the log-domain AR(1) kernel on equiprobable quantile cells.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedChain {
    levels: Vec<f64>,
    trans: Vec<f64>,
}

impl QuantizedChain {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Representative gains, strictly increasing.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Row-major K x K transition matrix; rows sum to 1.
    pub fn transitions(&self) -> &[f64] {
        &self.trans
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.trans[from * self.levels.len() + to]
    }

    /// Stationary distribution by power iteration on the transpose.
    pub fn stationary(&self) -> Vec<f64> {
        let k = self.levels.len();
        let mut pi = vec![1.0 / k as f64; k];
        for _ in 0..20_000 {
            let mut next = vec![0.0; k];
            for u in 0..k {
                let w = pi[u];
                for v in 0..k {
                    next[v] += w * self.trans[u * k + v];
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-14 {
                break;
            }
        }
        pi
    }
}

/// Discretizes the log-domain AR(1) kernel onto K equiprobable cells of the
/// stationary Normal(m, sigma^2). Levels are the exponentials of the cell
/// midpoints (quantiles at (2k-1)/(2K)); row u of the transition matrix is
/// the conditional Normal(m(1-a1) + a1 x_u, sigma^2(1-a1^2)) mass of each
/// cell.
pub fn quantize_chain(p: &LognormalParams, a: &Ar1Params, levels: usize) -> Result<QuantizedChain> {
    if levels < 2 {
        return Err(Error::domain(format!(
            "quantization needs K >= 2 levels, got {levels}"
        )));
    }
    let k = levels;
    let m = p.m();
    let sigma = p.sigma();
    let a1 = a.a1();

    let mids: Vec<f64> = (1..=k)
        .map(|i| m + sigma * normal_quantile((2.0 * i as f64 - 1.0) / (2.0 * k as f64)))
        .collect();
    // cell boundaries in the log domain; open at both ends
    let bounds: Vec<f64> = (1..k)
        .map(|i| m + sigma * normal_quantile(i as f64 / k as f64))
        .collect();

    let cond_sd = sigma * (1.0 - a1 * a1).max(0.0).sqrt();
    let mut trans = vec![0.0; k * k];
    for (u, &xu) in mids.iter().enumerate() {
        let mu = m * (1.0 - a1) + a1 * xu;
        if cond_sd == 0.0 {
            // frozen channel: the midpoint stays inside its own cell
            let mut cell = 0;
            while cell < k - 1 && mu > bounds[cell] {
                cell += 1;
            }
            trans[u * k + cell] = 1.0;
            continue;
        }
        let mut prev_cdf = 0.0;
        for v in 0..k {
            let upper = if v + 1 < k {
                normal_cdf((bounds[v] - mu) / cond_sd)
            } else {
                1.0
            };
            trans[u * k + v] = (upper - prev_cdf).max(0.0);
            prev_cdf = upper;
        }
    }

    Ok(QuantizedChain {
        levels: mids.iter().map(|x| x.exp()).collect(),
        trans,
    })
}

// ===========================================================================
// Tests
// ===========================================================================
