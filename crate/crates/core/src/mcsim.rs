//! Slot-by-slot Monte Carlo simulation of packet delivery over the AR(1)
//! fading channel, under either power policy, with and without coding
//! across packets. Every analytic expectation in the library has a
//! counterpart here; the simulator shares no code path with the recursions
//! it cross-checks beyond the per-slot erasure formulas themselves.
//!
//! Determinism contract: an episode is a pure function of
//! (config, episode_index). The channel innovations and the erasure draws
//! come from two separate ChaCha streams derived from
//! (seed, episode_index, purpose), so policies that consume different
//! numbers of erasure variates still see identical channels.

use crate::channel::{Ar1Params, LognormalParams};
use crate::delay::ErasureProfile;
use crate::error::{Error, Result};
use crate::link::{
    ber_adaptive, ber_fixed, effective_power, packet_erasure, LinkBudget, PowerPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;

/// Default cap on simulated slots per episode before aborting.
pub const DEFAULT_SLOT_CAP: u64 = 10_000_000;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Transmission scheme: one packet per slot, or coded rounds with a fixed or
/// per-dof-level round size.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    Uncoded,
    Coded(CodedPlan),
}

/// Round-size plan for the coded scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum CodedPlan {
    /// Every round transmits this many coded packets.
    FixedNi(usize),
    /// Rounds starting at dof level i transmit `plan[i - 1]` packets
    /// (typically an optimizer schedule).
    PerDof(Vec<usize>),
}

impl CodedPlan {
    fn round_size(&self, dof: usize) -> usize {
        match self {
            CodedPlan::FixedNi(ni) => *ni,
            CodedPlan::PerDof(plan) => plan[(dof - 1).min(plan.len() - 1)],
        }
    }
}

/// Where the per-transmission erasure probability comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ErasureModel {
    /// Composed from the channel gain through the policy's bit-error bound.
    Channel,
    /// Forced constant probability (analytic cross-check mode; transmissions
    /// run at the policy's baseline power).
    Constant(f64),
    /// Forced per-slot sequence with its tail (analytic cross-check mode).
    Profile(ErasureProfile),
}

/// Full simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_data: usize,
    pub tp: f64,
    pub scheme: Scheme,
    pub policy: PowerPolicy,
    pub budget: LinkBudget,
    pub lognormal: LognormalParams,
    pub ar1: Ar1Params,
    pub episodes: usize,
    pub seed: u64,
    pub slot_cap: u64,
    pub erasure: ErasureModel,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 {
            return Err(Error::domain("SimConfig.n_data must be >= 1"));
        }
        if !(self.tp > 0.0) {
            return Err(Error::domain(format!(
                "SimConfig.tp must be > 0, got {}",
                self.tp
            )));
        }
        if self.episodes == 0 {
            return Err(Error::domain("SimConfig.episodes must be >= 1"));
        }
        if self.slot_cap == 0 {
            return Err(Error::domain("SimConfig.slot_cap must be >= 1"));
        }
        match &self.scheme {
            Scheme::Coded(CodedPlan::FixedNi(ni)) if *ni == 0 => {
                return Err(Error::domain("coded round size must be >= 1"));
            }
            Scheme::Coded(CodedPlan::PerDof(plan)) if plan.is_empty() || plan.contains(&0) => {
                return Err(Error::domain("per-dof plan entries must be >= 1"));
            }
            _ => {}
        }
        if let ErasureModel::Constant(pe) = self.erasure {
            if !(0.0..=1.0).contains(&pe) {
                return Err(Error::domain(format!(
                    "forced erasure must lie in [0, 1], got {pe}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Measured outcomes of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    /// Seconds until all packets were delivered (includes ACK and silent slots).
    pub delivery_time: f64,
    /// n_data / delivery_time, capped at one packet per slot by construction.
    pub throughput: f64,
    /// Erased transmissions / total transmissions.
    pub erasure_rate: f64,
    /// Joules spent on transmit slots (ACK and silent slots are free).
    pub energy: f64,
    /// Slots where the adaptive policy stayed silent (0 under Fixed).
    pub silent_slots: u64,
    pub transmissions: u64,
    pub erasures: u64,
    pub ack_slots: u64,
    pub total_slots: u64,
}

// ---------------------------------------------------------------------------
// Episode driver
// ---------------------------------------------------------------------------

/// Channel-gain stream: stationary log-domain AR(1), one gain per slot.
struct GainStream {
    rng: ChaCha8Rng,
    m: f64,
    sigma: f64,
    a1: f64,
    innovation_sd: f64,
    log_gain: f64,
    started: bool,
}

impl GainStream {
    fn new(p: &LognormalParams, a: &Ar1Params, rng: ChaCha8Rng) -> Self {
        Self {
            rng,
            m: p.m(),
            sigma: p.sigma(),
            a1: a.a1(),
            innovation_sd: p.sigma() * (1.0 - a.a1() * a.a1()).max(0.0).sqrt(),
            log_gain: 0.0,
            started: false,
        }
    }

    fn next_gain(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        if self.started {
            self.log_gain = self.m * (1.0 - self.a1) + self.a1 * self.log_gain
                + self.innovation_sd * z;
        } else {
            self.log_gain = self.m + self.sigma * z;
            self.started = true;
        }
        self.log_gain.exp()
    }
}

fn stream_rng(seed: u64, episode: u64, purpose: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&episode.to_le_bytes());
    bytes[16..24].copy_from_slice(&purpose.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// What one simulated slot did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Transmit,
    Ack,
    Silent,
}

/// Per-slot log entry for audit-style recomputation of episode totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub gain: f64,
    pub kind: SlotKind,
    /// Transmit power spent this slot (0 for ACK and silent slots).
    pub power: f64,
    pub erased: bool,
}

struct EpisodeState<'a> {
    config: &'a SimConfig,
    gains: GainStream,
    erasure_rng: ChaCha8Rng,
    slot: u64,
    transmissions: u64,
    erasures: u64,
    silent: u64,
    acks: u64,
    energy: f64,
    log: Option<Vec<SlotRecord>>,
}

enum SlotOutcome {
    Delivered,
    Erased,
    Silent,
}

impl EpisodeState<'_> {
    /// Advances the channel one slot and attempts one packet transmission.
    fn transmit_slot(&mut self) -> Result<SlotOutcome> {
        let h = self.gains.next_gain();
        self.slot += 1;
        if self.slot > self.config.slot_cap {
            return Err(Error::Convergence(format!(
                "episode exceeded the slot cap of {} slots",
                self.config.slot_cap
            )));
        }
        let (pe, power) = match &self.config.erasure {
            ErasureModel::Channel => {
                let power = effective_power(h, &self.config.policy)?;
                if self.config.policy.is_adaptive() && power == 0.0 {
                    // outage: no transmission at all this slot
                    self.silent += 1;
                    if let Some(log) = &mut self.log {
                        log.push(SlotRecord {
                            gain: h,
                            kind: SlotKind::Silent,
                            power: 0.0,
                            erased: false,
                        });
                    }
                    return Ok(SlotOutcome::Silent);
                }
                let pb = match self.config.policy {
                    PowerPolicy::Fixed { .. } => {
                        ber_fixed(h, &self.config.budget, &self.config.lognormal)?
                    }
                    PowerPolicy::Adaptive { .. } => {
                        ber_adaptive(&self.config.policy, &self.config.budget, &self.config.lognormal)?
                    }
                };
                (
                    packet_erasure(pb, self.config.budget.bits_per_packet())?,
                    power,
                )
            }
            ErasureModel::Constant(pe) => (*pe, self.config.policy.pt()),
            ErasureModel::Profile(profile) => {
                (profile.at(self.slot as usize - 1), self.config.policy.pt())
            }
        };
        self.transmissions += 1;
        self.energy += power * self.config.tp;
        let u: f64 = self.erasure_rng.gen();
        let erased = u < pe;
        if let Some(log) = &mut self.log {
            log.push(SlotRecord {
                gain: h,
                kind: SlotKind::Transmit,
                power,
                erased,
            });
        }
        if erased {
            self.erasures += 1;
            Ok(SlotOutcome::Erased)
        } else {
            Ok(SlotOutcome::Delivered)
        }
    }

    /// Advances the channel through an acknowledgment slot (no transmission,
    /// no energy, no erasure draw).
    fn ack_slot(&mut self) -> Result<()> {
        let h = self.gains.next_gain();
        self.slot += 1;
        self.acks += 1;
        if self.slot > self.config.slot_cap {
            return Err(Error::Convergence(format!(
                "episode exceeded the slot cap of {} slots",
                self.config.slot_cap
            )));
        }
        if let Some(log) = &mut self.log {
            log.push(SlotRecord {
                gain: h,
                kind: SlotKind::Ack,
                power: 0.0,
                erased: false,
            });
        }
        Ok(())
    }
}

/// Runs one episode. Deterministic given (config, episode_index).
pub fn run_episode(config: &SimConfig, episode_index: u64) -> Result<SimResult> {
    run_episode_inner(config, episode_index, false).map(|(r, _)| r)
}

/// Like [`run_episode`], additionally returning the per-slot log so totals
/// can be recomputed independently.
pub fn run_episode_logged(
    config: &SimConfig,
    episode_index: u64,
) -> Result<(SimResult, Vec<SlotRecord>)> {
    run_episode_inner(config, episode_index, true).map(|(r, log)| (r, log.unwrap_or_default()))
}

fn run_episode_inner(
    config: &SimConfig,
    episode_index: u64,
    with_log: bool,
) -> Result<(SimResult, Option<Vec<SlotRecord>>)> {
    config.validate()?;
    let mut state = EpisodeState {
        config,
        gains: GainStream::new(
            &config.lognormal,
            &config.ar1,
            stream_rng(config.seed, episode_index, 0),
        ),
        erasure_rng: stream_rng(config.seed, episode_index, 1),
        slot: 0,
        transmissions: 0,
        erasures: 0,
        silent: 0,
        acks: 0,
        energy: 0.0,
        log: if with_log { Some(Vec::new()) } else { None },
    };

    match &config.scheme {
        Scheme::Uncoded => {
            let mut remaining = config.n_data;
            while remaining > 0 {
                if let SlotOutcome::Delivered = state.transmit_slot()? {
                    remaining -= 1;
                }
            }
        }
        Scheme::Coded(plan) => {
            let mut dof = config.n_data;
            while dof > 0 {
                let ni = plan.round_size(dof);
                let mut successes = 0usize;
                for _ in 0..ni {
                    if let SlotOutcome::Delivered = state.transmit_slot()? {
                        successes += 1;
                    }
                }
                state.ack_slot()?;
                dof -= successes.min(dof);
            }
        }
    }

    let delivery_time = state.slot as f64 * config.tp;
    let result = SimResult {
        delivery_time,
        throughput: config.n_data as f64 / delivery_time,
        erasure_rate: if state.transmissions > 0 {
            state.erasures as f64 / state.transmissions as f64
        } else {
            0.0
        },
        energy: state.energy,
        silent_slots: state.silent,
        transmissions: state.transmissions,
        erasures: state.erasures,
        ack_slots: state.acks,
        total_slots: state.slot,
    };
    Ok((result, state.log))
}

// ---------------------------------------------------------------------------
// Aggregation and sweeps
// ---------------------------------------------------------------------------

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregate {
    pub mean: f64,
    pub std_err: f64,
}

fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Aggregate { mean, std_err: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Aggregate {
        mean,
        std_err: (var / n).sqrt(),
    }
}

/// Aggregated episode statistics at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub time: Aggregate,
    pub throughput: Aggregate,
    pub erasure: Aggregate,
    pub energy: Aggregate,
    pub mean_silent: f64,
    pub episodes: usize,
}

/// Runs all episodes at every SNR point of the grid. The grid point fixes
/// the nominal SNR by rescaling the noise density at the configured baseline
/// power and symbol rate, so snr = pt / (n0 rate) stays exact. Episodes are
/// merged in index order, keeping the output bit-stable.
pub fn sweep(config: &SimConfig, snr_grid_db: &[f64]) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    if snr_grid_db.is_empty() {
        return Err(Error::domain("SNR grid must be non-empty"));
    }
    let mut points = Vec::with_capacity(snr_grid_db.len());
    for &snr_db in snr_grid_db {
        let snr = 10f64.powf(snr_db / 10.0);
        let pt = config.policy.pt();
        let n0 = pt / (snr * config.budget.rate());
        let budget = LinkBudget::for_power(
            pt,
            n0,
            config.budget.rate(),
            config.budget.bits_per_packet(),
        )?;
        let point_config = SimConfig {
            budget,
            ..config.clone()
        };
        let mut times = Vec::with_capacity(config.episodes);
        let mut throughputs = Vec::with_capacity(config.episodes);
        let mut erasures = Vec::with_capacity(config.episodes);
        let mut energies = Vec::with_capacity(config.episodes);
        let mut silent_total = 0u64;
        for episode in 0..config.episodes {
            let r = run_episode(&point_config, episode as u64)?;
            times.push(r.delivery_time);
            throughputs.push(r.throughput);
            erasures.push(r.erasure_rate);
            energies.push(r.energy);
            silent_total += r.silent_slots;
        }
        points.push(SweepPoint {
            snr_db,
            time: aggregate(&times),
            throughput: aggregate(&throughputs),
            erasure: aggregate(&erasures),
            energy: aggregate(&energies),
            mean_silent: silent_total as f64 / config.episodes as f64,
            episodes: config.episodes,
        });
    }
    Ok(points)
}

/// CSV header shared by every sweep table.
pub const SWEEP_CSV_HEADER: &str = "snr_db,scheme,policy,a1,mean_time,se_time,mean_throughput,\
se_throughput,mean_erasure,se_erasure,mean_energy,se_energy,mean_silent,episodes";

/// Scheme label used in sweep CSV rows.
pub fn scheme_label(scheme: &Scheme) -> &'static str {
    match scheme {
        Scheme::Uncoded => "uncoded",
        Scheme::Coded(_) => "coded",
    }
}

/// Policy label used in sweep CSV rows.
pub fn policy_label(policy: &PowerPolicy) -> &'static str {
    match policy {
        PowerPolicy::Fixed { .. } => "fixed",
        PowerPolicy::Adaptive { .. } => "adaptive",
    }
}

/// One CSV row for a sweep point, labeled with the config's scheme, policy
/// and correlation. Floats print in Rust's shortest round-trip form, so
/// identical runs yield identical bytes.
pub fn sweep_csv_row(config: &SimConfig, p: &SweepPoint) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.snr_db,
        scheme_label(&config.scheme),
        policy_label(&config.policy),
        config.ar1.a1(),
        p.time.mean,
        p.time.std_err,
        p.throughput.mean,
        p.throughput.std_err,
        p.erasure.mean,
        p.erasure.std_err,
        p.energy.mean,
        p.energy.std_err,
        p.mean_silent,
        p.episodes
    );
    out
}

/// Serializes sweep rows under the fixed header.
pub fn sweep_csv(config: &SimConfig, points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&sweep_csv_row(config, p));
        out.push('\n');
    }
    out
}

// ===========================================================================
// Tests
// ===========================================================================
