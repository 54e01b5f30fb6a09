//! Expected time to deliver N uncoded packets over a slot-indexed erasure
//! sequence. Each transmission attempt advances the channel by one slot (a
//! packet is never retried at the state it failed on), so the table follows
//!
//!   T(i, j) = T_p + (1 - pe_j) T(i-1, j+1) + pe_j T(i, j+1),   T(0, .) = 0
//!
//! with the constant-erasure closed form i T_p / (1 - tail) terminating the
//! recursion past the end of the finite profile.

use crate::channel::{ChannelTrace, LognormalParams, QuantizedChain};
use crate::error::{Error, Result};
use crate::link::{
    ber_adaptive, ber_fixed, effective_power, packet_erasure, LinkBudget, PowerPolicy,
};
use crate::linalg;
use std::fmt::Write as _;

// ---------------------------------------------------------------------------
// Erasure profile
// ---------------------------------------------------------------------------

/// Per-slot erasure probabilities plus the stationary mean used beyond the
/// profile's end. The tail must stay below 1, otherwise the expected
/// delivery time diverges.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasureProfile {
    pe: Vec<f64>,
    tail: f64,
}

impl ErasureProfile {
    pub fn new(pe: Vec<f64>, tail: f64) -> Result<Self> {
        if let Some(bad) = pe.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain(format!(
                "erasure probabilities must lie in [0, 1], got {bad}"
            )));
        }
        if !(0.0..1.0).contains(&tail) {
            return Err(Error::domain(format!(
                "tail erasure must lie in [0, 1), got {tail}"
            )));
        }
        Ok(Self { pe, tail })
    }

    /// A profile with no slot-indexed part: every slot uses `pe`.
    pub fn constant(pe: f64) -> Result<Self> {
        Self::new(Vec::new(), pe)
    }

    pub fn slots(&self) -> &[f64] {
        &self.pe
    }

    pub fn len(&self) -> usize {
        self.pe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pe.is_empty()
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Erasure probability at slot `j`, falling back to the tail.
    pub fn at(&self, j: usize) -> f64 {
        self.pe.get(j).copied().unwrap_or(self.tail)
    }
}

// ---------------------------------------------------------------------------
// Delay table
// ---------------------------------------------------------------------------

/// Expected delivery times indexed by (packets remaining, starting slot).
/// Row 0 is the all-zero boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    entries: Vec<f64>,
    n_packets: usize,
    n_slots: usize,
    tp: f64,
}

impl DelayTable {
    /// Expected seconds to deliver `packets` starting at slot `slot`.
    pub fn time(&self, packets: usize, slot: usize) -> f64 {
        self.entries[packets * self.n_slots + slot]
    }

    pub fn packet_count(&self) -> usize {
        self.n_packets
    }

    pub fn slot_count(&self) -> usize {
        self.n_slots
    }

    pub fn packet_duration(&self) -> f64 {
        self.tp
    }

    /// CSV serialization: header `i,j,seconds`, one row per entry, values in
    /// scientific notation with 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,seconds\n");
        for i in 0..=self.n_packets {
            for j in 0..self.n_slots {
                let _ = writeln!(out, "{i},{j},{:.11e}", self.time(i, j));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Success/failure split of one transmission at erasure probability `pe`.
pub fn transition_probs(pe: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&pe) {
        return Err(Error::domain(format!(
            "erasure probability must lie in [0, 1], got {pe}"
        )));
    }
    Ok((1.0 - pe, pe))
}

/// Fills the delay table by the backward recursion over the profile, with
/// the constant-tail closed form i * tp / (1 - tail) past the profile end.
/// `n_packets = 0` yields the all-zero table.
pub fn expected_time_uncoded(
    profile: &ErasureProfile,
    n_packets: usize,
    tp: f64,
) -> Result<DelayTable> {
    if !(tp > 0.0) || !tp.is_finite() {
        return Err(Error::domain(format!("packet duration must be > 0, got {tp}")));
    }
    if profile.tail() >= 1.0 {
        return Err(Error::Convergence(
            "tail erasure of 1 makes the expected delivery time diverge".into(),
        ));
    }
    // keep at least one column so T(i, 0) exists for pure-tail profiles
    let n_slots = profile.len().max(1);
    let mut entries = vec![0.0; (n_packets + 1) * n_slots];
    let tail_time = |i: usize| i as f64 * tp / (1.0 - profile.tail());
    for i in 1..=n_packets {
        // boundary column just past the profile
        let mut next_same = tail_time(i);
        let row_below = i - 1;
        for j in (0..n_slots).rev() {
            let pe = profile.at(j);
            let next_less = if j + 1 < n_slots {
                entries[row_below * n_slots + j + 1]
            } else {
                tail_time(row_below)
            };
            let t = tp + (1.0 - pe) * next_less + pe * next_same;
            entries[i * n_slots + j] = t;
            next_same = t;
        }
    }
    Ok(DelayTable {
        entries,
        n_packets,
        n_slots,
        tp,
    })
}

/// Composes the per-slot erasure sequence for a trace under a power policy:
/// the bit-error bound at each slot raised through the packet length, with
/// in-outage slots forced to erasure 1. The tail is the profile mean,
/// clamped below 1 - 1e-9.
pub fn erasure_profile_from_trace(
    trace: &ChannelTrace,
    budget: &LinkBudget,
    policy: &PowerPolicy,
    p: &LognormalParams,
) -> Result<ErasureProfile> {
    let mut pe = Vec::with_capacity(trace.len());
    for &h in trace.gains() {
        let slot_pe = match policy {
            PowerPolicy::Fixed { .. } => {
                packet_erasure(ber_fixed(h, budget, p)?, budget.bits_per_packet())?
            }
            PowerPolicy::Adaptive { .. } => {
                if effective_power(h, policy)? == 0.0 {
                    1.0
                } else {
                    packet_erasure(ber_adaptive(policy, budget, p)?, budget.bits_per_packet())?
                }
            }
        };
        pe.push(slot_pe);
    }
    let mean = pe.iter().sum::<f64>() / pe.len() as f64;
    let tail = mean.min(1.0 - 1e-9);
    ErasureProfile::new(pe, tail)
}

/// Per-slot effective transmit powers for a trace under a policy (0 marks a
/// silent outage slot), with the mean as the tail value.
pub fn power_profile_from_trace(trace: &ChannelTrace, policy: &PowerPolicy) -> Result<(Vec<f64>, f64)> {
    let mut powers = Vec::with_capacity(trace.len());
    for &h in trace.gains() {
        powers.push(effective_power(h, policy)?);
    }
    let mean = powers.iter().sum::<f64>() / powers.len() as f64;
    Ok((powers, mean))
}

/// Secondary evaluation path: expected delivery times over the quantized
/// chain, averaging the next state over the transition matrix instead of
/// following one concrete slot sequence. `pe_per_level[u]` is the erasure
/// probability at chain level `u`. Returns rows i = 0..=n_packets of length
/// K each.
pub fn expected_time_uncoded_chain(
    chain: &QuantizedChain,
    pe_per_level: &[f64],
    n_packets: usize,
    tp: f64,
) -> Result<Vec<Vec<f64>>> {
    let k = chain.level_count();
    if pe_per_level.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: pe_per_level.len(),
        });
    }
    if let Some(bad) = pe_per_level.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!(
            "erasure probabilities must lie in [0, 1], got {bad}"
        )));
    }
    if !(tp > 0.0) {
        return Err(Error::domain(format!("packet duration must be > 0, got {tp}")));
    }
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; k]];
    for i in 1..=n_packets {
        // (I - diag(pe) P) T_i = tp 1 + diag(1 - pe) P T_{i-1}
        let prev = &rows[i - 1];
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for u in 0..k {
            let pe = pe_per_level[u];
            let mut rhs = tp;
            for v in 0..k {
                let puv = chain.transition(u, v);
                a[u * k + v] = -(pe * puv);
                rhs += (1.0 - pe) * puv * prev[v];
            }
            a[u * k + u] += 1.0;
            b[u] = rhs;
        }
        if pe_per_level.iter().all(|&pe| pe >= 1.0 - 1e-12) {
            return Err(Error::Convergence(
                "every chain level erases with probability 1".into(),
            ));
        }
        rows.push(linalg::solve_dense(a, b, k)?);
    }
    Ok(rows)
}

// ===========================================================================
// Tests
// ===========================================================================
