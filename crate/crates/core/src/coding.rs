//! Coded-block delivery model. A round transmits `ni` coded packets over
//! `ni` consecutive slots followed by one acknowledgment slot (zero transmit
//! energy, channel still advances), so a round at slot j lasts (ni + 1) T_p
//! and the next round starts at slot j + ni + 1. Any `i` received coded
//! packets decode a block needing `i` degrees of freedom, so only the
//! success count matters:
//!
//!   T(i, j) = (ni + 1) T_p + sum over l of P(i -> l at slots j..j+ni-1) T(l, j + ni + 1)
//!
//! with T(0, .) = 0. Past the profile end the erasure probability freezes at
//! the tail and each level's value has the absorbing-chain closed form
//! (round cost + lower-level continuations) / (1 - stay probability).

use crate::delay::ErasureProfile;
use crate::error::{Error, Result};
use std::fmt::Write as _;

// ---------------------------------------------------------------------------
// Configuration and round distribution
// ---------------------------------------------------------------------------

/// Coded-transmission parameters: block size, coded packets per round,
/// packet duration, and the optimizer's search cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodedConfig {
    pub n_data: usize,
    pub ni: usize,
    pub tp: f64,
    pub ni_max: usize,
}

impl CodedConfig {
    pub fn new(n_data: usize, ni: usize, tp: f64, ni_max: usize) -> Result<Self> {
        if n_data == 0 {
            return Err(Error::domain("CodedConfig.n_data must be >= 1"));
        }
        if ni == 0 {
            return Err(Error::domain("CodedConfig.ni must be >= 1"));
        }
        if ni_max < ni {
            return Err(Error::domain(format!(
                "CodedConfig.ni_max must be >= ni, got ni_max={ni_max} ni={ni}"
            )));
        }
        if !(tp > 0.0) || !tp.is_finite() {
            return Err(Error::domain(format!("CodedConfig.tp must be > 0, got {tp}")));
        }
        Ok(Self {
            n_data,
            ni,
            tp,
            ni_max,
        })
    }

    /// Round duration including the acknowledgment slot.
    pub fn round_duration(&self) -> f64 {
        (self.ni as f64 + 1.0) * self.tp
    }
}

/// Distribution of the degrees of freedom remaining after one coded round:
/// index l = 0..=i, entries sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DofDistribution {
    probs: Vec<f64>,
}

impl DofDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, remaining: usize) -> f64 {
        self.probs[remaining]
    }
}

/// Remaining-dof distribution after transmitting `pe_slice.len()` coded
/// packets against the given per-slot erasures, starting with `dof` needed.
/// Successes follow the Poisson-binomial of the slice; any `dof` or more
/// received packets decode the block (coding makes packets interchangeable),
/// so counts are capped. An empty slice leaves the point mass at l = dof.
pub fn round_success_distribution(pe_slice: &[f64], dof: usize) -> Result<DofDistribution> {
    if dof == 0 {
        return Err(Error::domain("round distribution needs dof >= 1"));
    }
    if let Some(bad) = pe_slice.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!(
            "erasure probabilities must lie in [0, 1], got {bad}"
        )));
    }
    // success-count dynamic program, counts capped at dof
    let mut counts = vec![0.0; dof + 1];
    counts[0] = 1.0;
    for &pe in pe_slice {
        let ps = 1.0 - pe;
        let mut next = vec![0.0; dof + 1];
        for (c, &w) in counts.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            next[(c + 1).min(dof)] += w * ps;
            next[c] += w * pe;
        }
        counts = next;
    }
    let probs: Vec<f64> = (0..=dof).map(|l| counts[dof - l]).collect();
    Ok(DofDistribution { probs })
}

// ---------------------------------------------------------------------------
// Backward-induction engine
// ---------------------------------------------------------------------------

/// Expected (time, transmit energy, transmit-slot count) triple carried
/// through the recursion; all three are linear in the transition weights, so
/// one pass serves both optimizers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Stats {
    time: f64,
    energy: f64,
    transmit_slots: f64,
}

impl Stats {
    fn add_scaled(&mut self, other: &Stats, w: f64) {
        self.time += w * other.time;
        self.energy += w * other.energy;
        self.transmit_slots += w * other.transmit_slots;
    }

    fn scaled(&self, s: f64) -> Stats {
        Stats {
            time: self.time * s,
            energy: self.energy * s,
            transmit_slots: self.transmit_slots * s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum SelectKey {
    Time,
    Energy,
}

impl SelectKey {
    fn of(&self, s: &Stats) -> f64 {
        match self {
            SelectKey::Time => s.time,
            SelectKey::Energy => s.energy,
        }
    }
}

/// Transmit power applied to a candidate's round slots.
#[derive(Debug, Clone, Copy)]
enum PowerRef<'a> {
    Constant(f64),
    Slots { slots: &'a [f64], tail: f64 },
}

impl PowerRef<'_> {
    fn round_cost(&self, start: usize, ni: usize, tp: f64) -> (f64, f64) {
        match *self {
            PowerRef::Constant(p) => (p * ni as f64 * tp, ni as f64),
            PowerRef::Slots { slots, tail } => {
                let mut energy = 0.0;
                let mut transmitting = 0.0;
                for u in start..start + ni {
                    let pw = slots.get(u).copied().unwrap_or(tail);
                    energy += pw * tp;
                    if pw > 0.0 {
                        transmitting += 1.0;
                    }
                }
                (energy, transmitting)
            }
        }
    }

    fn tail_cost(&self, ni: usize, tp: f64) -> (f64, f64) {
        match *self {
            PowerRef::Constant(p) => (p * ni as f64 * tp, ni as f64),
            PowerRef::Slots { tail, .. } => (
                tail * ni as f64 * tp,
                if tail > 0.0 { ni as f64 } else { 0.0 },
            ),
        }
    }
}

struct Candidate<'a> {
    ni: usize,
    profile: &'a ErasureProfile,
    power: PowerRef<'a>,
    power_label: f64,
}

struct Solution {
    /// Tail-regime stats per dof level (index 0 is the zero boundary).
    tail: Vec<Stats>,
    /// Chosen candidate index per dof level in the tail regime.
    tail_choice: Vec<usize>,
    /// Trace-aligned stats, `table[i][j]` for j < horizon.
    table: Vec<Vec<Stats>>,
    horizon: usize,
}

impl Solution {
    fn value(&self, dof: usize, slot: usize) -> Stats {
        if slot >= self.horizon {
            self.tail[dof]
        } else {
            self.table[dof][slot]
        }
    }
}

const STAY_GUARD: f64 = 1e-12;

/// Backward induction over (dof level, slot) with per-level candidate sets.
/// Levels are solved bottom-up; within a level the tail-regime value uses
/// the absorbing self-loop division, then the trace region walks backward.
fn solve(n_data: usize, tp: f64, candidates: &[Vec<Candidate>], key: SelectKey) -> Result<Solution> {
    debug_assert_eq!(candidates.len(), n_data);
    if candidates.iter().any(|c| c.is_empty()) {
        return Err(Error::domain("every dof level needs at least one candidate"));
    }
    let horizon = candidates
        .iter()
        .flatten()
        .map(|c| c.profile.len())
        .max()
        .unwrap_or(0);

    let mut tail: Vec<Stats> = vec![Stats::default()];
    let mut tail_choice: Vec<usize> = vec![0];
    let mut table: Vec<Vec<Stats>> = vec![vec![Stats::default(); horizon]];

    for dof in 1..=n_data {
        // tail regime first: it terminates the trace recursion
        let mut best: Option<(Stats, usize)> = None;
        for (ci, cand) in candidates[dof - 1].iter().enumerate() {
            let pe_tail = cand.profile.tail();
            let slice = vec![pe_tail; cand.ni];
            let dist = round_success_distribution(&slice, dof)?;
            let stay = dist.prob(dof);
            if 1.0 - stay <= STAY_GUARD {
                continue;
            }
            let (energy, transmitting) = cand.power.tail_cost(cand.ni, tp);
            let mut acc = Stats {
                time: (cand.ni as f64 + 1.0) * tp,
                energy,
                transmit_slots: transmitting,
            };
            for l in 1..dof {
                acc.add_scaled(&tail[l], dist.prob(l));
            }
            let stats = acc.scaled(1.0 / (1.0 - stay));
            if best.is_none() || key.of(&stats) < key.of(&best.as_ref().unwrap().0) {
                best = Some((stats, ci));
            }
        }
        let (stats, choice) = best.ok_or_else(|| {
            Error::Convergence(format!(
                "no candidate makes progress at dof {dof}: the stay probability is 1"
            ))
        })?;
        tail.push(stats);
        tail_choice.push(choice);

        // trace region, walking backward toward slot 0
        let mut row = vec![Stats::default(); horizon];
        for j in (0..horizon).rev() {
            let mut best: Option<Stats> = None;
            for cand in &candidates[dof - 1] {
                let slice: Vec<f64> = (j..j + cand.ni).map(|u| cand.profile.at(u)).collect();
                let dist = round_success_distribution(&slice, dof)?;
                let next = j + cand.ni + 1;
                let (energy, transmitting) = cand.power.round_cost(j, cand.ni, tp);
                let mut acc = Stats {
                    time: (cand.ni as f64 + 1.0) * tp,
                    energy,
                    transmit_slots: transmitting,
                };
                for l in 1..=dof {
                    let pl = dist.prob(l);
                    if pl == 0.0 {
                        continue;
                    }
                    let cont = if l == dof {
                        if next >= horizon {
                            tail[dof]
                        } else {
                            row[next]
                        }
                    } else if next >= horizon {
                        tail[l]
                    } else {
                        table[l][next]
                    };
                    acc.add_scaled(&cont, pl);
                }
                if best.is_none() || key.of(&acc) < key.of(best.as_ref().unwrap()) {
                    best = Some(acc);
                }
            }
            row[j] = best.unwrap();
        }
        table.push(row);
    }

    Ok(Solution {
        tail,
        tail_choice,
        table,
        horizon,
    })
}

// ---------------------------------------------------------------------------
// Expected time and energy under fixed schedules
// ---------------------------------------------------------------------------

/// Expected seconds to deliver the whole block when rounds at dof level i
/// transmit `schedule[i - 1]` coded packets.
pub fn coded_time_with_schedule(
    profile: &ErasureProfile,
    tp: f64,
    schedule: &[usize],
    start_slot: usize,
) -> Result<f64> {
    if schedule.is_empty() {
        return Err(Error::domain("schedule must cover at least one dof level"));
    }
    if schedule.contains(&0) {
        return Err(Error::domain("schedule entries must be >= 1"));
    }
    if !(tp > 0.0) || !tp.is_finite() {
        return Err(Error::domain(format!("packet duration must be > 0, got {tp}")));
    }
    let n_data = schedule.len();
    let candidates: Vec<Vec<Candidate>> = schedule
        .iter()
        .map(|&ni| {
            vec![Candidate {
                ni,
                profile,
                power: PowerRef::Constant(1.0),
                power_label: 1.0,
            }]
        })
        .collect();
    let solution = solve(n_data, tp, &candidates, SelectKey::Time)?;
    Ok(solution.value(n_data, start_slot).time)
}

/// Expected seconds to deliver `config.n_data` packets with the fixed round
/// size `config.ni` at every dof level, starting at `start_slot`.
pub fn expected_time_coded(
    profile: &ErasureProfile,
    config: &CodedConfig,
    start_slot: usize,
) -> Result<f64> {
    let schedule = vec![config.ni; config.n_data];
    coded_time_with_schedule(profile, config.tp, &schedule, start_slot)
}

/// Transmit powers for [`energy_coded`]: one power per dof level (rounds
/// starting at dof i use `per_dof[i - 1]`), or one effective power per slot
/// with 0 marking silent outage slots (which cost time but no energy).
#[derive(Debug, Clone, PartialEq)]
pub enum PowerSchedule {
    PerDof(Vec<f64>),
    PerSlot { slots: Vec<f64>, tail: f64 },
}

/// Expected transmit energy to deliver the block under the fixed round size
/// `config.ni`. Acknowledgment slots cost nothing; under a per-slot schedule
/// a zero-power slot costs nothing either.
pub fn energy_coded(
    profile: &ErasureProfile,
    config: &CodedConfig,
    powers: &PowerSchedule,
) -> Result<f64> {
    let n_data = config.n_data;
    match powers {
        PowerSchedule::PerDof(v) => {
            if v.len() != n_data {
                return Err(Error::DimensionMismatch {
                    expected: n_data,
                    got: v.len(),
                });
            }
            if let Some(bad) = v.iter().find(|p| !(**p > 0.0)) {
                return Err(Error::domain(format!(
                    "round powers must be > 0, got {bad}"
                )));
            }
        }
        PowerSchedule::PerSlot { slots, tail } => {
            if slots.iter().chain(std::iter::once(tail)).any(|p| !(*p >= 0.0)) {
                return Err(Error::domain("slot powers must be >= 0"));
            }
        }
    }
    let candidates: Vec<Vec<Candidate>> = (1..=n_data)
        .map(|dof| {
            let power = match powers {
                PowerSchedule::PerDof(v) => PowerRef::Constant(v[dof - 1]),
                PowerSchedule::PerSlot { slots, tail } => PowerRef::Slots {
                    slots: slots.as_slice(),
                    tail: *tail,
                },
            };
            vec![Candidate {
                ni: config.ni,
                profile,
                power,
                power_label: 0.0,
            }]
        })
        .collect();
    let solution = solve(n_data, config.tp, &candidates, SelectKey::Energy)?;
    Ok(solution.value(n_data, 0).energy)
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

/// Chosen round size and power for one dof level, with the level's
/// stationary-regime expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct DofPlan {
    pub dof: usize,
    pub ni: usize,
    pub power: f64,
    pub expected_seconds: f64,
    pub expected_joules: f64,
}

/// Result of a per-level exhaustive search: the stationary choice per dof
/// level plus the full trace-aligned expectation from slot 0 at the top
/// level (per-level choices inside the trace region may deviate from the
/// stationary ones and are folded into the totals).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedSchedule {
    pub per_dof: Vec<DofPlan>,
    pub expected_seconds: f64,
    pub expected_joules: f64,
}

impl OptimizedSchedule {
    /// Stationary round sizes indexed by dof level (entry 0 is dof 1).
    pub fn ni_star(&self) -> Vec<usize> {
        self.per_dof.iter().map(|p| p.ni).collect()
    }

    /// Rescales the power columns for a run at a different fixed transmit
    /// power. Valid when the erasure profile does not depend on the power
    /// (energy is linear in it at fixed transition probabilities).
    pub fn with_round_power(mut self, power: f64) -> Self {
        for plan in &mut self.per_dof {
            plan.power *= power;
            plan.expected_joules *= power;
        }
        self.expected_joules *= power;
        self
    }

    /// CSV serialization: `dof,ni_star,power,expected_seconds,expected_joules`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dof,ni_star,power,expected_seconds,expected_joules\n");
        for plan in &self.per_dof {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                plan.dof, plan.ni, plan.power, plan.expected_seconds, plan.expected_joules
            );
        }
        out
    }
}

fn plans_from_solution(solution: &Solution, candidates: &[Vec<Candidate>]) -> Vec<DofPlan> {
    (1..candidates.len() + 1)
        .map(|dof| {
            let chosen = &candidates[dof - 1][solution.tail_choice[dof]];
            DofPlan {
                dof,
                ni: chosen.ni,
                power: chosen.power_label,
                expected_seconds: solution.tail[dof].time,
                expected_joules: solution.tail[dof].energy,
            }
        })
        .collect()
}

/// Minimizes the expected delivery time over the round size, searching
/// ni in {i, ..., ni_max} at each dof level i (levels above the cap send
/// exactly i). Ties break toward the smaller ni. Energy columns assume unit
/// round power; rescale with [`OptimizedSchedule::with_round_power`].
pub fn optimize_ni(
    profile: &ErasureProfile,
    n_data: usize,
    tp: f64,
    ni_max: usize,
) -> Result<OptimizedSchedule> {
    if n_data == 0 {
        return Err(Error::domain("n_data must be >= 1"));
    }
    if ni_max == 0 {
        return Err(Error::domain("ni_max must be >= 1"));
    }
    if !(tp > 0.0) || !tp.is_finite() {
        return Err(Error::domain(format!("packet duration must be > 0, got {tp}")));
    }
    let candidates: Vec<Vec<Candidate>> = (1..=n_data)
        .map(|dof| {
            (dof..=ni_max.max(dof))
                .map(|ni| Candidate {
                    ni,
                    profile,
                    power: PowerRef::Constant(1.0),
                    power_label: 1.0,
                })
                .collect()
        })
        .collect();
    let solution = solve(n_data, tp, &candidates, SelectKey::Time)?;
    let per_dof = plans_from_solution(&solution, &candidates);
    let total = solution.value(n_data, 0);
    Ok(OptimizedSchedule {
        per_dof,
        expected_seconds: total.time,
        expected_joules: total.energy,
    })
}

/// Joint exhaustive search over (power level, round size) per dof level,
/// minimizing expected transmit energy. The erasure profile is regenerated
/// once per candidate power through `profile_gen` (erasure depends on power
/// through the SNR). A singleton grid reduces to the ni-only search
/// evaluated on energy.
pub fn optimize_energy<F>(
    mut profile_gen: F,
    n_data: usize,
    tp: f64,
    power_grid: &[f64],
    ni_max: usize,
) -> Result<OptimizedSchedule>
where
    F: FnMut(f64) -> Result<ErasureProfile>,
{
    if n_data == 0 {
        return Err(Error::domain("n_data must be >= 1"));
    }
    if ni_max == 0 {
        return Err(Error::domain("ni_max must be >= 1"));
    }
    if power_grid.is_empty() {
        return Err(Error::domain("power grid must be non-empty"));
    }
    if let Some(bad) = power_grid.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::domain(format!("grid powers must be > 0, got {bad}")));
    }
    if !(tp > 0.0) || !tp.is_finite() {
        return Err(Error::domain(format!("packet duration must be > 0, got {tp}")));
    }
    let mut powers: Vec<f64> = power_grid.to_vec();
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let profiles: Vec<(f64, ErasureProfile)> = powers
        .iter()
        .map(|&p| profile_gen(p).map(|prof| (p, prof)))
        .collect::<Result<_>>()?;

    let candidates: Vec<Vec<Candidate>> = (1..=n_data)
        .map(|dof| {
            profiles
                .iter()
                .flat_map(|(p, prof)| {
                    (dof..=ni_max.max(dof)).map(move |ni| Candidate {
                        ni,
                        profile: prof,
                        power: PowerRef::Constant(*p),
                        power_label: *p,
                    })
                })
                .collect()
        })
        .collect();
    let solution = solve(n_data, tp, &candidates, SelectKey::Energy)?;
    let per_dof = plans_from_solution(&solution, &candidates);
    let total = solution.value(n_data, 0);
    Ok(OptimizedSchedule {
        per_dof,
        expected_seconds: total.time,
        expected_joules: total.energy,
    })
}

// ===========================================================================
// Tests
// ===========================================================================
