//! Experiment specification: a TOML file with nested sections for the
//! channel, link, policy, simulation, and analytic settings. Named figure
//! experiments pin the reference parameter set (packet length 1/150 s, unit
//! transmit power, log-gain mean -0.5 and deviation 1, pair correlation 0.2)
//! and refuse overrides unless `allow_overrides` is set.

use fadelink::channel::{Ar1Params, LognormalParams};
use fadelink::link::{LinkBudget, PowerPolicy};
use fadelink::mcsim::{CodedPlan, ErasureModel, Scheme, SimConfig, DEFAULT_SLOT_CAP};
use serde::Deserialize;

pub const PIN_TP: f64 = 1.0 / 150.0;
pub const PIN_PT: f64 = 1.0;
pub const PIN_M: f64 = -0.5;
pub const PIN_SIGMA: f64 = 1.0;
pub const PIN_RHO: f64 = 0.2;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Raw TOML schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub output: String,
    #[serde(default)]
    pub allow_overrides: bool,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub analytic: AnalyticSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl Experiment {
    pub fn is_named(&self) -> bool {
        !matches!(self, Experiment::Custom)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// One-step log-gain correlation for the dependent regimes. Required:
    /// no value is claimed as a reference default.
    pub a1: Option<f64>,
}

fn default_m() -> f64 {
    PIN_M
}
fn default_sigma() -> f64 {
    PIN_SIGMA
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            m: PIN_M,
            sigma: PIN_SIGMA,
            a1: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_bits")]
    pub bits_per_packet: u32,
}

fn default_rate() -> f64 {
    150.0
}
fn default_bits() -> u32 {
    1
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            rate: 150.0,
            bits_per_packet: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_pt")]
    pub pt: f64,
    pub pt_max: Option<f64>,
    pub p_out: Option<f64>,
}

fn default_kind() -> String {
    "fixed".into()
}
fn default_pt() -> f64 {
    PIN_PT
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: "fixed".into(),
            pt: PIN_PT,
            pt_max: None,
            p_out: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    #[serde(default = "default_tp")]
    pub tp: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_ni")]
    pub ni: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_slot_cap")]
    pub slot_cap: u64,
}

fn default_n_data() -> usize {
    5
}
fn default_tp() -> f64 {
    PIN_TP
}
fn default_scheme() -> String {
    "uncoded".into()
}
fn default_ni() -> usize {
    5
}
fn default_episodes() -> usize {
    10_000
}
fn default_grid() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0, 30.0]
}
fn default_slot_cap() -> u64 {
    DEFAULT_SLOT_CAP
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_data: default_n_data(),
            tp: PIN_TP,
            scheme: "uncoded".into(),
            ni: default_ni(),
            episodes: default_episodes(),
            seed: 0,
            snr_db: default_grid(),
            slot_cap: DEFAULT_SLOT_CAP,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_trace_slots")]
    pub trace_slots: usize,
    #[serde(default = "default_ni_max")]
    pub ni_max: usize,
}

fn default_rho() -> f64 {
    PIN_RHO
}
fn default_trace_slots() -> usize {
    256
}
fn default_ni_max() -> usize {
    8
}

impl Default for AnalyticSection {
    fn default() -> Self {
        Self {
            enabled: false,
            rho: PIN_RHO,
            trace_slots: default_trace_slots(),
            ni_max: default_ni_max(),
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One invariant violation, naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Checks every type invariant without running anything, collecting all
    /// violations rather than stopping at the first.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut push = |field: &str, message: String| {
            v.push(Violation {
                field: field.to_string(),
                message,
            })
        };

        if !(self.channel.sigma > 0.0) {
            push(
                "LognormalParams.sigma",
                format!("must be > 0, got {}", self.channel.sigma),
            );
        }
        if !self.channel.m.is_finite() {
            push("LognormalParams.m", "must be finite".into());
        }
        match self.channel.a1 {
            None => push("Ar1Params.a1", "required field is missing".into()),
            Some(a1) if !(0.0..=1.0).contains(&a1) => {
                push("Ar1Params.a1", format!("must lie in [0, 1], got {a1}"));
            }
            _ => {}
        }

        if !(self.link.rate > 0.0) {
            push("LinkBudget.rate", format!("must be > 0, got {}", self.link.rate));
        }
        if self.link.bits_per_packet == 0 {
            push("LinkBudget.B", "must be >= 1".into());
        }

        match self.policy.kind.as_str() {
            "fixed" => {
                if !(self.policy.pt > 0.0) {
                    push("PowerPolicy.pt", format!("must be > 0, got {}", self.policy.pt));
                }
            }
            "adaptive" => {
                if !(self.policy.pt > 0.0) {
                    push("PowerPolicy.pt", format!("must be > 0, got {}", self.policy.pt));
                }
                match self.policy.p_out {
                    None => push(
                        "PowerPolicy.p_out",
                        "adaptive policy requires a target outage probability".into(),
                    ),
                    Some(p) if !(p > 0.0 && p < 1.0) => {
                        push("PowerPolicy.p_out", format!("must lie in (0, 1), got {p}"));
                    }
                    _ => {}
                }
                match self.policy.pt_max {
                    None => push(
                        "PowerPolicy.pt_max",
                        "adaptive policy requires a maximum transmit power".into(),
                    ),
                    Some(pm) if pm < self.policy.pt => {
                        push(
                            "PowerPolicy.pt_max",
                            format!("must be >= pt, got pt_max={pm} pt={}", self.policy.pt),
                        );
                    }
                    _ => {}
                }
            }
            other => push("PowerPolicy.variant", format!("unknown policy kind '{other}'")),
        }

        if self.sim.n_data == 0 {
            push("SimConfig.n_data", "must be >= 1".into());
        }
        if !(self.sim.tp > 0.0) {
            push("SimConfig.tp", format!("must be > 0, got {}", self.sim.tp));
        }
        if self.sim.episodes == 0 {
            push("SimConfig.episodes", "must be >= 1".into());
        }
        if self.sim.slot_cap == 0 {
            push("SimConfig.slot_cap", "must be >= 1".into());
        }
        if self.sim.snr_db.is_empty() {
            push("SimConfig.snr_db", "grid must be non-empty".into());
        }
        match self.sim.scheme.as_str() {
            "uncoded" => {}
            "coded" => {
                if self.sim.ni == 0 {
                    push("CodedConfig.ni", "must be >= 1".into());
                }
            }
            other => push("SimConfig.scheme", format!("unknown scheme '{other}'")),
        }

        if !(self.analytic.rho > -1.0 && self.analytic.rho < 1.0) {
            push(
                "CorrelationMatrix.rho",
                format!("must lie in (-1, 1), got {}", self.analytic.rho),
            );
        }
        if self.analytic.ni_max == 0 {
            push("CodedConfig.ni_max", "must be >= 1".into());
        }
        if self.analytic.enabled && self.analytic.trace_slots == 0 {
            push("AnalyticSection.trace_slots", "must be >= 1".into());
        }

        if self.experiment.is_named() && !self.allow_overrides {
            let pins = [
                ("SimConfig.tp", self.sim.tp, PIN_TP),
                ("PowerPolicy.pt", self.policy.pt, PIN_PT),
                ("LognormalParams.m", self.channel.m, PIN_M),
                ("LognormalParams.sigma", self.channel.sigma, PIN_SIGMA),
                ("CorrelationMatrix.rho", self.analytic.rho, PIN_RHO),
            ];
            for (field, got, want) in pins {
                if !close(got, want) {
                    push(
                        field,
                        format!(
                            "named experiment {} pins this to {want}, got {got} \
                             (set allow_overrides = true to override)",
                            self.experiment.label()
                        ),
                    );
                }
            }
        }

        v
    }

    /// Builds the power policy from the validated sections.
    pub fn policy(&self, p: &LognormalParams) -> fadelink::Result<PowerPolicy> {
        match self.policy.kind.as_str() {
            "adaptive" => PowerPolicy::adaptive(
                self.policy.pt,
                self.policy.pt_max.unwrap_or(f64::INFINITY),
                self.policy.p_out.unwrap_or(0.1),
                p,
            ),
            _ => PowerPolicy::fixed(self.policy.pt),
        }
    }

    /// Builds the base simulator configuration for a regime with the given
    /// correlation and scheme. The budget's noise density is a placeholder;
    /// sweeps re-derive it per SNR point.
    pub fn sim_config(&self, a1: f64, scheme: Scheme) -> fadelink::Result<SimConfig> {
        let lognormal = LognormalParams::new(self.channel.m, self.channel.sigma)?;
        let policy = self.policy(&lognormal)?;
        let budget = LinkBudget::for_power(
            policy.pt(),
            policy.pt() / self.link.rate,
            self.link.rate,
            self.link.bits_per_packet,
        )?;
        Ok(SimConfig {
            n_data: self.sim.n_data,
            tp: self.sim.tp,
            scheme,
            policy,
            budget,
            lognormal,
            ar1: Ar1Params::from_a1(a1, self.sim.tp)?,
            episodes: self.sim.episodes,
            seed: self.sim.seed,
            slot_cap: self.sim.slot_cap,
            erasure: ErasureModel::Channel,
        })
    }

    /// The regimes this experiment runs: named figures compare the
    /// independent channel, the dependent channel, and the dependent coded
    /// scheme; a custom spec runs exactly what it says.
    pub fn regimes(&self) -> Vec<(String, f64, Scheme)> {
        let a1 = self.channel.a1.unwrap_or(0.0);
        let coded = Scheme::Coded(CodedPlan::FixedNi(self.sim.ni));
        if self.experiment.is_named() {
            vec![
                ("independent".into(), 0.0, Scheme::Uncoded),
                ("dependent".into(), a1, Scheme::Uncoded),
                ("dependent-coded".into(), a1, coded),
            ]
        } else {
            let scheme = if self.sim.scheme == "coded" {
                coded
            } else {
                Scheme::Uncoded
            };
            vec![("custom".into(), a1, scheme)]
        }
    }

    /// The effective settings, rendered as `# key = value` comment lines so
    /// every emitted CSV is self-describing.
    pub fn comment_header(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str("# ");
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("experiment", self.experiment.label().into());
        line("channel.m", format!("{}", self.channel.m));
        line("channel.sigma", format!("{}", self.channel.sigma));
        line(
            "channel.a1",
            self.channel
                .a1
                .map(|a| format!("{a}"))
                .unwrap_or_else(|| "unset".into()),
        );
        line("link.rate", format!("{}", self.link.rate));
        line("link.bits_per_packet", format!("{}", self.link.bits_per_packet));
        line("policy.kind", self.policy.kind.clone());
        line("policy.pt", format!("{}", self.policy.pt));
        if let Some(pm) = self.policy.pt_max {
            line("policy.pt_max", format!("{pm}"));
        }
        if let Some(po) = self.policy.p_out {
            line("policy.p_out", format!("{po}"));
        }
        line("sim.n_data", format!("{}", self.sim.n_data));
        line("sim.tp", format!("{}", self.sim.tp));
        line("sim.scheme", self.sim.scheme.clone());
        line("sim.ni", format!("{}", self.sim.ni));
        line("sim.episodes", format!("{}", self.sim.episodes));
        line("sim.seed", format!("{}", self.sim.seed));
        line(
            "sim.snr_db",
            format!(
                "[{}]",
                self.sim
                    .snr_db
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
        line("sim.slot_cap", format!("{}", self.sim.slot_cap));
        line("analytic.enabled", format!("{}", self.analytic.enabled));
        line("analytic.rho", format!("{}", self.analytic.rho));
        line("analytic.trace_slots", format!("{}", self.analytic.trace_slots));
        line("analytic.ni_max", format!("{}", self.analytic.ni_max));
        s
    }
}
