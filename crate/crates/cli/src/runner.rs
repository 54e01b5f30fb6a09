//! Experiment orchestration: sweeps per regime, CSV emission, analytic
//! companion tables, and the inline sweep subcommand.

use crate::config::ExperimentSpec;
use fadelink::channel::{gen_ar1_trace, lognormal_pdf, Ar1Params, LognormalParams};
use fadelink::coding::{expected_time_coded, optimize_ni, CodedConfig};
use fadelink::delay::{erasure_profile_from_trace, expected_time_uncoded};
use fadelink::link::{
    ber_adaptive, ber_fixed, effective_power, packet_erasure, q2, LinkBudget, PowerPolicy,
};
use fadelink::mcsim::{
    policy_label, scheme_label, sweep, sweep_csv_row, CodedPlan, ErasureModel, Scheme, SimConfig,
    SweepPoint, SWEEP_CSV_HEADER,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

/// CLI failure, carrying its exit code: 2 validation, 3 convergence, 4 I/O.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failure: {m}"),
            CliError::Convergence(m) => write!(f, "convergence failure: {m}"),
            CliError::Io(m) => write!(f, "I/O failure: {m}"),
        }
    }
}

impl From<fadelink::Error> for CliError {
    fn from(e: fadelink::Error) -> Self {
        match e {
            fadelink::Error::Convergence(m) => CliError::Convergence(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// validate subcommand
// ---------------------------------------------------------------------------

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path)?;
    ExperimentSpec::parse(&text).map_err(|e| CliError::Validation(format!("parse error: {e}")))
}

/// Prints every violation; Ok only when the list is empty.
pub fn validate(path: &Path) -> Result<(), CliError> {
    let spec = load_spec(path)?;
    let violations = spec.validate();
    if violations.is_empty() {
        println!("ok: no violations");
        Ok(())
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Err(CliError::Validation(format!(
            "{} violation(s) found",
            violations.len()
        )))
    }
}

// ---------------------------------------------------------------------------
// run subcommand
// ---------------------------------------------------------------------------

fn summary_line(name: &str, p: &SweepPoint) {
    println!(
        "{name:<16} snr={:>6.1} dB  time={:.6} s  throughput={:.2} pkt/s  erasure={:.4}  energy={:.4} J",
        p.snr_db, p.time.mean, p.throughput.mean, p.erasure.mean, p.energy.mean
    );
}

pub fn run(path: &Path) -> Result<(), CliError> {
    let spec = load_spec(path)?;
    let violations = spec.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(CliError::Validation(format!(
            "{} violation(s) found",
            violations.len()
        )));
    }

    let mut csv = spec.comment_header();
    csv.push_str(SWEEP_CSV_HEADER);
    csv.push('\n');
    for (name, a1, scheme) in spec.regimes() {
        let config = spec.sim_config(a1, scheme)?;
        let points = sweep(&config, &spec.sim.snr_db)?;
        for p in &points {
            summary_line(&name, p);
            csv.push_str(&sweep_csv_row(&config, p));
            csv.push('\n');
        }
    }
    let out_path = PathBuf::from(&spec.output);
    write_file(&out_path, &csv)?;
    println!("wrote {}", out_path.display());

    if spec.analytic.enabled {
        for (path, contents) in analytic_companions(&spec)? {
            write_file(&path, &contents)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Analytic companion tables
// ---------------------------------------------------------------------------

/// Stationary mean packet erasure under a policy: quadrature of the per-gain
/// erasure against the lognormal density over a wide log-domain grid.
fn mean_erasure_analytic(
    budget: &LinkBudget,
    policy: &PowerPolicy,
    p: &LognormalParams,
) -> fadelink::Result<f64> {
    let lo = p.m() - 10.0 * p.sigma();
    let hi = p.m() + 10.0 * p.sigma();
    let n = 4000;
    let step = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let h = (lo + i as f64 * step).exp();
        let pe = match policy {
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
        // lognormal density times the Jacobian of h = e^x
        acc += w * pe * lognormal_pdf(h, p)? * h * step;
    }
    Ok(acc)
}

/// Builds the per-SNR analytic summary plus the delay-table and coding
/// schedule CSVs, all derived from one seeded reference trace of the
/// dependent regime.
fn analytic_companions(spec: &ExperimentSpec) -> Result<Vec<(PathBuf, String)>, CliError> {
    let p = LognormalParams::new(spec.channel.m, spec.channel.sigma)
        .map_err(CliError::from)?;
    let a1 = spec.channel.a1.unwrap_or(0.0);
    let ar1 = Ar1Params::from_a1(a1, spec.sim.tp).map_err(CliError::from)?;
    let policy = spec.policy(&p).map_err(CliError::from)?;
    let trace = gen_ar1_trace(&p, &ar1, spec.analytic.trace_slots, spec.sim.seed)
        .map_err(CliError::from)?;

    let out = PathBuf::from(&spec.output);
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut files = Vec::new();
    let mut summary = spec.comment_header();
    summary.push_str(
        "snr_db,a1,analytic_mean_erasure,analytic_time_uncoded,analytic_time_coded,correlated_pair_bound\n",
    );

    for &snr_db in &spec.sim.snr_db {
        let snr = 10f64.powf(snr_db / 10.0);
        let budget = LinkBudget::for_power(
            policy.pt(),
            policy.pt() / (snr * spec.link.rate),
            spec.link.rate,
            spec.link.bits_per_packet,
        )
        .map_err(CliError::from)?;

        let profile =
            erasure_profile_from_trace(&trace, &budget, &policy, &p).map_err(CliError::from)?;
        let table = expected_time_uncoded(&profile, spec.sim.n_data, spec.sim.tp)?;
        let time_uncoded = table.time(spec.sim.n_data, 0);
        let coded_config = CodedConfig::new(
            spec.sim.n_data,
            spec.sim.ni,
            spec.sim.tp,
            spec.sim.ni.max(spec.analytic.ni_max),
        )?;
        let time_coded = expected_time_coded(&profile, &coded_config, 0)?;
        let mean_pe = mean_erasure_analytic(&budget, &policy, &p)?;
        // pair bound at the median gain: both arguments reduce to ln(snr)/sigma
        let arg = snr.ln() / p.sigma();
        let pair_bound = q2(arg, arg, spec.analytic.rho)?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{}",
            snr_db,
            a1,
            mean_pe,
            time_uncoded,
            time_coded,
            pair_bound
        );

        files.push((
            dir.join(format!("{stem}_delay_{snr_db}dB.csv")),
            table.to_csv(),
        ));
        let schedule = optimize_ni(&profile, spec.sim.n_data, spec.sim.tp, spec.analytic.ni_max)?
            .with_round_power(policy.pt());
        files.push((
            dir.join(format!("{stem}_coding_{snr_db}dB.csv")),
            schedule.to_csv(),
        ));
    }
    files.insert(0, (dir.join(format!("{stem}_analytic.csv")), summary));
    Ok(files)
}

// ---------------------------------------------------------------------------
// sweep subcommand
// ---------------------------------------------------------------------------

pub struct SweepArgs {
    pub snr_db: Vec<f64>,
    pub episodes: usize,
    pub seed: u64,
    pub scheme: String,
    pub policy: String,
    pub a1: f64,
    pub out: PathBuf,
    pub n_data: usize,
    pub ni: Option<usize>,
    pub bits_per_packet: u32,
}

/// Inline sweep with reference defaults for everything not exposed as a
/// flag: tp = 1/150 s, pt = 1, m = -0.5, sigma = 1, rate = 150. The
/// adaptive policy uses p_out = 0.1 and pt_max = 10 pt.
pub fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.snr_db.is_empty() {
        return Err(CliError::Validation("SimConfig.snr_db: grid must be non-empty".into()));
    }
    if !(0.0..=1.0).contains(&args.a1) {
        return Err(CliError::Validation(format!(
            "Ar1Params.a1: must lie in [0, 1], got {}",
            args.a1
        )));
    }
    let tp = 1.0 / 150.0;
    let p = LognormalParams::new(-0.5, 1.0).map_err(CliError::from)?;
    let policy = match args.policy.as_str() {
        "fixed" => PowerPolicy::fixed(1.0).map_err(CliError::from)?,
        "adaptive" => PowerPolicy::adaptive(1.0, 10.0, 0.1, &p).map_err(CliError::from)?,
        other => {
            return Err(CliError::Validation(format!(
                "PowerPolicy.variant: unknown policy '{other}'"
            )))
        }
    };
    let scheme = match args.scheme.as_str() {
        "uncoded" => Scheme::Uncoded,
        "coded" => Scheme::Coded(CodedPlan::FixedNi(args.ni.unwrap_or(args.n_data).max(1))),
        other => {
            return Err(CliError::Validation(format!(
                "SimConfig.scheme: unknown scheme '{other}'"
            )))
        }
    };
    let config = SimConfig {
        n_data: args.n_data,
        tp,
        scheme,
        policy,
        budget: LinkBudget::for_power(1.0, 1.0 / 150.0, 150.0, args.bits_per_packet)
            .map_err(CliError::from)?,
        lognormal: p,
        ar1: Ar1Params::from_a1(args.a1, tp).map_err(CliError::from)?,
        episodes: args.episodes,
        seed: args.seed,
        slot_cap: fadelink::mcsim::DEFAULT_SLOT_CAP,
        erasure: ErasureModel::Channel,
    };
    config.validate().map_err(CliError::from)?;
    let points = sweep(&config, &args.snr_db)?;
    let mut csv = String::new();
    let _ = writeln!(csv, "# scheme = {}", scheme_label(&config.scheme));
    let _ = writeln!(csv, "# policy = {}", policy_label(&config.policy));
    let _ = writeln!(csv, "# a1 = {}", config.ar1.a1());
    let _ = writeln!(csv, "# n_data = {}", config.n_data);
    let _ = writeln!(csv, "# tp = {}", config.tp);
    let _ = writeln!(csv, "# bits_per_packet = {}", config.budget.bits_per_packet());
    let _ = writeln!(csv, "# episodes = {}", config.episodes);
    let _ = writeln!(csv, "# seed = {}", config.seed);
    csv.push_str(SWEEP_CSV_HEADER);
    csv.push('\n');
    for pt in &points {
        summary_line("sweep", pt);
        csv.push_str(&sweep_csv_row(&config, pt));
        csv.push('\n');
    }
    write_file(&args.out, &csv)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
