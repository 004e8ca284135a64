//! Command-line surface shared by every laboratory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blockscan::{opening, BlockDecomposition};
use crate::blockstats::{good_prob_estimate, promotion_probability, tail_histogram};
use crate::chain::{run, CapRule, CsvSink, RunOptions, StepSink, Trajectory};
use crate::error::{Error, Result};
use crate::gfun::evaluate;
use crate::params::{build_scales, ScaleTable, SpecConfig};
use crate::phaselab::{boundary_contrast, PersistenceReport, ScaleReport};
use crate::report::{canonical_json, config_hash, hex, write_report, RunManifest};
use crate::varlab::{analytic_bound, exact_var_permuted, lp_report, p_star, search_var, VarEstimate};
use crate::window::{parse_pm_text, parse_two_row_text, unpack_bits, Boundary, Spin, WallPadded};

pub const THREADS_ENV: &str = "GCHAIN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "gchain", version, about = "Block-pattern g-function engine and laboratories")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Write a run manifest to this path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in preset (A or B), used when no file is given.
    #[arg(long, default_value = "A")]
    pub preset: String,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum BoundaryArg {
    Plus,
    Minus,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Plus => Boundary::Plus,
            BoundaryArg::Minus => Boundary::Minus,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum CapArg {
    Empty,
    Boundary,
    Shuffled,
}

impl From<CapArg> for CapRule {
    fn from(c: CapArg) -> Self {
        match c {
            CapArg::Empty => CapRule::Empty,
            CapArg::Boundary => CapRule::Boundary,
            CapArg::Shuffled => CapRule::Shuffled,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum SeqFormat {
    Auto,
    Text,
    Bits,
    /// y-row of a trajectory written by `simulate`.
    Traj,
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq, Eq)]
pub enum VarMode {
    Exact,
    Search,
    Bound,
    Report,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the scale table as CSV.
    Scales {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long, default_value_t = 1 << 24)]
        window: u64,
        /// Clamp the base-scale bias instead of rejecting it.
        #[arg(long)]
        clamp: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate g on a two-row window file (x line, then y line, oldest first).
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        window: PathBuf,
        /// Wall used to pad windows shorter than the look-back depth.
        #[arg(long, value_enum, default_value = "plus")]
        boundary: BoundaryArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block decomposition of a y-sequence file as CSV.
    Blocks {
        #[command(flatten)]
        cfg: ConfigArgs,
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: SeqFormat,
        /// Keep only the first n symbols (packed files round up to bytes).
        #[arg(long)]
        len: Option<usize>,
        /// Restrict to one scale.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the chain from a wall.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "plus")]
        boundary: BoundaryArg,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(long, value_enum, default_value = "empty")]
        cap_rule: CapArg,
        /// Packed trajectory; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Per-step diagnostics CSV.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Monte-Carlo statistics of the block measure m_k.
    Blockstats {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        jmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variation estimates and caps.
    Var {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        mode: VarMode,
        /// Lag(s); repeat or separate with commas.
        #[arg(long, value_delimiter = ',', required = true)]
        j: Vec<usize>,
        /// Enumerated sites for exact mode.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 20_000)]
        budget: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Exponent for the summability report; defaults to p* + 1.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 1 << 22)]
        jmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON summary for report mode.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Two-boundary persistence experiment.
    Phase {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1 << 22)]
        steps: u64,
        /// Seeds for the plus wall: a list or a range such as 1-10.
        #[arg(long, default_value = "1-10")]
        seeds: String,
        /// Seeds for the minus wall; defaults to the plus seeds shifted by 100.
        #[arg(long)]
        minus_seeds: Option<String>,
        #[arg(long, value_enum, default_value = "empty")]
        cap_rule: CapArg,
        #[arg(long)]
        out: PathBuf,
        /// Per-scale CSV for plotting.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Resolved inputs and written files of one run, for the manifest.
#[derive(Default)]
struct Outcome {
    config: Option<SpecConfig>,
    seeds: Vec<u64>,
    outputs: Vec<PathBuf>,
}

/// Strict JSON load; unknown keys and missing fields are errors.
pub fn load_config(path: &Path) -> Result<SpecConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: SpecConfig =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    build_scales(&config)?;
    Ok(config)
}

fn resolve(cfg: &ConfigArgs) -> Result<(SpecConfig, ScaleTable)> {
    let config = match &cfg.config {
        Some(path) => load_config(path)?,
        None => SpecConfig::preset(&cfg.preset)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {:?}", cfg.preset)))?,
    };
    let scales = build_scales(&config)?;
    Ok((config, scales))
}

fn emit(text: &str, out: Option<&Path>, outcome: &mut Outcome) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text)?;
            outcome.outputs.push(p.to_path_buf());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Parses "1-10", "1,2,5" or a mix.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Parse(format!("bad seed list {text:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn var_csv(rows: &[(usize, Option<&VarEstimate>, f64, Option<f64>, &str)]) -> String {
    let mut s = String::from("j,lower_bound,analytic_cap,sharper_cap,method\n");
    for (j, est, cap, sharper, method) in rows {
        let lb = fmt_opt(est.map(|e| e.lower_bound));
        let _ = writeln!(s, "{j},{lb},{cap:.16e},{},{method}", fmt_opt(*sharper));
    }
    s
}

fn read_sequence(path: &Path, format: SeqFormat, len: Option<usize>) -> Result<Vec<Spin>> {
    if let SeqFormat::Traj = format {
        let mut y = Trajectory::read(path)?.y;
        if let Some(n) = len {
            y.truncate(n);
        }
        return Ok(y);
    }
    let bytes = std::fs::read(path)?;
    let as_text = match format {
        SeqFormat::Text => true,
        SeqFormat::Bits | SeqFormat::Traj => false,
        SeqFormat::Auto => bytes.iter().all(|b| matches!(b, b'+' | b'-') || b.is_ascii_whitespace()),
    };
    let mut seq = if as_text {
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        parse_pm_text(&text)?
    } else {
        unpack_bits(&bytes)
    };
    if let Some(n) = len {
        if n > seq.len() {
            return Err(Error::Parse(format!("--len {n} exceeds the {} symbols in the file", seq.len())));
        }
        seq.truncate(n);
    }
    Ok(seq)
}

fn execute(command: Command) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    match command {
        Command::Scales { eps, k, kmax, window, clamp, cfg, out } => {
            let config = match (eps, k, kmax) {
                (Some(e), Some(k), Some(m)) => SpecConfig { clamp, ..SpecConfig::new(e, k, m, window) },
                (None, None, None) => resolve(&cfg)?.0,
                _ => return Err(Error::InvalidConfig("--eps, --K and --kmax go together".into())),
            };
            let scales = build_scales(&config)?;
            emit(&scales.to_csv(), out.as_deref(), &mut outcome)?;
            outcome.config = Some(config);
        }
        Command::Eval { cfg, window, boundary, out } => {
            let (config, scales) = resolve(&cfg)?;
            let text = std::fs::read_to_string(&window)?;
            let w = parse_two_row_text(&text, boundary.into())?;
            let depth = scales.window_depth as usize;
            let g = if crate::window::YRow::len(&w) >= depth {
                evaluate(&w, &scales)?
            } else {
                evaluate(&WallPadded::to_length(&w, depth, boundary.into()), &scales)?
            };
            let report = serde_json::json!({
                "p11": g.p11, "pm11": g.pm11, "p1m1": g.p1m1, "pm1m1": g.pm1m1,
                "k0": g.k0_used, "s_size": g.s_size, "upsilon": g.upsilon_used,
                "capped": g.plus.capped, "minus_branch": g.minus,
            });
            emit(&(canonical_json(&report)? + "\n"), out.as_deref(), &mut outcome)?;
            outcome.config = Some(config);
        }
        Command::Blocks { cfg, input, format, len, k, out } => {
            let (config, scales) = resolve(&cfg)?;
            let y = read_sequence(&input, format, len)?;
            if y.is_empty() {
                return Err(Error::Parse("empty sequence".into()));
            }
            let (lo, hi) = match k {
                Some(k) => {
                    if k < scales.base_scale || k > scales.k_max {
                        return Err(Error::ScaleOutOfRange { k, lo: scales.base_scale, hi: scales.k_max });
                    }
                    (k, k)
                }
                None => (scales.base_scale, scales.k_max),
            };
            let decomp = BlockDecomposition::with_range(&y, &scales, lo, hi);
            let mut s = String::from("k,i,a,b,kind,opening_size\n");
            for k in lo..=hi {
                for (i, b) in decomp.blocks(k)?.iter().enumerate() {
                    let c = opening(&y, &scales, b)?.len();
                    let _ = writeln!(s, "{k},{},{},{},{},{c}", i + 1, b.a, b.b, b.kind.tag());
                }
            }
            emit(&s, out.as_deref(), &mut outcome)?;
            outcome.config = Some(config);
        }
        Command::Simulate { cfg, boundary, steps, seed, replicate, cap_rule, out, records } => {
            let (config, scales) = resolve(&cfg)?;
            let opts = RunOptions { replicate, cap_rule: cap_rule.into() };
            let mut csv = match &records {
                Some(p) => Some(CsvSink::new(std::io::BufWriter::new(std::fs::File::create(p)?))),
                None => None,
            };
            let sink = csv.as_mut().map(|c| c as &mut dyn StepSink);
            let (traj, stats) = run(&config, &scales, boundary.into(), seed, steps, opts, sink)?;
            if let Some(c) = csv {
                c.into_inner().flush()?;
                outcome.outputs.push(records.expect("records path"));
            }
            traj.write(&out)?;
            outcome.outputs.push(out.clone());
            let sidecar = sidecar_path(&out);
            let meta = serde_json::json!({
                "config": config,
                "config_hash": hex(&config_hash(&config)),
                "boundary": Boundary::from(boundary).tag(),
                "seed": seed,
                "replicate": replicate,
                "cap_rule": opts.cap_rule,
                "steps": steps,
                "stats": stats,
                "k0_tail": stats.k0_tail(),
            });
            write_report(&meta, &sidecar)?;
            outcome.outputs.push(sidecar);
            outcome.config = Some(config);
            outcome.seeds = vec![seed];
        }
        Command::Blockstats { cfg, k, samples, seed, jmax, out } => {
            let (config, scales) = resolve(&cfg)?;
            if k < scales.base_scale || k > scales.k_max {
                return Err(Error::ScaleOutOfRange { k, lo: scales.base_scale, hi: scales.k_max });
            }
            let hist = tail_histogram(&scales, k, samples, jmax, seed)?;
            let good = good_prob_estimate(&scales, k, samples, seed.wrapping_add(1))?;
            let promo = promotion_probability(&scales, k, samples, seed.wrapping_add(2))?;
            let mut s = String::from("stat,value,stderr,bound_lo,bound_hi,flag\n");
            for b in &hist.buckets {
                let _ = writeln!(
                    s,
                    "tail_{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    b.j, b.mass, b.stderr, b.bound_lo, b.bound_hi, b.flag as u8
                );
            }
            let _ = writeln!(s, "mean_len,{:.16e},{:.16e},,,0", hist.mean_len, hist.mean_len_stderr);
            let _ = writeln!(
                s,
                "mean_len_ratio,{:.16e},{:.16e},,,0",
                good.mean_len_ratio.value, good.mean_len_ratio.stderr
            );
            let _ = writeln!(s, "y_tilde,{:.16e},,{:.16e},{:.16e},0", hist.y_tilde, hist.y_tilde_ref, hist.y_tilde_ref);
            let _ = writeln!(s, "good_plain,{:.16e},{:.16e},,,0", good.plain.value, good.plain.stderr);
            let _ = writeln!(s, "good_size_biased,{:.16e},{:.16e},,,0", good.size_biased.value, good.size_biased.stderr);
            let _ = writeln!(s, "mean_opening,{:.16e},,,,0", good.mean_opening);
            let _ = writeln!(s, "promotion,{:.16e},{:.16e},,,0", promo.value, promo.stderr);
            emit(&s, out.as_deref(), &mut outcome)?;
            outcome.config = Some(config);
            outcome.seeds = vec![seed];
        }
        Command::Var { cfg, mode, j, depth, budget, seed, p, jmax, out, json } => {
            let (config, scales) = resolve(&cfg)?;
            if j.contains(&0) {
                return Err(Error::InvalidConfig("lags start at 1".into()));
            }
            let estimates: Vec<Option<VarEstimate>> = match mode {
                VarMode::Bound => vec![None; j.len()],
                VarMode::Exact => {
                    let depth = depth.ok_or_else(|| Error::InvalidConfig("exact mode needs --depth".into()))?;
                    j.iter()
                        .map(|&j| exact_var_permuted(&scales, j, depth, Boundary::Plus).map(Some))
                        .collect::<Result<_>>()?
                }
                VarMode::Search | VarMode::Report => j
                    .iter()
                    .map(|&j| search_var(&scales, j, budget, seed, None, Boundary::Plus).map(Some))
                    .collect::<Result<_>>()?,
            };
            let rows: Vec<_> = j
                .iter()
                .zip(&estimates)
                .map(|(&j, e)| {
                    let b = analytic_bound(&scales, j);
                    let method = match e {
                        None => "analytic",
                        Some(e) => match e.method {
                            crate::varlab::Method::Exhaustive => "exhaustive",
                            crate::varlab::Method::RandomSearch => "search",
                        },
                    };
                    (j, e.as_ref(), b.value, b.sharper, method)
                })
                .collect();
            emit(&var_csv(&rows), out.as_deref(), &mut outcome)?;
            if mode == VarMode::Report {
                let p = p.unwrap_or(p_star(config.epsilon) + 1.0);
                let found: Vec<VarEstimate> = estimates.into_iter().flatten().collect();
                let report = lp_report(&scales, p, jmax, &found);
                match &json {
                    Some(path) => {
                        write_report(&report, path)?;
                        outcome.outputs.push(path.clone());
                    }
                    None => eprintln!("{}", canonical_json(&report)?),
                }
            }
            outcome.config = Some(config);
            outcome.seeds = vec![seed];
        }
        Command::Phase { cfg, steps, seeds, minus_seeds, cap_rule, out, csv } => {
            let (config, scales) = resolve(&cfg)?;
            let plus = parse_seeds(&seeds)?;
            let minus = match minus_seeds {
                Some(s) => parse_seeds(&s)?,
                None => plus.iter().map(|s| s + 100).collect(),
            };
            let report = boundary_contrast(&config, &scales, &plus, &minus, steps, cap_rule.into())?;
            let per_scale: Vec<serde_json::Value> = (0..report.reports[0].scales.len())
                .map(|i| {
                    fn row(b: &[PersistenceReport], i: usize) -> Vec<&ScaleReport> {
                        b.iter().map(|r| &r.scales[i]).collect()
                    }
                    let (p, m) = report.reports.split_at(plus.len());
                    serde_json::json!({
                        "k": report.reports[0].scales[i].k,
                        "plus": row(p, i),
                        "minus": row(m, i),
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "config": config,
                "summary": report,
                "per_scale": per_scale,
                "spacing": report.reports[0].beauty_spacing,
            });
            write_report(&doc, &out)?;
            outcome.outputs.push(out);
            if let Some(path) = csv {
                let mut s = String::from("boundary,seed,k,complete_blocks,mean_signature,ci_lo,ci_hi,agreement,good_fraction,beautiful_frequency\n");
                for r in &report.reports {
                    for sc in &r.scales {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                            r.boundary.tag(),
                            r.seed,
                            sc.k,
                            sc.complete_blocks,
                            sc.mean_signature,
                            sc.ci_lo,
                            sc.ci_hi,
                            fmt_opt(sc.agreement.as_ref().map(|a| a.rate)),
                            sc.good_fraction.value,
                            sc.beautiful_frequency.value,
                        );
                    }
                }
                std::fs::write(&path, s)?;
                outcome.outputs.push(path);
            }
            outcome.config = Some(config);
            outcome.seeds = plus.into_iter().chain(minus).collect();
        }
    }
    Ok(outcome)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Scales { .. } => "scales",
        Command::Eval { .. } => "eval",
        Command::Blocks { .. } => "blocks",
        Command::Simulate { .. } => "simulate",
        Command::Blockstats { .. } => "blockstats",
        Command::Var { .. } => "var",
        Command::Phase { .. } => "phase",
    }
}

/// Parses argv, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on usage or validation failure, 2 on a runtime error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let name = subcommand_name(&cli.command);
    let mut manifest = RunManifest::start(name, None, Vec::new());
    let result = execute(cli.command).and_then(|outcome| {
        if let Some(path) = &cli.manifest {
            manifest.config = outcome.config;
            manifest.seeds = outcome.seeds;
            for p in &outcome.outputs {
                manifest.add_output(p)?;
            }
            manifest.finish(path)?;
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
