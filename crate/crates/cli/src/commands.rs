//! Subcommand implementations. Each returns the CSV files it produced, with
//! the run manifest embedded as `#` comment lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ctflood_core::airtime::{air_time, radio_slot, slot_length, symbols_on_air, Framing, PhyMode, DEFAULT_GUARD};
use ctflood_core::analytic::{ber_2ct_equal, ber_bfsk, Ebn0};
use ctflood_core::link::{default_link_table, Axes, LinkTable};
use ctflood_core::mc::{
    calibrate_link_table, ebn0_from_sample_snr, per_rows_to_csv, run_ber_point, run_per_sweep, BeatSpec,
    CalibrationGrid, PerRow, PhyExperimentSpec,
};
use ctflood_core::mesh::{rounds_to_csv, run, summarize, summary_to_csv, SimConfig, Topology};
use ctflood_core::node::NodePolicy;
use ctflood_core::waveform::ModulationParams;

use crate::config::{ConfigFile, Resolver};
use crate::{AirtimeArgs, BerArgs, CalibrateArgs, Cli, CliError, Command, FloodArgs, OutputFile, PerArgs};

struct Context<'a> {
    subcommand: &'static str,
    seed: u64,
    mode: Option<PhyMode>,
    framing: Framing,
    resolver: Resolver<'a>,
}

impl Context<'_> {
    fn manifest(&self, out: Option<&std::path::Path>, file: &str) -> String {
        let mut m = String::new();
        let _ = writeln!(m, "# tool=ctflood {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "# subcommand={}", self.subcommand);
        let _ = writeln!(m, "# seed={}", self.seed);
        if let Some(mode) = self.mode {
            let _ = writeln!(m, "# mode={mode}");
        }
        let _ = writeln!(m, "# framing={:?}", self.framing);
        for (k, v) in &self.resolver.effective {
            let _ = writeln!(m, "# param.{k}={v}");
        }
        let target = out.map_or_else(|| "stdout".to_string(), |d| d.join(file).display().to_string());
        let _ = writeln!(m, "# output={target}");
        m
    }
}

pub fn dispatch(cli: &Cli) -> Result<Vec<OutputFile>, CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut resolver = Resolver::new(&file);
    let seed = match resolver.optional::<u64>("seed", cli.seed)? {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    };
    let mode = resolver.optional::<PhyMode>("mode", cli.mode)?;
    let strict = resolver.value("strict_ble", cli.strict_ble.then_some(true), false)?;
    let framing = if strict { Framing::Strict } else { Framing::Measured };
    let subcommand = match &cli.command {
        Command::Ber(_) => "ber",
        Command::Per(_) => "per",
        Command::Airtime(_) => "airtime",
        Command::Flood(_) => "flood",
        Command::Calibrate(_) => "calibrate",
    };
    let mut ctx = Context { subcommand, seed, mode, framing, resolver };
    let bodies = match &cli.command {
        Command::Ber(a) => vec![("ber.csv", cmd_ber(&mut ctx, a)?)],
        Command::Per(a) => vec![("per.csv", cmd_per(&mut ctx, a)?)],
        Command::Airtime(a) => vec![("airtime.csv", cmd_airtime(&mut ctx, a)?)],
        Command::Flood(a) => cmd_flood(&mut ctx, a)?,
        Command::Calibrate(a) => vec![("link_table.csv", cmd_calibrate(&mut ctx, a)?)],
    };
    Ok(bodies
        .into_iter()
        .map(|(name, body)| OutputFile {
            name: name.to_string(),
            contents: format!("{}{}", ctx.manifest(cli.out.as_deref(), name), body),
        })
        .collect())
}

fn uncoded_mode(ctx: &Context) -> Result<PhyMode, CliError> {
    let mode = ctx.mode.unwrap_or(PhyMode::Le1M);
    if !mode.is_uncoded_ble() {
        return Err(CliError::Usage(format!("Monte Carlo runs model uncoded BFSK only, got mode {mode}")));
    }
    Ok(mode)
}

fn sweep_points(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if ![from, to, step].iter().all(|x| x.is_finite()) || step <= 0.0 || to < from {
        return Err(CliError::Usage(format!("bad sweep {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

pub const BER_CSV_HEADER: &str = "ebn0_db,ber_analytic_1t,ber_analytic_2ct,ber_mc,ci_low,ci_high";

fn cmd_ber(ctx: &mut Context, a: &BerArgs) -> Result<String, CliError> {
    let r = &mut ctx.resolver;
    let from = r.value("from_db", a.from_db, 0.0)?;
    let to = r.value("to_db", a.to_db, 14.0)?;
    let step = r.value("step_db", a.step_db, 1.0)?;
    let bits = r.value("bits", a.bits, 100_000usize)?;
    let packet_bits = r.value("packet_bits", a.packet_bits, 1000usize)?;
    let beat_ratio = r.value("beat_ratio", a.beat_ratio, 1.0)?;
    let analytic_only = r.value("analytic_only", a.analytic_only.then_some(true), false)?;
    let mode = uncoded_mode(ctx)?;
    let points = sweep_points(from, to, step)?;
    let spec = PhyExperimentSpec {
        beat: BeatSpec::Ratio(beat_ratio),
        replicas: bits.div_ceil(packet_bits.max(1)),
        seed: ctx.seed,
        ..PhyExperimentSpec::new(ModulationParams::orthogonal(mode.ct_symbol_period()), packet_bits)
    };
    let mut out = format!("{BER_CSV_HEADER}\n");
    for x in points {
        let e = Ebn0::from_db(x);
        let (b1, b2) = (ber_bfsk(e), ber_2ct_equal(e));
        if analytic_only {
            let _ = writeln!(out, "{x},{b1},{b2},,,");
        } else {
            let mc = run_ber_point(&spec, x)?;
            let _ = writeln!(out, "{x},{b1},{b2},{},{},{}", mc.point, mc.ci_low, mc.ci_high);
        }
    }
    Ok(out)
}

fn cmd_per(ctx: &mut Context, a: &PerArgs) -> Result<String, CliError> {
    let mode = uncoded_mode(ctx)?;
    let r = &mut ctx.resolver;
    let packet_bits = r.value("packet_bits", a.packet_bits, 128usize)?;
    let replicas = r.value("replicas", a.replicas, 2000usize)?;
    let snr = r.value("snr_db", a.snr_db, 12.0)?;
    let modulation = ModulationParams::orthogonal(mode.ct_symbol_period());
    let ebn0 = r.optional("ebn0_db", a.ebn0_db)?.unwrap_or_else(|| ebn0_from_sample_snr(snr, modulation.samples_per_symbol));
    let dps = r.list("delta_p", a.delta_p.clone(), "0,1,2")?;
    let dts = r.list("delta_t", a.delta_t.clone(), "0,0.25,0.5")?;
    let ratios = r.list("beat_ratios", a.beat_ratios.clone(), "0.1,1,5")?;
    let same_only = r.value("same_data_only", a.same_data_only.then_some(true), false)?;
    let flavours: &[bool] = if same_only { &[true] } else { &[true, false] };

    let base = PhyExperimentSpec {
        ebn0_points: vec![ebn0],
        replicas,
        seed: ctx.seed,
        ..PhyExperimentSpec::new(modulation, packet_bits)
    };
    let mut rows = Vec::new();
    let single = PhyExperimentSpec { power_delta_db: f64::INFINITY, ..base.clone() };
    for p in run_per_sweep(&single)? {
        rows.push(PerRow::from_point(mode, &single, &p));
    }
    for &same_data in flavours {
        for &dp in &dps {
            for &dt in &dts {
                for &ratio in &ratios {
                    let spec = PhyExperimentSpec {
                        power_delta_db: dp,
                        time_delta_frac: dt,
                        beat: BeatSpec::Ratio(ratio),
                        same_data,
                        ..base.clone()
                    };
                    for p in run_per_sweep(&spec)? {
                        rows.push(PerRow::from_point(mode, &spec, &p));
                    }
                }
            }
        }
    }
    Ok(per_rows_to_csv(&rows))
}

pub const AIRTIME_CSV_HEADER: &str = "mode,pdu_len,symbols,air_time_ms,radio_slot_ms,guard_ms,slot_ms";

fn cmd_airtime(ctx: &mut Context, a: &AirtimeArgs) -> Result<String, CliError> {
    let r = &mut ctx.resolver;
    let pdus: Vec<usize> = match r.optional("pdu_sweep", a.pdu_sweep.clone())? {
        Some(s) => {
            let (lo, hi) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("pdu sweep '{s}' is not a:b")))?;
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad PDU length '{t}'")));
            (parse(lo)?..=parse(hi)?).collect()
        }
        None => vec![r.value("pdu", a.pdu, 38usize)?],
    };
    let guard = r.value("guard_us", a.guard_us, DEFAULT_GUARD * 1e6)? * 1e-6;
    let modes: Vec<PhyMode> = ctx.mode.map_or_else(|| PhyMode::ALL.to_vec(), |m| vec![m]);
    let mut out = format!("{AIRTIME_CSV_HEADER}\n");
    for &pdu in &pdus {
        for &mode in &modes {
            let f = ctx.framing;
            let _ = writeln!(
                out,
                "{mode},{pdu},{},{},{},{},{}",
                symbols_on_air(mode, pdu, f)?,
                ms(air_time(mode, pdu, f)?),
                ms(radio_slot(mode, pdu, f)?),
                ms(guard),
                ms(slot_length(mode, pdu, f, guard, mode.slot_padding())?)
            );
        }
    }
    Ok(out)
}

/// Seconds to milliseconds, rounded to the nanosecond.
fn ms(seconds: f64) -> f64 {
    (seconds * 1e9).round() / 1e6
}

fn read(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn cmd_flood(ctx: &mut Context, a: &FloodArgs) -> Result<Vec<(&'static str, String)>, CliError> {
    let mode = ctx.mode.unwrap_or(PhyMode::Le2M);
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let ppm_std = r.value("ppm_std", a.ppm_std, 10.0)?;
    let edges = r.optional("edges", a.edges.as_ref().map(|p| p.display().to_string()))?;
    let nodes = r.optional("nodes", a.nodes.as_ref().map(|p| p.display().to_string()))?;
    let topology = match (edges, nodes) {
        (Some(e), Some(n)) => Topology::from_csv(&read(e.as_ref())?, &read(n.as_ref())?, ppm_std)
            .map_err(|e| CliError::Input(e.to_string()))?,
        (None, None) => {
            let n = r.value("line", a.line, 5usize)?;
            Topology::line(n, -60.0)?.with_random_cfo(ppm_std, seed)?
        }
        _ => return Err(CliError::Usage("--edges and --nodes go together".into())),
    };
    let link_table = match r.optional("link_table", a.link_table.as_ref().map(|p| p.display().to_string()))? {
        Some(p) => LinkTable::from_csv(&read(p.as_ref())?).map_err(|e| CliError::Input(e.to_string()))?,
        None => default_link_table(),
    };
    let tx_power_dbm = r.value("tx_power_dbm", a.tx_power_dbm, 0.0)?;
    let noise_floor_dbm = r.value("noise_floor_dbm", a.noise_floor_dbm, -95.0)?;
    let probe = SimConfig { tx_power_dbm, noise_floor_dbm, ..SimConfig::new(topology.clone(), NodePolicy::new(1, 0), mode) };
    let reach = probe.hop_distances();
    let depth = reach.iter().flatten().copied().max().unwrap_or(1);
    let n_tx = r.value("n_tx", a.n_tx, 3u32)?;
    let diameter = r.value("diameter", a.diameter, depth)?;
    let mut policy = NodePolicy::new(n_tx, diameter);
    policy.round_period = r.value("round_period", a.round_period, 0.2)?;
    policy.resync_rounds = r.value("resync_rounds", a.resync_rounds, 4u32)?;
    policy.hop_sequence = r
        .list("channels", a.channels.clone(), "37")?
        .into_iter()
        .map(|c| if (0.0..40.0).contains(&c) && c.fract() == 0.0 { Ok(c as u8) } else { Err(CliError::Usage(format!("bad channel {c}"))) })
        .collect::<Result<_, _>>()?;
    let config = SimConfig {
        link_table,
        rounds: r.value("rounds", a.rounds, 1000u32)?,
        seed,
        tx_power_dbm,
        noise_floor_dbm,
        fading_std_db: r.value("fading_std_db", a.fading_std_db, 1.0)?,
        start_synced: !r.value("boot_scanning", a.boot_scanning.then_some(true), false)?,
        ..SimConfig::new(topology, policy, mode)
    };
    let out = run(&config)?;
    let slot = config.slot_length();
    for m in &out.rounds {
        for (h, l) in m.hop_count.iter().zip(&m.latency) {
            if let (Some(h), Some(l)) = (h, l) {
                if (l - *h as f64 * slot).abs() > 1e-12 {
                    return Err(CliError::Invariant(format!("round {}: latency {l} != hop {h} x slot", m.round)));
                }
            }
        }
    }
    let summary = summarize(&out.rounds, &config);
    Ok(vec![("rounds.csv", rounds_to_csv(&out.rounds)), ("summary.csv", summary_to_csv(&summary))])
}

fn cmd_calibrate(ctx: &mut Context, a: &CalibrateArgs) -> Result<String, CliError> {
    let modes = match ctx.mode {
        Some(m) => vec![m],
        None => vec![PhyMode::Le2M, PhyMode::Le1M],
    };
    let r = &mut ctx.resolver;
    let axes = Axes {
        delta_p_db: r.list("delta_p", a.delta_p.clone(), "0,1,2,4,8,inf")?,
        delta_t_frac: r.list("delta_t", a.delta_t.clone(), "0,0.25,0.5,1")?,
        beat_ratio: r.list("beat_ratios", a.beat_ratios.clone(), "0,0.5,1,2,4")?,
    };
    let grid = CalibrationGrid {
        modes,
        same_data: vec![true, false],
        axes,
        ebn0_db: r.value("ebn0_db", a.ebn0_db, 20.0)?,
        packet_bits: r.value("packet_bits", a.packet_bits, 128usize)?,
        replicas: r.value("replicas", a.replicas, 500usize)?,
        seed: ctx.seed,
    };
    Ok(calibrate_link_table(&grid)?.to_csv())
}

/// Effective parameter map of a manifest block.
pub fn manifest_params(csv: &str) -> BTreeMap<String, String> {
    csv.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
