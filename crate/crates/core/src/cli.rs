//! Command-line front end for the `pnc` binary.

use std::ffi::OsString;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netcode_maps::build_map_set;
use crate::quantizer::{Quantizer, RasterMode, Window, AGREEMENT_EXCLUSION, TIE_TOL};
use crate::relay_sim::{RelaySystem, Scheme, SimConfig};
use crate::singular_fades::{enumerate_singular_fades, singular_circle_radii, FadeReport};

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for malformed input or invalid parameters.
pub const EXIT_USAGE: i32 = 1;
/// Exit code when `verify` finds a disagreement.
pub const EXIT_MISMATCH: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pnc",
    version,
    about = "Adaptive network coding maps for the M-PSK two-way relay channel"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Constellation size, a power of two in 2..=64.
    #[arg(long, global = true, default_value_t = 4)]
    pub m: usize,
    /// Tie tolerance when comparing distances between regions.
    #[arg(long, global = true, default_value_t = TIE_TOL)]
    pub tol: f64,
    /// Seed for the simulation RNG.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output file, written atomically. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the summary printed when --out is given.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the singular fade states.
    #[command(
        after_help = "Output: JSON {\"m\", \"count\", \"fades\": [{\"id\", \"re\", \"im\", \"radius\", \"phase\"}]}."
    )]
    Fades,
    /// Build one exclusive-law map per singular fade state.
    #[command(
        after_help = "Output: JSON {\"m\", \"maps\": [{\"t\", \"table\"}], \"assignment\": {\"<fade id>\": <map index>}}.\n\
        `table` holds M rows of M cluster labels indexed [x_A][x_B]."
    )]
    Maps,
    /// Label a rectangular grid of fade states.
    #[command(
        after_help = "Output: CSV with header re,im,kind,fade_id,on_boundary.\n\
        kind is SINGULARITY_FREE or FADE_REGION; fade_id is empty for SINGULARITY_FREE.\n\
        Rows run over re fastest, then im, both ascending."
    )]
    Quantize(QuantizeArgs),
    /// Monte Carlo throughput of the relay protocol.
    #[command(
        after_help = "Output: CSV with header snr_db,scheme,throughput,fer_a,fer_b,relay_ser,frames.\n\
        throughput is in bits per channel use, at most log2(M)."
    )]
    Simulate(SimulateArgs),
    /// Compare the oracle and analytic classifiers on a grid.
    #[command(
        after_help = "Output: JSON {\"m\", \"step\", \"compared\", \"excluded\", \"mismatches\", \"samples\"}.\n\
        Exits with status 2 if any compared point disagrees."
    )]
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// Window re_min:re_max:im_min:im_max.
    #[arg(long, value_parser = parse_window, default_value = "-4:4:-4:4", allow_hyphen_values = true)]
    pub window: Window,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Oracle)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Oracle,
    Analytic,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// SNR points in dB, as start:step:stop or a comma-separated list.
    #[arg(long, value_parser = parse_snr, default_value = "0:5:40", allow_hyphen_values = true)]
    pub snr: SnrList,
    /// Frames per SNR point.
    #[arg(long, default_value_t = 1000)]
    pub frames: usize,
    /// Symbols per frame.
    #[arg(long, default_value_t = 256)]
    pub frame_len: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Adaptive)]
    pub scheme: SchemeArg,
    /// Variance of every fading link, in dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub fading_var_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Adaptive,
    Xor,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Half width of the square window centred at the origin.
    #[arg(long, default_value_t = 4.0)]
    pub extent: f64,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrList(pub Vec<f64>);

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_window(s: &str) -> std::result::Result<Window, String> {
    let parts = s
        .split(':')
        .map(parse_f64)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let [re_min, re_max, im_min, im_max] = parts[..] else {
        return Err("expected re_min:re_max:im_min:im_max".into());
    };
    if re_max < re_min || im_max < im_min {
        return Err("window bounds are reversed".into());
    }
    Ok(Window {
        re_min,
        re_max,
        im_min,
        im_max,
    })
}

fn parse_snr(s: &str) -> std::result::Result<SnrList, String> {
    if s.contains(':') {
        let parts = s
            .split(':')
            .map(parse_f64)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let [start, step, stop] = parts[..] else {
            return Err("expected start:step:stop".into());
        };
        if step <= 0.0 || stop < start {
            return Err("need step > 0 and stop >= start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > 10_000 {
            return Err("too many SNR points".into());
        }
        Ok(SnrList((0..n).map(|i| start + i as f64 * step).collect()))
    } else {
        let v = s
            .split(',')
            .map(parse_f64)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(SnrList(v))
    }
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

struct Io<'a> {
    stdout: &'a mut dyn Write,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Io<'_> {
    fn emit<F>(&mut self, fill: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        match &self.out {
            Some(p) => write_atomic(p, fill),
            None => fill(self.stdout).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
        }
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.emit(|w| writeln!(w, "{text}"))
    }

    /// Summary line, shown only when the payload went to a file.
    fn note(&mut self, line: &str) {
        if self.out.is_some() && !self.quiet {
            let _ = writeln!(self.stdout, "{line}");
        }
    }
}

fn run_command(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    let g = &cli.global;
    crate::constellation::validate_order(g.m)?;
    if !(g.tol.is_finite() && g.tol >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance {} must be >= 0",
            g.tol
        )));
    }
    let m = g.m;
    let mut io = Io {
        stdout,
        out: g.out.clone(),
        quiet: g.quiet,
    };
    match cli.command {
        Command::Fades => {
            let fades = enumerate_singular_fades(m)?;
            let report = FadeReport::new(m, &fades);
            io.emit_json(&report)?;
            let circles = singular_circle_radii(m)?.len();
            io.note(&format!(
                "{} singular fade states on {circles} circles",
                report.count
            ));
        }
        Command::Maps => {
            let set = build_map_set(m)?;
            io.emit_json(&set)?;
            let (lo, hi) = set
                .maps
                .iter()
                .map(|x| x.num_clusters())
                .fold((usize::MAX, 0), |(lo, hi), t| (lo.min(t), hi.max(t)));
            io.note(&format!(
                "{} fade states, {} distinct maps, {lo} to {hi} clusters",
                set.assignment.len(),
                set.maps.len()
            ));
        }
        Command::Quantize(args) => {
            let q = Quantizer::new(m)?.with_tie_tol(g.tol);
            let mode = match args.mode {
                ModeArg::Oracle => RasterMode::Oracle,
                ModeArg::Analytic => RasterMode::Analytic,
            };
            let raster = q.rasterize(args.window, args.step, mode)?;
            io.emit(|w| raster.write_csv(w))?;
            io.note(&format!(
                "{} x {} cells, {} regions",
                raster.cols,
                raster.rows,
                raster.distinct_regions()
            ));
        }
        Command::Simulate(args) => {
            let scheme = match args.scheme {
                SchemeArg::Adaptive => Scheme::Adaptive,
                SchemeArg::Xor => Scheme::Xor,
            };
            let config = SimConfig {
                frame_len: args.frame_len,
                fading_variance_db: args.fading_var_db,
                ..SimConfig::new(m, args.snr.0, args.frames, scheme, g.seed)
            };
            config.validate()?;
            let system = RelaySystem::new(m)?;
            let result = system.run(&config)?;
            io.emit(|w| result.write_csv(w))?;
            io.note(&format!(
                "{} SNR points, {} frames each",
                result.records.len(),
                config.frames
            ));
        }
        Command::Verify(args) => {
            if !(args.extent.is_finite() && args.extent > 0.0) {
                return Err(Error::InvalidConfig("extent must be positive".into()));
            }
            let q = Quantizer::new(m)?.with_tie_tol(g.tol);
            let report =
                q.verify_agreement(Window::square(args.extent), args.step, AGREEMENT_EXCLUSION)?;
            io.emit_json(&report)?;
            io.note(&format!(
                "{} points compared, {} excluded, {} mismatches",
                report.compared, report.excluded, report.mismatches
            ));
            if report.mismatches > 0 {
                return Ok(EXIT_MISMATCH);
            }
        }
    }
    Ok(EXIT_OK)
}

fn thread_count() -> std::result::Result<Option<usize>, String> {
    match std::env::var("PNC_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("PNC_THREADS must be a positive integer, got `{v}`")),
        },
    }
}

/// Parses `argv` (program name first) and runs the subcommand, writing
/// results to `stdout` and diagnostics to `stderr`. Returns the exit code.
pub fn dispatch_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let threads = match thread_count() {
        Ok(t) => t,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    // Buffered so the command can run inside a pool without a Send writer.
    let mut buf: Vec<u8> = Vec::new();
    let outcome = match threads {
        None => run_command(cli, &mut buf),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run_command(cli, &mut buf)),
            Err(e) => Err(Error::Internal(format!("thread pool: {e}"))),
        },
    };
    if let Err(e) = stdout.write_all(&buf) {
        let _ = writeln!(stderr, "error: writing stdout: {e}");
        return EXIT_USAGE;
    }
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// [`dispatch_with`] on the process's stdout and stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = dispatch_with(argv, &mut out, &mut err);
    let _ = out.flush();
    code
}
