//! Command-line front end: `run`, `figure`, `detsweep` and `verify`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{seeded_det_sweep, SweepResult, DET_SWEEP_SEED};
use crate::dynamics::{initial_estimate, run_simulation_from, seeded_model, BackProjection, SimConfig, TraceRow};
use crate::error::{Error, Result};
use crate::model::{validate_spectrum, EigenvaluePreset};
use crate::rules::{RuleKind, RuleSpec};
use crate::verify::{self, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "symflow", version, about = "Fully symmetric PCA learning rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one rule and write its error trace as CSV.
    Run(RunArgs),
    /// Integrate the seven convergence curves (TwJ2S, N2S, M2S with α = 1, 2, 5, 10, 20).
    Figure(FigureArgs),
    /// Sweep det{D′_α} over α = 0.0, 0.1, …, 20.0.
    Detsweep(DetsweepArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Twj2s,
    N2s,
    M2s,
    Oja,
    Nl,
    Nse,
}

impl From<RuleArg> for RuleKind {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Twj2s => RuleKind::TwJ2S,
            RuleArg::N2s => RuleKind::N2S,
            RuleArg::M2s => RuleKind::M2S,
            RuleArg::Oja => RuleKind::Oja,
            RuleArg::Nl => RuleKind::NL,
            RuleArg::Nse => RuleKind::NSE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    Spaced,
    Nearby,
}

impl From<PresetArg> for EigenvaluePreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Spaced => EigenvaluePreset::Spaced,
            PresetArg::Nearby => EigenvaluePreset::Nearby,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Approx,
    None,
}

impl From<ModeArg> for BackProjection {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => BackProjection::Exact,
            ModeArg::Approx => BackProjection::Approximated,
            ModeArg::None => BackProjection::None,
        }
    }
}

/// Flags of `run`. Every field is optional so that a JSON config file with
/// the same keys can fill the gaps.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    /// Weight factor of M2S.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, conflicts_with = "eigenvalues")]
    pub preset: Option<PresetArg>,
    /// Custom spectrum, e.g. `3,2,1.5,1`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eigenvalues: Option<Vec<f64>>,
    /// Dimension check: must match the number of eigenvalues.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub backprojection: Option<ModeArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the above keys; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    /// Fills every unset field from `base`.
    pub fn or(self, base: RunArgs) -> RunArgs {
        RunArgs {
            rule: self.rule.or(base.rule),
            alpha: self.alpha.or(base.alpha),
            preset: self.preset.or(if self.eigenvalues.is_some() { None } else { base.preset }),
            eigenvalues: self
                .eigenvalues
                .or(if self.preset.is_some() { None } else { base.eigenvalues }),
            n: self.n.or(base.n),
            m: self.m.or(base.m),
            backprojection: self.backprojection.or(base.backprojection),
            gamma: self.gamma.or(base.gamma),
            steps: self.steps.or(base.steps),
            subsample: self.subsample.or(base.subsample),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            config: self.config,
        }
    }
}

/// Fully resolved run parameters; this is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub spec: RuleSpec,
    pub preset: Option<EigenvaluePreset>,
    pub eigenvalues: Vec<f64>,
    pub m: usize,
    pub backprojection: BackProjection,
    pub gamma: f64,
    pub steps: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl RunSettings {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let rule = args
            .rule
            .ok_or_else(|| Error::Config("--rule is required".into()))?;
        let kind = RuleKind::from(rule);
        if args.alpha.is_some() && kind != RuleKind::M2S {
            return Err(Error::Config(format!("--alpha applies to m2s only, not {}", kind.name())));
        }
        let (preset, eigenvalues) = match (&args.preset, &args.eigenvalues) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("--preset and --eigenvalues are exclusive".into()))
            }
            (_, Some(values)) => {
                validate_spectrum(values)?;
                (None, values.clone())
            }
            (p, None) => {
                let p = EigenvaluePreset::from(p.unwrap_or(PresetArg::Spaced));
                (Some(p), p.values())
            }
        };
        if let Some(n) = args.n {
            if n != eigenvalues.len() {
                return Err(Error::Config(format!(
                    "--n {n} does not match the {} eigenvalues",
                    eigenvalues.len()
                )));
            }
        }
        let m = args.m.unwrap_or(4);
        let settings = RunSettings {
            spec: RuleSpec::from_kind(kind, args.alpha.unwrap_or(0.0), m),
            preset,
            eigenvalues,
            m,
            backprojection: args.backprojection.unwrap_or(ModeArg::Exact).into(),
            gamma: args.gamma.unwrap_or(1.0),
            steps: args.steps.unwrap_or(20_000),
            subsample: args.subsample.unwrap_or(100),
            seed: args.seed.unwrap_or(DEFAULT_SEED),
        };
        settings.sim_config()?.validate().map_err(usage)?;
        Ok(settings)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            model: seeded_model(&self.eigenvalues, self.seed)?,
            spec: self.spec.clone(),
            m: self.m,
            gamma: self.gamma,
            steps: self.steps,
            subsample: self.subsample,
            backprojection: self.backprojection,
            seed: self.seed,
        })
    }
}

/// Summary of one written trace.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: RunSettings,
    pub output_path: String,
    pub emitted_rows: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub name: PresetArg,
    #[arg(long, value_enum, default_value = "exact")]
    pub backprojection: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Defaults to 20000 (spaced) or 50000 (nearby).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub subsample: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value = "figures")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DetsweepArgs {
    #[arg(long, default_value_t = DET_SWEEP_SEED)]
    pub seed: u64,
    /// Number of columns of Ā.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Comma-separated suite names.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn usage(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_USAGE,
    }
}

/// Formats a trace as CSV with a `step,e_o,e_p` header.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("step,e_o,e_p\n");
    for r in trace {
        writeln!(s, "{},{:.16e},{:.16e}", r.step, r.e_o, r.e_p).unwrap();
    }
    s
}

/// Formats a determinant sweep as CSV plus a trailing `# zero_crossings:` line.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = String::from("alpha,det\n");
    for (a, d) in sweep.alphas.iter().zip(&sweep.dets) {
        writeln!(s, "{a:.1},{d:.16e}").unwrap();
    }
    let crossings: Vec<String> = sweep
        .zero_crossings
        .iter()
        .map(|(a, b)| format!("[{a:.1},{b:.1}]"))
        .collect();
    writeln!(s, "# zero_crossings: {} {}", crossings.len(), crossings.join(" ")).unwrap();
    s
}

fn emit(out: Option<&Path>, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_run(args: RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<RunManifest> {
    let args = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let file: RunArgs = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            args.or(file)
        }
        None => args,
    };
    let settings = RunSettings::from_args(&args)?;
    let config = settings.sim_config()?;
    let started = Instant::now();
    let w0 = initial_estimate(config.model.dim(), config.m, config.seed)?;
    let (trace, _) = run_simulation_from(&config, w0)?;
    emit(args.out.as_deref(), &trace_csv(&trace), stdout)?;
    let manifest = RunManifest {
        config: settings,
        output_path: args
            .out
            .as_ref()
            .map_or_else(|| "-".to_string(), |p| p.display().to_string()),
        emitted_rows: trace.len(),
        wall_time: started.elapsed().as_secs_f64(),
    };
    writeln!(stderr, "{}", serde_json::to_string(&manifest).unwrap())?;
    Ok(manifest)
}

/// The seven rules of a convergence figure.
pub fn figure_rules(m: usize) -> Vec<RuleSpec> {
    let mut rules = vec![RuleSpec::twj2s(m), RuleSpec::N2S];
    rules.extend([1.0, 2.0, 5.0, 10.0, 20.0].map(RuleSpec::m2s));
    rules
}

/// Outcome of one figure curve.
#[derive(Debug)]
pub struct Curve {
    pub spec: RuleSpec,
    pub path: PathBuf,
    pub trace: Result<Vec<TraceRow>>,
}

pub fn cmd_figure(args: &FigureArgs, stdout: &mut dyn Write) -> Result<Vec<Curve>> {
    let preset = EigenvaluePreset::from(args.name);
    let mode = BackProjection::from(args.backprojection);
    let steps = args.steps.unwrap_or(match preset {
        EigenvaluePreset::Spaced => 20_000,
        EigenvaluePreset::Nearby => 50_000,
    });
    let model = seeded_model(&preset.values(), args.seed)?;
    let w0 = initial_estimate(model.dim(), args.m, args.seed)?;
    let configs: Vec<SimConfig> = figure_rules(args.m)
        .into_iter()
        .map(|spec| SimConfig {
            model: model.clone(),
            spec,
            m: args.m,
            gamma: args.gamma,
            steps,
            subsample: args.subsample,
            backprojection: mode,
            seed: args.seed,
        })
        .collect();
    for c in &configs {
        c.validate().map_err(usage)?;
    }
    fs::create_dir_all(&args.out_dir)?;

    let header = format!(
        "# config: {}\n",
        serde_json::json!({
            "preset": preset,
            "eigenvalues": preset.values(),
            "m": args.m,
            "backprojection": mode,
            "gamma": args.gamma,
            "steps": steps,
            "subsample": args.subsample,
            "seed": args.seed,
        })
    );

    let curves: Vec<Curve> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| {
                let w0 = w0.clone();
                let path = args
                    .out_dir
                    .join(format!("{}_{}_{}.csv", preset, mode, config.spec.label()));
                let header = &header;
                scope.spawn(move || {
                    let trace = run_simulation_from(config, w0).map(|(t, _)| t);
                    let written = match &trace {
                        Ok(t) => {
                            let rule = serde_json::to_string(&config.spec).unwrap();
                            let body = format!("{header}# rule: {rule}\n{}", trace_csv(t));
                            fs::write(&path, body).map_err(Error::from)
                        }
                        Err(_) => Ok(()),
                    };
                    Curve {
                        spec: config.spec.clone(),
                        path,
                        trace: written.and(trace),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("figure worker panicked")).collect()
    });

    let series: Vec<(String, &[TraceRow])> = curves
        .iter()
        .filter_map(|c| c.trace.as_ref().ok().map(|t| (c.spec.to_string(), t.as_slice())))
        .collect();
    let title = format!("{preset}, {mode} back-projection, gamma = {}", args.gamma);
    let svg_path = args.out_dir.join(format!("{preset}_{mode}.svg"));
    fs::write(&svg_path, render_svg(&title, &series))?;

    for c in &curves {
        match &c.trace {
            Ok(t) => {
                let last = t.last().expect("trace has a row at step 0");
                writeln!(
                    stdout,
                    "{}: {} rows, final e_o {:.3e}, e_p {:.3e}",
                    c.path.display(),
                    t.len(),
                    last.e_o,
                    last.e_p
                )?;
            }
            Err(e) => writeln!(stdout, "{}: {e}", c.spec)?,
        }
    }
    writeln!(stdout, "{}", svg_path.display())?;
    Ok(curves)
}

pub fn cmd_detsweep(args: &DetsweepArgs, stdout: &mut dyn Write) -> Result<SweepResult> {
    let sweep = seeded_det_sweep(args.seed, args.m).map_err(usage)?;
    emit(args.out.as_deref(), &sweep_csv(&sweep), stdout)?;
    Ok(sweep)
}

/// Runs the suites, prints one line per suite and returns the exit code.
pub fn verify_exit_code(opts: &VerifyOptions, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let report = match verify::run(opts) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    for r in &report.results {
        let _ = writeln!(stdout, "{r}");
    }
    if report.all_passed() {
        EXIT_OK
    } else {
        let _ = writeln!(stderr, "verification failed: {}", report.failures().join(", "));
        EXIT_VERIFY
    }
}

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];

/// Two log-y panels (`e_o` left, `e_p` right) with one polyline per series.
pub fn render_svg(title: &str, series: &[(String, &[TraceRow])]) -> String {
    const FLOOR: f64 = 1e-18;
    let (pw, ph, left, top) = (420.0, 300.0, 60.0, 40.0);
    let width = 2.0 * (pw + left) + 180.0;
    let height = ph + top + 50.0;
    let max_step = series
        .iter()
        .filter_map(|(_, t)| t.last().map(|r| r.step))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let log = |v: f64| v.max(FLOOR).log10();
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<text x="{left}" y="18" font-size="13">{title}</text>"#).unwrap();

    let panels: [(&str, fn(&TraceRow) -> f64); 2] = [("e_o", |r| r.e_o), ("e_p", |r| r.e_p)];
    for (p, (name, get)) in panels.iter().enumerate() {
        let x0 = left + p as f64 * (pw + left);
        let values = series.iter().flat_map(|(_, t)| t.iter().map(|r| log(get(r))));
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo.floor(), hi.ceil().max(lo.floor() + 1.0)) } else { (-1.0, 0.0) };
        let ypos = |v: f64| top + ph * (hi - log(v)) / (hi - lo);
        let xpos = |s: usize| x0 + pw * s as f64 / max_step;

        writeln!(
            svg,
            r#"<rect x="{x0}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(svg, r#"<text x="{}" y="{}">{name}</text>"#, x0 + pw / 2.0, top - 6.0).unwrap();
        let mut decade = lo as i32;
        while decade as f64 <= hi {
            let y = top + ph * (hi - decade as f64) / (hi - lo);
            writeln!(
                svg,
                r##"<line x1="{x0}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">1e{decade}</text>"##,
                x0 + pw,
                x0 - 4.0,
                y + 4.0
            )
            .unwrap();
            decade += 1;
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 + pw,
            top + ph + 16.0,
            max_step
        )
        .unwrap();
        for (k, (_, trace)) in series.iter().enumerate() {
            let points: Vec<String> = trace
                .iter()
                .map(|r| format!("{:.1},{:.1}", xpos(r.step), ypos(get(r))))
                .collect();
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                PALETTE[k % PALETTE.len()],
                points.join(" ")
            )
            .unwrap();
        }
    }
    let lx = 2.0 * (pw + left) + 10.0;
    for (k, (label, _)) in series.iter().enumerate() {
        let y = top + 16.0 * k as f64 + 10.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{label}</text>"#,
            lx + 20.0,
            PALETTE[k % PALETTE.len()],
            lx + 26.0,
            y + 4.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args, stdout, stderr).map(|_| EXIT_OK),
        Command::Figure(args) => cmd_figure(&args, stdout).map(|curves| {
            if curves.iter().any(|c| matches!(c.trace, Err(Error::Divergence { .. }))) {
                EXIT_DIVERGENCE
            } else if curves.iter().any(|c| c.trace.is_err()) {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }),
        Command::Detsweep(args) => cmd_detsweep(&args, stdout).map(|_| EXIT_OK),
        Command::Verify(args) => {
            let opts = VerifyOptions {
                only: args.only,
                seed: args.seed.unwrap_or(VerifyOptions::default().seed),
                ..VerifyOptions::default()
            };
            Ok(verify_exit_code(&opts, stdout, stderr))
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point of the `symflow` binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    main_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
