use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use slq::bvalues::GbvOpts;
use slq::classify::ClassifyOpts;
use slq::extensions::{ExtensionSpec, ShootOpts, GRID_PER_UNIT};
use slq::forms::FormWindow;
use slq::odecore::QuasiFn;
use slq::problem::{load, ProblemSpec};
use slq::report::{self, ReportError, RunReport, Tolerances};
use slq::solutions::BasisPair;
use slq::testfns::FnSpec;

#[derive(Parser)]
#[command(name = "slq", version, about = "Singular Sturm-Liouville toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Problem file (JSON) or catalog name.
    problem: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prefix for CSV dumps of solutions.
    #[arg(long)]
    csv: Option<String>,
    /// Treat inconclusive verdicts as failures.
    #[arg(long)]
    strict: bool,
    /// Sample count of the coefficient validation.
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Args, Clone)]
struct Pair {
    #[arg(long = "f", default_value = "v1")]
    f: String,
    #[arg(long = "g", default_value = "v1")]
    g: String,
    /// Cut points `c,d` of the form.
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
}

#[derive(Subcommand)]
enum Command {
    /// Weyl limit-point/limit-circle classification of both endpoints.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Complex probe energy such as `2i` or `1+0.5i`.
        #[arg(long, default_value = "i")]
        probe: String,
        /// Anchor of the classification windows.
        #[arg(long)]
        anchor: Option<f64>,
    },
    /// Principal and nonprincipal solutions at both endpoints.
    Basis {
        #[command(flatten)]
        common: Common,
    },
    /// Generalized boundary values of a function.
    Gbv {
        #[command(flatten)]
        common: Common,
        #[arg(long = "f", default_value = "v1")]
        f: String,
    },
    /// Regularized form and its decoration for the problem's extension.
    Form {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
    },
    /// Green identity residuals in concrete and boundary-triplet form.
    GreenCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
    },
    /// Eigenvalues of the problem's extension in a range.
    Eig {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        lmax: f64,
        /// Grid points per unit of λ.
        #[arg(long, default_value_t = GRID_PER_UNIT)]
        grid: usize,
    },
    /// Self-adjoint relation of the extension and cross-path form checks.
    Triplet {
        #[command(subcommand)]
        action: TripletAction,
    },
}

#[derive(Subcommand)]
enum TripletAction {
    Check {
        #[command(flatten)]
        common: Common,
        /// Functions for the cross-path comparison, separated by `;`.
        #[arg(long, default_value = "v2", value_delimiter = ';')]
        functions: Vec<String>,
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [c, d] => Ok((c.trim().parse().map_err(|e| format!("{e}"))?, d.trim().parse().map_err(|e| format!("{e}"))?)),
        _ => Err(format!("expected c,d but got '{s}'")),
    }
}

struct Run {
    spec: ProblemSpec,
    ext: Option<ExtensionSpec>,
    report: RunReport,
    started: Instant,
}

impl Run {
    fn start(name: &str, common: &Common) -> Result<Run, ReportError> {
        let started = Instant::now();
        let (spec, ext) = load(&common.problem)?;
        let (spec, validation) = spec.validated(common.samples)?;
        let tolerances = Tolerances { tol: common.tol, ode_tol: 1e-12, gbv_accept: GbvOpts::default().accept };
        let mut report = RunReport::new(name, spec.clone(), tolerances);
        report.validation = Some(validation);
        Ok(Run { spec, ext, report, started })
    }

    fn pair(&mut self, common: &Common) -> Result<BasisPair, ReportError> {
        let pair = BasisPair::new(&self.spec, &report::default_basis_opts(common.tol.min(1e-10)))?;
        self.report.basis = Some(report::basis_section(&pair));
        Ok(pair)
    }

    fn function(&self, pair: &BasisPair, s: &str) -> Result<Arc<dyn QuasiFn>, ReportError> {
        report::resolve_fn(&self.spec, pair, &s.parse::<FnSpec>()?)
    }

    fn window(pair: &BasisPair, w: Option<(f64, f64)>) -> FormWindow {
        w.map_or_else(|| FormWindow::default_for(pair), |(c, d)| FormWindow { c, d })
    }
}

fn emit(report: &mut RunReport, started: Instant, out: Option<&PathBuf>) -> Result<(), String> {
    report.timestamp.elapsed_seconds = started.elapsed().as_secs_f64();
    report.timestamp.unix_seconds = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: &Command, run: &mut Run, common: &Common) -> Result<(), ReportError> {
    match cmd {
        Command::Classify { probe, anchor, .. } => {
            let z = report::parse_complex(probe)
                .ok_or_else(|| ReportError::FnSpec(slq::testfns::FnSpecError::BadNumber(probe.clone())))?;
            let opts = ClassifyOpts { anchor: *anchor, ..ClassifyOpts::default() };
            let section = report::classification_section(&run.spec, z, &opts);
            let undecided: Vec<_> = section.endpoints.iter().filter(|c| c.kind.is_none()).map(|c| c.endpoint).collect();
            run.report.classification = Some(section);
            if let (true, Some(&end)) = (common.strict, undecided.first()) {
                return Err(ReportError::Inconclusive(end));
            }
        }
        Command::Basis { .. } => {
            run.pair(common)?;
        }
        Command::Gbv { f, .. } => {
            let pair = run.pair(common)?;
            let func = run.function(&pair, f)?;
            run.report.gbv.push(report::gbv_section(&pair, f, func.as_ref(), &GbvOpts::default())?);
        }
        Command::Form { pair: p, .. } => {
            let pair = run.pair(common)?;
            let (f, g) = (run.function(&pair, &p.f)?, run.function(&pair, &p.g)?);
            let ext = report::extension_or_friedrichs(run.ext.clone(), &pair);
            let w = Run::window(&pair, p.window);
            run.report.form = Some(report::form_section(&run.spec, &pair, w, &ext, (&p.f, &p.g), f.as_ref(), g.as_ref())?);
        }
        Command::GreenCheck { pair: p, .. } => {
            let pair = run.pair(common)?;
            let (f, g) = (run.function(&pair, &p.f)?, run.function(&pair, &p.g)?);
            let w = Run::window(&pair, p.window);
            run.report.green = Some(report::green_section(&run.spec, &pair, w, (&p.f, &p.g), f.as_ref(), g.as_ref())?);
        }
        Command::Eig { lmin, lmax, grid, .. } => {
            let pair = run.pair(common)?;
            let ext = report::extension_or_friedrichs(run.ext.clone(), &pair);
            let opts = ShootOpts { tol: common.tol, grid_per_unit: *grid, ..ShootOpts::default() };
            let (section, pairs) = report::eigen_section(&run.spec, &pair, &ext, (*lmin, *lmax), &opts)?;
            run.report.eigen = Some(section);
            if let Some(prefix) = &common.csv {
                for (k, p) in pairs.iter().enumerate() {
                    let path = format!("{prefix}_eig{k}.csv");
                    if let Err(e) = std::fs::write(&path, p.eigenfunction.to_csv()) {
                        run.report.failures.push(format!("csv {path}: {e}"));
                    }
                }
            }
        }
        Command::Triplet { action: TripletAction::Check { functions, window, .. } } => {
            let pair = run.pair(common)?;
            let ext = report::extension_or_friedrichs(run.ext.clone(), &pair);
            let funcs = functions
                .iter()
                .map(|s| Ok((s.clone(), run.function(&pair, s)?)))
                .collect::<Result<Vec<_>, ReportError>>()?;
            let w = Run::window(&pair, *window);
            run.report.triplet = Some(report::triplet_section(&run.spec, &pair, w, &ext, &funcs)?);
        }
    }
    Ok(())
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::Classify { common, .. }
        | Command::Basis { common }
        | Command::Gbv { common, .. }
        | Command::Form { common, .. }
        | Command::GreenCheck { common, .. }
        | Command::Eig { common, .. }
        | Command::Triplet { action: TripletAction::Check { common, .. } } => common,
    }
}

fn name_of(cmd: &Command) -> &'static str {
    match cmd {
        Command::Classify { .. } => "classify",
        Command::Basis { .. } => "basis",
        Command::Gbv { .. } => "gbv",
        Command::Form { .. } => "form",
        Command::GreenCheck { .. } => "green-check",
        Command::Eig { .. } => "eig",
        Command::Triplet { .. } => "triplet check",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = common_of(&cli.command).clone();
    let mut run = match Run::start(name_of(&cli.command), &common) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("slq: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = execute(&cli.command, &mut run, &common);
    let code = match &outcome {
        Ok(()) => 0,
        Err(e) => {
            run.report.failures.push(e.to_string());
            eprintln!("slq: {e}");
            e.exit_code()
        }
    };
    if let Err(e) = emit(&mut run.report, run.started, common.out.as_ref()) {
        eprintln!("slq: cannot write report: {e}");
        return ExitCode::from(4);
    }
    ExitCode::from(code as u8)
}
