use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hgvm_cli::output::{self, RunReport, Warning};
use hgvm_cli::plot::{Chart, Series};
use hgvm_cli::{parse_config, CliError, RunConfig};
use hgvm_core::{
    balance_report, catalog, crossover, gain_ccm, periodic_steady_state, run_closed_loop, simulate,
    size_components, steady_state_point, sweep, topology, waveform_metrics, BalanceReport,
    ConverterParams, DesignResult, DesignSpec, Metric, OperatingPoint, PiConfig, SimConfig,
    StepMetrics, StepScenario, Trace,
};
use serde::Serialize;

/// `println!` that returns a failed stdout write instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*).map_err(|e| CliError::io(Path::new("<stdout>"), e))?
    };
}

#[derive(Parser)]
#[command(
    name = "hgvm",
    version,
    about = "High-gain voltage-multiplier quadratic boost converter toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-domain simulation of the switched converter.
    Simulate(SimulateArgs),
    /// Closed-form steady state at a duty ratio and load current.
    Steady(SteadyArgs),
    /// Duty ratio and minimum component values for a target.
    Design(DesignArgs),
    /// Gain and stress curves of the catalogued topologies.
    Compare(CompareArgs),
    /// Closed-loop output-voltage regulation through reference steps.
    Control(ControlArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run report.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SteadyArgs {
    #[arg(long)]
    vin: f64,
    #[arg(long)]
    duty: f64,
    /// Load current, A.
    #[arg(long)]
    io: f64,
    /// Print the JSON report instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    vin: f64,
    #[arg(long)]
    vo: f64,
    #[arg(long)]
    po: f64,
    #[arg(long)]
    fs: f64,
    /// Allowed peak-to-peak capacitor ripple, fraction of its voltage.
    #[arg(long, default_value_t = 0.1)]
    ripple: f64,
    /// Factor applied to the critical inductances.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    dmin: f64,
    #[arg(long)]
    dmax: f64,
    #[arg(long)]
    step: f64,
    /// Curve table CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct ControlArgs {
    #[arg(long)]
    config: PathBuf,
    /// Reference steps "t0:V0,t1:V1,..." (seconds, volts). Repeat for
    /// several independent scenarios.
    #[arg(long, required = true)]
    refs: Vec<String>,
    /// End time, s; defaults to 50 ms after the last step.
    #[arg(long)]
    end: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Steady(a) => cmd_steady(a),
        Command::Design(a) => cmd_design(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Control(a) => cmd_control(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // The reader went away (`hgvm ... | head`); nothing left to report.
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            let info = output::ErrorInfo::from(&e);
            eprintln!(
                "{}",
                serde_json::to_string(&info).expect("error info serialises")
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

fn write_plot(path: Option<&PathBuf>, chart: impl FnOnce() -> Chart) -> Result<(), CliError> {
    match path {
        Some(p) => output::write_file(p, chart().render().as_bytes()),
        None => Ok(()),
    }
}

fn gain_curve(d_max: f64) -> Vec<(f64, f64)> {
    (1..=200)
        .map(|i| i as f64 * d_max / 200.0)
        .map(|d| (d, gain_ccm(d).unwrap_or(f64::NAN)))
        .collect()
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateInputs<'a> {
    preset: &'a str,
    params: ConverterParams,
    sim: SimConfig,
}

#[derive(Serialize)]
struct Analytic {
    gain: f64,
    v_o: f64,
    v_c: [f64; 6],
    v_switch: f64,
}

#[derive(Serialize)]
struct SimulateResults {
    r_on: f64,
    shooting_residual: Option<f64>,
    periodic: hgvm_core::simulator::PeriodicStatus,
    window_periods: usize,
    metrics: hgvm_core::simulator::WaveformMetrics,
    balance: BalanceReport,
    analytic: Analytic,
    gain: f64,
    gain_error: f64,
    events: usize,
    samples: usize,
}

/// Critical-inductance and load checks against the design equations.
fn component_warnings(cfg: &RunConfig) -> Vec<Warning> {
    let p = &cfg.params;
    let mut warnings = Vec::new();
    let Ok(m) = gain_ccm(p.duty) else {
        return warnings;
    };
    let vo = m * p.vin;
    if let Ok(r) = size_components(&DesignSpec::new(p.vin, vo, vo * vo / p.r_load, p.fs)) {
        for (k, (&l, &l_min)) in p.inductances().iter().zip(&r.l_min).enumerate() {
            let message = if l < l_min {
                format!("{l:e} H is below the critical {l_min:e} H; discontinuous conduction is expected")
            } else if l < hgvm_core::designer::THIN_MARGIN * l_min {
                format!("{l:e} H is within 10% of the critical {l_min:e} H")
            } else {
                continue;
            };
            warnings.push(Warning {
                component: format!("l{}", k + 1),
                message,
            });
        }
    }
    if let Some(spec) = cfg.design_spec() {
        let drawn = spec.vo * spec.vo / p.r_load;
        if (drawn - spec.po).abs() > 0.1 * spec.po {
            warnings.push(Warning {
                component: "r_load".into(),
                message: format!(
                    "{} ohm at {} V draws {drawn:.1} W, not the {} W design power",
                    p.r_load, spec.vo, spec.po
                ),
            });
        }
    }
    warnings
}

fn run_simulation(cfg: &RunConfig) -> Result<(SimulateResults, Trace), CliError> {
    let p = &cfg.params;
    let out = simulate(p, None, &cfg.sim)?;
    let window = cfg.sim.periods.min(20);
    let metrics = waveform_metrics(&out.trace, window)?;
    let balance = balance_report(&out.trace, window)?;
    let periodic = periodic_steady_state(&out.trace, 1e-6)?;
    let m = gain_ccm(p.duty)?;
    let op = steady_state_point(p.vin, p.duty, m * p.vin / p.r_load)?;
    let gain = metrics.v_o.mean / p.vin;
    let results = SimulateResults {
        r_on: out.r_on,
        shooting_residual: out.shooting_residual,
        periodic,
        window_periods: window,
        metrics,
        balance,
        analytic: Analytic {
            gain: m,
            v_o: op.v_o,
            v_c: op.v_c,
            v_switch: op.v_switch,
        },
        gain,
        gain_error: (gain - m) / m,
        events: out.events.len(),
        samples: out.trace.samples.len(),
    };
    Ok((results, out.trace))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg = read_config(&a.config)?;
    let mut warnings = component_warnings(&cfg);
    let run = run_simulation(&cfg);
    if let Ok((r, _)) = &run {
        if !r.periodic.converged {
            warnings.push(Warning {
                component: "sim".into(),
                message: "period-start states did not settle to a periodic steady state".into(),
            });
        }
    }
    let inputs = SimulateInputs {
        preset: &cfg.preset,
        params: cfg.params,
        sim: cfg.sim,
    };
    let (results, trace) = match run {
        Ok((r, t)) => (Ok(r), Some(t)),
        Err(e) => (Err(e), None),
    };
    let report = RunReport::new("simulate", inputs, results.as_ref(), warnings.clone());
    if let Some(path) = &a.json {
        output::write_file(path, report.to_json().as_bytes())?;
    }
    let (r, trace) = match (results, trace) {
        (Ok(r), Some(t)) => (r, t),
        (Err(e), _) => return Err(e),
        _ => unreachable!("results and trace are produced together"),
    };
    if let Some(path) = &a.out {
        output::write_with(path, |w| output::write_trace_csv(w, &trace))?;
    }
    write_plot(a.plot.as_ref(), || {
        let mut series = vec![Series::line(
            "vo",
            trace.samples.iter().map(|s| (s.t, s.v_o)).collect(),
        )];
        for k in 0..6 {
            series.push(Series::line(
                format!("vC{}", k + 1),
                trace.samples.iter().map(|s| (s.t, s.v_c[k])).collect(),
            ));
        }
        Chart {
            title: format!("Output and capacitor voltages, D = {}", cfg.params.duty),
            x_label: "t (s)".into(),
            y_label: "V".into(),
            series,
            y_range: None,
        }
    })?;

    let m = &r.metrics;
    out!(
        "periods         {} (r_on {:e} ohm)",
        cfg.sim.periods,
        r.r_on
    );
    out!(
        "periodic        {} (period {})",
        if r.periodic.converged {
            "converged"
        } else {
            "not converged"
        },
        r.periodic.period
    );
    out!(
        "v_o mean        {:.4} V  (ideal {:.4} V, gain error {:+.3}%)",
        m.v_o.mean,
        r.analytic.v_o,
        100.0 * r.gain_error
    );
    out!("v_o ripple      {:.4} V p-p", m.v_o.ripple);
    for k in 0..6 {
        out!(
            "vC{} mean        {:.4} V  (ideal {:.4} V)",
            k + 1,
            m.v_c[k].mean,
            r.analytic.v_c[k]
        );
    }
    for k in 0..3 {
        out!("iL{} mean        {:.4} A", k + 1, m.i_l[k].mean);
    }
    out!(
        "switch peak     {:.4} V  (ideal {:.4} V)",
        m.peak_v_switch,
        r.analytic.v_switch
    );
    let dv: Vec<String> = m.peak_v_diode.iter().map(|v| format!("{v:.3}")).collect();
    out!("diode peaks     {} V", dv.join(" "));
    out!(
        "mode fractions  {}",
        m.mode_fraction
            .iter()
            .map(|f| format!("{f:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    out!("power mismatch  {:.4}%", 100.0 * r.balance.power_mismatch);
    for w in &warnings {
        eprintln!("warning: {}: {}", w.component, w.message);
    }
    Ok(())
}

// ------------------------------------------------------------------ steady

#[derive(Serialize)]
struct SteadyInputs {
    vin: f64,
    duty: f64,
    i_o: f64,
}

fn cmd_steady(a: SteadyArgs) -> Result<(), CliError> {
    let inputs = SteadyInputs {
        vin: a.vin,
        duty: a.duty,
        i_o: a.io,
    };
    let result: Result<OperatingPoint, CliError> =
        steady_state_point(a.vin, a.duty, a.io).map_err(Into::into);
    if a.json {
        print!(
            "{}",
            RunReport::new("steady", inputs, result.as_ref(), vec![]).to_json()
        );
    }
    let op = result?;
    write_plot(a.plot.as_ref(), || Chart {
        title: "Ideal voltage gain".into(),
        x_label: "D".into(),
        y_label: "Vo / Vin".into(),
        series: vec![
            Series::line("M(D)", gain_curve(0.9)),
            Series::markers(format!("D = {}", op.duty), vec![(op.duty, op.gain)]),
        ],
        y_range: Some((0.0, 100.0f64.min(2.0 * gain_ccm(0.9).unwrap_or(100.0)))),
    })?;
    if a.json {
        return Ok(());
    }
    out!("gain            {:.4}", op.gain);
    out!("v_o             {:.4} V", op.v_o);
    out!("i_o             {:.4} A", op.i_o);
    for (k, v) in op.v_c.iter().enumerate() {
        out!("V_C{}            {:.4} V", k + 1, v);
    }
    for (k, i) in op.i_l.iter().enumerate() {
        out!("I_L{}            {:.4} A", k + 1, i);
    }
    out!("V_Q             {:.4} V", op.v_switch);
    for (k, v) in op.v_diode.iter().enumerate() {
        out!("V_D{}            {:.4} V", k + 1, v);
    }
    Ok(())
}

// ------------------------------------------------------------------ design

fn cmd_design(a: DesignArgs) -> Result<(), CliError> {
    let spec = DesignSpec {
        ripple: a.ripple,
        inductor_margin: a.margin,
        ..DesignSpec::new(a.vin, a.vo, a.po, a.fs)
    };
    let result: Result<DesignResult, CliError> = size_components(&spec).map_err(Into::into);
    if a.json {
        print!(
            "{}",
            RunReport::new("design", spec, result.as_ref(), vec![]).to_json()
        );
    }
    let r = result?;
    write_plot(a.plot.as_ref(), || Chart {
        title: format!("Design point: {} V to {} V", a.vin, a.vo),
        x_label: "D".into(),
        y_label: "Vo / Vin".into(),
        series: vec![
            Series::line("M(D)", gain_curve(r.duty.max(0.5) + 0.1)),
            Series::markers(format!("D = {:.4}", r.duty), vec![(r.duty, r.gain)]),
        ],
        y_range: None,
    })?;
    if a.json {
        return Ok(());
    }
    let micro = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{:.2}", x * 1e6))
            .collect::<Vec<_>>()
            .join("/")
    };
    out!("duty            {:.5}", r.duty);
    out!("gain            {:.4}", r.gain);
    out!("i_o             {:.4} A", r.i_o);
    out!("L minima        {} uH", micro(&r.l_min));
    out!("L recommended   {} uH", micro(&r.l_recommended));
    out!("C minima        {} uF", micro(&r.c_min));
    Ok(())
}

// ----------------------------------------------------------------- compare

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let table = sweep(a.dmin, a.dmax, a.step)?;
    match &a.out {
        Some(path) => output::write_with(path, |w| output::write_comparison_csv(w, &table))?,
        None => output::write_comparison_csv(std::io::stdout().lock(), &table)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?,
    }
    write_plot(a.plot.as_ref(), || Chart {
        title: "Voltage gain by topology".into(),
        x_label: "D".into(),
        y_label: "Vo / Vin".into(),
        series: table
            .topologies
            .iter()
            .map(|t| {
                Series::line(
                    t.id,
                    table
                        .duty
                        .iter()
                        .copied()
                        .zip(t.gain.iter().copied())
                        .collect(),
                )
            })
            .collect(),
        y_range: Some((
            0.0,
            table.topologies[0].gain.iter().copied().fold(0.0, f64::max) * 1.1,
        )),
    })?;
    if a.out.is_some() {
        let ours = topology("hgvm-qbc").expect("catalogue contains the converter itself");
        for other in catalog().iter().filter(|t| t.id != ours.id) {
            let roots = crossover(ours, other, Metric::Gain);
            let shown: Vec<String> = roots.iter().map(|d| format!("{d:.4}")).collect();
            out!(
                "gain crossover with {:<11} {}",
                other.id,
                if shown.is_empty() {
                    "none".into()
                } else {
                    shown.join(", ")
                }
            );
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- control

/// Trace decimation for closed-loop runs, which span thousands of periods.
const CONTROL_STRIDE: usize = 50;

fn parse_refs(spec: &str, end: Option<f64>) -> Result<StepScenario, CliError> {
    let mut steps = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (t, v) = item.split_once(':').ok_or_else(|| {
            CliError::config(None, format!("reference step `{item}` is not `t:V`"))
        })?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(None, format!("cannot parse `{s}` in `{item}`")))
        };
        steps.push((num(t)?, num(v)?));
    }
    let last = steps.last().map_or(0.0, |s| s.0);
    let scenario = StepScenario {
        steps,
        end: end.unwrap_or(last + StepScenario::SEGMENT),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Serialize)]
struct ControlInputs<'a> {
    preset: &'a str,
    params: ConverterParams,
    sim: SimConfig,
    control: PiConfig,
    scenarios: &'a [StepScenario],
}

#[derive(Serialize)]
struct ControlResults<'a> {
    scenarios: &'a [ScenarioResult],
}

#[derive(Serialize)]
struct ScenarioResult {
    metrics: Vec<StepMetrics>,
    periods: usize,
    final_duty: f64,
    duty_min_seen: f64,
    duty_max_seen: f64,
}

fn numbered(path: &Path, k: usize, n: usize) -> PathBuf {
    if n == 1 {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{}.{}", k + 1, ext.to_string_lossy()),
        None => format!("{stem}-{}", k + 1),
    };
    path.with_file_name(name)
}

fn cmd_control(a: ControlArgs) -> Result<(), CliError> {
    let mut cfg = read_config(&a.config)?;
    if !cfg.record_stride_set {
        cfg.sim.record_stride = CONTROL_STRIDE;
    }
    let scenarios = a
        .refs
        .iter()
        .map(|r| parse_refs(r, a.end))
        .collect::<Result<Vec<_>, _>>()?;

    let runs: Vec<Result<hgvm_core::ClosedLoopOutput, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| {
                s.spawn(|| {
                    run_closed_loop(&cfg.params, sc, &cfg.control, &cfg.sim).map_err(CliError::from)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("closed-loop worker panicked"))
            .collect()
    });

    let results: Result<Vec<ScenarioResult>, &CliError> = runs
        .iter()
        .map(|r| {
            r.as_ref().map(|out| {
                let duties = out.periods.iter().map(|p| p.duty);
                ScenarioResult {
                    metrics: out.metrics.clone(),
                    periods: out.periods.len(),
                    final_duty: out.periods.last().map_or(f64::NAN, |p| p.duty),
                    duty_min_seen: duties.clone().fold(f64::INFINITY, f64::min),
                    duty_max_seen: duties.fold(f64::NEG_INFINITY, f64::max),
                }
            })
        })
        .collect();
    let inputs = ControlInputs {
        preset: &cfg.preset,
        params: cfg.params,
        sim: cfg.sim,
        control: cfg.control,
        scenarios: &scenarios,
    };
    if let Some(path) = &a.json {
        output::write_file(
            path,
            RunReport::new(
                "control",
                inputs,
                results
                    .as_ref()
                    .map(|r| ControlResults { scenarios: r })
                    .map_err(|e| *e),
                vec![],
            )
            .to_json()
            .as_bytes(),
        )?;
    }
    let results = match results {
        Ok(r) => r,
        Err(_) => {
            let first = runs
                .into_iter()
                .find_map(|r| r.err())
                .expect("an error was recorded");
            return Err(first);
        }
    };
    let outs: Vec<_> = runs
        .into_iter()
        .map(|r| r.expect("errors handled above"))
        .collect();

    let n = outs.len();
    for (k, out) in outs.iter().enumerate() {
        if let Some(path) = &a.out {
            output::write_with(&numbered(path, k, n), |w| {
                output::write_trace_csv(w, &out.trace)
            })?;
        }
        if let Some(path) = &a.plot {
            let sc = &scenarios[k];
            let chart = Chart {
                title: "Closed-loop output voltage".into(),
                x_label: "t (s)".into(),
                y_label: "V".into(),
                series: vec![
                    Series::line(
                        "vo",
                        out.trace.samples.iter().map(|s| (s.t, s.v_o)).collect(),
                    ),
                    Series::line(
                        "reference",
                        sc.segments()
                            .iter()
                            .flat_map(|&(t0, t1, v)| [(t0, v), (t1, v)])
                            .collect(),
                    ),
                ],
                y_range: None,
            };
            output::write_file(&numbered(path, k, n), chart.render().as_bytes())?;
        }
    }
    for (k, r) in results.iter().enumerate() {
        if n > 1 {
            out!("scenario {}", k + 1);
        }
        out!("  t_step      ref (V)  settling (ms)  overshoot (%)  ss error (%)  ripple (V)");
        for m in &r.metrics {
            let settle = m
                .settling_time
                .map_or("-".to_string(), |t| format!("{:.2}", t * 1e3));
            out!(
                "  {:<10.4}  {:>7.2}  {:>13}  {:>13.3}  {:>12.3}  {:>10.4}",
                m.t_step,
                m.reference,
                settle,
                100.0 * m.overshoot,
                100.0 * m.steady_state_error,
                m.ripple
            );
        }
        out!("  final duty {:.5}", r.final_duty);
    }
    Ok(())
}
