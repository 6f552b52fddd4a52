//! Post-processing of recorded traces.

use serde::Serialize;

use super::{Sample, Trace};
use crate::analysis::BalanceReport;
use crate::circuit::DIODES;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicStatus {
    pub converged: bool,
    /// First period whose start state matched the previous one within
    /// tolerance, or the last period examined if none did.
    pub period: usize,
    /// Relative change of each state component between the last two
    /// period-start samples.
    pub deltas: [f64; 9],
}

fn state_of(s: &Sample) -> [f64; 9] {
    std::array::from_fn(|k| if k < 3 { s.i_l[k] } else { s.v_c[k - 3] })
}

/// Relative change per component, normalised by the larger of the
/// component's magnitude and 1% of the largest magnitude of its kind.
fn relative_change(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let imax = a[..3].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let vmax = a[3..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    std::array::from_fn(|k| {
        let floor = 0.01 * if k < 3 { imax } else { vmax };
        let den = a[k].abs().max(floor).max(f64::MIN_POSITIVE);
        (b[k] - a[k]).abs() / den
    })
}

/// Compares consecutive period-start states and reports the first period at
/// which the largest relative change fell below `tol`.
pub fn periodic_steady_state(trace: &Trace, tol: f64) -> Result<PeriodicStatus> {
    if trace.boundaries.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "trace",
            value: trace.boundaries.len() as f64,
            constraint: "needs at least one complete period",
        });
    }
    let mut deltas = [0.0; 9];
    for k in 1..trace.boundaries.len() {
        let a = state_of(&trace.samples[trace.boundaries[k - 1]]);
        let b = state_of(&trace.samples[trace.boundaries[k]]);
        deltas = relative_change(&a, &b);
        if deltas.iter().all(|d| *d < tol) {
            return Ok(PeriodicStatus {
                converged: true,
                period: k,
                deltas,
            });
        }
    }
    Ok(PeriodicStatus {
        converged: false,
        period: trace.boundaries.len() - 1,
        deltas,
    })
}

fn window(trace: &Trace, periods: usize) -> Result<&[Sample]> {
    trace.window(periods).ok_or(Error::InvalidParameter {
        name: "window",
        value: periods as f64,
        constraint: "must be between 1 and the number of simulated periods",
    })
}

fn trapezoid_mean(w: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    let span = w[w.len() - 1].t - w[0].t;
    let area: f64 = w
        .windows(2)
        .map(|p| 0.5 * (p[1].t - p[0].t) * (f(&p[0]) + f(&p[1])))
        .sum();
    area / span
}

/// Volt-second, charge and power balance over the last `periods` periods.
///
/// Average inductor voltages and capacitor currents come from the net
/// change of the stored quantity across the window (`L di`, `C dv`), so
/// they are exact regardless of sampling density.
pub fn balance_report(trace: &Trace, periods: usize) -> Result<BalanceReport> {
    let w = window(trace, periods)?;
    let (first, last) = (&w[0], &w[w.len() - 1]);
    let span = last.t - first.t;
    let l = trace.params.inductances();
    let c = trace.params.capacitances();
    let inductor_voltage = std::array::from_fn(|k| l[k] * (last.i_l[k] - first.i_l[k]) / span);
    let capacitor_current = std::array::from_fn(|k| c[k] * (last.v_c[k] - first.v_c[k]) / span);
    let input_power = trace.params.vin * trapezoid_mean(w, |s| s.i_l[0]);
    let output_power = trapezoid_mean(w, |s| s.v_o * s.i_o);
    Ok(BalanceReport {
        inductor_voltage,
        capacitor_current,
        input_power,
        output_power,
        power_mismatch: (input_power - output_power) / input_power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Peak-to-peak.
    pub ripple: f64,
}

fn stats(w: &[Sample], f: impl Fn(&Sample) -> f64 + Copy) -> SignalStats {
    let (min, max) = w
        .iter()
        .map(f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    SignalStats {
        mean: trapezoid_mean(w, f),
        min,
        max,
        ripple: max - min,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveformMetrics {
    pub t_start: f64,
    pub t_end: f64,
    pub v_o: SignalStats,
    pub i_o: SignalStats,
    pub i_l: [SignalStats; 3],
    pub v_c: [SignalStats; 6],
    /// Highest switch blocking voltage.
    pub peak_v_switch: f64,
    /// Highest reverse voltage per diode.
    pub peak_v_diode: [f64; DIODES],
    pub peak_i_diode: [f64; DIODES],
    pub peak_i_switch: f64,
    /// Share of the window spent in each mode.
    pub mode_fraction: [f64; 4],
}

/// Means, ripple, device stresses and mode occupancy over the last
/// `periods` periods.
pub fn waveform_metrics(trace: &Trace, periods: usize) -> Result<WaveformMetrics> {
    let w = window(trace, periods)?;
    let t_start = w[0].t;
    let t_end = w[w.len() - 1].t;
    let mut mode_time = [0.0; 4];
    for p in w.windows(2) {
        mode_time[p[0].mode.index()] += p[1].t - p[0].t;
    }
    let span = t_end - t_start;
    let max_of = |f: &dyn Fn(&Sample) -> f64| w.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(WaveformMetrics {
        t_start,
        t_end,
        v_o: stats(w, |s| s.v_o),
        i_o: stats(w, |s| s.i_o),
        i_l: std::array::from_fn(|k| stats(w, move |s| s.i_l[k])),
        v_c: std::array::from_fn(|k| stats(w, move |s| s.v_c[k])),
        peak_v_switch: max_of(&|s| s.v_q),
        peak_v_diode: std::array::from_fn(|k| max_of(&|s| -s.v_d[k])),
        peak_i_diode: std::array::from_fn(|k| max_of(&|s| s.i_d[k])),
        peak_i_switch: max_of(&|s| s.i_q),
        mode_fraction: mode_time.map(|t| t / span),
    })
}
