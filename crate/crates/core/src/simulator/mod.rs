//! Switched time-domain simulation.
//!
//! Each step integrates the network with a fixed conduction pattern using
//! classical RK4. Clock edges fall exactly on step boundaries. Diode
//! commutations inside a step are located by bisection on the step length
//! until the offending current is within `event_tol`, after which the
//! conduction pattern is re-resolved.
//!
//! Mode bookkeeping follows the switch phase: the switch-on interval is mode 1
//! until D5 first stops conducting and mode 2 afterwards; the switch-off
//! interval is mode 3 until D6 first stops conducting and mode 4 afterwards.
//! Any later D5/D6 re-conduction within the same interval does not change
//! the mode.

mod metrics;
mod shooting;
mod trace;

pub use metrics::{
    balance_report, periodic_steady_state, waveform_metrics, PeriodicStatus, SignalStats,
    WaveformMetrics,
};
pub use shooting::{orbit_guess, periodic_orbit};
pub use trace::{Sample, Trace};

use serde::Serialize;

use crate::analysis::{gain_ccm, steady_state_point};
use crate::circuit::{Conduction, Network, NetworkSolution, DIODES};
use crate::error::{Error, Result};
use crate::model::{check_duty, ConverterParams, Mode, State};

const D5: usize = 4;
const D6: usize = 5;

/// Cutset tolerance used when no run configuration is at hand, A.
const CUTSET_TOL: f64 = 1e-4;

/// Run controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Nominal step, s.
    pub dt: f64,
    pub periods: usize,
    /// Start from the analytic operating point instead of a discharged circuit.
    pub warm_start: bool,
    /// Refine the warm start onto the periodic orbit before running.
    pub shooting: bool,
    /// Current tolerance for locating diode commutations, A.
    pub event_tol: f64,
    /// Semiconductor on-resistance in ohms. `None` picks 1 mOhm, raised if
    /// needed so the step resolves the fastest charge-sharing time constant.
    pub r_on: Option<f64>,
    /// Keep every n-th regular step in the trace (events are always kept).
    pub record_stride: usize,
}

impl SimConfig {
    pub const STEPS_PER_PERIOD: usize = 2000;

    pub fn for_params(params: &ConverterParams) -> Self {
        SimConfig {
            dt: params.period() / Self::STEPS_PER_PERIOD as f64,
            periods: 400,
            warm_start: true,
            shooting: true,
            event_tol: 1e-6,
            r_on: None,
            record_stride: 10,
        }
    }

    pub fn r_on_for(&self, params: &ConverterParams) -> f64 {
        self.r_on.unwrap_or_else(|| {
            let c_min = params
                .capacitances()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            (2.0 * self.dt / c_min).max(1e-3)
        })
    }

    pub fn validate(&self, params: &ConverterParams) -> Result<()> {
        let bad = |name, value, constraint| {
            Err(Error::InvalidParameter {
                name,
                value,
                constraint,
            })
        };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", self.dt, "must be finite and > 0");
        }
        if self.dt > params.period() / 20.0 {
            return bad(
                "dt",
                self.dt,
                "must be at most 1/20 of the switching period",
            );
        }
        if self.periods == 0 {
            return bad("periods", 0.0, "must be at least 1");
        }
        if !(self.event_tol.is_finite() && self.event_tol > 0.0) {
            return bad("event_tol", self.event_tol, "must be finite and > 0");
        }
        if let Some(r) = self.r_on {
            if !(r.is_finite() && r > 0.0) {
                return bad("r_on", r, "must be finite and > 0");
            }
        }
        if self.record_stride == 0 {
            return bad("record_stride", 0.0, "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventCause {
    D5CurrentZero,
    SwitchOff,
    D6CurrentZero,
    SwitchOn,
}

impl EventCause {
    pub fn as_str(self) -> &'static str {
        match self {
            EventCause::D5CurrentZero => "d5-current-zero",
            EventCause::SwitchOff => "switch-off",
            EventCause::D6CurrentZero => "d6-current-zero",
            EventCause::SwitchOn => "switch-on",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeEvent {
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
    pub cause: EventCause,
}

/// Exact integrals and extremes over one switching period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodSummary {
    pub index: usize,
    pub t_start: f64,
    pub duty: f64,
    pub x_start: [f64; 9],
    pub x_end: [f64; 9],
    pub mean_x: [f64; 9],
    pub mean_v_o: f64,
    pub mean_i_o: f64,
    pub input_power: f64,
    pub output_power: f64,
    pub v_o_min: f64,
    pub v_o_max: f64,
    pub mode_time: [f64; 4],
    pub peak_v_switch: f64,
    /// Largest reverse (blocking) voltage per diode.
    pub peak_v_diode: [f64; DIODES],
    pub peak_i_diode: [f64; DIODES],
    pub peak_i_switch: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    pub events: Vec<ModeEvent>,
    pub periods: Vec<PeriodSummary>,
    pub initial_state: State,
    pub final_state: State,
    pub r_on: f64,
    /// Remaining relative mismatch of the shooting refinement, when used.
    pub shooting_residual: Option<f64>,
}

/// Analytic operating point mapped onto the state vector, with the load
/// current taken from the ideal output voltage across `r_load`.
pub fn warm_start(params: &ConverterParams) -> Result<State> {
    params.validate()?;
    let i_o = gain_ccm(params.duty)? * params.vin / params.r_load;
    let op = steady_state_point(params.vin, params.duty, i_o)?;
    Ok(State {
        i_l: op.i_l,
        v_c: op.v_c,
        mode: Mode::One,
        t: 0.0,
    })
}

/// Right-hand side of the state equations in one mode, together with the
/// network solution it came from. The mode's defining diode (D5 in modes
/// 1/2, D6 in modes 3/4) is held on or off; every other device takes its
/// self-consistent state.
pub fn mode_derivative(
    mode: Mode,
    state: &State,
    params: &ConverterParams,
    r_on: f64,
) -> Result<([f64; 9], NetworkSolution)> {
    params.validate()?;
    let net = Network::new(params, r_on, CUTSET_TOL);
    let x = state.vector();
    let mut fixed = [None; DIODES];
    match mode {
        Mode::One => fixed[D5] = Some(true),
        Mode::Two => fixed[D5] = Some(false),
        Mode::Three => fixed[D6] = Some(true),
        Mode::Four => fixed[D6] = Some(false),
    }
    let cond = net
        .resolve_with(&x, mode.switch_on(), [false; DIODES], fixed)
        .ok_or(Error::Inconsistent { t: state.t })?;
    let s = net.solve(&x, cond);
    Ok((net.derivative_of(&s), s))
}

/// Runs `config.periods` switching periods at `params.duty`.
///
/// With no initial state the run starts from [`warm_start`] (refined by
/// shooting when enabled) or from a discharged circuit.
pub fn simulate(
    params: &ConverterParams,
    initial: Option<State>,
    config: &SimConfig,
) -> Result<SimOutput> {
    params.validate()?;
    config.validate(params)?;
    let mut residual = None;
    let start = match initial {
        Some(s) => s,
        None if config.warm_start => {
            let mut s = warm_start(params)?;
            if config.shooting {
                let (x, r) = periodic_orbit(params, config, &orbit_guess(params)?)?;
                s = State::from_vector(&x, Mode::One, 0.0);
                residual = Some(r);
            }
            s
        }
        None => State::zero(),
    };
    let mut sim = Simulator::new(params, config, start, true)?;
    let mut periods = Vec::with_capacity(config.periods);
    for _ in 0..config.periods {
        periods.push(sim.run_period(params.duty)?);
    }
    let r_on = sim.r_on;
    let final_state = sim.state();
    let (trace, events) = sim.finish();
    Ok(SimOutput {
        trace,
        events,
        periods,
        initial_state: start,
        final_state,
        r_on,
        shooting_residual: residual,
    })
}

fn rk4(net: &Network, x: &[f64; 9], cond: Conduction, h: f64) -> [f64; 9] {
    let axpy = |k: &[f64; 9], a: f64| -> [f64; 9] { std::array::from_fn(|i| x[i] + a * k[i]) };
    let k1 = net.derivative(x, cond);
    let k2 = net.derivative(&axpy(&k1, 0.5 * h), cond);
    let k3 = net.derivative(&axpy(&k2, 0.5 * h), cond);
    let k4 = net.derivative(&axpy(&k3, h), cond);
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

struct Accumulator {
    summary: PeriodSummary,
}

impl Accumulator {
    fn new(index: usize, t_start: f64, duty: f64, x: &[f64; 9], v_o: f64) -> Self {
        Accumulator {
            summary: PeriodSummary {
                index,
                t_start,
                duty,
                x_start: *x,
                x_end: *x,
                mean_x: [0.0; 9],
                mean_v_o: 0.0,
                mean_i_o: 0.0,
                input_power: 0.0,
                output_power: 0.0,
                v_o_min: v_o,
                v_o_max: v_o,
                mode_time: [0.0; 4],
                peak_v_switch: 0.0,
                peak_v_diode: [0.0; DIODES],
                peak_i_diode: [0.0; DIODES],
                peak_i_switch: 0.0,
            },
        }
    }

    fn peaks(&mut self, s: &NetworkSolution) {
        let p = &mut self.summary;
        p.v_o_min = p.v_o_min.min(s.v_o);
        p.v_o_max = p.v_o_max.max(s.v_o);
        p.peak_v_switch = p.peak_v_switch.max(s.v_switch);
        p.peak_i_switch = p.peak_i_switch.max(s.i_switch);
        for k in 0..DIODES {
            p.peak_v_diode[k] = p.peak_v_diode[k].max(-s.v_diode[k]);
            p.peak_i_diode[k] = p.peak_i_diode[k].max(s.i_diode[k]);
        }
    }

    /// Trapezoidal contribution of one sub-step.
    fn add(
        &mut self,
        h: f64,
        mode: Mode,
        vin: f64,
        x0: &[f64; 9],
        s0: &NetworkSolution,
        x1: &[f64; 9],
        s1: &NetworkSolution,
    ) {
        let p = &mut self.summary;
        let w = 0.5 * h;
        for i in 0..9 {
            p.mean_x[i] += w * (x0[i] + x1[i]);
        }
        p.mean_v_o += w * (s0.v_o + s1.v_o);
        p.mean_i_o += w * (s0.i_o + s1.i_o);
        p.input_power += w * vin * (x0[0] + x1[0]);
        p.output_power += w * (s0.v_o * s0.i_o + s1.v_o * s1.i_o);
        p.mode_time[mode.index()] += h;
        self.peaks(s0);
        self.peaks(s1);
    }

    fn finish(mut self, x_end: &[f64; 9], length: f64) -> PeriodSummary {
        let p = &mut self.summary;
        p.x_end = *x_end;
        for v in p.mean_x.iter_mut() {
            *v /= length;
        }
        p.mean_v_o /= length;
        p.mean_i_o /= length;
        p.input_power /= length;
        p.output_power /= length;
        self.summary
    }
}

/// Stateful period-by-period integrator; the closed-loop driver feeds it one
/// duty ratio per period.
pub struct Simulator {
    params: ConverterParams,
    config: SimConfig,
    net: Network,
    r_on: f64,
    x: [f64; 9],
    cond: Conduction,
    mode: Mode,
    t_origin: f64,
    period: usize,
    recording: bool,
    step_count: u64,
    trace: Trace,
    events: Vec<ModeEvent>,
}

impl Simulator {
    pub fn new(
        params: &ConverterParams,
        config: &SimConfig,
        start: State,
        recording: bool,
    ) -> Result<Self> {
        params.validate()?;
        config.validate(params)?;
        let x = start.vector();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: start.t });
        }
        let r_on = config.r_on_for(params);
        let net = Network::new(params, r_on, 100.0 * config.event_tol);
        let cond = net
            .resolve(&x, true, [false; DIODES])
            .ok_or(Error::Inconsistent { t: start.t })?;
        let mut sim = Simulator {
            params: *params,
            config: *config,
            net,
            r_on,
            x,
            cond,
            mode: Mode::One,
            t_origin: start.t,
            period: 0,
            recording,
            step_count: 0,
            trace: Trace::new(*params),
            events: Vec::new(),
        };
        sim.record(start.t);
        sim.trace.mark_boundary();
        Ok(sim)
    }

    pub fn r_on(&self) -> f64 {
        self.r_on
    }

    pub fn time(&self) -> f64 {
        self.t_origin + self.period as f64 * self.params.period()
    }

    pub fn state(&self) -> State {
        State::from_vector(&self.x, self.mode, self.time())
    }

    pub fn finish(self) -> (Trace, Vec<ModeEvent>) {
        (self.trace, self.events)
    }

    pub fn events(&self) -> &[ModeEvent] {
        &self.events
    }

    fn record(&mut self, t: f64) {
        if self.recording {
            let s = self.net.solve(&self.x, self.cond);
            self.trace
                .push(Sample::new(t, self.mode, &self.x, &s, self.cond));
        }
    }

    fn transition(&mut self, t: f64, to: Mode, cause: EventCause) {
        self.events.push(ModeEvent {
            t,
            from: self.mode,
            to,
            cause,
        });
        self.mode = to;
    }

    fn resolve(&mut self, t: f64, switch_on: bool, hint: [bool; DIODES]) -> Result<()> {
        self.cond = self
            .net
            .resolve(&self.x, switch_on, hint)
            .ok_or(Error::Inconsistent { t })?;
        Ok(())
    }

    fn switch_on_edge(&mut self, t: f64) -> Result<()> {
        if self.period > 0 {
            if self.mode == Mode::Three {
                self.transition(t, Mode::Four, EventCause::D6CurrentZero);
            }
            self.transition(t, Mode::One, EventCause::SwitchOn);
        }
        self.resolve(t, true, self.cond.diodes)?;
        if !self.cond.diodes[D5] {
            self.transition(t, Mode::Two, EventCause::D5CurrentZero);
        }
        self.record(t);
        Ok(())
    }

    fn switch_off_edge(&mut self, t: f64) -> Result<()> {
        if self.mode == Mode::One {
            self.transition(t, Mode::Two, EventCause::D5CurrentZero);
        }
        self.transition(t, Mode::Three, EventCause::SwitchOff);
        self.resolve(t, false, self.cond.diodes)?;
        if !self.cond.diodes[D6] {
            self.transition(t, Mode::Four, EventCause::D6CurrentZero);
        }
        self.record(t);
        Ok(())
    }

    /// Advances one full switching period with the given duty ratio.
    pub fn run_period(&mut self, duty: f64) -> Result<PeriodSummary> {
        check_duty(duty)?;
        let ts = self.params.period();
        let t_start = self.time();
        self.switch_on_edge(t_start)?;
        let s0 = self.net.solve(&self.x, self.cond);
        let mut acc = Accumulator::new(self.period, t_start, duty, &self.x, s0.v_o);
        let t_on = duty * ts;
        self.integrate(t_start, t_on, &mut acc)?;
        self.switch_off_edge(t_start + t_on)?;
        self.integrate(t_start + t_on, ts - t_on, &mut acc)?;
        self.period += 1;
        let t_end = self.time();
        self.record(t_end);
        if self.recording {
            self.trace.mark_boundary();
        }
        Ok(acc.finish(&self.x, ts))
    }

    /// Positive when the pattern no longer fits the state: the largest
    /// negative on-current, positive off-drive, or non-positive L1/L2
    /// current, in amperes. Zero or negative means consistent.
    fn violation(&self, x: &[f64; 9], s: &NetworkSolution) -> f64 {
        let drive = self.net.diode_drive(s);
        let mut worst = f64::NEG_INFINITY;
        for k in 0..DIODES {
            let v = if self.cond.diodes[k] {
                -drive[k]
            } else {
                drive[k]
            };
            worst = worst.max(v);
        }
        worst.max(-x[0]).max(-x[1])
    }

    fn integrate(&mut self, seg_start: f64, seg_len: f64, acc: &mut Accumulator) -> Result<()> {
        let dt = self.config.dt;
        let eps = 1e-9 * dt;
        let tol = self.config.event_tol;
        let mut tau = 0.0;
        let mut s0 = self.net.solve(&self.x, self.cond);
        let mut events_here = 0usize;
        while seg_len - tau > eps {
            let mut h = (seg_len - tau).min(dt);
            if seg_len - tau - h <= eps {
                h = seg_len - tau;
            }
            let x1 = rk4(&self.net, &self.x, self.cond, h);
            let t1 = seg_start + tau + h;
            if x1.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { t: t1 });
            }
            let s1 = self.net.solve(&x1, self.cond);
            if self.violation(&x1, &s1) <= 0.0 {
                acc.add(h, self.mode, self.params.vin, &self.x, &s0, &x1, &s1);
                self.x = x1;
                s0 = s1;
                tau += h;
                events_here = 0;
                self.step_count += 1;
                if self.step_count % self.config.record_stride as u64 == 0 {
                    self.record(seg_start + tau);
                }
                continue;
            }

            // Locate the earliest point where the pattern stops fitting.
            let (mut lo, mut hi) = (0.0, h);
            let (mut xh, mut sh) = (x1, s1);
            for _ in 0..200 {
                if self.violation(&xh, &sh) <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let xm = rk4(&self.net, &self.x, self.cond, mid);
                let sm = self.net.solve(&xm, self.cond);
                if self.violation(&xm, &sm) > 0.0 {
                    hi = mid;
                    xh = xm;
                    sh = sm;
                } else {
                    lo = mid;
                }
            }
            acc.add(hi, self.mode, self.params.vin, &self.x, &s0, &xh, &sh);
            self.x = xh;
            tau += hi;
            let t = seg_start + tau;

            if xh[0] <= 0.0 {
                return Err(Error::Dcm { t, inductor: "L1" });
            }
            if xh[1] <= 0.0 {
                return Err(Error::Dcm { t, inductor: "L2" });
            }
            events_here += 1;
            if events_here > 64 {
                return Err(Error::Chattering { t });
            }

            let before = self.cond.diodes;
            let drive = self.net.diode_drive(&sh);
            let hint: [bool; DIODES] = std::array::from_fn(|k| {
                if before[k] {
                    drive[k] >= 0.0
                } else {
                    drive[k] > 0.0
                }
            });
            self.resolve(t, self.cond.switch_on, hint)?;
            let after = self.cond.diodes;
            if self.mode == Mode::One && before[D5] && !after[D5] {
                self.transition(t, Mode::Two, EventCause::D5CurrentZero);
            }
            if self.mode == Mode::Three && before[D6] && !after[D6] {
                self.transition(t, Mode::Four, EventCause::D6CurrentZero);
            }
            s0 = self.net.solve(&self.x, self.cond);
            acc.peaks(&s0);
            self.record(t);
        }
        Ok(())
    }
}
