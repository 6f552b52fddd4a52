//! Newton shooting onto the periodic steady state.
//!
//! The converter has lightly damped low-frequency resonances, so plain
//! time stepping from the analytic averages takes thousands of periods to
//! settle. Solving `Phi(x) = x` for the one-period map `Phi` removes that
//! transient in a handful of Newton iterations.

use nalgebra::{SMatrix, SVector};

use super::{warm_start, SimConfig, Simulator};
use crate::error::Result;
use crate::model::{ConverterParams, Mode, State};

const MAX_ITER: usize = 20;
const TOL: f64 = 1e-11;
const RELAX_PERIODS: usize = 50;

fn one_period(params: &ConverterParams, config: &SimConfig, x: &[f64; 9]) -> Result<[f64; 9]> {
    let mut sim = Simulator::new(params, config, State::from_vector(x, Mode::One, 0.0), false)?;
    sim.run_period(params.duty)?;
    Ok(sim.state().vector())
}

/// Per-component scale: currents against the largest current, voltages
/// against the largest voltage.
fn scales(x: &[f64; 9]) -> [f64; 9] {
    let i = x[..3].iter().fold(1e-3f64, |m, v| m.max(v.abs()));
    let v = x[3..].iter().fold(1e-3f64, |m, v| m.max(v.abs()));
    std::array::from_fn(|k| if k < 3 { i } else { v })
}

fn residual_norm(r: &[f64; 9], scale: &[f64; 9]) -> f64 {
    r.iter()
        .zip(scale)
        .fold(0.0f64, |m, (a, s)| m.max(a.abs() / s))
}

/// Returns the refined period-start state and its remaining scaled mismatch
/// `max |Phi(x) - x| / scale`. The best iterate is returned even if the
/// tolerance is not met.
pub fn periodic_orbit(
    params: &ConverterParams,
    config: &SimConfig,
    x0: &[f64; 9],
) -> Result<([f64; 9], f64)> {
    let mut x = *x0;
    let mut fx = one_period(params, config, &x)?;
    let scale = scales(&x);
    let mut r: [f64; 9] = std::array::from_fn(|i| fx[i] - x[i]);
    let mut norm = residual_norm(&r, &scale);

    for _ in 0..MAX_ITER {
        if norm < TOL {
            break;
        }
        let mut jac = SMatrix::<f64, 9, 9>::zeros();
        for j in 0..9 {
            let h = 1e-6 * scale[j];
            let mut xp = x;
            xp[j] += h;
            let fp = one_period(params, config, &xp)?;
            for i in 0..9 {
                jac[(i, j)] = (fp[i] - fx[i]) / h;
            }
        }
        jac -= SMatrix::<f64, 9, 9>::identity();
        let rhs = -SVector::<f64, 9>::from_column_slice(&r);
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };

        // Damped update: halve until the mismatch shrinks.
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let xn: [f64; 9] = std::array::from_fn(|i| x[i] + lambda * step[i]);
            if let Ok(fxn) = one_period(params, config, &xn) {
                let rn: [f64; 9] = std::array::from_fn(|i| fxn[i] - xn[i]);
                let nn = residual_norm(&rn, &scale);
                if nn < norm {
                    x = xn;
                    fx = fxn;
                    r = rn;
                    norm = nn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            // Far from the orbit the map is too kinked for Newton; relax by
            // plain time stepping and try again.
            for _ in 0..RELAX_PERIODS {
                x = one_period(params, config, &x)?;
            }
            fx = one_period(params, config, &x)?;
            r = std::array::from_fn(|i| fx[i] - x[i]);
            norm = residual_norm(&r, &scale);
        }
    }
    Ok((x, norm))
}

/// Starting point for shooting: capacitor voltages from the analytic
/// averages, inductor currents at their switch-on valleys, and L3 carrying
/// the load current on average (what charge balance on C5 and C6 requires).
pub fn orbit_guess(params: &ConverterParams) -> Result<[f64; 9]> {
    let s = warm_start(params)?;
    let d = params.duty;
    let t_on = d * params.period();
    let i_o = s.v_o() / params.r_load;
    let v1 = params.vin / (1.0 - d);
    let mut x = s.vector();
    x[0] -= params.vin * t_on / (2.0 * params.l1);
    x[1] -= v1 * t_on / (2.0 * params.l2);
    x[2] = i_o - v1 * t_on / (2.0 * params.l3);
    Ok(x)
}
