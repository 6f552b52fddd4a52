//! Closed-form continuous-conduction steady state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::check_duty;

/// Ideal CCM voltage gain `V_o / V_in = (2 + D) / (1 - D)^2`.
pub fn gain_ccm(duty: f64) -> Result<f64> {
    check_duty(duty)?;
    Ok((2.0 + duty) / ((1.0 - duty) * (1.0 - duty)))
}

/// Ideal steady-state averages at one duty ratio.
///
/// Diode stresses are reverse-blocking magnitudes (cathode positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub vin: f64,
    pub duty: f64,
    pub gain: f64,
    pub v_o: f64,
    pub i_o: f64,
    pub v_c: [f64; 6],
    pub i_l: [f64; 3],
    pub v_switch: f64,
    pub v_diode: [f64; 6],
    pub i_diode: [f64; 6],
    /// Switch current while it conducts, `I_L1 + I_L2`.
    pub i_switch_on: f64,
}

pub fn steady_state_point(vin: f64, duty: f64, i_o: f64) -> Result<OperatingPoint> {
    if !(vin.is_finite() && vin > 0.0) {
        return Err(Error::InvalidParameter {
            name: "vin",
            value: vin,
            constraint: "must be finite and > 0",
        });
    }
    if !(i_o.is_finite() && i_o >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "i_o",
            value: i_o,
            constraint: "must be finite and >= 0",
        });
    }
    let m = gain_ccm(duty)?;
    let d = duty;
    let k = 1.0 - d;
    let v_o = m * vin;

    let v1 = vin / k;
    let v_stack = vin / (k * k);
    let v_mid = vin * d / (k * k);
    let v_c = [v1, v_mid, v_stack, v_stack, v_stack, v_mid];

    let i_l1 = i_o * m;
    let i_l2 = i_o * m * k;
    let i_l3 = i_o * (3.0 + d) / d;

    let vs = v_o / (2.0 + d);
    let v_diode = [v_o * k / (2.0 + d), v_o * d / (2.0 + d), vs, vs, vs, vs];
    let i_diode = [i_o * m * k, i_o * m * d, 3.0 * i_o, i_o, i_o, i_o];

    Ok(OperatingPoint {
        vin,
        duty,
        gain: m,
        v_o,
        i_o,
        v_c,
        i_l: [i_l1, i_l2, i_l3],
        v_switch: vs,
        v_diode,
        i_diode,
        i_switch_on: i_l1 + i_l2,
    })
}

/// Residuals of the identities a consistent operating point obeys:
/// `V_o - (V_C3 + V_C5 + V_C6)`, `V_Q (2 + D) - V_o` and `M V_in - V_o`.
pub fn verify_operating_point_identities(op: &OperatingPoint) -> [f64; 3] {
    let v = &op.v_c;
    [
        op.v_o - (v[2] + v[4] + v[5]),
        op.v_switch * (2.0 + op.duty) - op.v_o,
        op.gain * op.vin - op.v_o,
    ]
}

/// Period-average balance residuals over a window of whole periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    /// Mean inductor voltages (volt-second balance), V.
    pub inductor_voltage: [f64; 3],
    /// Mean capacitor currents (charge balance), A.
    pub capacitor_current: [f64; 6],
    pub input_power: f64,
    pub output_power: f64,
    /// `(P_in - P_out) / P_in`.
    pub power_mismatch: f64,
}
