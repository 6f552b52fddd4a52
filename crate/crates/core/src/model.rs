//! Parameter set, state vector and operating modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circuit values of one converter instance. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    pub vin: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub r_load: f64,
    pub fs: f64,
    pub duty: f64,
}

impl ConverterParams {
    /// 12 V / 50 kHz prototype values at D = 0.55 with the 200 W-consistent load.
    pub fn nominal() -> Self {
        ConverterParams {
            vin: 12.0,
            l1: 250e-6,
            l2: 90e-6,
            l3: 82e-6,
            c1: 50e-6,
            c2: 80e-6,
            c3: 110e-6,
            c4: 80e-6,
            c5: 80e-6,
            c6: 80e-6,
            r_load: 114.1,
            fs: 50e3,
            duty: 0.55,
        }
    }

    /// Same operating point with the 500 ohm bench load.
    pub fn nominal_r500() -> Self {
        ConverterParams {
            r_load: 500.0,
            ..Self::nominal()
        }
    }

    /// Hardware prototype component list: larger capacitors, 80 uH third inductor, 500 ohm load.
    pub fn prototype() -> Self {
        ConverterParams {
            l3: 80e-6,
            c1: 110e-6,
            c2: 220e-6,
            c3: 220e-6,
            c4: 220e-6,
            c5: 220e-6,
            c6: 220e-6,
            r_load: 500.0,
            ..Self::nominal()
        }
    }

    /// Looks a preset up by its configuration name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "nominal" => Some(Self::nominal()),
            "nominal-r500" => Some(Self::nominal_r500()),
            "prototype" => Some(Self::prototype()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["nominal", "nominal-r500", "prototype"];

    pub fn inductances(&self) -> [f64; 3] {
        [self.l1, self.l2, self.l3]
    }

    pub fn capacitances(&self) -> [f64; 6] {
        [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6]
    }

    pub fn period(&self) -> f64 {
        1.0 / self.fs
    }

    /// Checks every value; the error names the first offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vin", self.vin),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("r_load", self.r_load),
            ("fs", self.fs),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be finite and > 0",
                });
            }
        }
        check_duty(self.duty)
    }
}

pub(crate) fn check_duty(duty: f64) -> Result<()> {
    if duty.is_finite() && duty > 0.0 && duty < 1.0 {
        Ok(())
    } else {
        Err(Error::DutyOutOfRange(duty))
    }
}

/// The four steady-state operating modes of one switching period.
///
/// Modes 1 and 2 share the switch-on interval: mode 1 lasts while D5 still
/// carries the charge-transfer current. Modes 3 and 4 split the switch-off
/// interval the same way around D6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Mode {
    One,
    Two,
    Three,
    Four,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::One, Mode::Two, Mode::Three, Mode::Four];

    pub fn number(self) -> u8 {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
            Mode::Three => 3,
            Mode::Four => 4,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }

    pub fn switch_on(self) -> bool {
        matches!(self, Mode::One | Mode::Two)
    }

    pub fn next(self) -> Mode {
        match self {
            Mode::One => Mode::Two,
            Mode::Two => Mode::Three,
            Mode::Three => Mode::Four,
            Mode::Four => Mode::One,
        }
    }
}

impl From<Mode> for u8 {
    fn from(m: Mode) -> u8 {
        m.number()
    }
}

impl TryFrom<u8> for Mode {
    type Error = String;
    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            4 => Ok(Mode::Four),
            _ => Err(format!("no mode {n}")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Dynamic state: three inductor currents and six capacitor voltages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub i_l: [f64; 3],
    pub v_c: [f64; 6],
    pub mode: Mode,
    pub t: f64,
}

impl State {
    /// All energy storage discharged, switch on at t = 0.
    pub fn zero() -> Self {
        State {
            i_l: [0.0; 3],
            v_c: [0.0; 6],
            mode: Mode::One,
            t: 0.0,
        }
    }

    /// Output voltage: the series stack C3 + C6 + C5.
    pub fn v_o(&self) -> f64 {
        output_voltage(&self.vector())
    }

    pub fn vector(&self) -> [f64; 9] {
        let mut x = [0.0; 9];
        x[..3].copy_from_slice(&self.i_l);
        x[3..].copy_from_slice(&self.v_c);
        x
    }

    pub fn from_vector(x: &[f64; 9], mode: Mode, t: f64) -> Self {
        let mut s = State {
            i_l: [0.0; 3],
            v_c: [0.0; 6],
            mode,
            t,
        };
        s.i_l.copy_from_slice(&x[..3]);
        s.v_c.copy_from_slice(&x[3..]);
        s
    }
}

pub(crate) fn output_voltage(x: &[f64; 9]) -> f64 {
    x[5] + x[8] + x[7]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in ConverterParams::PRESETS {
            ConverterParams::preset(name).unwrap().validate().unwrap();
        }
        assert!(ConverterParams::preset("nope").is_none());
    }

    #[test]
    fn validation_names_field() {
        let p = ConverterParams {
            l2: -1.0,
            ..ConverterParams::nominal()
        };
        match p.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "l2"),
            other => panic!("{other:?}"),
        }
        let p = ConverterParams {
            duty: 1.0,
            ..ConverterParams::nominal()
        };
        assert_eq!(p.validate(), Err(Error::DutyOutOfRange(1.0)));
    }

    #[test]
    fn mode_cycle() {
        let mut m = Mode::One;
        for expect in [Mode::Two, Mode::Three, Mode::Four, Mode::One] {
            m = m.next();
            assert_eq!(m, expect);
        }
        assert_eq!(Mode::try_from(3u8), Ok(Mode::Three));
        assert!(Mode::try_from(0u8).is_err());
    }

    #[test]
    fn output_is_stack_sum() {
        let s = State::from_vector(
            &[0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            Mode::Two,
            0.0,
        );
        assert_eq!(s.v_o(), 3.0 + 5.0 + 6.0);
    }
}
