//! Inverse design: duty ratio from a target gain, then critical inductance
//! and minimum capacitance for a ripple budget.

use serde::Serialize;

use crate::analysis::gain_ccm;
use crate::error::{Error, Result};
use crate::model::ConverterParams;

/// Duty ratio giving `V_o / V_in = vo / vin`.
///
/// Solves `M D^2 - (2M + 1) D + (M - 2) = 0` for the root in (0, 1).
pub fn solve_duty(vin: f64, vo: f64) -> Result<f64> {
    for (name, v) in [("vin", vin), ("vo", vo)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                constraint: "must be finite and > 0",
            });
        }
    }
    let m = vo / vin;
    if m < 2.0 {
        return Err(Error::GainUnreachable { gain: m });
    }
    if m == 2.0 {
        return Err(Error::GainAtBoundary { gain: m });
    }
    // Smaller root, written to avoid cancellation: D = 2(M - 2) / ((2M + 1) + sqrt(12M + 1)).
    Ok(2.0 * (m - 2.0) / ((2.0 * m + 1.0) + (12.0 * m + 1.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignSpec {
    pub vin: f64,
    pub vo: f64,
    pub po: f64,
    pub fs: f64,
    /// Allowed peak-to-peak ripple as a fraction of each capacitor's voltage.
    pub ripple: f64,
    /// Factor applied to the critical inductances for the recommended values.
    pub inductor_margin: f64,
}

impl DesignSpec {
    pub fn new(vin: f64, vo: f64, po: f64, fs: f64) -> Self {
        DesignSpec {
            vin,
            vo,
            po,
            fs,
            ripple: 0.1,
            inductor_margin: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("vin", self.vin),
            ("vo", self.vo),
            ("po", self.po),
            ("fs", self.fs),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be finite and > 0",
                });
            }
        }
        if !(self.ripple.is_finite() && self.ripple > 0.0 && self.ripple < 1.0) {
            return Err(Error::InvalidParameter {
                name: "ripple",
                value: self.ripple,
                constraint: "must lie in (0, 1)",
            });
        }
        if !(self.inductor_margin.is_finite() && self.inductor_margin >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "inductor_margin",
                value: self.inductor_margin,
                constraint: "must be finite and >= 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignResult {
    pub spec: DesignSpec,
    pub duty: f64,
    pub gain: f64,
    pub i_o: f64,
    /// Critical inductances for continuous conduction, H.
    pub l_min: [f64; 3],
    /// `l_min` scaled by the inductor margin, H.
    pub l_recommended: [f64; 3],
    /// Minimum capacitances for the ripple budget, F.
    pub c_min: [f64; 6],
    /// Ripple budget per capacitor, V.
    pub dv_c: [f64; 6],
}

pub fn size_components(spec: &DesignSpec) -> Result<DesignResult> {
    spec.validate()?;
    let d = solve_duty(spec.vin, spec.vo)?;
    let m = gain_ccm(d)?;
    let k = 1.0 - d;
    let i_o = spec.po / spec.vo;
    let (vin, po, fs) = (spec.vin, spec.po, spec.fs);

    let l1 = vin * vin * d / (2.0 * po * fs);
    let l2 = l1 / (k * k);
    let l3 = vin * vin * d * d * m / (2.0 * k * (3.0 + d) * po * fs);
    let l_min = [l1, l2, l3];

    let v_stack = vin / (k * k);
    let v_mid = vin * d / (k * k);
    let v_nominal = [vin / k, v_mid, v_stack, v_stack, v_stack, v_mid];
    let dv_c = v_nominal.map(|v| spec.ripple * v);
    let charge = [
        i_o * m * d * k,
        i_o * m * k * k,
        i_o * d,
        i_o * d,
        i_o * d,
        i_o * k,
    ];
    let c_min = std::array::from_fn(|j| charge[j] / (dv_c[j] * fs));

    Ok(DesignResult {
        spec: *spec,
        duty: d,
        gain: m,
        i_o,
        l_min,
        l_recommended: l_min.map(|l| l * spec.inductor_margin),
        c_min,
        dv_c,
    })
}

/// Chosen part values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentChoice {
    pub l: [f64; 3],
    pub c: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignWarning {
    pub component: String,
    pub message: String,
}

/// A chosen value closer than this to its minimum earns a warning.
pub const THIN_MARGIN: f64 = 1.10;

const L_NAMES: [&str; 3] = ["l1", "l2", "l3"];
const C_NAMES: [&str; 6] = ["c1", "c2", "c3", "c4", "c5", "c6"];

/// Builds a parameter set from a design and chosen parts. Values below
/// their minimum are rejected; values within 10% of it are accepted with a
/// warning, as is a load that disagrees with the design power by more
/// than 10%.
pub fn design_to_params(
    result: &DesignResult,
    choice: &ComponentChoice,
    r_load: f64,
) -> Result<(ConverterParams, Vec<DesignWarning>)> {
    let mut warnings = Vec::new();
    let pairs = L_NAMES
        .iter()
        .zip(choice.l.iter().zip(result.l_min.iter()))
        .chain(C_NAMES.iter().zip(choice.c.iter().zip(result.c_min.iter())));
    for (name, (&chosen, &minimum)) in pairs {
        if !(chosen.is_finite() && chosen > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: chosen,
                constraint: "must be finite and > 0",
            });
        }
        if chosen < minimum {
            return Err(Error::BelowCritical {
                component: name,
                chosen,
                minimum,
            });
        }
        if chosen < THIN_MARGIN * minimum {
            warnings.push(DesignWarning {
                component: name.to_string(),
                message: format!("{chosen:e} is within 10% of its minimum {minimum:e}"),
            });
        }
    }
    let s = &result.spec;
    let params = ConverterParams {
        vin: s.vin,
        l1: choice.l[0],
        l2: choice.l[1],
        l3: choice.l[2],
        c1: choice.c[0],
        c2: choice.c[1],
        c3: choice.c[2],
        c4: choice.c[3],
        c5: choice.c[4],
        c6: choice.c[5],
        r_load,
        fs: s.fs,
        duty: result.duty,
    };
    params.validate()?;
    let implied = s.vo * s.vo / r_load;
    if (implied - s.po).abs() > 0.1 * s.po {
        warnings.push(DesignWarning {
            component: "r_load".to_string(),
            message: format!(
                "{r_load} ohm at {} V draws {implied:.1} W, not the {} W the parts were sized for",
                s.vo, s.po
            ),
        });
    }
    Ok((params, warnings))
}
