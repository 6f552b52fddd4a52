//! Closed-form gain and stress models of competing step-up topologies.
//!
//! Stresses are normalised to the output voltage and reported as
//! magnitudes.

use serde::Serialize;

use crate::error::{Error, Result};

type Curve = fn(f64) -> f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentCount {
    pub switches: u32,
    pub diodes: u32,
    pub capacitors: u32,
    pub inductors: u32,
}

#[derive(Clone, Copy)]
pub struct TopologyModel {
    pub id: &'static str,
    pub description: &'static str,
    pub counts: ComponentCount,
    pub gain: Curve,
    pub switch_stress: &'static [Curve],
    pub diode_stress: &'static [Curve],
}

impl std::fmt::Debug for TopologyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TopologyModel")
            .field("id", &self.id)
            .finish_non_exhaustive()
    }
}

/// Normalised stress above this is flagged as off the plotting scale.
pub const OFF_SCALE: f64 = 3.0;

impl TopologyModel {
    pub fn max_switch_stress(&self, d: f64) -> f64 {
        self.switch_stress
            .iter()
            .map(|f| f(d).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_diode_stress(&self, d: f64) -> f64 {
        self.diode_stress
            .iter()
            .map(|f| f(d).abs())
            .fold(0.0, f64::max)
    }

    pub fn metric(&self, metric: Metric, d: f64) -> f64 {
        match metric {
            Metric::Gain => (self.gain)(d),
            Metric::SwitchStress => self.max_switch_stress(d),
            Metric::DiodeStress => self.max_diode_stress(d),
        }
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

const HGVM: TopologyModel = TopologyModel {
    id: "hgvm-qbc",
    description: "quadratic boost with voltage-multiplier cell (this converter)",
    counts: ComponentCount {
        switches: 1,
        diodes: 6,
        capacitors: 6,
        inductors: 3,
    },
    gain: |d| (2.0 + d) / sq(1.0 - d),
    switch_stress: &[|d| 1.0 / (2.0 + d)],
    diode_stress: &[
        |d| (1.0 - d) / (2.0 + d),
        |d| d / (2.0 + d),
        |d| 1.0 / (2.0 + d),
    ],
};

const QBC: TopologyModel = TopologyModel {
    id: "qbc",
    description: "conventional quadratic boost",
    counts: ComponentCount {
        switches: 1,
        diodes: 3,
        capacitors: 2,
        inductors: 2,
    },
    gain: |d| 1.0 / sq(1.0 - d),
    switch_stress: &[|d| 1.0 / (1.0 - d)],
    diode_stress: &[|d| 1.0 / (1.0 - d), |_| 1.0],
};

const LIN2024: TopologyModel = TopologyModel {
    id: "lin2024",
    description: "high-gain boost for renewable energy systems (Lin et al., 2024)",
    counts: ComponentCount {
        switches: 2,
        diodes: 3,
        capacitors: 3,
        inductors: 2,
    },
    gain: |d| (3.0 - 2.0 * d) / sq(1.0 - d),
    switch_stress: &[
        |d| (1.0 - d).powi(3) / (3.0 - 2.0 * d),
        |d| sq(1.0 - d) / (3.0 - 2.0 * d),
        |d| (1.0 - d) / (3.0 - 2.0 * d),
    ],
    diode_stress: &[
        |d| (1.0 - d) / (3.0 - 2.0 * d),
        |d| (3.0 * d - 8.0) / (3.0 - 2.0 * d),
        |d| {
            (-6.0 * d.powi(3) + 19.0 * d * d - 18.0 * d + 9.0)
                / (2.0 * d.powi(3) - 5.0 * d * d + 3.0 * d)
        },
    ],
};

const RAO2023: TopologyModel = TopologyModel {
    id: "rao2023",
    description:
        "voltage-multiplier coupled cascaded boost (Vemparala Rao and Sundaramoorthy, 2023)",
    counts: ComponentCount {
        switches: 2,
        diodes: 4,
        capacitors: 3,
        inductors: 2,
    },
    gain: |d| 2.0 / sq(1.0 - d),
    switch_stress: &[|_| 0.5, |d| (1.0 - d) / 2.0],
    diode_stress: &[|d| d / 2.0],
};

const RAJESH2023: TopologyModel = TopologyModel {
    id: "rajesh2023",
    description: "non-isolated high conversion ratio converter (Rajesh et al., 2023)",
    counts: ComponentCount {
        switches: 1,
        diodes: 5,
        capacitors: 6,
        inductors: 4,
    },
    gain: |d| (1.0 + 2.0 * d - 2.0 * d * d) / sq(1.0 - d),
    switch_stress: &[|d| 1.0 / (1.0 + 2.0 * d - 2.0 * d * d)],
    diode_stress: &[
        |d| (1.0 - d) / (1.0 + 2.0 * d - 2.0 * d * d),
        |d| d / (1.0 + 2.0 * d - 2.0 * d * d),
        |d| d * d / (1.0 + 2.0 * d - 2.0 * d * d),
    ],
};

const RAJABI2022: TopologyModel = TopologyModel {
    id: "rajabi2022",
    description: "voltage-lift high step-up converter (Rajabi et al., 2022)",
    counts: ComponentCount {
        switches: 2,
        diodes: 3,
        capacitors: 3,
        inductors: 2,
    },
    gain: |d| (1.0 + d) / (d * (1.0 - d)),
    switch_stress: &[|d| d / (1.0 + d), |d| 1.0 / (1.0 + d)],
    diode_stress: &[|d| d / (1.0 + d), |_| 1.0],
};

const REDDY2024: TopologyModel = TopologyModel {
    id: "reddy2024",
    description: "high-voltage lift converter with reduced switch stress (Reddy et al., 2024)",
    counts: ComponentCount {
        switches: 2,
        diodes: 4,
        capacitors: 4,
        inductors: 2,
    },
    gain: |d| 4.0 / (1.0 - d),
    switch_stress: &[|_| 0.25],
    diode_stress: &[|_| 0.5, |_| 0.25],
};

static CATALOG: [TopologyModel; 7] = [
    HGVM, QBC, LIN2024, RAO2023, RAJESH2023, RAJABI2022, REDDY2024,
];

pub fn catalog() -> &'static [TopologyModel] {
    &CATALOG
}

pub fn topology(id: &str) -> Option<&'static TopologyModel> {
    CATALOG.iter().find(|t| t.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Gain,
    SwitchStress,
    DiodeStress,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyCurves {
    pub id: &'static str,
    pub counts: ComponentCount,
    pub gain: Vec<f64>,
    pub switch_stress: Vec<f64>,
    pub diode_stress: Vec<f64>,
    /// Diode stress beyond [`OFF_SCALE`].
    pub diode_off_scale: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub duty: Vec<f64>,
    pub topologies: Vec<TopologyCurves>,
}

/// Evaluates every catalogued topology on `d_min, d_min + step, ..., d_max`.
pub fn sweep(d_min: f64, d_max: f64, step: f64) -> Result<ComparisonTable> {
    if !(d_min > 0.0 && d_max < 1.0 && d_min <= d_max) {
        return Err(Error::InvalidParameter {
            name: "d_min",
            value: d_min,
            constraint: "need 0 < d_min <= d_max < 1",
        });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: step,
            constraint: "must be finite and > 0",
        });
    }
    let n = ((d_max - d_min) / step + 1e-9).floor() as usize + 1;
    let duty: Vec<f64> = (0..n).map(|i| d_min + i as f64 * step).collect();
    let topologies = CATALOG
        .iter()
        .map(|t| {
            let diode_stress: Vec<f64> = duty.iter().map(|&d| t.max_diode_stress(d)).collect();
            TopologyCurves {
                id: t.id,
                counts: t.counts,
                gain: duty.iter().map(|&d| (t.gain)(d)).collect(),
                switch_stress: duty.iter().map(|&d| t.max_switch_stress(d)).collect(),
                diode_off_scale: diode_stress.iter().map(|&s| s > OFF_SCALE).collect(),
                diode_stress,
            }
        })
        .collect();
    Ok(ComparisonTable { duty, topologies })
}

/// Duty ratios in (0.01, 0.99) where `metric` of `a` and `b` coincide,
/// each refined by bisection.
pub fn crossover(a: &TopologyModel, b: &TopologyModel, metric: Metric) -> Vec<f64> {
    let diff = |d: f64| a.metric(metric, d) - b.metric(metric, d);
    let n = 9800;
    let grid = |i: usize| 0.01 + 0.98 * i as f64 / n as f64;
    let mut roots = Vec::new();
    let mut prev = diff(grid(0));
    if prev == 0.0 {
        roots.push(grid(0));
    }
    for i in 1..=n {
        let d = grid(i);
        let cur = diff(d);
        if cur == 0.0 {
            roots.push(d);
        } else if prev != 0.0 && prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (grid(i - 1), d);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if diff(mid).signum() == prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    roots
}
