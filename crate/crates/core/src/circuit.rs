//! Node-level network of the converter.
//!
//! Inductors act as current sources and capacitors as voltage sources, so the
//! remaining resistive network has two unknown potentials: `A` (L1 output,
//! anodes of D1 and D2) and `N` (switch node). Every other potential follows
//! from the capacitor voltages:
//!
//! ```text
//! B = v1            C1 top, L2 input, D1 cathode
//! X = v3            C3 top, D3 cathode, L3 input, C6 bottom
//! P = N + v2        C2 top, L3 output, D4 anode, C4 bottom
//! Z = v3 + v6       C6 top, D4 cathode, D5 anode, C5 bottom
//! W = N + v2 + v4   C4 top, D5 cathode, D6 anode
//! T = v3 + v6 + v5  output, D6 cathode
//! ```
//!
//! Semiconductors are piecewise-linear: `1/r_on` when conducting, a 1 nS leak
//! when blocking. The small on-resistance is what lets capacitors that a
//! diode connects in parallel share charge without an impulse.
//!
//! When the switch and D2..D6 all block, L2 and L3 form a cutset through the
//! floating switch node and must carry equal and opposite currents. Once
//! `|i_L2 + i_L3|` is below a small tolerance, that node is placed at the
//! potential that keeps the sum constant, instead of letting the leak
//! conductance set it (which would be an extremely stiff sub-problem).

use crate::model::ConverterParams;

pub const DIODES: usize = 6;

const G_OFF: f64 = 1e-9;

/// Which devices conduct. Diode `k` is D(k+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conduction {
    pub switch_on: bool,
    pub diodes: [bool; DIODES],
}

impl Conduction {
    /// Bit `k` set when D(k+1) conducts.
    pub fn diode_bits(&self) -> u8 {
        self.diodes
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &on)| acc | ((on as u8) << k))
    }
}

/// Node potentials and branch quantities for one state and conduction pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSolution {
    pub node_a: f64,
    pub node_n: f64,
    /// Anode minus cathode.
    pub v_diode: [f64; DIODES],
    pub i_diode: [f64; DIODES],
    /// Drain-source voltage.
    pub v_switch: f64,
    pub i_switch: f64,
    pub v_l: [f64; 3],
    pub i_c: [f64; 6],
    pub v_o: f64,
    pub i_o: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Network {
    vin: f64,
    l: [f64; 3],
    c: [f64; 6],
    r_load: f64,
    g_on: f64,
    cutset_tol: f64,
}

impl Network {
    /// `cutset_tol` is the largest `|i_L2 + i_L3|`, in amperes, treated as
    /// zero when the switch node floats.
    pub fn new(params: &ConverterParams, r_on: f64, cutset_tol: f64) -> Self {
        Network {
            vin: params.vin,
            l: params.inductances(),
            c: params.capacitances(),
            r_load: params.r_load,
            g_on: 1.0 / r_on,
            cutset_tol,
        }
    }

    pub fn g_on(&self) -> f64 {
        self.g_on
    }

    pub fn solve(&self, x: &[f64; 9], cond: Conduction) -> NetworkSolution {
        let [i1, i2, i3, v1, v2, v3, v4, v5, v6] = *x;
        let g = |on: bool| if on { self.g_on } else { G_OFF };
        let gd = cond.diodes.map(g);
        let gq = g(cond.switch_on);

        // Diode k voltage = (A or 0) + n_k * N + e_k.
        let e = [
            -v1,
            0.0,
            -v3,
            v2 - v3 - v6,
            v3 + v6 - v2 - v4,
            v2 + v4 - v3 - v6 - v5,
        ];

        // KCL at A, and at the supernode {N, P, W} tied together by C2 and C4.
        let a11 = gd[0] + gd[1];
        let a12 = -gd[1];
        let b1 = i1 + gd[0] * v1;
        let a21 = gd[1];
        let a22 = -(gd[1] + gd[2] + gd[3] + gd[4] + gd[5] + gq);
        let b2 = -i2 - i3 - gd[4] * e[4] + gd[2] * e[2] + gd[3] * e[3] + gd[5] * e[5];
        let floating = !cond.switch_on && !cond.diodes[1..].iter().any(|&d| d);
        let (a, n) = if floating && (i2 + i3).abs() <= self.cutset_tol {
            let (y2, y3) = (1.0 / self.l[1], 1.0 / self.l[2]);
            let n = (v1 * y2 + (v3 - v2) * y3) / (y2 + y3);
            ((b1 - a12 * n) / a11, n)
        } else {
            let det = a11 * a22 - a12 * a21;
            ((b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det)
        };

        let v_diode = [a + e[0], a - n, n + e[2], n + e[3], -n + e[4], n + e[5]];
        let mut i_diode = [0.0; DIODES];
        for k in 0..DIODES {
            i_diode[k] = gd[k] * v_diode[k];
        }
        let i_switch = gq * n;

        let v_o = v3 + v6 + v5;
        let i_o = v_o / self.r_load;
        let ic1 = i_diode[0] - i2;
        let ic4 = i_diode[4] - i_diode[5];
        let ic5 = i_diode[5] - i_o;
        let ic6 = i_diode[3] + ic5 - i_diode[4];
        let ic2 = i3 + ic4 - i_diode[3];
        let ic3 = i_diode[2] + ic6 - i3;

        NetworkSolution {
            node_a: a,
            node_n: n,
            v_diode,
            i_diode,
            v_switch: n,
            i_switch,
            v_l: [self.vin - a, v1 - n, v3 - n - v2],
            i_c: [ic1, ic2, ic3, ic4, ic5, ic6],
            v_o,
            i_o,
        }
    }

    pub fn derivative_of(&self, s: &NetworkSolution) -> [f64; 9] {
        let mut dx = [0.0; 9];
        for k in 0..3 {
            dx[k] = s.v_l[k] / self.l[k];
        }
        for k in 0..6 {
            dx[3 + k] = s.i_c[k] / self.c[k];
        }
        dx
    }

    pub fn derivative(&self, x: &[f64; 9], cond: Conduction) -> [f64; 9] {
        self.derivative_of(&self.solve(x, cond))
    }

    /// Signed distance of each diode from switching, in amperes: the actual
    /// current when conducting, the would-be on-state current when blocking.
    /// A conducting diode wants to turn off when this is negative, a blocking
    /// one wants to turn on when it is positive.
    pub fn diode_drive(&self, s: &NetworkSolution) -> [f64; DIODES] {
        s.v_diode.map(|v| v * self.g_on)
    }

    /// Finds the diode pattern that is self-consistent for the given state
    /// and switch position, starting from `hint`. Returns `None` if the
    /// search does not settle.
    pub fn resolve(
        &self,
        x: &[f64; 9],
        switch_on: bool,
        hint: [bool; DIODES],
    ) -> Option<Conduction> {
        self.resolve_with(x, switch_on, hint, [None; DIODES])
    }

    /// Like [`Network::resolve`], with some diodes held in a given state.
    pub fn resolve_with(
        &self,
        x: &[f64; 9],
        switch_on: bool,
        hint: [bool; DIODES],
        fixed: [Option<bool>; DIODES],
    ) -> Option<Conduction> {
        self.search(x, switch_on, hint, fixed, 0.0).or_else(|| {
            // Near the floating-node cutset two patterns can each miss by a
            // hair; accept a pattern that is off by no more than the cutset
            // tolerance.
            self.search(x, switch_on, hint, fixed, self.cutset_tol)
        })
    }

    fn search(
        &self,
        x: &[f64; 9],
        switch_on: bool,
        hint: [bool; DIODES],
        fixed: [Option<bool>; DIODES],
        slack: f64,
    ) -> Option<Conduction> {
        let slack_v = slack / self.g_on;
        let start: [bool; DIODES] = std::array::from_fn(|k| fixed[k].unwrap_or(hint[k]));
        let mut cond = Conduction {
            switch_on,
            diodes: start,
        };
        // Flip the worst offender first; fall back to flipping all offenders.
        for round in 0..2 {
            for _ in 0..64 {
                let s = self.solve(x, cond);
                let mut worst: Option<usize> = None;
                let mut worst_v = 0.0;
                let mut offenders = [false; DIODES];
                for k in 0..DIODES {
                    if fixed[k].is_some() {
                        continue;
                    }
                    let v = if cond.diodes[k] {
                        -s.v_diode[k]
                    } else {
                        s.v_diode[k]
                    };
                    if v > slack_v {
                        offenders[k] = true;
                        if v > worst_v {
                            worst_v = v;
                            worst = Some(k);
                        }
                    }
                }
                match worst {
                    None => return Some(cond),
                    Some(k) if round == 0 => cond.diodes[k] = !cond.diodes[k],
                    Some(_) => {
                        for k in 0..DIODES {
                            if offenders[k] {
                                cond.diodes[k] = !cond.diodes[k];
                            }
                        }
                    }
                }
            }
            cond.diodes = start;
        }
        None
    }
}
