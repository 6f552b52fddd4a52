use serde::Serialize;

use crate::circuit::{Conduction, NetworkSolution, DIODES};
use crate::model::{ConverterParams, Mode};

/// One recorded instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub mode: Mode,
    pub i_l: [f64; 3],
    pub v_c: [f64; 6],
    pub v_o: f64,
    pub i_o: f64,
    pub i_d: [f64; DIODES],
    pub i_q: f64,
    /// Switch drain-source voltage.
    pub v_q: f64,
    /// Diode anode-cathode voltages (negative while blocking).
    pub v_d: [f64; DIODES],
    /// Bit k set while D(k+1) conducts.
    pub conducting: u8,
}

impl Sample {
    pub(crate) fn new(
        t: f64,
        mode: Mode,
        x: &[f64; 9],
        s: &NetworkSolution,
        cond: Conduction,
    ) -> Self {
        let mut i_l = [0.0; 3];
        let mut v_c = [0.0; 6];
        i_l.copy_from_slice(&x[..3]);
        v_c.copy_from_slice(&x[3..]);
        Sample {
            t,
            mode,
            i_l,
            v_c,
            v_o: s.v_o,
            i_o: s.i_o,
            i_d: s.i_diode,
            i_q: s.i_switch,
            v_q: s.v_switch,
            v_d: s.v_diode,
            conducting: cond.diode_bits(),
        }
    }
}

/// Time-ordered samples plus the index of the sample at every period boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub params: ConverterParams,
    pub samples: Vec<Sample>,
    /// `boundaries[k]` indexes the sample at the start of period k; the last
    /// entry marks the end of the final period.
    pub boundaries: Vec<usize>,
}

impl Trace {
    pub fn new(params: ConverterParams) -> Self {
        Trace {
            params,
            samples: Vec::new(),
            boundaries: Vec::new(),
        }
    }

    /// Appends a sample, replacing the last one if it has the same time stamp.
    pub fn push(&mut self, sample: Sample) {
        match self.samples.last_mut() {
            Some(last) if last.t == sample.t => *last = sample,
            _ => self.samples.push(sample),
        }
    }

    pub(crate) fn mark_boundary(&mut self) {
        let Some(idx) = self.samples.len().checked_sub(1) else {
            return;
        };
        if self.boundaries.last() != Some(&idx) {
            self.boundaries.push(idx);
        }
    }

    /// Number of complete periods covered.
    pub fn periods(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    /// Samples of the last `n` periods, both boundary samples included.
    pub fn window(&self, n: usize) -> Option<&[Sample]> {
        let p = self.periods();
        if n == 0 || n > p {
            return None;
        }
        let lo = self.boundaries[p - n];
        let hi = self.boundaries[p];
        Some(&self.samples[lo..=hi])
    }
}
