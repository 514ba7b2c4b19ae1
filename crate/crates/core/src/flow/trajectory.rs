use crate::geometry::{ChartId, CotangentState};

pub type M4 = [[f64; 4]; 4];

/// A chart change recorded between `states[index - 1]` and `states[index]`,
/// which share the same time.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartSwitch {
    pub index: usize,
    pub jacobian: M4,
}

/// Sampled solution of the characteristic flow. Times are monotone in the
/// direction of integration; a chart switch duplicates the switching time.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<CotangentState>,
    pub energies: Vec<f64>,
    pub(crate) rates: Vec<[f64; 4]>,
    pub(crate) accels: Vec<[f64; 4]>,
    pub switches: Vec<ChartSwitch>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, s: CotangentState, h: f64, rate: [f64; 4], accel: [f64; 4]) {
        self.times.push(t);
        self.states.push(s);
        self.energies.push(h);
        self.rates.push(rate);
        self.accels.push(accel);
    }

    /// Removes the last sample (and a switch recorded at it).
    pub(crate) fn truncate_last(&mut self) {
        if self.len() <= 2 {
            return;
        }
        self.times.pop();
        self.states.pop();
        self.energies.pop();
        self.rates.pop();
        self.accels.pop();
        let len = self.len();
        self.switches.retain(|s| s.index < len);
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    pub fn last_state(&self) -> &CotangentState {
        self.states.last().expect("empty trajectory")
    }

    fn direction(&self) -> f64 {
        if self.last_time() < self.first_time() {
            -1.0
        } else {
            1.0
        }
    }

    /// Index `j` such that `t` lies in the segment `(j - 1, j]`, measured in
    /// the direction of integration.
    pub(crate) fn segment(&self, t: f64) -> usize {
        let d = self.direction();
        let j = self.times.partition_point(|&x| d * x < d * t);
        j.clamp(1, self.len() - 1)
    }

    pub fn chart_at(&self, t: f64) -> ChartId {
        if self.len() < 2 {
            return self.states[0].chart;
        }
        self.states[self.segment(t)].chart
    }

    /// Quintic Hermite interpolation of the packed state at time `t`.
    pub fn state_at(&self, t: f64) -> CotangentState {
        let n = self.dim;
        if self.len() < 2 {
            return self.states[0];
        }
        let j = self.segment(t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let h = t1 - t0;
        if h == 0.0 {
            return self.states[j];
        }
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let w = [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            h * (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5),
            h * h * 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
            h * (-4.0 * s3 + 7.0 * s4 - 3.0 * s5),
            h * h * 0.5 * (s3 - 2.0 * s4 + s5),
        ];
        let mut y0 = [0.0; 4];
        let mut y1 = [0.0; 4];
        self.states[j - 1].pack(n, &mut y0);
        self.states[j].pack(n, &mut y1);
        let mut y = [0.0; 4];
        for i in 0..2 * n {
            y[i] = w[0] * y0[i]
                + w[1] * self.rates[j - 1][i]
                + w[2] * self.accels[j - 1][i]
                + w[3] * y1[i]
                + w[4] * self.rates[j][i]
                + w[5] * self.accels[j][i];
        }
        CotangentState::unpack(n, &y, self.states[j].chart)
    }

    /// Chart switches crossed when moving from `from` to `to` along the
    /// trajectory, in order of traversal.
    pub(crate) fn switches_between(&self, from: f64, to: f64) -> Vec<&ChartSwitch> {
        let d = self.direction();
        let (lo, hi) = if d * from <= d * to { (from, to) } else { (to, from) };
        let mut v: Vec<&ChartSwitch> = self
            .switches
            .iter()
            .filter(|s| {
                let ts = self.times[s.index];
                d * ts > d * lo && d * ts < d * hi
            })
            .collect();
        if d * from > d * to {
            v.reverse();
        }
        v
    }
}
