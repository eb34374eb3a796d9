use crate::phase::{wrap_unit, PhaseState};
use std::io::{self, Write};

/// One dense-output sample. `state` holds the continuous lift
/// `[θ1, θ2, I1, I2]` (angles not wrapped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSample {
    pub t: f64,
    pub state: [f64; 4],
    pub energy: f64,
    pub abs_i2: f64,
    /// Supremum-norm distance from `I` to the channel segment, NaN when the
    /// record carries no channel.
    pub dist_channel: f64,
}

impl OrbitSample {
    pub fn phase_state(&self) -> PhaseState {
        PhaseState::from_lift(&self.state)
    }

    pub fn action(&self) -> [f64; 2] {
        [self.state[2], self.state[3]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Reached the end of the time span.
    Completed,
    /// Left the declared action domain at the last sample.
    DomainExit,
    /// The terminal event fired at the last sample.
    Event,
}

/// A sampled trajectory. Sample times are strictly monotone in the direction
/// of integration.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub samples: Vec<OrbitSample>,
    pub stats: IntegrationStats,
    pub termination: Termination,
    pub channel: Option<[[f64; 2]; 2]>,
}

pub const CSV_HEADER: &str = "t,theta1,theta2,I1,I2,energy,absI2,dist_channel";

impl OrbitRecord {
    pub fn new(channel: Option<[[f64; 2]; 2]>) -> Self {
        Self { samples: Vec::new(), stats: IntegrationStats::default(), termination: Termination::Completed, channel }
    }

    pub fn push(&mut self, t: f64, state: [f64; 4], energy: f64) {
        let i = [state[2], state[3]];
        let dist_channel = match self.channel {
            Some(seg) => segment_distance(i, seg),
            None => f64::NAN,
        };
        self.samples.push(OrbitSample { t, state, energy, abs_i2: state[3].abs(), dist_channel });
    }

    /// Rebuilds the diagnostics after the states or the channel changed.
    pub fn refresh_diagnostics(&mut self) {
        let old = std::mem::take(&mut self.samples);
        for s in old {
            self.push(s.t, s.state, s.energy);
        }
    }

    pub fn first(&self) -> &OrbitSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &OrbitSample {
        self.samples.last().expect("orbit record has at least the initial sample")
    }

    pub fn flagged(&self) -> bool {
        self.termination == Termination::DomainExit
    }

    pub fn max_abs_i2(&self) -> f64 {
        self.samples.iter().map(|s| s.abs_i2).fold(0.0, f64::max)
    }

    pub fn max_dist_channel(&self) -> f64 {
        self.samples.iter().map(|s| s.dist_channel).fold(0.0, f64::max)
    }

    /// `max_t |H(z(t)) − H(z(0))|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.first().energy;
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max)
    }

    /// CSV with wrapped angles and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t,
                wrap_unit(s.state[0]),
                wrap_unit(s.state[1]),
                s.state[2],
                s.state[3],
                s.energy,
                s.abs_i2,
                s.dist_channel
            )?;
        }
        Ok(())
    }
}

/// Supremum-norm distance from `q` to the segment `[p0, p1]`.
pub fn segment_distance(q: [f64; 2], seg: [[f64; 2]; 2]) -> f64 {
    let [p0, p1] = seg;
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let u = [p0[0] - q[0], p0[1] - q[1]];
    let at = |s: f64| (u[0] + s * d[0]).abs().max((u[1] + s * d[1]).abs());
    // the minimum of a convex piecewise-linear function sits at a kink or an end
    let mut cands = vec![0.0, 1.0];
    for c in 0..2 {
        if d[c] != 0.0 {
            cands.push(-u[c] / d[c]);
        }
    }
    for sign in [1.0, -1.0] {
        let den = d[0] - sign * d[1];
        if den != 0.0 {
            cands.push(-(u[0] - sign * u[1]) / den);
        }
    }
    cands.into_iter().filter(|s| (0.0..=1.0).contains(s)).map(at).fold(f64::INFINITY, f64::min)
}
