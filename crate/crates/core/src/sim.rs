//! Mass-action ODE integration with the Dormand–Prince 5(4) pair, keeping
//! states in the closed non-negative orthant.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::lyapunov::{LyapunovError, LyapunovFunction};
use crate::model::{MassAction, ModelError, ReactionNetwork, State};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 10_000_000;
/// Size of the uniform grid used for reports and CSV output.
pub const REPORT_SAMPLES: usize = 512;
const CLAMP_LIMIT: f64 = -1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, partial: Box<Trajectory> },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64, partial: Box<Trajectory> },
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn for_horizon(t_end: f64) -> Self {
        IntegratorOptions {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            initial_step: t_end / 1e4,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub f_values: Option<Vec<f64>>,
    /// `∇f(x)ᵀ ẋ` per sample.
    pub dissipation: Option<Vec<f64>>,
    /// Steps accepted by clamping tiny negative components to zero.
    pub clamp_events: usize,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    /// Linear interpolation; clamps to the end points outside the time range.
    pub fn at(&self, t: f64) -> State {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.states[0].clone();
        }
        if k == self.times.len() {
            return self.last_state().to_vec();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        if t == t0 {
            return self.states[k - 1].clone();
        }
        let w = (t - t0) / (t1 - t0);
        self.states[k - 1]
            .iter()
            .zip(&self.states[k])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    fn interp_scalar(&self, v: &[f64], t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return v[0];
        }
        if k == self.times.len() {
            return v[v.len() - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        v[k - 1] + w * (v[k] - v[k - 1])
    }

    /// Resamples on `n` uniform points over the time range.
    pub fn resample(&self, n: usize) -> Trajectory {
        let t_end = *self.times.last().expect("non-empty trajectory");
        let grid = uniform_grid(t_end - self.times[0], n)
            .into_iter()
            .map(|t| t + self.times[0])
            .collect::<Vec<_>>();
        Trajectory {
            states: grid.iter().map(|&t| self.at(t)).collect(),
            f_values: self
                .f_values
                .as_ref()
                .map(|v| grid.iter().map(|&t| self.interp_scalar(v, t)).collect()),
            dissipation: self
                .dissipation
                .as_ref()
                .map(|v| grid.iter().map(|&t| self.interp_scalar(v, t)).collect()),
            times: grid,
            clamp_events: self.clamp_events,
        }
    }

    /// CSV with header `t,species…[,f,dissipation]`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().cloned());
        if self.f_values.is_some() {
            header.push("f".into());
            header.push("dissipation".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt17(*t)];
            row.extend(self.states[k].iter().map(|v| fmt17(*v)));
            if let (Some(f), Some(d)) = (&self.f_values, &self.dissipation) {
                row.push(fmt17(f[k]));
                row.push(fmt17(d[k]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `n` points `0, t_end/(n-1), …, t_end`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                t_end
            } else {
                t_end * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Integrates `ẋ = Γ R(x)` on `[0, t_end]`.
pub fn integrate(
    net: &ReactionNetwork,
    x0: &[f64],
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    f: Option<&LyapunovFunction>,
) -> Result<Trajectory, SimError> {
    let opts = IntegratorOptions {
        rel_tol,
        abs_tol,
        ..IntegratorOptions::for_horizon(t_end)
    };
    integrate_with(net, x0, t_end, &opts, f, &[])
}

// Dormand–Prince tableau; the system is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Recorder<'a> {
    traj: Trajectory,
    f: Option<&'a LyapunovFunction>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, x: &[f64], dx: &[f64]) -> Result<(), SimError> {
        if let Some(f) = self.f {
            let v = f.value(x)?;
            let g = f.gradient(x)?;
            self.traj.f_values.as_mut().expect("recording").push(v);
            self.traj
                .dissipation
                .as_mut()
                .expect("recording")
                .push(linalg::dot(&g, dx));
        }
        self.traj.times.push(t);
        self.traj.states.push(x.to_vec());
        Ok(())
    }
}

/// Full-control variant: every accepted step is recorded and steps are
/// shortened to land exactly on each time in `stops`.
pub fn integrate_with(
    net: &ReactionNetwork,
    x0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
    f: Option<&LyapunovFunction>,
    stops: &[f64],
) -> Result<Trajectory, SimError> {
    let n = net.num_species();
    if x0.len() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        }
        .into());
    }
    if x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(SimError::Input(
            "initial state must be finite and non-negative".into(),
        ));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimError::Input("t_end must be positive".into()));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(SimError::Input("tolerances must be positive".into()));
    }
    let ma = net.compile();
    let mut stops: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < t_end)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_end);
    let mut next_stop = 0;

    let mut rec = Recorder {
        traj: Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            f_values: f.map(|_| Vec::new()),
            dissipation: f.map(|_| Vec::new()),
            clamp_events: 0,
        },
        f,
    };
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    ma.field_into(&x, &mut k[0]);
    rec.push(t, &x, &k[0])?;
    let mut h = if opts.initial_step > 0.0 {
        opts.initial_step
    } else {
        t_end / 1e4
    };
    let mut steps = 0usize;
    let mut xs = vec![0.0; n];
    let mut xnew = vec![0.0; n];
    while next_stop < stops.len() {
        let target = stops[next_stop];
        if steps >= opts.max_steps {
            return Err(SimError::MaxSteps {
                t,
                partial: Box::new(rec.traj),
            });
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        let remaining = target - t;
        let lands = h >= remaining;
        let h_try = if lands { remaining } else { h };
        let (err, negative) = dp_step(&ma, &x, h_try, &mut k, &mut xs, &mut xnew, opts);
        steps += 1;
        // overflowing stages reject the step outright
        let err = if err.is_finite() { err } else { f64::MAX };
        let accept = err <= 1.0 && !negative;
        if accept || h_try <= h_min {
            let clamped = !accept;
            if clamped {
                let worst = xnew.iter().copied().fold(f64::INFINITY, f64::min);
                if err > 1.0 || worst < CLAMP_LIMIT {
                    return Err(SimError::StepUnderflow {
                        t,
                        partial: Box::new(rec.traj),
                    });
                }
                xnew.iter_mut().for_each(|v| *v = v.max(0.0));
                rec.traj.clamp_events += 1;
            }
            t = if lands { target } else { t + h_try };
            std::mem::swap(&mut x, &mut xnew);
            // FSAL: the last stage is the derivative at the new point
            if clamped {
                ma.field_into(&x, &mut k[0]);
            } else {
                let last = k[6].clone();
                k[0].copy_from_slice(&last);
            }
            rec.push(t, &x, &k[0])?;
            if lands {
                next_stop += 1;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !lands || fac < 1.0 {
                h = h_try * fac;
            }
        } else if negative && err <= 1.0 {
            h = h_try * 0.5;
        } else {
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(SimError::StepUnderflow {
                t,
                partial: Box::new(rec.traj),
            });
        }
    }
    Ok(rec.traj)
}

/// One Dormand–Prince step; returns the scaled error norm and whether the
/// proposal has a negative component.
fn dp_step(
    ma: &MassAction,
    x: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 7],
    xs: &mut [f64],
    xnew: &mut [f64],
    opts: &IntegratorOptions,
) -> (f64, bool) {
    let n = x.len();
    for s in 1..7 {
        for j in 0..n {
            let mut acc = 0.0;
            for (l, a) in A[s].iter().enumerate().take(s) {
                acc += a * k[l][j];
            }
            xs[j] = x[j] + h * acc;
        }
        ma.field_into(xs, &mut k[s]);
    }
    let mut err2 = 0.0;
    let mut negative = false;
    for j in 0..n {
        let mut acc = 0.0;
        let mut e = 0.0;
        for s in 0..7 {
            acc += B[s] * k[s][j];
            e += E[s] * k[s][j];
        }
        xnew[j] = x[j] + h * acc;
        negative |= xnew[j] < 0.0;
        let sc = opts.abs_tol + opts.rel_tol * x[j].abs().max(xnew[j].abs());
        err2 += (h * e / sc).powi(2);
    }
    ((err2 / n.max(1) as f64).sqrt(), negative)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub final_distance: f64,
    /// `None` when no Lyapunov values were recorded.
    pub f_monotone: Option<bool>,
    pub max_dissipation: Option<f64>,
    pub final_time: f64,
    pub samples: usize,
}

pub fn convergence_report(traj: &Trajectory, x_star: &[f64]) -> ConvergenceReport {
    let last = traj.last_state();
    let final_distance = last
        .iter()
        .zip(x_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let f_monotone = traj
        .f_values
        .as_ref()
        .map(|f| f.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    let max_dissipation = traj
        .dissipation
        .as_ref()
        .map(|d| d.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    ConvergenceReport {
        final_distance,
        f_monotone,
        max_dissipation,
        final_time: *traj.times.last().expect("non-empty trajectory"),
        samples: traj.times.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_network;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let net = parse_network("A -> 0 @ 1").unwrap();
        let tr = integrate(&net, &[1.0], 5.0, 1e-10, 1e-12, None).unwrap();
        assert!((tr.last_state()[0] - (-5.0f64).exp()).abs() < 1e-9);
        assert_eq!(*tr.times.last().unwrap(), 5.0);
    }

    #[test]
    fn overflowing_first_step_recovers() {
        let net = parse_network("4A -> 3A @ 1e6").unwrap();
        let opts = IntegratorOptions {
            initial_step: 1.0,
            ..IntegratorOptions::for_horizon(10.0)
        };
        let tr = integrate_with(&net, &[10.0], 10.0, &opts, None, &[]).unwrap();
        // x' = -1e6 x^4 gives x(t) = (x0^-3 + 3e6 t)^(-1/3)
        let exact = (1e-3 + 3e7f64).powf(-1.0 / 3.0);
        assert!((tr.last_state()[0] - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn lands_on_stops() {
        let net = parse_network("A <-> B @ 1, 2").unwrap();
        let grid = uniform_grid(3.0, 7);
        let tr = integrate_with(
            &net,
            &[1.0, 0.0],
            3.0,
            &IntegratorOptions::for_horizon(3.0),
            None,
            &grid,
        )
        .unwrap();
        for t in grid {
            assert!(tr.times.contains(&t));
        }
    }

    #[test]
    fn fast_decay_stays_non_negative() {
        let net = parse_network("A -> 0 @ 50\n2A -> A @ 30").unwrap();
        let tr = integrate(&net, &[3.0], 20.0, 1e-6, 1e-12, None).unwrap();
        assert!(tr.states.iter().all(|s| s[0] >= 0.0));
    }

    #[test]
    fn csv_header_and_precision() {
        let net = parse_network("A -> 0 @ 1").unwrap();
        let tr = integrate(&net, &[1.0], 1.0, 1e-8, 1e-10, None)
            .unwrap()
            .resample(3);
        let mut buf = Vec::new();
        tr.write_csv(&["A".to_string()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,A"));
        assert_eq!(
            lines.next(),
            Some("0.0000000000000000e0,1.0000000000000000e0")
        );
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn wrong_target_is_reported_not_raised() {
        let net = parse_network("A <-> B @ 1, 1").unwrap();
        let tr = integrate(&net, &[2.0, 0.0], 10.0, 1e-8, 1e-10, None).unwrap();
        let rep = convergence_report(&tr, &[5.0, 5.0]);
        assert!(rep.final_distance > 3.0);
        assert_eq!(rep.f_monotone, None);
    }
}
