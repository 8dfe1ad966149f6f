//! Dormand–Prince 5(4) with step-size control and continuous output.

use crate::error::{Error, Result};

use super::VectorField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: u64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Stepper state. Negative components are clamped to zero after every
/// accepted step, keeping solutions in the nonnegative cone.
pub struct Dopri5<'f, F: VectorField> {
    field: &'f F,
    opts: OdeOptions,
    t: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
    h: f64,
    steps: u64,
    // continuous output of the last accepted step
    t_old: f64,
    h_old: f64,
    cont: [Vec<f64>; 5],
}

impl<'f, F: VectorField> Dopri5<'f, F> {
    pub fn new(field: &'f F, t0: f64, y0: &[f64], opts: OdeOptions) -> Self {
        let n = field.dim();
        assert_eq!(y0.len(), n, "initial state has the wrong dimension");
        let y: Vec<f64> = y0.iter().map(|v| v.max(0.0)).collect();
        let dy = field.eval_vec(&y);
        let h = initial_step(&y, &dy, &opts);
        Self {
            field,
            opts,
            t: t0,
            cont: [y.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            y,
            dy,
            h,
            steps: 0,
            t_old: t0,
            h_old: 0.0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Field value at the current state.
    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    /// Takes one accepted step, never past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let n = self.y.len();
        let f = self.field;
        let (y, k1) = (&self.y, &self.dy);
        let mut tmp = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut y1 = vec![0.0; n];
        let mut rejected = false;
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::StepSizeUnderflow { t: self.t, h: self.h });
            }
            self.steps += 1;
            let mut h = self.h;
            let last = self.t + h >= t_limit;
            if last {
                h = t_limit - self.t;
            }
            if h <= 1e-13 * self.t.abs().max(1.0) {
                if last && h >= 0.0 {
                    // limit reached within rounding
                    self.t = t_limit;
                    return Ok(());
                }
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }

            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            f.eval(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f.eval(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f.eval(&tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f.eval(&tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f.eval(&tmp, &mut k6);
            for i in 0..n {
                y1[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f.eval(&y1, &mut k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y1[i].abs());
                err += (e / sc).powi(2);
            }
            let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };
            if !err.is_finite() {
                self.h = h * 0.2;
                rejected = true;
                continue;
            }
            let factor = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            if err <= 1.0 {
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * k7[i] - bspl;
                    self.cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.t_old = self.t;
                self.h_old = h;
                self.t = if last { t_limit } else { self.t + h };
                let clamped = y1.iter().any(|&v| v < 0.0);
                if clamped {
                    y1.iter_mut().for_each(|v| *v = v.max(0.0));
                    f.eval(&y1, &mut k7);
                }
                self.y.copy_from_slice(&y1);
                self.dy.copy_from_slice(&k7);
                // no growth right after a rejection
                let factor = if rejected { factor.min(1.0) } else { factor };
                if !last {
                    self.h = h * factor;
                } else {
                    self.h = self.h.max(h);
                }
                return Ok(());
            }
            self.h = h * factor.min(1.0);
            rejected = true;
        }
    }

    /// State at `t` inside the last accepted step, clamped at zero.
    pub fn dense(&self, t: f64) -> Vec<f64> {
        if self.h_old == 0.0 {
            return self.y.clone();
        }
        let theta = (t - self.t_old) / self.h_old;
        let theta1 = 1.0 - theta;
        let c = &self.cont;
        (0..self.y.len())
            .map(|i| {
                let v = c[0][i]
                    + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])));
                v.max(0.0)
            })
            .collect()
    }
}

fn initial_step(y: &[f64], dy: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len().max(1) as f64;
    let (mut d0, mut d1) = (0.0, 0.0);
    for (yi, fi) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        (0.01 * d0 / d1).min(1.0)
    }
}

/// Solution sampled at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Integrates from `(t0, x0)` and reports the solution at each of `sample_times`
/// (ascending, all `>= t0`).
pub fn integrate<F: VectorField>(
    field: &F,
    x0: &[f64],
    t0: f64,
    sample_times: &[f64],
    opts: &OdeOptions,
) -> Result<OdeTrajectory> {
    let mut solver = Dopri5::new(field, t0, x0, *opts);
    let mut states = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        assert!(ts >= t0, "sample time before the initial time");
        while solver.t() < ts {
            solver.step(ts)?;
        }
        if solver.t() == ts {
            states.push(solver.y().to_vec());
        } else {
            states.push(solver.dense(ts));
        }
    }
    Ok(OdeTrajectory {
        times: sample_times.to_vec(),
        states,
    })
}

/// Sample times `0, dt, 2 dt, ...` up to and including `t_end`.
pub fn sample_grid(t_end: f64, dt: f64) -> Vec<f64> {
    assert!(dt > 0.0, "sample interval must be positive");
    let mut times = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * dt;
        if t > t_end {
            break;
        }
        times.push(t);
        k += 1;
    }
    if times.last() != Some(&t_end) {
        times.push(t_end);
    }
    times
}
