//! Adaptive Dormand–Prince 5(4) integration of autonomous systems with
//! continuous (dense) output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t}")]
    Stalled { t: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("trajectory left the domain at t = {t}")]
    LeftDomain { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { abs_tol: 1e-9, rel_tol: 1e-9, max_step: 1.0, max_steps: 5_000_000 }
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

/// Stepper state for `y' = f(y)` moving in one time direction.
pub struct Dopri5<F: Fn(&[f64], &mut [f64])> {
    f: F,
    cfg: IntegratorConfig,
    dir: f64,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    steps: usize,
    // dense output of the last accepted step
    t_old: f64,
    h_old: f64,
    cont: [Vec<f64>; 5],
}

impl<F: Fn(&[f64], &mut [f64])> Dopri5<F> {
    /// Start at `y0` (time 0) heading in the direction of `sign(dir)`.
    pub fn new(f: F, y0: &[f64], dir: f64, cfg: IntegratorConfig) -> Self {
        let n = y0.len();
        let mut k1 = vec![0.0; n];
        f(y0, &mut k1);
        let dir = if dir < 0.0 { -1.0 } else { 1.0 };
        let h = initial_step(&f, y0, &k1, dir, &cfg);
        let zero = vec![0.0; n];
        Dopri5 {
            f,
            cfg,
            dir,
            t: 0.0,
            y: y0.to_vec(),
            k1,
            h,
            steps: 0,
            t_old: 0.0,
            h_old: 0.0,
            cont: [y0.to_vec(), zero.clone(), zero.clone(), zero.clone(), zero],
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    /// Take one accepted step, never passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        let n = self.y.len();
        let f = &self.f;
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        let mut rejected = false;
        loop {
            self.steps += 1;
            if self.steps > self.cfg.max_steps {
                return Err(IntegrateError::TooManySteps(self.cfg.max_steps));
            }
            let remaining = (t_end - self.t) * self.dir;
            let mut h = self.h.abs().min(self.cfg.max_step).min(remaining) * self.dir;
            let last = (h.abs() - remaining).abs() <= 1e-15 * remaining.max(1.0);
            if last {
                h = remaining * self.dir;
            }
            if h.abs() <= 1e-14 * self.t.abs().max(1.0) {
                return Err(IntegrateError::Stalled { t: self.t });
            }
            let y = &self.y;
            let k1 = &self.k1;
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            f(&ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(&ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(&ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(&ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(&ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(&ynew, &mut k7);
            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(ynew[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                // blow-up inside the step: shrink hard and retry
                self.h = h.abs() * 0.1;
                rejected = true;
                continue;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if err <= 1.0 {
                if rejected {
                    fac = fac.min(1.0);
                }
                // dense output coefficients
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * k7[i] - bspl;
                    self.cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                self.t_old = self.t;
                self.h_old = h;
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut ynew);
                std::mem::swap(&mut self.k1, &mut k7);
                if self.y.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrateError::NonFinite { t: self.t });
                }
                self.h = h.abs() * fac;
                return Ok(());
            }
            rejected = true;
            self.h = h.abs() * fac;
        }
    }

    /// Interpolate inside the last accepted step.
    pub fn dense(&self, t: f64, out: &mut [f64]) {
        if self.h_old == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let s = (t - self.t_old) / self.h_old;
        let s1 = 1.0 - s;
        let c = &self.cont;
        for (i, o) in out.iter_mut().enumerate() {
            *o = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
    }

    /// Advance until `t` is covered by the last step and return the state at `t`.
    /// Calls `check` on every accepted step end; `false` aborts with `LeftDomain`.
    pub fn advance_to(
        &mut self,
        t: f64,
        check: &dyn Fn(&[f64]) -> bool,
        out: &mut [f64],
    ) -> Result<(), IntegrateError> {
        while (t - self.t) * self.dir > 0.0 {
            self.step(t)?;
            if !check(&self.y) {
                return Err(IntegrateError::LeftDomain { t: self.t });
            }
        }
        if t == self.t {
            out.copy_from_slice(&self.y);
        } else {
            self.dense(t, out);
        }
        Ok(())
    }
}

fn initial_step<F: Fn(&[f64], &mut [f64]) + ?Sized>(
    f: &F,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let n = y0.len() as f64;
    let sk: Vec<f64> = y0.iter().map(|y| cfg.abs_tol + cfg.rel_tol * y.abs()).collect();
    let d0 = (y0.iter().zip(&sk).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(&sk).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h0 * k).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(&y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(&sk).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Integrate from `y0` for signed time `t`.
pub fn integrate<F: Fn(&[f64], &mut [f64])>(
    f: F,
    y0: &[f64],
    t: f64,
    cfg: IntegratorConfig,
    check: &dyn Fn(&[f64]) -> bool,
) -> Result<Vec<f64>, IntegrateError> {
    let mut out = y0.to_vec();
    if t == 0.0 {
        return Ok(out);
    }
    let mut stepper = Dopri5::new(f, y0, t, cfg);
    stepper.advance_to(t, check, &mut out)?;
    Ok(out)
}
