//! Weak-order time steppers for dY = a(Y)dt + Σ_l b_l(Y)dW_l.
//!
//! States are `ComplexMatrix` values (column vectors or stacked columns).
//! Coefficients may depend on the step index, which covers piecewise-constant
//! controls and noise drifts on the grid. Noise is always injected as
//! standard normals so the same realization can drive several integrations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    #[default]
    Platen,
}

pub trait SdeSystem {
    fn channels(&self) -> usize;
    fn drift(&self, step: usize, y: &ComplexMatrix) -> ComplexMatrix;
    fn diffusion(&self, step: usize, channel: usize, y: &ComplexMatrix) -> ComplexMatrix;
}

/// Linear system dY = M_i Y dt + Σ_l G_{l,i} Y dW_l with per-step matrices.
/// A single entry in either list is treated as constant in time.
#[derive(Clone, Debug)]
pub struct LinearSde {
    pub drift: Vec<ComplexMatrix>,
    /// `diffusion[l][i]`
    pub diffusion: Vec<Vec<ComplexMatrix>>,
}

impl LinearSde {
    fn pick(list: &[ComplexMatrix], step: usize) -> &ComplexMatrix {
        if list.len() == 1 {
            &list[0]
        } else {
            &list[step]
        }
    }
}

impl SdeSystem for LinearSde {
    fn channels(&self) -> usize {
        self.diffusion.len()
    }

    fn drift(&self, step: usize, y: &ComplexMatrix) -> ComplexMatrix {
        Self::pick(&self.drift, step).matmul(y)
    }

    fn diffusion(&self, step: usize, channel: usize, y: &ComplexMatrix) -> ComplexMatrix {
        Self::pick(&self.diffusion[channel], step).matmul(y)
    }
}

/// Scalar-style system from closures, mainly for tests and experiments.
pub struct FnSystem<A, B>
where
    A: Fn(&ComplexMatrix) -> ComplexMatrix,
    B: Fn(usize, &ComplexMatrix) -> ComplexMatrix,
{
    pub channels: usize,
    pub drift: A,
    pub diffusion: B,
}

impl<A, B> SdeSystem for FnSystem<A, B>
where
    A: Fn(&ComplexMatrix) -> ComplexMatrix,
    B: Fn(usize, &ComplexMatrix) -> ComplexMatrix,
{
    fn channels(&self) -> usize {
        self.channels
    }
    fn drift(&self, _step: usize, y: &ComplexMatrix) -> ComplexMatrix {
        (self.drift)(y)
    }
    fn diffusion(&self, _step: usize, channel: usize, y: &ComplexMatrix) -> ComplexMatrix {
        (self.diffusion)(channel, y)
    }
}

fn check_finite(y: ComplexMatrix, prev: &ComplexMatrix, step: usize) -> Result<ComplexMatrix> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NumericalBlowup {
            step,
            last_finite: prev.as_slice().to_vec(),
        })
    }
}

/// y' = y + a(y)dt + Σ_l b_l(y)ΔW_l
pub fn euler_maruyama_step<S: SdeSystem + ?Sized>(
    sys: &S,
    step: usize,
    y: &ComplexMatrix,
    dt: f64,
    dw: &[f64],
) -> Result<ComplexMatrix> {
    let mut out = y.clone();
    out.axpy(C64::new(dt, 0.0), &sys.drift(step, y));
    for (l, &w) in dw.iter().enumerate().take(sys.channels()) {
        if w != 0.0 {
            out.axpy(C64::new(w, 0.0), &sys.diffusion(step, l, y));
        }
    }
    check_finite(out, y, step)
}

/// Explicit weak order-2 step with supporting values, applied per channel.
/// `normals` are the standard normals N_l, with ΔW_l = N_l√dt.
pub fn platen_step<S: SdeSystem + ?Sized>(
    sys: &S,
    step: usize,
    y: &ComplexMatrix,
    dt: f64,
    normals: &[f64],
) -> Result<ComplexMatrix> {
    let sq = dt.sqrt();
    let a0 = sys.drift(step, y);
    let mut base = y.clone();
    base.axpy(C64::new(dt, 0.0), &a0);

    let b0: Vec<ComplexMatrix> = (0..sys.channels()).map(|l| sys.diffusion(step, l, y)).collect();
    let mut support = base.clone();
    for (b, &n) in b0.iter().zip(normals) {
        support.axpy(C64::new(n * sq, 0.0), b);
    }

    let mut out = y.clone();
    let mut a_sum = sys.drift(step, &support);
    a_sum += &a0;
    out.axpy(C64::new(0.5 * dt, 0.0), &a_sum);

    for (l, (b, &n)) in b0.iter().zip(normals).enumerate() {
        let mut plus = base.clone();
        plus.axpy(C64::new(sq, 0.0), b);
        let mut minus = base.clone();
        minus.axpy(C64::new(-sq, 0.0), b);
        let bp = sys.diffusion(step, l, &plus);
        let bm = sys.diffusion(step, l, &minus);
        let w1 = 0.25 * n * sq;
        let w2 = 0.25 * (n * n - 1.0) * sq;
        out.axpy(C64::new(w1 + w2, 0.0), &bp);
        out.axpy(C64::new(w1 - w2, 0.0), &bm);
        out.axpy(C64::new(2.0 * w1, 0.0), b);
    }
    check_finite(out, y, step)
}

pub fn step<S: SdeSystem + ?Sized>(
    scheme: Scheme,
    sys: &S,
    index: usize,
    y: &ComplexMatrix,
    dt: f64,
    normals: &[f64],
) -> Result<ComplexMatrix> {
    match scheme {
        Scheme::Euler => {
            let sq = dt.sqrt();
            let dw: Vec<f64> = normals.iter().map(|n| n * sq).collect();
            euler_maruyama_step(sys, index, y, dt, &dw)
        }
        Scheme::Platen => platen_step(sys, index, y, dt, normals),
    }
}

/// Full trajectory `[y0, y1, …, y_steps]`; `noise_draws[i]` holds one
/// standard normal per channel for step `i`.
pub fn integrate<S: SdeSystem + ?Sized>(
    sys: &S,
    y0: &ComplexMatrix,
    dt: f64,
    steps: usize,
    noise_draws: &[Vec<f64>],
    scheme: Scheme,
) -> Result<Vec<ComplexMatrix>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if noise_draws.len() < steps {
        return Err(Error::Dimension(format!(
            "{} noise draws for {steps} steps",
            noise_draws.len()
        )));
    }
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(y0.clone());
    for (i, draws) in noise_draws.iter().enumerate().take(steps) {
        if draws.len() != sys.channels() {
            return Err(Error::Dimension(format!(
                "step {i}: {} draws for {} channels",
                draws.len(),
                sys.channels()
            )));
        }
        let next = step(scheme, sys, i, &traj[i], dt, draws)?;
        traj.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ComplexMatrix {
        ComplexMatrix::column(&[C64::new(v, 0.0)])
    }

    #[test]
    fn deterministic_euler_step() {
        let sys = FnSystem {
            channels: 0,
            drift: |y: &ComplexMatrix| y.scale_real(-1.0),
            diffusion: |_, y: &ComplexMatrix| y.scale_real(0.0),
        };
        let y = euler_maruyama_step(&sys, 0, &scalar(1.0), 0.1, &[]).unwrap();
        assert!((y[(0, 0)].re - 0.9).abs() < 1e-15);
    }

    #[test]
    fn pure_diffusion_step() {
        let sys = FnSystem {
            channels: 1,
            drift: |y: &ComplexMatrix| y.scale_real(0.0),
            diffusion: |_, _y: &ComplexMatrix| scalar(1.0),
        };
        let y = euler_maruyama_step(&sys, 0, &scalar(2.0), 0.1, &[0.3]).unwrap();
        assert!((y[(0, 0)].re - 2.3).abs() < 1e-15);
    }

    #[test]
    fn platen_without_diffusion_is_heun() {
        let sys = FnSystem {
            channels: 1,
            drift: |y: &ComplexMatrix| y.map(|z| -z * z),
            diffusion: |_, y: &ComplexMatrix| y.scale_real(0.0),
        };
        let y0 = 0.8;
        let dt = 0.05;
        let got = platen_step(&sys, 0, &scalar(y0), dt, &[1.7]).unwrap()[(0, 0)].re;
        let a = |y: f64| -y * y;
        let heun = y0 + 0.5 * (a(y0) + a(y0 + a(y0) * dt)) * dt;
        assert!((got - heun).abs() < 1e-16);
    }

    #[test]
    fn zero_steps_and_lengths() {
        let sys = LinearSde {
            drift: vec![scalar(0.1)],
            diffusion: vec![vec![scalar(0.2)]],
        };
        let t0 = integrate(&sys, &scalar(1.0), 0.1, 0, &[], Scheme::Platen).unwrap();
        assert_eq!(t0.len(), 1);
        let draws = vec![vec![0.5]; 7];
        let t = integrate(&sys, &scalar(1.0), 0.1, 7, &draws, Scheme::Euler).unwrap();
        assert_eq!(t.len(), 8);
    }

    #[test]
    fn blowup_reports_step_and_last_state() {
        let sys = FnSystem {
            channels: 0,
            drift: |y: &ComplexMatrix| y.map(|z| z * z * z * 1e100),
            diffusion: |_, y: &ComplexMatrix| y.clone(),
        };
        let draws = vec![vec![]; 10];
        let err = integrate(&sys, &scalar(10.0), 1.0, 10, &draws, Scheme::Euler).unwrap_err();
        match err {
            Error::NumericalBlowup { step, last_finite } => {
                assert!(step < 10);
                assert!(last_finite.iter().all(|z| z.re.is_finite()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
