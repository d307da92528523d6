//! Time evolution of the single-excitation amplitudes.
//!
//! [`integrate`] is the production path: an adaptive Dormand–Prince 5(4)
//! integrator with continuous output, resampled on a uniform grid.
//! [`integrate_expm`] and [`integrate_volterra`] are independent references
//! used to cross-check it.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_generator, lorentzian_kernel, qubit_jet, GeneratorMatrix, ModelParams, QubitJet,
    SecondLayerEnv, GAMMA0,
};

/// Number of leading basis components that are probability amplitudes
/// (the memory variables zₙ are excluded).
pub const TRACKED_AMPLITUDES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub dense_grid_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.1,
            dense_grid_points: 2001,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidSolverConfig(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidSolverConfig(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidSolverConfig(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        if self.dense_grid_points < 2 {
            return Err(Error::InvalidSolverConfig(format!(
                "dense_grid_points must be at least 2, got {}",
                self.dense_grid_points
            )));
        }
        Ok(())
    }
}

/// Amplitudes sampled on a strictly increasing time grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
    pub basis_labels: Vec<&'static str>,
    /// |a(t)| (or |h(t)|) at each grid time.
    pub survival: Vec<f64>,
    /// Qubit amplitude with its first two derivatives at each grid time.
    pub jets: Vec<QubitJet>,
}

impl AmplitudeTrajectory {
    fn from_states(
        times: Vec<f64>,
        states: Vec<DVector<Complex64>>,
        basis_labels: Vec<&'static str>,
        kappa0: f64,
        kappa: f64,
    ) -> Self {
        let jets: Vec<QubitJet> = states
            .iter()
            .map(|x| qubit_jet(kappa0, kappa, x[0], x[1], x[2], x[3]))
            .collect();
        let survival = jets.iter().map(|j| j.value.norm()).collect();
        AmplitudeTrajectory {
            times,
            states,
            basis_labels,
            survival,
            jets,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn survival_tau(&self) -> f64 {
        *self.survival.last().unwrap_or(&1.0)
    }

    /// Σ |xᵢ|² over the probability amplitudes at grid point `k`.
    pub fn tracked_norm(&self, k: usize) -> f64 {
        self.states[k]
            .iter()
            .take(TRACKED_AMPLITUDES)
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Index of a basis component by label.
    pub fn component(&self, label: &str) -> Option<usize> {
        self.basis_labels.iter().position(|l| *l == label)
    }

    /// Splits at interior grid index `k`; both halves contain point `k`.
    pub fn split_at(&self, k: usize) -> (AmplitudeTrajectory, AmplitudeTrajectory) {
        assert!(k > 0 && k + 1 < self.len(), "split index must be interior");
        let part = |r: std::ops::Range<usize>| AmplitudeTrajectory {
            times: self.times[r.clone()].to_vec(),
            states: self.states[r.clone()].to_vec(),
            basis_labels: self.basis_labels.clone(),
            survival: self.survival[r.clone()].to_vec(),
            jets: self.jets[r].to_vec(),
        };
        (part(0..k + 1), part(k..self.len()))
    }

    /// Qubit amplitude and its rate at time `t` inside grid interval
    /// `[times[k], times[k + 1]]`, by quintic Hermite interpolation of the
    /// jets at both ends.
    pub fn qubit_in_interval(&self, k: usize, t: f64) -> (Complex64, Complex64) {
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p, q) = (&self.jets[k], &self.jets[k + 1]);
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);

        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        let h3 = 0.5 * s3 - s4 + 0.5 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let value = p.value * h0
            + p.rate * (h * h1)
            + p.accel * (h * h * h2)
            + q.accel * (h * h * h3)
            + q.rate * (h * h4)
            + q.value * h5;

        let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
        let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
        let d2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
        let d3 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
        let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
        let d5 = -d0;
        let rate = (p.value * d0 + q.value * d5) / h
            + p.rate * d1
            + p.accel * (h * d2)
            + q.accel * (h * d3)
            + q.rate * d4;

        (value, rate)
    }

    /// CSV with columns `time`, `re_<label>`, `im_<label>` per basis
    /// component in basis order, then `survival`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        for l in &self.basis_labels {
            header.push(format!("re_{l}"));
            header.push(format!("im_{l}"));
        }
        header.push("survival".to_string());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(header.len());
            row.push(self.times[k].to_string());
            for c in self.states[k].iter() {
                row.push(c.re.to_string());
                row.push(c.im.to_string());
            }
            row.push(self.survival[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform grid of `n` points on `[0, tau]` with exact endpoints.
pub fn uniform_grid(tau: f64, n: usize) -> Vec<f64> {
    let last = n - 1;
    (0..n)
        .map(|j| {
            if j == last {
                tau
            } else {
                tau * j as f64 / last as f64
            }
        })
        .collect()
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes cᵢ
// never appear.
const A21: f64 = 0.2;
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

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

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

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const UNDERFLOW_FRACTION: f64 = 1e-12;

type CVec = DVector<Complex64>;

fn lin(terms: &[(f64, &CVec)]) -> CVec {
    let mut out = terms[0].1 * Complex64::new(terms[0].0, 0.0);
    for (c, v) in &terms[1..] {
        out.axpy(Complex64::new(*c, 0.0), v, Complex64::new(1.0, 0.0));
    }
    out
}

fn error_norm(err: &CVec, y0: &CVec, y1: &CVec, config: &SolverConfig) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let scale = config.abs_tol + config.rel_tol * a.norm().max(b.norm());
            (e.norm() / scale).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Continuous extension of one accepted step.
struct DenseStep {
    t0: f64,
    h: f64,
    r: [CVec; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> CVec {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = |v: f64| Complex64::new(v, 0.0);
        let inner = &self.r[3] + &self.r[4] * c(th1);
        let inner = &self.r[2] + inner * c(th);
        let inner = &self.r[1] + inner * c(th1);
        &self.r[0] + inner * c(th)
    }
}

/// Adaptive solution of ẋ = M x from x(0) = (1, 0, …, 0) over `[0, tau]`,
/// resampled on `config.dense_grid_points` uniform times.
pub fn integrate(
    gen: &GeneratorMatrix,
    config: &SolverConfig,
    tau: f64,
) -> Result<AmplitudeTrajectory> {
    config.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPhysicalParameter {
            field: "tau",
            value: tau,
        });
    }
    let m = gen.entries();
    let grid = uniform_grid(tau, config.dense_grid_points);
    let mut out: Vec<CVec> = Vec::with_capacity(grid.len());
    let mut next = 0usize;

    let mut t = 0.0;
    let mut y = gen.initial_state();
    let mut k1 = m * &y;
    out.push(y.clone());
    next += 1;

    let max_step = config.max_step.min(tau);
    let mut h = (0.01 * tau).min(max_step);
    let min_step = UNDERFLOW_FRACTION * tau;

    while next < grid.len() {
        if h < min_step {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = t + h >= tau;
        if last {
            h = tau - t;
        }

        let y2 = lin(&[(1.0, &y), (h * A21, &k1)]);
        let k2 = m * &y2;
        let y3 = lin(&[(1.0, &y), (h * A31, &k1), (h * A32, &k2)]);
        let k3 = m * &y3;
        let y4 = lin(&[(1.0, &y), (h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]);
        let k4 = m * &y4;
        let y5 = lin(&[
            (1.0, &y),
            (h * A51, &k1),
            (h * A52, &k2),
            (h * A53, &k3),
            (h * A54, &k4),
        ]);
        let k5 = m * &y5;
        let y6 = lin(&[
            (1.0, &y),
            (h * A61, &k1),
            (h * A62, &k2),
            (h * A63, &k3),
            (h * A64, &k4),
            (h * A65, &k5),
        ]);
        let k6 = m * &y6;
        let y_new = lin(&[
            (1.0, &y),
            (h * B1, &k1),
            (h * B3, &k3),
            (h * B4, &k4),
            (h * B5, &k5),
            (h * B6, &k6),
        ]);
        let k7 = m * &y_new;
        let err = lin(&[
            (h * E1, &k1),
            (h * E3, &k3),
            (h * E4, &k4),
            (h * E5, &k5),
            (h * E6, &k6),
            (h * E7, &k7),
        ]);
        let err_norm = error_norm(&err, &y, &y_new, config);

        if !err_norm.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }
        let factor = if err_norm == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        if err_norm > 1.0 {
            h *= factor.min(1.0);
            continue;
        }

        let t_new = if last { tau } else { t + h };
        let ydiff = &y_new - &y;
        let bspl = &k1 * Complex64::new(h, 0.0) - &ydiff;
        let r3 = &ydiff - &k7 * Complex64::new(h, 0.0) - &bspl;
        let r4 = lin(&[
            (h * D1, &k1),
            (h * D3, &k3),
            (h * D4, &k4),
            (h * D5, &k5),
            (h * D6, &k6),
            (h * D7, &k7),
        ]);
        let dense = DenseStep {
            t0: t,
            h,
            r: [y.clone(), ydiff, bspl, r3, r4],
        };
        while next < grid.len() && (grid[next] <= t_new || last) {
            if next + 1 == grid.len() && last {
                out.push(y_new.clone());
            } else {
                out.push(dense.eval(grid[next]));
            }
            next += 1;
        }

        t = t_new;
        y = y_new;
        k1 = k7;
        h = (h * factor).min(max_step);
    }

    Ok(AmplitudeTrajectory::from_states(
        grid,
        out,
        gen.basis_labels().to_vec(),
        gen.kappa0(),
        gen.kappa(),
    ))
}

/// Reference solution x(t) = exp(M t) x(0) at each requested time.
///
/// Each time is evaluated independently (scaling and squaring with a Padé
/// approximant), so no stepping error accumulates.
pub fn integrate_expm(gen: &GeneratorMatrix, times: &[f64]) -> AmplitudeTrajectory {
    assert!(
        times.first() == Some(&0.0) && times.windows(2).all(|w| w[1] > w[0]),
        "times must start at 0 and be strictly increasing"
    );
    let x0 = gen.initial_state();
    let states = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                x0.clone()
            } else {
                let mt: DMatrix<Complex64> = gen.entries() * Complex64::new(t, 0.0);
                mt.exp() * &x0
            }
        })
        .collect();
    AmplitudeTrajectory::from_states(
        times.to_vec(),
        states,
        gen.basis_labels().to_vec(),
        gen.kappa0(),
        gen.kappa(),
    )
}

/// Direct solution of the memory-keeping amplitude equations with the
/// reservoir convolutions evaluated by trapezoidal quadrature of the exact
/// kernel over the full history.
///
/// The ODE part is advanced with the implicit trapezoidal rule; the scheme is
/// second order in `dt`. Cost is quadratic in the number of steps. The time
/// step is adjusted down so that an integer number of steps spans `tau`.
pub fn integrate_volterra(params: &ModelParams, dt: f64, tau: f64) -> Result<AmplitudeTrajectory> {
    let (ups, lam) = match params.env {
        SecondLayerEnv::MemoryKeeping {
            upsilon1,
            upsilon2,
            lambda1,
            lambda2,
        } => ([upsilon1, upsilon2], [lambda1, lambda2]),
        SecondLayerEnv::Memoryless { .. } => {
            return Err(Error::VariantMismatch {
                expected: "memory_keeping",
            })
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidSolverConfig(format!("dt must be positive, got {dt}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPhysicalParameter {
            field: "tau",
            value: tau,
        });
    }

    let steps = ((tau / dt).ceil() as usize).max(1);
    let dt = tau / steps as f64;
    let times = uniform_grid(tau, steps + 1);

    let i = Complex64::i();
    let c = |v: f64| Complex64::new(v, 0.0);
    let (k0, k, w) = (params.kappa0, params.kappa, params.omega_c);

    // local (non-convolution) part on (h, c0, c1, c2)
    let mut a = DMatrix::<Complex64>::zeros(4, 4);
    a[(0, 1)] = -i * k0;
    a[(1, 0)] = -i * k0;
    a[(1, 1)] = c(-0.5 * GAMMA0);
    a[(1, 2)] = -i * k;
    a[(1, 3)] = -i * k;
    a[(2, 1)] = -i * k;
    a[(2, 3)] = -i * w;
    a[(3, 1)] = -i * k;
    a[(3, 2)] = -i * w;

    let kernels: [Vec<f64>; 2] = [0, 1].map(|n| {
        (0..=steps)
            .map(|j| lorentzian_kernel(ups[n], lam[n], j as f64 * dt))
            .collect()
    });

    let mut lhs = DMatrix::<Complex64>::identity(4, 4) - &a * c(0.5 * dt);
    for n in 0..2 {
        lhs[(2 + n, 2 + n)] += c(0.25 * dt * dt * kernels[n][0]);
    }
    let lu = lhs.lu();

    let mut states: Vec<DVector<Complex64>> = Vec::with_capacity(steps + 1);
    let mut x = DVector::<Complex64>::zeros(4);
    x[0] = c(1.0);
    states.push(x.clone());
    let mut conv = [Complex64::new(0.0, 0.0); 2];

    for step in 0..steps {
        // history part of the convolution at t_{step+1}: nodes 0..=step
        let mut history = [Complex64::new(0.0, 0.0); 2];
        for n in 0..2 {
            if ups[n] == 0.0 {
                continue;
            }
            let f = &kernels[n];
            let mut acc = 0.5 * f[step + 1] * states[0][2 + n];
            for j in 1..=step {
                acc += f[step + 1 - j] * states[j][2 + n];
            }
            history[n] = acc * dt;
        }

        let mut rhs = &x + (&a * &x) * c(0.5 * dt);
        for n in 0..2 {
            rhs[2 + n] -= c(0.5 * dt) * (conv[n] + history[n]);
        }
        let x_new = lu
            .solve(&rhs)
            .expect("trapezoidal system matrix is non-singular for positive dt");
        for n in 0..2 {
            conv[n] = history[n] + c(0.5 * dt * kernels[n][0]) * x_new[2 + n];
        }
        x = x_new;
        states.push(x.clone());
    }

    Ok(AmplitudeTrajectory::from_states(
        times,
        states,
        vec!["h", "c0", "c1", "c2"],
        k0,
        k,
    ))
}

/// Builds the generator for `params` and integrates it over `[0, params.tau]`.
pub fn simulate(params: &ModelParams, config: &SolverConfig) -> Result<AmplitudeTrajectory> {
    let params = crate::model::validate(*params)?;
    integrate(&build_generator(&params), config, params.tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn damped_jc(k0: f64, t: f64) -> f64 {
        // ä + ½ȧ + κ₀² a = 0, a(0) = 1, ȧ(0) = 0, overdamped for κ₀ < 1/4
        let d = (1.0 / 16.0 - k0 * k0).sqrt();
        let (r1, r2) = (-0.25 + d, -0.25 - d);
        (r1 * (r2 * t).exp() - r2 * (r1 * t).exp()) / (r1 - r2)
    }

    #[test]
    fn hermite_reproduces_quintic() {
        let poly = |t: f64| Complex64::new(1.0 - 2.0 * t + 0.5 * t.powi(5), t.powi(3) - t.powi(4));
        let d1 = |t: f64| Complex64::new(-2.0 + 2.5 * t.powi(4), 3.0 * t * t - 4.0 * t.powi(3));
        let d2 = |t: f64| Complex64::new(10.0 * t.powi(3), 6.0 * t - 12.0 * t * t);
        let jet = |t: f64| QubitJet {
            value: poly(t),
            rate: d1(t),
            accel: d2(t),
        };
        let traj = AmplitudeTrajectory {
            times: vec![0.3, 1.1],
            states: vec![DVector::zeros(1), DVector::zeros(1)],
            basis_labels: vec!["a"],
            survival: vec![0.0, 0.0],
            jets: vec![jet(0.3), jet(1.1)],
        };
        for t in [0.3, 0.5, 0.77, 1.0, 1.1] {
            let (v, r) = traj.qubit_in_interval(0, t);
            assert!((v - poly(t)).norm() < 1e-13, "value at {t}");
            assert!((r - d1(t)).norm() < 1e-12, "rate at {t}");
        }
    }

    #[test]
    fn damped_jc_benchmark() {
        let p = ModelParams::memoryless(0.2, 0.0, 0.0, 1.0, 4.0);
        let traj = simulate(&p, &SolverConfig::default()).unwrap();
        assert_eq!(traj.len(), 2001);
        assert_eq!(traj.survival[0], 1.0);
        for (t, s) in traj.times.iter().zip(&traj.survival) {
            assert!((s - damped_jc(0.2, *t)).abs() < 1e-8, "t = {t}");
        }
        let exact = integrate_expm(&build_generator(&p), &[0.0, 1.0, 2.5, 4.0]);
        for (t, s) in exact.times.iter().zip(&exact.survival) {
            assert!((s - damped_jc(0.2, *t)).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn decoupled_qubit_stays_excited() {
        for p in [
            ModelParams::memoryless(0.0, 2.0, 1.0, 1.0, 4.0),
            ModelParams::memory_keeping(0.0, 2.0, 1.0, 1.0, 0.1, 4.0),
        ] {
            let traj = simulate(&p, &SolverConfig::default()).unwrap();
            assert!(traj.survival.iter().all(|&s| s == 1.0));
        }
        let v = integrate_volterra(&ModelParams::memory_keeping(0.0, 2.0, 1.0, 1.0, 0.1, 4.0), 1e-2, 4.0)
            .unwrap();
        assert!(v.survival.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn symmetric_second_layer_keeps_c1_equal_c2() {
        let p = ModelParams::memoryless(0.2, 2.2, 1.3, 1.0, 4.0);
        let traj = simulate(&p, &SolverConfig::default()).unwrap();
        for x in &traj.states {
            assert!((x[2] - x[3]).norm() < 1e-10);
        }
    }

    #[test]
    fn expm_starts_at_identity() {
        let g = build_generator(&ModelParams::memory_keeping(0.2, 1.0, 1.0, 1.0, 0.1, 4.0));
        let traj = integrate_expm(&g, &[0.0, 0.5]);
        assert_eq!(traj.states[0], g.initial_state());
    }

    #[test]
    fn memory_variable_matches_direct_convolution() {
        // z₁(t) = ∫₀ᵗ f₁(t − s) c₁(s) ds, quadrature against the integrated z₁
        let p = ModelParams::memory_keeping(0.2, 2.0, 1.0, 1.0, 0.1, 4.0);
        let cfg = SolverConfig {
            dense_grid_points: 4001,
            ..SolverConfig::default()
        };
        let traj = simulate(&p, &cfg).unwrap();
        let dt = traj.times[1];
        for &k in &[1000usize, 2500, 4000] {
            let t = traj.times[k];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=k {
                let w = if j == 0 || j == k { 0.5 } else { 1.0 };
                acc += traj.states[j][2] * (w * lorentzian_kernel(1.0, 0.1, t - traj.times[j]));
            }
            acc *= dt;
            assert!((acc - traj.states[k][4]).norm() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn volterra_rejects_memoryless() {
        let p = ModelParams::memoryless(0.2, 1.0, 0.0, 1.0, 4.0);
        assert!(matches!(
            integrate_volterra(&p, 1e-3, 4.0),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn underflow_guard_fires_on_impossible_tolerance() {
        let p = ModelParams::memoryless(0.2, 2.0, 1.0, 1.0, 4.0);
        let cfg = SolverConfig {
            rel_tol: 1e-30,
            abs_tol: 1e-30,
            ..SolverConfig::default()
        };
        assert!(matches!(simulate(&p, &cfg), Err(Error::StepSizeUnderflow { .. })));
    }

    #[test]
    fn bad_solver_config_is_rejected() {
        let p = ModelParams::memoryless(0.2, 2.0, 1.0, 1.0, 4.0);
        let cfg = SolverConfig {
            dense_grid_points: 1,
            ..SolverConfig::default()
        };
        assert!(matches!(simulate(&p, &cfg), Err(Error::InvalidSolverConfig(_))));
    }

    #[test]
    fn csv_layout() {
        let p = ModelParams::memoryless(0.2, 1.0, 0.5, 1.0, 1.0);
        let cfg = SolverConfig {
            dense_grid_points: 3,
            ..SolverConfig::default()
        };
        let traj = simulate(&p, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time,re_a,im_a,re_c0,im_c0,re_c1,im_c1,re_c2,im_c2,survival"
        );
        assert_eq!(lines.next().unwrap(), "0,1,0,0,0,0,0,0,0,1");
        assert_eq!(text.lines().count(), 4);
    }
}
