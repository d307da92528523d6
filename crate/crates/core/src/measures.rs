//! Reduced qubit state, trace-distance non-Markovianity and the quantum speed
//! limit ratio.
//!
//! The qubit channel is amplitude damping with amplitude a(t): populations
//! scale with |a|², coherences with a. For the optimal pair
//! (|0⟩ ± |1⟩)/√2 the trace distance equals |a(t)|, so the
//! non-Markovianity is the total rise of |a(t)| over the horizon.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::AmplitudeTrajectory;
use crate::error::{Error, Result};

const STATE_TOL: f64 = 1e-12;
/// Bisection stops once the bracket on a turning point is this narrow.
pub const CROSSING_TIME_TOL: f64 = 1e-10;
/// Below this the speed integral counts as "no motion".
const DEGENERATE_TOL: f64 = 1e-14;

/// 2×2 density matrix in the basis {|1⟩, |0⟩}: index 0 is the excited state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensity {
    m: [[Complex64; 2]; 2],
}

impl QubitDensity {
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let rho = QubitDensity { m };
        rho.check()?;
        Ok(rho)
    }

    pub fn excited() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        QubitDensity { m: [[o, z], [z, z]] }
    }

    pub fn ground() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        QubitDensity { m: [[z, z], [z, o]] }
    }

    /// |ψ⟩⟨ψ| for ψ = `excited`|1⟩ + `ground`|0⟩, normalised.
    pub fn pure(excited: Complex64, ground: Complex64) -> Result<Self> {
        let norm = (excited.norm_sqr() + ground.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let (e, g) = (excited / norm, ground / norm);
        Ok(QubitDensity {
            m: [[e * e.conj(), e * g.conj()], [g * e.conj(), g * g.conj()]],
        })
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.m
    }

    pub fn excited_population(&self) -> f64 {
        self.m[0][0].re
    }

    /// Hermitian, unit trace and positive semidefinite, each to 1e-12.
    pub fn check(&self) -> Result<()> {
        let m = &self.m;
        if m.iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        if m[0][0].im.abs() > STATE_TOL
            || m[1][1].im.abs() > STATE_TOL
            || (m[0][1] - m[1][0].conj()).norm() > STATE_TOL
        {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let trace = m[0][0].re + m[1][1].re;
        if (trace - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} != 1")));
        }
        let (lo, _) = self.eigenvalues();
        if lo < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo}")));
        }
        Ok(())
    }

    /// Eigenvalues (ascending) of the Hermitian part.
    pub fn eigenvalues(&self) -> (f64, f64) {
        hermitian_eigenvalues(self.m[0][0].re, self.m[1][1].re, self.m[1][0])
    }
}

fn hermitian_eigenvalues(d0: f64, d1: f64, off: Complex64) -> (f64, f64) {
    let mean = 0.5 * (d0 + d1);
    let half_gap = (0.25 * (d0 - d1).powi(2) + off.norm_sqr()).sqrt();
    (mean - half_gap, mean + half_gap)
}

/// Image of `rho0` under the amplitude-damping channel with amplitude `a`.
pub fn reduced_state(a: Complex64, rho0: &QubitDensity) -> Result<QubitDensity> {
    rho0.check()?;
    if !(a.norm() <= 1.0 + STATE_TOL) {
        return Err(Error::InvalidState(format!("|a| = {} exceeds 1", a.norm())));
    }
    let m = &rho0.m;
    let pop = a.norm_sqr();
    let excited = m[0][0].re * pop;
    Ok(QubitDensity {
        m: [
            [Complex64::new(excited, 0.0), m[0][1] * a.conj()],
            [m[1][0] * a, Complex64::new(m[1][1].re + m[0][0].re - excited, 0.0)],
        ],
    })
}

/// ½‖r1 − r2‖₁.
pub fn trace_distance(r1: &QubitDensity, r2: &QubitDensity) -> f64 {
    let d0 = r1.m[0][0].re - r2.m[0][0].re;
    let d1 = r1.m[1][1].re - r2.m[1][1].re;
    let off = r1.m[1][0] - r2.m[1][0];
    let (lo, hi) = hermitian_eigenvalues(d0, d1, off);
    0.5 * (lo.abs() + hi.abs())
}

/// Largest singular value of ρ̇(t) for the channel image of `rho0`, given the
/// amplitude and its rate.
///
/// ρ̇ is traceless and Hermitian with diagonal ±ρ₁₁(0) d|a|²/dt and
/// coherence ρ₁₀(0) ȧ, so its singular values coincide.
pub fn rho_dot_operator_norm(a: Complex64, a_rate: Complex64, rho0: &QubitDensity) -> f64 {
    let pop_rate = 2.0 * (a.conj() * a_rate).re;
    let diag = rho0.m[0][0].re * pop_rate;
    let off = rho0.m[1][0] * a_rate;
    (diag * diag + off.norm_sqr()).sqrt()
}

/// Turning points of |a(t)| and the rises between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backflow {
    /// Times where ∂t|a| changes sign, ascending.
    pub crossing_times: Vec<f64>,
    /// Σ over rising stretches of the increase in |a|.
    pub amplitude: f64,
    /// Σ over rising stretches of the increase in |a|².
    pub population: f64,
}

/// Sign of ∂t|a|, carried by ½ d|a|²/dt = Re(a* ȧ) so it stays defined at
/// zeros of a.
fn rate_sign_value(a: Complex64, a_rate: Complex64) -> f64 {
    (a.conj() * a_rate).re
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Locates the sign change of Re(a* ȧ) inside grid interval `k`.
fn bisect_turning_point(traj: &AmplitudeTrajectory, k: usize, left_sign: i8) -> f64 {
    let (mut lo, mut hi) = (traj.times[k], traj.times[k + 1]);
    while hi - lo > CROSSING_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v, r) = traj.qubit_in_interval(k, mid);
        let s = sign(rate_sign_value(v, r));
        if s == left_sign {
            lo = mid;
        } else if s == 0 {
            return mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds every turning point of |a(t)| on the trajectory and sums the rises.
///
/// Signs of ∂t|a| are read at grid points from the analytic rate; each sign
/// change is refined by bisection on the interpolated amplitude. A trajectory
/// whose rate is nowhere positive on the grid has zero backflow exactly.
pub fn backflow(traj: &AmplitudeTrajectory) -> Backflow {
    let n = traj.len();
    let signs: Vec<i8> = traj
        .jets
        .iter()
        .map(|j| sign(rate_sign_value(j.value, j.rate)))
        .collect();

    // breakpoints (time, amplitude) separating monotone stretches
    let mut points: Vec<(f64, Complex64)> = vec![(traj.times[0], traj.jets[0].value)];
    let mut crossing_times = Vec::new();
    let mut direction: i8 = 0;
    let mut first_direction: i8 = 0;
    let mut last_nonzero = 0usize;

    for k in 0..n {
        let s = signs[k];
        if s == 0 {
            continue;
        }
        if direction == 0 {
            direction = s;
            first_direction = s;
        } else if s != direction {
            let (t, a) = if k == last_nonzero + 1 {
                let t = bisect_turning_point(traj, last_nonzero, direction);
                (t, traj.qubit_in_interval(last_nonzero, t).0)
            } else {
                // rate vanished exactly on the grid in between
                let j = last_nonzero + 1;
                (traj.times[j], traj.jets[j].value)
            };
            crossing_times.push(t);
            points.push((t, a));
            direction = s;
        }
        last_nonzero = k;
    }
    points.push((traj.times[n - 1], traj.jets[n - 1].value));

    let mut amplitude = 0.0;
    let mut population = 0.0;
    if first_direction != 0 {
        let mut rising = first_direction > 0;
        for w in points.windows(2) {
            if rising {
                let (a0, a1) = (w[0].1, w[1].1);
                amplitude += (a1.norm() - a0.norm()).max(0.0);
                population += (a1.norm_sqr() - a0.norm_sqr()).max(0.0);
            }
            rising = !rising;
        }
    }

    Backflow {
        crossing_times,
        amplitude,
        population,
    }
}

/// Non-Markovianity N: total rise of |a(t)| over the trajectory.
pub fn non_markovianity(traj: &AmplitudeTrajectory) -> f64 {
    backflow(traj).amplitude
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// ∫₀^τ ‖ρ̇(t)‖∞ dt by Gauss–Legendre quadrature on each grid interval, split
/// at the turning points where the integrand has a kink.
pub fn speed_integral(traj: &AmplitudeTrajectory, rho0: &QubitDensity, crossings: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut next = 0usize;
    let mut cuts = Vec::new();
    for k in 0..traj.len() - 1 {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        cuts.clear();
        cuts.push(t0);
        while next < crossings.len() && crossings[next] <= t1 {
            if crossings[next] > t0 && crossings[next] < t1 {
                cuts.push(crossings[next]);
            }
            next += 1;
        }
        cuts.push(t1);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let (v, r) = traj.qubit_in_interval(k, mid + half * x);
                total += wt * half * rho_dot_operator_norm(v, r, rho0);
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QslRatio {
    /// τ_QSL/τ in [0, 1].
    pub ratio: f64,
    /// Set when the state did not move (0/0); the ratio is then 0.
    pub degenerate: bool,
}

/// τ_QSL/τ from the Bures angle between |1⟩⟨1| and ρ(τ) and the time-averaged
/// operator norm of ρ̇.
pub fn qsl_general(traj: &AmplitudeTrajectory) -> QslRatio {
    let crossings = backflow(traj).crossing_times;
    qsl_general_with(traj, &crossings)
}

fn qsl_general_with(traj: &AmplitudeTrajectory, crossings: &[f64]) -> QslRatio {
    let rho0 = QubitDensity::excited();
    let a_tau = traj.jets[traj.len() - 1].value;
    let rho_tau = reduced_state(a_tau, &rho0).expect("trajectory amplitude is bounded by 1");
    let fidelity = rho_tau.excited_population().clamp(0.0, 1.0);
    let bures = fidelity.sqrt().acos();
    let numerator = bures.sin().powi(2);
    // τ_QSL/τ = sin²B / (τ Λ) with τ Λ = ∫ ‖ρ̇‖∞ dt
    let denominator = speed_integral(traj, &rho0, crossings);
    ratio_or_degenerate(numerator, denominator)
}

fn ratio_or_degenerate(numerator: f64, denominator: f64) -> QslRatio {
    if denominator <= DEGENERATE_TOL {
        QslRatio {
            ratio: 0.0,
            degenerate: true,
        }
    } else {
        QslRatio {
            ratio: (numerator / denominator).clamp(0.0, 1.0),
            degenerate: false,
        }
    }
}

/// (1 − |a(τ)|²) / (2 Ñ + 1 − |a(τ)|²) with Ñ the population backflow.
pub fn qsl_closed_form_value(survival_tau: f64, population_backflow: f64) -> QslRatio {
    let lost = 1.0 - survival_tau * survival_tau;
    ratio_or_degenerate(lost, 2.0 * population_backflow + lost)
}

pub fn qsl_closed_form(traj: &AmplitudeTrajectory) -> QslRatio {
    qsl_closed_form_value(traj.survival_tau(), backflow(traj).population)
}

/// Everything measured on one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    /// N(Φ): rises of |a(t)| (trace distance of the optimal pair).
    pub n_blp: f64,
    /// Ñ: rises of |a(t)|², the backflow entering the closed-form QSL ratio.
    pub n_population: f64,
    pub qsl_ratio_general: f64,
    pub qsl_ratio_closed: f64,
    pub survival_tau: f64,
    pub crossing_times: Vec<f64>,
    /// The qubit never left |1⟩; both QSL ratios are reported as 0.
    pub degenerate: bool,
}

pub fn measure(traj: &AmplitudeTrajectory) -> MeasureReport {
    let flow = backflow(traj);
    let general = qsl_general_with(traj, &flow.crossing_times);
    let closed = qsl_closed_form_value(traj.survival_tau(), flow.population);
    MeasureReport {
        n_blp: flow.amplitude,
        n_population: flow.population,
        qsl_ratio_general: general.ratio,
        qsl_ratio_closed: closed.ratio,
        survival_tau: traj.survival_tau(),
        crossing_times: flow.crossing_times,
        degenerate: general.degenerate || closed.degenerate,
    }
}
