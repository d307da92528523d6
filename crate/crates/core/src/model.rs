//! Parameter space of the qubit + hierarchical-cavity model and the constant
//! generator of its single-excitation amplitude dynamics.
//!
//! All rates are in units of the first-layer loss rate Γ₀ and times in units
//! of 1/Γ₀. Every cavity is resonant with the qubit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss rate of the first-layer cavity m₀. It is the unit of every rate.
pub const GAMMA0: f64 = 1.0;

/// Reservoirs attached to the second-layer cavities m₁ and m₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecondLayerEnv {
    /// Markovian reservoirs with equal loss rate Γ₁ = Γ₂ = `gamma`.
    Memoryless { gamma: f64 },
    /// Lorentzian reservoirs with coupling Υₙ and inverse correlation time λₙ.
    MemoryKeeping {
        upsilon1: f64,
        upsilon2: f64,
        lambda1: f64,
        lambda2: f64,
    },
}

impl SecondLayerEnv {
    pub fn name(&self) -> &'static str {
        match self {
            SecondLayerEnv::Memoryless { .. } => "memoryless",
            SecondLayerEnv::MemoryKeeping { .. } => "memory_keeping",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Qubit ↔ m₀ coupling κ₀.
    pub kappa0: f64,
    /// m₀ ↔ m₁ and m₀ ↔ m₂ coupling κ.
    pub kappa: f64,
    /// m₁ ↔ m₂ coupling Ω.
    pub omega_c: f64,
    pub env: SecondLayerEnv,
    /// Evolution horizon Γ₀τ.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    Weak,
    Strong,
    Boundary,
}

/// Parameters that can be scanned in sweeps and crossover searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    Kappa,
    OmegaC,
    Kappa0,
}

impl ScanParameter {
    pub fn name(&self) -> &'static str {
        match self {
            ScanParameter::Kappa => "kappa",
            ScanParameter::OmegaC => "omega_c",
            ScanParameter::Kappa0 => "kappa0",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kappa" => Ok(ScanParameter::Kappa),
            "omega_c" => Ok(ScanParameter::OmegaC),
            "kappa0" => Ok(ScanParameter::Kappa0),
            other => Err(Error::Config(format!(
                "unknown scan parameter `{other}` (expected kappa, omega_c or kappa0)"
            ))),
        }
    }
}

impl ModelParams {
    /// Memoryless second layer with Γ = `gamma`.
    pub fn memoryless(kappa0: f64, kappa: f64, omega_c: f64, gamma: f64, tau: f64) -> Self {
        ModelParams {
            kappa0,
            kappa,
            omega_c,
            env: SecondLayerEnv::Memoryless { gamma },
            tau,
        }
    }

    /// Symmetric Lorentzian second layer (Υ₁ = Υ₂, λ₁ = λ₂).
    pub fn memory_keeping(
        kappa0: f64,
        kappa: f64,
        omega_c: f64,
        upsilon: f64,
        lambda: f64,
        tau: f64,
    ) -> Self {
        ModelParams {
            kappa0,
            kappa,
            omega_c,
            env: SecondLayerEnv::MemoryKeeping {
                upsilon1: upsilon,
                upsilon2: upsilon,
                lambda1: lambda,
                lambda2: lambda,
            },
            tau,
        }
    }

    pub fn with(mut self, parameter: ScanParameter, value: f64) -> Self {
        match parameter {
            ScanParameter::Kappa => self.kappa = value,
            ScanParameter::OmegaC => self.omega_c = value,
            ScanParameter::Kappa0 => self.kappa0 = value,
        }
        self
    }

    pub fn get(&self, parameter: ScanParameter) -> f64 {
        match parameter {
            ScanParameter::Kappa => self.kappa,
            ScanParameter::OmegaC => self.omega_c,
            ScanParameter::Kappa0 => self.kappa0,
        }
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::NonPhysicalParameter { field, value })
    }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPhysicalParameter { field, value })
    }
}

/// Returns the parameters unchanged if every rate is physical.
pub fn validate(params: ModelParams) -> Result<ModelParams> {
    non_negative("kappa0", params.kappa0)?;
    non_negative("kappa", params.kappa)?;
    non_negative("omega_c", params.omega_c)?;
    positive("tau", params.tau)?;
    match params.env {
        SecondLayerEnv::Memoryless { gamma } => non_negative("gamma", gamma)?,
        SecondLayerEnv::MemoryKeeping {
            upsilon1,
            upsilon2,
            lambda1,
            lambda2,
        } => {
            non_negative("upsilon1", upsilon1)?;
            non_negative("upsilon2", upsilon2)?;
            positive("lambda1", lambda1)?;
            positive("lambda2", lambda2)?;
        }
    }
    Ok(params)
}

/// Weak iff κ₀ < Γ₀/4, strong iff κ₀ > Γ₀/4.
pub fn classify_regime(params: &ModelParams) -> RegimeLabel {
    let threshold = GAMMA0 / 4.0;
    if params.kappa0 < threshold {
        RegimeLabel::Weak
    } else if params.kappa0 > threshold {
        RegimeLabel::Strong
    } else {
        RegimeLabel::Boundary
    }
}

/// Constant matrix `M` of the linear system ẋ = M x.
///
/// Basis `(a, c₀, c₁, c₂)` for the memoryless second layer and
/// `(h, c₀, c₁, c₂, z₁, z₂)` for the memory-keeping one, where
/// zₙ(t) = ∫₀ᵗ fₙ(t − s) cₙ(s) ds is the reservoir memory term with the
/// Lorentzian correlation function fₙ(t) = ½ Υₙ λₙ e^{−λₙ|t|}.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    entries: DMatrix<Complex64>,
    basis_labels: Vec<&'static str>,
    kappa0: f64,
    kappa: f64,
}

pub const MEMORYLESS_BASIS: [&str; 4] = ["a", "c0", "c1", "c2"];
pub const MEMORY_KEEPING_BASIS: [&str; 6] = ["h", "c0", "c1", "c2", "z1", "z2"];

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn basis_labels(&self) -> &[&'static str] {
        &self.basis_labels
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// x(0) = (1, 0, …, 0): qubit excited, every cavity empty.
    pub fn initial_state(&self) -> DVector<Complex64> {
        let mut x = DVector::zeros(self.dim());
        x[0] = Complex64::new(1.0, 0.0);
        x
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        &self.entries * x
    }

    /// Same generator with the memory rows and columns removed from the
    /// dynamics (zₙ ≡ 0). Identity on memoryless generators.
    pub fn without_memory(&self) -> GeneratorMatrix {
        let mut out = self.clone();
        if self.dim() == 6 {
            for k in 0..6 {
                for n in 4..6 {
                    out.entries[(n, k)] = Complex64::new(0.0, 0.0);
                    out.entries[(k, n)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    /// Qubit amplitude derivative ȧ = −iκ₀ c₀ and second derivative
    /// ä = −iκ₀ ċ₀ from the tracked amplitudes `(a, c₀, c₁, c₂)`.
    ///
    /// Neither depends on the second-layer reservoir, so the same jet applies to
    /// both environment variants.
    pub fn qubit_jet(&self, a: Complex64, c0: Complex64, c1: Complex64, c2: Complex64) -> QubitJet {
        qubit_jet(self.kappa0, self.kappa, a, c0, c1, c2)
    }
}

/// Qubit amplitude with its first two time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitJet {
    pub value: Complex64,
    pub rate: Complex64,
    pub accel: Complex64,
}

pub(crate) fn qubit_jet(
    kappa0: f64,
    kappa: f64,
    a: Complex64,
    c0: Complex64,
    c1: Complex64,
    c2: Complex64,
) -> QubitJet {
    let i = Complex64::i();
    let c0_rate = -0.5 * GAMMA0 * c0 - i * kappa0 * a - i * kappa * (c1 + c2);
    QubitJet {
        value: a,
        rate: -i * kappa0 * c0,
        accel: -i * kappa0 * c0_rate,
    }
}

/// Builds `M` for validated parameters.
pub fn build_generator(params: &ModelParams) -> GeneratorMatrix {
    let i = Complex64::i();
    let re = |v: f64| Complex64::new(v, 0.0);
    let (k0, k, w) = (params.kappa0, params.kappa, params.omega_c);

    match params.env {
        SecondLayerEnv::Memoryless { gamma } => {
            let mut m = DMatrix::zeros(4, 4);
            m[(0, 1)] = -i * k0;

            m[(1, 0)] = -i * k0;
            m[(1, 1)] = re(-0.5 * GAMMA0);
            m[(1, 2)] = -i * k;
            m[(1, 3)] = -i * k;

            m[(2, 1)] = -i * k;
            m[(2, 2)] = re(-0.5 * gamma);
            m[(2, 3)] = -i * w;

            m[(3, 1)] = -i * k;
            m[(3, 2)] = -i * w;
            m[(3, 3)] = re(-0.5 * gamma);

            GeneratorMatrix {
                entries: m,
                basis_labels: MEMORYLESS_BASIS.to_vec(),
                kappa0: k0,
                kappa: k,
            }
        }
        SecondLayerEnv::MemoryKeeping {
            upsilon1,
            upsilon2,
            lambda1,
            lambda2,
        } => {
            let mut m = DMatrix::zeros(6, 6);
            m[(0, 1)] = -i * k0;

            m[(1, 0)] = -i * k0;
            m[(1, 1)] = re(-0.5 * GAMMA0);
            m[(1, 2)] = -i * k;
            m[(1, 3)] = -i * k;

            m[(2, 1)] = -i * k;
            m[(2, 3)] = -i * w;
            m[(2, 4)] = re(-1.0);

            m[(3, 1)] = -i * k;
            m[(3, 2)] = -i * w;
            m[(3, 5)] = re(-1.0);

            // żₙ = fₙ(0) cₙ − λₙ zₙ
            m[(4, 2)] = re(0.5 * upsilon1 * lambda1);
            m[(4, 4)] = re(-lambda1);
            m[(5, 3)] = re(0.5 * upsilon2 * lambda2);
            m[(5, 5)] = re(-lambda2);

            GeneratorMatrix {
                entries: m,
                basis_labels: MEMORY_KEEPING_BASIS.to_vec(),
                kappa0: k0,
                kappa: k,
            }
        }
    }
}

/// Lorentzian reservoir correlation function fₙ(t) = ½ Υ λ e^{−λ|t|}.
pub fn lorentzian_kernel(upsilon: f64, lambda: f64, t: f64) -> f64 {
    0.5 * upsilon * lambda * (-lambda * t.abs()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::memoryless(0.2, 1.0, 0.5, 1.0, 4.0)
    }

    #[test]
    fn validate_accepts_reference_params() {
        let p = reference();
        assert_eq!(validate(p).unwrap(), p);
    }

    #[test]
    fn validate_names_offending_field() {
        let p = ModelParams {
            kappa0: -0.1,
            ..reference()
        };
        match validate(p) {
            Err(Error::NonPhysicalParameter { field, .. }) => assert_eq!(field, "kappa0"),
            other => panic!("unexpected {other:?}"),
        }

        let p = ModelParams {
            env: SecondLayerEnv::MemoryKeeping {
                upsilon1: 1.0,
                upsilon2: 1.0,
                lambda1: 0.0,
                lambda2: 0.1,
            },
            ..reference()
        };
        match validate(p) {
            Err(Error::NonPhysicalParameter { field, .. }) => assert_eq!(field, "lambda1"),
            other => panic!("unexpected {other:?}"),
        }

        for (p, name) in [
            (ModelParams { tau: 0.0, ..reference() }, "tau"),
            (ModelParams { kappa: -1.0, ..reference() }, "kappa"),
            (ModelParams { omega_c: f64::NAN, ..reference() }, "omega_c"),
            (ModelParams::memoryless(0.2, 1.0, 0.5, -1.0, 4.0), "gamma"),
        ] {
            match validate(p) {
                Err(Error::NonPhysicalParameter { field, .. }) => assert_eq!(field, name),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn regime_threshold() {
        let at = |k0| classify_regime(&ModelParams { kappa0: k0, ..reference() });
        assert_eq!(at(0.2), RegimeLabel::Weak);
        assert_eq!(at(0.25), RegimeLabel::Boundary);
        assert_eq!(at(0.5), RegimeLabel::Strong);
    }

    #[test]
    fn zero_coupling_block_structure() {
        let g = build_generator(&ModelParams::memoryless(0.2, 0.0, 0.0, 1.0, 4.0));
        let i = Complex64::i();
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(g.entry(0, 1), -i * 0.2);
        assert_eq!(g.entry(1, 0), -i * 0.2);
        assert_eq!(g.entry(1, 1), Complex64::new(-0.5, 0.0));
        for (r, c) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (2, 3), (3, 0), (3, 1), (3, 2)] {
            assert_eq!(g.entry(r, c), z, "({r},{c})");
        }
        assert_eq!(g.entry(2, 2), Complex64::new(-0.5, 0.0));
        assert_eq!(g.entry(3, 3), Complex64::new(-0.5, 0.0));
    }

    #[test]
    fn no_direct_qubit_decay() {
        for p in [reference(), ModelParams::memoryless(0.7, 2.5, 3.0, 0.3, 1.0)] {
            assert_eq!(build_generator(&p).entry(0, 0), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn memory_row_coefficients() {
        let p = ModelParams {
            env: SecondLayerEnv::MemoryKeeping {
                upsilon1: 1.0,
                upsilon2: 1.0,
                lambda1: 0.1,
                lambda2: 0.1,
            },
            ..reference()
        };
        let g = build_generator(&p);
        assert_eq!(g.dim(), 6);
        assert!((g.entry(4, 2).re - 0.05).abs() < 1e-15);
        assert!((g.entry(4, 4).re + 0.1).abs() < 1e-15);
        for c in [0, 1, 3, 5] {
            assert_eq!(g.entry(4, c), Complex64::new(0.0, 0.0));
        }
        assert_eq!(g.basis_labels(), &MEMORY_KEEPING_BASIS);
    }

    #[test]
    fn memoryless_diagonal_is_loss() {
        let g = build_generator(&ModelParams::memoryless(0.2, 1.3, 0.4, 0.7, 4.0));
        let expected = [0.0, -0.5, -0.35, -0.35];
        for (k, e) in expected.iter().enumerate() {
            assert!(g.entry(k, k).re <= 0.0);
            assert!((g.entry(k, k).re - e).abs() < 1e-15);
            assert_eq!(g.entry(k, k).im, 0.0);
        }
    }

    #[test]
    fn swapping_second_layer_is_a_similarity() {
        let p = ModelParams {
            kappa0: 0.2,
            kappa: 1.7,
            omega_c: 0.9,
            env: SecondLayerEnv::MemoryKeeping {
                upsilon1: 1.0,
                upsilon2: 0.4,
                lambda1: 0.1,
                lambda2: 2.0,
            },
            tau: 4.0,
        };
        let swapped = ModelParams {
            env: SecondLayerEnv::MemoryKeeping {
                upsilon1: 0.4,
                upsilon2: 1.0,
                lambda1: 2.0,
                lambda2: 0.1,
            },
            ..p
        };
        let perm = [0usize, 1, 3, 2, 5, 4];
        let m = build_generator(&p);
        let ms = build_generator(&swapped);
        for r in 0..6 {
            for c in 0..6 {
                assert_eq!(m.entry(perm[r], perm[c]), ms.entry(r, c));
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let p = ModelParams::memory_keeping(0.2, 2.0, 1.0, 1.0, 0.1, 4.0);
        assert_eq!(build_generator(&p), build_generator(&p));
    }
}
