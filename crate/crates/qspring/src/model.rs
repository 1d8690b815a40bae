//! Quadratic open-system models: a Hamiltonian matrix over quadratures plus
//! linear Lindblad channels, compiled to the drift and diffusion matrices
//! that drive the Gaussian moment equations.
//!
//! Quadratures are ordered r = (X₁, P₁, X₂, P₂, …) with X = (a + a†)/√2,
//! P = −i(a − a†)/√2 and [X, P] = i. The Hamiltonian is H = ½·rᵀMr with M
//! symmetric. Each jump operator is L = √rate·(cᵀr) with a complex
//! coefficient vector c over the quadratures. First and second moments obey
//!
//!   d⟨r⟩/dt = A⟨r⟩,  dσ/dt = Aσ + σAᵀ + D,
//!
//! with A = Ω(M + Im C†C), D = Ω·(Re C†C)·Ωᵀ, where the rows of C are
//! √rate_k·c_kᵀ and Ω is the symplectic form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("jump {index}: rate must be non-negative (got {rate})")]
    NegativeRate { index: usize, rate: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model json: {0}")]
    Json(String),
}

/// One linear Lindblad channel L = √rate·(coeffᵀ·r).
#[derive(Debug, Clone)]
pub struct Jump {
    pub coeff: Vec<Complex64>,
    pub rate: f64,
}

impl Jump {
    pub fn new(coeff: Vec<Complex64>, rate: f64) -> Self {
        Jump { coeff, rate }
    }

    /// Channel L = √rate·a_mode.
    pub fn annihilation(mode: usize, n_modes: usize, rate: f64) -> Self {
        let mut coeff = vec![Complex64::ZERO; 2 * n_modes];
        coeff[2 * mode] = Complex64::new(SQRT_HALF, 0.0);
        coeff[2 * mode + 1] = Complex64::new(0.0, SQRT_HALF);
        Jump { coeff, rate }
    }

    /// Channel L = √rate·a†_mode.
    pub fn creation(mode: usize, n_modes: usize, rate: f64) -> Self {
        let mut coeff = vec![Complex64::ZERO; 2 * n_modes];
        coeff[2 * mode] = Complex64::new(SQRT_HALF, 0.0);
        coeff[2 * mode + 1] = Complex64::new(0.0, -SQRT_HALF);
        Jump { coeff, rate }
    }

    /// Channel L = √rate·X_mode.
    pub fn position(mode: usize, n_modes: usize, rate: f64) -> Self {
        let mut coeff = vec![Complex64::ZERO; 2 * n_modes];
        coeff[2 * mode] = Complex64::ONE;
        Jump { coeff, rate }
    }
}

/// The symplectic form Ω, block diagonal with per-mode blocks
/// [[0, 1], [−1, 0]].
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

/// Compiles a Hamiltonian matrix and jump list into drift and diffusion.
pub fn drift_diffusion(
    h_matrix: &DMatrix<f64>,
    jumps: &[Jump],
) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
    let dim = h_matrix.nrows();
    if h_matrix.ncols() != dim || dim % 2 != 0 {
        return Err(ModelError::Dimension(format!(
            "Hamiltonian matrix must be square with even size, got {}x{}",
            dim,
            h_matrix.ncols()
        )));
    }
    // C†C split into real and imaginary parts; for c = u + iv the outer
    // product c*·cᵀ has real part uuᵀ + vvᵀ and imaginary part uvᵀ − vuᵀ.
    let mut cc_re = DMatrix::<f64>::zeros(dim, dim);
    let mut cc_im = DMatrix::<f64>::zeros(dim, dim);
    for (index, jump) in jumps.iter().enumerate() {
        if jump.rate < 0.0 || !jump.rate.is_finite() {
            return Err(ModelError::NegativeRate {
                index,
                rate: jump.rate,
            });
        }
        if jump.coeff.len() != dim {
            return Err(ModelError::Dimension(format!(
                "jump {index}: coefficient vector has length {}, expected {dim}",
                jump.coeff.len()
            )));
        }
        if jump.rate == 0.0 {
            continue;
        }
        for i in 0..dim {
            for j in 0..dim {
                let (ui, vi) = (jump.coeff[i].re, jump.coeff[i].im);
                let (uj, vj) = (jump.coeff[j].re, jump.coeff[j].im);
                cc_re[(i, j)] += jump.rate * (ui * uj + vi * vj);
                cc_im[(i, j)] += jump.rate * (ui * vj - vi * uj);
            }
        }
    }
    let omega = symplectic_form(dim / 2);
    let drift = &omega * (h_matrix + &cc_im);
    let diffusion = &omega * &cc_re * omega.transpose();
    Ok((drift, diffusion))
}

/// A compiled quadratic open-system model.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub mode_labels: Vec<String>,
    pub h_matrix: DMatrix<f64>,
    pub jumps: Vec<Jump>,
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
}

impl QuadraticModel {
    pub fn new(
        mode_labels: Vec<String>,
        h_matrix: DMatrix<f64>,
        jumps: Vec<Jump>,
    ) -> Result<Self, ModelError> {
        let dim = 2 * mode_labels.len();
        if h_matrix.nrows() != dim || h_matrix.ncols() != dim {
            return Err(ModelError::Dimension(format!(
                "{} modes need a {dim}x{dim} Hamiltonian matrix, got {}x{}",
                mode_labels.len(),
                h_matrix.nrows(),
                h_matrix.ncols()
            )));
        }
        let asym = (&h_matrix - h_matrix.transpose()).abs().max();
        let scale = h_matrix.abs().max().max(1.0);
        if asym > 1e-9 * scale {
            return Err(ModelError::Dimension(
                "Hamiltonian matrix must be symmetric".into(),
            ));
        }
        let (drift, diffusion) = drift_diffusion(&h_matrix, &jumps)?;
        Ok(QuadraticModel {
            mode_labels,
            h_matrix,
            jumps,
            drift,
            diffusion,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.mode_labels.len()
    }

    /// The same model in dimensionless time t' = reference·t: the
    /// Hamiltonian matrix and every jump rate are divided by `reference`.
    /// Keeps number-basis integrations well-conditioned regardless of the
    /// input unit system.
    pub fn rescaled(&self, reference: f64) -> Result<QuadraticModel, ModelError> {
        if !(reference > 0.0) || !reference.is_finite() {
            return Err(ModelError::Dimension(format!(
                "reference frequency must be positive and finite, got {reference}"
            )));
        }
        let jumps = self
            .jumps
            .iter()
            .map(|j| Jump::new(j.coeff.clone(), j.rate / reference))
            .collect();
        QuadraticModel::new(
            self.mode_labels.clone(),
            &self.h_matrix / reference,
            jumps,
        )
    }

    /// Largest real part over the drift spectrum; negative means every
    /// moment relaxes.
    pub fn max_drift_eigenvalue_re(&self) -> f64 {
        self.drift
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Frequency of the normal mode nearest `target`: the positive
    /// imaginary part of the closest drift eigenvalue.
    pub fn mode_frequency_near(&self, target: f64) -> f64 {
        self.drift
            .clone()
            .complex_eigenvalues()
            .iter()
            .filter(|e| e.im > 0.0)
            .map(|e| e.im)
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        let doc = ModelJson {
            mode_labels: self.mode_labels.clone(),
            h_matrix: to_rows(&self.h_matrix),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpJson {
                    rate: j.rate,
                    coeff_re: j.coeff.iter().map(|c| c.re).collect(),
                    coeff_im: j.coeff.iter().map(|c| c.im).collect(),
                })
                .collect(),
            drift: to_rows(&self.drift),
            diffusion: to_rows(&self.diffusion),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    /// Parses a serialized model, recompiling drift and diffusion from the
    /// Hamiltonian and jumps rather than trusting the embedded copies.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelJson =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        let dim = 2 * doc.mode_labels.len();
        let from_rows = |rows: &Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>, ModelError> {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(ModelError::Json(format!("{what}: expected {dim}x{dim}")));
            }
            Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
        };
        let h_matrix = from_rows(&doc.h_matrix, "h_matrix")?;
        let mut jumps = Vec::with_capacity(doc.jumps.len());
        for (i, j) in doc.jumps.iter().enumerate() {
            if j.coeff_re.len() != dim || j.coeff_im.len() != dim {
                return Err(ModelError::Json(format!(
                    "jump {i}: coefficient vectors must have length {dim}"
                )));
            }
            let coeff = j
                .coeff_re
                .iter()
                .zip(&j.coeff_im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
            jumps.push(Jump::new(coeff, j.rate));
        }
        QuadraticModel::new(doc.mode_labels, h_matrix, jumps)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    mode_labels: Vec<String>,
    h_matrix: Vec<Vec<f64>>,
    jumps: Vec<JumpJson>,
    drift: Vec<Vec<f64>>,
    diffusion: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct JumpJson {
    rate: f64,
    coeff_re: Vec<f64>,
    coeff_im: Vec<f64>,
}

fn push_if_active(jumps: &mut Vec<Jump>, jump: Jump) {
    if jump.rate > 0.0 {
        jumps.push(jump);
    }
}

/// The two-mode model after adiabatic elimination of the cavity: atom and
/// membrane oscillators coupled by −2G·X_at·X_m, dressed by the four
/// cavity-induced collective channels, atomic momentum diffusion, and the
/// membrane thermal bath.
///
/// The collective operators are J_± = cosφ·a_m ± sinφ·a_at; the channel
/// rates follow the sideband asymmetry: Γ_c⁺ on J₊ and J₋†, Γ_c⁻ on J₊†
/// and J₋. Channels with zero rate are omitted.
#[allow(clippy::too_many_arguments)]
pub fn build_effective_model(
    g_eff: f64,
    omega_at: f64,
    omega_m: f64,
    gamma_c_plus: f64,
    gamma_c_minus: f64,
    phi: f64,
    gamma_at: f64,
    gamma_m: f64,
    n_bar: f64,
) -> Result<QuadraticModel, ModelError> {
    let labels = vec!["atom".to_string(), "membrane".to_string()];
    let mut h = DMatrix::zeros(4, 4);
    h[(0, 0)] = omega_at;
    h[(1, 1)] = omega_at;
    h[(2, 2)] = omega_m;
    h[(3, 3)] = omega_m;
    h[(0, 2)] = -2.0 * g_eff;
    h[(2, 0)] = -2.0 * g_eff;

    let (sin_phi, cos_phi) = phi.sin_cos();
    let collective = |sign: f64| -> Vec<Complex64> {
        let a_at = Jump::annihilation(0, 2, 1.0).coeff;
        let a_m = Jump::annihilation(1, 2, 1.0).coeff;
        (0..4)
            .map(|i| cos_phi * a_m[i] + sign * sin_phi * a_at[i])
            .collect()
    };
    let conj = |c: &[Complex64]| -> Vec<Complex64> { c.iter().map(|z| z.conj()).collect() };
    let j_plus = collective(1.0);
    let j_minus = collective(-1.0);

    let mut jumps = Vec::new();
    push_if_active(&mut jumps, Jump::new(j_plus.clone(), gamma_c_plus));
    push_if_active(&mut jumps, Jump::new(conj(&j_plus), gamma_c_minus));
    push_if_active(&mut jumps, Jump::new(j_minus.clone(), gamma_c_minus));
    push_if_active(&mut jumps, Jump::new(conj(&j_minus), gamma_c_plus));
    push_if_active(&mut jumps, Jump::position(0, 2, 2.0 * gamma_at));
    push_if_active(&mut jumps, Jump::annihilation(1, 2, gamma_m * (n_bar + 1.0)));
    push_if_active(&mut jumps, Jump::creation(1, 2, gamma_m * n_bar));
    QuadraticModel::new(labels, h, jumps)
}

/// The four-mode model with the two cavity modes kept explicitly, in the
/// rotating frame of the drive lasers: mode 1 at +Δ, mode 2 at −Δ. The atom
/// couples to the antisymmetric cavity quadrature, the membrane to the
/// symmetric one.
#[allow(clippy::too_many_arguments)]
pub fn build_full_model(
    omega_at: f64,
    omega_m: f64,
    delta: f64,
    kappa: f64,
    g_atc: f64,
    g_mc: f64,
    gamma_at: f64,
    gamma_m: f64,
    n_bar: f64,
) -> Result<QuadraticModel, ModelError> {
    let labels = vec![
        "atom".to_string(),
        "membrane".to_string(),
        "cavity1".to_string(),
        "cavity2".to_string(),
    ];
    let mut h = DMatrix::zeros(8, 8);
    for (mode, freq) in [(0usize, omega_at), (1, omega_m), (2, delta), (3, -delta)] {
        h[(2 * mode, 2 * mode)] = freq;
        h[(2 * mode + 1, 2 * mode + 1)] = freq;
    }
    // H_at-c = 2·g_atc·X_at·(X₁ − X₂)
    for (col, sign) in [(4usize, 1.0), (6, -1.0)] {
        h[(0, col)] = 2.0 * g_atc * sign;
        h[(col, 0)] = 2.0 * g_atc * sign;
    }
    // H_m-c = 2·g_mc·X_m·(X₁ + X₂)
    for col in [4usize, 6] {
        h[(2, col)] = 2.0 * g_mc;
        h[(col, 2)] = 2.0 * g_mc;
    }

    let mut jumps = Vec::new();
    push_if_active(&mut jumps, Jump::annihilation(2, 4, 2.0 * kappa));
    push_if_active(&mut jumps, Jump::annihilation(3, 4, 2.0 * kappa));
    push_if_active(&mut jumps, Jump::position(0, 4, 2.0 * gamma_at));
    push_if_active(&mut jumps, Jump::annihilation(1, 4, gamma_m * (n_bar + 1.0)));
    push_if_active(&mut jumps, Jump::creation(1, 4, gamma_m * n_bar));
    QuadraticModel::new(labels, h, jumps)
}
