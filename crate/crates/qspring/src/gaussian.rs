//! Gaussian-state engine: first and second moments evolved under a
//! [`QuadraticModel`](crate::model::QuadraticModel), steady states by
//! Lyapunov solve, and state diagnostics (squeezing, fidelity, Wigner
//! function, uncertainty check).
//!
//! Covariances use σ_ij = ½⟨r_i r_j + r_j r_i⟩ − ⟨r_i⟩⟨r_j⟩ so the vacuum
//! variance is ½ per quadrature. Squeezing in dB is −10·log₁₀(2·λ_min)
//! with λ_min the smallest eigenvalue of the mode's 2×2 covariance block.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{symplectic_form, QuadraticModel};
use crate::numeric::hermitian_min_eig;

/// Relative tolerance on the final covariance used by the step-halving
/// control in [`evolve`].
const STEP_TOL: f64 = 1e-8;
/// Covariance magnitude beyond which the integrator declares divergence.
const DIVERGENCE_LIMIT: f64 = 1e6;
const MAX_HALVINGS: u32 = 14;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("model is not stable: drift eigenvalue with Re = {max_re:.6e}")]
    Unstable { max_re: f64 },
    #[error("covariance diverged at t = {t:.6e} (max |σ| = {max_abs:.3e})")]
    Diverged { t: f64, max_abs: f64 },
    #[error("integrator did not reach tolerance {tol:.1e} (residual {residual:.3e})")]
    NoConvergence { tol: f64, residual: f64 },
    #[error("{0}")]
    Dimension(String),
    #[error("singular matrix: {0}")]
    Singular(String),
}

/// Mean vector and covariance matrix over the quadratures of `mode_labels`.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mode_labels: Vec<String>,
}

/// Initial single-mode states for [`make_state`].
#[derive(Debug, Clone, Copy)]
pub enum StateKind {
    Vacuum,
    Thermal { n_bar: f64 },
    /// `db` decibels of squeezing of the quadrature at `angle` (radians
    /// from X); the conjugate quadrature is stretched to keep the state
    /// pure.
    Squeezed { db: f64, angle: f64 },
}

/// Builds a product state, one [`StateKind`] per mode.
pub fn make_state(modes: &[(&str, StateKind)]) -> GaussianState {
    let n = modes.len();
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    let mut labels = Vec::with_capacity(n);
    for (m, (label, kind)) in modes.iter().enumerate() {
        labels.push(label.to_string());
        let block = match kind {
            StateKind::Vacuum => DMatrix::identity(2, 2) * 0.5,
            StateKind::Thermal { n_bar } => DMatrix::identity(2, 2) * (n_bar + 0.5),
            StateKind::Squeezed { db, angle } => {
                let v_min = 0.5 * 10f64.powf(-db / 10.0);
                let v_max = 0.25 / v_min;
                let d = DMatrix::from_diagonal(&DVector::from_vec(vec![v_min, v_max]));
                let r = rotation_2x2(*angle);
                r.transpose() * d * r
            }
        };
        cov.view_mut((2 * m, 2 * m), (2, 2)).copy_from(&block);
    }
    GaussianState {
        mean: DVector::zeros(2 * n),
        cov,
        mode_labels: labels,
    }
}

/// Phase-space rotation for a → e^{−iθ}a: X' = cosθ·X + sinθ·P,
/// P' = −sinθ·X + cosθ·P.
fn rotation_2x2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

impl GaussianState {
    pub fn n_modes(&self) -> usize {
        self.mode_labels.len()
    }

    /// Keeps only `modes` (partial trace over the rest).
    pub fn reduce(&self, modes: &[usize]) -> GaussianState {
        let n = modes.len();
        let mut mean = DVector::zeros(2 * n);
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        let mut labels = Vec::with_capacity(n);
        for (a, &ma) in modes.iter().enumerate() {
            labels.push(self.mode_labels[ma].clone());
            for q in 0..2 {
                mean[2 * a + q] = self.mean[2 * ma + q];
            }
            for (b, &mb) in modes.iter().enumerate() {
                for qa in 0..2 {
                    for qb in 0..2 {
                        cov[(2 * a + qa, 2 * b + qb)] = self.cov[(2 * ma + qa, 2 * mb + qb)];
                    }
                }
            }
        }
        GaussianState {
            mean,
            cov,
            mode_labels: labels,
        }
    }

    /// Applies the phase-space rotation a → e^{−iθ}a to one mode.
    pub fn rotate_mode(&self, mode: usize, theta: f64) -> GaussianState {
        let n = self.n_modes();
        let mut full = DMatrix::identity(2 * n, 2 * n);
        full.view_mut((2 * mode, 2 * mode), (2, 2))
            .copy_from(&rotation_2x2(theta));
        GaussianState {
            mean: &full * &self.mean,
            cov: &full * &self.cov * full.transpose(),
            mode_labels: self.mode_labels.clone(),
        }
    }

    /// Smallest covariance eigenvalue of one mode.
    pub fn min_variance(&self, mode: usize) -> f64 {
        let block = self.cov.view((2 * mode, 2 * mode), (2, 2)).into_owned();
        let sym = (&block + block.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    /// Squeezing of one mode in dB relative to vacuum, −10·log₁₀(2λ_min);
    /// positive when squeezed below the vacuum variance.
    pub fn squeezing_db(&self, mode: usize) -> f64 {
        -10.0 * (2.0 * self.min_variance(mode)).log10()
    }

    /// Purity tr(ρ²) = 1/(2^N·√det σ).
    pub fn purity(&self) -> f64 {
        let det = self.cov.determinant();
        1.0 / (2f64.powi(self.n_modes() as i32) * det.sqrt())
    }

    /// Smallest eigenvalue of the uncertainty matrix σ + (i/2)Ω; a
    /// physical state has it non-negative (up to numerical error).
    pub fn uncertainty_min_eig(&self) -> f64 {
        let omega = symplectic_form(self.n_modes());
        hermitian_min_eig(&self.cov, &(omega * 0.5))
    }
}

/// Uniformly sampled moment trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
}

impl Trajectory {
    pub fn last(&self) -> &GaussianState {
        self.states.last().expect("trajectory is never empty")
    }
}

struct Moments {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn rhs(model: &QuadraticModel, m: &Moments) -> Moments {
    let a = &model.drift;
    Moments {
        mean: a * &m.mean,
        cov: a * &m.cov + &m.cov * a.transpose() + &model.diffusion,
    }
}

fn rk4_step(model: &QuadraticModel, m: &mut Moments, dt: f64) {
    let k1 = rhs(model, m);
    let k2 = rhs(
        model,
        &Moments {
            mean: &m.mean + &k1.mean * (dt / 2.0),
            cov: &m.cov + &k1.cov * (dt / 2.0),
        },
    );
    let k3 = rhs(
        model,
        &Moments {
            mean: &m.mean + &k2.mean * (dt / 2.0),
            cov: &m.cov + &k2.cov * (dt / 2.0),
        },
    );
    let k4 = rhs(
        model,
        &Moments {
            mean: &m.mean + &k3.mean * dt,
            cov: &m.cov + &k3.cov * dt,
        },
    );
    m.mean += (k1.mean + k2.mean * 2.0 + k3.mean * 2.0 + k4.mean) * (dt / 6.0);
    m.cov += (k1.cov + k2.cov * 2.0 + k3.cov * 2.0 + k4.cov) * (dt / 6.0);
}

fn integrate(
    model: &QuadraticModel,
    state: &GaussianState,
    times: &[f64],
    dt: f64,
) -> Result<Vec<Moments>, GaussianError> {
    let mut current = Moments {
        mean: state.mean.clone(),
        cov: state.cov.clone(),
    };
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for (i, &target) in times.iter().enumerate() {
        if i > 0 {
            let span = target - t;
            let n_steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / n_steps as f64;
            for _ in 0..n_steps {
                rk4_step(model, &mut current, h);
            }
            t = target;
            let max_abs = current.cov.abs().max();
            if !max_abs.is_finite() || max_abs > DIVERGENCE_LIMIT {
                return Err(GaussianError::Diverged { t, max_abs });
            }
        }
        out.push(Moments {
            mean: current.mean.clone(),
            cov: current.cov.clone(),
        });
    }
    Ok(out)
}

/// Integrates the moment equations to `t_final`, sampling `n_samples`
/// states uniformly (including t = 0 and t_final).
///
/// `dt` seeds the step size; the integrator re-runs with halved steps until
/// the final covariance changes by less than 1e-8 relative to its scale,
/// and reports divergence if the covariance norm passes 1e6.
pub fn evolve(
    model: &QuadraticModel,
    state: &GaussianState,
    t_final: f64,
    dt: f64,
    n_samples: usize,
) -> Result<Trajectory, GaussianError> {
    let dim = 2 * model.n_modes();
    if state.mean.len() != dim {
        return Err(GaussianError::Dimension(format!(
            "state has {} quadratures, model needs {dim}",
            state.mean.len()
        )));
    }
    if !(t_final > 0.0) || !(dt > 0.0) || n_samples < 2 {
        return Err(GaussianError::Dimension(
            "need t_final > 0, dt > 0 and at least two samples".into(),
        ));
    }
    let times: Vec<f64> = (0..n_samples)
        .map(|i| t_final * i as f64 / (n_samples - 1) as f64)
        .collect();

    let mut step = dt.min(t_final);
    let mut previous = integrate(model, state, &times, step)?;
    for _ in 0..MAX_HALVINGS {
        step /= 2.0;
        let refined = integrate(model, state, &times, step)?;
        let last = previous.len() - 1;
        let diff = (&refined[last].cov - &previous[last].cov).abs().max();
        let scale = refined[last].cov.abs().max().max(1.0);
        previous = refined;
        if diff <= STEP_TOL * scale {
            let states = previous
                .into_iter()
                .map(|m| GaussianState {
                    mean: m.mean,
                    cov: m.cov,
                    mode_labels: state.mode_labels.clone(),
                })
                .collect();
            return Ok(Trajectory { times, states });
        }
    }
    Err(GaussianError::NoConvergence {
        tol: STEP_TOL,
        residual: f64::NAN,
    })
}

/// Steady-state covariance from the Lyapunov equation Aσ + σAᵀ + D = 0,
/// solved exactly via the Kronecker form. Requires a strictly stable
/// drift; the mean relaxes to zero.
pub fn steady_state(model: &QuadraticModel) -> Result<GaussianState, GaussianError> {
    let max_re = model.max_drift_eigenvalue_re();
    if max_re >= 0.0 {
        return Err(GaussianError::Unstable { max_re });
    }
    let a = &model.drift;
    let dim = a.nrows();
    let eye = DMatrix::<f64>::identity(dim, dim);
    // vec(Aσ + σAᵀ) = (I⊗A + A⊗I)·vec(σ) for column-major vec
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let d_vec = DVector::from_column_slice(model.diffusion.as_slice());
    let solution = nalgebra::linalg::LU::new(system)
        .solve(&(-&d_vec))
        .ok_or_else(|| GaussianError::Singular("Lyapunov system".into()))?;
    let cov_raw = DMatrix::from_column_slice(dim, dim, solution.as_slice());
    let cov = (&cov_raw + cov_raw.transpose()) * 0.5;

    let residual = (a * &cov + &cov * a.transpose() + &model.diffusion)
        .abs()
        .max();
    let d_norm = model.diffusion.abs().max();
    if d_norm > 0.0 && residual > 1e-10 * d_norm {
        return Err(GaussianError::NoConvergence {
            tol: 1e-10,
            residual: residual / d_norm,
        });
    }
    Ok(GaussianState {
        mean: DVector::zeros(dim),
        cov,
        mode_labels: model.mode_labels.clone(),
    })
}

/// Wigner function of one mode on a grid: W(x, p) =
/// exp(−½·dᵀσ⁻¹d)/(2π√det σ) with d the offset from the mode mean.
pub fn wigner(
    state: &GaussianState,
    mode: usize,
    xs: &[f64],
    ps: &[f64],
) -> Result<Vec<Vec<f64>>, GaussianError> {
    let single = state.reduce(&[mode]);
    let det = single.cov.determinant();
    if det < 1e-30 {
        return Err(GaussianError::Singular(format!(
            "mode covariance determinant {det:.3e} too small for a Wigner grid"
        )));
    }
    let inv = single
        .cov
        .clone()
        .try_inverse()
        .ok_or_else(|| GaussianError::Singular("mode covariance".into()))?;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let mut grid = Vec::with_capacity(ps.len());
    for &p in ps {
        let mut row = Vec::with_capacity(xs.len());
        for &x in xs {
            let dx = x - single.mean[0];
            let dp = p - single.mean[1];
            let quad =
                inv[(0, 0)] * dx * dx + (inv[(0, 1)] + inv[(1, 0)]) * dx * dp + inv[(1, 1)] * dp * dp;
            row.push(norm * (-0.5 * quad).exp());
        }
        grid.push(row);
    }
    Ok(grid)
}

/// Uhlmann fidelity F(ρ₁, ρ₂) between single-mode Gaussian states (squared
/// convention: F = 1 for identical states, |⟨ψ₁|ψ₂⟩|² for pure states).
pub fn fidelity(a: &GaussianState, b: &GaussianState, mode: usize) -> Result<f64, GaussianError> {
    let sa = a.reduce(&[mode]);
    let sb = b.reduce(&[mode]);
    let sum = &sa.cov + &sb.cov;
    let det_sum = sum.determinant();
    if det_sum <= 0.0 {
        return Err(GaussianError::Singular("covariance sum".into()));
    }
    let delta = det_sum;
    let lambda = 4.0 * (sa.cov.determinant() - 0.25) * (sb.cov.determinant() - 0.25);
    let denom = (delta + lambda).sqrt() - lambda.sqrt();
    let inv = sum
        .try_inverse()
        .ok_or_else(|| GaussianError::Singular("covariance sum".into()))?;
    let d = &sb.mean - &sa.mean;
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    Ok((-0.5 * quad).exp() / denom)
}
