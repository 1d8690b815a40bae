//! Truncated Fock-space oracle: integrates the full Lindblad master
//! equation for the same [`QuadraticModel`](crate::model::QuadraticModel)
//! the Gaussian engine evolves, with no Gaussian assumption anywhere.
//!
//! The implementation keeps its own minimal CSR sparse kernels; operators
//! are a few nonzeros per row and the master-equation right-hand side is
//! dominated by sparse×dense products against the density matrix.
//!
//! Models are expected in natural units (rates and frequencies of order
//! one) so that fixed-step RK4 with a dimensionless `dt` is meaningful.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::gaussian::GaussianState;
use crate::model::QuadraticModel;
use crate::numeric::hermitian_eigen_c;

/// Occupation allowed in the top two Fock levels of any mode marginal
/// before the truncation is declared invalid.
const TAIL_LIMIT: f64 = 1e-4;
/// Allowed trace drift per unit time (before renormalization).
const TRACE_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("truncation too small: {0}")]
    Truncation(String),
    #[error("unsupported initial state: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("integration failed: {0}")]
    Integration(String),
}

// ---------------------------------------------------------------------------
// Sparse and dense complex matrices

#[derive(Debug, Clone)]
pub(crate) struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Csr {
    fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Csr {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<Complex64> = Vec::new();
        for (r, c, v) in triplets {
            if cols.len() > row_ptr[r] && *cols.last().unwrap() == c && row_ptr[r + 1] > 0 {
                // same position as previous entry in this row: accumulate
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
            }
            row_ptr[r + 1] = cols.len();
        }
        // forward-fill empty rows and drop negligible entries
        for r in 0..n_rows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        let mut out_ptr = vec![0usize; n_rows + 1];
        for r in 0..n_rows {
            for i in row_ptr[r]..row_ptr[r + 1] {
                if vals[i].norm_sqr() > 0.0 {
                    out_cols.push(cols[i]);
                    out_vals.push(vals[i]);
                }
            }
            out_ptr[r + 1] = out_cols.len();
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr: out_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }

    fn identity(n: usize) -> Csr {
        Csr::from_triplets(n, n, (0..n).map(|i| (i, i, Complex64::ONE)).collect())
    }

    /// Single-mode annihilation operator truncated to `n` levels.
    fn annihilation(n: usize) -> Csr {
        let triplets = (0..n - 1)
            .map(|i| (i, i + 1, Complex64::new(((i + 1) as f64).sqrt(), 0.0)))
            .collect();
        Csr::from_triplets(n, n, triplets)
    }

    fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(self.vals.len());
        for r in 0..self.n_rows {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.cols[i], self.vals[i]));
            }
        }
        out
    }

    fn kron(&self, other: &Csr) -> Csr {
        let mut triplets = Vec::with_capacity(self.vals.len() * other.vals.len());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                triplets.push((r1 * other.n_rows + r2, c1 * other.n_cols + c2, v1 * v2));
            }
        }
        Csr::from_triplets(self.n_rows * other.n_rows, self.n_cols * other.n_cols, triplets)
    }

    fn add(&self, other: &Csr) -> Csr {
        let mut t = self.triplets();
        t.extend(other.triplets());
        Csr::from_triplets(self.n_rows, self.n_cols, t)
    }

    fn scale(&self, factor: Complex64) -> Csr {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= factor;
        }
        out
    }

    fn adjoint(&self) -> Csr {
        let t = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect();
        Csr::from_triplets(self.n_cols, self.n_rows, t)
    }

    fn matmul(&self, other: &Csr) -> Csr {
        let mut triplets = Vec::new();
        for r in 0..self.n_rows {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let k = self.cols[i];
                let v = self.vals[i];
                for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                    triplets.push((r, other.cols[j], v * other.vals[j]));
                }
            }
        }
        Csr::from_triplets(self.n_rows, other.n_cols, triplets)
    }

    /// out = self · x for a row-major dense square matrix.
    fn mul_dense(&self, x: &CMat, out: &mut CMat) {
        let n = x.n;
        out.data.fill(Complex64::ZERO);
        for r in 0..self.n_rows {
            let out_row = &mut out.data[r * n..(r + 1) * n];
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let k = self.cols[i];
                let v = self.vals[i];
                let x_row = &x.data[k * n..(k + 1) * n];
                for (o, xv) in out_row.iter_mut().zip(x_row) {
                    *o += v * xv;
                }
            }
        }
    }

    /// tr(self · x) without forming the product.
    fn trace_mul(&self, x: &CMat) -> Complex64 {
        let n = x.n;
        let mut acc = Complex64::ZERO;
        for r in 0..self.n_rows {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[i] * x.data[self.cols[i] * n + r];
            }
        }
        acc
    }
}

/// Row-major dense complex square matrix.
#[derive(Debug, Clone)]
pub(crate) struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    fn zeros(n: usize) -> CMat {
        CMat {
            n,
            data: vec![Complex64::ZERO; n * n],
        }
    }

    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    fn adjoint_into(&self, out: &mut CMat) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
    }

    fn axpy(&mut self, factor: Complex64, other: &CMat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    /// Projects onto the Hermitian subspace. The Lindblad flow preserves
    /// Hermiticity exactly; what this removes is accumulated rounding
    /// asymmetry, which would otherwise grow with the step count.
    fn hermitize(&mut self) {
        let n = self.n;
        for i in 0..n {
            let d = self.data[i * n + i];
            self.data[i * n + i] = Complex64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

// ---------------------------------------------------------------------------
// Operators over the truncated product space

struct QuadOps {
    dims: Vec<usize>,
    /// r₁ = X₁, r₂ = P₁, r₃ = X₂, … as sparse matrices.
    quads: Vec<Csr>,
}

impl QuadOps {
    fn new(dims: &[usize]) -> QuadOps {
        let n_modes = dims.len();
        let mut quads = Vec::with_capacity(2 * n_modes);
        let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let i_inv_sqrt2 = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        for m in 0..n_modes {
            let mut a: Option<Csr> = None;
            for (k, &d) in dims.iter().enumerate() {
                let factor = if k == m {
                    Csr::annihilation(d)
                } else {
                    Csr::identity(d)
                };
                a = Some(match a {
                    None => factor,
                    Some(acc) => acc.kron(&factor),
                });
            }
            let a = a.expect("at least one mode");
            let adag = a.adjoint();
            // X = (a + a†)/√2, P = −i(a − a†)/√2
            quads.push(a.scale(inv_sqrt2).add(&adag.scale(inv_sqrt2)));
            quads.push(a.scale(-i_inv_sqrt2).add(&adag.scale(i_inv_sqrt2)));
        }
        QuadOps {
            dims: dims.to_vec(),
            quads,
        }
    }

    fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Operator cᵀ·r for a complex coefficient vector over quadratures.
    fn linear(&self, coeff: &[Complex64]) -> Csr {
        let n = self.total_dim();
        let mut acc = Csr::from_triplets(n, n, vec![]);
        for (c, op) in coeff.iter().zip(&self.quads) {
            if c.norm_sqr() > 0.0 {
                acc = acc.add(&op.scale(*c));
            }
        }
        acc
    }

    /// H = ½·rᵀMr, hermitized.
    fn hamiltonian(&self, m: &DMatrix<f64>) -> Csr {
        let n = self.total_dim();
        let mut acc = Csr::from_triplets(n, n, vec![]);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    let prod = self.quads[i].matmul(&self.quads[j]);
                    acc = acc.add(&prod.scale(Complex64::new(0.5 * m[(i, j)], 0.0)));
                }
            }
        }
        acc.add(&acc.adjoint()).scale(Complex64::new(0.5, 0.0))
    }
}

// ---------------------------------------------------------------------------
// Density matrices

/// A density matrix on a truncated multimode Fock space.
#[derive(Debug, Clone)]
pub struct FockDensityMatrix {
    pub dims: Vec<usize>,
    pub(crate) rho: CMat,
    /// Cleared when any mode marginal ever put more than the tail limit
    /// into its top two levels during construction or evolution.
    pub truncation_valid: bool,
}

impl FockDensityMatrix {
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.rho.get(i, j)
    }

    /// Fock occupations of one mode's marginal.
    pub fn occupations(&self, mode: usize) -> Vec<f64> {
        let marginal = self.partial_trace(mode);
        (0..self.dims[mode]).map(|k| marginal.get(k, k).re).collect()
    }

    /// Reduced single-mode density matrix.
    pub(crate) fn partial_trace(&self, mode: usize) -> CMat {
        let d_mode = self.dims[mode];
        let after: usize = self.dims[mode + 1..].iter().product();
        let before: usize = self.dims[..mode].iter().product();
        let mut out = CMat::zeros(d_mode);
        let n = self.rho.n;
        for b in 0..before {
            for k in 0..after {
                for i in 0..d_mode {
                    let row = (b * d_mode + i) * after + k;
                    for j in 0..d_mode {
                        let col = (b * d_mode + j) * after + k;
                        let v = out.get(i, j) + self.rho.data[row * n + col];
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    /// Largest departure from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.rho.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.rho.get(i, j) - self.rho.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the (hermitized) density matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = self.rho.to_nalgebra();
        let herm = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        crate::numeric::hermitian_min_eig_c(&herm)
    }

    fn tail_weight(&self, mode: usize) -> f64 {
        let occ = self.occupations(mode);
        let d = occ.len();
        occ[d - 1] + occ[d - 2]
    }

    fn tail_ok(&self) -> bool {
        (0..self.dims.len()).all(|m| self.tail_weight(m) < TAIL_LIMIT)
    }
}

/// Single-mode pure squeezed vacuum with X-variance e^{−2r}/2, from the
/// closed-form even-photon expansion, then rotated by `angle` so the
/// squeezed quadrature is cos(angle)·X + sin(angle)·P.
fn squeezed_vector(dim: usize, r: f64, angle: f64) -> Vec<Complex64> {
    let mut psi = vec![Complex64::ZERO; dim];
    let th = r.tanh();
    let mut coeff = 1.0 / r.cosh().sqrt();
    let mut m = 0usize;
    loop {
        let n = 2 * m;
        if n >= dim {
            break;
        }
        psi[n] = Complex64::new(coeff, 0.0);
        // c_{m+1}/c_m = −tanh(r)·√((2m+1)(2m+2))/(2(m+1))
        let nf = n as f64;
        coeff *= -th * ((nf + 1.0) * (nf + 2.0)).sqrt() / (nf + 2.0);
        m += 1;
    }
    // renormalize the truncated expansion
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for (n, c) in psi.iter_mut().enumerate() {
        // state rotation ρ → UρU† with U = e^{iθn} maps the squeezed axis
        // from X to cosθ·X + sinθ·P
        *c = *c / norm * Complex64::from_polar(1.0, angle * n as f64);
    }
    psi
}

/// Builds a product density matrix from a zero-mean Gaussian state whose
/// per-mode blocks are vacuum, thermal, or pure squeezed.
pub fn from_gaussian(state: &GaussianState, dims: &[usize]) -> Result<FockDensityMatrix, FockError> {
    let n_modes = state.n_modes();
    if dims.len() != n_modes {
        return Err(FockError::Dimension(format!(
            "{n_modes} modes but {} truncation dims",
            dims.len()
        )));
    }
    if state.mean.amax() > 1e-12 {
        return Err(FockError::Unsupported(
            "only zero-mean initial states are supported".into(),
        ));
    }
    for i in 0..2 * n_modes {
        for j in 0..2 * n_modes {
            if i / 2 != j / 2 && state.cov[(i, j)].abs() > 1e-12 {
                return Err(FockError::Unsupported(
                    "only product initial states are supported".into(),
                ));
            }
        }
    }

    let mut rho: Option<CMat> = None;
    for (m, &d) in dims.iter().enumerate() {
        if d < 4 {
            return Err(FockError::Truncation(format!(
                "mode {m}: need at least 4 levels, got {d}"
            )));
        }
        let block = state.cov.view((2 * m, 2 * m), (2, 2)).into_owned();
        let sym = (&block + block.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let (l1, l2, v1) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
            (
                eig.eigenvalues[0],
                eig.eigenvalues[1],
                eig.eigenvectors.column(0).into_owned(),
            )
        } else {
            (
                eig.eigenvalues[1],
                eig.eigenvalues[0],
                eig.eigenvectors.column(1).into_owned(),
            )
        };
        let det = l1 * l2;
        let single = if (l2 - l1).abs() < 1e-10 * l2.max(1.0) {
            // isotropic block: thermal (or vacuum) with n̄ = λ − ½
            let n_bar = (l1 - 0.5).max(0.0);
            let mut p = vec![0.0f64; d];
            if n_bar < 1e-14 {
                p[0] = 1.0;
            } else {
                let q = n_bar / (n_bar + 1.0);
                let mut w = 1.0 - q;
                for pk in p.iter_mut() {
                    *pk = w;
                    w *= q;
                }
                let total: f64 = p.iter().sum();
                for pk in p.iter_mut() {
                    *pk /= total;
                }
            }
            let mut mat = CMat::zeros(d);
            for (k, &pk) in p.iter().enumerate() {
                mat.set(k, k, Complex64::new(pk, 0.0));
            }
            mat
        } else if (det - 0.25).abs() < 1e-9 * det.max(0.25) {
            // pure squeezed block
            let r = -0.5 * (2.0 * l1).ln();
            let angle = v1[1].atan2(v1[0]);
            let psi = squeezed_vector(d, r, angle);
            let mut mat = CMat::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    mat.set(i, j, psi[i] * psi[j].conj());
                }
            }
            mat
        } else {
            return Err(FockError::Unsupported(format!(
                "mode {m}: mixed squeezed blocks are not supported (eigenvalues {l1:.4}, {l2:.4})"
            )));
        };
        rho = Some(match rho {
            None => single,
            Some(acc) => {
                // dense Kronecker product
                let n_acc = acc.n;
                let mut out = CMat::zeros(n_acc * d);
                for i1 in 0..n_acc {
                    for j1 in 0..n_acc {
                        let v1 = acc.get(i1, j1);
                        if v1.norm_sqr() == 0.0 {
                            continue;
                        }
                        for i2 in 0..d {
                            for j2 in 0..d {
                                out.set(i1 * d + i2, j1 * d + j2, v1 * single.get(i2, j2));
                            }
                        }
                    }
                }
                out
            }
        });
    }
    let state = FockDensityMatrix {
        dims: dims.to_vec(),
        rho: rho.expect("at least one mode"),
        truncation_valid: true,
    };
    for m in 0..n_modes {
        let w = state.tail_weight(m);
        if w >= TAIL_LIMIT {
            return Err(FockError::Truncation(format!(
                "mode {m}: top two levels already hold {w:.2e} of the initial state"
            )));
        }
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// Master-equation integration

/// Moments of the Fock trajectory at the sample times, plus the final
/// density matrix for spectral checks.
pub struct FockTrajectory {
    pub times: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub final_state: FockDensityMatrix,
    /// Whether every sampled marginal kept its top two levels below the
    /// tail limit.
    pub truncation_valid: bool,
    /// Largest per-unit-time trace drift the renormalization absorbed.
    pub max_trace_drift_rate: f64,
}

struct Lindbladian {
    /// K = H − (i/2)·ΣL†L; the RHS is −i(Kρ − (Kρ)†) + ΣLρL†.
    k_op: Csr,
    jump_ops: Vec<Csr>,
}

fn build_lindbladian(model: &QuadraticModel, ops: &QuadOps) -> Result<Lindbladian, FockError> {
    if model.h_matrix.nrows() != 2 * ops.dims.len() {
        return Err(FockError::Dimension(format!(
            "model has {} quadratures, state has {} modes",
            model.h_matrix.nrows(),
            ops.dims.len()
        )));
    }
    let h = ops.hamiltonian(&model.h_matrix);
    let mut jump_ops = Vec::new();
    let n = ops.total_dim();
    let mut damping = Csr::from_triplets(n, n, vec![]);
    for jump in &model.jumps {
        if jump.rate == 0.0 {
            continue;
        }
        let scaled: Vec<Complex64> = jump
            .coeff
            .iter()
            .map(|c| c * Complex64::new(jump.rate.sqrt(), 0.0))
            .collect();
        let l = ops.linear(&scaled);
        damping = damping.add(&l.adjoint().matmul(&l));
        jump_ops.push(l);
    }
    let k_op = h.add(&damping.scale(Complex64::new(0.0, -0.5)));
    Ok(Lindbladian { k_op, jump_ops })
}

struct RhsWorkspace {
    krho: CMat,
    krho_dag: CMat,
    w: CMat,
    w_dag: CMat,
}

impl RhsWorkspace {
    fn new(n: usize) -> RhsWorkspace {
        RhsWorkspace {
            krho: CMat::zeros(n),
            krho_dag: CMat::zeros(n),
            w: CMat::zeros(n),
            w_dag: CMat::zeros(n),
        }
    }
}

fn lindblad_rhs(lind: &Lindbladian, rho: &CMat, out: &mut CMat, ws: &mut RhsWorkspace) {
    let minus_i = Complex64::new(0.0, -1.0);
    let plus_i = Complex64::new(0.0, 1.0);
    lind.k_op.mul_dense(rho, &mut ws.krho);
    ws.krho.adjoint_into(&mut ws.krho_dag);
    out.data.fill(Complex64::ZERO);
    out.axpy(minus_i, &ws.krho);
    out.axpy(plus_i, &ws.krho_dag);
    for l in &lind.jump_ops {
        // LρL† = L·(Lρ)† for Hermitian ρ
        l.mul_dense(rho, &mut ws.w);
        ws.w.adjoint_into(&mut ws.w_dag);
        l.mul_dense(&ws.w_dag, &mut ws.w);
        out.axpy(Complex64::ONE, &ws.w);
    }
}

/// Integrates the Lindblad master equation with fixed-step RK4, sampling
/// `n_samples` uniformly spaced moments.
///
/// The trace is renormalized and the matrix re-Hermitized after every step;
/// a trace drift above 1e-6 per unit time aborts (the step size is too
/// coarse). A violated Fock-tail bound does not abort but clears
/// `truncation_valid` on the result.
pub fn evolve_fock(
    model: &QuadraticModel,
    rho0: &FockDensityMatrix,
    t_final: f64,
    dt: f64,
    n_samples: usize,
) -> Result<FockTrajectory, FockError> {
    if !(t_final > 0.0) || !(dt > 0.0) || n_samples < 2 {
        return Err(FockError::Dimension(
            "need t_final > 0, dt > 0 and at least two samples".into(),
        ));
    }
    let ops = QuadOps::new(&rho0.dims);
    let lind = build_lindbladian(model, &ops)?;
    let n = rho0.rho.n;
    let intervals = n_samples - 1;
    let steps_per_interval = ((t_final / intervals as f64) / dt).ceil().max(1.0) as usize;
    let h = t_final / (intervals * steps_per_interval) as f64;

    let mut rho = rho0.rho.clone();
    let mut ws = RhsWorkspace::new(n);
    let mut k1 = CMat::zeros(n);
    let mut k2 = CMat::zeros(n);
    let mut k3 = CMat::zeros(n);
    let mut k4 = CMat::zeros(n);
    let mut stage = CMat::zeros(n);

    let mut times = Vec::with_capacity(n_samples);
    let mut means = Vec::with_capacity(n_samples);
    let mut covs = Vec::with_capacity(n_samples);
    let mut truncation_valid = rho0.truncation_valid;
    let mut max_drift_rate = 0.0f64;

    let sample =
        |rho: &CMat, times: &mut Vec<f64>, means: &mut Vec<DVector<f64>>, covs: &mut Vec<DMatrix<f64>>, t: f64, ok: &mut bool| {
            let snapshot = FockDensityMatrix {
                dims: rho0.dims.clone(),
                rho: rho.clone(),
                truncation_valid: true,
            };
            if !snapshot.tail_ok() {
                *ok = false;
            }
            let (mu, sigma) = moments(&ops, rho);
            times.push(t);
            means.push(mu);
            covs.push(sigma);
        };

    sample(&rho, &mut times, &mut means, &mut covs, 0.0, &mut truncation_valid);
    for interval in 0..intervals {
        for _ in 0..steps_per_interval {
            lindblad_rhs(&lind, &rho, &mut k1, &mut ws);
            stage.data.copy_from_slice(&rho.data);
            stage.axpy(Complex64::new(h / 2.0, 0.0), &k1);
            lindblad_rhs(&lind, &stage, &mut k2, &mut ws);
            stage.data.copy_from_slice(&rho.data);
            stage.axpy(Complex64::new(h / 2.0, 0.0), &k2);
            lindblad_rhs(&lind, &stage, &mut k3, &mut ws);
            stage.data.copy_from_slice(&rho.data);
            stage.axpy(Complex64::new(h, 0.0), &k3);
            lindblad_rhs(&lind, &stage, &mut k4, &mut ws);
            rho.axpy(Complex64::new(h / 6.0, 0.0), &k1);
            rho.axpy(Complex64::new(h / 3.0, 0.0), &k2);
            rho.axpy(Complex64::new(h / 3.0, 0.0), &k3);
            rho.axpy(Complex64::new(h / 6.0, 0.0), &k4);

            let tr = rho.trace().re;
            if !tr.is_finite() || rho.max_abs() > 1e6 {
                return Err(FockError::Integration(format!(
                    "density matrix diverged (trace {tr:.3e})"
                )));
            }
            let drift_rate = (tr - 1.0).abs() / h;
            max_drift_rate = max_drift_rate.max(drift_rate);
            if drift_rate > TRACE_DRIFT_LIMIT {
                return Err(FockError::Integration(format!(
                    "trace drift {drift_rate:.3e} per unit time exceeds {TRACE_DRIFT_LIMIT:.1e}; reduce dt"
                )));
            }
            rho.scale(1.0 / tr);
            rho.hermitize();
        }
        let t = t_final * (interval + 1) as f64 / intervals as f64;
        sample(&rho, &mut times, &mut means, &mut covs, t, &mut truncation_valid);
    }

    Ok(FockTrajectory {
        times,
        means,
        covs,
        final_state: FockDensityMatrix {
            dims: rho0.dims.clone(),
            rho,
            truncation_valid,
        },
        truncation_valid,
        max_trace_drift_rate: max_drift_rate,
    })
}

/// Symmetrized first and second moments of ρ over the quadratures.
fn moments(ops: &QuadOps, rho: &CMat) -> (DVector<f64>, DMatrix<f64>) {
    let dim = ops.quads.len();
    let mut mu = DVector::zeros(dim);
    for i in 0..dim {
        mu[i] = ops.quads[i].trace_mul(rho).re;
    }
    let mut sigma = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let rirj = ops.quads[i].matmul(&ops.quads[j]);
            let rjri = ops.quads[j].matmul(&ops.quads[i]);
            let sym = 0.5 * (rirj.trace_mul(rho) + rjri.trace_mul(rho)).re;
            let val = sym - mu[i] * mu[j];
            sigma[(i, j)] = val;
            sigma[(j, i)] = val;
        }
    }
    (mu, sigma)
}

/// First and second moments of a density matrix.
pub fn covariance_of(state: &FockDensityMatrix) -> (DVector<f64>, DMatrix<f64>) {
    let ops = QuadOps::new(&state.dims);
    moments(&ops, &state.rho)
}

/// Uhlmann fidelity F = (tr√(√ρ₁ρ₂√ρ₁))² between two density matrices on
/// the same space (squared convention, matching the Gaussian formula).
pub fn fidelity_fock(a: &FockDensityMatrix, b: &FockDensityMatrix) -> Result<f64, FockError> {
    if a.dims != b.dims {
        return Err(FockError::Dimension("states live on different spaces".into()));
    }
    let sqrt_of = |m: &DMatrix<Complex64>| -> DMatrix<Complex64> {
        let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen_c(&herm);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
        ));
        &vecs * d * vecs.adjoint()
    };
    let ra = a.rho.to_nalgebra();
    let rb = b.rho.to_nalgebra();
    let sa = sqrt_of(&ra);
    let inner = &sa * rb * &sa;
    let si = sqrt_of(&inner);
    let f: f64 = (0..si.nrows()).map(|i| si[(i, i)].re).sum();
    Ok(f * f)
}

/// Wigner function of one mode on a grid, from the displaced-parity series
/// W(x, p) = (1/π)·Σ ρ_nm·(−1)^n·⟨m|D(β)|n⟩ with β = √2·(x + ip); the
/// 1/π (instead of 2/π) normalizes over dx·dp rather than d²α.
pub fn wigner_fock(
    state: &FockDensityMatrix,
    mode: usize,
    xs: &[f64],
    ps: &[f64],
) -> Result<Vec<Vec<f64>>, FockError> {
    let rho = state.partial_trace(mode);
    let d = rho.n;
    let mut grid = Vec::with_capacity(ps.len());
    for &p in ps {
        let mut row = Vec::with_capacity(xs.len());
        for &x in xs {
            let beta = Complex64::new(x, p) * 2f64.sqrt();
            let y = beta.norm_sqr();
            let gauss = (-0.5 * y).exp();
            // laguerre[a][k] = L_k^{(a)}(y)
            let mut laguerre = vec![vec![0.0f64; d]; d];
            for (a, row_l) in laguerre.iter_mut().enumerate() {
                row_l[0] = 1.0;
                if d > 1 {
                    row_l[1] = 1.0 + a as f64 - y;
                }
                for k in 1..d - 1 {
                    let kf = k as f64;
                    row_l[k + 1] = ((2.0 * kf + 1.0 + a as f64 - y) * row_l[k]
                        - (kf + a as f64) * row_l[k - 1])
                        / (kf + 1.0);
                }
            }
            let mut acc = Complex64::ZERO;
            for nn in 0..d {
                for mm in 0..d {
                    let elem = if mm >= nn {
                        // ⟨m|D(β)|n⟩, m ≥ n
                        let diff = mm - nn;
                        let mut pref = Complex64::new(1.0, 0.0);
                        for s in 0..diff {
                            pref *= beta / (((nn + s + 1) as f64).sqrt());
                        }
                        pref * gauss * laguerre[diff][nn]
                    } else {
                        let diff = nn - mm;
                        let mut pref = Complex64::new(1.0, 0.0);
                        for s in 0..diff {
                            pref *= -beta.conj() / (((mm + s + 1) as f64).sqrt());
                        }
                        pref * gauss * laguerre[diff][mm]
                    };
                    let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
                    acc += rho.get(nn, mm) * elem * sign;
                }
            }
            row.push(acc.re / std::f64::consts::PI);
        }
        grid.push(row);
    }
    Ok(grid)
}
