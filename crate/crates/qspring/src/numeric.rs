//! Small numeric utilities shared by the physics and state modules:
//! bracketed root finding, scalar maximization, and eigenvalue bounds for
//! Hermitian matrices represented over the reals.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Finds a root of `f` in `[a, b]` by Brent's method.
///
/// Requires a sign change over the bracket. Converges to a relative
/// tolerance `rel_tol` on the abscissa (plus a small absolute floor for
/// roots near zero).
pub(crate) fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..200 {
        let tol = rel_tol * b.abs().max(1e-300) + f64::MIN_POSITIVE;
        if fb == 0.0 || (b - a).abs() < tol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let cond = !((lo.min(b)..=lo.max(b)).contains(&s))
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < tol)
            || (!mflag && (c - d).abs() < tol);
        if cond {
            s = (a + b) / 2.0;
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(b)
}

/// Maximizes `f` on `[a, b]` by golden-section search; returns `(x, f(x))`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > rel_tol * (a.abs() + b.abs()).max(1e-12) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Smallest eigenvalue of a Hermitian matrix `H = re + i·im`.
///
/// Uses the real-symmetric embedding `[[re, -im], [im, re]]`, whose spectrum
/// is that of `H` with every eigenvalue doubled. `re` must be symmetric and
/// `im` antisymmetric.
pub(crate) fn hermitian_min_eig(re: &DMatrix<f64>, im: &DMatrix<f64>) -> f64 {
    let n = re.nrows();
    let mut emb = DMatrix::<f64>::zeros(2 * n, 2 * n);
    emb.view_mut((0, 0), (n, n)).copy_from(re);
    emb.view_mut((n, n), (n, n)).copy_from(re);
    emb.view_mut((0, n), (n, n)).copy_from(&(-im));
    emb.view_mut((n, 0), (n, n)).copy_from(im);
    let eig = emb.symmetric_eigen();
    eig.eigenvalues.min()
}

/// Smallest eigenvalue of a complex Hermitian matrix.
pub(crate) fn hermitian_min_eig_c(h: &DMatrix<Complex64>) -> f64 {
    let re = h.map(|z| z.re);
    let im = h.map(|z| z.im);
    hermitian_min_eig(&re, &im)
}

/// Full eigendecomposition of a complex Hermitian matrix via the
/// real-symmetric embedding. Returns eigenvalues (ascending, deduplicated
/// from the doubled embedding spectrum) and the corresponding complex
/// eigenvectors as matrix columns.
pub(crate) fn hermitian_eigen_c(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = h.nrows();
    let re = h.map(|z| z.re);
    let im = h.map(|z| z.im);
    let mut emb = DMatrix::<f64>::zeros(2 * n, 2 * n);
    emb.view_mut((0, 0), (n, n)).copy_from(&re);
    emb.view_mut((n, n), (n, n)).copy_from(&re);
    emb.view_mut((0, n), (n, n)).copy_from(&(-&im));
    emb.view_mut((n, 0), (n, n)).copy_from(&im);
    let eig = emb.symmetric_eigen();
    // Sort the doubled spectrum; embedding eigenvector (u; v) maps to the
    // complex eigenvector u + i·v. Each eigenvalue appears twice ((u; v) and
    // (-v; u) give the same complex vector up to phase), so take every other
    // one after sorting.
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let idx = order[2 * k];
        vals.push(eig.eigenvalues[idx]);
        let col = eig.eigenvectors.column(idx);
        let mut norm = 0.0;
        for i in 0..n {
            norm += col[i] * col[i] + col[n + i] * col[n + i];
        }
        let norm = norm.sqrt();
        for i in 0..n {
            vecs[(i, k)] = Complex64::new(col[i] / norm, col[n + i] / norm);
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brent_finds_simple_roots() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(r, std::f64::consts::SQRT_2, max_relative = 1e-12);
        let r = brent(|x| x.cos(), 1.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn golden_max_quadratic() {
        let (x, fx) = golden_max(|x| 1.0 - (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert_relative_eq!(x, 0.3, epsilon = 1e-8);
        assert_relative_eq!(fx, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_min_eig_matches_known_spectrum() {
        // H = [[1, i], [-i, 1]] has eigenvalues {0, 2}
        let re = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let im = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_relative_eq!(hermitian_min_eig(&re, &im), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let h = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 0.3),
                Complex64::new(0.0, -0.2),
                Complex64::new(0.5, -0.3),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.1, 0.0),
                Complex64::new(0.0, 0.2),
                Complex64::new(0.1, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        );
        let (vals, vecs) = hermitian_eigen_c(&h);
        let mut rebuilt = DMatrix::<Complex64>::zeros(3, 3);
        for k in 0..3 {
            let v = vecs.column(k);
            for i in 0..3 {
                for j in 0..3 {
                    rebuilt[(i, j)] += Complex64::new(vals[k], 0.0) * v[i] * v[j].conj();
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(rebuilt[(i, j)].re, h[(i, j)].re, epsilon = 1e-10);
                assert_relative_eq!(rebuilt[(i, j)].im, h[(i, j)].im, epsilon = 1e-10);
            }
        }
    }
}
