//! Dense complex linear algebra used throughout the optimizer.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative asymmetry accepted for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn asymmetry(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            context: "square matrix",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let limit = HERMITIAN_TOL * max_abs(a).max(f64::MIN_POSITIVE);
    let asym = asymmetry(a);
    if asym > limit {
        return Err(Error::NotHermitian {
            asymmetry: asym,
            limit,
        });
    }
    Ok(())
}

/// (A + A^H) / 2.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Real part of x^H A x.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

/// Rotate `x` so that its largest-magnitude entry is real and positive.
/// The first index wins ties.
pub fn fix_phase(x: &mut CVec) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in x.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let rot = x[best].conj() / best_mag;
        x.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues in descending order
/// and a unitary matrix whose columns follow the phase convention of
/// [`fix_phase`].
pub fn hermitian_eig(a: &CMat) -> Result<(DVector<f64>, CMat)> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), CMat::zeros(0, 0)));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: CVec = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(a: &CMat) -> Result<f64> {
    let (vals, _) = hermitian_eig(a)?;
    Ok(vals.get(0).copied().unwrap_or(0.0))
}

/// Maximizer of the generalized Rayleigh quotient x^H A x / x^H B x over unit
/// vectors, together with the attained value.
pub fn max_generalized_eigvec(a: &CMat, b: &CMat) -> Result<(CVec, f64)> {
    check_hermitian(a)?;
    check_hermitian(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            context: "generalized eigenproblem",
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let (bvals, _) = hermitian_eig(b)?;
    let n = b.nrows();
    let max_eig = bvals[0];
    let min_eig = bvals[n - 1];
    if !(max_eig > 0.0) || min_eig <= 1e-12 * max_eig {
        return Err(Error::NotPositiveDefinite { min_eig, max_eig });
    }
    let chol = cholesky_pd(b)
        .ok_or(Error::NotPositiveDefinite { min_eig, max_eig })?;
    let l = chol.l();
    // C = L^{-1} A L^{-H}
    let linv_a = l
        .solve_lower_triangular(&hermitian_part(a))
        .expect("cholesky factor is nonsingular");
    let c_mat = l
        .solve_lower_triangular(&linv_a.adjoint())
        .expect("cholesky factor is nonsingular")
        .adjoint();
    let (vals, vecs) = hermitian_eig(&hermitian_part(&c_mat))?;
    let y: CVec = vecs.column(0).into_owned();
    let mut x = l
        .adjoint()
        .solve_upper_triangular(&y)
        .expect("cholesky factor is nonsingular");
    let norm = x.norm();
    x.unscale_mut(norm);
    fix_phase(&mut x);
    Ok((x, vals[0]))
}

/// Moore-Penrose pseudo-inverse via the SVD with a relative singular-value
/// cutoff.
pub fn pseudo_inverse(a: &CMat) -> CMat {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMat::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * (m.max(n) as f64) * f64::EPSILON * 16.0;
    let mut out = CMat::zeros(n, m);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k);
            out += (vk * uk.adjoint()).unscale(s);
        }
    }
    out
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    let chol = cholesky_pd(a).ok_or_else(|| {
        let vals = hermitian_eig(a).map(|(v, _)| v).unwrap_or_else(|_| DVector::zeros(1));
        Error::NotPositiveDefinite {
            min_eig: vals.iter().cloned().fold(f64::INFINITY, f64::min),
            max_eig: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    })?;
    Ok(chol.inverse())
}

/// Cholesky factorization that rejects matrices which are not positive
/// definite. The complex factorization in nalgebra takes complex square roots
/// of negative pivots instead of failing, so pivots are checked here.
pub fn cholesky_pd(a: &CMat) -> Option<Cholesky<C64, Dyn>> {
    let ch = hermitian_part(a).cholesky()?;
    let l = ch.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-10 * d.re {
            return None;
        }
    }
    Some(ch)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min(a: &CMat) -> Result<f64> {
    let (vals, _) = hermitian_eig(a)?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

pub fn diag_from(values: impl IntoIterator<Item = C64>) -> CMat {
    let v: Vec<C64> = values.into_iter().collect();
    CMat::from_diagonal(&CVec::from_vec(v))
}

pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
        CMat::from_fn(m, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        let v = CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let nv = v.norm();
        v.unscale(nv)
    }

    #[test]
    fn eig_of_diagonal_is_sorted_permutation() {
        let a = diag_from([cr(1.0), cr(3.0), cr(2.0)]);
        let (vals, vecs) = hermitian_eig(&a).unwrap();
        assert_eq!(vals.as_slice(), &[3.0, 2.0, 1.0]);
        let expected_rows = [1usize, 2, 0];
        for (col, &row) in expected_rows.iter().enumerate() {
            assert!((vecs[(row, col)] - cr(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn eig_of_identity() {
        let (vals, _) = hermitian_eig(&CMat::identity(4, 4)).unwrap();
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = cr(1.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 3, 8, 16] {
            let g = random_mat(&mut rng, n, n);
            let a = hermitian_part(&g);
            let (vals, u) = hermitian_eig(&a).unwrap();
            let lam = CMat::from_diagonal(&vals.map(cr));
            let rec = &u * lam * u.adjoint();
            assert!((rec - &a).norm() <= 1e-9 * a.norm());
            assert!((u.adjoint() * &u - CMat::identity(n, n)).norm() < 1e-10);
            for w in vals.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn generalized_eig_examples() {
        let a = diag_from([cr(1.0), cr(3.0), cr(2.0)]);
        let (v, val) = max_generalized_eigvec(&a, &CMat::identity(3, 3)).unwrap();
        assert!((val - 3.0).abs() < 1e-12);
        assert!((v[1] - cr(1.0)).norm() < 1e-12);

        let a = diag_from([cr(2.0), cr(4.0)]);
        let b = diag_from([cr(1.0), cr(4.0)]);
        let (v, val) = max_generalized_eigvec(&a, &b).unwrap();
        assert!((val - 2.0).abs() < 1e-12);
        assert!((v[0] - cr(1.0)).norm() < 1e-12);
    }

    #[test]
    fn generalized_eig_rejects_singular_b() {
        let b = diag_from([cr(1.0), cr(0.0)]);
        let err = max_generalized_eigvec(&CMat::identity(2, 2), &b).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn generalized_eig_dominates_random_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ga = random_mat(&mut rng, 4, 4);
        let gb = random_mat(&mut rng, 4, 4);
        let a = &ga * ga.adjoint();
        let b = &gb * gb.adjoint() + CMat::identity(4, 4).scale(0.1);
        let (v, val) = max_generalized_eigvec(&a, &b).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((quad_form(&a, &v) / quad_form(&b, &v) - val).abs() < 1e-9 * val);
        for _ in 0..10_000 {
            let x = random_unit(&mut rng, 4);
            assert!(quad_form(&a, &x) / quad_form(&b, &x) <= val * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pinv_examples() {
        let a = diag_from([cr(2.0), cr(0.0)]);
        let p = pseudo_inverse(&a);
        assert!((p - diag_from([cr(0.5), cr(0.0)])).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(&mut rng, 4, 4) + CMat::identity(4, 4).scale(2.0);
        let inv = a.clone().try_inverse().unwrap();
        assert!((pseudo_inverse(&a) - &inv).norm() <= 1e-9 * inv.norm());
    }

    fn assert_penrose(a: &CMat) {
        let p = pseudo_inverse(a);
        let scale = a.norm().max(1.0) * p.norm().max(1.0);
        assert!((a * &p * a - a).norm() <= 1e-9 * scale);
        assert!((&p * a * &p - &p).norm() <= 1e-9 * scale);
        let ap = a * &p;
        let pa = &p * a;
        assert!((&ap - ap.adjoint()).norm() <= 1e-9 * scale);
        assert!((&pa - pa.adjoint()).norm() <= 1e-9 * scale);
    }

    #[test]
    fn pinv_penrose_conditions_all_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, n) in [(3usize, 3usize), (4, 2), (2, 5)] {
            for rank in 0..=m.min(n) {
                let mut a = CMat::zeros(m, n);
                for _ in 0..rank {
                    let x = random_mat(&mut rng, m, 1);
                    let y = random_mat(&mut rng, n, 1);
                    a += &x * y.adjoint();
                }
                assert_penrose(&a);
            }
        }
    }

    #[test]
    fn fix_phase_makes_largest_entry_real_positive() {
        let mut x = CVec::from_vec(vec![c(0.1, 0.2), c(-0.5, 0.5), c(0.0, 0.3)]);
        fix_phase(&mut x);
        assert!(x[1].im.abs() < 1e-15 && x[1].re > 0.0);
    }
}
