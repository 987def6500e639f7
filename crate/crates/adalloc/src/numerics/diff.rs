//! Exact derivatives via [`Dual2`] seeding, plus the independent
//! finite-difference oracle used to cross-check them.

use super::dual::Dual2;
use super::linalg::Mat;
use super::scalar::DomainError;
use super::NumericsError;

/// Value, gradient, and Hessian of `f` at `point`, computed exactly by
/// second-order forward-mode AD (no truncation error).
pub fn grad_hess<F>(f: F, point: &[f64]) -> Result<(f64, Vec<f64>, Mat<f64>), NumericsError>
where
    F: Fn(&[Dual2]) -> Result<Dual2, DomainError>,
{
    let n = point.len();
    let vars = Dual2::variables(point);
    let out = f(&vars)?;
    let value = out.value();
    let grad = out.gradient(n);
    let hess = Mat::from_vec(n, n, out.hessian_raw(n));
    if !value.is_finite()
        || grad.iter().any(|g| !g.is_finite())
        || hess.data().iter().any(|h| !h.is_finite())
    {
        return Err(NumericsError::Domain(DomainError::new(
            "grad_hess",
            "non-finite derivative in composition",
        )));
    }
    Ok((value, grad, hess))
}

/// Central-difference gradient and Hessian estimates with step `h`;
/// agreement with [`grad_hess`] is O(h^2). This path never touches the AD
/// carriers, so it stays an independent oracle.
pub fn fd_check<F>(f: F, point: &[f64], h: f64) -> Result<(Vec<f64>, Mat<f64>), NumericsError>
where
    F: Fn(&[f64]) -> Result<f64, DomainError>,
{
    assert!(h > 0.0, "fd_check step must be positive");
    let n = point.len();
    let eval = |p: &[f64]| -> Result<f64, NumericsError> { Ok(f(p)?) };
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut p = point.to_vec();
        p[i] += si * h;
        p[j] += sj * h;
        p
    };

    let f0 = eval(point)?;
    let mut grad = vec![0.0; n];
    let mut hess = Mat::zeros(n, n);
    for i in 0..n {
        let fp = eval(&shifted(i, 1.0, i, 0.0))?;
        let fm = eval(&shifted(i, -1.0, i, 0.0))?;
        grad[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let fpp = eval(&shifted(i, 1.0, j, 1.0))?;
            let fpm = eval(&shifted(i, 1.0, j, -1.0))?;
            let fmp = eval(&shifted(i, -1.0, j, 1.0))?;
            let fmm = eval(&shifted(i, -1.0, j, -1.0))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Scalar;

    #[test]
    fn polynomial_identities() {
        // f(x) = x^2 at 3.
        let (v, g, h) = grad_hess(|x| Ok(x[0].clone() * x[0].clone()), &[3.0]).unwrap();
        assert_eq!((v, g[0], h[(0, 0)]), (9.0, 6.0, 2.0));

        // f(x, y) = x * y at (2, 5).
        let (v, g, h) = grad_hess(|x| Ok(x[0].clone() * x[1].clone()), &[2.0, 5.0]).unwrap();
        assert_eq!(v, 10.0);
        assert_eq!(g, vec![5.0, 2.0]);
        assert_eq!((h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]), (0.0, 1.0, 1.0, 0.0));

        // f(x) = log x at 1.
        let (v, g, h) = grad_hess(|x| x[0].ln(), &[1.0]).unwrap();
        assert_eq!((v, g[0], h[(0, 0)]), (0.0, 1.0, -1.0));
    }

    #[test]
    fn domain_violation_names_primitive() {
        let err = grad_hess(|x| x[0].ln(), &[-1.0]).unwrap_err();
        match err {
            NumericsError::Domain(d) => assert_eq!(d.primitive, "ln"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fd_cubic_gradient() {
        let (g, _) = fd_check(|x| Ok(x[0] * x[0] * x[0]), &[2.0], 1e-4).unwrap();
        assert!((g[0] - 12.0).abs() < 1e-6);
    }

    #[test]
    fn fd_exponential_hessian() {
        let (_, h) = fd_check(|x| Ok(x[0].exp()), &[0.0], 1e-4).unwrap();
        assert!((h[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ad_and_fd_agree_on_smooth_composition() {
        // f = exp(sin(x) * y) + log(1 + x^2 + y^2) - tanh(x / 3)
        fn f<S: Scalar>(p: &[S]) -> Result<S, crate::numerics::DomainError> {
            let x = p[0].clone();
            let y = p[1].clone();
            let a = (x.sin() * y.clone()).exp();
            let b = (S::from_real(1.0) + x.powi(2) + y.powi(2)).ln()?;
            let c = (x * S::from_real(1.0 / 3.0)).tanh();
            Ok(a + b - c)
        }
        let pt = [0.4, -0.7];
        let (_, g, h) = grad_hess(|p| f(p), &pt).unwrap();
        let (gf, hf) = fd_check(|p| f(p), &pt, 1e-4).unwrap();
        for i in 0..2 {
            assert!((g[i] - gf[i]).abs() / (1.0 + g[i].abs()) < 1e-7);
            for j in 0..2 {
                assert!((h[(i, j)] - hf[(i, j)]).abs() / (1.0 + h[(i, j)].abs()) < 1e-5);
            }
        }
    }
}
