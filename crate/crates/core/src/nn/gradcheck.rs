//! Central finite-difference checks for analytic gradients.

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate holding `max_rel_error`.
    pub worst: Option<usize>,
    pub checked: usize,
    /// Coordinates skipped because the one-sided slopes disagree, i.e. a
    /// kink lies within `h`.
    pub excluded: Vec<usize>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

#[inline]
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Compares `analytic` against `(f(x+h) − f(x−h)) / 2h` for every
/// coordinate of `params`.
pub fn gradient_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut x = params.to_vec();
    let f0 = f(&x);
    let kink_tol = h.sqrt();
    let mut report = GradCheckReport::default();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        let central = (fp - fm) / (2.0 * h);
        let fwd = (fp - f0) / h;
        let bwd = (f0 - fm) / h;
        if (fwd - bwd).abs() > kink_tol * central.abs().max(1.0) {
            report.excluded.push(i);
            continue;
        }
        report.checked += 1;
        let e = relative_error(analytic[i], central);
        if e > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(e);
            report.worst = Some(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exact() {
        let c = [0.5, -3.0, 2.25];
        let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let r = gradient_check(f, &[1.0, 2.0, 3.0], &c, 1e-6);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn relu_kink_is_excluded() {
        let f = |x: &[f64]| x[0].max(0.0) + x[1] * x[1];
        let r = gradient_check(f, &[0.0, 1.0], &[0.0, 2.0], 1e-6);
        assert_eq!(r.excluded, vec![0]);
        assert_eq!(r.checked, 1);
        assert!(r.passes(1e-4));
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let f = |x: &[f64]| x[0] * x[0];
        let r = gradient_check(f, &[1.0], &[3.0], 1e-6);
        assert!(!r.passes(1e-4));
    }
}
