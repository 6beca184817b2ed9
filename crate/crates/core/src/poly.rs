//! Dense univariate polynomials with coefficients in ascending order of degree.

use nalgebra::DMatrix;

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
    add(a, &neg)
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

/// Drops leading coefficients that are negligible relative to the largest one.
fn trimmed(p: &[f64]) -> &[f64] {
    let max = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        return &p[..0];
    }
    let mut n = p.len();
    while n > 1 && p[n - 1].abs() <= 1e-14 * max {
        n -= 1;
    }
    &p[..n]
}

/// Real roots via the eigenvalues of the companion matrix, each polished by
/// `newton_steps` Newton iterations. Roots whose imaginary part exceeds
/// `imag_tol * max(1, |re|)` are discarded.
pub fn real_roots(p: &[f64], imag_tol: f64, newton_steps: usize) -> Vec<f64> {
    let p = trimmed(p);
    if p.len() < 2 {
        return Vec::new();
    }
    let n = p.len() - 1;
    let lead = p[n];
    let roots: Vec<f64> = if n == 1 {
        vec![-p[0] / lead]
    } else {
        let mut c = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            c[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            c[(i, n - 1)] = -p[i] / lead;
        }
        c.complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= imag_tol * z.re.abs().max(1.0))
            .map(|z| z.re)
            .collect()
    };
    let dp = derivative(p);
    roots
        .into_iter()
        .map(|mut x| {
            for _ in 0..newton_steps {
                let d = eval(&dp, x);
                if d == 0.0 {
                    break;
                }
                let step = eval(p, x) / d;
                if !step.is_finite() {
                    break;
                }
                x -= step;
            }
            x
        })
        .filter(|x| x.is_finite())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(mul(&[1.0, 1.0], &[-1.0, 1.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(eval(&[1.0, 2.0, 3.0], 2.0), 17.0);
        assert_eq!(derivative(&[1.0, 2.0, 3.0]), vec![2.0, 6.0]);
        assert_eq!(sub(&[1.0], &[0.0, 1.0]), vec![1.0, -1.0]);
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (x-1)(x+2)(x-3)(x^2+1)
        let p = mul(
            &mul(&mul(&[-1.0, 1.0], &[2.0, 1.0]), &[-3.0, 1.0]),
            &[1.0, 0.0, 1.0],
        );
        let mut r = real_roots(&p, 1e-8, 1);
        r.sort_by(f64::total_cmp);
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([-2.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(real_roots(&[], 1e-8, 1).is_empty());
        assert!(real_roots(&[0.0, 0.0], 1e-8, 1).is_empty());
        assert!(real_roots(&[5.0], 1e-8, 1).is_empty());
        assert_eq!(real_roots(&[2.0, -1.0, 0.0], 1e-8, 1), vec![2.0]);
    }
}
