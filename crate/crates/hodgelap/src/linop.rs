//! Matrix-free linear operators on raw coefficient slices.
//!
//! Every projection, fill/squeeze plan and solver in this crate is a
//! `LinOp`; the dense oracle materializes them column by column.

/// A composable linear operator with explicit transpose application.
pub trait LinOp {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply(x, &mut out);
        out
    }

    fn apply_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.apply_transpose(x, &mut out);
        out
    }
}

/// Identity on n coordinates.
pub struct IdentityOp(pub usize);

impl LinOp for IdentityOp {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

/// out = a * op(x).
pub struct ScaledOp<'a> {
    pub op: &'a dyn LinOp,
    pub a: f64,
}

impl LinOp for ScaledOp<'_> {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        for v in out.iter_mut() {
            *v *= self.a;
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply_transpose(x, out);
        for v in out.iter_mut() {
            *v *= self.a;
        }
    }
}

/// Composition first, then second (i.e. second * first as matrices).
pub struct ComposedOp<'a> {
    pub first: &'a dyn LinOp,
    pub second: &'a dyn LinOp,
}

impl LinOp for ComposedOp<'_> {
    fn rows(&self) -> usize {
        self.second.rows()
    }
    fn cols(&self) -> usize {
        self.first.cols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mid = self.first.apply_vec(x);
        self.second.apply(&mid, out);
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let mid = self.second.apply_transpose_vec(x);
        self.first.apply_transpose(&mid, out);
    }
}

/// Estimates the operator 2-norm by power iteration on op^T op.
/// Deterministic given the fixed starting vector.
pub fn operator_norm_est(op: &dyn LinOp, iters: usize) -> f64 {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 2654435761usize) % 1000) as f64 / 1000.0)
        .collect();
    let mut norm = 0.0f64;
    for _ in 0..iters {
        let w = op.apply_vec(&v);
        let u = op.apply_transpose_vec(&w);
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 {
            return 0.0;
        }
        norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = u;
        for x in v.iter_mut() {
            *x /= nu;
        }
    }
    // One more apply for a Rayleigh-quotient-quality estimate.
    let w = op.apply_vec(&v);
    let est = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    est.max(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct DiagOp(Vec<f64>);
    impl LinOp for DiagOp {
        fn rows(&self) -> usize {
            self.0.len()
        }
        fn cols(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            for i in 0..x.len() {
                out[i] = self.0[i] * x[i];
            }
        }
        fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
            self.apply(x, out);
        }
    }

    #[test]
    fn norm_estimate_of_diagonal() {
        let op = DiagOp(vec![0.5, -2.0, 1.0, 0.25]);
        let est = operator_norm_est(&op, 60);
        assert!((est - 2.0).abs() < 1e-9);
    }

    #[test]
    fn composition_matches_manual() {
        let a = DiagOp(vec![2.0, 3.0]);
        let b = DiagOp(vec![-1.0, 4.0]);
        let c = ComposedOp { first: &a, second: &b };
        assert_eq!(c.apply_vec(&[1.0, 1.0]), vec![-2.0, 12.0]);
        assert_eq!(c.apply_transpose_vec(&[1.0, 1.0]), vec![-2.0, 12.0]);
    }
}
