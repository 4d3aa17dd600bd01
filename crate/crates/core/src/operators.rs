//! Nonlinear operators `A(t, u)` together with the structural constants
//! (coercivity, growth, weak monotonicity) that the solvers and the energy
//! checks rely on.
//!
//! All shipped operators are monotone and hemicontinuous, hence of type M;
//! that property is an assumption recorded here, not something sampled.

use std::sync::Arc;

use crate::bform::BForm;
use crate::linalg::{dot, norm2, sub, Mat};
use crate::scalar::Real;

pub type ApplyFn<S> = Arc<dyn Fn(S, &[S]) -> Vec<S> + Send + Sync>;
pub type JacobianFn<S> = Arc<dyn Fn(S, &[S]) -> Mat<S> + Send + Sync>;
pub type NormFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
pub type TimeFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

/// `‖A(t, v)‖_{V′} ≤ g(t) + c‖v‖_V^{p−1}`.
#[derive(Clone)]
pub struct GrowthBound<S> {
    pub c: S,
    pub g: TimeFn<S>,
}

/// Constants in `λ⟨Bu,u⟩ + ⟨A(t,u),u⟩ ≥ k‖u‖ᵖ − C(t)`, the growth bound and
/// the weak-monotonicity shift.
#[derive(Clone)]
pub struct OperatorMetadata<S> {
    pub p: S,
    pub coercivity_k: S,
    pub coercivity_shift_lambda: S,
    pub coercivity_c: TimeFn<S>,
    /// `None` when no uniform bound is known.
    pub growth: Option<GrowthBound<S>>,
    /// `λ` such that `λB + A` is monotone, if any.
    pub monotone_lambda: Option<S>,
}

impl<S: Real> OperatorMetadata<S> {
    /// `p = 2`, no coercivity, no growth bound, no monotonicity claim.
    pub fn unconstrained() -> Self {
        Self {
            p: S::lit(2.0),
            coercivity_k: S::zero(),
            coercivity_shift_lambda: S::zero(),
            coercivity_c: Arc::new(|_| S::zero()),
            growth: None,
            monotone_lambda: None,
        }
    }
}

impl<S: Real> std::fmt::Debug for OperatorMetadata<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorMetadata")
            .field("p", &self.p)
            .field("coercivity_k", &self.coercivity_k)
            .field("coercivity_shift_lambda", &self.coercivity_shift_lambda)
            .field("growth_c", &self.growth.as_ref().map(|g| g.c))
            .field("monotone_lambda", &self.monotone_lambda)
            .finish()
    }
}

/// Deterministic map `(t, u) ↦ A(t, u)` from states to covectors.
#[derive(Clone)]
pub struct NonlinearOperator<S> {
    dim: usize,
    apply: ApplyFn<S>,
    jacobian: Option<JacobianFn<S>>,
    pub metadata: OperatorMetadata<S>,
    v_norm: NormFn<S>,
    dual_norm: NormFn<S>,
    /// `K` when `A(t, u) = Ku`, so steppers can factor the resolvent once.
    linear_part: Option<Mat<S>>,
}

impl<S: Real> std::fmt::Debug for NonlinearOperator<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearOperator")
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl<S: Real> NonlinearOperator<S> {
    /// Euclidean norms and unconstrained metadata; refine with the `with_*` builders.
    pub fn new(dim: usize, apply: impl Fn(S, &[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            apply: Arc::new(apply),
            jacobian: None,
            metadata: OperatorMetadata::unconstrained(),
            v_norm: Arc::new(|u: &[S]| norm2(u)),
            dual_norm: Arc::new(|a: &[S]| norm2(a)),
            linear_part: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(S, &[S]) -> Mat<S> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_metadata(mut self, metadata: OperatorMetadata<S>) -> Self {
        self.metadata = metadata;
        self
    }

    /// Discrete `V` norm and the matching `V′` norm on covectors.
    pub fn with_norms(
        mut self,
        v_norm: impl Fn(&[S]) -> S + Send + Sync + 'static,
        dual_norm: impl Fn(&[S]) -> S + Send + Sync + 'static,
    ) -> Self {
        self.v_norm = Arc::new(v_norm);
        self.dual_norm = Arc::new(dual_norm);
        self
    }

    /// `A(u) = Ku` with exact Jacobian `K`.
    pub fn linear(k: Mat<S>) -> Self {
        let dim = k.rows();
        let (kk, kj) = (k.clone(), k.clone());
        let mut op = Self::new(dim, move |_, u| kk.mul_vec(u)).with_jacobian(move |_, _| kj.clone());
        op.linear_part = Some(k);
        op
    }

    /// `A ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::linear(Mat::zeros(dim, dim))
    }

    /// The matrix `K` if the operator was built by [`NonlinearOperator::linear`].
    pub fn as_linear(&self) -> Option<&Mat<S>> {
        self.linear_part.as_ref()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, t: S, u: &[S]) -> Vec<S> {
        (self.apply)(t, u)
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Analytic Jacobian when available, forward differences otherwise.
    pub fn jacobian(&self, t: S, u: &[S]) -> Mat<S> {
        if let Some(j) = &self.jacobian {
            return j(t, u);
        }
        let base = self.apply(t, u);
        let sqrt_eps = S::epsilon().sqrt();
        let mut cols = Vec::with_capacity(self.dim);
        let mut probe = u.to_vec();
        for k in 0..self.dim {
            let h = sqrt_eps * (S::one() + u[k].abs());
            probe[k] = u[k] + h;
            let h_eff = probe[k] - u[k];
            let shifted = self.apply(t, &probe);
            cols.push(shifted.iter().zip(&base).map(|(&a, &b)| (a - b) / h_eff).collect());
            probe[k] = u[k];
        }
        Mat::from_columns(&cols)
    }

    pub fn v_norm(&self, u: &[S]) -> S {
        (self.v_norm)(u)
    }

    pub fn dual_norm(&self, a: &[S]) -> S {
        (self.dual_norm)(a)
    }
}

fn violation_floor<S: Real>(scale: S) -> S {
    -S::lit(1e-9) * (S::one() + scale)
}

/// One evaluated sample of a structural inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckSample<S> {
    pub index: usize,
    /// Left side minus right side; should be nonnegative.
    pub margin: S,
    /// Magnitude of the terms involved, used for the violation threshold.
    pub scale: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport<S> {
    pub samples: Vec<CheckSample<S>>,
    pub violations: Vec<usize>,
}

impl<S> Default for CheckReport<S> {
    fn default() -> Self {
        Self { samples: Vec::new(), violations: Vec::new() }
    }
}

impl<S: Real> CheckReport<S> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst_margin(&self) -> Option<S> {
        self.samples.iter().map(|s| s.margin).reduce(S::min)
    }

    fn push(&mut self, index: usize, margin: S, scale: S) {
        if margin < violation_floor(scale) {
            self.violations.push(index);
        }
        self.samples.push(CheckSample { index, margin, scale });
    }
}

/// Evaluates `λ⟨Bu,u⟩ + ⟨A(t,u),u⟩ − (k‖u‖ᵖ_V − C(t))` on each sample.
pub fn check_coercivity<S: Real>(a: &NonlinearOperator<S>, b: &BForm<S>, samples: &[(S, Vec<S>)]) -> CheckReport<S> {
    let md = &a.metadata;
    let mut report = CheckReport::default();
    for (i, (t, u)) in samples.iter().enumerate() {
        let shift = md.coercivity_shift_lambda * b.energy(u);
        let au = dot(&a.apply(*t, u), u);
        let bound = md.coercivity_k * a.v_norm(u).powf(md.p);
        let c = (md.coercivity_c)(*t);
        let margin = shift + au - (bound - c);
        report.push(i, margin, shift.abs() + au.abs() + bound.abs() + c.abs());
    }
    report
}

/// Evaluates `⟨λB(u−v) + A(t,u) − A(t,v), u − v⟩` on each pair, with `λ`
/// taken from the metadata (zero when absent).
pub fn check_monotonicity<S: Real>(
    a: &NonlinearOperator<S>,
    b: &BForm<S>,
    pairs: &[(S, Vec<S>, Vec<S>)],
) -> CheckReport<S> {
    let lambda = a.metadata.monotone_lambda.unwrap_or_else(S::zero);
    let mut report = CheckReport::default();
    for (i, (t, u, v)) in pairs.iter().enumerate() {
        let diff = sub(u, v);
        let shift = lambda * b.energy(&diff);
        let au = dot(&a.apply(*t, u), &diff);
        let av = dot(&a.apply(*t, v), &diff);
        let margin = shift + au - av;
        report.push(i, margin, shift.abs() + au.abs() + av.abs());
    }
    report
}

/// Evaluates `g(t) + c‖v‖^{p−1} − ‖A(t,v)‖_{V′}` on each sample; skipped
/// (empty report) when the operator carries no growth bound.
pub fn check_growth<S: Real>(a: &NonlinearOperator<S>, samples: &[(S, Vec<S>)]) -> CheckReport<S> {
    let mut report = CheckReport::default();
    let Some(growth) = &a.metadata.growth else {
        return report;
    };
    let p = a.metadata.p;
    for (i, (t, v)) in samples.iter().enumerate() {
        let lhs = a.dual_norm(&a.apply(*t, v));
        let rhs = (growth.g)(*t) + growth.c * a.v_norm(v).powf(p - S::one());
        report.push(i, rhs - lhs, lhs.abs() + rhs.abs());
    }
    report
}

/// `A_λ(t, w) = e^{−λt} A(t, e^{λt} w)`.
///
/// Coercivity with the original shift carries over with
/// `k̄ = k·inf_t e^{(p−2)λt}` and `C̄(t) = e^{−2λt}C(t)`; the infimum over
/// `t ≥ 0` is `k` when `(p−2)λ ≥ 0` and zero otherwise. The growth bound
/// keeps `c` only when `(p−2)λ ≤ 0`. Weak monotonicity is preserved.
pub fn exp_shift<S: Real>(a: &NonlinearOperator<S>, lambda: S) -> NonlinearOperator<S> {
    let inner = a.apply.clone();
    let apply = move |t: S, w: &[S]| {
        let up = (lambda * t).exp();
        let down = (-lambda * t).exp();
        let x: Vec<S> = w.iter().map(|&v| v * up).collect();
        inner(t, &x).into_iter().map(|v| v * down).collect()
    };
    let jacobian: Option<JacobianFn<S>> = a.jacobian.clone().map(|j| {
        let f: JacobianFn<S> = Arc::new(move |t: S, w: &[S]| {
            let up = (lambda * t).exp();
            let x: Vec<S> = w.iter().map(|&v| v * up).collect();
            j(t, &x)
        });
        f
    });

    let md = &a.metadata;
    let p = md.p;
    let rate = (p - S::lit(2.0)) * lambda;
    let c_old = md.coercivity_c.clone();
    let growth = md.growth.as_ref().and_then(|g| {
        if rate <= S::zero() {
            let g_old = g.g.clone();
            Some(GrowthBound { c: g.c, g: Arc::new(move |t: S| (-lambda * t).exp() * g_old(t)) })
        } else {
            None
        }
    });
    let metadata = OperatorMetadata {
        p,
        coercivity_k: if rate >= S::zero() { md.coercivity_k } else { S::zero() },
        coercivity_shift_lambda: md.coercivity_shift_lambda,
        coercivity_c: Arc::new(move |t: S| (-S::lit(2.0) * lambda * t).exp() * c_old(t)),
        growth,
        monotone_lambda: md.monotone_lambda,
    };
    NonlinearOperator {
        dim: a.dim,
        apply: Arc::new(apply),
        jacobian,
        metadata,
        v_norm: a.v_norm.clone(),
        dual_norm: a.dual_norm.clone(),
        linear_part: a.linear_part.clone(),
    }
}

/// Metric projection onto the closed ball of the given radius in the norm
/// `‖u‖_H = √(uᵀ H u)`.
pub fn ball_project<S: Real>(u: &[S], radius: S, h_mass: &Mat<S>) -> Vec<S> {
    let norm = h_mass.quad(u).max(S::zero()).sqrt();
    if norm <= radius {
        u.to_vec()
    } else {
        let s = radius / norm;
        u.iter().map(|&v| v * s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(dim: usize) -> NonlinearOperator<f64> {
        NonlinearOperator::new(dim, |_, u: &[f64]| u.iter().map(|v| v * v * v).collect())
    }

    #[test]
    fn coercivity_of_zero_operator() {
        let a = NonlinearOperator::<f64>::zero(3);
        let b = BForm::identity(3);
        let r = check_coercivity(&a, &b, &[(0.0, vec![1.0, 2.0, 3.0]), (1.0, vec![-5.0, 0.0, 1.0])]);
        assert!(r.passed());
    }

    #[test]
    fn laplacian_coercivity_uses_smallest_eigenvalue() {
        let n = 15;
        let h = 1.0 / (n as f64 + 1.0);
        let lap = Mat::from_fn(n, n, |i, j| match (i as i64 - j as i64).abs() {
            0 => 2.0 / (h * h),
            1 => -1.0 / (h * h),
            _ => 0.0,
        });
        let lam_min = 2.0 * (1.0 - (std::f64::consts::PI / (n as f64 + 1.0)).cos()) / (h * h);
        let mut md = OperatorMetadata::unconstrained();
        md.coercivity_k = lam_min;
        let a = NonlinearOperator::linear(lap).with_metadata(md.clone());
        let b = BForm::zero(n);
        let samples: Vec<(f64, Vec<f64>)> =
            (0..50).map(|s| (0.0, (0..n).map(|i| ((i * 7 + s * 13) % 11) as f64 - 5.0).collect())).collect();
        assert!(check_coercivity(&a, &b, &samples).passed());
        // The lowest mode attains the bound, so a slightly larger k must fail there.
        md.coercivity_k = lam_min * (1.0 + 1e-6);
        let a = a.with_metadata(md);
        let mode: Vec<f64> = (1..=n).map(|i| (std::f64::consts::PI * i as f64 * h).sin()).collect();
        assert!(!check_coercivity(&a, &b, &[(0.0, mode)]).passed());
    }

    #[test]
    fn monotonicity_examples() {
        let b = BForm::identity(1);
        let k = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let lin = NonlinearOperator::linear(k);
        let pairs: Vec<_> = (0..20).map(|i| (0.0, vec![i as f64, -1.0], vec![0.5, i as f64 * 0.3])).collect();
        assert!(check_monotonicity(&lin, &BForm::identity(2), &pairs).passed());

        let pairs: Vec<_> = (-10..10).map(|i| (0.0, vec![i as f64 * 0.7], vec![3.0 - i as f64])).collect();
        assert!(check_monotonicity(&cubic(1), &b, &pairs).passed());

        let neg = NonlinearOperator::new(1, |_, u: &[f64]| vec![-u[0]]);
        let r = check_monotonicity(&neg, &b, &[(0.0, vec![1.0], vec![0.0])]);
        assert_eq!(r.violations, vec![0]);
        assert_eq!(r.samples[0].margin, -1.0);
    }

    #[test]
    fn exp_shift_examples() {
        let a = cubic(2);
        let same = exp_shift(&a, 0.0);
        assert_eq!(same.apply(0.7, &[1.5, -2.0]), a.apply(0.7, &[1.5, -2.0]));

        let lin = NonlinearOperator::linear(Mat::<f64>::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]));
        let shifted = exp_shift(&lin, 0.8);
        let (x, y) = (shifted.apply(1.3, &[0.4, -1.1]), lin.apply(1.3, &[0.4, -1.1]));
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-14);
        }

        let shifted = exp_shift(&cubic(1), 2f64.ln());
        let w = 0.9;
        assert!((shifted.apply(1.0, &[w])[0] - 4.0 * w * w * w).abs() < 1e-14);
    }

    #[test]
    fn exp_shift_jacobian_matches_differences() {
        let a = cubic(2).with_jacobian(|_, u: &[f64]| Mat::from_diag(&[3.0 * u[0] * u[0], 3.0 * u[1] * u[1]]));
        let s = exp_shift(&a, 0.5);
        let analytic = s.jacobian(0.4, &[0.3, -0.8]);
        let plain = NonlinearOperator::new(2, {
            let s = s.clone();
            move |t, u: &[f64]| s.apply(t, u)
        });
        let fd = plain.jacobian(0.4, &[0.3, -0.8]);
        assert!(analytic.sub(&fd).max_abs() < 1e-6);
    }

    #[test]
    fn exp_shift_metadata_transforms() {
        let mut md = OperatorMetadata::unconstrained();
        md.p = 3.0;
        md.coercivity_k = 2.0;
        md.coercivity_c = Arc::new(|_| 1.0);
        md.growth = Some(GrowthBound { c: 1.0, g: Arc::new(|_| 0.5) });
        md.monotone_lambda = Some(0.0);
        let a = cubic(1).with_metadata(md);
        let up = exp_shift(&a, 1.0);
        assert_eq!(up.metadata.coercivity_k, 2.0);
        assert!(((up.metadata.coercivity_c)(1.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!(up.metadata.growth.is_none());
        assert_eq!(up.metadata.monotone_lambda, Some(0.0));
        let down = exp_shift(&a, -1.0);
        assert_eq!(down.metadata.coercivity_k, 0.0);
        let g = down.metadata.growth.as_ref().unwrap();
        assert!(((g.g)(1.0) - 0.5 * 1f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn ball_projection_examples() {
        let h = Mat::<f64>::identity(2);
        assert_eq!(ball_project(&[0.3, 0.4], 1.0, &h), vec![0.3, 0.4]);
        let p = ball_project(&[3.0, 4.0], 1.0, &h);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(ball_project(&p, 1.0, &h), p);
    }
}
