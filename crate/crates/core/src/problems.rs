//! Shipped problems: an Ornstein–Uhlenbeck oracle, the stochastic porous
//! media equation in inverse-Laplacian form, a degenerate p-Laplacian and
//! a fully degenerate `B = 0` case.
//!
//! The spatial problems live on a uniform 1D grid with homogeneous
//! Dirichlet ends. Both `A` and `B` carry the quadrature weight `h` so that
//! discrete pairings approximate the continuum `L²` pairings.

use std::sync::Arc;

use crate::bform::BForm;
use crate::error::{Error, Result};
use crate::integrator::{ForcingFn, Problem};
use crate::linalg::{Cholesky, Mat};
use crate::noise::NoiseModel;
use crate::operators::{GrowthBound, NonlinearOperator, OperatorMetadata};
use crate::scalar::Real;

/// `n` interior nodes `xᵢ = i·h`, `h = L/(n+1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D<S> {
    pub n: usize,
    pub length: S,
}

impl<S: Real> Grid1D<S> {
    pub fn new(n: usize, length: S) -> Result<Self> {
        if n == 0 || !(length > S::zero()) {
            return Err(Error::InvalidConfig(format!("grid needs n > 0 and length > 0 (n = {n}, length = {length})")));
        }
        Ok(Self { n, length })
    }

    pub fn unit(n: usize) -> Self {
        Self { n, length: S::one() }
    }

    pub fn h(&self) -> S {
        self.length / S::from_usize_lossy(self.n + 1)
    }

    pub fn nodes(&self) -> Vec<S> {
        let h = self.h();
        (1..=self.n).map(|i| S::from_usize_lossy(i) * h).collect()
    }

    /// Tridiagonal Dirichlet Laplacian `L_h = tridiag(−1, 2, −1)/h²`.
    pub fn laplacian(&self) -> Mat<S> {
        let h2 = self.h() * self.h();
        let diag = S::lit(2.0) / h2;
        let off = -S::one() / h2;
        Mat::from_fn(self.n, self.n, |i, j| match i.abs_diff(j) {
            0 => diag,
            1 => off,
            _ => S::zero(),
        })
    }

    /// Eigenvalues `2(1 − cos(kπ/(n+1)))/h²`, `k = 1..n`, ascending.
    pub fn laplacian_eigenvalues(&self) -> Vec<S> {
        let h2 = self.h() * self.h();
        let np1 = S::from_usize_lossy(self.n + 1);
        (1..=self.n)
            .map(|k| {
                S::lit(2.0) * (S::one() - (S::from_usize_lossy(k) * S::lit(std::f64::consts::PI) / np1).cos()) / h2
            })
            .collect()
    }

    /// `sin(kπx/L)` sampled at the nodes.
    pub fn sine_mode(&self, k: usize) -> Vec<S> {
        let pi = S::lit(std::f64::consts::PI);
        let kk = S::from_usize_lossy(k);
        self.nodes().into_iter().map(|x| (kk * pi * x / self.length).sin()).collect()
    }

    /// Forward differences on the `n + 1` edges, zero Dirichlet values outside.
    pub fn gradient(&self, u: &[S]) -> Vec<S> {
        let h = self.h();
        (0..=self.n)
            .map(|e| {
                let right = if e < self.n { u[e] } else { S::zero() };
                let left = if e > 0 { u[e - 1] } else { S::zero() };
                (right - left) / h
            })
            .collect()
    }

    /// Transpose of [`Grid1D::gradient`] applied to edge values.
    pub fn gradient_adjoint(&self, flux: &[S]) -> Vec<S> {
        let h = self.h();
        (0..self.n).map(|i| (flux[i] - flux[i + 1]) / h).collect()
    }

    /// Weighted discrete `ℓᵖ` norm `(Σ h|uᵢ|ᵖ)^{1/p}`.
    pub fn lp_norm(&self, u: &[S], p: S) -> S {
        let h = self.h();
        u.iter().fold(S::zero(), |acc, v| acc + h * v.abs().powf(p)).powf(S::one() / p)
    }
}

/// Noise with `m` sine modes: `Q = diag(k^{−decay})`, column `k` of `Φ` is
/// `amplitude · sin(kπx)`.
pub fn sine_mode_noise<S: Real>(grid: &Grid1D<S>, modes: usize, amplitude: S, decay: S) -> Result<NoiseModel<S>> {
    let q: Vec<S> = (1..=modes).map(|k| S::from_usize_lossy(k).powf(-decay)).collect();
    let cols: Vec<Vec<S>> =
        (1..=modes).map(|k| grid.sine_mode(k).into_iter().map(|v| v * amplitude).collect()).collect();
    NoiseModel::constant(Mat::from_diag(&q), Mat::from_columns(&cols))
}

fn euclidean_growth<S: Real>(c: S) -> Option<GrowthBound<S>> {
    Some(GrowthBound { c, g: Arc::new(|_| S::zero()) })
}

/// `du = −λu dt + σ dW` in `ℝᵈ` with `B = R = W = I`, `Q = I`.
pub fn make_ou<S: Real>(d: usize, lambda: S, sigma: S, u0: Vec<S>, horizon: S) -> Result<Problem<S>> {
    if lambda < S::zero() {
        return Err(Error::InvalidConfig(format!("OU rate must be nonnegative, got {lambda}")));
    }
    let metadata = OperatorMetadata {
        p: S::lit(2.0),
        coercivity_k: lambda,
        coercivity_shift_lambda: S::zero(),
        coercivity_c: Arc::new(|_| S::zero()),
        growth: euclidean_growth(lambda),
        monotone_lambda: Some(S::zero()),
    };
    let a = NonlinearOperator::linear(Mat::identity(d).scale(lambda)).with_metadata(metadata);
    let noise = NoiseModel::constant(Mat::identity(d), Mat::identity(d).scale(sigma))?;
    Problem::new("ou", BForm::identity(d), Mat::identity(d), a, None, noise, u0, Mat::identity(d), horizon)
}

/// Closed-form second moment `E u(t)² = u₀²e^{−2λt} + σ²(1 − e^{−2λt})/(2λ)`
/// of the scalar OU process (`σ²t + u₀²` when `λ = 0`).
pub fn ou_second_moment(lambda: f64, sigma: f64, u0: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return u0 * u0 + sigma * sigma * t;
    }
    let decay = (-2.0 * lambda * t).exp();
    u0 * u0 * decay + sigma * sigma * (1.0 - decay) / (2.0 * lambda)
}

/// Stochastic porous media equation in inverse-Laplacian form:
/// `B = h L_h⁻¹`, `A(u)ᵢ = h uᵢ|uᵢ|^{p−2}`, `W = hI`, `V = ℓᵖ_h`.
pub fn make_porous_media<S: Real>(
    grid: &Grid1D<S>,
    p: S,
    noise: NoiseModel<S>,
    u0: Vec<S>,
    horizon: S,
) -> Result<Problem<S>> {
    if p < S::lit(2.0) {
        return Err(Error::UnsupportedExponent { p: p.to_f64_lossy() });
    }
    let n = grid.n;
    let h = grid.h();
    let lap = grid.laplacian();
    let lap_factor = Cholesky::new(&lap)?;
    let cols: Vec<Vec<S>> = (0..n)
        .map(|j| {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            lap_factor.solve(&e).into_iter().map(|v| v * h).collect()
        })
        .collect();
    let b = BForm::with_default_tol(Mat::from_columns(&cols))?;

    let pm2 = p - S::lit(2.0);
    let pm1 = p - S::one();
    let metadata = OperatorMetadata {
        p,
        coercivity_k: S::one(),
        coercivity_shift_lambda: S::zero(),
        coercivity_c: Arc::new(|_| S::zero()),
        growth: euclidean_growth(S::one()),
        monotone_lambda: Some(S::zero()),
    };
    let g = *grid;
    let a = NonlinearOperator::new(n, move |_, u: &[S]| u.iter().map(|&v| h * v * v.abs().powf(pm2)).collect())
        .with_jacobian(move |_, u: &[S]| {
            Mat::from_diag(&u.iter().map(|&v| h * pm1 * v.abs().powf(pm2)).collect::<Vec<_>>())
        })
        .with_metadata(metadata)
        .with_norms(
            move |u: &[S]| g.lp_norm(u, p),
            move |a: &[S]| {
                // Dual of the weighted ℓᵖ norm: (Σ h |aᵢ/h|^q)^{1/q}.
                let q = p / (p - S::one());
                let scaled: Vec<S> = a.iter().map(|&v| v / h).collect();
                g.lp_norm(&scaled, q)
            },
        );
    let r = Mat::identity(n).scale(h).add(&lap.scale(h));
    Problem::new("porous_media", b, r, a, None, noise, u0, Mat::identity(n).scale(h), horizon)
}

/// Degenerate p-Laplacian `b u − ∫∇·(|∇u|^{p−2}∇u) = b∫Φ dW`:
/// `B = diag(h b(xᵢ))`, `⟨Au, v⟩ = Σₑ h|∇ₕu|^{p−2}∇ₕu·∇ₕv`,
/// `R = W = hI + hL_h`, `V = W^{1,p}_0` with the edge `ℓᵖ` norm.
pub fn make_degenerate_plaplacian<S: Real>(
    grid: &Grid1D<S>,
    p: S,
    b_weight: impl Fn(S) -> S,
    noise: NoiseModel<S>,
    u0: Vec<S>,
    horizon: S,
) -> Result<Problem<S>> {
    if p < S::lit(2.0) {
        return Err(Error::UnsupportedExponent { p: p.to_f64_lossy() });
    }
    let n = grid.n;
    let h = grid.h();
    let weights: Vec<S> = grid.nodes().into_iter().map(b_weight).collect();
    if let Some((node, &w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= S::zero())) {
        return Err(Error::InvalidWeight { node, value: w.to_f64_lossy() });
    }
    let b = BForm::new(Mat::from_diag(&weights.iter().map(|&w| h * w).collect::<Vec<_>>()), S::zero())?;

    let pm2 = p - S::lit(2.0);
    let pm1 = p - S::one();
    let g = *grid;
    let apply = move |_: S, u: &[S]| {
        let flux: Vec<S> = g.gradient(u).into_iter().map(|d| h * d * d.abs().powf(pm2)).collect();
        g.gradient_adjoint(&flux)
    };
    let jacobian = move |_: S, u: &[S]| {
        // Dᵀ diag(h(p−1)|∇u|^{p−2}) D with D the edge difference matrix.
        let grad = g.gradient(u);
        let h2 = h * h;
        let w: Vec<S> = grad.iter().map(|d| h * pm1 * d.abs().powf(pm2) / h2).collect();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                w[i] + w[i + 1]
            } else if i + 1 == j {
                -w[i + 1]
            } else if j + 1 == i {
                -w[i]
            } else {
                S::zero()
            }
        })
    };
    let metadata = OperatorMetadata {
        p,
        coercivity_k: S::one(),
        coercivity_shift_lambda: S::zero(),
        coercivity_c: Arc::new(|_| S::zero()),
        growth: euclidean_growth(S::one()),
        monotone_lambda: Some(S::zero()),
    };
    let a = NonlinearOperator::new(n, apply).with_jacobian(jacobian).with_metadata(metadata).with_norms(
        move |u: &[S]| g.lp_norm(&g.gradient(u), p),
        move |a: &[S]| {
            // Fluxes with DᵀF = a differ by constants (the range of D is the
            // zero-mean edge vectors), so the dual norm is min over c of ‖F + c‖_q.
            let q = p / (p - S::one());
            let flux: Vec<S> = particular_flux(&g, a).into_iter().map(|v| v / h).collect();
            let c = argmin_shift(&flux, q);
            let shifted: Vec<S> = flux.iter().map(|&v| v + c).collect();
            edge_lp_norm(&g, &shifted, q)
        },
    );
    let lap = grid.laplacian();
    let riesz = Mat::identity(n).scale(h).add(&lap.scale(h));
    Problem::new("degenerate_plaplacian", b, riesz.clone(), a, None, noise, u0, riesz, horizon)
}

fn edge_lp_norm<S: Real>(grid: &Grid1D<S>, edge: &[S], p: S) -> S {
    let h = grid.h();
    edge.iter().fold(S::zero(), |acc, v| acc + h * v.abs().powf(p)).powf(S::one() / p)
}

/// Edge values `F` with `(F_i − F_{i+1})/h = aᵢ` and `F_0 = 0`.
fn particular_flux<S: Real>(grid: &Grid1D<S>, a: &[S]) -> Vec<S> {
    let h = grid.h();
    let mut out = Vec::with_capacity(grid.n + 1);
    let mut acc = S::zero();
    out.push(acc);
    for &v in a {
        acc -= h * v;
        out.push(acc);
    }
    out
}

/// Minimizer of the convex map `c ↦ Σ|Fₑ + c|^q` by bisection on its derivative.
fn argmin_shift<S: Real>(flux: &[S], q: S) -> S {
    let slope = |c: S| {
        flux.iter().fold(S::zero(), |acc, &f| {
            let v = f + c;
            acc + v.signum() * v.abs().powf(q - S::one())
        })
    };
    let mut lo = -flux.iter().copied().fold(S::neg_infinity(), S::max);
    let mut hi = -flux.iter().copied().fold(S::infinity(), S::min);
    for _ in 0..200 {
        let mid = (lo + hi) * S::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > S::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) * S::lit(0.5)
}

/// `B = 0` with `R = W = I`: the solve reduces to `εRu′ + A(u) = f` and
/// the noise can never enter.
pub fn make_zero_b<S: Real>(
    d: usize,
    a: NonlinearOperator<S>,
    f: Option<ForcingFn<S>>,
    noise: NoiseModel<S>,
    u0: Vec<S>,
    horizon: S,
) -> Result<Problem<S>> {
    Problem::new("zero_b", BForm::zero(d), Mat::identity(d), a, f, noise, u0, Mat::identity(d), horizon)
}
