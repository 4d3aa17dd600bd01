//! Time stepping for `d((B+εR)u) + (A(u) + εRu)dt = f dt + BΦ dW`.
//!
//! Drift and noise are evaluated at the left end of each step so the
//! discrete stochastic term stays adapted. The implicit scheme moves `A`
//! and `εR` to the new time level and solves the resulting monotone
//! equation with damped Newton.

use std::sync::Arc;

use rayon::prelude::*;

use crate::bform::BForm;
use crate::error::{Error, Result};
use crate::linalg::{add, all_finite, axpy, norm_inf, Cholesky, Lu, Mat, SymmetricEigen};
use crate::noise::{path_seed, sample_increments, NoiseModel, Partition, WienerPath};
use crate::operators::{ball_project, NonlinearOperator};
use crate::scalar::Real;

pub type EvalFn<S> = Arc<dyn Fn(&PathResult<S>, &Problem<S>) -> S + Send + Sync>;
pub type ForcingFn<S> = Arc<dyn Fn(S) -> Vec<S> + Send + Sync>;

/// Highest ball level tried by the truncated Picard solver.
pub const MAX_RADIUS_LEVEL: u32 = 60;

/// Discrete problem data.
#[derive(Clone)]
pub struct Problem<S> {
    pub name: String,
    pub b: BForm<S>,
    /// SPD Riesz map used for the ε-regularization.
    pub r: Mat<S>,
    pub a: NonlinearOperator<S>,
    f: Option<ForcingFn<S>>,
    pub noise: NoiseModel<S>,
    pub u0: Vec<S>,
    /// SPD Gram matrix of the pivot space `W`.
    pub w_mass: Mat<S>,
    pub horizon: S,
}

impl<S: Real> std::fmt::Debug for Problem<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("horizon", &self.horizon)
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

impl<S: Real> Problem<S> {
    /// Validates dimensions, `R` and `W` SPD, and a positive horizon.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        b: BForm<S>,
        r: Mat<S>,
        a: NonlinearOperator<S>,
        f: Option<ForcingFn<S>>,
        noise: NoiseModel<S>,
        u0: Vec<S>,
        w_mass: Mat<S>,
        horizon: S,
    ) -> Result<Self> {
        let d = b.dim();
        let check = |what: &'static str, found: usize| {
            if found == d {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { what, expected: d, found })
            }
        };
        check("regularization matrix", r.rows())?;
        check("regularization matrix columns", r.cols())?;
        check("operator", a.dim())?;
        check("noise state dimension", noise.state_dim())?;
        check("initial state", u0.len())?;
        check("W-Gram matrix", w_mass.rows())?;
        check("W-Gram matrix columns", w_mass.cols())?;
        if let Some(f) = &f {
            check("forcing", f(S::zero()).len())?;
        }
        Cholesky::new(&r)?;
        Cholesky::new(&w_mass)?;
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { name: name.into(), b, r, a, f, noise, u0, w_mass, horizon })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn forcing(&self, t: S) -> Vec<S> {
        match &self.f {
            Some(f) => f(t),
            None => vec![S::zero(); self.dim()],
        }
    }

    pub fn has_forcing(&self) -> bool {
        self.f.is_some()
    }

    pub fn with_u0(mut self, u0: Vec<S>) -> Result<Self> {
        if u0.len() != self.dim() {
            return Err(Error::DimensionMismatch { what: "initial state", expected: self.dim(), found: u0.len() });
        }
        self.u0 = u0;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: S) -> Self {
        self.horizon = horizon;
        self
    }

    /// `B Φ(t) ΔW`.
    pub fn noise_image(&self, t: S, dw: &[S]) -> Vec<S> {
        if dw.iter().all(|&v| v == S::zero()) {
            return vec![S::zero(); self.dim()];
        }
        match self.noise.constant_phi() {
            Some(phi) => self.b.apply(&phi.mul_vec(dw)),
            None => self.b.apply(&self.noise.phi(t).mul_vec(dw)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    ImplicitResolvent,
    PicardBall,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<S> {
    pub scheme: Scheme,
    pub epsilon: S,
    pub dt: S,
    pub newton_tol: S,
    pub newton_max_iter: usize,
    pub picard_tol: S,
    pub picard_max_iter: usize,
    /// `(radius base, stopping base)`: ball radius `r₀ⁿ`, escape when `sup‖u‖² > s₀ⁿ`.
    pub radius_base: (S, S),
    /// First ball level for the Picard solver; derived from `u₀` when `None`.
    pub picard_start_level: Option<u32>,
    pub seed: u64,
    /// Resolve the driving Wiener path on this many uniform intervals and
    /// sum down to the solver grid, so runs at different `dt` share one path.
    pub noise_grid_steps: Option<usize>,
}

impl<S: Real> Default for SolverConfig<S> {
    fn default() -> Self {
        Self {
            scheme: Scheme::ImplicitResolvent,
            epsilon: S::zero(),
            dt: S::lit(1e-3),
            newton_tol: S::lit(1e-12),
            newton_max_iter: 50,
            picard_tol: S::lit(1e-13),
            picard_max_iter: 10_000,
            radius_base: (S::lit(9.0), S::lit(2.0)),
            picard_start_level: None,
            seed: 0,
            noise_grid_steps: None,
        }
    }
}

impl<S: Real> SolverConfig<S> {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(mut self, dt: S) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_epsilon(mut self, epsilon: S) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise_grid(mut self, steps: usize) -> Self {
        self.noise_grid_steps = Some(steps);
        self
    }

    /// Number of steps of size `dt` in `[0, horizon]`; `horizon/dt` must be
    /// an integer up to `1e-9` relative.
    pub fn steps(&self, horizon: S) -> Result<usize> {
        if !(self.dt > S::zero()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        let ratio = horizon / self.dt;
        let n = ratio.round();
        if n < S::one() || (ratio - n).abs() > S::lit(1e-9) * ratio {
            return Err(Error::InvalidConfig(format!(
                "horizon {horizon} is not an integer multiple of dt {}",
                self.dt
            )));
        }
        n.to_usize().ok_or_else(|| Error::InvalidConfig("step count overflow".into()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathFlags {
    /// The ball projection changed some iterate at the accepted level.
    pub truncation_active: bool,
    pub radius_escalations: u32,
    pub radius_level: Option<u32>,
}

/// One simulated trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct PathResult<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    pub wiener_increments: Vec<Vec<S>>,
    /// `M(tⱼ) = Σ_{i<j} Φ(tᵢ)ΔWᵢ`, in state coordinates.
    pub noise_path: Vec<Vec<S>>,
    pub newton_iterations: Vec<usize>,
    pub flags: PathFlags,
    pub seed: u64,
    pub epsilon: S,
}

impl<S: Real> PathResult<S> {
    pub fn dt(&self) -> S {
        self.times[1] - self.times[0]
    }

    pub fn terminal(&self) -> &[S] {
        self.states.last().expect("path has states")
    }
}

/// Cached `(B + εR)` factorization for repeated steps.
pub struct Stepper<'a, S> {
    problem: &'a Problem<S>,
    config: &'a SolverConfig<S>,
    mass: Mat<S>,
    mass_factor: Cholesky<S>,
    eps_r: Mat<S>,
    /// Factored `B + εR + dt(K + εR)` when `A = K` is linear.
    linear_resolvent: Option<Lu<S>>,
}

impl<'a, S: Real> Stepper<'a, S> {
    /// Fails with [`Error::SingularSystem`] unless the smallest eigenvalue of
    /// `B + εR` exceeds `1e-12` of its largest.
    pub fn new(problem: &'a Problem<S>, config: &'a SolverConfig<S>) -> Result<Self> {
        if config.epsilon < S::zero() {
            return Err(Error::InvalidConfig(format!("epsilon must be nonnegative, got {}", config.epsilon)));
        }
        let eps_r = problem.r.scale(config.epsilon);
        let mass = problem.b.matrix().add(&eps_r);
        let eig = SymmetricEigen::new(&mass);
        let scale = eig.max().abs();
        if !(eig.min() > S::lit(1e-12) * scale) || scale == S::zero() {
            return Err(Error::SingularSystem {
                detail: format!(
                    "B + εR has eigenvalue {:.3e} (largest {:.3e}) with ε = {}; a singular B needs ε > 0",
                    eig.min().to_f64_lossy(),
                    scale.to_f64_lossy(),
                    config.epsilon
                ),
            });
        }
        let mass_factor = Cholesky::new(&mass)?;
        let linear_resolvent = match (config.scheme, problem.a.as_linear()) {
            (Scheme::ImplicitResolvent, Some(k)) => {
                let system = mass.add(&k.scale(config.dt)).add(&eps_r.scale(config.dt));
                Some(Lu::new(&system, S::epsilon())?)
            }
            _ => None,
        };
        Ok(Self { problem, config, mass, mass_factor, eps_r, linear_resolvent })
    }

    pub fn mass(&self) -> &Mat<S> {
        &self.mass
    }

    fn drift(&self, t: S, u: &[S]) -> Vec<S> {
        let mut y = self.problem.forcing(t);
        axpy(-S::one(), &self.problem.a.apply(t, u), &mut y);
        if self.config.epsilon > S::zero() {
            axpy(-S::one(), &self.eps_r.mul_vec(u), &mut y);
        }
        y
    }

    /// `(B+εR)(u⁺ − u) = dt(f − A(t,u) − εRu) + BΦ(t)ΔW`.
    pub fn step_explicit(&self, t: S, u: &[S], dw: &[S]) -> Vec<S> {
        let dt = self.config.dt;
        let mut rhs: Vec<S> = self.drift(t, u).into_iter().map(|v| v * dt).collect();
        axpy(S::one(), &self.problem.noise_image(t, dw), &mut rhs);
        add(u, &self.mass_factor.solve(&rhs))
    }

    /// `(B+εR)u⁺ + dt(A(t,u⁺) + εRu⁺) = (B+εR)u + dt f(t) + BΦ(t)ΔW` by damped
    /// Newton. Returns the new state and the iteration count.
    pub fn step_implicit(&self, t: S, u: &[S], dw: &[S]) -> Result<(Vec<S>, usize)> {
        let dt = self.config.dt;
        let a = &self.problem.a;
        let mut rhs = self.mass.mul_vec(u);
        axpy(dt, &self.problem.forcing(t), &mut rhs);
        axpy(S::one(), &self.problem.noise_image(t, dw), &mut rhs);
        if let Some(lu) = &self.linear_resolvent {
            return Ok((lu.solve(&rhs), 1));
        }

        let residual = |x: &[S]| -> Vec<S> {
            let mut r = self.mass.mul_vec(x);
            axpy(dt, &a.apply(t, x), &mut r);
            if self.config.epsilon > S::zero() {
                axpy(dt, &self.eps_r.mul_vec(x), &mut r);
            }
            axpy(-S::one(), &rhs, &mut r);
            r
        };
        let rhs_scale = norm_inf(&rhs);
        let converged = |x: &[S], rnorm: S| {
            let scale = rhs_scale.max(norm_inf(&self.mass.mul_vec(x)));
            rnorm == S::zero() || rnorm <= self.config.newton_tol * scale
        };

        let mut x = u.to_vec();
        let mut r = residual(&x);
        let mut rnorm = norm_inf(&r);
        let mut iterations = 0;
        while iterations < self.config.newton_max_iter {
            if iterations > 0 && converged(&x, rnorm) {
                return Ok((x, iterations));
            }
            iterations += 1;
            let jac = self.mass.add(&a.jacobian(t, &x).scale(dt)).add(&self.eps_r.scale(dt));
            let neg_r: Vec<S> = r.iter().map(|&v| -v).collect();
            let delta = Lu::new(&jac, S::epsilon())?.solve(&neg_r);
            let mut alpha = S::one();
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<S> = x.iter().zip(&delta).map(|(&xi, &di)| xi + alpha * di).collect();
                let tr = residual(&trial);
                let tn = norm_inf(&tr);
                if tn.is_finite() && tn <= (S::one() - S::lit(1e-4) * alpha) * rnorm {
                    accepted = Some((trial, tr, tn));
                    break;
                }
                alpha *= S::lit(0.5);
            }
            match accepted {
                Some((trial, tr, tn)) => {
                    x = trial;
                    r = tr;
                    rnorm = tn;
                }
                None => {
                    // No decrease along the Newton direction: either already at
                    // roundoff level or genuinely stuck.
                    if converged(&x, rnorm) {
                        return Ok((x, iterations));
                    }
                    break;
                }
            }
        }
        if converged(&x, rnorm) {
            return Ok((x, iterations));
        }
        Err(Error::ImplicitSolveFailed { t: t.to_f64_lossy(), iterations, residual: rnorm.to_f64_lossy() })
    }
}

/// One explicit step without reusing a factorization.
pub fn step_explicit<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    t: S,
    u: &[S],
    dw: &[S],
) -> Result<Vec<S>> {
    Ok(Stepper::new(problem, config)?.step_explicit(t, u, dw))
}

/// One implicit step without reusing a factorization.
pub fn step_implicit<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    t: S,
    u: &[S],
    dw: &[S],
) -> Result<Vec<S>> {
    Ok(Stepper::new(problem, config)?.step_implicit(t, u, dw)?.0)
}

/// Wiener increments on the solver grid for `config.seed`.
pub fn driving_increments<S: Real>(problem: &Problem<S>, config: &SolverConfig<S>) -> Result<Vec<Vec<S>>> {
    let n = config.steps(problem.horizon)?;
    match config.noise_grid_steps {
        Some(fine) => {
            if fine % n != 0 {
                return Err(Error::InvalidConfig(format!(
                    "noise grid of {fine} steps is not a multiple of {n} solver steps"
                )));
            }
            let path = WienerPath::sample(&problem.noise, Partition::uniform(problem.horizon, fine)?, config.seed);
            path.coarsen(fine / n)
        }
        None => Ok(sample_increments(&problem.noise, &Partition::uniform(problem.horizon, n)?, config.seed)),
    }
}

fn noise_partial_sums<S: Real>(problem: &Problem<S>, times: &[S], increments: &[Vec<S>]) -> Vec<Vec<S>> {
    let d = problem.dim();
    let mut acc = vec![S::zero(); d];
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(acc.clone());
    for (j, dw) in increments.iter().enumerate() {
        if dw.iter().any(|&v| v != S::zero()) {
            let image = match problem.noise.constant_phi() {
                Some(phi) => phi.mul_vec(dw),
                None => problem.noise.phi(times[j]).mul_vec(dw),
            };
            axpy(S::one(), &image, &mut acc);
        }
        out.push(acc.clone());
    }
    out
}

/// Solves one path with the configured scheme and seed.
pub fn solve_path<S: Real>(problem: &Problem<S>, config: &SolverConfig<S>) -> Result<PathResult<S>> {
    let increments = driving_increments(problem, config)?;
    solve_with_increments(problem, config, increments)
}

/// Solves one path driven by the given increments (one per step).
pub fn solve_with_increments<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    increments: Vec<Vec<S>>,
) -> Result<PathResult<S>> {
    let n = config.steps(problem.horizon)?;
    if increments.len() != n {
        return Err(Error::DimensionMismatch { what: "Wiener increments", expected: n, found: increments.len() });
    }
    if config.scheme == Scheme::PicardBall {
        return picard_with_increments(problem, config, increments);
    }
    let times = Partition::uniform(problem.horizon, n)?.times;
    let stepper = Stepper::new(problem, config)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut newton_iterations = Vec::new();
    states.push(problem.u0.clone());
    for j in 0..n {
        let u = &states[j];
        let next = match config.scheme {
            Scheme::Explicit => stepper.step_explicit(times[j], u, &increments[j]),
            _ => {
                let (x, it) = stepper.step_implicit(times[j], u, &increments[j])?;
                newton_iterations.push(it);
                x
            }
        };
        if !all_finite(&next) {
            return Err(Error::NonFinite { step: j + 1, t: times[j + 1].to_f64_lossy() });
        }
        states.push(next);
    }
    let noise_path = noise_partial_sums(problem, &times, &increments);
    Ok(PathResult {
        times,
        states,
        wiener_increments: increments,
        noise_path,
        newton_iterations,
        flags: PathFlags::default(),
        seed: config.seed,
        epsilon: config.epsilon,
    })
}

/// Fixed-point solve of the ball-truncated integral equation
/// `u(tⱼ) = u₀ + W⁻¹Σ_{i<j}(f − A(Pₙu))(tᵢ)dt + Σ_{i<j}ΦΔWᵢ`, escalating the
/// ball level `n` until `sup‖u‖² ≤ s₀ⁿ`.
pub fn picard_ball_solve<S: Real>(problem: &Problem<S>, config: &SolverConfig<S>) -> Result<PathResult<S>> {
    let increments = driving_increments(problem, config)?;
    picard_with_increments(problem, config, increments)
}

fn picard_with_increments<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    increments: Vec<Vec<S>>,
) -> Result<PathResult<S>> {
    if config.epsilon != S::zero() {
        return Err(Error::InvalidConfig("the truncated Picard solver needs epsilon = 0".into()));
    }
    let gram = &problem.w_mass;
    let mismatch = problem.b.matrix().sub(gram).max_abs();
    if mismatch > S::lit(1e-12) * gram.max_abs() {
        return Err(Error::InvalidConfig(format!(
            "the truncated Picard solver needs B equal to the W-Gram matrix (differ by {mismatch:.3e})"
        )));
    }
    let gram_factor = Cholesky::new(gram)?;
    let n = config.steps(problem.horizon)?;
    let times = Partition::uniform(problem.horizon, n)?.times;
    let dt = config.dt;
    let noise_path = noise_partial_sums(problem, &times, &increments);
    let h_norm = |u: &[S]| gram.quad(u).max(S::zero()).sqrt();
    let (radius_base, stop_base) = config.radius_base;

    let u0_sq = gram.quad(&problem.u0);
    let mut level = config.picard_start_level.unwrap_or_else(|| {
        let mut k = 0u32;
        while !(u0_sq < stop_base.powi(k as i32 - 1)) && k <= MAX_RADIUS_LEVEL {
            k += 1;
        }
        k
    });
    let mut escalations = 0u32;
    let mut current: Vec<Vec<S>> = vec![problem.u0.clone(); n + 1];

    loop {
        if level > MAX_RADIUS_LEVEL {
            return Err(Error::RadiusOverflow { level: MAX_RADIUS_LEVEL });
        }
        let radius = radius_base.powi(level as i32);
        let mut truncated = false;
        let mut converged = false;
        let mut last_update = S::infinity();
        for _sweep in 0..config.picard_max_iter {
            let mut next = Vec::with_capacity(n + 1);
            next.push(problem.u0.clone());
            let mut acc = vec![S::zero(); problem.dim()];
            for j in 0..n {
                let projected = ball_project(&current[j], radius, gram);
                if projected != current[j] {
                    truncated = true;
                }
                let mut y = problem.forcing(times[j]);
                axpy(-S::one(), &problem.a.apply(times[j], &projected), &mut y);
                axpy(dt, &y, &mut acc);
                let mut u = add(&problem.u0, &gram_factor.solve(&acc));
                axpy(S::one(), &noise_path[j + 1], &mut u);
                next.push(u);
            }
            let mut update = S::zero();
            let mut size = S::zero();
            for (a, b) in next.iter().zip(&current) {
                for (&x, &y) in a.iter().zip(b) {
                    update = update.max((x - y).abs());
                    size = size.max(x.abs());
                }
            }
            if !update.is_finite() || !size.is_finite() {
                return Err(Error::NonFinite { step: 0, t: f64::NAN });
            }
            current = next;
            last_update = update;
            if update <= config.picard_tol * (S::one() + size) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::PicardDiverged {
                iterations: config.picard_max_iter,
                last_update: last_update.to_f64_lossy(),
            });
        }
        // Compare norms rather than squares so huge radii do not overflow.
        let sup_norm = current.iter().map(|u| h_norm(u)).fold(S::zero(), S::max);
        let threshold = stop_base.powi(level as i32).sqrt();
        if sup_norm > threshold {
            level += 1;
            escalations += 1;
            continue;
        }
        return Ok(PathResult {
            times,
            states: current,
            wiener_increments: increments,
            noise_path,
            newton_iterations: Vec::new(),
            flags: PathFlags {
                truncation_active: truncated,
                radius_escalations: escalations,
                radius_level: Some(level),
            },
            seed: config.seed,
            epsilon: config.epsilon,
        });
    }
}

/// Scalar statistic of a solved path.
#[derive(Clone)]
pub struct Observable<S> {
    pub name: String,
    pub eval: EvalFn<S>,
}

impl<S: Real> Observable<S> {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&PathResult<S>, &Problem<S>) -> S + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval) }
    }

    /// `⟨Bu(T), u(T)⟩`.
    pub fn terminal_energy() -> Self {
        Self::new("terminal_energy", |path, problem| problem.b.energy(path.terminal()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservableStat<S> {
    pub name: String,
    pub mean: S,
    pub std_err: S,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary<S> {
    pub n_paths: usize,
    pub master_seed: u64,
    pub stats: Vec<ObservableStat<S>>,
}

impl<S: Real> EnsembleSummary<S> {
    pub fn get(&self, name: &str) -> Option<&ObservableStat<S>> {
        self.stats.iter().find(|s| s.name == name)
    }
}

/// Mean and standard error, accumulated in slice order.
pub fn mean_and_se<S: Real>(samples: &[S]) -> (S, S) {
    let n = samples.len();
    if n == 0 {
        return (S::nan(), S::nan());
    }
    let nn = S::from_usize_lossy(n);
    let mean = samples.iter().fold(S::zero(), |a, &b| a + b) / nn;
    if n == 1 {
        return (mean, S::zero());
    }
    let ss = samples.iter().fold(S::zero(), |a, &b| a + (b - mean) * (b - mean));
    let var = ss / S::from_usize_lossy(n - 1);
    (mean, (var / nn).sqrt())
}

/// Solves `n_paths` paths with seeds `SplitMix64(master_seed ^ i)` and maps
/// each through `f`. Output is in path order whatever the thread count.
pub fn mc_map<S, T, F>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    n_paths: usize,
    master_seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    S: Real,
    T: Send,
    F: Fn(usize, PathResult<S>) -> Result<T> + Send + Sync,
{
    if n_paths == 0 {
        return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
    }
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let seed = path_seed(master_seed, i as u64);
            let cfg = SolverConfig { seed, ..config.clone() };
            solve_path(problem, &cfg).and_then(|path| f(i, path)).map_err(|e| Error::PathFailed {
                index: i,
                seed,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Monte Carlo means and standard errors of the given observables.
pub fn mc_run<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    n_paths: usize,
    master_seed: u64,
    observables: &[Observable<S>],
) -> Result<EnsembleSummary<S>> {
    let values = mc_map(problem, config, n_paths, master_seed, |_, path| {
        Ok(observables.iter().map(|o| (o.eval)(&path, problem)).collect::<Vec<S>>())
    })?;
    let stats = observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let column: Vec<S> = values.iter().map(|v| v[k]).collect();
            let (mean, std_err) = mean_and_se(&column);
            ObservableStat { name: o.name.clone(), mean, std_err, count: column.len() }
        })
        .collect();
    Ok(EnsembleSummary { n_paths, master_seed, stats })
}
