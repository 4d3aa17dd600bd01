//! Numerical bookkeeping for the generalized Itô identity
//! `⟨Bu(t),u(t)⟩ = ⟨Bu₀,u₀⟩ + ∫(2⟨Y,u⟩ + ⟨BZ,Z⟩)ds + 2∫⟨Bu, Z dW⟩`
//! and for the energy estimates built on it.
//!
//! All integrals are left-point sums on the solver grid. For a path solved
//! with `ε > 0` the regularized ledger uses `B_ε = B + εR`,
//! `Y_ε = f − A(u) − εRu` and `Z_ε = B_ε⁻¹BΦ`, which reduces to the plain
//! one at `ε = 0`.

use crate::bform::bzz_pairing;
use crate::error::{Error, Result};
use crate::integrator::{mc_map, mean_and_se, PathResult, Problem, SolverConfig};
use crate::linalg::{axpy, dot, spd_condition, Cholesky, Mat};
use crate::scalar::Real;

/// Term-by-term decomposition of the Itô identity along one path. Every
/// cumulative vector has one entry per grid time and starts at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoLedger<S> {
    pub times: Vec<S>,
    pub lhs: Vec<S>,
    pub term_initial: S,
    pub term_drift: Vec<S>,
    pub term_bzz: Vec<S>,
    pub term_martingale: Vec<S>,
    pub residual: Vec<S>,
    /// `C Σ ‖Z‖²_HS(W) ‖Bu‖²_{W′} dt` with `C = 4 cond(W)`.
    pub qv_bound: Vec<S>,
    /// Realized quadratic variation of `term_martingale` on the grid.
    pub martingale_qv: Vec<S>,
    /// `Σ (⟨B ZΔW, ZΔW⟩ − ⟨BZ,Z⟩dt)`: mean zero, and the leading
    /// fluctuation of the residual.
    pub noise_fluctuation: Vec<S>,
    pub epsilon: S,
}

impl<S: Real> ItoLedger<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_residual(&self) -> S {
        self.residual.iter().fold(S::zero(), |m, r| m.max(r.abs()))
    }

    /// `initial + drift + bzz` at grid index `j`, the deterministic side.
    pub fn rhs_without_martingale(&self, j: usize) -> S {
        self.term_initial + self.term_drift[j] + self.term_bzz[j]
    }

    /// Residual with the zero-mean noise fluctuation removed.
    pub fn reduced_residual(&self, j: usize) -> S {
        self.residual[j] - self.noise_fluctuation[j]
    }

    /// Index of the last grid time `≤ t` (within half a step).
    pub fn index_at(&self, t: S) -> usize {
        let dt = if self.times.len() > 1 { self.times[1] - self.times[0] } else { S::one() };
        let half = dt * S::lit(0.5);
        self.times.iter().rposition(|&s| s <= t + half).unwrap_or(0)
    }

    pub fn terminal_residual(&self) -> S {
        *self.residual.last().expect("ledger has entries")
    }
}

/// Ledger with the form `B` itself and `Y = f − A(u)`, whatever `ε` the
/// path was solved with.
pub fn pathwise_ledger<S: Real>(path: &PathResult<S>, problem: &Problem<S>) -> Result<ItoLedger<S>> {
    build_ledger(path, problem, S::zero())
}

/// Ledger in the regularized form `B_ε = B + εR` with `ε` taken from the
/// path. This is the identity the scheme actually discretizes.
pub fn regularized_ledger<S: Real>(path: &PathResult<S>, problem: &Problem<S>) -> Result<ItoLedger<S>> {
    build_ledger(path, problem, path.epsilon)
}

/// Energy-related pieces of `B_ε` shared by the ledger and the checks.
struct Energetics<'a, S> {
    problem: &'a Problem<S>,
    epsilon: S,
    mass: Mat<S>,
    mass_factor: Option<Cholesky<S>>,
    w_factor: Cholesky<S>,
}

impl<'a, S: Real> Energetics<'a, S> {
    fn new(problem: &'a Problem<S>, epsilon: S) -> Result<Self> {
        if epsilon < S::zero() {
            return Err(Error::InvalidConfig(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let (mass, mass_factor) = if epsilon > S::zero() {
            let m = problem.b.matrix().add(&problem.r.scale(epsilon));
            let f = Cholesky::new(&m)?;
            (m, Some(f))
        } else {
            (problem.b.matrix().clone(), None)
        };
        let w_factor = Cholesky::new(&problem.w_mass)?;
        Ok(Self { problem, epsilon, mass, mass_factor, w_factor })
    }

    fn energy(&self, u: &[S]) -> S {
        self.mass.quad(u)
    }

    fn drift(&self, t: S, u: &[S]) -> Vec<S> {
        let mut y = self.problem.forcing(t);
        axpy(-S::one(), &self.problem.a.apply(t, u), &mut y);
        if self.epsilon > S::zero() {
            axpy(-self.epsilon, &self.problem.r.mul_vec(u), &mut y);
        }
        y
    }

    /// `Z_ε v = B_ε⁻¹BΦv`, or `Φv` when `ε = 0`.
    fn z_apply(&self, phi: &Mat<S>, v: &[S]) -> Vec<S> {
        let x = phi.mul_vec(v);
        match &self.mass_factor {
            Some(f) => f.solve(&self.problem.b.apply(&x)),
            None => x,
        }
    }

    /// `(⟨B_εZ,Z⟩, ‖Z‖²_HS(W))` at time `t`.
    fn z_norms(&self, t: S) -> Result<(S, S)> {
        let noise = &self.problem.noise;
        if self.mass_factor.is_none() {
            return Ok((bzz_pairing(&self.problem.b, noise, t)?, noise.hs_norm_sq(t, &self.problem.w_mass)));
        }
        let phi = noise.phi(t);
        let mut bzz = S::zero();
        let mut hs = S::zero();
        for (lam, v) in noise.modes() {
            let z = self.z_apply(&phi, v);
            bzz += lam * self.mass.quad(&z);
            hs += lam * self.problem.w_mass.quad(&z);
        }
        Ok((bzz, hs))
    }

    /// `(B_ε u)ᵀ W⁻¹ (B_ε u)`.
    fn dual_energy(&self, u: &[S]) -> S {
        let bu = self.mass.mul_vec(u);
        dot(&bu, &self.w_factor.solve(&bu))
    }
}

fn build_ledger<S: Real>(path: &PathResult<S>, problem: &Problem<S>, epsilon: S) -> Result<ItoLedger<S>> {
    let n_times = path.times.len();
    if n_times == 0 {
        return Err(Error::EmptyInput("path has no time points"));
    }
    if path.states.len() != n_times {
        return Err(Error::DimensionMismatch { what: "path states", expected: n_times, found: path.states.len() });
    }
    if path.wiener_increments.len() + 1 != n_times {
        return Err(Error::DimensionMismatch {
            what: "Wiener increments",
            expected: n_times - 1,
            found: path.wiener_increments.len(),
        });
    }
    let d = problem.dim();
    if let Some(bad) = path.states.iter().find(|u| u.len() != d) {
        return Err(Error::DimensionMismatch { what: "state dimension", expected: d, found: bad.len() });
    }
    let m = problem.noise.noise_dim();
    if let Some(bad) = path.wiener_increments.iter().find(|w| w.len() != m) {
        return Err(Error::DimensionMismatch { what: "noise dimension", expected: m, found: bad.len() });
    }

    let en = Energetics::new(problem, epsilon)?;
    let qv_const = S::lit(4.0) * spd_condition(&problem.w_mass);
    let lhs: Vec<S> = path.states.iter().map(|u| en.energy(u)).collect();
    let term_initial = en.energy(&path.states[0]);

    let constant_norms = match problem.noise.constant_phi() {
        Some(_) => Some(en.z_norms(path.times[0])?),
        None => None,
    };
    let zero = vec![S::zero(); n_times];
    let (mut drift, mut bzz, mut mart, mut qv_bound, mut mart_qv, mut fluct) =
        (zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero);
    for j in 0..n_times - 1 {
        let t = path.times[j];
        let dt = path.times[j + 1] - t;
        let u = &path.states[j];
        let dw = &path.wiener_increments[j];

        let y = en.drift(t, u);
        let (bzz_t, hs_t) = match constant_norms {
            Some(v) => v,
            None => en.z_norms(t)?,
        };
        let quiet = dw.iter().all(|&v| v == S::zero());
        let (dm, zdw_energy) = if quiet {
            (S::zero(), S::zero())
        } else {
            let phi = match problem.noise.constant_phi() {
                Some(phi) => std::borrow::Cow::Borrowed(phi),
                None => std::borrow::Cow::Owned(problem.noise.phi(t)),
            };
            // ⟨B_ε u, Z_ε ΔW⟩ = ⟨u, BΦΔW⟩.
            let bphi_dw = problem.noise_image(t, dw);
            let zdw = en.z_apply(&phi, dw);
            (S::lit(2.0) * dot(u, &bphi_dw), en.energy(&zdw))
        };

        drift[j + 1] = drift[j] + S::lit(2.0) * dot(&y, u) * dt;
        bzz[j + 1] = bzz[j] + bzz_t * dt;
        mart[j + 1] = mart[j] + dm;
        mart_qv[j + 1] = mart_qv[j] + dm * dm;
        qv_bound[j + 1] = qv_bound[j] + qv_const * hs_t * en.dual_energy(u) * dt;
        fluct[j + 1] = fluct[j] + (zdw_energy - bzz_t * dt);
    }
    let residual = (0..n_times).map(|j| lhs[j] - (term_initial + drift[j] + bzz[j] + mart[j])).collect();
    Ok(ItoLedger {
        times: path.times.clone(),
        lhs,
        term_initial,
        term_drift: drift,
        term_bzz: bzz,
        term_martingale: mart,
        residual,
        qv_bound,
        martingale_qv: mart_qv,
        noise_fluctuation: fluct,
        epsilon,
    })
}

/// Mean with standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<S> {
    pub mean: S,
    pub std_err: S,
}

impl<S: Real> Estimate<S> {
    pub fn from_samples(samples: &[S]) -> Self {
        let (mean, std_err) = mean_and_se(samples);
        Self { mean, std_err }
    }

    /// `|mean − target| ≤ k·SE + allowance`.
    pub fn within(&self, target: S, k: S, allowance: S) -> bool {
        (self.mean - target).abs() <= k * self.std_err + allowance
    }
}

/// One checkpoint of [`expected_energy_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityRow<S> {
    pub t: S,
    /// `E⟨B_ε u(t),u(t)⟩`.
    pub lhs: Estimate<S>,
    /// `E(initial + drift + bzz)`.
    pub rhs: Estimate<S>,
    /// Paired difference `lhs − rhs`.
    pub difference: Estimate<S>,
    pub martingale: Estimate<S>,
    /// Paired difference with both zero-mean terms (martingale and noise
    /// fluctuation) removed: the discretization bias with low variance.
    pub reduced_residual: Estimate<S>,
    pub bias_allowance: S,
    pub identity_ok: bool,
    pub martingale_ok: bool,
}

impl<S: Real> IdentityRow<S> {
    pub fn passed(&self) -> bool {
        self.identity_ok && self.martingale_ok
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport<S> {
    pub n_paths: usize,
    pub dt: S,
    pub rows: Vec<IdentityRow<S>>,
}

impl<S: Real> IdentityReport<S> {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(IdentityRow::passed)
    }
}

/// Monte Carlo check of `E⟨Bu(t),u(t)⟩ = ⟨Bu₀,u₀⟩ + E∫(2⟨Y,u⟩ + ⟨BZ,Z⟩)ds`
/// at each of `t_checks`, passing when the paired difference is within
/// `3·SE + κ·dt` and the martingale mean within `3·SE` of zero.
pub fn expected_energy_check<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    n_paths: usize,
    master_seed: u64,
    t_checks: &[S],
    kappa: S,
) -> Result<IdentityReport<S>> {
    if n_paths < 100 {
        return Err(Error::InvalidConfig(format!("expected_energy_check needs at least 100 paths, got {n_paths}")));
    }
    if t_checks.is_empty() {
        return Err(Error::EmptyInput("no checkpoint times"));
    }
    if let Some(t) = t_checks.iter().find(|&&t| t < S::zero() || t > problem.horizon) {
        return Err(Error::InvalidConfig(format!("checkpoint time {t} is outside [0, {}]", problem.horizon)));
    }
    // Per path and checkpoint: (lhs, rhs, martingale, reduced residual).
    let samples = mc_map(problem, config, n_paths, master_seed, |_, path| {
        let ledger = regularized_ledger(&path, problem)?;
        Ok(t_checks
            .iter()
            .map(|&t| {
                let j = ledger.index_at(t);
                [ledger.lhs[j], ledger.rhs_without_martingale(j), ledger.term_martingale[j], ledger.reduced_residual(j)]
            })
            .collect::<Vec<_>>())
    })?;
    let three = S::lit(3.0);
    let allowance = kappa * config.dt;
    let rows = t_checks
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col = |f: &dyn Fn(&[S; 4]) -> S| samples.iter().map(|s| f(&s[k])).collect::<Vec<S>>();
            let lhs = Estimate::from_samples(&col(&|s| s[0]));
            let rhs = Estimate::from_samples(&col(&|s| s[1]));
            let difference = Estimate::from_samples(&col(&|s| s[0] - s[1]));
            let martingale = Estimate::from_samples(&col(&|s| s[2]));
            let reduced_residual = Estimate::from_samples(&col(&|s| s[3]));
            IdentityRow {
                t,
                lhs,
                rhs,
                difference,
                martingale,
                reduced_residual,
                bias_allowance: allowance,
                identity_ok: difference.within(S::zero(), three, allowance),
                martingale_ok: martingale.within(S::zero(), three, S::zero()),
            }
        })
        .collect();
    Ok(IdentityReport { n_paths, dt: config.dt, rows })
}

/// Result of [`energy_inequality_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyInequalityReport<S> {
    pub n_paths: usize,
    pub dt: S,
    /// `½E⟨B_ε u(T),u(T)⟩ − ½⟨B_ε u₀,u₀⟩ + E∫(⟨Au,u⟩ + ε⟨Ru,u⟩)ds`.
    pub lhs: Estimate<S>,
    /// `½∫⟨BΦ,Φ⟩_HS ds + E∫⟨f,u⟩ds`.
    pub rhs: Estimate<S>,
    /// Paired `lhs − rhs`.
    pub difference: Estimate<S>,
    pub slack: S,
    pub passed: bool,
}

/// Monte Carlo energy inequality with pass rule
/// `LHS ≤ RHS + 3·SE + slack_c·dt`.
pub fn energy_inequality_check<S: Real>(
    problem: &Problem<S>,
    config: &SolverConfig<S>,
    n_paths: usize,
    master_seed: u64,
    slack_c: S,
) -> Result<EnergyInequalityReport<S>> {
    let eps = config.epsilon;
    let half = S::lit(0.5);
    let en = Energetics::new(problem, eps)?;
    let n = config.steps(problem.horizon)?;
    let times = crate::noise::Partition::uniform(problem.horizon, n)?.times;
    let mut noise_term = S::zero();
    for j in 0..n {
        noise_term += bzz_pairing(&problem.b, &problem.noise, times[j])? * (times[j + 1] - times[j]);
    }
    noise_term = half * noise_term;
    let initial = half * en.energy(&problem.u0);

    let pairs = mc_map(problem, config, n_paths, master_seed, |_, path| {
        let mut dissipation = S::zero();
        let mut work = S::zero();
        for j in 0..path.times.len() - 1 {
            let t = path.times[j];
            let dt = path.times[j + 1] - t;
            let u = &path.states[j];
            let mut au = problem.a.apply(t, u);
            if eps > S::zero() {
                axpy(eps, &problem.r.mul_vec(u), &mut au);
            }
            dissipation += dot(&au, u) * dt;
            if problem.has_forcing() {
                work += dot(&problem.forcing(t), u) * dt;
            }
        }
        let lhs = half * en.energy(path.terminal()) - initial + dissipation;
        Ok((lhs, noise_term + work))
    })?;
    let lhs = Estimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let rhs = Estimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let difference = Estimate::from_samples(&pairs.iter().map(|p| p.0 - p.1).collect::<Vec<_>>());
    let slack = slack_c * config.dt;
    let passed = difference.mean <= S::lit(3.0) * difference.std_err + slack;
    Ok(EnergyInequalityReport { n_paths, dt: config.dt, lhs, rhs, difference, slack, passed })
}

/// Monte Carlo estimate of `E sup_t ⟨Bu(t),u(t)⟩` with the ingredients the
/// a priori bound depends on. No constant is asserted.
#[derive(Clone, Debug, PartialEq)]
pub struct SupEnergyDiagnostic<S> {
    pub estimate: S,
    pub std_err: S,
    /// `(E∫‖Y‖^q_{V′}ds)^{1/q}` with `q = p/(p−1)`.
    pub y_norm: S,
    /// `(E∫‖u‖^p_V ds)^{1/p}`.
    pub x_norm: S,
    /// `(∫‖Φ‖²_HS(W) ds)^{1/2}`.
    pub z_norm: S,
    /// `E⟨Bu₀,u₀⟩`.
    pub initial_energy: S,
    pub n_paths: usize,
}

pub fn sup_energy_diagnostic<S: Real>(paths: &[PathResult<S>], problem: &Problem<S>) -> Result<SupEnergyDiagnostic<S>> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("no paths"));
    }
    let p = problem.a.metadata.p;
    let q = p / (p - S::one());
    let b = &problem.b;
    let mut sups = Vec::with_capacity(paths.len());
    let (mut y_acc, mut x_acc, mut z_acc, mut e0) = (S::zero(), S::zero(), S::zero(), S::zero());
    for path in paths {
        if path.states.iter().any(|u| u.len() != problem.dim()) {
            return Err(Error::DimensionMismatch {
                what: "state dimension",
                expected: problem.dim(),
                found: path.states[0].len(),
            });
        }
        sups.push(path.states.iter().map(|u| b.energy(u)).fold(S::zero(), S::max));
        e0 += b.energy(&path.states[0]);
        for j in 0..path.times.len().saturating_sub(1) {
            let t = path.times[j];
            let dt = path.times[j + 1] - t;
            let u = &path.states[j];
            let mut y = problem.forcing(t);
            axpy(-S::one(), &problem.a.apply(t, u), &mut y);
            y_acc += problem.a.dual_norm(&y).powf(q) * dt;
            x_acc += problem.a.v_norm(u).powf(p) * dt;
            z_acc += problem.noise.hs_norm_sq(t, &problem.w_mass) * dt;
        }
    }
    let np = S::from_usize_lossy(paths.len());
    let (estimate, std_err) = mean_and_se(&sups);
    Ok(SupEnergyDiagnostic {
        estimate,
        std_err,
        y_norm: (y_acc / np).powf(S::one() / q),
        x_norm: (x_acc / np).powf(S::one() / p),
        z_norm: (z_acc / np).sqrt(),
        initial_energy: e0 / np,
        n_paths: paths.len(),
    })
}

/// Compares the mean realized quadratic variation of the martingale term
/// with the mean of its bound at the final time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QvBoundCheck<S> {
    pub realized: Estimate<S>,
    pub bound: Estimate<S>,
    /// Paired `bound − realized`.
    pub gap: Estimate<S>,
    pub passed: bool,
}

pub fn qv_bound_check<S: Real>(ledgers: &[ItoLedger<S>]) -> Result<QvBoundCheck<S>> {
    if ledgers.is_empty() {
        return Err(Error::EmptyInput("no ledgers"));
    }
    let last = |v: &Vec<S>| *v.last().expect("ledger has entries");
    let realized: Vec<S> = ledgers.iter().map(|l| last(&l.martingale_qv)).collect();
    let bound: Vec<S> = ledgers.iter().map(|l| last(&l.qv_bound)).collect();
    let gap: Vec<S> = bound.iter().zip(&realized).map(|(b, r)| *b - *r).collect();
    let gap = Estimate::from_samples(&gap);
    Ok(QvBoundCheck {
        realized: Estimate::from_samples(&realized),
        bound: Estimate::from_samples(&bound),
        gap,
        passed: gap.mean >= -S::lit(3.0) * gap.std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bform::BForm;
    use crate::integrator::{solve_path, Scheme};
    use crate::noise::NoiseModel;
    use crate::operators::NonlinearOperator;
    use crate::problems::{make_ou, make_zero_b, ou_second_moment};

    fn quiet_problem(b: Mat<f64>) -> Problem<f64> {
        quiet_with(b, NonlinearOperator::zero(2))
    }

    fn quiet_with(b: Mat<f64>, a: NonlinearOperator<f64>) -> Problem<f64> {
        let d = b.rows();
        Problem::new(
            "quiet",
            BForm::with_default_tol(b).unwrap(),
            Mat::identity(d),
            a,
            None,
            NoiseModel::zero(d, 1),
            vec![1.0, -2.0],
            Mat::identity(d),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn trivial_problem_has_zero_residual() {
        let pr = quiet_problem(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]));
        let cfg = SolverConfig::default().with_dt(0.125);
        let path = solve_path(&pr, &cfg).unwrap();
        let l = pathwise_ledger(&path, &pr).unwrap();
        assert!(l.residual.iter().all(|&r| r == 0.0));
        assert!(l.term_drift.iter().chain(&l.term_bzz).chain(&l.term_martingale).all(|&v| v == 0.0));
        assert_eq!(l.lhs[0], 2.0);
    }

    #[test]
    fn zero_b_ledger_vanishes() {
        let pr = make_zero_b(
            3,
            NonlinearOperator::zero(3),
            None,
            NoiseModel::constant(Mat::identity(2), Mat::from_fn(3, 2, |i, j| (i + j) as f64)).unwrap(),
            vec![1.0, 0.5, -1.0],
            1.0,
        )
        .unwrap();
        let cfg = SolverConfig::default().with_dt(0.01).with_epsilon(0.1).with_seed(5);
        let path = solve_path(&pr, &cfg).unwrap();
        let l = pathwise_ledger(&path, &pr).unwrap();
        for v in [&l.lhs, &l.term_bzz, &l.term_martingale, &l.residual] {
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn residual_starts_at_exact_zero() {
        let pr = make_ou::<f64>(1, 1.0, 1.0, vec![0.3], 1.0).unwrap();
        for scheme in [Scheme::Explicit, Scheme::ImplicitResolvent, Scheme::PicardBall] {
            let cfg = SolverConfig::default().with_dt(1.0 / 64.0).with_scheme(scheme).with_seed(3);
            let path = solve_path(&pr, &cfg).unwrap();
            let l = regularized_ledger(&path, &pr).unwrap();
            assert_eq!(l.residual[0], 0.0);
            assert_eq!(l.term_drift[0], 0.0);
        }
    }

    #[test]
    fn gelfand_reduction_of_bzz_increment() {
        let pr = make_ou::<f64>(2, 1.0, 0.7, vec![0.3, 0.1], 1.0).unwrap();
        let cfg = SolverConfig::default().with_dt(0.25);
        let l = pathwise_ledger(&solve_path(&pr, &cfg).unwrap(), &pr).unwrap();
        let hs = pr.noise.hs_norm_sq(0.0, &pr.w_mass);
        assert!((l.term_bzz[1] - 0.25 * hs).abs() < 1e-15);
    }

    #[test]
    fn explicit_ou_residual_is_one_step_identity() {
        // B = I explicit: lhs increment − (2Yu dt + 2u σΔW) = (Ydt + σΔW)².
        let pr = make_ou::<f64>(1, 1.0, 1.0, vec![1.0], 1.0).unwrap();
        let cfg = SolverConfig::default().with_dt(0.1).with_scheme(Scheme::Explicit).with_seed(11);
        let path = solve_path(&pr, &cfg).unwrap();
        let l = pathwise_ledger(&path, &pr).unwrap();
        let mut acc = 0.0;
        for j in 0..10 {
            let du = path.states[j + 1][0] - path.states[j][0];
            acc += du * du - 0.1;
            assert!((l.residual[j + 1] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_path_is_rejected() {
        let pr = make_ou::<f64>(1, 1.0, 1.0, vec![1.0], 1.0).unwrap();
        let mut path = solve_path(&pr, &SolverConfig::default().with_dt(0.1)).unwrap();
        path.states.pop();
        assert!(matches!(pathwise_ledger(&path, &pr), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quiet_expectation_identity_is_exact() {
        let pr = quiet_problem(Mat::identity(2));
        let cfg = SolverConfig::default().with_dt(0.1);
        let rep = expected_energy_check(&pr, &cfg, 100, 1, &[0.5, 1.0], 0.0).unwrap();
        for row in &rep.rows {
            assert_eq!(row.lhs.mean, 5.0);
            assert_eq!(row.rhs.mean, 5.0);
        }
        assert!(rep.passed());
    }

    #[test]
    fn expectation_identity_needs_enough_paths() {
        let pr = quiet_problem(Mat::identity(2));
        assert!(expected_energy_check(&pr, &SolverConfig::default().with_dt(0.1), 10, 1, &[1.0], 1.0).is_err());
    }

    #[test]
    fn ou_expectation_identity_matches_closed_form() {
        let pr = make_ou::<f64>(1, 1.0, 1.0, vec![1.0], 1.0).unwrap();
        let cfg = SolverConfig::default().with_dt(1.0 / 100.0);
        let rep = expected_energy_check(&pr, &cfg, 2000, 42, &[1.0], 1.0).unwrap();
        let row = &rep.rows[0];
        assert!(rep.passed(), "{row:?}");
        assert!(row.lhs.within(ou_second_moment(1.0, 1.0, 1.0, 1.0), 3.0, cfg.dt));
    }

    #[test]
    fn dissipative_energy_inequality() {
        let pr = quiet_with(Mat::identity(2), NonlinearOperator::linear(Mat::identity(2)));
        // Left-point quadrature of the dissipation leaves an O(dt) surplus.
        let rep = energy_inequality_check(&pr, &SolverConfig::default().with_dt(0.01), 10, 0, 5.0).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.lhs.mean > 0.0 && rep.lhs.mean < 0.1);
    }

    #[test]
    fn isometry_equality_in_energy_inequality() {
        let pr = make_ou::<f64>(1, 0.0, 1.0, vec![0.5], 1.0).unwrap();
        let cfg = SolverConfig::default().with_dt(0.05);
        let rep = energy_inequality_check(&pr, &cfg, 4000, 9, 0.0).unwrap();
        assert!((rep.rhs.mean - 0.5).abs() < 1e-12);
        assert!(rep.difference.mean.abs() <= 3.0 * rep.difference.std_err, "{rep:?}");
    }

    #[test]
    fn sup_energy_of_zero_problem_is_zero() {
        let pr = quiet_problem(Mat::identity(2)).with_u0(vec![0.0, 0.0]).unwrap();
        let paths: Vec<_> =
            (0..3).map(|s| solve_path(&pr, &SolverConfig::default().with_dt(0.1).with_seed(s)).unwrap()).collect();
        let d = sup_energy_diagnostic(&paths, &pr).unwrap();
        assert_eq!((d.estimate, d.y_norm, d.x_norm, d.z_norm, d.initial_energy), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sup_energy_dominates_terminal() {
        let pr = make_ou::<f64>(1, 1.0, 1.0, vec![1.0], 1.0).unwrap();
        let paths: Vec<_> =
            (0..50).map(|s| solve_path(&pr, &SolverConfig::default().with_dt(0.01).with_seed(s)).unwrap()).collect();
        let d = sup_energy_diagnostic(&paths, &pr).unwrap();
        let terminal = paths.iter().map(|p| p.terminal()[0].powi(2)).sum::<f64>() / 50.0;
        assert!(d.estimate.is_finite() && d.estimate >= terminal && d.estimate >= 1.0);
        assert!(sup_energy_diagnostic(&[], &pr).is_err());
    }
}
