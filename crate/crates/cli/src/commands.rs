//! The subcommands, each producing a CSV table and its checks.

use anyhow::Context;
use rayon::prelude::*;
use spde_lab::problems::ou_second_moment;
use spde_lab::{
    b_gram_schmidt, dyadic_partitions, energy_inequality_check, expected_energy_check, mean_and_se, path_seed,
    picard_ball_solve, quadratic_variation, regularized_ledger, sample_increments, solve_path, BForm, Estimate, Mat,
    NoiseModel, Partition, Scheme, WienerPath,
};

use crate::config::{ExperimentConfig, ProblemSpec};
use crate::table::{num, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
    /// Secondary table (the `ito-check` expectation report).
    pub report: Option<Table>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

/// Uniform on `[−1, 1)` from a counter.
fn uniform(seed: u64, k: u64) -> f64 {
    (path_seed(seed, k) >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// `B = GGᵀ` with `G ∈ ℝ^{dim×rank}` uniform, then Gram–Schmidt of the
/// standard basis. Columns: `i,j,gram` with `gram = ⟨Beᵢ,eⱼ⟩`.
pub fn gram(dim: usize, rank: usize, seed: u64) -> anyhow::Result<Outcome> {
    if dim == 0 || rank > dim {
        anyhow::bail!("need 1 <= dim and rank <= dim, got dim {dim}, rank {rank}");
    }
    let g: Vec<f64> = (0..(dim * rank) as u64).map(|k| uniform(seed, k)).collect();
    let b = Mat::from_fn(dim, dim, |i, j| (0..rank).map(|k| g[i * rank + k] * g[j * rank + k]).sum());
    let form = BForm::with_default_tol(b)?;
    let cands: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let basis = b_gram_schmidt(&form, &cands, form.default_zero_tol())?;
    let gm = basis.gram();
    let mut table = Table::new(["i", "j", "gram"]);
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            table.push(vec![i.to_string(), j.to_string(), num(gm[(i, j)])]);
        }
    }
    let defect = basis.orthonormality_defect();
    let checks = vec![Check::new(
        "gram",
        defect < 1e-8,
        format!("max |<Be_i,e_j> - delta_ij| = {defect:.3e} over {} vectors (rank {rank})", basis.len()),
    )];
    Ok(Outcome { table, checks, report: None })
}

/// One path; columns `t,u_0,…,u_{d−1}`.
pub fn simulate(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let problem = cfg.build_problem()?;
    let solver = cfg.solver.build();
    let path = match solver.scheme {
        Scheme::PicardBall => picard_ball_solve(&problem, &solver)?,
        _ => solve_path(&problem, &solver)?,
    };
    let d = problem.dim();
    let mut table = Table::new(std::iter::once("t".to_string()).chain((0..d).map(|i| format!("u_{i}"))));
    for (t, u) in path.times.iter().zip(&path.states) {
        table.push(std::iter::once(num(*t)).chain(u.iter().map(|&v| num(v))).collect());
    }
    let finite = path.states.iter().flatten().all(|v| v.is_finite());
    let detail = format!(
        "{} steps of {}, terminal energy {:.6e}, truncation active {}",
        path.times.len() - 1,
        solver.dt,
        problem.b.energy(path.terminal()),
        path.flags.truncation_active
    );
    Ok(Outcome { table, checks: vec![Check::new("simulate", finite, detail)], report: None })
}

/// Ledger of the path with `solver.seed`, and the expectation identity over
/// `n_paths` paths from `master_seed` at each checkpoint.
pub fn ito_check(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let problem = cfg.build_problem()?;
    let solver = cfg.solver.build();
    let path = solve_path(&problem, &solver)?;
    let ledger = regularized_ledger(&path, &problem)?;
    let mut table = Table::new(["t", "lhs", "term_initial", "term_drift", "term_bzz", "term_martingale", "residual"]);
    for j in 0..ledger.len() {
        table.push(vec![
            num(ledger.times[j]),
            num(ledger.lhs[j]),
            num(ledger.term_initial),
            num(ledger.term_drift[j]),
            num(ledger.term_bzz[j]),
            num(ledger.term_martingale[j]),
            num(ledger.residual[j]),
        ]);
    }

    let t_checks = cfg.checkpoints();
    let kappa = cfg.options.kappa;
    let rep = expected_energy_check(&problem, &solver, cfg.n_paths, cfg.master_seed, &t_checks, kappa)?;
    let mut report = Table::new([
        "t",
        "lhs_mean",
        "lhs_se",
        "rhs_mean",
        "rhs_se",
        "difference_mean",
        "difference_se",
        "martingale_mean",
        "martingale_se",
        "reduced_residual_mean",
        "reduced_residual_se",
        "bias_allowance",
        "passed",
    ]);
    let mut checks = Vec::new();
    for r in &rep.rows {
        report.push(vec![
            num(r.t),
            num(r.lhs.mean),
            num(r.lhs.std_err),
            num(r.rhs.mean),
            num(r.rhs.std_err),
            num(r.difference.mean),
            num(r.difference.std_err),
            num(r.martingale.mean),
            num(r.martingale.std_err),
            num(r.reduced_residual.mean),
            num(r.reduced_residual.std_err),
            num(r.bias_allowance),
            flag(r.passed()),
        ]);
        checks.push(Check::new(
            format!("expected_energy_check t={}", r.t),
            r.passed(),
            format!(
                "E lhs - E rhs = {:.4e} +- {:.2e} (allowance {:.1e}), martingale mean {:.2e} +- {:.2e}, reduced residual {:.4e}",
                r.difference.mean,
                r.difference.std_err,
                r.bias_allowance,
                r.martingale.mean,
                r.martingale.std_err,
                r.reduced_residual.mean
            ),
        ));
        if let ProblemSpec::Ou { lambda, sigma, u0, .. } = &cfg.problem {
            if solver.epsilon == 0.0 {
                let start = u0.clone().unwrap_or_else(|| vec![1.0; problem.dim()]);
                let exact: f64 = start.iter().map(|&x| ou_second_moment(*lambda, *sigma, x, r.t)).sum();
                let ok = r.lhs.within(exact, 3.0, r.bias_allowance);
                checks.push(Check::new(
                    format!("closed_form_second_moment t={}", r.t),
                    ok,
                    format!("E|u|^2 = {:.5} +- {:.1e}, exact {exact:.5}", r.lhs.mean, r.lhs.std_err),
                ));
            }
        }
    }
    Ok(Outcome { table, checks, report: Some(report) })
}

pub fn energy_check(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let problem = cfg.build_problem()?;
    let solver = cfg.solver.build();
    let r = energy_inequality_check(&problem, &solver, cfg.n_paths, cfg.master_seed, cfg.options.slack)?;
    let mut table = Table::new([
        "n_paths",
        "dt",
        "epsilon",
        "lhs_mean",
        "lhs_se",
        "rhs_mean",
        "rhs_se",
        "difference_mean",
        "difference_se",
        "slack",
        "passed",
    ]);
    table.push(vec![
        r.n_paths.to_string(),
        num(r.dt),
        num(solver.epsilon),
        num(r.lhs.mean),
        num(r.lhs.std_err),
        num(r.rhs.mean),
        num(r.rhs.std_err),
        num(r.difference.mean),
        num(r.difference.std_err),
        num(r.slack),
        flag(r.passed),
    ]);
    let detail = format!(
        "LHS {:.5e} vs RHS {:.5e}: difference {:.3e} +- {:.1e}, slack {:.1e}",
        r.lhs.mean, r.rhs.mean, r.difference.mean, r.difference.std_err, r.slack
    );
    Ok(Outcome { table, checks: vec![Check::new("energy_inequality", r.passed, detail)], report: None })
}

/// `QV(T)` of `M(t) = ∫Φ dW` (state coordinates, `W`-norm) on dyadic levels
/// `qv_min_level..=qv_max_level`, averaged over `qv_seeds` Wiener paths
/// sampled at the finest level. Columns `level,mesh,qv_mean,qv_se,target`
/// with `target = ∫‖Φ‖²_HS(W) dt`.
pub fn qv(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let problem = cfg.build_problem()?;
    let o = &cfg.options;
    let horizon = problem.horizon;
    let parts = dyadic_partitions(horizon, o.qv_min_level, o.qv_max_level)?;
    let finest = parts.last().context("no dyadic levels")?.clone();
    let noise = &problem.noise;
    let w_mass = &problem.w_mass;
    let d = problem.dim();
    let per_seed = (0..o.qv_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let path = WienerPath::sample(noise, finest.clone(), path_seed(cfg.master_seed, s));
            let sampler = |p: &Partition<f64>| -> Vec<Vec<f64>> {
                let inc = path.increments_on(p).expect("dyadic levels are nested");
                let mut acc = vec![0.0; d];
                let mut out = Vec::with_capacity(inc.len() + 1);
                out.push(acc.clone());
                for (j, dw) in inc.iter().enumerate() {
                    let image = match noise.constant_phi() {
                        Some(phi) => phi.mul_vec(dw),
                        None => noise.phi(p.times[j]).mul_vec(dw),
                    };
                    acc.iter_mut().zip(&image).for_each(|(a, x)| *a += x);
                    out.push(acc.clone());
                }
                out
            };
            quadratic_variation(sampler, &parts, w_mass, &[horizon]).map(|e| e.per_level)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let target: f64 = (0..finest.intervals()).map(|j| noise.hs_norm_sq(finest.times[j], w_mass) * finest.dt(j)).sum();
    let mut table = Table::new(["level", "mesh", "qv_mean", "qv_se", "target"]);
    let mut last = (0.0, 0.0);
    for (k, p) in parts.iter().enumerate() {
        let values: Vec<f64> = per_seed.iter().map(|levels| levels[k].1[0]).collect();
        let (mean, se) = mean_and_se(&values);
        table.push(vec![p.level.to_string(), num(p.mesh()), num(mean), num(se), num(target)]);
        last = (mean, se);
    }
    let rel = (last.0 - target).abs() / target.abs().max(f64::MIN_POSITIVE);
    let detail = format!(
        "level {}: QV(T) = {:.5} +- {:.1e} over {} paths, target {target:.5}, relative error {rel:.2e} (tolerance {})",
        o.qv_max_level, last.0, last.1, o.qv_seeds, o.qv_tolerance
    );
    Ok(Outcome { table, checks: vec![Check::new("quadratic_variation", rel <= o.qv_tolerance, detail)], report: None })
}

/// `E[(∫₀ᵀ t dW)²]` against `T³/3` on a dyadic grid with scalar `W`,
/// over `isometry_paths` paths from `master_seed`.
pub fn isometry(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let o = &cfg.options;
    let horizon = cfg.horizon();
    let part = Partition::dyadic(horizon, o.isometry_level)?;
    let noise = NoiseModel::constant(Mat::identity(1), Mat::identity(1))?;
    let squares: Vec<f64> = (0..o.isometry_paths as u64)
        .into_par_iter()
        .map(|i| {
            let inc = sample_increments(&noise, &part, path_seed(cfg.master_seed, i));
            let integral: f64 = inc.iter().enumerate().map(|(j, dw)| part.times[j] * dw[0]).sum();
            integral * integral
        })
        .collect();
    let est = Estimate::from_samples(&squares);
    let exact = horizon.powi(3) / 3.0;
    let allowance = 3.0 * est.std_err + 2.0 * part.mesh();
    let passed = (est.mean - exact).abs() <= allowance;
    let mut table = Table::new(["level", "mesh", "n_paths", "mean_square", "std_err", "exact", "allowance", "passed"]);
    table.push(vec![
        o.isometry_level.to_string(),
        num(part.mesh()),
        o.isometry_paths.to_string(),
        num(est.mean),
        num(est.std_err),
        num(exact),
        num(allowance),
        flag(passed),
    ]);
    let detail =
        format!("E[I^2] = {:.5} +- {:.1e}, exact {exact:.5}, allowance {allowance:.2e}", est.mean, est.std_err);
    Ok(Outcome { table, checks: vec![Check::new("ito_isometry", passed, detail)], report: None })
}

/// `max_t |residual|` for each `(seed, dt)` with all step sizes driven by
/// one Wiener path per seed; `ratio` is the previous row's value over this
/// one. Passes when every ratio lies in `convergence_band`.
pub fn convergence(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let problem = cfg.build_problem()?;
    let o = &cfg.options;
    let base = cfg.solver.build().with_noise_grid(o.convergence_noise_steps);
    let per_seed = o
        .convergence_seeds
        .par_iter()
        .map(|&seed| {
            o.convergence_dts
                .iter()
                .map(|&dt| {
                    let solver = base.clone().with_dt(dt).with_seed(seed);
                    let l = regularized_ledger(&solve_path(&problem, &solver)?, &problem)?;
                    Ok(if o.convergence_reduced {
                        (0..l.len()).map(|j| l.reduced_residual(j).abs()).fold(0.0, f64::max)
                    } else {
                        l.max_abs_residual()
                    })
                })
                .collect::<anyhow::Result<Vec<f64>>>()
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let [lo, hi] = o.convergence_band;
    let mut table = Table::new(["seed", "dt", "max_abs_residual", "ratio"]);
    let mut checks = Vec::new();
    for (&seed, res) in o.convergence_seeds.iter().zip(&per_seed) {
        let mut ratios = Vec::new();
        for (k, (&dt, &r)) in o.convergence_dts.iter().zip(res).enumerate() {
            let ratio = if k == 0 { f64::NAN } else { res[k - 1] / r };
            if k > 0 {
                ratios.push(ratio);
            }
            table.push(vec![seed.to_string(), num(dt), num(r), num(ratio)]);
        }
        let ok = ratios.iter().all(|r| (lo..=hi).contains(r));
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
        checks.push(Check::new(
            format!("convergence seed={seed}"),
            ok,
            format!("ratios [{}] within [{lo}, {hi}]", shown.join(", ")),
        ));
    }
    Ok(Outcome { table, checks, report: None })
}
