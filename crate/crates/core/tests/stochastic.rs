use proptest::prelude::*;
use spde_lab::integrator::driving_increments;
use spde_lab::problems::ou_second_moment;
use spde_lab::*;

fn ou(sigma: f64) -> Problem<f64> {
    make_ou(1, 1.0, sigma, vec![1.0], 1.0).unwrap()
}

fn porous(amplitude: f64) -> Problem<f64> {
    let g = Grid1D::unit(32);
    let noise = sine_mode_noise(&g, 8, amplitude, 2.0).unwrap();
    make_porous_media(&g, 3.0, noise, g.sine_mode(1), 1.0).unwrap()
}

fn plaplacian() -> Problem<f64> {
    let g = Grid1D::unit(16);
    let noise = sine_mode_noise(&g, 4, 1.0, 2.0).unwrap();
    make_degenerate_plaplacian(&g, 3.0, |x| if x < 0.5 { 0.0 } else { 1.0 }, noise, g.sine_mode(1), 0.25).unwrap()
}

/// `max_t |r|` at `dt = 2⁻⁸` over the same at `2⁻⁹`, both driven by one
/// Wiener path sampled on a `2⁻¹²` grid.
fn halving_ratio(pr: &Problem<f64>, seed: u64, reduced: bool) -> f64 {
    let at = |dt: f64| {
        let cfg = SolverConfig::default().with_dt(dt).with_seed(seed).with_noise_grid(1 << 12);
        let l = pathwise_ledger(&solve_path(pr, &cfg).unwrap(), pr).unwrap();
        if reduced {
            (0..l.len()).map(|j| l.reduced_residual(j).abs()).fold(0.0, f64::max)
        } else {
            l.max_abs_residual()
        }
    };
    at(1.0 / 256.0) / at(1.0 / 512.0)
}

#[test]
fn ledger_residual_halves_in_drift_dominated_regime() {
    for seed in 0..5 {
        let r = halving_ratio(&ou(0.01), seed, false);
        assert!((1.4..=3.0).contains(&r), "OU seed {seed}: {r}");
        let r = halving_ratio(&porous(0.1), seed, false);
        assert!((1.4..=3.0).contains(&r), "porous media seed {seed}: {r}");
    }
}

#[test]
fn reduced_residual_halves_at_unit_noise() {
    // The raw residual at σ = 1 is dominated by Σ(ΔW² − dt), an O(√dt)
    // fluctuation whose level-to-level ratio is not concentrated.
    for seed in 0..5 {
        let r = halving_ratio(&ou(1.0), seed, true);
        assert!((1.4..=3.0).contains(&r), "seed {seed}: {r}");
    }
}

#[test]
fn ledger_shrinks_towards_reference_resolution() {
    let pr = ou(0.01);
    let at = |dt: f64| {
        let cfg = SolverConfig::default().with_dt(dt).with_seed(3).with_noise_grid(1 << 14);
        pathwise_ledger(&solve_path(&pr, &cfg).unwrap(), &pr).unwrap().max_abs_residual()
    };
    let (coarse, reference) = (at(1.0 / 256.0), at(1.0 / 16384.0));
    assert!(reference < coarse / 32.0, "{reference} vs {coarse}");
}

#[test]
fn martingale_term_has_mean_zero_on_shipped_problems() {
    let cases = [(ou(1.0), 0.0), (porous(1.0), 0.0), (plaplacian(), 1e-2)];
    for (pr, eps) in &cases {
        let cfg = SolverConfig::default().with_dt(1.0 / 128.0).with_epsilon(*eps);
        let t_checks = [pr.horizon * 0.5, pr.horizon];
        let rep = expected_energy_check(pr, &cfg, 200, 77, &t_checks, 1.0).unwrap();
        for row in &rep.rows {
            assert!(row.martingale_ok, "{}: {row:?}", pr.name);
        }
    }
}

#[test]
fn quadratic_variation_bound_holds_in_mean() {
    for pr in [ou(1.0), porous(1.0)] {
        let cfg = SolverConfig::default().with_dt(1.0 / 256.0);
        let ledgers = mc_map(&pr, &cfg, 200, 5, |_, p| pathwise_ledger(&p, &pr)).unwrap();
        let check = qv_bound_check(&ledgers).unwrap();
        assert!(check.passed, "{}: {check:?}", pr.name);
    }
}

#[test]
fn realized_qv_matches_quadratic_variation_estimator() {
    let pr = ou(1.0);
    let cfg = SolverConfig::default().with_dt(1.0 / 64.0).with_seed(12);
    let l = pathwise_ledger(&solve_path(&pr, &cfg).unwrap(), &pr).unwrap();
    let part = Partition::uniform(1.0, 64).unwrap();
    let m: Vec<Vec<f64>> = l.term_martingale.iter().map(|&v| vec![v]).collect();
    let qv = quadratic_variation(|_| m.clone(), std::slice::from_ref(&part), &Mat::identity(1), &[1.0]).unwrap();
    let got = qv.per_level[0].1[0];
    let want = *l.martingale_qv.last().unwrap();
    assert!((got - want).abs() <= 1e-12 * want);
}

#[test]
fn sup_energy_is_stable_across_batches() {
    let pr = ou(1.0);
    let cfg = SolverConfig::default().with_dt(1.0 / 128.0);
    let batch = |master| mc_map(&pr, &cfg, 500, master, |_, p| Ok(p)).unwrap();
    let a = sup_energy_diagnostic(&batch(1), &pr).unwrap();
    let b = sup_energy_diagnostic(&batch(2), &pr).unwrap();
    assert!(a.estimate.is_finite() && b.estimate.is_finite());
    assert!((a.estimate - b.estimate).abs() <= 0.1 * a.estimate.max(b.estimate), "{a:?} {b:?}");
    assert!(a.x_norm > 0.0 && a.y_norm > 0.0 && a.z_norm > 0.0);
    assert_eq!(a.initial_energy, 1.0);
}

#[test]
fn ou_terminal_moment_matches_closed_form() {
    let pr = ou(1.0);
    let cfg = SolverConfig::default().with_dt(1.0 / 200.0);
    let summary = mc_run(&pr, &cfg, 4000, 3, &[Observable::terminal_energy()]).unwrap();
    let stat = summary.get("terminal_energy").unwrap();
    let exact = ou_second_moment(1.0, 1.0, 1.0, 1.0);
    assert!((exact - 0.56767).abs() < 1e-5);
    assert!((stat.mean - exact).abs() <= 3.0 * stat.std_err + cfg.dt, "{stat:?}");
}

#[test]
fn ito_isometry_for_linear_integrand() {
    let noise = NoiseModel::constant(Mat::identity(1), Mat::identity(1)).unwrap();
    let part = Partition::dyadic(1.0, 8).unwrap();
    let z: Vec<Mat<f64>> = part.times[..part.intervals()].iter().map(|&t| Mat::from_diag(&[t])).collect();
    let squares: Vec<f64> = (0..20_000u64)
        .map(|i| {
            let inc = sample_increments(&noise, &part, path_seed(4, i));
            let (terminal, _) = ito_integral(&z, &inc).unwrap();
            terminal[0] * terminal[0]
        })
        .collect();
    let (mean, se) = mean_and_se(&squares);
    assert!((mean - 1.0 / 3.0).abs() <= 3.0 * se + 2.0 * part.mesh(), "{mean} ± {se}");
}

#[test]
fn quadratic_variation_of_scaled_wiener_process() {
    let noise = NoiseModel::constant(Mat::identity(1), Mat::identity(1)).unwrap();
    let parts = dyadic_partitions(1.0, 4, 12).unwrap();
    let mut qv1 = 0.0;
    let mut qv2 = 0.0;
    for seed in 0..20 {
        let path = WienerPath::sample(&noise, parts.last().unwrap().clone(), seed);
        let est = quadratic_variation(|p| path.values_on(p).unwrap(), &parts, &Mat::identity(1), &[0.5, 1.0]).unwrap();
        qv1 += est.at_level(12).unwrap()[1] / 20.0;
        let doubled = |p: &Partition<f64>| path.values_on(p).unwrap().into_iter().map(|v| vec![2.0 * v[0]]).collect();
        qv2 += quadratic_variation(doubled, &parts, &Mat::identity(1), &[1.0]).unwrap().at_level(12).unwrap()[0] / 20.0;
    }
    assert!((qv1 - 1.0).abs() < 0.05, "{qv1}");
    assert!((qv2 - 4.0).abs() < 0.2, "{qv2}");
}

#[test]
fn contraction_for_nondegenerate_plaplacian() {
    let g = Grid1D::unit(16);
    let noise = sine_mode_noise(&g, 4, 1.0, 2.0).unwrap();
    let u0 = g.sine_mode(1);
    let v0: Vec<f64> = g.sine_mode(3).iter().map(|x| -0.7 * x).collect();
    let pa = make_degenerate_plaplacian(&g, 3.0, |_| 1.0, noise.clone(), u0.clone(), 0.5).unwrap();
    let pb = make_degenerate_plaplacian(&g, 3.0, |_| 1.0, noise, v0.clone(), 0.5).unwrap();
    let cfg = SolverConfig::default().with_dt(1.0 / 128.0).with_seed(31);
    let inc = driving_increments(&pa, &cfg).unwrap();
    let a = solve_with_increments(&pa, &cfg, inc.clone()).unwrap();
    let b = solve_with_increments(&pb, &cfg, inc).unwrap();
    let gap = |x: &[f64], y: &[f64]| pa.b.energy(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
    for j in 1..a.states.len() {
        assert!(gap(&a.states[j], &b.states[j]) <= gap(&a.states[j - 1], &b.states[j - 1]) * (1.0 + 1e-12));
    }
    assert!(gap(a.terminal(), b.terminal()) <= gap(&u0, &v0) * (1.0 + 10.0 * cfg.dt));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn residual_starts_at_zero_for_any_ou(lambda in 0.0f64..3.0, sigma in 0.0f64..2.0, u0 in -3.0f64..3.0, seed in any::<u64>()) {
        let pr = make_ou(1, lambda, sigma, vec![u0], 1.0).unwrap();
        for scheme in [Scheme::Explicit, Scheme::ImplicitResolvent, Scheme::PicardBall] {
            let cfg = SolverConfig::default().with_dt(1.0 / 32.0).with_scheme(scheme).with_seed(seed);
            let l = pathwise_ledger(&solve_path(&pr, &cfg).unwrap(), &pr).unwrap();
            prop_assert_eq!(l.residual[0], 0.0);
            prop_assert!(l.residual.iter().all(|r| r.is_finite()));
        }
    }

    #[test]
    fn gelfand_reduction_is_exact(sigma in 0.0f64..3.0, d in 1usize..5) {
        let pr = make_ou(d, 1.0, sigma, vec![0.5; d], 1.0).unwrap();
        let cfg = SolverConfig::default().with_dt(0.125);
        let l = pathwise_ledger(&solve_path(&pr, &cfg).unwrap(), &pr).unwrap();
        let hs = pr.noise.hs_norm_sq(0.0, &pr.w_mass);
        for j in 1..l.len() {
            prop_assert!(((l.term_bzz[j] - l.term_bzz[j - 1]) - 0.125 * hs).abs() <= 1e-14 * (1.0 + hs));
        }
    }

    #[test]
    fn increments_are_reproducible_and_coarsen_consistently(seed in any::<u64>(), level in 2u32..8) {
        let noise = NoiseModel::constant(Mat::identity(2), Mat::identity(2)).unwrap();
        let fine = Partition::dyadic(1.0, level).unwrap();
        let a = WienerPath::sample(&noise, fine.clone(), seed);
        let b = WienerPath::sample(&noise, fine, seed);
        prop_assert_eq!(&a.increments, &b.increments);
        let coarse = a.coarsen(2).unwrap();
        for (k, c) in coarse.iter().enumerate() {
            for (i, &ci) in c.iter().enumerate() {
                prop_assert_eq!(ci, a.increments[2 * k][i] + a.increments[2 * k + 1][i]);
            }
        }
    }

    #[test]
    fn shipped_operators_are_monotone(seed in any::<u64>()) {
        let g = Grid1D::unit(12);
        let mut rng = seed;
        let mut draw = || {
            rng = rng.wrapping_add(0x9e37_79b9_7f4a_7c15);
            (spde_lab::noise::splitmix64(rng) >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        let pairs: Vec<(f64, Vec<f64>, Vec<f64>)> =
            (0..8).map(|_| (0.0, (0..12).map(|_| draw()).collect(), (0..12).map(|_| draw()).collect())).collect();
        let samples: Vec<(f64, Vec<f64>)> = pairs.iter().map(|(t, u, _)| (*t, u.clone())).collect();
        let noise = NoiseModel::zero(12, 1);
        let pm = make_porous_media(&g, 3.0, noise.clone(), vec![0.0; 12], 1.0).unwrap();
        let pl = make_degenerate_plaplacian(&g, 3.0, |x| x, noise, vec![0.0; 12], 1.0).unwrap();
        for pr in [pm, pl] {
            prop_assert!(check_monotonicity(&pr.a, &pr.b, &pairs).passed());
            prop_assert!(check_coercivity(&pr.a, &pr.b, &samples).passed());
            prop_assert!(check_growth(&pr.a, &samples).passed());
        }
    }
}
