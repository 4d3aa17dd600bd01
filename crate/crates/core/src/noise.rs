//! Q-Wiener sampling, left-point stochastic integrals and quadratic
//! variation on nested partitions.
//!
//! In finite dimensions the Hilbert–Schmidt embedding used to define the
//! integral for cylindrical noise is unnecessary: increments live directly
//! on the range of `Q^{1/2}`, expanded in the eigenbasis of `Q`.
//!
//! Normal variates are addressed by a counter `(stream, step, mode)` in a
//! ChaCha8 keystream. The stream is the number of intervals in the
//! partition, the step and mode select a fixed block of four 32-bit words,
//! so any sub-range of a partition can be generated independently and the
//! result never depends on how the work is split.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, Mat, SymmetricEigen};
use crate::scalar::Real;

/// Finest dyadic level accepted by [`dyadic_partitions`].
pub const MAX_LEVEL: u32 = 24;

/// Relative floor below which eigenvalues of `Q` are ignored.
pub const Q_SPECTRAL_FLOOR: f64 = 1e-14;

/// Steps per independently seeked chunk when sampling in parallel.
const CHUNK_STEPS: usize = 4096;

pub type PhiFn<S> = Arc<dyn Fn(S) -> Mat<S> + Send + Sync>;

/// Covariance `Q` on `ℝᵐ`, its spectral data, and the state-independent
/// coefficient `Φ(t): ℝᵐ → ℝᵈ`.
#[derive(Clone)]
pub struct NoiseModel<S> {
    q: Mat<S>,
    eigen: SymmetricEigen<S>,
    /// `(index into eigen, λ, u)` for every retained positive eigenpair.
    retained: Vec<(usize, S, Vec<S>)>,
    phi: PhiFn<S>,
    constant_phi: Option<Mat<S>>,
    d: usize,
    m: usize,
}

impl<S: Real> std::fmt::Debug for NoiseModel<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseModel")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("q_eigenvalues", &self.eigen.values)
            .finish_non_exhaustive()
    }
}

impl<S: Real> NoiseModel<S> {
    pub fn new(mut q: Mat<S>, d: usize, phi: impl Fn(S) -> Mat<S> + Send + Sync + 'static) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch { what: "covariance columns", expected: q.rows(), found: q.cols() });
        }
        let m = q.rows();
        q.symmetrize();
        let eigen = SymmetricEigen::new(&q);
        let psd_tol = S::lit(100.0) * S::from_usize_lossy(m.max(1)) * S::epsilon() * (S::one() + q.norm_inf());
        if eigen.min() < -psd_tol {
            return Err(Error::FormNotPSD {
                min_eigenvalue: eigen.min().to_f64_lossy(),
                tolerance: psd_tol.to_f64_lossy(),
            });
        }
        let phi0 = phi(S::zero());
        if phi0.rows() != d || phi0.cols() != m {
            return Err(Error::DimensionMismatch {
                what: "noise coefficient shape",
                expected: d * m,
                found: phi0.rows() * phi0.cols(),
            });
        }
        let floor = S::lit(Q_SPECTRAL_FLOOR) * eigen.max();
        let retained = eigen
            .values
            .iter()
            .enumerate()
            .filter(|&(_, &lam)| lam > S::zero() && lam > floor)
            .map(|(k, &lam)| (k, lam, eigen.vector(k)))
            .collect();
        Ok(Self { q, eigen, retained, phi: Arc::new(phi), constant_phi: None, d, m })
    }

    /// Time-independent coefficient.
    pub fn constant(q: Mat<S>, phi: Mat<S>) -> Result<Self> {
        let d = phi.rows();
        let held = phi.clone();
        let mut model = Self::new(q, d, move |_| phi.clone())?;
        model.constant_phi = Some(held);
        Ok(model)
    }

    /// `Φ` when it was given as a constant matrix.
    pub fn constant_phi(&self) -> Option<&Mat<S>> {
        self.constant_phi.as_ref()
    }

    /// No noise at all: `Q = 0`.
    pub fn zero(d: usize, m: usize) -> Self {
        Self::constant(Mat::zeros(m, m), Mat::zeros(d, m)).expect("zero noise is valid")
    }

    #[inline]
    pub fn state_dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> &Mat<S> {
        &self.q
    }

    pub fn eigen(&self) -> &SymmetricEigen<S> {
        &self.eigen
    }

    pub fn phi(&self, t: S) -> Mat<S> {
        (self.phi)(t)
    }

    pub fn trace(&self) -> S {
        (0..self.m).fold(S::zero(), |acc, i| acc + self.q[(i, i)])
    }

    /// Retained eigenpairs `(λᵢ, uᵢ)`; `{√λᵢ uᵢ}` is an orthonormal basis of `Q^{1/2}ℝᵐ`.
    pub fn modes(&self) -> impl Iterator<Item = (S, &[S])> + '_ {
        self.retained.iter().map(|(_, lam, u)| (*lam, u.as_slice()))
    }

    pub fn is_degenerate(&self) -> bool {
        self.retained.is_empty()
    }

    /// Squared Hilbert–Schmidt norm of `Φ(t)` into the space with Gram matrix `gram`.
    pub fn hs_norm_sq(&self, t: S, gram: &Mat<S>) -> S {
        let phi = self.phi(t);
        self.modes().fold(S::zero(), |acc, (lam, u)| acc + lam * gram.quad(&phi.mul_vec(u)))
    }

    /// Same with the Euclidean inner product on the state space.
    pub fn hs_norm_sq_euclidean(&self, t: S) -> S {
        let phi = self.phi(t);
        self.modes().fold(S::zero(), |acc, (lam, u)| {
            let v = phi.mul_vec(u);
            acc + lam * crate::linalg::dot(&v, &v)
        })
    }
}

/// Strictly increasing times from `0` to the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition<S> {
    pub times: Vec<S>,
    pub level: u32,
}

impl<S: Real> Partition<S> {
    pub fn new(times: Vec<S>, level: u32) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPartition("need at least two times".into()));
        }
        if times[0] != S::zero() {
            return Err(Error::InvalidPartition(format!("first time is {} instead of 0", times[0])));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPartition(format!("times not strictly increasing at index {}", w + 1)));
        }
        Ok(Self { times, level })
    }

    /// `n` equal intervals on `[0, horizon]`, `tⱼ = j·horizon/n`.
    pub fn uniform(horizon: S, n: usize) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidPartition(format!("horizon must be positive, got {horizon}")));
        }
        if n == 0 {
            return Err(Error::InvalidPartition("zero intervals".into()));
        }
        let nn = S::from_usize_lossy(n);
        let times = (0..=n).map(|j| S::from_usize_lossy(j) * horizon / nn).collect();
        let level = if n.is_power_of_two() { n.trailing_zeros() } else { 0 };
        Self::new(times, level)
    }

    /// Level `k` dyadic partition: `2ᵏ` equal intervals.
    pub fn dyadic(horizon: S, level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelTooFine { level, max: MAX_LEVEL });
        }
        let mut p = Self::uniform(horizon, 1usize << level)?;
        p.level = level;
        Ok(p)
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> S {
        *self.times.last().expect("partition is non-empty")
    }

    pub fn mesh(&self) -> S {
        self.times.windows(2).fold(S::zero(), |acc, w| acc.max(w[1] - w[0]))
    }

    pub fn dt(&self, j: usize) -> S {
        self.times[j + 1] - self.times[j]
    }

    /// Every time of `self` appears (bitwise) in `finer`.
    pub fn is_nested_in(&self, finer: &Self) -> bool {
        self.embedding(finer).is_some()
    }

    /// Indices of `self.times` inside `finer.times`.
    pub fn embedding(&self, finer: &Self) -> Option<Vec<usize>> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut k = 0;
        for &t in &self.times {
            while k < finer.times.len() && finer.times[k] < t {
                k += 1;
            }
            if k == finer.times.len() || finer.times[k] != t {
                return None;
            }
            out.push(k);
        }
        Some(out)
    }
}

/// Nested dyadic partitions of `[0, horizon]` for levels `min_level..=max_level`.
pub fn dyadic_partitions<S: Real>(horizon: S, min_level: u32, max_level: u32) -> Result<Vec<Partition<S>>> {
    if max_level > MAX_LEVEL {
        return Err(Error::LevelTooFine { level: max_level, max: MAX_LEVEL });
    }
    if min_level > max_level {
        return Err(Error::InvalidPartition(format!("min_level {min_level} exceeds max_level {max_level}")));
    }
    (min_level..=max_level).map(|k| Partition::dyadic(horizon, k)).collect()
}

/// SplitMix64 finalizer; used to derive per-path seeds from a master seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `index` in a batch.
pub fn path_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ index)
}

/// Counter-addressed standard normals for one `(seed, stream)` pair.
struct NormalStream {
    rng: ChaCha8Rng,
    next_counter: u64,
}

impl NormalStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, next_counter: 0 }
    }

    /// Positions the stream at normal number `counter`.
    fn seek(&mut self, counter: u64) {
        if counter != self.next_counter {
            self.rng.set_word_pos(u128::from(counter) * 4);
            self.next_counter = counter;
        }
    }

    /// Box–Muller (cosine branch) from two 53-bit uniforms.
    fn next(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        self.next_counter += 1;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Increments `ΔWⱼ = Σᵢ √(λᵢ Δtⱼ) ξᵢⱼ uᵢ` of a Q-Wiener process on `partition`.
pub fn sample_increments<S: Real>(noise: &NoiseModel<S>, partition: &Partition<S>, seed: u64) -> Vec<Vec<S>> {
    let n = partition.intervals();
    let m = noise.m;
    if noise.retained.is_empty() {
        return vec![vec![S::zero(); m]; n];
    }
    let stream = n as u64;
    let fill_chunk = |start: usize, out: &mut [Vec<S>]| {
        let mut normals = NormalStream::new(seed, stream);
        for (offset, slot) in out.iter_mut().enumerate() {
            let j = start + offset;
            let sqrt_dt = partition.dt(j).sqrt();
            let mut dw = vec![S::zero(); m];
            for (k, lam, u) in &noise.retained {
                normals.seek((j * m + k) as u64);
                let xi = S::lit(normals.next());
                axpy(lam.sqrt() * sqrt_dt * xi, u, &mut dw);
            }
            *slot = dw;
        }
    };
    let mut out = vec![Vec::new(); n];
    if n <= CHUNK_STEPS {
        fill_chunk(0, &mut out);
    } else {
        out.par_chunks_mut(CHUNK_STEPS).enumerate().for_each(|(c, chunk)| fill_chunk(c * CHUNK_STEPS, chunk));
    }
    out
}

/// One Wiener sample path resolved on a fine partition; coarser views are
/// exact sums of the fine increments.
#[derive(Clone, Debug)]
pub struct WienerPath<S> {
    pub partition: Partition<S>,
    pub increments: Vec<Vec<S>>,
}

impl<S: Real> WienerPath<S> {
    pub fn sample(noise: &NoiseModel<S>, fine: Partition<S>, seed: u64) -> Self {
        let increments = sample_increments(noise, &fine, seed);
        Self { partition: fine, increments }
    }

    /// Sums consecutive blocks of `factor` fine increments.
    pub fn coarsen(&self, factor: usize) -> Result<Vec<Vec<S>>> {
        let n = self.increments.len();
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(Error::InvalidPartition(format!("{n} fine steps not divisible by {factor}")));
        }
        Ok(self
            .increments
            .chunks(factor)
            .map(|block| {
                let mut acc = block[0].clone();
                for inc in &block[1..] {
                    axpy(S::one(), inc, &mut acc);
                }
                acc
            })
            .collect())
    }

    /// Increments on a partition whose times all occur in the fine partition.
    pub fn increments_on(&self, coarse: &Partition<S>) -> Result<Vec<Vec<S>>> {
        let idx = coarse.embedding(&self.partition).ok_or_else(|| nesting_error(coarse, &self.partition, 0))?;
        Ok(idx
            .windows(2)
            .map(|w| {
                let mut acc = vec![S::zero(); self.increments.first().map_or(0, Vec::len)];
                for inc in &self.increments[w[0]..w[1]] {
                    axpy(S::one(), inc, &mut acc);
                }
                acc
            })
            .collect())
    }

    /// `W(tⱼ)` on a nested partition.
    pub fn values_on(&self, coarse: &Partition<S>) -> Result<Vec<Vec<S>>> {
        Ok(cumulative(&self.increments_on(coarse)?))
    }
}

fn nesting_error<S: Real>(coarse: &Partition<S>, fine: &Partition<S>, index: usize) -> Error {
    let missing = coarse.times.iter().find(|t| !fine.times.contains(t)).map_or(f64::NAN, |t| t.to_f64_lossy());
    Error::PartitionNotNested { index, time: missing }
}

/// Running sums `S₀ = 0, Sₖ = Σ_{j<k} xⱼ`.
pub fn cumulative<S: Real>(steps: &[Vec<S>]) -> Vec<Vec<S>> {
    let dim = steps.first().map_or(0, Vec::len);
    let mut acc = vec![S::zero(); dim];
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(acc.clone());
    for s in steps {
        axpy(S::one(), s, &mut acc);
        out.push(acc.clone());
    }
    out
}

/// Left-point stochastic integral `Sₖ = Σ_{j<k} Zⱼ ΔWⱼ`; returns `(S_N, [S₀..S_N])`.
pub fn ito_integral<S: Real>(step_values: &[Mat<S>], increments: &[Vec<S>]) -> Result<(Vec<S>, Vec<Vec<S>>)> {
    if step_values.len() != increments.len() {
        return Err(Error::DimensionMismatch {
            what: "integrand steps",
            expected: increments.len(),
            found: step_values.len(),
        });
    }
    let d = step_values.first().map_or(0, Mat::rows);
    let mut acc = vec![S::zero(); d];
    let mut path = Vec::with_capacity(increments.len() + 1);
    path.push(acc.clone());
    for (z, dw) in step_values.iter().zip(increments) {
        if z.cols() != dw.len() || z.rows() != d {
            return Err(Error::DimensionMismatch { what: "integrand shape", expected: dw.len(), found: z.cols() });
        }
        let zdw = z.mul_vec(dw);
        axpy(S::one(), &zdw, &mut acc);
        path.push(acc.clone());
    }
    Ok((acc, path))
}

/// Per-level quadratic-variation estimates at a set of target times.
#[derive(Clone, Debug, PartialEq)]
pub struct QVEstimate<S> {
    pub target_times: Vec<S>,
    /// `(level, [QV(t) for t in target_times])`
    pub per_level: Vec<(u32, Vec<S>)>,
}

impl<S: Real> QVEstimate<S> {
    pub fn at_level(&self, level: u32) -> Option<&[S]> {
        self.per_level.iter().find(|(l, _)| *l == level).map(|(_, v)| v.as_slice())
    }
}

/// `QV(t) = Σₖ ‖M(t∧tₖ₊₁) − M(t∧tₖ)‖²_W` on each partition.
///
/// `path_sampler` must return `M(tⱼ)` for every time of the partition it
/// receives, all views coming from the same sample path. Between grid
/// points `M` is interpolated linearly.
pub fn quadratic_variation<S, F>(
    path_sampler: F,
    partitions: &[Partition<S>],
    w_mass: &Mat<S>,
    t_targets: &[S],
) -> Result<QVEstimate<S>>
where
    S: Real,
    F: Fn(&Partition<S>) -> Vec<Vec<S>>,
{
    if partitions.is_empty() {
        return Err(Error::EmptyInput("no partitions"));
    }
    for (k, w) in partitions.windows(2).enumerate() {
        if !w[0].is_nested_in(&w[1]) {
            return Err(nesting_error(&w[0], &w[1], k));
        }
    }
    if let Some(t) = t_targets.iter().find(|t| !(**t >= S::zero())) {
        return Err(Error::InvalidPartition(format!("target time {t} is negative")));
    }
    let mut per_level = Vec::with_capacity(partitions.len());
    for p in partitions {
        let m = path_sampler(p);
        if m.len() != p.times.len() {
            return Err(Error::DimensionMismatch {
                what: "sampled path length",
                expected: p.times.len(),
                found: m.len(),
            });
        }
        let sq: Vec<S> = m.windows(2).map(|w| w_mass.quad(&crate::linalg::sub(&w[1], &w[0]))).collect();
        let values = t_targets
            .iter()
            .map(|&t| {
                let mut acc = S::zero();
                for (k, &s) in sq.iter().enumerate() {
                    let (a, b) = (p.times[k], p.times[k + 1]);
                    if t >= b {
                        acc += s;
                    } else {
                        if t > a {
                            let theta = (t - a) / (b - a);
                            acc += theta * theta * s;
                        }
                        break;
                    }
                }
                acc
            })
            .collect();
        per_level.push((p.level, values));
    }
    Ok(QVEstimate { target_times: t_targets.to_vec(), per_level })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_noise(q: f64) -> NoiseModel<f64> {
        NoiseModel::constant(Mat::from_diag(&[q]), Mat::identity(1)).unwrap()
    }

    #[test]
    fn dyadic_examples() {
        let ps = dyadic_partitions(1.0, 0, 1).unwrap();
        assert_eq!(ps[0].times, vec![0.0, 1.0]);
        assert_eq!(ps[1].times, vec![0.0, 0.5, 1.0]);
        let ps = dyadic_partitions(0.7, 3, 4).unwrap();
        assert!(ps[0].is_nested_in(&ps[1]));
        let p10 = Partition::dyadic(3.0, 10).unwrap();
        assert_eq!(p10.mesh(), 3.0 / 1024.0);
        assert!(matches!(dyadic_partitions(1.0, 0, 25), Err(Error::LevelTooFine { .. })));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0, 0.5, 0.5], 0).is_err());
        assert!(Partition::new(vec![0.1, 0.5], 0).is_err());
        assert!(Partition::<f64>::uniform(0.0, 4).is_err());
    }

    #[test]
    fn zero_covariance_gives_zero_increments() {
        let noise = NoiseModel::<f64>::constant(Mat::zeros(2, 2), Mat::identity(2)).unwrap();
        let inc = sample_increments(&noise, &Partition::dyadic(1.0, 5).unwrap(), 3);
        assert!(inc.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_is_deterministic_and_chunk_independent() {
        let noise = scalar_noise(1.0);
        let p = Partition::dyadic(1.0, 13).unwrap();
        let a = sample_increments(&noise, &p, 42);
        let b = sample_increments(&noise, &p, 42);
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sample_increments(&noise, &p, 42));
        assert_eq!(a, c);
        assert_ne!(a, sample_increments(&noise, &p, 43));
    }

    #[test]
    fn increment_variance_matches_dt() {
        let noise = scalar_noise(1.0);
        let p = Partition::dyadic(1.0, 10).unwrap();
        let dt = p.mesh();
        let n_seeds = 100_000u64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for seed in 0..n_seeds {
            let inc = sample_increments(&noise, &p, path_seed(9, seed));
            let z = inc[(seed as usize) % inc.len()][0] / dt.sqrt();
            s1 += z * z;
            s2 += z.powi(4);
        }
        let n = n_seeds as f64;
        let var = s1 / n;
        let se = ((s2 / n - var * var) / n).sqrt();
        assert!((var - 1.0).abs() <= 3.0 * se, "var {var} se {se}");
    }

    #[test]
    fn coarsening_sums_fine_increments() {
        let noise = scalar_noise(2.0);
        let path = WienerPath::sample(&noise, Partition::dyadic(1.0, 6).unwrap(), 11);
        let coarse = path.increments_on(&Partition::dyadic(1.0, 4).unwrap()).unwrap();
        let by_factor = path.coarsen(4).unwrap();
        assert_eq!(coarse, by_factor);
        let total: f64 = path.increments.iter().map(|v| v[0]).sum();
        let total_coarse: f64 = coarse.iter().map(|v| v[0]).sum();
        assert!((total - total_coarse).abs() < 1e-14);
        assert!(path.coarsen(5).is_err());
        assert!(path.increments_on(&Partition::uniform(1.0, 3).unwrap()).is_err());
    }

    #[test]
    fn ito_integral_examples() {
        let inc = vec![vec![0.5], vec![-0.25], vec![1.0]];
        let zero = vec![Mat::zeros(1, 1); 3];
        let (term, path) = ito_integral(&zero, &inc).unwrap();
        assert_eq!(term, vec![0.0]);
        assert!(path.iter().all(|v| v[0] == 0.0));
        let one = vec![Mat::identity(1); 3];
        let (term, path) = ito_integral(&one, &inc).unwrap();
        assert_eq!(term, vec![1.25]);
        assert_eq!(path, cumulative(&inc));
        assert!(matches!(ito_integral(&one[..2], &inc), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn qv_of_constant_and_linear_paths() {
        let parts = dyadic_partitions(1.0, 2, 8).unwrap();
        let w = Mat::identity(1);
        let est = quadratic_variation(|p| vec![vec![3.0]; p.times.len()], &parts, &w, &[0.3, 1.0]).unwrap();
        assert!(est.per_level.iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));
        let est = quadratic_variation(|p| p.times.iter().map(|&t| vec![t]).collect(), &parts, &w, &[1.0]).unwrap();
        for (level, v) in &est.per_level {
            let mesh = 1.0 / f64::from(1u32 << level);
            assert!((v[0] - mesh).abs() < 1e-14);
        }
    }

    #[test]
    fn qv_rejects_unnested() {
        let parts = vec![Partition::uniform(1.0, 3).unwrap(), Partition::uniform(1.0, 4).unwrap()];
        let r = quadratic_variation(|p| vec![vec![0.0]; p.times.len()], &parts, &Mat::identity(1), &[1.0]);
        assert!(matches!(r, Err(Error::PartitionNotNested { .. })));
    }

    #[test]
    fn qv_is_monotone_in_time() {
        let noise = scalar_noise(1.0);
        let path = WienerPath::sample(&noise, Partition::dyadic(1.0, 10).unwrap(), 5);
        let parts = dyadic_partitions(1.0, 4, 10).unwrap();
        let targets: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0 + 0.013).collect();
        let est = quadratic_variation(|p| path.values_on(p).unwrap(), &parts, &Mat::identity(1), &targets).unwrap();
        for (_, v) in &est.per_level {
            assert!(v.windows(2).all(|w| w[1] >= w[0]));
            assert!(v.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn q_eigs_reconstruct_q() {
        let q = Mat::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 0.0]]);
        let q = q.matmul(&q.transpose());
        let noise = NoiseModel::constant(q.clone(), Mat::identity(3)).unwrap();
        let rec = noise.eigen().reconstruct();
        assert!(rec.sub(&q).max_abs() <= 1e-10 * q.max_abs());
        let sum: f64 = noise.eigen().values.iter().sum();
        assert!((sum - noise.trace()).abs() < 1e-12);
    }
}
