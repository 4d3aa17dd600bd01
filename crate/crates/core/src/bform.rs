//! Linear algebra for a symmetric positive-semidefinite form `B`.
//!
//! `B` maps state coordinates to covector coordinates, so `⟨Bx, y⟩` is
//! `yᵀ B x`. When `B` is singular the form only sees the quotient by its
//! kernel, and a `B`-orthonormal basis spans at most `rank(B)` directions.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_inf, Mat, SymmetricEigen};
use crate::noise::NoiseModel;
use crate::scalar::Real;

/// Symmetric positive-semidefinite matrix `B`.
#[derive(Clone, Debug)]
pub struct BForm<S> {
    matrix: Mat<S>,
    psd_tol: S,
    eigen: SymmetricEigen<S>,
}

impl<S: Real> BForm<S> {
    /// Symmetrizes `matrix` exactly and rejects it if any eigenvalue lies
    /// below `-psd_tol`.
    pub fn new(mut matrix: Mat<S>, psd_tol: S) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                what: "form matrix columns",
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        if matrix.rows() == 0 {
            return Err(Error::EmptyInput("form of dimension zero"));
        }
        matrix.symmetrize();
        let eigen = SymmetricEigen::new(&matrix);
        if !(eigen.min() >= -psd_tol) {
            return Err(Error::FormNotPSD {
                min_eigenvalue: eigen.min().to_f64_lossy(),
                tolerance: psd_tol.to_f64_lossy(),
            });
        }
        Ok(Self { matrix, psd_tol, eigen })
    }

    /// Uses a PSD tolerance of `100·dim·eps·(1 + ‖B‖∞)`.
    pub fn with_default_tol(matrix: Mat<S>) -> Result<Self> {
        let tol =
            S::lit(100.0) * S::from_usize_lossy(matrix.rows().max(1)) * S::epsilon() * (S::one() + matrix.norm_inf());
        Self::new(matrix, tol)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(Mat::zeros(dim, dim), S::zero()).expect("zero form is PSD")
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Mat::identity(dim), S::zero()).expect("identity form is PSD")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Mat<S> {
        &self.matrix
    }

    pub fn psd_tol(&self) -> S {
        self.psd_tol
    }

    pub fn eigen(&self) -> &SymmetricEigen<S> {
        &self.eigen
    }

    pub fn min_eigenvalue(&self) -> S {
        self.eigen.min()
    }

    pub fn norm_inf(&self) -> S {
        self.matrix.norm_inf()
    }

    /// `Bx` as a covector.
    pub fn apply(&self, x: &[S]) -> Vec<S> {
        self.matrix.mul_vec(x)
    }

    /// `⟨Bx, y⟩`.
    pub fn pair(&self, x: &[S], y: &[S]) -> S {
        self.matrix.bilinear(y, x)
    }

    /// `⟨Bx, x⟩`.
    pub fn energy(&self, x: &[S]) -> S {
        self.matrix.quad(x)
    }

    /// `1e-12·(1 + ‖B‖∞)` in double precision, floored at `16·eps` otherwise.
    pub fn default_zero_tol(&self) -> S {
        S::lit(1e-12).max(S::lit(16.0) * S::epsilon()) * (S::one() + self.norm_inf())
    }

    /// Number of eigenvalues strictly above `tol`.
    pub fn numerical_rank(&self, tol: S) -> usize {
        self.eigen.values.iter().filter(|&&v| v > tol).count()
    }

    pub fn is_singular(&self, tol: S) -> bool {
        self.numerical_rank(tol) < self.dim()
    }
}

/// Vectors `e₁..e_r` with `⟨Beᵢ, eⱼ⟩ = δᵢⱼ`.
#[derive(Clone, Debug)]
pub struct BOrthonormalBasis<'a, S> {
    pub vectors: Vec<Vec<S>>,
    /// Cached images `Beᵢ`.
    pub images: Vec<Vec<S>>,
    pub form: &'a BForm<S>,
    /// Candidate indices whose residual energy stayed at or below the tolerance.
    pub drop_log: Vec<usize>,
}

impl<S: Real> BOrthonormalBasis<'_, S> {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Matrix of `⟨Beᵢ, eⱼ⟩`.
    pub fn gram(&self) -> Mat<S> {
        let r = self.len();
        Mat::from_fn(r, r, |i, j| dot(&self.images[i], &self.vectors[j]))
    }

    /// `max |⟨Beᵢ, eⱼ⟩ − δᵢⱼ|`.
    pub fn orthonormality_defect(&self) -> S {
        let g = self.gram();
        let mut worst = S::zero();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { S::one() } else { S::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Gram–Schmidt in the semi-inner product `⟨B·,·⟩`.
///
/// Candidates are scanned in the given order. Each residual is projected
/// twice against the accepted vectors, then kept only if its energy
/// `⟨Br, r⟩` exceeds `zero_tol·max(1, ‖r‖²)`. The rounding error of the
/// energy grows like `‖r‖²`, and residuals become long once a nearly
/// dependent candidate has been accepted.
pub fn b_gram_schmidt<'a, S: Real>(
    form: &'a BForm<S>,
    candidates: &[Vec<S>],
    zero_tol: S,
) -> Result<BOrthonormalBasis<'a, S>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("no candidate vectors"));
    }
    if !(zero_tol > S::zero()) {
        return Err(Error::InvalidConfig(format!("zero_tol must be positive, got {zero_tol}")));
    }
    let d = form.dim();
    let mut vectors: Vec<Vec<S>> = Vec::new();
    let mut images: Vec<Vec<S>> = Vec::new();
    let mut drop_log = Vec::new();

    for (idx, g) in candidates.iter().enumerate() {
        if g.len() != d {
            return Err(Error::DimensionMismatch { what: "candidate vector", expected: d, found: g.len() });
        }
        let mut r = g.clone();
        for _pass in 0..2 {
            for (e, be) in vectors.iter().zip(&images) {
                let c = dot(&r, be);
                axpy(-c, e, &mut r);
            }
        }
        let br = form.apply(&r);
        let energy = dot(&br, &r);
        if energy > zero_tol * dot(&r, &r).max(S::one()) {
            let inv = S::one() / energy.sqrt();
            vectors.push(r.iter().map(|&v| v * inv).collect());
            images.push(br.iter().map(|&v| v * inv).collect());
        } else {
            drop_log.push(idx);
        }
    }
    Ok(BOrthonormalBasis { vectors, images, form, drop_log })
}

/// Energy and covector reconstruction of `x` in a `B`-orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Parseval<S> {
    /// `Σᵢ ⟨Bx, eᵢ⟩²`
    pub energy: S,
    /// `Σᵢ ⟨Bx, eᵢ⟩ Beᵢ`
    pub reconstruction: Vec<S>,
    /// `‖Bx − reconstruction‖∞`
    pub residual: S,
}

pub fn b_parseval<S: Real>(form: &BForm<S>, basis: &BOrthonormalBasis<'_, S>, x: &[S]) -> Result<Parseval<S>> {
    let d = form.dim();
    if basis.form.dim() != d {
        return Err(Error::DimensionMismatch { what: "basis form", expected: d, found: basis.form.dim() });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch { what: "state vector", expected: d, found: x.len() });
    }
    let bx = form.apply(x);
    let mut energy = S::zero();
    let mut reconstruction = vec![S::zero(); d];
    for (e, be) in basis.vectors.iter().zip(&basis.images) {
        let c = dot(&bx, e);
        energy += c * c;
        axpy(c, be, &mut reconstruction);
    }
    let residual = norm_inf(&crate::linalg::sub(&bx, &reconstruction));
    Ok(Parseval { energy, reconstruction, residual })
}

/// `⟨BZ, Z⟩` for `Z = Φ(t)`: `Σᵢ λᵢ (Φuᵢ)ᵀ B (Φuᵢ)` over the retained
/// positive spectrum of `Q`.
///
/// In matrix coordinates the W-Riesz map cancels, so the W-Gram matrix is not
/// needed; when `B` equals it the value is the squared Hilbert–Schmidt norm.
pub fn bzz_pairing<S: Real>(form: &BForm<S>, noise: &NoiseModel<S>, t: S) -> Result<S> {
    if noise.state_dim() != form.dim() {
        return Err(Error::DimensionMismatch {
            what: "noise state dimension",
            expected: form.dim(),
            found: noise.state_dim(),
        });
    }
    let phi = noise.phi(t);
    let total = noise.modes().map(|(lam, u)| lam * form.energy(&phi.mul_vec(u))).fold(S::zero(), |a, b| a + b);
    if total < -form.psd_tol() {
        return Err(Error::FormNotPSD {
            min_eigenvalue: total.to_f64_lossy(),
            tolerance: form.psd_tol().to_f64_lossy(),
        });
    }
    Ok(total.max(S::zero()))
}
