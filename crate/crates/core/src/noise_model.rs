//! Structured gradient-type Gaussian noise on the torus: construction,
//! closed-form covariance analytics and sampling.
//!
//! Every noise field here is a sum over half-lattice modes `k ∈ Z³₊` of
//!
//! ```text
//!   ΔW(x) = Σ_k A_k (k/|k|) [cos(2πk·x) ξ_k + sin(2πk·x) ξ'_k] √Δt
//! ```
//!
//! with i.i.d. standard normal `ξ, ξ'` shared by every evaluation point
//! (common noise). The increment covariance is exactly
//!
//! ```text
//!   E[ΔW(x) ΔW(y)ᵀ] = Q(x-y) Δt,
//!   Q(d) = Σ_k A_k² (k⊗k/|k|²) cos(2πk·d),
//! ```
//!
//! and the amplitude families are normalized so that `Q(0) = 2κ I₃`
//! (equivalently `Tr Q(0) = 6κ`) holds exactly at the truncation:
//!
//! - canonical family: `A_k² = 12κ Γ_k²` with flat, ℓ²-normalized `Γ`
//!   supported on the cube `0 < |k|∞ ≤ N`;
//! - blob family: `A_k² = 2τσ_N² χ_N²(k)/|k|²` on the Euclidean ball
//!   `|k| ≤ M`, where `χ_N` is the scale-averaged blob transform and
//!   `σ_N²` solves `2σ_N² Σ_{Z³₊} χ_N²/|k|² = k_T²`, so `κ = τ k_T²/6`.
//!
//! The renewal variant realizes the same covariance as the long-time limit
//! of a piecewise-constant field of randomly placed blobs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    mode_norm_sq, mode_sup_norm, positive_half_ball, positive_half_cube, sub, wrap, Mode,
    PhaseTable, Vec3, TWO_PI,
};
use crate::numerics::{adaptive_simpson, gauss_legendre, gauss_legendre_integrate};
use crate::{Error, Result};

/// Relative tolerance of the scale-average quadrature defining `χ_N`.
pub const CHI_QUADRATURE_REL_TOL: f64 = 1e-8;

/// Radial blob shape.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BlobShape {
    /// Smooth compactly supported bump `exp(-1/(1-(r/R)²))` for `r < R`.
    Bump { radius: f64 },
    /// Isotropic Gaussian of the given width; not compactly supported, kept
    /// as a closed-form cross-check profile.
    Gaussian { width: f64 },
}

/// Radially symmetric blob profile, L¹-normalized at construction.
#[derive(Debug, Clone)]
pub struct BlobProfile {
    shape: BlobShape,
    /// Normalization constant applied to the raw shape.
    norm_const: f64,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl BlobProfile {
    pub fn new(shape: BlobShape) -> Result<Self> {
        let (gl_nodes, gl_weights) = gauss_legendre(64);
        match shape {
            BlobShape::Bump { radius } => {
                if !(radius > 0.0 && radius < 0.5) {
                    return Err(Error::config(format!(
                        "bump radius must lie in (0, 1/2) to fit the unit cell, got {radius}"
                    )));
                }
                let raw = |r: f64| {
                    let s = r / radius;
                    if s >= 1.0 {
                        0.0
                    } else {
                        (-1.0 / (1.0 - s * s)).exp()
                    }
                };
                let mass = 4.0
                    * std::f64::consts::PI
                    * gauss_legendre_integrate(
                        &|r| raw(r) * r * r,
                        0.0,
                        radius,
                        &gl_nodes,
                        &gl_weights,
                    );
                Ok(BlobProfile {
                    shape,
                    norm_const: 1.0 / mass,
                    gl_nodes,
                    gl_weights,
                })
            }
            BlobShape::Gaussian { width } => {
                if !(width > 0.0) {
                    return Err(Error::config("gaussian blob width must be positive"));
                }
                Ok(BlobProfile {
                    shape,
                    norm_const: 1.0,
                    gl_nodes,
                    gl_weights,
                })
            }
        }
    }

    /// Default profile: a smooth bump supported on `|x| < 1/4`.
    pub fn default_bump() -> Self {
        BlobProfile::new(BlobShape::Bump { radius: 0.25 }).expect("valid default radius")
    }

    pub fn shape(&self) -> &BlobShape {
        &self.shape
    }

    /// `∫θ = θ̂(0)`; one after normalization.
    pub fn l1_norm(&self) -> f64 {
        1.0
    }

    /// Radial profile value θ(r).
    pub fn value(&self, r: f64) -> f64 {
        match self.shape {
            BlobShape::Bump { radius } => {
                let s = r / radius;
                if s >= 1.0 {
                    0.0
                } else {
                    self.norm_const * (-1.0 / (1.0 - s * s)).exp()
                }
            }
            BlobShape::Gaussian { width } => {
                let w2 = width * width;
                (2.0 * std::f64::consts::PI * w2).powf(-1.5) * (-r * r / (2.0 * w2)).exp()
            }
        }
    }

    /// Radial Fourier transform `θ̂(|ξ|) = 4π ∫ θ(r) sinc(2π|ξ|r) r² dr`.
    /// Real and even because θ is radial.
    pub fn fourier(&self, xi: f64) -> f64 {
        match self.shape {
            BlobShape::Bump { radius } => {
                let integrand = |r: f64| self.value(r) * sinc(TWO_PI * xi * r) * r * r;
                4.0 * std::f64::consts::PI
                    * gauss_legendre_integrate(
                        &integrand,
                        0.0,
                        radius,
                        &self.gl_nodes,
                        &self.gl_weights,
                    )
            }
            BlobShape::Gaussian { width } => {
                (-2.0 * std::f64::consts::PI.powi(2) * width * width * xi * xi).exp()
            }
        }
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0 + z.powi(4) / 120.0
    } else {
        z.sin() / z
    }
}

/// Scale-averaged blob transform
/// `χ_N(k)² = ℓ_N⁻¹ ∫_{ℓ_N}^{2ℓ_N} |θ̂(ℓ|k|)|² dℓ`, a function of `|k|` only.
pub fn blob_chi(k: Mode, ell: f64, profile: &BlobProfile) -> Result<f64> {
    if mode_norm_sq(k) == 0.0 {
        return Err(Error::config("blob transform is undefined at k = 0"));
    }
    if !(ell > 0.0 && ell <= 0.25) {
        return Err(Error::config(format!(
            "blob scale must lie in (0, 1/4] so dilated blobs fit the cell, got {ell}"
        )));
    }
    let kn = mode_norm_sq(k).sqrt();
    let sq = adaptive_simpson(
        &|l: f64| {
            let t = profile.fourier(l * kn);
            t * t
        },
        ell,
        2.0 * ell,
        CHI_QUADRATURE_REL_TOL,
    )? / ell;
    Ok(sq.sqrt())
}

/// Blob intensity normalization:
/// `σ_N² = k_T² / (2 Σ_{k∈Z³₊, |k|≤M} χ_N²(k)/|k|²)`.
pub fn blob_sigma(ell: f64, profile: &BlobProfile, mode_cutoff: i32, k_t_sq: f64) -> Result<f64> {
    if mode_cutoff < 1 {
        return Err(Error::config("blob mode cutoff must be >= 1"));
    }
    if !(k_t_sq > 0.0) {
        return Err(Error::config("target constant k_T² must be positive"));
    }
    let modes = positive_half_ball(mode_cutoff);
    if modes.is_empty() {
        return Err(Error::config("empty mode set for blob normalization"));
    }
    let chi_by_norm = chi_cache(&modes, ell, profile)?;
    let sum: f64 = modes
        .iter()
        .map(|&k| {
            let k2 = mode_norm_sq(k);
            let chi = chi_by_norm[&(k2 as i64)];
            chi * chi / k2
        })
        .sum();
    Ok(k_t_sq / (2.0 * sum))
}

/// χ values per distinct `|k|²` (χ is radial, so one quadrature per shell).
fn chi_cache(
    modes: &[Mode],
    ell: f64,
    profile: &BlobProfile,
) -> Result<std::collections::BTreeMap<i64, f64>> {
    let mut cache = std::collections::BTreeMap::new();
    for &k in modes {
        let key = mode_norm_sq(k) as i64;
        if !cache.contains_key(&key) {
            cache.insert(key, blob_chi(k, ell, profile)?);
        }
    }
    Ok(cache)
}

/// Which construction a noise spec uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseVariant {
    Canonical,
    Blob,
    Renewal,
}

/// Blob-family data carried by blob and renewal specs.
#[derive(Debug, Clone)]
pub struct BlobData {
    pub profile: BlobProfile,
    pub ell: f64,
    pub tau: f64,
    pub k_t_sq: f64,
    pub sigma_sq: f64,
    /// Mean of the blob intensity `R`; the induced field is mean-zero for
    /// any value because blob centers are uniform.
    pub r_mean: f64,
}

#[derive(Debug, Clone, Copy)]
struct NoiseMode {
    k: Mode,
    dir: Vec3,
    /// synthesis amplitude `A_k`
    amp: f64,
    /// canonical coefficient `Γ_k` (zero for blob specs)
    gamma: f64,
    /// blob transform `χ_N(k)` (zero for canonical specs)
    chi: f64,
}

/// Full description of a structured noise field: enough to evaluate the
/// covariance in closed form and to sample field increments.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    variant: NoiseVariant,
    kappa: f64,
    mode_cutoff: i32,
    family_index: i32,
    half_modes: Vec<NoiseMode>,
    blob: Option<BlobData>,
}

/// Canonical flat coefficient family on the full nonzero lattice cube:
/// `Γ_k = (#modes)^{-1/2}` for `0 < |k|∞ ≤ index`, zero beyond, so that
/// `‖Γ‖_ℓ² = 1` exactly and `‖Γ‖_ℓ∞ → 0` as the index grows.
pub fn canonical_coefficients(index: i32, mode_cutoff: i32) -> Result<Vec<(Mode, f64)>> {
    if index < 1 {
        return Err(Error::config("canonical family index must be >= 1"));
    }
    if index > mode_cutoff {
        return Err(Error::config(format!(
            "canonical family index {index} exceeds mode cutoff {mode_cutoff}"
        )));
    }
    let side = 2 * index + 1;
    let count = (side * side * side - 1) as f64;
    let c = count.powf(-0.5);
    let mut out = Vec::new();
    for k1 in -mode_cutoff..=mode_cutoff {
        for k2 in -mode_cutoff..=mode_cutoff {
            for k3 in -mode_cutoff..=mode_cutoff {
                let k = [k1, k2, k3];
                if k == [0, 0, 0] {
                    continue;
                }
                let gamma = if mode_sup_norm(k) <= index { c } else { 0.0 };
                out.push((k, gamma));
            }
        }
    }
    Ok(out)
}

impl NoiseSpec {
    /// Canonical Fourier family with diffusion constant `kappa` and family
    /// index `index ≤ mode_cutoff`.
    pub fn canonical(kappa: f64, index: i32, mode_cutoff: i32) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::config("kappa must be positive"));
        }
        if index < 1 || index > mode_cutoff {
            return Err(Error::config(format!(
                "canonical family index {index} must satisfy 1 <= index <= cutoff {mode_cutoff}"
            )));
        }
        let side = 2 * index + 1;
        let count = (side * side * side - 1) as f64;
        let gamma = count.powf(-0.5);
        let amp = (12.0 * kappa / count).sqrt();
        let half_modes = positive_half_cube(index)
            .into_iter()
            .map(|k| {
                let kn = mode_norm_sq(k).sqrt();
                NoiseMode {
                    k,
                    dir: [k[0] as f64 / kn, k[1] as f64 / kn, k[2] as f64 / kn],
                    amp,
                    gamma,
                    chi: 0.0,
                }
            })
            .collect();
        Ok(NoiseSpec {
            variant: NoiseVariant::Canonical,
            kappa,
            mode_cutoff,
            family_index: index,
            half_modes,
            blob: None,
        })
    }

    /// Blob family on the Euclidean ball `|k| ≤ mode_cutoff` with
    /// correlation time `tau` and target constant `k_t_sq`; the diffusion
    /// constant is `κ = τ k_T²/6`.
    pub fn blob(
        profile: BlobProfile,
        ell: f64,
        tau: f64,
        k_t_sq: f64,
        mode_cutoff: i32,
        r_mean: f64,
    ) -> Result<Self> {
        Self::blob_like(NoiseVariant::Blob, profile, ell, tau, k_t_sq, mode_cutoff, r_mean)
    }

    /// Renewal (piecewise-constant in time) variant of the blob family;
    /// `tau` doubles as the inter-jump time.
    pub fn renewal(
        profile: BlobProfile,
        ell: f64,
        tau: f64,
        k_t_sq: f64,
        mode_cutoff: i32,
        r_mean: f64,
    ) -> Result<Self> {
        Self::blob_like(NoiseVariant::Renewal, profile, ell, tau, k_t_sq, mode_cutoff, r_mean)
    }

    fn blob_like(
        variant: NoiseVariant,
        profile: BlobProfile,
        ell: f64,
        tau: f64,
        k_t_sq: f64,
        mode_cutoff: i32,
        r_mean: f64,
    ) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::config("blob correlation time tau must be positive"));
        }
        let sigma_sq = blob_sigma(ell, &profile, mode_cutoff, k_t_sq)?;
        if r_mean.abs() > sigma_sq.sqrt() {
            return Err(Error::config(format!(
                "blob intensity mean {r_mean} exceeds the rms intensity {}",
                sigma_sq.sqrt()
            )));
        }
        let kappa = tau * k_t_sq / 6.0;
        let modes = positive_half_ball(mode_cutoff);
        let chi_by_norm = chi_cache(&modes, ell, &profile)?;
        let pref = 2.0 * tau * sigma_sq;
        let half_modes = modes
            .into_iter()
            .map(|k| {
                let k2 = mode_norm_sq(k);
                let kn = k2.sqrt();
                let chi = chi_by_norm[&(k2 as i64)];
                NoiseMode {
                    k,
                    dir: [k[0] as f64 / kn, k[1] as f64 / kn, k[2] as f64 / kn],
                    amp: (pref * chi * chi / k2).sqrt(),
                    gamma: 0.0,
                    chi,
                }
            })
            .collect();
        Ok(NoiseSpec {
            variant,
            kappa,
            mode_cutoff,
            family_index: 0,
            half_modes,
            blob: Some(BlobData {
                profile,
                ell,
                tau,
                k_t_sq,
                sigma_sq,
                r_mean,
            }),
        })
    }

    /// Test/diagnostic constructor from explicit half-lattice amplitudes.
    pub(crate) fn from_amplitudes(kappa: f64, mode_cutoff: i32, amps: Vec<(Mode, f64)>) -> Self {
        let half_modes = amps
            .into_iter()
            .map(|(k, amp)| {
                let kn = mode_norm_sq(k).sqrt();
                NoiseMode {
                    k,
                    dir: [k[0] as f64 / kn, k[1] as f64 / kn, k[2] as f64 / kn],
                    amp,
                    gamma: 0.0,
                    chi: 0.0,
                }
            })
            .collect();
        NoiseSpec {
            variant: NoiseVariant::Canonical,
            kappa,
            mode_cutoff,
            family_index: 0,
            half_modes,
            blob: None,
        }
    }

    pub fn variant(&self) -> NoiseVariant {
        self.variant
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mode_cutoff(&self) -> i32 {
        self.mode_cutoff
    }

    pub fn family_index(&self) -> i32 {
        self.family_index
    }

    pub fn blob_data(&self) -> Option<&BlobData> {
        self.blob.as_ref()
    }

    /// Number of retained half-lattice modes.
    pub fn mode_count(&self) -> usize {
        self.half_modes.len()
    }

    /// `‖Γ‖_ℓ∞` of the canonical family (the flat coefficient value).
    pub fn gamma_sup_norm(&self) -> f64 {
        self.half_modes
            .iter()
            .map(|m| m.gamma)
            .fold(0.0, f64::max)
    }

    /// Rows `(k, Γ_k, χ_k, A_k)` for analytics export.
    pub fn mode_table(&self) -> Vec<(Mode, f64, f64, f64)> {
        self.half_modes
            .iter()
            .map(|m| (m.k, m.gamma, m.chi, m.amp))
            .collect()
    }

    /// Closed-form covariance matrix `Q(lag)`.
    pub fn covariance_at(&self, lag: Vec3) -> [[f64; 3]; 3] {
        let mut q = [[0.0; 3]; 3];
        for m in &self.half_modes {
            let c = (TWO_PI * crate::geometry::mode_dot(m.k, lag)).cos();
            let a = m.amp * m.amp * c;
            for i in 0..3 {
                for j in 0..3 {
                    q[i][j] += a * m.dir[i] * m.dir[j];
                }
            }
        }
        q
    }

    /// `Tr Q(0) = Σ_k A_k²`; equals `6κ` exactly by normalization.
    pub fn trace_at_zero(&self) -> f64 {
        self.half_modes.iter().map(|m| m.amp * m.amp).sum()
    }

    /// `L^r` norm of `Q` over the torus (pointwise Frobenius norm).
    /// `r = 2` is evaluated exactly by Parseval; other exponents by
    /// midpoint quadrature on an `n³` grid with `n ≥ 2·cutoff + 2`.
    pub fn covariance_lr_norm(&self, r: f64, n: usize) -> Result<f64> {
        if !(r >= 1.0) && !r.is_infinite() {
            return Err(Error::config("L^r exponent must satisfy r >= 1"));
        }
        if r == 2.0 {
            let sum: f64 = self.half_modes.iter().map(|m| m.amp.powi(4) / 2.0).sum();
            return Ok(sum.sqrt());
        }
        if (n as i32) < 2 * self.mode_cutoff + 2 {
            return Err(Error::config(format!(
                "quadrature grid {n} aliases covariance modes; need >= {}",
                2 * self.mode_cutoff + 2
            )));
        }
        let mut acc: f64 = 0.0;
        let mut max_f: f64 = 0.0;
        let nf = n as f64;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let x = [
                        -0.5 + (i as f64 + 0.5) / nf,
                        -0.5 + (j as f64 + 0.5) / nf,
                        -0.5 + (l as f64 + 0.5) / nf,
                    ];
                    let q = self.covariance_at(x);
                    let frob: f64 = q
                        .iter()
                        .flat_map(|row| row.iter().map(|v| v * v))
                        .sum::<f64>()
                        .sqrt();
                    if r.is_infinite() {
                        max_f = max_f.max(frob);
                    } else {
                        acc += frob.powf(r);
                    }
                }
            }
        }
        if r.is_infinite() {
            Ok(max_f)
        } else {
            Ok((acc / nf.powi(3)).powf(1.0 / r))
        }
    }

    /// Draw the per-step mode amplitudes of one shared field increment.
    /// Mode order is the deterministic shell order, so nested families
    /// consume identical draws for their common modes.
    pub fn sample_increment<R: Rng>(&self, dt: f64, rng: &mut R) -> FieldIncrement<'_> {
        assert!(dt > 0.0, "time step must be positive");
        let sqdt = dt.sqrt();
        let scaled = self
            .half_modes
            .iter()
            .map(|m| {
                let xi_c: f64 = rng.sample(StandardNormal);
                let xi_s: f64 = rng.sample(StandardNormal);
                (m.amp * sqdt * xi_c, m.amp * sqdt * xi_s)
            })
            .collect();
        FieldIncrement { spec: self, scaled }
    }

    /// Draw one renewal path over `n_intervals` consecutive holding
    /// intervals of length `tau` (renewal variant only).
    pub fn sample_renewal_path<R: Rng>(
        &self,
        n_intervals: usize,
        rng: &mut R,
    ) -> Result<RenewalPath<'_>> {
        let data = match (self.variant, &self.blob) {
            (NoiseVariant::Renewal, Some(d)) => d,
            _ => {
                return Err(Error::config(
                    "renewal paths require a renewal-variant noise spec",
                ))
            }
        };
        let spread = (data.sigma_sq - data.r_mean * data.r_mean).max(0.0).sqrt();
        let mut blobs = Vec::with_capacity(n_intervals);
        for _ in 0..n_intervals {
            // symmetric two-point intensity around r_mean with E[R²] = σ²
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let intensity = data.r_mean + sign * spread;
            let scale = rng.gen_range(data.ell..2.0 * data.ell);
            let center = [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ];
            blobs.push(RenewalBlob {
                intensity,
                scale,
                center,
            });
        }
        // Precompute θ̂(L|k|) per blob and shell.
        let mut amps = Vec::with_capacity(n_intervals);
        for blob in &blobs {
            let amp: Vec<f64> = self
                .half_modes
                .iter()
                .map(|m| {
                    let kn = mode_norm_sq(m.k).sqrt();
                    data.profile.fourier(blob.scale * kn) / mode_norm_sq(m.k)
                })
                .collect();
            amps.push(amp);
        }
        Ok(RenewalPath {
            spec: self,
            blobs,
            mode_amps: amps,
        })
    }
}

/// One sampled increment of the shared Gaussian field; evaluate at any
/// number of points against the same mode draws.
pub struct FieldIncrement<'a> {
    spec: &'a NoiseSpec,
    scaled: Vec<(f64, f64)>,
}

impl FieldIncrement<'_> {
    /// Increment at `x` using a caller-provided phase table (must cover the
    /// spec's mode cutoff and be set to `x`).
    pub fn eval_with_table(&self, table: &PhaseTable) -> Vec3 {
        let mut out = [0.0; 3];
        for (m, &(ac, as_)) in self.spec.half_modes.iter().zip(self.scaled.iter()) {
            let z = table.phase(m.k);
            let a = ac * z.re + as_ * z.im;
            out[0] += a * m.dir[0];
            out[1] += a * m.dir[1];
            out[2] += a * m.dir[2];
        }
        out
    }

    /// Increment at `x`.
    pub fn eval(&self, x: Vec3) -> Vec3 {
        let mut table = PhaseTable::new(self.spec.mode_cutoff.max(1) as usize);
        table.set(x);
        self.eval_with_table(&table)
    }
}

/// Shared-noise field increments at the given points over one step.
pub fn sample_field_increments<R: Rng>(
    spec: &NoiseSpec,
    points: &[Vec3],
    dt: f64,
    rng: &mut R,
) -> Vec<Vec3> {
    let inc = spec.sample_increment(dt, rng);
    let mut table = PhaseTable::new(spec.mode_cutoff.max(1) as usize);
    points
        .iter()
        .map(|&x| {
            table.set(x);
            inc.eval_with_table(&table)
        })
        .collect()
}

/// One blob of a renewal path.
#[derive(Debug, Clone, Copy)]
pub struct RenewalBlob {
    pub intensity: f64,
    pub scale: f64,
    pub center: Vec3,
}

/// A piecewise-constant renewal field: on interval `n` the field is the
/// electric response `R_n ∇(G ∗ θ_{L_n})(x - X_n)` of a single blob,
/// truncated to the spec's mode ball.
pub struct RenewalPath<'a> {
    spec: &'a NoiseSpec,
    pub blobs: Vec<RenewalBlob>,
    mode_amps: Vec<Vec<f64>>,
}

impl RenewalPath<'_> {
    /// Field value on holding interval `interval` at position `x`.
    pub fn eval(&self, interval: usize, x: Vec3) -> Vec3 {
        let blob = &self.blobs[interval];
        let amps = &self.mode_amps[interval];
        let d = sub(x, blob.center);
        let mut table = PhaseTable::new(self.spec.mode_cutoff.max(1) as usize);
        table.set(wrap(d));
        let mut out = [0.0; 3];
        for (m, &a) in self.spec.half_modes.iter().zip(amps.iter()) {
            // pair sum of i k/|k|² θ̂(L|k|) e^{2πik·d} over ±k
            let s = -2.0 * blob.intensity * a * table.phase(m.k).im;
            out[0] += s * m.k[0] as f64;
            out[1] += s * m.k[1] as f64;
            out[2] += s * m.k[2] as f64;
        }
        out
    }
}

/// Renewal field values on a time grid aligned to multiples of `tau`.
/// Returns `values[t_index][point_index]`.
pub fn sample_renewal_field<R: Rng>(
    spec: &NoiseSpec,
    t_grid: &[f64],
    points: &[Vec3],
    rng: &mut R,
) -> Result<Vec<Vec<Vec3>>> {
    let data = spec
        .blob_data()
        .filter(|_| spec.variant() == NoiseVariant::Renewal)
        .ok_or_else(|| Error::config("renewal sampling requires a renewal spec"))?;
    let tau = data.tau;
    let mut intervals = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let ratio = t / tau;
        if (ratio - ratio.round()).abs() > 1e-9 || t < 0.0 {
            return Err(Error::config(format!(
                "time grid point {t} is not a nonnegative multiple of tau = {tau}"
            )));
        }
        intervals.push(ratio.round() as usize);
    }
    let n_intervals = intervals.iter().max().map_or(0, |m| m + 1);
    let path = spec.sample_renewal_path(n_intervals, rng)?;
    Ok(intervals
        .iter()
        .map(|&n| points.iter().map(|&x| path.eval(n, x)).collect())
        .collect())
}
