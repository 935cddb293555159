//! Periodic Coulomb kernel on the unit torus, its spectral regularization,
//! density deposition and evaluation of the self-consistent field.
//!
//! The Green function is carried entirely in Fourier space with the
//! convention `e^{2πik·x}` on `[-1/2, 1/2)³` and coefficients
//! `Ĝ^δ(k) = m̂(δ,k)/|k|²` for `k ≠ 0`, where the spectral mollifier
//! `m̂(δ,k) = exp(-δ²|k|²)` is the Fourier factor of a periodic Gaussian.
//! The field kernel is the true gradient, `2πi·k·Ĝ^δ(k)`, so that the
//! kinetic/potential energy exchange of the particle dynamics closes
//! exactly: the power injected by the field kick equals minus the time
//! derivative of the spectral potential energy.
//!
//! Mode sums run over the half lattice `Z³₊` with the conjugate modes
//! implied, which both halves the work and makes field values exactly real.

use num_complex::Complex64;

use crate::geometry::{
    mode_norm_sq, positive_half_cube, wrap_coord, Mode, PhaseTable, Vec3, TWO_PI,
};
use crate::particle_sde::ParticleEnsemble;
use crate::{Error, Result};

/// One retained half-lattice mode of the regularized Green function.
#[derive(Debug, Clone, Copy)]
struct KernelMode {
    k: Mode,
    kf: Vec3,
    /// `Ĝ^δ(k) = m̂(δ,k)/|k|²`
    ghat: f64,
}

/// Truncated spectral representation of the regularized Coulomb kernel.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    mode_cutoff: i32,
    delta: f64,
    half_modes: Vec<KernelMode>,
}

impl SpectralKernel {
    /// Build the kernel for modes `0 < |k|∞ ≤ mode_cutoff` with
    /// regularization length `delta ∈ (0, 1/2)`.
    pub fn build(mode_cutoff: i32, delta: f64) -> Result<Self> {
        if mode_cutoff < 1 {
            return Err(Error::config(format!(
                "kernel mode cutoff must be >= 1, got {mode_cutoff}"
            )));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::config(format!(
                "kernel regularization length must lie in (0, 1/2), got {delta}"
            )));
        }
        let half_modes = positive_half_cube(mode_cutoff)
            .into_iter()
            .map(|k| {
                let k2 = mode_norm_sq(k);
                KernelMode {
                    k,
                    kf: [k[0] as f64, k[1] as f64, k[2] as f64],
                    ghat: (-delta * delta * k2).exp() / k2,
                }
            })
            .collect();
        Ok(SpectralKernel {
            mode_cutoff,
            delta,
            half_modes,
        })
    }

    pub fn mode_cutoff(&self) -> i32 {
        self.mode_cutoff
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Spectral mollifier `m̂(δ,k) = exp(-δ²|k|²)`.
    pub fn mollifier(&self, k: Mode) -> f64 {
        (-self.delta * self.delta * mode_norm_sq(k)).exp()
    }

    /// Scalar Green coefficient `Ĝ^δ(k)`; zero for `k = 0`.
    pub fn green_coeff(&self, k: Mode) -> f64 {
        let k2 = mode_norm_sq(k);
        if k2 == 0.0 {
            0.0
        } else {
            (-self.delta * self.delta * k2).exp() / k2
        }
    }

    /// Complex field-kernel coefficient at any lattice mode:
    /// `coeff(k) = 2πi·k·Ĝ^δ(k)`. Purely imaginary, odd in `k`, so the
    /// real-space kernel is odd and the induced pair forces obey
    /// action-reaction exactly.
    pub fn grad_coeff(&self, k: Mode) -> [Complex64; 3] {
        let g = TWO_PI * self.green_coeff(k);
        [
            Complex64::new(0.0, g * k[0] as f64),
            Complex64::new(0.0, g * k[1] as f64),
            Complex64::new(0.0, g * k[2] as f64),
        ]
    }

    /// Exact spectral density of a weighted particle set:
    /// `ρ̂(k) = Σ_j w_j e^{-2πik·X_j}` on the retained half lattice.
    pub fn deposit_spectral(&self, positions: &[Vec3], weights: &[f64]) -> SpectralDensity {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.half_modes.len()];
        let mut table = PhaseTable::new(self.mode_cutoff as usize);
        for (x, &w) in positions.iter().zip(weights) {
            table.set(*x);
            for (mode, c) in self.half_modes.iter().zip(coeffs.iter_mut()) {
                *c += w * table.phase(mode.k).conj();
            }
        }
        SpectralDensity {
            mode_cutoff: self.mode_cutoff,
            coeffs,
        }
    }

    /// Spectral density of a gridded density, exact for grid content that is
    /// band-limited to the retained modes.
    pub fn spectral_from_grid(&self, grid: &DensityGrid) -> Result<SpectralDensity> {
        let n = grid.resolution();
        if (n as i32) < 2 * self.mode_cutoff + 2 {
            return Err(Error::config(format!(
                "grid resolution {n} aliases retained modes; need >= {}",
                2 * self.mode_cutoff + 2
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.half_modes.len()];
        let cell_vol = 1.0 / (n * n * n) as f64;
        let mut table = PhaseTable::new(self.mode_cutoff as usize);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let v = grid.value(i, j, l);
                    if v == 0.0 {
                        continue;
                    }
                    table.set(grid.cell_center(i, j, l));
                    let w = v * cell_vol;
                    for (mode, c) in self.half_modes.iter().zip(coeffs.iter_mut()) {
                        *c += w * table.phase(mode.k).conj();
                    }
                }
            }
        }
        Ok(SpectralDensity {
            mode_cutoff: self.mode_cutoff,
            coeffs,
        })
    }

    /// Field values `E(x) = Σ_k coeff(k)·ρ̂(k)·e^{2πik·x}` at the given
    /// points. The conjugate-pair sum is carried in real arithmetic, so the
    /// returned vectors are exactly real and a particle's own contribution
    /// to the field at its position cancels identically.
    pub fn field_at_points_spectral(&self, rho: &SpectralDensity, points: &[Vec3]) -> Vec<Vec3> {
        assert_eq!(rho.mode_cutoff, self.mode_cutoff, "kernel/density mismatch");
        let mut table = PhaseTable::new(self.mode_cutoff as usize);
        points
            .iter()
            .map(|&x| {
                table.set(x);
                self.field_with_table(rho, &table)
            })
            .collect()
    }

    /// Field at the position loaded in `table`; the inner kernel shared by
    /// the steppers.
    pub(crate) fn field_with_table(&self, rho: &SpectralDensity, table: &PhaseTable) -> Vec3 {
        let mut e = [0.0; 3];
        for (mode, &rk) in self.half_modes.iter().zip(rho.coeffs.iter()) {
            // ±k pair: 2·Re[2πi ĝ k ρ̂(k) e^{2πik·x}] = -4π ĝ Im[ρ̂ e^{iφ}] k
            let z = rk * table.phase(mode.k);
            let a = -2.0 * TWO_PI * mode.ghat * z.im;
            e[0] += a * mode.kf[0];
            e[1] += a * mode.kf[1];
            e[2] += a * mode.kf[2];
        }
        e
    }

    /// Potential energy `-Σ_k Ĝ^δ(k) |ρ̂(k)|²` of a spectral density.
    pub fn potential_energy_spectral(&self, rho: &SpectralDensity) -> f64 {
        assert_eq!(rho.mode_cutoff, self.mode_cutoff, "kernel/density mismatch");
        let mut acc = 0.0;
        for (mode, rk) in self.half_modes.iter().zip(rho.coeffs.iter()) {
            acc += mode.ghat * rk.norm_sqr();
        }
        -2.0 * acc
    }
}

/// Spectral density coefficients on the kernel's half lattice.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    mode_cutoff: i32,
    coeffs: Vec<Complex64>,
}

impl SpectralDensity {
    /// Coefficient at a half-lattice mode position (kernel mode order).
    pub fn coeff(&self, idx: usize) -> Complex64 {
        self.coeffs[idx]
    }

    pub fn mode_cutoff(&self) -> i32 {
        self.mode_cutoff
    }
}

/// Cell-centered density values on a periodic `n³` grid over the unit cell.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    n: usize,
    values: Vec<f64>,
    total_mass: f64,
}

impl DensityGrid {
    /// Cloud-in-cell (trilinear) deposition of weighted particles.
    pub fn deposit(positions: &[Vec3], weights: &[f64], n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::config(format!(
                "density grid resolution must be >= 4, got {n}"
            )));
        }
        if positions.is_empty() {
            return Err(Error::config("cannot deposit an empty ensemble"));
        }
        let mut values = vec![0.0; n * n * n];
        let cell_vol = 1.0 / (n * n * n) as f64;
        let nf = n as f64;
        for (x, &w) in positions.iter().zip(weights) {
            // continuous cell coordinate; u = 0 at the center of cell 0
            let mut base = [0usize; 3];
            let mut frac = [0f64; 3];
            for d in 0..3 {
                let u = (wrap_coord(x[d]) + 0.5) * nf - 0.5;
                let fl = u.floor();
                base[d] = ((fl as i64).rem_euclid(n as i64)) as usize;
                frac[d] = u - fl;
            }
            let amp = w / cell_vol;
            for (di, wi) in [(0usize, 1.0 - frac[0]), (1, frac[0])] {
                for (dj, wj) in [(0usize, 1.0 - frac[1]), (1, frac[1])] {
                    for (dl, wl) in [(0usize, 1.0 - frac[2]), (1, frac[2])] {
                        let i = (base[0] + di) % n;
                        let j = (base[1] + dj) % n;
                        let l = (base[2] + dl) % n;
                        values[(i * n + j) * n + l] += amp * wi * wj * wl;
                    }
                }
            }
        }
        let total_mass = values.iter().sum::<f64>() * cell_vol;
        Ok(DensityGrid {
            n,
            values,
            total_mass,
        })
    }

    /// Grid with values sampled from a function of position (cell centers).
    pub fn from_fn<F: Fn(Vec3) -> f64>(n: usize, f: F) -> Result<Self> {
        if n < 4 {
            return Err(Error::config(format!(
                "density grid resolution must be >= 4, got {n}"
            )));
        }
        let mut values = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    values[(i * n + j) * n + l] = f(cell_center(n, i, j, l));
                }
            }
        }
        let total_mass = values.iter().sum::<f64>() / (n * n * n) as f64;
        Ok(DensityGrid {
            n,
            values,
            total_mass,
        })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn value(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[(i * self.n + j) * self.n + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_center(&self, i: usize, j: usize, l: usize) -> Vec3 {
        cell_center(self.n, i, j, l)
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / (self.n * self.n * self.n) as f64
    }
}

fn cell_center(n: usize, i: usize, j: usize, l: usize) -> Vec3 {
    let nf = n as f64;
    [
        -0.5 + (i as f64 + 0.5) / nf,
        -0.5 + (j as f64 + 0.5) / nf,
        -0.5 + (l as f64 + 0.5) / nf,
    ]
}

/// Build the regularized spectral kernel (`mode_cutoff`, `delta` knobs).
pub fn build_kernel(mode_cutoff: i32, delta: f64) -> Result<SpectralKernel> {
    SpectralKernel::build(mode_cutoff, delta)
}

/// Cloud-in-cell deposition of an ensemble onto an `n³` periodic grid.
pub fn deposit_density(ensemble: &ParticleEnsemble, n: usize) -> Result<DensityGrid> {
    DensityGrid::deposit(&ensemble.positions, &ensemble.weights, n)
}

/// Self-consistent field of a gridded density at arbitrary points.
pub fn field_at_points(
    grid: &DensityGrid,
    kernel: &SpectralKernel,
    points: &[Vec3],
) -> Result<Vec<Vec3>> {
    let rho = kernel.spectral_from_grid(grid)?;
    Ok(kernel.field_at_points_spectral(&rho, points))
}

/// Potential energy of a gridded density under the regularized kernel.
pub fn potential_energy(grid: &DensityGrid, kernel: &SpectralKernel) -> Result<f64> {
    let rho = kernel.spectral_from_grid(grid)?;
    Ok(kernel.potential_energy_spectral(&rho))
}
