//! Exact identities and testable inequalities of the particle dynamics:
//! the energy balance ledger, the martingale variance bound, observables,
//! Lᵖ norms of deposited densities, and the kinetic interpolation
//! inequalities relating marginals to phase-space norms.

use serde::{Deserialize, Serialize};

use crate::geometry::{mode_dot, norm_sq, sub, Mode, Vec3, TWO_PI};
use crate::numerics::{sample_stats, trapezoid};
use crate::particle_sde::ParticleEnsemble;
use crate::torus_kernel::DensityGrid;
use crate::{Error, Result};

/// Kinetic energy `Σ_i w_i |V_i|²` of a weighted ensemble.
pub fn kinetic_energy(ensemble: &ParticleEnsemble) -> f64 {
    ensemble
        .velocities
        .iter()
        .zip(&ensemble.weights)
        .map(|(v, &w)| w * norm_sq(*v))
        .sum()
}

/// One recorded energy-balance row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// Identity residual `M_est(t) = [K+V](t) - [K+V](0) - 6κ t ‖f₀‖`.
    pub residual: f64,
}

/// Per-trajectory record of kinetic energy, potential energy and the
/// energy-identity residual. The residual tracks the martingale part of the
/// balance `K + V = K₀ + V₀ + 6κ t ‖f₀‖ + M_t` up to splitting bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub kappa: f64,
    pub total_weight: f64,
    pub rows: Vec<EnergyRow>,
}

impl EnergyLedger {
    pub fn new(kappa: f64, total_weight: f64) -> Self {
        EnergyLedger {
            kappa,
            total_weight,
            rows: Vec::new(),
        }
    }

    /// Append a row; the residual is measured against the first row.
    pub fn record(&mut self, t: f64, kinetic: f64, potential: f64) {
        let residual = match self.rows.first() {
            None => 0.0,
            Some(first) => {
                (kinetic + potential)
                    - (first.kinetic + first.potential)
                    - 6.0 * self.kappa * t * self.total_weight
            }
        };
        self.rows.push(EnergyRow {
            t,
            kinetic,
            potential,
            residual,
        });
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }
}

/// Residual series `(t, M_est(t))` of a completed ledger.
pub fn energy_identity_residual(ledger: &EnergyLedger) -> Vec<(f64, f64)> {
    ledger.rows.iter().map(|r| (r.t, r.residual)).collect()
}

/// Spatial phase of an observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservablePhase {
    Cos,
    Sin,
}

/// Smooth test functional `φ(x,v) = trig(2πl·x)·exp(-|v-v₀|²/2s²)`.
/// An infinite width drops the velocity window, and `l = 0` with `Cos`
/// makes `φ ≡ 1`, so `⟨f,φ⟩` is the total mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observable {
    pub mode: Mode,
    pub phase: ObservablePhase,
    pub v_center: Vec3,
    pub width: f64,
}

impl Observable {
    pub fn new(mode: Mode, phase: ObservablePhase, v_center: Vec3, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::config("observable width must be positive"));
        }
        Ok(Observable {
            mode,
            phase,
            v_center,
            width,
        })
    }

    /// The constant observable `φ ≡ 1`.
    pub fn total_mass() -> Self {
        Observable {
            mode: [0, 0, 0],
            phase: ObservablePhase::Cos,
            v_center: [0.0; 3],
            width: f64::INFINITY,
        }
    }

    pub fn eval(&self, x: Vec3, v: Vec3) -> f64 {
        let spatial = match self.phase {
            ObservablePhase::Cos => (TWO_PI * mode_dot(self.mode, x)).cos(),
            ObservablePhase::Sin => (TWO_PI * mode_dot(self.mode, x)).sin(),
        };
        let window = if self.width.is_infinite() {
            1.0
        } else {
            (-norm_sq(sub(v, self.v_center)) / (2.0 * self.width * self.width)).exp()
        };
        spatial * window
    }

    pub fn name(&self) -> String {
        let trig = match self.phase {
            ObservablePhase::Cos => "cos",
            ObservablePhase::Sin => "sin",
        };
        format!(
            "{}[{},{},{}]_v[{},{},{}]_s{}",
            trig,
            self.mode[0],
            self.mode[1],
            self.mode[2],
            self.v_center[0],
            self.v_center[1],
            self.v_center[2],
            self.width
        )
    }

    /// Default observable battery: spatial modes `0, e₁, e₁+e₂`, velocity
    /// windows centered at `0` and `e₁` with widths `1/2` and `1`.
    pub fn default_battery() -> Vec<Observable> {
        let mut battery = Vec::new();
        for &mode in &[[0, 0, 0], [1, 0, 0], [1, 1, 0]] {
            for &v_center in &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]] {
                for &width in &[0.5, 1.0] {
                    battery.push(Observable {
                        mode,
                        phase: ObservablePhase::Cos,
                        v_center,
                        width,
                    });
                }
            }
        }
        battery
    }
}

/// `⟨f, φ⟩ = Σ_i w_i φ(X_i, V_i)` against the empirical measure.
pub fn observable_value(ensemble: &ParticleEnsemble, observable: &Observable) -> f64 {
    ensemble
        .positions
        .iter()
        .zip(&ensemble.velocities)
        .zip(&ensemble.weights)
        .map(|((x, v), &w)| w * observable.eval(*x, *v))
        .sum()
}

/// `L^p` norm of a gridded spatial density (`p ∈ [1, ∞]`).
pub fn density_lp_norm(grid: &DensityGrid, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::config("Lp exponent must satisfy p >= 1"));
    }
    if p.is_infinite() {
        return Ok(grid.values().iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let cell_vol = grid.cell_volume();
    let acc: f64 = grid.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((acc * cell_vol).powf(1.0 / p))
}

/// Phase-space histogram on `T³ × [-vmax, vmax]³`, piecewise-constant
/// density values. Mass outside the velocity box is dropped; all derived
/// quantities refer to the histogram itself, so the inequalities below are
/// exact statements about this function.
#[derive(Debug, Clone)]
pub struct PhaseSpaceGrid {
    nx: usize,
    nv: usize,
    vmax: f64,
    /// density values indexed `((ix·nx+iy)·nx+iz)·nv³ + velocity index`
    values: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn histogram(ensemble: &ParticleEnsemble, nx: usize, nv: usize, vmax: f64) -> Result<Self> {
        if nx < 2 || nv < 2 || !(vmax > 0.0) {
            return Err(Error::config("phase-space grid needs nx,nv >= 2, vmax > 0"));
        }
        let mut values = vec![0.0; nx * nx * nx * nv * nv * nv];
        let cell_vol = (1.0 / nx as f64).powi(3) * (2.0 * vmax / nv as f64).powi(3);
        for ((x, v), &w) in ensemble
            .positions
            .iter()
            .zip(&ensemble.velocities)
            .zip(&ensemble.weights)
        {
            let mut xi = [0usize; 3];
            let mut vi = [0usize; 3];
            let mut inside = true;
            for d in 0..3 {
                let fx = (crate::geometry::wrap_coord(x[d]) + 0.5) * nx as f64;
                xi[d] = (fx as usize).min(nx - 1);
                let fv = (v[d] + vmax) / (2.0 * vmax) * nv as f64;
                if !(0.0..(nv as f64)).contains(&fv) {
                    inside = false;
                    break;
                }
                vi[d] = (fv as usize).min(nv - 1);
            }
            if inside {
                let ix = (xi[0] * nx + xi[1]) * nx + xi[2];
                let iv = (vi[0] * nv + vi[1]) * nv + vi[2];
                values[ix * nv * nv * nv + iv] += w / cell_vol;
            }
        }
        Ok(PhaseSpaceGrid {
            nx,
            nv,
            vmax,
            values,
        })
    }

    /// Grid with values sampled from `f(x, v)` at cell centers.
    pub fn from_fn<F: FnMut(Vec3, Vec3) -> f64>(
        nx: usize,
        nv: usize,
        vmax: f64,
        mut f: F,
    ) -> Result<Self> {
        if nx < 2 || nv < 2 || !(vmax > 0.0) {
            return Err(Error::config("phase-space grid needs nx,nv >= 2, vmax > 0"));
        }
        let mut values = vec![0.0; nx * nx * nx * nv * nv * nv];
        let dv = 2.0 * vmax / nv as f64;
        for ix0 in 0..nx {
            for ix1 in 0..nx {
                for ix2 in 0..nx {
                    let x = [
                        -0.5 + (ix0 as f64 + 0.5) / nx as f64,
                        -0.5 + (ix1 as f64 + 0.5) / nx as f64,
                        -0.5 + (ix2 as f64 + 0.5) / nx as f64,
                    ];
                    let ix = (ix0 * nx + ix1) * nx + ix2;
                    for iv0 in 0..nv {
                        for iv1 in 0..nv {
                            for iv2 in 0..nv {
                                let v = [
                                    -vmax + (iv0 as f64 + 0.5) * dv,
                                    -vmax + (iv1 as f64 + 0.5) * dv,
                                    -vmax + (iv2 as f64 + 0.5) * dv,
                                ];
                                let iv = (iv0 * nv + iv1) * nv + iv2;
                                values[ix * nv * nv * nv + iv] = f(x, v);
                            }
                        }
                    }
                }
            }
        }
        Ok(PhaseSpaceGrid {
            nx,
            nv,
            vmax,
            values,
        })
    }

    fn x_cell_vol(&self) -> f64 {
        (1.0 / self.nx as f64).powi(3)
    }

    fn dv(&self) -> f64 {
        2.0 * self.vmax / self.nv as f64
    }

    pub fn mass(&self) -> f64 {
        let cell = self.x_cell_vol() * self.dv().powi(3);
        self.values.iter().sum::<f64>() * cell
    }

    /// `L^p` norm of the histogram over phase space.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::config("Lp exponent must satisfy p >= 1"));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        let cell = self.x_cell_vol() * self.dv().powi(3);
        Ok((self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p))
    }

    /// Exact kinetic energy of the piecewise-constant density: each velocity
    /// cell contributes its exact second moment `|v_c|² + Δv²/4`.
    pub fn kinetic_energy(&self) -> f64 {
        let dv = self.dv();
        let nv3 = self.nv * self.nv * self.nv;
        let cell = self.x_cell_vol() * dv.powi(3);
        let mut acc = 0.0;
        for (idx, &val) in self.values.iter().enumerate() {
            if val == 0.0 {
                continue;
            }
            let iv = idx % nv3;
            let iv0 = iv / (self.nv * self.nv);
            let iv1 = (iv / self.nv) % self.nv;
            let iv2 = iv % self.nv;
            let vc = [
                -self.vmax + (iv0 as f64 + 0.5) * dv,
                -self.vmax + (iv1 as f64 + 0.5) * dv,
                -self.vmax + (iv2 as f64 + 0.5) * dv,
            ];
            acc += val * cell * (norm_sq(vc) + dv * dv / 4.0);
        }
        acc
    }

    /// Spatial marginal `ρ(x) = ∫ f dv`, one value per spatial cell.
    pub fn spatial_density(&self) -> Vec<f64> {
        self.windowed_density(
            [-self.vmax, -self.vmax, -self.vmax],
            [self.vmax, self.vmax, self.vmax],
        )
    }

    /// Windowed marginal `ρ_K(x) = ∫_K f dv` for an axis-aligned velocity
    /// box; exact for the piecewise-constant histogram via cell overlaps.
    pub fn windowed_density(&self, lo: Vec3, hi: Vec3) -> Vec<f64> {
        let dv = self.dv();
        let nv3 = self.nv * self.nv * self.nv;
        // per-axis overlap of each velocity cell with the window
        let mut overlap = vec![vec![0.0; self.nv]; 3];
        for d in 0..3 {
            for i in 0..self.nv {
                let c_lo = -self.vmax + i as f64 * dv;
                let c_hi = c_lo + dv;
                overlap[d][i] = (c_hi.min(hi[d]) - c_lo.max(lo[d])).max(0.0);
            }
        }
        let nx3 = self.nx * self.nx * self.nx;
        let mut rho = vec![0.0; nx3];
        for ix in 0..nx3 {
            let mut acc = 0.0;
            for iv in 0..nv3 {
                let val = self.values[ix * nv3 + iv];
                if val == 0.0 {
                    continue;
                }
                let iv0 = iv / (self.nv * self.nv);
                let iv1 = (iv / self.nv) % self.nv;
                let iv2 = iv % self.nv;
                acc += val * overlap[0][iv0] * overlap[1][iv1] * overlap[2][iv2];
            }
            rho[ix] = acc;
        }
        rho
    }

    /// `L^r` norm of a spatial marginal produced by this grid.
    pub fn marginal_lr_norm(&self, rho: &[f64], r: f64) -> f64 {
        if r.is_infinite() {
            return rho.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let cell = self.x_cell_vol();
        (rho.iter().map(|v| v.abs().powf(r)).sum::<f64>() * cell).powf(1.0 / r)
    }
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    /// ratio lhs/rhs; at most one (up to grid tolerance) when the bound holds
    pub ratio: f64,
    pub pass: bool,
}

/// Marginal exponent `r(p)` of the kinetic interpolation inequality in three
/// dimensions: `r = (2p + 3(p-1))/(2 + 3(p-1))` for finite `p`, `5/3` at
/// `p = ∞`.
pub fn interpolation_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        5.0 / 3.0
    } else {
        (2.0 * p + 3.0 * (p - 1.0)) / (2.0 + 3.0 * (p - 1.0))
    }
}

/// Check `‖ρ‖_{L^r} ≤ C ‖f‖_{L^p}^{2p'/(3+2p')} K(f)^{3/(3+2p')}` with
/// `C = 1 + (ω₃/3)^{1/p'}`, `ω₃ = 4π`, on a phase-space histogram.
pub fn interpolation_bound_check(f: &PhaseSpaceGrid, p: f64) -> Result<BoundReport> {
    if !(p > 1.0) {
        return Err(Error::config("interpolation bound needs p > 1"));
    }
    let p_conj = if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let r = interpolation_exponent(p);
    let rho = f.spatial_density();
    let lhs = f.marginal_lr_norm(&rho, r);
    if lhs == 0.0 {
        // vacuous pass for zero density
        return Ok(BoundReport {
            lhs,
            rhs: 0.0,
            ratio: 0.0,
            pass: true,
        });
    }
    let omega3 = 4.0 * std::f64::consts::PI;
    let constant = 1.0 + (omega3 / 3.0).powf(1.0 / p_conj);
    let fp = f.lp_norm(p)?;
    let kin = f.kinetic_energy();
    let rhs = constant * fp.powf(2.0 * p_conj / (3.0 + 2.0 * p_conj))
        * kin.powf(3.0 / (3.0 + 2.0 * p_conj));
    Ok(BoundReport {
        lhs,
        rhs,
        ratio: lhs / rhs,
        pass: lhs <= rhs * (1.0 + 1e-9),
    })
}

/// Check `‖ρ_K‖_{L^p} ≤ λ(K)^{1/p'} ‖f‖_{L^p}` for a velocity window `K`.
pub fn compact_velocity_marginal_check(
    f: &PhaseSpaceGrid,
    window_lo: Vec3,
    window_hi: Vec3,
    p: f64,
) -> Result<BoundReport> {
    if !(p >= 1.0) {
        return Err(Error::config("Lp exponent must satisfy p >= 1"));
    }
    let mut lambda = 1.0;
    for d in 0..3 {
        let side = window_hi[d] - window_lo[d];
        if side <= 0.0 {
            return Err(Error::config("velocity window must have positive volume"));
        }
        lambda *= side;
    }
    let p_conj = if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    };
    let rho = f.windowed_density(window_lo, window_hi);
    let lhs = f.marginal_lr_norm(&rho, p);
    let factor = if p_conj.is_infinite() {
        1.0
    } else {
        lambda.powf(1.0 / p_conj)
    };
    let rhs = factor * f.lp_norm(p)?;
    Ok(BoundReport {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        pass: lhs <= rhs * (1.0 + 1e-9),
    })
}

/// One time point of the martingale variance check.
#[derive(Debug, Clone, Serialize)]
pub struct QvRow {
    pub t: f64,
    /// replica estimate of `E[M_t²]` (bias-corrected)
    pub m_sq_mean: f64,
    pub m_sq_std_err: f64,
    /// `24κ ‖f₀‖ ∫₀ᵗ mean K ds`
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QvReport {
    pub rows: Vec<QvRow>,
    pub pass: bool,
}

/// Check the martingale variance bound `E[M_t²] ≤ 24κ‖f₀‖ ∫₀ᵗ E[K] ds`
/// across replica ledgers. `bias`, when given, is the deterministic
/// residual measured on a noise-free calibration run, subtracted from every
/// replica residual before squaring. Statistical slack is three standard
/// errors of the second-moment estimator.
pub fn martingale_qv_check(ledgers: &[&EnergyLedger], bias: Option<&[f64]>) -> Result<QvReport> {
    if ledgers.len() < 32 {
        return Err(Error::statistical(format!(
            "martingale variance check needs >= 32 replicas, got {}",
            ledgers.len()
        )));
    }
    let n_rows = ledgers[0].rows.len();
    if ledgers.iter().any(|l| l.rows.len() != n_rows) {
        return Err(Error::statistical("replica ledgers have unequal lengths"));
    }
    if let Some(b) = bias {
        if b.len() != n_rows {
            return Err(Error::statistical("bias series length mismatch"));
        }
    }
    let kappa = ledgers[0].kappa;
    let mass = ledgers[0].total_weight;
    let times: Vec<f64> = ledgers[0].rows.iter().map(|r| r.t).collect();
    let mean_kinetic: Vec<f64> = (0..n_rows)
        .map(|i| ledgers.iter().map(|l| l.rows[i].kinetic).sum::<f64>() / ledgers.len() as f64)
        .collect();
    let mut rows = Vec::with_capacity(n_rows);
    let mut all_pass = true;
    for i in 0..n_rows {
        let b = bias.map_or(0.0, |b| b[i]);
        let squares: Vec<f64> = ledgers
            .iter()
            .map(|l| {
                let m = l.rows[i].residual - b;
                m * m
            })
            .collect();
        let stats = sample_stats(&squares);
        let bound = 24.0 * kappa * mass * trapezoid(&times[..=i], &mean_kinetic[..=i]);
        let pass = stats.mean - 3.0 * stats.std_err <= bound;
        all_pass &= pass;
        rows.push(QvRow {
            t: times[i],
            m_sq_mean: stats.mean,
            m_sq_std_err: stats.std_err,
            bound,
            pass,
        });
    }
    Ok(QvReport {
        rows,
        pass: all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle_sde::ParticleEnsemble;

    fn single_particle(x: Vec3, v: Vec3, w: f64) -> ParticleEnsemble {
        ParticleEnsemble::new(vec![x], vec![v], vec![w]).unwrap()
    }

    #[test]
    fn kinetic_energy_arithmetic() {
        let ens = single_particle([0.0; 3], [0.0; 3], 1.0);
        assert_eq!(kinetic_energy(&ens), 0.0);
        let ens = single_particle([0.1, 0.2, 0.3], [1.0, 1.0, 1.0], 2.0);
        assert!((kinetic_energy(&ens) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn residual_is_zero_at_t_zero_and_tracks_identity() {
        let mut ledger = EnergyLedger::new(0.5, 1.0);
        ledger.record(0.0, 3.0, -0.2);
        // drift exactly 6κt: residual stays zero
        ledger.record(0.1, 3.0 + 6.0 * 0.5 * 0.1, -0.2);
        assert_eq!(ledger.rows[0].residual, 0.0);
        assert!(ledger.rows[1].residual.abs() < 1e-14);
        // extra energy shows up as residual
        ledger.record(0.2, 3.0 + 6.0 * 0.5 * 0.2 + 0.7, -0.2);
        assert!((ledger.rows[2].residual - 0.7).abs() < 1e-12);
    }

    #[test]
    fn constant_observable_returns_total_weight() {
        let ens = ParticleEnsemble::new(
            vec![[0.1, 0.2, 0.3], [-0.4, 0.0, 0.2]],
            vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]],
            vec![0.4, 0.6],
        )
        .unwrap();
        let phi = Observable::total_mass();
        assert!((observable_value(&ens, &phi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_observable_value() {
        let x = [0.1, -0.2, 0.3];
        let v = [0.5, 0.0, -1.0];
        let ens = single_particle(x, v, 1.7);
        let phi = Observable::new([1, 0, 2], ObservablePhase::Cos, [0.0; 3], 0.8).unwrap();
        let expect = 1.7 * phi.eval(x, v);
        assert!((observable_value(&ens, &phi) - expect).abs() < 1e-15);
    }

    #[test]
    fn uniform_ensemble_kills_nonzero_modes() {
        use rand::Rng;
        let mut rng = crate::rng::stream(3, 0, 0, crate::rng::Purpose::Generic(2));
        let n = 40_000;
        let mut positions = Vec::with_capacity(n);
        let mut velocities = Vec::with_capacity(n);
        for _ in 0..n {
            positions.push([
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ]);
            velocities.push([0.0; 3]);
        }
        let ens = ParticleEnsemble::new(positions, velocities, vec![1.0 / n as f64; n]).unwrap();
        let phi =
            Observable::new([1, 0, 0], ObservablePhase::Cos, [0.0; 3], f64::INFINITY).unwrap();
        let val = observable_value(&ens, &phi);
        // CLT: sd ≈ sqrt(1/2)/sqrt(n)
        assert!(val.abs() < 4.0 * (0.5f64 / n as f64).sqrt());
    }

    #[test]
    fn density_norms_on_known_profiles() {
        use crate::torus_kernel::DensityGrid;
        let grid = DensityGrid::from_fn(8, |_| 2.0).unwrap();
        for &p in &[1.0, 2.0, 5.0, f64::INFINITY] {
            assert!((density_lp_norm(&grid, p).unwrap() - 2.0).abs() < 1e-12);
        }
        let grid = DensityGrid::from_fn(16, |x| 1.0 + (TWO_PI * x[0]).cos()).unwrap();
        // discrete cosine orthogonality makes the grid L² norm exact
        let l2 = density_lp_norm(&grid, 2.0).unwrap();
        assert!((l2 - 1.5f64.sqrt()).abs() < 1e-12);
        let l1 = density_lp_norm(&grid, 1.0).unwrap();
        assert!((l1 - grid.total_mass()).abs() < 1e-12);
        assert!(density_lp_norm(&grid, 0.5).is_err());
    }

    #[test]
    fn interpolation_exponents_match_theory() {
        assert!((interpolation_exponent(2.0) - 7.0 / 5.0).abs() < 1e-15);
        assert!((interpolation_exponent(f64::INFINITY) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_bound_holds_on_gaussian_profile() {
        // uniform in x, Gaussian in v
        let f = PhaseSpaceGrid::from_fn(4, 16, 5.0, |_, v| (-norm_sq(v) / 2.0).exp()).unwrap();
        for &p in &[2.0, 3.0, f64::INFINITY] {
            let report = interpolation_bound_check(&f, p).unwrap();
            assert!(report.pass, "p={p}: ratio {}", report.ratio);
            assert!(report.ratio < 1.0);
        }
    }

    #[test]
    fn interpolation_bound_holds_on_random_histograms() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, 0, 0, crate::rng::Purpose::Generic(3));
        for trial in 0..3 {
            let f = PhaseSpaceGrid::from_fn(3, 6, 4.0, |_, _| rng.gen_range(0.0..1.0)).unwrap();
            for &p in &[1.5, 2.0, 4.0] {
                let report = interpolation_bound_check(&f, p).unwrap();
                assert!(report.pass, "trial {trial} p={p}: ratio {}", report.ratio);
            }
        }
    }

    #[test]
    fn velocity_window_bound_is_tight_for_full_box() {
        let f = PhaseSpaceGrid::from_fn(4, 8, 2.0, |_, v| (-norm_sq(v)).exp()).unwrap();
        let full = compact_velocity_marginal_check(&f, [-2.0; 3], [2.0; 3], 1.0).unwrap();
        // p = 1 with the full box: both sides equal the mass
        assert!(full.pass);
        assert!((full.lhs - full.rhs).abs() < 1e-12 * full.rhs);
        // p = ∞ variant
        let inf = compact_velocity_marginal_check(&f, [-1.0; 3], [0.5; 3], f64::INFINITY).unwrap();
        assert!(inf.pass);
        // random windows and exponents
        let r = compact_velocity_marginal_check(&f, [-1.3, -0.4, 0.0], [0.9, 1.7, 1.1], 2.5)
            .unwrap();
        assert!(r.pass, "ratio {}", r.ratio);
    }

    #[test]
    fn qv_check_passes_on_synthetic_martingale() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, 0, 0, crate::rng::Purpose::Generic(4));
        let kappa = 0.4;
        let mass = 1.0;
        let kin = 3.0;
        let dt = 0.05;
        let mut ledgers = Vec::new();
        for _ in 0..64 {
            let mut ledger = EnergyLedger::new(kappa, mass);
            // residual follows a random walk with variance well under the bound
            let mut m = 0.0;
            for i in 0..10 {
                let t = i as f64 * dt;
                if i > 0 {
                    m += rng.gen_range(-1.0f64..1.0) * (kappa * kin * dt).sqrt();
                }
                ledger.record(t, kin + 6.0 * kappa * t * mass + m, 0.0);
            }
            ledgers.push(ledger);
        }
        let refs: Vec<&EnergyLedger> = ledgers.iter().collect();
        let report = martingale_qv_check(&refs, None).unwrap();
        assert!(report.pass);
        // too few replicas is a statistical error
        assert!(martingale_qv_check(&refs[..8], None).is_err());
    }
}
