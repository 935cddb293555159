//! Time integration of the stochastic characteristics.
//!
//! One step is a Strang-style splitting:
//!
//! ```text
//!   (a) X += V·Δt/2
//!   (b) field solve from the current ensemble; V += E(X)·Δt
//!   (c) exact rotation about e₃ by angle -B·Δt
//!   (d) noise kick: shared field increment ΔW(X) (common noise) or
//!       per-particle √(2κΔt)·η (independent noise)
//!   (e) X += V·Δt/2
//! ```
//!
//! Every substep is a phase-space shear or rotation, so the discrete map is
//! exactly volume preserving, and the noise coefficient depends on position
//! only, so the Itô and Stratonovich readings of the kick coincide. The
//! common-noise increment has single-point covariance `2κΔt·I₃` by the
//! noise normalization, identical to the independent kick, which is what
//! makes the two drives agree at the level of one-particle marginals.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{kinetic_energy, observable_value, EnergyLedger, Observable};
use crate::geometry::{add, scale, wrap, PhaseTable, Vec3};
use crate::noise_model::{FieldIncrement, NoiseSpec};
use crate::rng::{stream, Purpose};
use crate::torus_kernel::{SpectralDensity, SpectralKernel};
use crate::{Error, Result};

/// Weighted empirical measure on `T³ × R³`. Weights are constant in time;
/// positions stay wrapped to the fundamental cell.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub weights: Vec<f64>,
    total_weight: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<Vec3>, velocities: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if positions.is_empty()
            || positions.len() != velocities.len()
            || positions.len() != weights.len()
        {
            return Err(Error::config(
                "ensemble arrays must be nonempty and of equal length",
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::config("particle weights must be nonnegative"));
        }
        let positions = positions.into_iter().map(wrap).collect::<Vec<_>>();
        let total_weight = weights.iter().sum();
        Ok(ParticleEnsemble {
            positions,
            velocities,
            weights,
            total_weight,
        })
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }
}

/// Default initial condition: a single-mode density perturbation times a
/// Maxwellian, `f₀(x,v) = mass·(1 + a·cos(2πx₁))·N(0, θ₀I₃)(v)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialCondition {
    /// density perturbation amplitude `a ∈ [0, 1)`
    pub perturbation: f64,
    /// Maxwellian temperature `θ₀ > 0`
    pub temperature: f64,
    /// total mass `‖f₀‖_{L¹}`
    pub total_mass: f64,
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.perturbation) {
            return Err(Error::config(
                "initial perturbation amplitude must lie in [0, 1)",
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::config("initial temperature must be positive"));
        }
        if !(self.total_mass > 0.0) {
            return Err(Error::config("initial total mass must be positive"));
        }
        Ok(())
    }

    /// Equal-weight sample: `x₁` by inverse CDF of the perturbed marginal,
    /// `x₂, x₃` uniform, `v` Maxwellian.
    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Result<ParticleEnsemble> {
        self.validate()?;
        if count == 0 {
            return Err(Error::config("particle count must be positive"));
        }
        let a = self.perturbation;
        let sqrt_theta = self.temperature.sqrt();
        let mut positions = Vec::with_capacity(count);
        let mut velocities = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = rng.gen();
            let x1 = invert_perturbed_cdf(u, a);
            let x2 = rng.gen_range(-0.5..0.5);
            let x3 = rng.gen_range(-0.5..0.5);
            let v = [
                sqrt_theta * rng.sample::<f64, _>(StandardNormal),
                sqrt_theta * rng.sample::<f64, _>(StandardNormal),
                sqrt_theta * rng.sample::<f64, _>(StandardNormal),
            ];
            positions.push([x1, x2, x3]);
            velocities.push(v);
        }
        let w = self.total_mass / count as f64;
        ParticleEnsemble::new(positions, velocities, vec![w; count])
    }
}

/// Solve `x + 1/2 + (a/2π) sin(2πx) = u` for `x ∈ [-1/2, 1/2)` by Newton;
/// the derivative `1 + a·cos(2πx) ≥ 1 - a > 0` keeps it monotone.
fn invert_perturbed_cdf(u: f64, a: f64) -> f64 {
    use crate::geometry::TWO_PI;
    let mut x = u - 0.5;
    for _ in 0..40 {
        let f = x + 0.5 + a / TWO_PI * (TWO_PI * x).sin() - u;
        let df = 1.0 + a * (TWO_PI * x).cos();
        let dx = f / df;
        x -= dx;
        if dx.abs() < 1e-15 {
            break;
        }
    }
    x.clamp(-0.5, 0.5 - f64::EPSILON)
}

/// Whether the self-consistent field acts on the particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldCoupling {
    SelfConsistent,
    Off,
}

/// Per-step integrator configuration.
#[derive(Debug, Clone)]
pub struct StepConfig {
    pub dt: f64,
    pub magnetic_b: f64,
    pub kernel: SpectralKernel,
    pub field: FieldCoupling,
}

impl StepConfig {
    pub fn new(dt: f64, magnetic_b: f64, kernel: SpectralKernel, field: FieldCoupling) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::config("time step must be positive"));
        }
        if magnetic_b.abs() * dt >= std::f64::consts::PI {
            return Err(Error::config(format!(
                "|B|·Δt = {} must be below π to resolve the rotation",
                magnetic_b.abs() * dt
            )));
        }
        Ok(StepConfig {
            dt,
            magnetic_b,
            kernel,
            field,
        })
    }
}

/// Exact solution of `v̇ = B v × e₃` over `dt`: rotation of `(v₁, v₂)` by
/// angle `-B·dt` about `e₃`; `v₃` and `|v|` are untouched.
pub fn rotate_magnetic(v: Vec3, magnetic_b: f64, dt: f64) -> Vec3 {
    if magnetic_b == 0.0 {
        return v;
    }
    let (s, c) = (-magnetic_b * dt).sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

pub(crate) fn half_drift(ensemble: &mut ParticleEnsemble, dt_half: f64) {
    for (x, v) in ensemble.positions.iter_mut().zip(&ensemble.velocities) {
        *x = wrap(add(*x, scale(*v, dt_half)));
    }
}

pub(crate) fn solve_field(ensemble: &ParticleEnsemble, cfg: &StepConfig) -> Option<SpectralDensity> {
    match cfg.field {
        FieldCoupling::SelfConsistent => Some(
            cfg.kernel
                .deposit_spectral(&ensemble.positions, &ensemble.weights),
        ),
        FieldCoupling::Off => None,
    }
}

pub(crate) fn kick_velocity(
    cfg: &StepConfig,
    table: &PhaseTable,
    v: Vec3,
    rho: Option<&SpectralDensity>,
    noise: Option<&FieldIncrement<'_>>,
) -> Vec3 {
    let mut v = v;
    if let Some(rho) = rho {
        let e = cfg.kernel.field_with_table(rho, table);
        v = add(v, scale(e, cfg.dt));
    }
    v = rotate_magnetic(v, cfg.magnetic_b, cfg.dt);
    if let Some(inc) = noise {
        v = add(v, inc.eval_with_table(table));
    }
    v
}

/// One step under the shared noise field: all particles feel the same
/// realization, evaluated at their own positions.
pub fn step_common_noise<R: Rng>(
    ensemble: &mut ParticleEnsemble,
    spec: &NoiseSpec,
    cfg: &StepConfig,
    rng: &mut R,
) -> Result<()> {
    half_drift(ensemble, 0.5 * cfg.dt);
    let rho = solve_field(ensemble, cfg);
    let inc = spec.sample_increment(cfg.dt, rng);
    let kmax = cfg.kernel.mode_cutoff().max(spec.mode_cutoff()) as usize;
    let mut table = PhaseTable::new(kmax);
    for i in 0..ensemble.count() {
        table.set(ensemble.positions[i]);
        ensemble.velocities[i] =
            kick_velocity(cfg, &table, ensemble.velocities[i], rho.as_ref(), Some(&inc));
    }
    half_drift(ensemble, 0.5 * cfg.dt);
    Ok(())
}

/// One step of the limit solver: identical splitting, but the noise kick is
/// an independent `√(2κΔt)·η` per particle.
pub fn step_independent_noise<R: Rng>(
    ensemble: &mut ParticleEnsemble,
    kappa: f64,
    cfg: &StepConfig,
    rng: &mut R,
) -> Result<()> {
    if kappa < 0.0 {
        return Err(Error::config("kappa must be nonnegative"));
    }
    half_drift(ensemble, 0.5 * cfg.dt);
    let rho = solve_field(ensemble, cfg);
    let amp = (2.0 * kappa * cfg.dt).sqrt();
    let kmax = cfg.kernel.mode_cutoff() as usize;
    let mut table = PhaseTable::new(kmax);
    for i in 0..ensemble.count() {
        if rho.is_some() {
            table.set(ensemble.positions[i]);
        }
        let mut v = kick_velocity(cfg, &table, ensemble.velocities[i], rho.as_ref(), None);
        v[0] += amp * rng.sample::<f64, _>(StandardNormal);
        v[1] += amp * rng.sample::<f64, _>(StandardNormal);
        v[2] += amp * rng.sample::<f64, _>(StandardNormal);
        ensemble.velocities[i] = v;
    }
    half_drift(ensemble, 0.5 * cfg.dt);
    Ok(())
}

/// Which noise drive a trajectory uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDrive {
    Common,
    Independent,
}

impl NoiseDrive {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseDrive::Common => "common",
            NoiseDrive::Independent => "independent",
        }
    }
}

/// Everything a replica needs to run: physics, discretization, observables
/// and seeding. Built from the experiment configuration.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub step: StepConfig,
    pub noise: NoiseSpec,
    pub particles: usize,
    pub t_end: f64,
    pub record_every: usize,
    pub observables: Vec<Observable>,
    pub init: InitialCondition,
    pub master_seed: u64,
    pub config_hash: String,
}

impl RunSetup {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::config("particle count must be positive"));
        }
        if self.t_end < 0.0 {
            return Err(Error::config("horizon must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record cadence must be >= 1"));
        }
        self.init.validate()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.step.dt).round() as usize
    }
}

/// RNG provenance stored with each run record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RngProvenance {
    pub master_seed: u64,
    pub replica: u64,
    pub scheme: String,
}

/// Persisted outcome of one stochastic trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub replica: u64,
    pub drive: NoiseDrive,
    pub times: Vec<f64>,
    pub observable_names: Vec<String>,
    /// `observable_values[obs][time_index]`
    pub observable_values: Vec<Vec<f64>>,
    pub energy: EnergyLedger,
    pub particle_steps: u64,
    pub rng_provenance: RngProvenance,
    /// Wall-clock is execution-dependent, so it is kept out of the
    /// serialized artifact to preserve byte-identical outputs.
    #[serde(skip)]
    pub wall_ms: u64,
}

pub const RUN_RECORD_SCHEMA_VERSION: u32 = 1;

/// Run one replica to the horizon, recording energies and observables at
/// the configured cadence. Bit-reproducible given `(setup, drive, replica)`.
pub fn run_trajectory(setup: &RunSetup, drive: NoiseDrive, replica: u64) -> Result<RunRecord> {
    setup.validate()?;
    let start = std::time::Instant::now();
    let mut init_rng = stream(setup.master_seed, replica, 0, Purpose::Init);
    let mut ensemble = setup.init.sample(setup.particles, &mut init_rng)?;
    let steps = setup.steps();
    let kappa = setup.noise.kappa();

    let mut ledger = EnergyLedger::new(kappa, ensemble.total_weight());
    let mut times = Vec::new();
    let mut observable_values = vec![Vec::new(); setup.observables.len()];
    let mut particle_steps = 0u64;

    let record = |t: f64,
                      ens: &ParticleEnsemble,
                      ledger: &mut EnergyLedger,
                      times: &mut Vec<f64>,
                      values: &mut Vec<Vec<f64>>| {
        let kin = kinetic_energy(ens);
        let pot = match setup.step.field {
            FieldCoupling::SelfConsistent => {
                let rho = setup.step.kernel.deposit_spectral(&ens.positions, &ens.weights);
                setup.step.kernel.potential_energy_spectral(&rho)
            }
            FieldCoupling::Off => 0.0,
        };
        ledger.record(t, kin, pot);
        times.push(t);
        for (obs, track) in setup.observables.iter().zip(values.iter_mut()) {
            track.push(observable_value(ens, obs));
        }
    };

    record(0.0, &ensemble, &mut ledger, &mut times, &mut observable_values);
    for n in 0..steps {
        match drive {
            NoiseDrive::Common => {
                let mut rng = stream(setup.master_seed, replica, n as u64, Purpose::CommonNoise);
                step_common_noise(&mut ensemble, &setup.noise, &setup.step, &mut rng)?;
            }
            NoiseDrive::Independent => {
                let mut rng =
                    stream(setup.master_seed, replica, n as u64, Purpose::IndependentNoise);
                step_independent_noise(&mut ensemble, kappa, &setup.step, &mut rng)?;
            }
        }
        particle_steps += ensemble.count() as u64;
        if (n + 1) % setup.record_every == 0 || n + 1 == steps {
            let t = (n + 1) as f64 * setup.step.dt;
            record(t, &ensemble, &mut ledger, &mut times, &mut observable_values);
        }
    }

    Ok(RunRecord {
        schema_version: RUN_RECORD_SCHEMA_VERSION,
        config_hash: setup.config_hash.clone(),
        replica,
        drive,
        times,
        observable_names: setup.observables.iter().map(|o| o.name()).collect(),
        observable_values,
        energy: ledger,
        particle_steps,
        rng_provenance: RngProvenance {
            master_seed: setup.master_seed,
            replica,
            scheme: "chacha8(master, replica, step, purpose)".to_string(),
        },
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Phase-space point of a probe tracer; positions are kept unwrapped so
/// displacements stay well defined.
#[derive(Debug, Clone, Copy)]
struct ProbeState {
    x: Vec3,
    v: Vec3,
}

impl ProbeState {
    fn coord(&self, axis: usize) -> f64 {
        if axis < 3 {
            self.x[axis]
        } else {
            self.v[axis - 3]
        }
    }

    fn displace(mut self, axis: usize, h: f64) -> Self {
        if axis < 3 {
            self.x[axis] += h;
        } else {
            self.v[axis - 3] += h;
        }
        self
    }
}

/// Estimate `|det ∇Φ_T|` of the discrete flow map around `base` by central
/// finite differences of size `h`: twelve probe tracers (one ± pair per
/// phase-space axis) ride the same frozen noise realization and the same
/// self-consistent field generated by a host ensemble of weighted
/// particles; the probes themselves carry no weight. Every substep of the
/// splitting is a shear or rotation, so the exact map defect is pure
/// finite-difference truncation plus splitting bias: `1 + O(Δt) + O(h²)`.
pub fn jacobian_probe(
    setup: &RunSetup,
    replica: u64,
    base: (Vec3, Vec3),
    h: f64,
    with_noise: bool,
) -> Result<f64> {
    setup.validate()?;
    if !(h > 0.0 && h < 0.1) {
        return Err(Error::config("probe size h must lie in (0, 0.1)"));
    }
    let mut init_rng = stream(setup.master_seed, replica, 0, Purpose::Init);
    let mut host = setup.init.sample(setup.particles, &mut init_rng)?;
    let cfg = &setup.step;
    let steps = setup.steps();

    let base_state = ProbeState {
        x: base.0,
        v: base.1,
    };
    let mut probes: Vec<ProbeState> = (0..6)
        .flat_map(|axis| {
            [
                base_state.displace(axis, h),
                base_state.displace(axis, -h),
            ]
        })
        .collect();

    let kmax = cfg.kernel.mode_cutoff().max(setup.noise.mode_cutoff()) as usize;
    let mut table = PhaseTable::new(kmax);
    for n in 0..steps {
        // host and probes drift together
        half_drift(&mut host, 0.5 * cfg.dt);
        for p in probes.iter_mut() {
            p.x = add(p.x, scale(p.v, 0.5 * cfg.dt));
        }
        let rho = solve_field(&host, cfg);
        let mut rng = stream(setup.master_seed, replica, n as u64, Purpose::CommonNoise);
        let inc = setup.noise.sample_increment(cfg.dt, &mut rng);
        let noise = if with_noise { Some(&inc) } else { None };
        for i in 0..host.count() {
            table.set(host.positions[i]);
            host.velocities[i] =
                kick_velocity(cfg, &table, host.velocities[i], rho.as_ref(), noise);
        }
        for p in probes.iter_mut() {
            table.set(wrap(p.x));
            p.v = kick_velocity(cfg, &table, p.v, rho.as_ref(), noise);
        }
        half_drift(&mut host, 0.5 * cfg.dt);
        for p in probes.iter_mut() {
            p.x = add(p.x, scale(p.v, 0.5 * cfg.dt));
        }
    }

    // displacement matrix: column b is the central difference along axis b
    let matrix: Vec<Vec<f64>> = (0..6)
        .map(|a| {
            (0..6)
                .map(|b| (probes[2 * b].coord(a) - probes[2 * b + 1].coord(a)) / (2.0 * h))
                .collect()
        })
        .collect();
    Ok(crate::numerics::determinant(matrix)?.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{norm, sub};
    use crate::torus_kernel::SpectralKernel;

    fn kernel() -> SpectralKernel {
        SpectralKernel::build(2, 0.1).unwrap()
    }

    fn free_config(dt: f64, b: f64) -> StepConfig {
        StepConfig::new(dt, b, kernel(), FieldCoupling::Off).unwrap()
    }

    fn small_ensemble(seed: u64, count: usize) -> ParticleEnsemble {
        let init = InitialCondition {
            perturbation: 0.1,
            temperature: 1.0,
            total_mass: 1.0,
        };
        let mut rng = stream(seed, 0, 0, Purpose::Init);
        init.sample(count, &mut rng).unwrap()
    }

    #[test]
    fn rotation_identities() {
        let v = [1.0, 0.0, 0.0];
        assert_eq!(rotate_magnetic(v, 0.0, 0.3), v);
        // B·dt = π/2 sends e₁ to -e₂ under v×e₃ = (v₂, -v₁, 0)
        let r = rotate_magnetic(v, std::f64::consts::FRAC_PI_2, 1.0);
        assert!((r[0]).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15 && r[2] == 0.0);
        // isometry
        let v = [0.3, -1.2, 0.7];
        let r = rotate_magnetic(v, 2.1, 0.37);
        assert!((norm(r) - norm(v)).abs() < 1e-15);
        assert_eq!(r[2], v[2]);
    }

    #[test]
    fn initial_sampler_matches_target_marginals() {
        let init = InitialCondition {
            perturbation: 0.3,
            temperature: 1.4,
            total_mass: 2.0,
        };
        let mut rng = stream(9, 0, 0, Purpose::Init);
        let ens = init.sample(50_000, &mut rng).unwrap();
        // equal weights accumulate ~n·eps of summation roundoff
        assert!((ens.total_weight() - 2.0).abs() < 1e-9);
        // mean of cos(2πx₁) under (1 + a cos) is a/2
        let phi = crate::diagnostics::Observable {
            mode: [1, 0, 0],
            phase: crate::diagnostics::ObservablePhase::Cos,
            v_center: [0.0; 3],
            width: f64::INFINITY,
        };
        let got = observable_value(&ens, &phi) / ens.total_weight();
        assert!((got - 0.15).abs() < 0.01, "cos moment {got}");
        // kinetic energy per unit mass ≈ 3θ₀
        let kin = kinetic_energy(&ens) / ens.total_weight();
        assert!((kin - 3.0 * 1.4).abs() < 0.06, "kinetic {kin}");
    }

    #[test]
    fn free_streaming_is_exact() {
        let cfg = free_config(0.05, 0.0);
        let mut ens = small_ensemble(3, 64);
        let x0 = ens.positions.clone();
        let v0 = ens.velocities.clone();
        let mut rng = stream(3, 0, 1, Purpose::IndependentNoise);
        for _ in 0..20 {
            step_independent_noise(&mut ens, 0.0, &cfg, &mut rng).unwrap();
        }
        let t = 20.0 * cfg.dt;
        for i in 0..ens.count() {
            let expect = wrap(add(x0[i], scale(v0[i], t)));
            let d = sub(ens.positions[i], expect);
            for c in d {
                let folded = (c - c.round()).abs();
                assert!(folded < 1e-12, "free streaming drifted by {folded}");
            }
            assert_eq!(ens.velocities[i], v0[i]);
        }
    }

    #[test]
    fn helical_motion_preserves_speed() {
        let cfg = free_config(0.02, 1.7);
        let mut ens = small_ensemble(5, 32);
        let speeds: Vec<f64> = ens.velocities.iter().map(|v| norm(*v)).collect();
        let mut rng = stream(5, 0, 1, Purpose::IndependentNoise);
        for _ in 0..50 {
            step_independent_noise(&mut ens, 0.0, &cfg, &mut rng).unwrap();
        }
        for (v, s0) in ens.velocities.iter().zip(&speeds) {
            assert!((norm(*v) - s0).abs() < 1e-12 * s0.max(1.0));
        }
    }

    #[test]
    fn mass_is_conserved_along_trajectories() {
        let spec = NoiseSpec::canonical(0.3, 2, 2).unwrap();
        let cfg = StepConfig::new(0.02, 0.5, kernel(), FieldCoupling::SelfConsistent).unwrap();
        let mut ens = small_ensemble(7, 200);
        let w0 = ens.total_weight();
        for n in 0..25 {
            let mut rng = stream(7, 0, n, Purpose::CommonNoise);
            step_common_noise(&mut ens, &spec, &cfg, &mut rng).unwrap();
        }
        assert!(((ens.total_weight() - w0) / w0).abs() < 1e-12);
        for x in &ens.positions {
            for c in x {
                assert!((-0.5..0.5).contains(c));
            }
        }
    }

    #[test]
    fn velocity_variance_grows_at_six_kappa_for_both_drives() {
        let kappa = 0.4;
        let spec = NoiseSpec::canonical(kappa, 2, 2).unwrap();
        let cfg = free_config(0.01, 0.0);
        let p = 400;
        let reps = 24;
        let steps = 25;
        let t = steps as f64 * cfg.dt;
        for common in [true, false] {
            let mut growth = Vec::new();
            for rep in 0..reps {
                let mut ens = small_ensemble(100 + rep, p);
                let k0 = kinetic_energy(&ens) / ens.total_weight();
                for n in 0..steps {
                    if common {
                        let mut rng = stream(55, rep, n as u64, Purpose::CommonNoise);
                        step_common_noise(&mut ens, &spec, &cfg, &mut rng).unwrap();
                    } else {
                        let mut rng = stream(55, rep, n as u64, Purpose::IndependentNoise);
                        step_independent_noise(&mut ens, kappa, &cfg, &mut rng).unwrap();
                    }
                }
                growth.push(kinetic_energy(&ens) / ens.total_weight() - k0);
            }
            let stats = crate::numerics::sample_stats(&growth);
            let expect = 6.0 * kappa * t;
            assert!(
                (stats.mean - expect).abs() < 4.0 * stats.std_err,
                "common={common}: growth {} vs {expect} (se {})",
                stats.mean,
                stats.std_err
            );
        }
    }

    /// Evaluating the noise kick before or after the half drift changes a
    /// single step only at O(Δt^{3/2}); the kick coefficient depends on
    /// position alone, so no Itô-Stratonovich corrector is needed.
    #[test]
    fn noise_kick_position_lag_is_higher_order() {
        let spec = NoiseSpec::canonical(0.5, 2, 2).unwrap();
        let rms_diff = |dt: f64| -> f64 {
            let cfg = free_config(dt, 0.0);
            let reps = 200;
            let mut acc = 0.0;
            for rep in 0..reps {
                let mut pre = small_ensemble(900 + rep, 8);
                let mut post = pre.clone();
                // post-drift evaluation (the scheme): drift then kick
                {
                    let mut rng = stream(77, rep, 0, Purpose::CommonNoise);
                    step_common_noise(&mut post, &spec, &cfg, &mut rng).unwrap();
                }
                // pre-drift evaluation with the same draws
                {
                    let mut rng = stream(77, rep, 0, Purpose::CommonNoise);
                    let inc = spec.sample_increment(cfg.dt, &mut rng);
                    let kicks: Vec<Vec3> =
                        pre.positions.iter().map(|&x| inc.eval(x)).collect();
                    half_drift(&mut pre, 0.5 * cfg.dt);
                    for i in 0..pre.count() {
                        pre.velocities[i] = add(pre.velocities[i], kicks[i]);
                    }
                    half_drift(&mut pre, 0.5 * cfg.dt);
                }
                for i in 0..pre.count() {
                    acc += crate::geometry::norm_sq(sub(pre.velocities[i], post.velocities[i]));
                }
            }
            (acc / (reps * 8) as f64).sqrt()
        };
        let d1 = rms_diff(0.04);
        let d2 = rms_diff(0.01);
        let order = (d1 / d2).log2() / 2.0f64.log2() / 2.0;
        // expect (dt1/dt2)^{3/2} = 4^{1.5} = 8; allow a generous band
        let ratio = d1 / d2;
        assert!(
            ratio > 5.0 && ratio < 12.5,
            "ratio {ratio} (order {order}) inconsistent with O(dt^{{3/2}})"
        );
    }

    fn quick_setup(seed: u64) -> RunSetup {
        RunSetup {
            step: StepConfig::new(0.02, 0.8, kernel(), FieldCoupling::SelfConsistent).unwrap(),
            noise: NoiseSpec::canonical(0.3, 2, 2).unwrap(),
            particles: 150,
            t_end: 0.1,
            record_every: 2,
            observables: vec![Observable::total_mass()],
            init: InitialCondition {
                perturbation: 0.1,
                temperature: 1.0,
                total_mass: 1.0,
            },
            master_seed: seed,
            config_hash: "test".to_string(),
        }
    }

    #[test]
    fn zero_horizon_records_only_initial_state() {
        let mut setup = quick_setup(1);
        setup.t_end = 0.0;
        let record = run_trajectory(&setup, NoiseDrive::Common, 0).unwrap();
        assert_eq!(record.times, vec![0.0]);
        assert_eq!(record.energy.rows.len(), 1);
        assert_eq!(record.energy.rows[0].residual, 0.0);
    }

    #[test]
    fn identical_seeds_give_identical_records() {
        let setup = quick_setup(42);
        let a = run_trajectory(&setup, NoiseDrive::Common, 3).unwrap();
        let b = run_trajectory(&setup, NoiseDrive::Common, 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = run_trajectory(&setup, NoiseDrive::Common, 4).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn probe_determinant_is_one_for_shear_and_rotation() {
        // free streaming
        let mut setup = quick_setup(11);
        setup.step = free_config(0.02, 0.0);
        setup.particles = 16;
        let det = jacobian_probe(&setup, 0, ([0.1, 0.0, -0.2], [0.4, 0.1, 0.0]), 1e-4, false)
            .unwrap();
        assert!((det - 1.0).abs() < 1e-10, "free streaming det {det}");
        // rotation only
        setup.step = free_config(0.02, 1.3);
        let det = jacobian_probe(&setup, 0, ([0.1, 0.0, -0.2], [0.4, 0.1, 0.0]), 1e-4, false)
            .unwrap();
        assert!((det - 1.0).abs() < 1e-10, "rotation det {det}");
    }

    #[test]
    fn probe_determinant_near_one_for_full_dynamics() {
        let setup = quick_setup(13);
        let h = 1e-4;
        let det = jacobian_probe(&setup, 1, ([0.05, -0.1, 0.2], [0.3, -0.2, 0.5]), h, true)
            .unwrap();
        let tol = 10.0 * (setup.step.dt + h * h);
        assert!((det - 1.0).abs() <= tol, "det {det}, tolerance {tol}");
    }
}
