//! Torus geometry, small vector helpers and lattice mode bookkeeping.
//!
//! The spatial domain is the unit torus `T³ = [-1/2, 1/2)³`. Fourier modes
//! live on the integer lattice; the zero mode is always excluded. The
//! nonzero lattice splits into two halves `Z³₊ ∪ Z³₋` with `Z³₊ = -Z³₋`;
//! we take `k ∈ Z³₊` iff the first nonzero coordinate of `k` is positive.

use num_complex::Complex64;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// 3-vector used for positions, velocities and field values.
pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

pub fn norm(a: Vec3) -> f64 {
    norm_sq(a).sqrt()
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Wrap a coordinate into the fundamental cell `[-1/2, 1/2)`.
pub fn wrap_coord(x: f64) -> f64 {
    let y = x - (x + 0.5).floor();
    // floor can land exactly on 1/2 through rounding; fold it back.
    if y >= 0.5 {
        y - 1.0
    } else {
        y
    }
}

/// Wrap a position into the fundamental cell of the torus.
pub fn wrap(x: Vec3) -> Vec3 {
    [wrap_coord(x[0]), wrap_coord(x[1]), wrap_coord(x[2])]
}

/// Integer lattice mode.
pub type Mode = [i32; 3];

pub fn mode_dot(k: Mode, x: Vec3) -> f64 {
    k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]
}

pub fn mode_norm_sq(k: Mode) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

pub fn mode_sup_norm(k: Mode) -> i32 {
    k[0].abs().max(k[1].abs()).max(k[2].abs())
}

/// `true` iff `k ∈ Z³₊`: the first nonzero coordinate is positive.
pub fn is_positive_half(k: Mode) -> bool {
    for &c in &k {
        if c != 0 {
            return c > 0;
        }
    }
    false
}

/// Modes of `Z³₊` inside the sup-norm cube `0 < |k|∞ ≤ cutoff`, ordered by
/// shell (`|k|∞`) then lexicographically. Shell ordering makes the mode list
/// for cutoff `N` a prefix of the list for any larger cutoff, which lets
/// common-random-number sweeps share Gaussian draws across nested families.
pub fn positive_half_cube(cutoff: i32) -> Vec<Mode> {
    assert!(cutoff >= 1);
    let mut modes = Vec::new();
    for k1 in -cutoff..=cutoff {
        for k2 in -cutoff..=cutoff {
            for k3 in -cutoff..=cutoff {
                let k = [k1, k2, k3];
                if is_positive_half(k) {
                    modes.push(k);
                }
            }
        }
    }
    modes.sort_by_key(|&k| (mode_sup_norm(k), k));
    modes
}

/// Modes of `Z³₊` inside the Euclidean ball `0 < |k| ≤ cutoff`, ordered by
/// `|k|²` then lexicographically.
pub fn positive_half_ball(cutoff: i32) -> Vec<Mode> {
    assert!(cutoff >= 1);
    let c2 = cutoff * cutoff;
    let mut modes = Vec::new();
    for k1 in -cutoff..=cutoff {
        for k2 in -cutoff..=cutoff {
            for k3 in -cutoff..=cutoff {
                let k = [k1, k2, k3];
                if k1 * k1 + k2 * k2 + k3 * k3 <= c2 && is_positive_half(k) {
                    modes.push(k);
                }
            }
        }
    }
    modes.sort_by_key(|&k| (k[0] * k[0] + k[1] * k[1] + k[2] * k[2], k));
    modes
}

/// Per-axis tables of `e^{2πi j x_d}` for `0 ≤ j ≤ kmax`, from which the
/// phase `e^{2πi k·x}` of any lattice mode with `|k|∞ ≤ kmax` costs two
/// complex multiplications. This is the inner kernel of all mode sums.
pub struct PhaseTable {
    kmax: usize,
    axes: [Vec<Complex64>; 3],
}

impl PhaseTable {
    pub fn new(kmax: usize) -> Self {
        let col = vec![Complex64::new(1.0, 0.0); kmax + 1];
        PhaseTable {
            kmax,
            axes: [col.clone(), col.clone(), col],
        }
    }

    /// Recompute the tables for position `x`.
    pub fn set(&mut self, x: Vec3) {
        for d in 0..3 {
            let (s, c) = (TWO_PI * x[d]).sin_cos();
            let base = Complex64::new(c, s);
            let axis = &mut self.axes[d];
            axis[0] = Complex64::new(1.0, 0.0);
            for j in 1..=self.kmax {
                axis[j] = axis[j - 1] * base;
            }
        }
    }

    fn axis_phase(&self, d: usize, k: i32) -> Complex64 {
        if k >= 0 {
            self.axes[d][k as usize]
        } else {
            self.axes[d][(-k) as usize].conj()
        }
    }

    /// `e^{2πi k·x}` for the position set by the last call to [`set`].
    ///
    /// [`set`]: PhaseTable::set
    #[inline]
    pub fn phase(&self, k: Mode) -> Complex64 {
        self.axis_phase(0, k[0]) * self.axis_phase(1, k[1]) * self.axis_phase(2, k[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_cell() {
        for &x in &[-1.7, -0.5, -0.499, 0.0, 0.499, 0.5, 0.5001, 12.3] {
            let y = wrap_coord(x);
            assert!((-0.5..0.5).contains(&y), "wrap({x}) = {y}");
            // the wrapped value differs from x by an integer
            assert!(((x - y) - (x - y).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn half_cube_counts() {
        // |k|∞ ≤ N cube holds (2N+1)³ - 1 nonzero modes; the half keeps half.
        assert_eq!(positive_half_cube(1).len(), 13);
        assert_eq!(positive_half_cube(2).len(), 62);
        assert_eq!(positive_half_cube(3).len(), 171);
        assert_eq!(positive_half_cube(4).len(), 364);
    }

    #[test]
    fn half_cube_is_a_partition() {
        let modes = positive_half_cube(3);
        for &k in &modes {
            assert!(is_positive_half(k));
            let neg = [-k[0], -k[1], -k[2]];
            assert!(!is_positive_half(neg));
        }
    }

    #[test]
    fn half_cube_lists_are_nested() {
        let small = positive_half_cube(2);
        let big = positive_half_cube(4);
        assert_eq!(&big[..small.len()], &small[..]);
    }

    #[test]
    fn phase_table_matches_direct_evaluation() {
        let x = [0.137, -0.48, 0.251];
        let mut table = PhaseTable::new(5);
        table.set(x);
        for &k in &[[1, 0, 0], [-3, 2, 5], [0, -4, -4], [5, 5, 5]] {
            let direct = Complex64::from_polar(1.0, TWO_PI * mode_dot(k, x));
            let tab = table.phase(k);
            assert!((direct - tab).norm() < 1e-12);
        }
    }
}
