//! TM1 (Chu) antenna elements and coupled array impedance matrices.
//!
//! Elements are lossless minimum-scattering antennas radiating only the lowest
//! spherical mode. The self-impedance follows the lumped Chu equivalent circuit
//! and pairs of elements couple through the dipole near/far-field expansion.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::numerics::{generalized_eig_max, CMatrix, RMatrix};

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Slack used when turning an aperture into an element count, so that
/// `D / delta` landing a few ulps below an integer does not drop an element.
const COUNT_SLACK: f64 = 1e-9;

/// Size and equivalent resistance of a TM1 element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChuParams {
    /// Radius `a` of the smallest sphere enclosing the element (m).
    pub radius: f64,
    /// Equivalent radiation resistance `R_a` of the lumped model (ohm).
    pub resistance: f64,
}

impl ChuParams {
    pub fn new(radius: f64, resistance: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain(format!("element radius must be positive, got {radius}")));
        }
        if !(resistance > 0.0 && resistance.is_finite()) {
            return Err(domain(format!("element resistance must be positive, got {resistance}")));
        }
        Ok(ChuParams { radius, resistance })
    }

    /// Smallest spacing at which two enclosing spheres do not overlap.
    pub fn min_spacing(&self) -> f64 {
        2.0 * self.radius
    }
}

impl Default for ChuParams {
    fn default() -> Self {
        ChuParams {
            radius: 0.0025,
            resistance: 50.0,
        }
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("frequency must be positive and finite, got {f}")))
    }
}

/// Free-space wavenumber `2 pi f / c`.
pub fn wavenumber(f: f64) -> f64 {
    2.0 * PI * f / SPEED_OF_LIGHT
}

/// Electrical size `k0 a` of an element.
pub fn electrical_size(f: f64, params: &ChuParams) -> f64 {
    wavenumber(f) * params.radius
}

/// Input impedance of an isolated TM1 element:
/// `Z = R_a (c^2 + j 2pi f c a - (2pi f a)^2) / (j 2pi f c a - (2pi f a)^2)`.
pub fn self_impedance(f: f64, params: &ChuParams) -> Result<Complex64> {
    check_frequency(f)?;
    let c = SPEED_OF_LIGHT;
    let x = 2.0 * PI * f * params.radius;
    let num = Complex64::new(c * c - x * x, c * x);
    let den = Complex64::new(-x * x, c * x);
    Ok(num / den * params.resistance)
}

/// `Re{Z_R}^(1/2)` of a receive element: `(k0 a / sqrt((k0 a)^2 + 1)) sqrt(R_a)`.
pub fn receive_gain_factor(f: f64, params: &ChuParams) -> Result<f64> {
    check_frequency(f)?;
    let x = 2.0 * PI * f * params.radius;
    Ok(x / (x * x + SPEED_OF_LIGHT * SPEED_OF_LIGHT).sqrt() * params.resistance.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Colinear,
    Parallel,
    Planar,
}

impl ArrayKind {
    pub fn name(&self) -> &'static str {
        match self {
            ArrayKind::Colinear => "colinear",
            ArrayKind::Parallel => "parallel",
            ArrayKind::Planar => "planar",
        }
    }
}

impl std::fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether off-diagonal mutual impedances are included in `Z_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Coupled,
    Uncoupled,
}

/// Uniform base-station array inside a fixed aperture.
///
/// Elements are indexed from zero, row-major, with `n1` elements per row.
/// Linear arrays have a single row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    delta1: f64,
    delta2: f64,
    aperture1: f64,
    aperture2: f64,
    n1: usize,
    n2: usize,
}

fn count_along(aperture: f64, delta: f64) -> usize {
    (aperture / delta + COUNT_SLACK).floor() as usize + 1
}

fn check_spacing(name: &str, delta: f64, min: f64, max: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(config(format!("{name} must be positive, got {delta}")));
    }
    if delta < min * (1.0 - COUNT_SLACK) {
        return Err(config(format!("{name} = {delta} m is below the minimum spacing {min} m")));
    }
    if delta > max * (1.0 + COUNT_SLACK) {
        return Err(config(format!("{name} = {delta} m exceeds the aperture bound {max} m")));
    }
    Ok(())
}

impl ArrayGeometry {
    /// Colinear or parallel array of `floor(D / delta) + 1` elements.
    pub fn linear(kind: ArrayKind, delta: f64, aperture: f64, min_spacing: f64) -> Result<Self> {
        if kind == ArrayKind::Planar {
            return Err(config("ArrayGeometry::linear called with a planar kind"));
        }
        if !(aperture > 0.0) {
            return Err(config(format!("aperture must be positive, got {aperture}")));
        }
        check_spacing("spacing", delta, min_spacing, aperture)?;
        Ok(ArrayGeometry {
            kind,
            delta1: delta,
            delta2: 0.0,
            aperture1: aperture,
            aperture2: 0.0,
            n1: count_along(aperture, delta),
            n2: 1,
        })
    }

    /// Rectangular planar array with `(N1 - 1) d1 <= D1` and `(N2 - 1) d2 + a <= D2`.
    pub fn planar(
        delta1: f64,
        delta2: f64,
        aperture1: f64,
        aperture2: f64,
        params: &ChuParams,
        min_spacing: f64,
    ) -> Result<Self> {
        let vertical = aperture2 - params.radius;
        if !(aperture1 > 0.0) || !(vertical > 0.0) {
            return Err(config(format!(
                "planar aperture {aperture1} x {aperture2} m leaves no room for elements of radius {}",
                params.radius
            )));
        }
        check_spacing("horizontal spacing", delta1, min_spacing, aperture1)?;
        check_spacing("vertical spacing", delta2, min_spacing, vertical)?;
        Ok(ArrayGeometry {
            kind: ArrayKind::Planar,
            delta1,
            delta2,
            aperture1,
            aperture2,
            n1: count_along(aperture1, delta1),
            n2: count_along(vertical, delta2),
        })
    }

    /// One isolated element, the reference for SNR calibration.
    pub fn single() -> Self {
        ArrayGeometry {
            kind: ArrayKind::Colinear,
            delta1: 0.0,
            delta2: 0.0,
            aperture1: 0.0,
            aperture2: 0.0,
            n1: 1,
            n2: 1,
        }
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    /// `(delta1, delta2)`; `delta2` is zero for linear arrays.
    pub fn spacing(&self) -> (f64, f64) {
        (self.delta1, self.delta2)
    }

    pub fn aperture(&self) -> (f64, f64) {
        (self.aperture1, self.aperture2)
    }

    pub fn per_row(&self) -> usize {
        self.n1
    }

    pub fn rows(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Separation and orientation angles of an element pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPlacement {
    pub distance: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn pair_placement(geom: &ArrayGeometry, p: usize, q: usize) -> Result<PairPlacement> {
    let n = geom.len();
    if p >= n || q >= n {
        return Err(domain(format!("element index out of range: ({p}, {q}) with N = {n}")));
    }
    if p == q {
        return Err(domain(format!("pair placement needs distinct elements, got p = q = {p}")));
    }
    let sep = p.abs_diff(q) as f64;
    Ok(match geom.kind {
        ArrayKind::Colinear => PairPlacement {
            distance: sep * geom.delta1,
            alpha: PI,
            beta: 0.0,
        },
        ArrayKind::Parallel => PairPlacement {
            distance: sep * geom.delta1,
            alpha: FRAC_PI_2,
            beta: FRAC_PI_2,
        },
        ArrayKind::Planar => {
            let n1 = geom.n1 as i64;
            let (p, q) = (p as i64, q as i64);
            let (row_p, row_q) = (p / n1, q / n1);
            let horizontal = (p - q) + n1 * (row_q - row_p);
            let vertical = row_p - row_q;
            let (h, v) = (horizontal as f64 * geom.delta1, vertical as f64 * geom.delta2);
            let beta = if horizontal == 0 {
                FRAC_PI_2
            } else {
                ((vertical as f64 / horizontal as f64).abs() * geom.delta2 / geom.delta1).atan()
            };
            PairPlacement {
                distance: h.hypot(v),
                alpha: PI - beta,
                beta,
            }
        }
    })
}

/// `(1/(jx), 1/(jx)^2, 1/(jx)^3)` with `x = k0 d`.
fn inverse_powers(k0d: f64) -> (Complex64, Complex64, Complex64) {
    let t = Complex64::new(0.0, k0d);
    let t1 = t.inv();
    let t2 = t1 * t1;
    (t1, t2, t2 * t1)
}

fn check_pair(distance: f64, zp: Complex64, zq: Complex64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(domain(format!("pair distance must be positive, got {distance}")));
    }
    if !(zp.re > 0.0 && zq.re > 0.0) {
        return Err(domain("mutual impedance needs self-impedances with positive real part"));
    }
    Ok((zp.re * zq.re).sqrt())
}

/// Mutual impedance of two arbitrarily oriented TM1 elements.
pub fn mutual_impedance(
    f: f64,
    place: &PairPlacement,
    zp: Complex64,
    zq: Complex64,
) -> Result<Complex64> {
    check_frequency(f)?;
    let scale = check_pair(place.distance, zp, zq)?;
    let k0d = wavenumber(f) * place.distance;
    let (t1, t2, t3) = inverse_powers(k0d);
    let bracket = (t1 + t2 + t3) * (0.5 * place.alpha.sin() * place.beta.sin())
        + (t2 + t3) * (place.alpha.cos() * place.beta.cos());
    Ok(-3.0 * scale * bracket * Complex64::from_polar(1.0, -k0d))
}

/// Colinear specialisation (`alpha = pi`, `beta = 0`).
pub fn mutual_colinear(f: f64, distance: f64, zp: Complex64, zq: Complex64) -> Result<Complex64> {
    check_frequency(f)?;
    let scale = check_pair(distance, zp, zq)?;
    let k0d = wavenumber(f) * distance;
    let (_, t2, t3) = inverse_powers(k0d);
    Ok(3.0 * scale * (t2 + t3) * Complex64::from_polar(1.0, -k0d))
}

/// Parallel specialisation (`alpha = beta = pi/2`), with the phase written as `e^{-j(k0 d - pi)}`.
pub fn mutual_parallel(f: f64, distance: f64, zp: Complex64, zq: Complex64) -> Result<Complex64> {
    check_frequency(f)?;
    let scale = check_pair(distance, zp, zq)?;
    let k0d = wavenumber(f) * distance;
    let (t1, t2, t3) = inverse_powers(k0d);
    Ok(1.5 * scale * (t1 + t2 + t3) * Complex64::from_polar(1.0, -(k0d - PI)))
}

/// Planar-array specialisation with `alpha = pi - beta`.
pub fn mutual_planar(
    f: f64,
    distance: f64,
    beta: f64,
    zp: Complex64,
    zq: Complex64,
) -> Result<Complex64> {
    check_frequency(f)?;
    let scale = check_pair(distance, zp, zq)?;
    let k0d = wavenumber(f) * distance;
    let (t1, t2, t3) = inverse_powers(k0d);
    let (s, c) = beta.sin_cos();
    let bracket = (t1 + t2 + t3) * (0.5 * s * s) - (t2 + t3) * (c * c);
    Ok(-3.0 * scale * bracket * Complex64::from_polar(1.0, -k0d))
}

/// Transmit impedance matrix `Z_T(f)`: self-impedances on the diagonal,
/// mutual impedances off it. Symmetric by construction (not Hermitian).
pub fn build_zt(
    f: f64,
    geom: &ArrayGeometry,
    params: &ChuParams,
    coupling: Coupling,
) -> Result<CMatrix> {
    let z = self_impedance(f, params)?;
    let n = geom.len();
    let mut m = CMatrix::from_diagonal_element(n, n, z);
    if coupling == Coupling::Uncoupled {
        return Ok(m);
    }
    for p in 0..n {
        for q in p + 1..n {
            let place = pair_placement(geom, p, q)?;
            let zpq = mutual_impedance(f, &place, z, z)?;
            m[(p, q)] = zpq;
            m[(q, p)] = zpq;
        }
    }
    Ok(m)
}

/// Receive impedance matrix: users are far apart, so only self-impedances.
pub fn build_zr(f: f64, users: usize, params: &ChuParams) -> Result<CMatrix> {
    if users == 0 {
        return Err(domain("receive impedance needs at least one user"));
    }
    let z = self_impedance(f, params)?;
    Ok(CMatrix::from_diagonal_element(users, users, z))
}

/// Maximum radiation efficiency over all drive currents together with the
/// optimal (real) current vector.
///
/// Largest root of `|Re{Z_T} - t (Re{Z_T} + R I)| = 0`.
pub fn optimal_radiation_efficiency(zt: &CMatrix, source_resistance: f64) -> Result<(f64, DVector<f64>)> {
    if !(source_resistance > 0.0) {
        return Err(domain(format!(
            "source resistance must be positive, got {source_resistance}"
        )));
    }
    let re: RMatrix = zt.map(|z| z.re);
    let n = re.nrows();
    let total = &re + RMatrix::identity(n, n) * source_resistance;
    generalized_eig_max(&re, &total)
}

pub fn max_radiation_efficiency(zt: &CMatrix, source_resistance: f64) -> Result<f64> {
    optimal_radiation_efficiency(zt, source_resistance).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn self_impedance_high_frequency_limit() {
        let p = ChuParams::new(0.0025, 50.0).unwrap();
        let z = self_impedance(1e15, &p).unwrap();
        assert!((z - Complex64::new(50.0, 0.0)).norm() < 0.01);
    }

    #[test]
    fn self_impedance_at_unit_electrical_size() {
        let p = ChuParams::new(0.0025, 50.0).unwrap();
        let f = SPEED_OF_LIGHT / (2.0 * PI * p.radius);
        let z = self_impedance(f, &p).unwrap();
        assert!(rel(z, Complex64::new(25.0, -25.0)) < 1e-12, "{z}");
    }

    #[test]
    fn self_impedance_closed_form_real_part() {
        let p = ChuParams::default();
        for j in 0..20 {
            let f = 1e9 * 20f64.powf(j as f64 / 19.0);
            let u = electrical_size(f, &p);
            let z = self_impedance(f, &p).unwrap();
            // rationalised form (u^3 - j) / (u (1 + u^2))
            let closed = Complex64::new(u * u * u, -1.0) / (u * (1.0 + u * u)) * p.resistance;
            assert!(rel(z, closed) < 1e-12);
            assert!(((z.re * (1.0 + u * u)) - p.resistance * u * u).abs() < 1e-12 * p.resistance);
            assert!(z.re > 0.0 && z.re < p.resistance && z.im < 0.0);
        }
    }

    #[test]
    fn bad_inputs_are_domain_errors() {
        let p = ChuParams::default();
        assert!(self_impedance(0.0, &p).is_err());
        assert!(self_impedance(f64::NAN, &p).is_err());
        assert!(ChuParams::new(0.0, 50.0).is_err());
        assert!(ChuParams::new(0.001, -1.0).is_err());
    }

    #[test]
    fn element_count_from_aperture() {
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.02, 0.2, 0.005).unwrap();
        assert_eq!(g.len(), 11);
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.03, 0.2, 0.005).unwrap();
        assert_eq!(g.len(), 7);
        let g = ArrayGeometry::linear(ArrayKind::Parallel, 0.2, 0.2, 0.005).unwrap();
        assert_eq!(g.len(), 2);
        assert!(ArrayGeometry::linear(ArrayKind::Colinear, 0.25, 0.2, 0.005).is_err());
        assert!(ArrayGeometry::linear(ArrayKind::Colinear, 0.004, 0.2, 0.005).is_err());
    }

    #[test]
    fn planar_counts_respect_vertical_margin() {
        let p = ChuParams::default();
        let g = ArrayGeometry::planar(0.01, 0.01, 0.05, 0.05, &p, 0.005).unwrap();
        assert_eq!(g.per_row(), 6);
        // (N2 - 1) * 0.01 + 0.0025 <= 0.05  =>  N2 = 5
        assert_eq!(g.rows(), 5);
        let (d1, d2) = g.spacing();
        assert!((g.per_row() - 1) as f64 * d1 <= 0.05 + 1e-12);
        assert!((g.rows() - 1) as f64 * d2 + p.radius <= 0.05 + 1e-12);
    }

    #[test]
    fn planar_placements() {
        let p = ChuParams::default();
        let g = ArrayGeometry::planar(0.01, 0.01, 0.02, 0.03, &p, 0.005).unwrap();
        assert_eq!(g.per_row(), 3);
        let row = pair_placement(&g, 1, 2).unwrap();
        assert_eq!((row.distance, row.alpha, row.beta), (0.01, PI, 0.0));
        let col = pair_placement(&g, 1, 4).unwrap();
        assert_eq!((col.distance, col.alpha, col.beta), (0.01, FRAC_PI_2, FRAC_PI_2));
        let diag = pair_placement(&g, 0, 4).unwrap();
        assert!((diag.distance - 0.01 * 2f64.sqrt()).abs() < 1e-15);
        assert!((diag.beta - PI / 4.0).abs() < 1e-15);
        assert!((diag.alpha - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!(pair_placement(&g, 2, 2).is_err());
        assert!(pair_placement(&g, 0, 99).is_err());
    }

    #[test]
    fn linear_placements() {
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.01, 0.05, 0.005).unwrap();
        let pl = pair_placement(&g, 4, 1).unwrap();
        assert_eq!((pl.alpha, pl.beta), (PI, 0.0));
        assert!((pl.distance - 0.03).abs() < 1e-15);
        let g = ArrayGeometry::linear(ArrayKind::Parallel, 0.01, 0.05, 0.005).unwrap();
        let pl = pair_placement(&g, 0, 2).unwrap();
        assert_eq!((pl.alpha, pl.beta), (FRAC_PI_2, FRAC_PI_2));
    }

    #[test]
    fn colinear_pair_matches_hand_value() {
        // f = 3.5 GHz, d = 0.01 m, a = 0.0025 m, R_a = 50 ohm, evaluated
        // independently in double precision from the colinear closed form.
        let p = ChuParams::default();
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.01, 0.01, 0.005).unwrap();
        let zt = build_zt(3.5e9, &g, &p, Coupling::Coupled).unwrap();
        let expect = Complex64::new(COLINEAR_HAND.0, COLINEAR_HAND.1);
        assert!(rel(zt[(0, 1)], expect) < 1e-12, "{}", zt[(0, 1)]);
    }

    // Frozen from tests/oracles/scalar_values.py.
    const COLINEAR_HAND: (f64, f64) = (1.5409466638620684, 15.256875337609866);

    #[test]
    fn mutual_impedance_vanishes_far_away() {
        let p = ChuParams::default();
        let z = self_impedance(3.5e9, &p).unwrap();
        let place = PairPlacement { distance: 10.0, alpha: PI, beta: 0.0 };
        let m = mutual_impedance(3.5e9, &place, z, z).unwrap();
        assert!(m.norm() < 1e-2 * z.re);
        let place = PairPlacement { distance: 10.0, alpha: FRAC_PI_2, beta: FRAC_PI_2 };
        let m = mutual_impedance(3.5e9, &place, z, z).unwrap();
        assert!(m.norm() < 1e-2 * z.re);
        let place = PairPlacement { distance: 0.0, alpha: PI, beta: 0.0 };
        assert!(mutual_impedance(3.5e9, &place, z, z).is_err());
    }

    #[test]
    fn zt_structure() {
        let p = ChuParams::default();
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.01, 0.0, 0.005);
        assert!(g.is_err());
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.05, 0.04, 0.005);
        assert!(g.is_err());
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.04, 0.04, 0.005).unwrap();
        let one = ArrayGeometry { n1: 1, ..g };
        let zt = build_zt(3.5e9, &one, &p, Coupling::Coupled).unwrap();
        assert_eq!(zt.shape(), (1, 1));
        assert_eq!(zt[(0, 0)], self_impedance(3.5e9, &p).unwrap());

        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.01, 0.02, 0.005).unwrap();
        let zt = build_zt(3.5e9, &g, &p, Coupling::Coupled).unwrap();
        assert_eq!(zt, zt.transpose());
        assert_eq!(zt[(0, 1)], zt[(1, 2)]);
        let unc = build_zt(3.5e9, &g, &p, Coupling::Uncoupled).unwrap();
        assert_eq!(unc[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zr_is_diagonal() {
        let p = ChuParams::default();
        let zr = build_zr(17.5e9, 4, &p).unwrap();
        let z = self_impedance(17.5e9, &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { z } else { Complex64::new(0.0, 0.0) };
                assert_eq!(zr[(i, j)], expect);
            }
        }
        assert_eq!(build_zr(1e9, 1, &p).unwrap().shape(), (1, 1));
        assert!(build_zr(1e9, 0, &p).is_err());
    }

    #[test]
    fn efficiency_closed_forms() {
        let ra = 50.0;
        let r = 30.0;
        for n in [1, 3, 6] {
            let zt = CMatrix::from_diagonal_element(n, n, Complex64::new(ra, 0.0));
            let e = max_radiation_efficiency(&zt, r).unwrap();
            assert!((e - ra / (ra + r)).abs() < 1e-14);
        }
        let z = Complex64::new(12.0, -80.0);
        let zt = CMatrix::from_element(1, 1, z);
        let e = max_radiation_efficiency(&zt, 50.0).unwrap();
        assert!((e - 12.0 / 62.0).abs() < 1e-14);
        assert!(max_radiation_efficiency(&zt, 0.0).is_err());
    }
}
