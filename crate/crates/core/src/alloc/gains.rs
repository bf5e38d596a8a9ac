use num_complex::Complex64;

use crate::channel::EquivalentChannelSet;
use crate::error::{domain, numerical, Result};
use crate::numerics::linalg::{hermitian_cholesky, hermitian_eig, hermitian_log2_det, solve};
use crate::numerics::{CMatrix, RMatrix};

/// Interference-whitened gains `L_{i,k} = h~_{i,k} Z_{i,k}^-1 h~_{i,k}^H`, `(M_L + M_H) x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub values: RMatrix,
}

impl EffectiveGains {
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[(i, k)]
    }

    pub fn subcarriers(&self) -> usize {
        self.values.nrows()
    }

    pub fn users(&self) -> usize {
        self.values.ncols()
    }
}

/// `Z_{i,k} = sum_{k' != k} P_{i,k'} h~^H_{i,k'} h~_{i,k'} + sigma2 I` for one subcarrier.
pub fn interference_matrix(k: usize, h: &CMatrix, power_row: &[f64], noise: f64) -> CMatrix {
    let n = h.ncols();
    let mut z = CMatrix::identity(n, n) * Complex64::new(noise, 0.0);
    for (j, p) in power_row.iter().enumerate() {
        if j == k || *p == 0.0 {
            continue;
        }
        let row = h.row(j);
        z += row.adjoint() * row * Complex64::new(*p, 0.0);
    }
    z
}

/// Closed form `h Z^-1 h^H` through a Cholesky solve.
pub fn whitened_gain(h: &CMatrix, z: &CMatrix) -> Result<f64> {
    if h.nrows() != 1 || h.ncols() != z.nrows() {
        return Err(domain("whitened_gain expects a 1 x N row and an N x N matrix"));
    }
    let chol = hermitian_cholesky(z, "interference-plus-noise matrix")?;
    let x = chol.solve(&h.adjoint());
    Ok((h * x)[(0, 0)].re.max(0.0))
}

/// Eigen path: `h. = h Q Delta^(-1/2)` with `Z = Q Delta Q^H`; returns `(||h.||^2, h.)`.
pub fn whitened_gain_eig(h: &CMatrix, z: &CMatrix) -> Result<(f64, CMatrix)> {
    let eig = hermitian_eig(z)?;
    if eig.values.iter().any(|v| *v <= 0.0) {
        return Err(numerical("interference-plus-noise matrix is not positive definite"));
    }
    let mut dotted = h * &eig.vectors;
    for (j, v) in eig.values.iter().enumerate() {
        dotted.column_mut(j).scale_mut(v.sqrt().recip());
    }
    let norm = dotted.norm_squared();
    Ok((norm, dotted))
}

/// Gram matrices `H~_i H~_i^H` (K x K), reused by the fast gain and rate paths.
pub(crate) fn grams(set: &EquivalentChannelSet) -> Vec<CMatrix> {
    set.channels.iter().map(|h| h * h.adjoint()).collect()
}

fn check_power(set: &EquivalentChannelSet, power: &RMatrix) -> Result<()> {
    if power.shape() != (set.grid.len(), set.users()) {
        return Err(domain(format!(
            "power matrix is {:?}, expected {:?}",
            power.shape(),
            (set.grid.len(), set.users())
        )));
    }
    if power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(domain("powers must be finite and non-negative"));
    }
    Ok(())
}

/// Uses `H Z_k^-1 H^H = (sigma2 I + G D_k)^-1 G` with `D_k = diag(P)` minus user `k`,
/// so only K x K systems are solved regardless of the array size.
pub(crate) fn gains_from_grams(grams: &[CMatrix], noise: &[f64], power: &RMatrix) -> Result<EffectiveGains> {
    let (m, users) = power.shape();
    let mut values = RMatrix::zeros(m, users);
    for i in 0..m {
        let g = &grams[i];
        let row: Vec<f64> = (0..users).map(|k| power[(i, k)]).collect();
        let active = row.iter().filter(|p| **p > 0.0).count();
        if active == 0 {
            for k in 0..users {
                values[(i, k)] = g[(k, k)].re / noise[i];
            }
            continue;
        }
        for k in 0..users {
            let mut a = CMatrix::identity(users, users) * Complex64::new(noise[i], 0.0);
            for (j, p) in row.iter().enumerate() {
                if j != k && *p > 0.0 {
                    let scaled = g.column(j) * Complex64::new(*p, 0.0);
                    a.column_mut(j).axpy(Complex64::new(1.0, 0.0), &scaled, Complex64::new(1.0, 0.0));
                }
            }
            let x = solve(&a, &g.columns(k, 1).into_owned(), "interference-plus-noise matrix")?;
            values[(i, k)] = x[(k, 0)].re.max(0.0);
        }
    }
    Ok(EffectiveGains { values })
}

pub(crate) fn rate_from_grams(
    grams: &[CMatrix],
    noise: &[f64],
    bandwidths: &[f64],
    power: &RMatrix,
) -> Result<f64> {
    let (m, users) = power.shape();
    let mut total = 0.0;
    for i in 0..m {
        if (0..users).all(|k| power[(i, k)] == 0.0) {
            continue;
        }
        let s: Vec<f64> = (0..users).map(|k| (power[(i, k)] / noise[i]).sqrt()).collect();
        let g = &grams[i];
        let mut a = CMatrix::from_fn(users, users, |r, c| g[(r, c)] * (s[r] * s[c]));
        for d in 0..users {
            a[(d, d)] += 1.0;
        }
        total += bandwidths[i] * hermitian_log2_det(&a)?;
    }
    Ok(total)
}

/// Whitened gains of every (subcarrier, user) pair at the given powers.
pub fn effective_gains(set: &EquivalentChannelSet, power: &RMatrix) -> Result<EffectiveGains> {
    check_power(set, power)?;
    gains_from_grams(&grams(set), &set.noise, power)
}

/// `sum_i B_i log2 |I + sum_k P_{i,k} h~^H_{i,k} h~_{i,k} / sigma2_i|` in bit/s,
/// evaluated in the equivalent K x K form.
pub fn sum_rate(set: &EquivalentChannelSet, power: &RMatrix) -> Result<f64> {
    check_power(set, power)?;
    let bw: Vec<f64> = set.grid.entries().iter().map(|s| s.bandwidth).collect();
    rate_from_grams(&grams(set), &set.noise, &bw, power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{fading_matrix, SubcarrierGrid};

    fn set(users: usize, antennas: usize, ml: usize, mh: usize, seed: u64) -> EquivalentChannelSet {
        let grid = SubcarrierGrid::new(ml, mh, 3.5e9, 17.5e9, 120e3, 480e3).unwrap();
        let channels = (0..grid.len()).map(|i| fading_matrix(seed, i, users, antennas)).collect();
        let noise = (0..grid.len()).map(|i| 0.3 + 0.1 * i as f64).collect();
        EquivalentChannelSet::with_noise(grid, channels, noise).unwrap()
    }

    fn powers(m: usize, k: usize, seed: u64) -> RMatrix {
        RMatrix::from_fn(m, k, |i, j| ((i * 7 + j * 3 + seed as usize) % 5) as f64 * 0.2)
    }

    #[test]
    fn single_user_interference_is_noise() {
        let h = fading_matrix(1, 0, 1, 3);
        let z = interference_matrix(0, &h, &[4.0], 0.7);
        assert_eq!(z, CMatrix::identity(3, 3) * Complex64::new(0.7, 0.0));
    }

    #[test]
    fn scalar_two_user_interference() {
        let h = fading_matrix(2, 0, 2, 1);
        let z = interference_matrix(0, &h, &[1.0, 2.5], 0.1);
        let expect = h[(1, 0)].norm_sqr() * 2.5 + 0.1;
        assert!((z[(0, 0)].re - expect).abs() < 1e-15);
    }

    #[test]
    fn interference_floor_is_noise() {
        let h = fading_matrix(3, 0, 3, 4);
        for k in 0..3 {
            let z = interference_matrix(k, &h, &[0.5, 1.5, 2.0], 0.25);
            let eig = hermitian_eig(&z).unwrap();
            assert!(eig.values.iter().all(|v| *v >= 0.25 - 1e-12));
        }
    }

    #[test]
    fn whitened_gain_trivial_cases() {
        let h = fading_matrix(4, 0, 1, 3);
        let z = CMatrix::identity(3, 3) * Complex64::new(0.5, 0.0);
        assert!((whitened_gain(&h, &z).unwrap() - h.norm_squared() / 0.5).abs() < 1e-14);
        assert_eq!(whitened_gain(&CMatrix::zeros(1, 3), &z).unwrap(), 0.0);
        let bad = CMatrix::identity(3, 3) * Complex64::new(-1.0, 0.0);
        assert!(whitened_gain(&h, &bad).is_err());
    }

    #[test]
    fn whitened_gain_paths_agree() {
        for seed in 0..20 {
            let h = fading_matrix(seed, 0, 4, 5);
            let z = interference_matrix(1, &h, &[0.7, 0.0, 1.3, 2.2], 0.05);
            let row = h.rows(1, 1).into_owned();
            let direct = whitened_gain(&row, &z).unwrap();
            let (eig, _) = whitened_gain_eig(&row, &z).unwrap();
            assert!((direct - eig).abs() < 1e-10 * direct, "{direct} {eig}");
        }
    }

    #[test]
    fn gram_path_matches_interference_matrices() {
        let s = set(3, 5, 2, 2, 11);
        let p = powers(4, 3, 1);
        let fast = effective_gains(&s, &p).unwrap();
        for i in 0..4 {
            let row: Vec<f64> = (0..3).map(|k| p[(i, k)]).collect();
            for k in 0..3 {
                let z = interference_matrix(k, &s.channels[i], &row, s.noise[i]);
                let h = s.channels[i].rows(k, 1).into_owned();
                let slow = whitened_gain(&h, &z).unwrap();
                assert!((fast.get(i, k) - slow).abs() < 1e-10 * slow);
            }
        }
    }

    #[test]
    fn zero_power_has_zero_rate() {
        let s = set(2, 3, 2, 1, 0);
        assert_eq!(sum_rate(&s, &RMatrix::zeros(3, 2)).unwrap(), 0.0);
    }

    #[test]
    fn single_link_rate() {
        let s = set(1, 3, 1, 0, 5);
        let p = RMatrix::from_element(1, 1, 0.8);
        let expect = 120e3 * (1.0 + s.channels[0].norm_squared() * 0.8 / s.noise[0]).log2();
        assert!((sum_rate(&s, &p).unwrap() - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn rate_matches_full_determinant() {
        let s = set(3, 4, 2, 2, 8);
        let p = powers(4, 3, 2);
        let mut direct = 0.0;
        for i in 0..4 {
            let row: Vec<f64> = (0..3).map(|k| p[(i, k)]).collect();
            let mut a = interference_matrix(usize::MAX, &s.channels[i], &row, s.noise[i]);
            a /= Complex64::new(s.noise[i], 0.0);
            direct += s.grid.entries()[i].bandwidth * hermitian_log2_det(&a).unwrap();
        }
        let fast = sum_rate(&s, &p).unwrap();
        assert!((fast - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn rate_is_successive_decoding_sum() {
        // Chain rule: user k is decoded against users k+1.. only.
        for seed in 0..10 {
            let s = set(2, 2, 1, 1, 100 + seed);
            let p = powers(2, 2, seed);
            let mut chain = 0.0;
            for i in 0..2 {
                for k in 0..2 {
                    let later: Vec<f64> = (0..2).map(|j| if j > k { p[(i, j)] } else { 0.0 }).collect();
                    let z = interference_matrix(k, &s.channels[i], &later, s.noise[i]);
                    let h = s.channels[i].rows(k, 1).into_owned();
                    let lam = whitened_gain(&h, &z).unwrap();
                    chain += s.grid.entries()[i].bandwidth * (1.0 + lam * p[(i, k)]).log2();
                }
            }
            let r = sum_rate(&s, &p).unwrap();
            assert!((r - chain).abs() < 1e-9 * r, "{r} {chain}");
        }
    }
}
