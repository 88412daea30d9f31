//! Real spherical-harmonic analysis and synthesis on the equiangular grid.
//!
//! Basis: real orthonormal harmonics, Y_00 = 1/sqrt(4*pi), no
//! Condon-Shortley phase. Coefficients are packed per channel as
//! `idx(l, m) = l*l + l + m` with -l <= m <= l.
//!
//! Analysis combines an exact discrete Fourier projection in longitude with
//! the grid's quadrature row weights; for fields band-limited at `l_max`
//! with `2*l_max < n_lat` the analysis/synthesis round trip is exact to
//! rounding.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par;
use crate::tensor::Tensor;

/// Triangular-truncated real spherical-harmonic coefficients for a
/// multichannel field.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    l_max: usize,
    channels: usize,
    data: Vec<f64>,
}

impl HarmonicCoeffs {
    pub fn zeros(channels: usize, l_max: usize) -> Self {
        HarmonicCoeffs {
            l_max,
            channels,
            data: vec![0.0; channels * (l_max + 1) * (l_max + 1)],
        }
    }

    pub fn from_tensor(t: &Tensor, l_max: usize) -> Result<Self> {
        let per = (l_max + 1) * (l_max + 1);
        if t.shape().len() != 2 || t.shape()[1] != per {
            return Err(Error::shape(format!("(channels, {per})"), format!("{:?}", t.shape())));
        }
        Ok(HarmonicCoeffs {
            l_max,
            channels: t.shape()[0],
            data: t.data().to_vec(),
        })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs_per_channel(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    /// Packed index of (l, m); caller must keep |m| <= l <= l_max.
    pub fn idx(l: usize, m: isize) -> usize {
        (l * l) as usize + l + (m + l as isize) as usize
    }

    pub fn get(&self, channel: usize, l: usize, m: isize) -> f64 {
        self.data[channel * self.coeffs_per_channel() + Self::idx(l, m)]
    }

    pub fn set(&mut self, channel: usize, l: usize, m: isize, v: f64) {
        let per = self.coeffs_per_channel();
        self.data[channel * per + Self::idx(l, m)] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.channels, self.coeffs_per_channel()], self.data.clone())
            .expect("consistent by construction")
    }

    /// Zero all coefficients with degree above `l_keep`.
    pub fn low_pass(&mut self, l_keep: usize) {
        let per = self.coeffs_per_channel();
        for c in 0..self.channels {
            for l in (l_keep + 1)..=self.l_max {
                for m in -(l as isize)..=(l as isize) {
                    self.data[c * per + Self::idx(l, m)] = 0.0;
                }
            }
        }
    }

    /// Per-degree energy sum over orders and channels.
    pub fn degree_energy(&self) -> Vec<f64> {
        let per = self.coeffs_per_channel();
        let mut e = vec![0.0; self.l_max + 1];
        for c in 0..self.channels {
            for (l, el) in e.iter_mut().enumerate() {
                for m in -(l as isize)..=(l as isize) {
                    let v = self.data[c * per + Self::idx(l, m)];
                    *el += v * v;
                }
            }
        }
        e
    }
}

/// Precomputed tables for transforms between a fixed grid and truncation.
#[derive(Debug)]
pub struct ShtPlan {
    grid: Arc<Grid>,
    l_max: usize,
    /// Normalized Legendre values; per-m blocks of (l_max-m+1) rows x n_lat.
    plm: Vec<f64>,
    /// Block offset per order m.
    plm_off: Vec<usize>,
    /// cos(m*lon_i), sin(m*lon_i); rows m = 0..=l_max, n_lon columns.
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    /// Per-row solid angle of one cell (4*pi * area fraction).
    cell_weight: Vec<f64>,
}

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

impl ShtPlan {
    pub fn new(grid: &Arc<Grid>, l_max: usize) -> Result<Arc<ShtPlan>> {
        let bound = grid.default_l_max();
        if l_max > bound {
            return Err(Error::TruncationBound {
                l_max,
                bound,
                n_lat: grid.n_lat(),
            });
        }
        let n_lat = grid.n_lat();
        let n_lon = grid.n_lon();

        let mut plm_off = Vec::with_capacity(l_max + 2);
        let mut acc = 0;
        for m in 0..=l_max {
            plm_off.push(acc);
            acc += (l_max - m + 1) * n_lat;
        }
        plm_off.push(acc);
        let mut plm = vec![0.0; acc];
        for (j, &lat) in grid.lat_deg().iter().enumerate() {
            let x = lat.to_radians().sin();
            let s = lat.to_radians().cos();
            fill_plm_column(&mut plm, &plm_off, l_max, n_lat, j, x, s);
        }

        let mut cos_tab = vec![0.0; (l_max + 1) * n_lon];
        let mut sin_tab = vec![0.0; (l_max + 1) * n_lon];
        for m in 0..=l_max {
            for (i, &lon) in grid.lon_deg().iter().enumerate() {
                let a = m as f64 * lon.to_radians();
                cos_tab[m * n_lon + i] = a.cos();
                sin_tab[m * n_lon + i] = a.sin();
            }
        }

        let cell_weight: Vec<f64> = grid.area_weights().iter().map(|w| FOUR_PI * w).collect();

        Ok(Arc::new(ShtPlan {
            grid: Arc::clone(grid),
            l_max,
            plm,
            plm_off,
            cos_tab,
            sin_tab,
            cell_weight,
        }))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeffs_per_channel(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    fn check_field(&self, field: &Tensor) -> Result<usize> {
        let s = field.shape();
        if s.len() != 3 || s[1] != self.grid.n_lat() || s[2] != self.grid.n_lon() {
            return Err(Error::shape(
                format!("(channels, {}, {})", self.grid.n_lat(), self.grid.n_lon()),
                format!("{:?}", s),
            ));
        }
        Ok(s[0])
    }

    fn check_coeffs(&self, coeffs: &HarmonicCoeffs) -> Result<()> {
        if coeffs.l_max != self.l_max {
            return Err(Error::shape(
                format!("l_max {}", self.l_max),
                format!("l_max {}", coeffs.l_max),
            ));
        }
        Ok(())
    }

    /// Quadrature-weighted projection of a (C, n_lat, n_lon) field onto the
    /// harmonic basis.
    pub fn analysis(&self, field: &Tensor) -> Result<HarmonicCoeffs> {
        let channels = self.check_field(field)?;
        let mut out = HarmonicCoeffs::zeros(channels, self.l_max);
        self.project_kernel(field.data(), channels, out.data_mut(), true);
        Ok(out)
    }

    /// Unweighted projection: the adjoint of `synthesis` as a linear map.
    pub fn project(&self, field: &Tensor) -> Result<HarmonicCoeffs> {
        let channels = self.check_field(field)?;
        let mut out = HarmonicCoeffs::zeros(channels, self.l_max);
        self.project_kernel(field.data(), channels, out.data_mut(), false);
        Ok(out)
    }

    /// Pointwise evaluation of the truncated expansion on grid cell centers.
    pub fn synthesis(&self, coeffs: &HarmonicCoeffs) -> Result<Tensor> {
        self.check_coeffs(coeffs)?;
        let channels = coeffs.channels;
        let mut out = Tensor::zeros(&[channels, self.grid.n_lat(), self.grid.n_lon()]);
        self.synthesis_kernel(coeffs.data(), channels, out.data_mut());
        Ok(out)
    }

    /// Tensor-facing variants used by the graph engine.
    pub(crate) fn analysis_tensor(&self, field: &Tensor, weighted: bool) -> Result<Tensor> {
        let channels = self.check_field(field)?;
        let mut out = Tensor::zeros(&[channels, self.coeffs_per_channel()]);
        self.project_kernel(field.data(), channels, out.data_mut(), weighted);
        Ok(out)
    }

    pub(crate) fn synthesis_tensor(&self, coeffs: &Tensor) -> Result<Tensor> {
        let s = coeffs.shape();
        let per = self.coeffs_per_channel();
        if s.len() != 2 || s[1] != per {
            return Err(Error::shape(format!("(channels, {per})"), format!("{:?}", s)));
        }
        let channels = s[0];
        let mut out = Tensor::zeros(&[channels, self.grid.n_lat(), self.grid.n_lon()]);
        self.synthesis_kernel(coeffs.data(), channels, out.data_mut());
        Ok(out)
    }

    /// Per-cell solid-angle weights as a (1, n_lat, 1) broadcastable tensor.
    pub(crate) fn cell_weight_tensor(&self) -> Tensor {
        Tensor::new(vec![1, self.grid.n_lat(), 1], self.cell_weight.clone())
            .expect("length matches n_lat")
    }

    fn project_kernel(&self, field: &[f64], channels: usize, out: &mut [f64], weighted: bool) {
        let n_lat = self.grid.n_lat();
        let n_lon = self.grid.n_lon();
        let l = self.l_max;
        let per = (l + 1) * (l + 1);
        debug_assert_eq!(field.len(), channels * n_lat * n_lon);
        debug_assert_eq!(out.len(), channels * per);

        // Longitude stage: per (channel,row) Fourier projections up to order l.
        let mut four = vec![0.0; channels * n_lat * 2 * (l + 1)];
        {
            let cos_tab = &self.cos_tab;
            let sin_tab = &self.sin_tab;
            par::for_each_chunk_mut(&mut four, 2 * (l + 1), |cj, chunk| {
                let row = field[cj * n_lon..(cj + 1) * n_lon].iter();
                let frow = &field[cj * n_lon..(cj + 1) * n_lon];
                let _ = row;
                for m in 0..=l {
                    chunk[m] = par::det_dot(frow, &cos_tab[m * n_lon..(m + 1) * n_lon]);
                    chunk[l + 1 + m] = par::det_dot(frow, &sin_tab[m * n_lon..(m + 1) * n_lon]);
                }
            });
        }

        // Latitude stage: quadrature over rows against normalized Legendre.
        let sqrt2 = std::f64::consts::SQRT_2;
        let plm = &self.plm;
        let plm_off = &self.plm_off;
        let cw = &self.cell_weight;
        par::for_each_chunk_mut(out, per, |c, chunk| {
            for m in 0..=l {
                let block = &plm[plm_off[m]..plm_off[m + 1]];
                let scale = if m == 0 { 1.0 } else { sqrt2 };
                for dl in 0..=(l - m) {
                    let deg = m + dl;
                    let prow = &block[dl * n_lat..(dl + 1) * n_lat];
                    let mut ca = 0.0;
                    let mut cb = 0.0;
                    for j in 0..n_lat {
                        let w = if weighted { cw[j] } else { 1.0 };
                        let base = (c * n_lat + j) * 2 * (l + 1);
                        ca += w * prow[j] * four[base + m];
                        if m > 0 {
                            cb += w * prow[j] * four[base + l + 1 + m];
                        }
                    }
                    chunk[HarmonicCoeffs::idx(deg, m as isize)] = scale * ca;
                    if m > 0 {
                        chunk[HarmonicCoeffs::idx(deg, -(m as isize))] = scale * cb;
                    }
                }
            }
        });
    }

    fn synthesis_kernel(&self, coeffs: &[f64], channels: usize, out: &mut [f64]) {
        let n_lat = self.grid.n_lat();
        let n_lon = self.grid.n_lon();
        let l = self.l_max;
        let per = (l + 1) * (l + 1);
        debug_assert_eq!(coeffs.len(), channels * per);
        debug_assert_eq!(out.len(), channels * n_lat * n_lon);

        let sqrt2 = std::f64::consts::SQRT_2;
        let plm = &self.plm;
        let plm_off = &self.plm_off;
        let cos_tab = &self.cos_tab;
        let sin_tab = &self.sin_tab;
        par::for_each_chunk_mut(out, n_lat * n_lon, |c, chunk| {
            // G(m,j), H(m,j): latitude sums per order.
            let mut g = vec![0.0; (l + 1) * n_lat];
            let mut h = vec![0.0; (l + 1) * n_lat];
            let cslice = &coeffs[c * per..(c + 1) * per];
            for m in 0..=l {
                let block = &plm[plm_off[m]..plm_off[m + 1]];
                for dl in 0..=(l - m) {
                    let deg = m + dl;
                    let a = cslice[HarmonicCoeffs::idx(deg, m as isize)];
                    let b = if m > 0 {
                        cslice[HarmonicCoeffs::idx(deg, -(m as isize))]
                    } else {
                        0.0
                    };
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let prow = &block[dl * n_lat..(dl + 1) * n_lat];
                    for j in 0..n_lat {
                        g[m * n_lat + j] += a * prow[j];
                        if m > 0 {
                            h[m * n_lat + j] += b * prow[j];
                        }
                    }
                }
            }
            for j in 0..n_lat {
                let orow = &mut chunk[j * n_lon..(j + 1) * n_lon];
                for (i, o) in orow.iter_mut().enumerate() {
                    *o = g[j];
                }
                let _ = &orow;
                for m in 1..=l {
                    let gm = g[m * n_lat + j];
                    let hm = h[m * n_lat + j];
                    if gm == 0.0 && hm == 0.0 {
                        continue;
                    }
                    let crow = &cos_tab[m * n_lon..(m + 1) * n_lon];
                    let srow = &sin_tab[m * n_lon..(m + 1) * n_lon];
                    let orow = &mut chunk[j * n_lon..(j + 1) * n_lon];
                    for i in 0..n_lon {
                        orow[i] += sqrt2 * (gm * crow[i] + hm * srow[i]);
                    }
                }
            }
        });
    }
}

/// Fill one latitude column of the normalized Legendre table via the
/// standard stable three-term recurrence (no Condon-Shortley phase).
fn fill_plm_column(
    plm: &mut [f64],
    plm_off: &[usize],
    l_max: usize,
    n_lat: usize,
    j: usize,
    x: f64,
    s: f64,
) {
    let mut pmm = (1.0 / FOUR_PI).sqrt();
    for m in 0..=l_max {
        let block = plm_off[m];
        plm[block + j] = pmm; // l == m
        if m < l_max {
            let p1 = x * ((2 * m + 3) as f64).sqrt() * pmm;
            plm[block + n_lat + j] = p1; // l == m+1
            let mut pl2 = pmm;
            let mut pl1 = p1;
            for deg in (m + 2)..=l_max {
                let lf = deg as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = -(((2.0 * lf + 1.0) * ((lf - 1.0) * (lf - 1.0) - mf * mf))
                    / ((lf * lf - mf * mf) * (2.0 * lf - 3.0)))
                    .sqrt();
                let pl = a * x * pl1 + b * pl2;
                plm[block + (deg - m) * n_lat + j] = pl;
                pl2 = pl1;
                pl1 = pl;
            }
        }
        // seed for next m: P_{m+1,m+1} from P_{m,m}
        pmm *= s * ((2 * m + 3) as f64 / (2 * m + 2) as f64).sqrt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(rng: &mut ChaCha8Rng, channels: usize, l_max: usize) -> HarmonicCoeffs {
        let mut c = HarmonicCoeffs::zeros(channels, l_max);
        for v in c.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        c
    }

    #[test]
    fn constant_field_projects_to_sqrt_4pi() {
        let grid = Grid::new(32).unwrap();
        let plan = ShtPlan::new(&grid, 15).unwrap();
        let field = Tensor::full(&[1, 32, 64], 1.0);
        let c = plan.analysis(&field).unwrap();
        assert!((c.get(0, 0, 0) - FOUR_PI.sqrt()).abs() < 1e-10);
        for l in 1..=15usize {
            for m in -(l as isize)..=(l as isize) {
                assert!(c.get(0, l, m).abs() < 1e-10, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn zero_field_zero_coeffs() {
        let grid = Grid::new(16).unwrap();
        let plan = ShtPlan::new(&grid, 7).unwrap();
        let c = plan.analysis(&Tensor::zeros(&[2, 16, 32])).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_of_y00_is_constant_one() {
        let grid = Grid::new(24).unwrap();
        let plan = ShtPlan::new(&grid, 11).unwrap();
        let mut c = HarmonicCoeffs::zeros(1, 11);
        c.set(0, 0, 0, FOUR_PI.sqrt());
        let f = plan.synthesis(&c).unwrap();
        for &v in f.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_recovers_coefficients() {
        let grid = Grid::new(64).unwrap();
        let plan = ShtPlan::new(&grid, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = random_coeffs(&mut rng, 3, 21);
        let f = plan.synthesis(&c).unwrap();
        let c2 = plan.analysis(&f).unwrap();
        let err = c
            .data()
            .iter()
            .zip(c2.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max err {err}");
    }

    #[test]
    fn round_trip_is_idempotent() {
        let grid = Grid::new(32).unwrap();
        let plan = ShtPlan::new(&grid, 15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_coeffs(&mut rng, 1, 15);
        let f1 = plan.synthesis(&c).unwrap();
        let c1 = plan.analysis(&f1).unwrap();
        let f2 = plan.synthesis(&c1).unwrap();
        let err = f1
            .data()
            .iter()
            .zip(f2.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn parseval_energy_matches_quadrature_integral() {
        let grid = Grid::new(48).unwrap();
        let plan = ShtPlan::new(&grid, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_coeffs(&mut rng, 1, 20);
        let f = plan.synthesis(&c).unwrap();
        let coeff_energy: f64 = c.data().iter().map(|v| v * v).sum();
        let mut quad = 0.0;
        for (j, row) in f.data().chunks(grid.n_lon()).enumerate() {
            quad += FOUR_PI * grid.area_weights()[j] * row.iter().map(|v| v * v).sum::<f64>();
        }
        assert!(
            (coeff_energy - quad).abs() / quad.abs() < 1e-8,
            "parseval {coeff_energy} vs {quad}"
        );
    }

    #[test]
    fn longitude_shift_commutes() {
        let grid = Grid::new(32).unwrap();
        let plan = ShtPlan::new(&grid, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_coeffs(&mut rng, 1, 12);
        let f = plan.synthesis(&c).unwrap();
        let n_lon = grid.n_lon();
        let k = 9;
        let shifted = Tensor::from_fn(&[1, 32, n_lon], |i| {
            let (j, col) = (i / n_lon, i % n_lon);
            f.data()[j * n_lon + (col + n_lon - k) % n_lon]
        });
        let round = plan.synthesis(&plan.analysis(&shifted).unwrap()).unwrap();
        let err = round
            .data()
            .iter()
            .zip(shifted.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "shift round trip err {err}");
    }

    #[test]
    fn truncation_bound_enforced() {
        let grid = Grid::new(32).unwrap();
        assert!(ShtPlan::new(&grid, 21).is_ok());
        assert!(matches!(
            ShtPlan::new(&grid, 22),
            Err(Error::TruncationBound { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let grid = Grid::new(16).unwrap();
        let plan = ShtPlan::new(&grid, 7).unwrap();
        assert!(plan.analysis(&Tensor::zeros(&[1, 16, 30])).is_err());
    }

    #[test]
    fn project_is_adjoint_of_synthesis() {
        let grid = Grid::new(16).unwrap();
        let plan = ShtPlan::new(&grid, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_coeffs(&mut rng, 1, 7);
        let f = Tensor::from_fn(&[1, 16, 32], |_| rng.gen_range(-1.0..1.0));
        // <S c, f> == <c, S^T f>
        let sc = plan.synthesis(&c).unwrap();
        let stf = plan.project(&f).unwrap();
        let lhs: f64 = sc.data().iter().zip(f.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = c.data().iter().zip(stf.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
