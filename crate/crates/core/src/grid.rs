//! Cell-centered equiangular lat-lon grid with exact-quadrature area weights.
//!
//! Latitude rows sit at `90 - (j+0.5)*180/n_lat` degrees, so there are no
//! pole rows and the row count is even-friendly. Per-row weights are solved
//! from the linear system requiring exact integration of all Legendre
//! polynomials up to degree `n_lat - 1` on the fixed row latitudes; this
//! makes spherical-harmonic round trips exact (to rounding) whenever
//! `2*l_max < n_lat`.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_lat: usize,
    n_lon: usize,
    lat_deg: Vec<f64>,
    lon_deg: Vec<f64>,
    /// Per-row cell area as a fraction of the sphere; sum over all cells is 1.
    area_weights: Vec<f64>,
}

impl Grid {
    /// Build an `n_lat x 2*n_lat` grid with quadrature-exact row weights.
    pub fn new(n_lat: usize) -> Result<Arc<Grid>> {
        if n_lat < 2 {
            return Err(Error::Config(format!("n_lat must be >= 2, got {n_lat}")));
        }
        let n_lon = 2 * n_lat;
        let lat_deg: Vec<f64> = (0..n_lat)
            .map(|j| 90.0 - (j as f64 + 0.5) * 180.0 / n_lat as f64)
            .collect();
        let lon_deg: Vec<f64> = (0..n_lon)
            .map(|i| (i as f64 + 0.5) * 360.0 / n_lon as f64)
            .collect();
        let x: Vec<f64> = (0..n_lat)
            .map(|j| ((j as f64 + 0.5) * std::f64::consts::PI / n_lat as f64).cos())
            .collect();

        // Solve sum_j w_j P_l(x_j) = 2*delta_{l0} for l = 0..n_lat-1.
        let mut a = vec![0.0; n_lat * n_lat];
        for (j, &xj) in x.iter().enumerate() {
            let mut pm1 = 1.0; // P_0
            let mut p = xj; // P_1
            a[j] = 1.0;
            if n_lat > 1 {
                a[n_lat + j] = xj;
            }
            for l in 2..n_lat {
                let pn = ((2 * l - 1) as f64 * xj * p - (l - 1) as f64 * pm1) / l as f64;
                a[l * n_lat + j] = pn;
                pm1 = p;
                p = pn;
            }
        }
        let mut rhs = vec![0.0; n_lat];
        rhs[0] = 2.0;
        let mut w = solve_dense(&mut a, &mut rhs, n_lat)?;

        // Symmetrize about the equator and normalize the total cell area to 1.
        for j in 0..n_lat / 2 {
            let m = 0.5 * (w[j] + w[n_lat - 1 - j]);
            w[j] = m;
            w[n_lat - 1 - j] = m;
        }
        let total: f64 = w.iter().sum::<f64>() * n_lon as f64 / 2.0;
        let area_weights: Vec<f64> = w.iter().map(|v| v / (2.0 * total)).collect();
        if area_weights.iter().any(|&v| v <= 0.0) {
            return Err(Error::Config(format!(
                "quadrature weights not strictly positive for n_lat={n_lat}"
            )));
        }

        Ok(Arc::new(Grid {
            n_lat,
            n_lon,
            lat_deg,
            lon_deg,
            area_weights,
        }))
    }

    /// Half-resolution grid whose cell areas are the pooled fine-cell areas,
    /// so area-weighted pooling preserves global means exactly.
    pub fn coarsen(&self) -> Result<Arc<Grid>> {
        if self.n_lat % 2 != 0 || self.n_lat < 4 {
            return Err(Error::OddDimensions {
                n_lat: self.n_lat,
                n_lon: self.n_lon,
            });
        }
        let n_lat = self.n_lat / 2;
        let n_lon = 2 * n_lat;
        let lat_deg: Vec<f64> = (0..n_lat)
            .map(|j| 90.0 - (j as f64 + 0.5) * 180.0 / n_lat as f64)
            .collect();
        let lon_deg: Vec<f64> = (0..n_lon)
            .map(|i| (i as f64 + 0.5) * 360.0 / n_lon as f64)
            .collect();
        let area_weights: Vec<f64> = (0..n_lat)
            .map(|j| 2.0 * (self.area_weights[2 * j] + self.area_weights[2 * j + 1]))
            .collect();
        Ok(Arc::new(Grid {
            n_lat,
            n_lon,
            lat_deg,
            lon_deg,
            area_weights,
        }))
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub fn cells(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn lat_deg(&self) -> &[f64] {
        &self.lat_deg
    }

    pub fn lon_deg(&self) -> &[f64] {
        &self.lon_deg
    }

    /// Per-row cell area fraction; `sum_rows n_lon * w_row == 1`.
    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    /// Default triangular truncation: floor(2/3 * n_lat).
    pub fn default_l_max(&self) -> usize {
        2 * self.n_lat / 3
    }

    /// Largest truncation with an exact analysis/synthesis round trip.
    pub fn exact_l_max(&self) -> usize {
        (self.n_lat - 1) / 2
    }

    /// Area-weighted global mean of a single-channel field (n_lat*n_lon values).
    pub fn mean(&self, field: &[f64]) -> f64 {
        debug_assert_eq!(field.len(), self.cells());
        let mut acc = 0.0;
        for (j, row) in field.chunks(self.n_lon).enumerate() {
            acc += self.area_weights[j] * row.iter().sum::<f64>();
        }
        acc
    }

    /// Great-circle distance in degrees between two cells.
    pub fn distance_deg(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let (la, fa) = (self.lat_deg[a.0].to_radians(), self.lon_deg[a.1].to_radians());
        let (lb, fb) = (self.lat_deg[b.0].to_radians(), self.lon_deg[b.1].to_radians());
        let s = la.sin() * lb.sin() + la.cos() * lb.cos() * (fa - fb).cos();
        s.clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// Gaussian elimination with partial pivoting on a dense n x n system stored
/// row-major in `a`; overwrites both buffers.
fn solve_dense(a: &mut [f64], rhs: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Config("singular quadrature system".into()));
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            rhs.swap(col, pivot);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= a[r * n + c] * x[c];
        }
        x[r] = acc / a[r * n + r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lat_centers_match_formula() {
        let g = Grid::new(8).unwrap();
        assert!((g.lat_deg()[0] - (90.0 - 0.5 * 22.5)).abs() < 1e-12);
        assert!((g.lat_deg()[7] + (90.0 - 0.5 * 22.5)).abs() < 1e-12);
    }

    #[test]
    fn weights_positive_symmetric_normalized() {
        for n in [2usize, 8, 32, 64] {
            let g = Grid::new(n).unwrap();
            let w = g.area_weights();
            assert!(w.iter().all(|&v| v > 0.0), "n_lat={n}");
            for j in 0..n / 2 {
                assert_eq!(w[j], w[n - 1 - j], "n_lat={n} row {j}");
            }
            let total: f64 = w.iter().sum::<f64>() * g.n_lon() as f64;
            assert!((total - 1.0).abs() < 1e-13, "n_lat={n} total={total}");
        }
    }

    #[test]
    fn quadrature_integrates_legendre_exactly() {
        let n = 32;
        let g = Grid::new(n).unwrap();
        // integral over sphere of P_l(sin lat) must be 4*pi*delta_{l0};
        // in cell-fraction weights that is exactly delta_{l0}.
        for l in 0..n {
            let mut acc = 0.0;
            for (j, &lat) in g.lat_deg().iter().enumerate() {
                let x = lat.to_radians().sin();
                let mut pm1 = 1.0;
                let mut p = x;
                let pl = match l {
                    0 => 1.0,
                    1 => x,
                    _ => {
                        let mut pn = 0.0;
                        for k in 2..=l {
                            pn = ((2 * k - 1) as f64 * x * p - (k - 1) as f64 * pm1) / k as f64;
                            pm1 = p;
                            p = pn;
                        }
                        pn
                    }
                };
                acc += g.area_weights()[j] * g.n_lon() as f64 * pl;
            }
            let expect = if l == 0 { 1.0 } else { 0.0 };
            assert!((acc - expect).abs() < 1e-11, "l={l} acc={acc}");
        }
    }

    #[test]
    fn coarsen_pools_areas() {
        let g = Grid::new(16).unwrap();
        let c = g.coarsen().unwrap();
        assert_eq!(c.n_lat(), 8);
        let total: f64 = c.area_weights().iter().sum::<f64>() * c.n_lon() as f64;
        assert!((total - 1.0).abs() < 1e-13);
        assert!((c.area_weights()[0] - 2.0 * (g.area_weights()[0] + g.area_weights()[1])).abs() < 1e-18);
    }

    #[test]
    fn distance_wraps_longitude() {
        let g = Grid::new(8).unwrap();
        let d_near = g.distance_deg((4, 0), (4, 15));
        let d_far = g.distance_deg((4, 0), (4, 8));
        assert!(d_near < d_far);
    }
}
