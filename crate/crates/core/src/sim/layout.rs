//! Hexagonal multi-site layout with wrap-around and uniform UE drops.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{LayoutConfig, RadioConfig};
use crate::channel::{db_to_linear, linear_to_db, sample_rayleigh, LinkBudget};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeDrop {
    pub cell: usize,
    pub position: [f64; 2],
    /// Wrapped distance to the serving site, clamped to the minimum.
    pub distance_m: f64,
    pub link: LinkBudget,
    /// Large-scale SINR (noise plus other sites at full power), dB.
    pub sinr_db: f64,
    /// Rayleigh fading coefficient towards the serving site.
    pub fading: Complex64,
}

impl UeDrop {
    pub fn mean_sinr(&self) -> f64 {
        db_to_linear(self.sinr_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    config: LayoutConfig,
    radio: RadioConfig,
    sites: Vec<[f64; 2]>,
    shifts: Vec<[f64; 2]>,
}

fn dir(deg: f64) -> [f64; 2] {
    let r = deg.to_radians();
    [r.cos(), r.sin()]
}

impl Layout {
    pub fn new(config: &LayoutConfig, radio: &RadioConfig) -> Result<Self> {
        let isd = config.isd_m;
        if !(isd > 0.0) || !(config.min_distance_m > 0.0) {
            return Err(Error::UnsupportedGeometry("distances must be positive".into()));
        }
        let mut sites = vec![[0.0, 0.0]];
        match config.sites {
            1 => {}
            7 => sites.extend((0..6).map(|k| dir(60.0 * k as f64).map(|c| c * isd))),
            n => return Err(Error::UnsupportedGeometry(format!("{n} sites; supported are 1 and 7"))),
        }
        let mut shifts = vec![[0.0, 0.0]];
        if config.wrap && config.sites == 7 {
            // the 7-cell cluster tiles the plane along 2·a1 + a2 and its rotations
            let base = [2.5 * isd, 3f64.sqrt() / 2.0 * isd];
            for k in 0..6 {
                let [c, s] = dir(60.0 * k as f64);
                shifts.push([base[0] * c - base[1] * s, base[0] * s + base[1] * c]);
            }
        }
        Ok(Layout { config: config.clone(), radio: radio.clone(), sites, shifts })
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    /// Hexagon circumradius.
    pub fn cell_radius(&self) -> f64 {
        self.config.isd_m / 3f64.sqrt()
    }

    /// Distance to `site`, minimized over wrap-around images.
    pub fn distance(&self, p: [f64; 2], site: usize) -> f64 {
        let s = self.sites[site];
        self.shifts
            .iter()
            .map(|d| ((p[0] - s[0] - d[0]).powi(2) + (p[1] - s[1] - d[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    fn inside_hexagon(&self, p: [f64; 2]) -> bool {
        let half = self.config.isd_m / 2.0;
        (0..6).all(|k| {
            let u = dir(60.0 * k as f64);
            p[0] * u[0] + p[1] * u[1] <= half
        })
    }

    fn link(&self, d_m: f64) -> Result<LinkBudget> {
        let r = &self.radio;
        LinkBudget::new(r.tx_power_dbm, r.noise_density_dbm_hz, r.bandwidth_hz, r.noise_figure_db, d_m / 1000.0)
    }

    /// Drops `count` UEs uniformly in `cell`'s hexagon.
    pub fn drop_in_cell<R: Rng + ?Sized>(&self, cell: usize, count: usize, rng: &mut R) -> Result<Vec<UeDrop>> {
        if cell >= self.sites.len() {
            return Err(Error::UnsupportedGeometry(format!("cell {cell} of {}", self.sites.len())));
        }
        let (half_w, half_h) = (self.config.isd_m / 2.0, self.cell_radius());
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let local = [rng.random_range(-half_w..=half_w), rng.random_range(-half_h..=half_h)];
            if !self.inside_hexagon(local) {
                continue;
            }
            let s = self.sites[cell];
            let position = [s[0] + local[0], s[1] + local[1]];
            out.push(self.ue_at(cell, position, rng)?);
        }
        Ok(out)
    }

    fn ue_at<R: Rng + ?Sized>(&self, cell: usize, position: [f64; 2], rng: &mut R) -> Result<UeDrop> {
        let clamp = |d: f64| d.max(self.config.min_distance_m);
        let distance_m = clamp(self.distance(position, cell));
        let link = self.link(distance_m)?;
        let mut denom_mw = db_to_linear(link.noise_dbm());
        if self.config.interference {
            for other in (0..self.sites.len()).filter(|&s| s != cell) {
                denom_mw += db_to_linear(self.link(clamp(self.distance(position, other)))?.rx_power_dbm());
            }
        }
        let sinr_db = link.rx_power_dbm() - linear_to_db(denom_mw);
        Ok(UeDrop { cell, position, distance_m, link, sinr_db, fading: sample_rayleigh(rng) })
    }
}

/// Drops `ues_per_cell` UEs in every cell, cell by cell.
pub fn drop_cells<R: Rng + ?Sized>(layout: &LayoutConfig, radio: &RadioConfig, rng: &mut R) -> Result<Vec<UeDrop>> {
    let geo = Layout::new(layout, radio)?;
    let mut out = Vec::with_capacity(layout.sites * layout.ues_per_cell);
    for cell in 0..geo.sites().len() {
        out.extend(geo.drop_in_cell(cell, layout.ues_per_cell, rng)?);
    }
    Ok(out)
}
