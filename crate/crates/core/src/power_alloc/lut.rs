//! SNR-indexed table of optimized CPACs and their prime quantizations.
//!
//! On disk a table is a flat little-endian binary file plus a JSON sidecar
//! (same stem, `.json`) describing the grid and record layout.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{optimize_cpacs, GridSpec};
use crate::constellation::LegacyConstellation;
use crate::superposition::{quantize_cpacs, CpacSet, PrimeCpacSet, QUANTIZE_BUDGET};
use crate::{Error, Result};

pub const LUT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SMUSTLUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutCell {
    pub cpacs: CpacSet,
    pub primes: PrimeCpacSet,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LutGrid {
    axes: Vec<Vec<f64>>,
    constellations: Vec<LegacyConstellation>,
    power: f64,
    cells: Vec<LutCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    users: usize,
    constellations: Vec<String>,
    power: f64,
    axes_db: Vec<Vec<f64>>,
    cells: usize,
    /// Per cell: alpha[L], beta[L], objective as f64; q[L], p[L] as u64.
    record_bytes: usize,
}

fn check_axis(axis: &[f64]) -> Result<()> {
    if axis.is_empty() || axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("LUT axis {axis:?} must be finite and strictly increasing")));
    }
    Ok(())
}

/// `start, start + step, ..., stop` (inclusive up to rounding).
pub fn snr_axis(start_db: f64, stop_db: f64, step_db: f64) -> Result<Vec<f64>> {
    if !(step_db > 0.0) || stop_db < start_db {
        return Err(Error::InvalidInput(format!("bad SNR range {start_db}..{stop_db} step {step_db}")));
    }
    let n = ((stop_db - start_db) / step_db + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start_db + k as f64 * step_db).collect())
}

impl LutGrid {
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn constellations(&self) -> &[LegacyConstellation] {
        &self.constellations
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn cells(&self) -> &[LutCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Row-major index (user 0 most significant).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.shape()).fold(0, |acc, (&i, n)| acc * n + i)
    }

    pub fn grid_index(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for (slot, &n) in shape.iter().enumerate().rev() {
            idx[slot] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn cell(&self, idx: &[usize]) -> &LutCell {
        &self.cells[self.flat_index(idx)]
    }

    /// Grid index of the nearest cell; out-of-range queries clamp to the edge
    /// and exact midpoints go to the lower index.
    pub fn nearest_index(&self, snr_db: &[f64]) -> Result<Vec<usize>> {
        if self.cells.is_empty() {
            return Err(Error::EmptyLut);
        }
        if snr_db.len() != self.axes.len() {
            return Err(Error::InvalidInput(format!(
                "{} SNR values for a {}-user table",
                snr_db.len(),
                self.axes.len()
            )));
        }
        Ok(snr_db
            .iter()
            .zip(&self.axes)
            .map(|(&s, axis)| {
                let mut best = 0;
                for (k, &v) in axis.iter().enumerate() {
                    if (s - v).abs() < (s - axis[best]).abs() {
                        best = k;
                    }
                }
                best
            })
            .collect())
    }

    pub fn lookup(&self, snr_db: &[f64]) -> Result<(CpacSet, PrimeCpacSet)> {
        let cell = self.cell(&self.nearest_index(snr_db)?);
        Ok((cell.cpacs.clone(), cell.primes.clone()))
    }

    /// Multilinear interpolation of the per-component powers `α²`, `β²`
    /// between the surrounding cells (clamped at the edges). The total power
    /// stays within the budget; primes come from the nearest cell.
    pub fn lookup_interpolated(&self, snr_db: &[f64]) -> Result<(CpacSet, PrimeCpacSet)> {
        let nearest = self.nearest_index(snr_db)?;
        let brackets: Vec<(usize, f64)> = snr_db
            .iter()
            .zip(&self.axes)
            .map(|(&s, axis)| {
                let k = axis.partition_point(|&v| v <= s).clamp(1, axis.len().max(2) - 1) - 1;
                if axis.len() == 1 {
                    return (0, 0.0);
                }
                let t = ((s - axis[k]) / (axis[k + 1] - axis[k])).clamp(0.0, 1.0);
                (k, if t.is_nan() { 0.0 } else { t })
            })
            .collect();
        let l = self.constellations.len();
        let mut pa = vec![0.0; l];
        let mut pb = vec![0.0; l];
        for corner in 0..1usize << brackets.len() {
            let mut weight = 1.0;
            let idx: Vec<usize> = brackets
                .iter()
                .enumerate()
                .map(|(d, &(k, t))| {
                    let up = corner >> d & 1 == 1;
                    weight *= if up { t } else { 1.0 - t };
                    if up && k + 1 < self.axes[d].len() {
                        k + 1
                    } else {
                        k
                    }
                })
                .collect();
            if weight == 0.0 {
                continue;
            }
            let c = &self.cell(&idx).cpacs;
            for u in 0..l {
                pa[u] += weight * c.alpha()[u].powi(2);
                pb[u] += weight * c.beta()[u].powi(2);
            }
        }
        let total: f64 = pa.iter().chain(&pb).sum();
        let shrink = if total > self.power { self.power / total } else { 1.0 };
        let cpacs = CpacSet::new(
            pa.iter().map(|p| (p * shrink).sqrt()).collect(),
            pb.iter().map(|p| (p * shrink).sqrt()).collect(),
            self.power,
        )?;
        Ok((cpacs, self.cell(&nearest).primes.clone()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let l = self.axes.len();
        let mut out = Vec::with_capacity(16 + self.cells.len() * record_bytes(l));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&LUT_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.cells.len() as u32).to_le_bytes());
        for c in &self.cells {
            for v in c.cpacs.alpha().iter().chain(c.cpacs.beta()).chain([&c.objective]) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in c.primes.q().iter().chain(c.primes.p()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn sidecar(&self) -> Sidecar {
        Sidecar {
            format_version: LUT_FORMAT_VERSION,
            users: self.axes.len(),
            constellations: self.constellations.iter().map(LegacyConstellation::name).collect(),
            power: self.power,
            axes_db: self.axes.clone(),
            cells: self.cells.len(),
            record_bytes: record_bytes(self.axes.len()),
        }
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes `path` (binary) and its `.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| Error::Format { context: "LUT sidecar".into(), message: e.to_string() })?;
        fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = Self::sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::Format { context: side.display().to_string(), message: e.to_string() })?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_parts(meta, &bytes, path)
    }

    fn from_parts(meta: Sidecar, bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format { context: path.display().to_string(), message };
        if meta.format_version != LUT_FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", meta.format_version)));
        }
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing LUT header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        let count = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let l = meta.users;
        let rec = record_bytes(l);
        if version != LUT_FORMAT_VERSION || count != meta.cells || bytes.len() != 16 + count * rec {
            return Err(bad(format!("header/sidecar mismatch: version {version}, {count} cells")));
        }
        for axis in &meta.axes_db {
            check_axis(axis)?;
        }
        if meta.axes_db.len() != l || meta.axes_db.iter().map(Vec::len).product::<usize>() != count {
            return Err(bad("grid axes do not match the cell count".into()));
        }
        let constellations =
            meta.constellations.iter().map(|n| LegacyConstellation::from_name(n)).collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(count);
        for chunk in bytes[16..].chunks_exact(rec) {
            let f = |k: usize| f64::from_le_bytes(chunk[8 * k..8 * k + 8].try_into().expect("8 bytes"));
            let u = |k: usize| u64::from_le_bytes(chunk[8 * k..8 * k + 8].try_into().expect("8 bytes"));
            let alpha = (0..l).map(f).collect();
            let beta = (l..2 * l).map(f).collect();
            let objective = f(2 * l);
            let q = (2 * l + 1..3 * l + 1).map(u).collect();
            let p = (3 * l + 1..4 * l + 1).map(u).collect();
            cells.push(LutCell {
                cpacs: CpacSet::new(alpha, beta, meta.power)?,
                primes: PrimeCpacSet::new(q, p)?,
                objective,
            });
        }
        Ok(LutGrid { axes: meta.axes_db, constellations, power: meta.power, cells })
    }
}

fn record_bytes(users: usize) -> usize {
    8 * (4 * users + 1)
}

/// Optimizes every cell of the grid (in parallel) and quantizes it. Cells
/// whose quantization fails borrow the primes of the nearest cell that
/// succeeded.
pub fn build_lut(
    axes_db: Vec<Vec<f64>>,
    constellations: &[LegacyConstellation],
    power: f64,
    grid: &GridSpec,
) -> Result<LutGrid> {
    if axes_db.len() != constellations.len() || axes_db.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} grid axes for {} users",
            axes_db.len(),
            constellations.len()
        )));
    }
    for axis in &axes_db {
        check_axis(axis)?;
    }
    let mut lut = LutGrid { axes: axes_db, constellations: constellations.to_vec(), power, cells: Vec::new() };
    let total: usize = lut.shape().iter().product();
    let solved: Vec<(CpacSet, f64, Option<PrimeCpacSet>)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let idx = lut.grid_index(flat);
            let snr: Vec<f64> =
                idx.iter().zip(&lut.axes).map(|(&i, a)| crate::channel::db_to_linear(a[i])).collect();
            let opt = optimize_cpacs(&snr, constellations, power, grid)?;
            let primes = match quantize_cpacs(&opt.cpacs, constellations, QUANTIZE_BUDGET) {
                Ok(p) => Some(p),
                Err(Error::QuantizationFailed { budget }) => {
                    log::warn!("cell {idx:?}: no coprime set within budget {budget}");
                    None
                }
                Err(e) => return Err(e),
            };
            Ok((opt.cpacs, opt.objective, primes))
        })
        .collect::<Result<_>>()?;
    let fallback = |flat: usize| -> Result<PrimeCpacSet> {
        let here = lut.grid_index(flat);
        solved
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.2.as_ref().map(|p| (k, p)))
            .min_by_key(|(k, _)| {
                let there = lut.grid_index(*k);
                here.iter().zip(&there).map(|(&a, &b)| a.abs_diff(b).pow(2)).sum::<usize>()
            })
            .map(|(_, p)| p.clone())
            .ok_or(Error::QuantizationFailed { budget: QUANTIZE_BUDGET })
    };
    let mut cells = Vec::with_capacity(total);
    for (flat, (cpacs, objective, primes)) in solved.iter().enumerate() {
        let primes = match primes {
            Some(p) => p.clone(),
            None => fallback(flat)?,
        };
        cells.push(LutCell { cpacs: cpacs.clone(), primes, objective: *objective });
    }
    lut.cells = cells;
    Ok(lut)
}
