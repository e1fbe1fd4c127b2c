use super::{estimate_t_from, MonteCarloError, TEstimate};
use crate::engine::{EngineConfig, EngineError, RootRecord};
use crate::measure::{LambdaMeasure, MeasureSpec};
use crate::par::{map_indices, Execution};
use crate::poly::Polynomial;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;

/// Largest allowed grid side.
pub const MAX_RESOLUTION: usize = 2048;

const LIGHTNESS_LEVELS: usize = 16;
const MAX_HUES: usize = 15;
const ESCAPE_INDEX: u8 = 0;
const UNRESOLVED_INDEX: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Keep full per-root probabilities for every cell.
    #[serde(default)]
    pub full: bool,
}

impl BasinSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self { re_min: -half_width, re_max: half_width, im_min: -half_width, im_max: half_width, nx: n, ny: n, full: false }
    }

    /// Center of cell `(col, row)`; row 0 is the top (largest imaginary part).
    pub fn cell_center(&self, col: usize, row: usize) -> Complex64 {
        let dx = (self.re_max - self.re_min) / self.nx as f64;
        let dy = (self.im_max - self.im_min) / self.ny as f64;
        Complex64::new(self.re_min + (col as f64 + 0.5) * dx, self.im_max - (row as f64 + 0.5) * dy)
    }

    fn validate(&self) -> Result<(), MonteCarloError> {
        if self.nx == 0 || self.ny == 0 || self.nx > MAX_RESOLUTION || self.ny > MAX_RESOLUTION {
            return Err(MonteCarloError::InvalidArgument(format!(
                "resolution {}x{} must be between 1 and {MAX_RESOLUTION} per side",
                self.nx, self.ny
            )));
        }
        if !(self.re_min < self.re_max && self.im_min < self.im_max)
            || ![self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite())
        {
            return Err(MonteCarloError::InvalidArgument("bounds must be finite with min < max".into()));
        }
        Ok(())
    }
}

/// Reduced outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub argmax_root: Option<usize>,
    pub argmax_prob: f64,
    pub escape_prob: f64,
    pub unresolved_prob: f64,
    pub critical_prob: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_root: Option<Vec<f64>>,
}

impl BasinCell {
    fn reduce(t: &TEstimate, full: bool) -> Self {
        let (argmax_root, argmax_prob) = match t.argmax_root() {
            Some((i, p)) => (Some(i), p),
            None => (None, 0.0),
        };
        Self {
            argmax_root,
            argmax_prob,
            escape_prob: t.escape.p,
            unresolved_prob: t.unresolved.p,
            critical_prob: t.critical_hit.p,
            per_root: full.then(|| t.per_root.iter().map(|p| p.p).collect()),
        }
    }
}

/// Convergence probabilities on a rectangular grid, cells row-major from the top row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub spec: BasinSpec,
    pub runs_per_cell: u64,
    pub roots: Vec<Complex64>,
    pub measure: MeasureSpec,
    /// SHA-256 of the coefficient list as JSON.
    pub poly_hash: String,
    pub cells: Vec<BasinCell>,
}

pub fn polynomial_hash(g: &Polynomial) -> String {
    let json = serde_json::to_vec(g).expect("polynomial serializes");
    hex::encode(Sha256::digest(json))
}

/// Estimates `T_{x,τ}` at every cell center. Cell `k` uses run indices
/// `k·runs_per_cell .. (k+1)·runs_per_cell`.
pub fn render_basin(
    g: &Polynomial,
    measure: &LambdaMeasure,
    roots: &[RootRecord],
    spec: &BasinSpec,
    runs_per_cell: u64,
    cfg: &EngineConfig,
) -> Result<BasinGrid, MonteCarloError> {
    spec.validate()?;
    if runs_per_cell == 0 {
        return Err(MonteCarloError::InvalidArgument("runs_per_cell must be at least 1".into()));
    }
    cfg.validate_for(g)?;
    measure.require_relaxation_disk().map_err(EngineError::from)?;
    let inner = EngineConfig { execution: Execution::Sequential, ..cfg.clone() };
    let n_cells = (spec.nx * spec.ny) as u64;
    let cells = map_indices(n_cells, cfg.execution, |k| {
        let (row, col) = ((k as usize) / spec.nx, (k as usize) % spec.nx);
        let z = spec.cell_center(col, row);
        estimate_t_from(g, measure, z, roots, k * runs_per_cell, runs_per_cell, &inner).map(|t| BasinCell::reduce(&t, spec.full))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(BasinGrid {
        spec: *spec,
        runs_per_cell,
        roots: roots.iter().map(|r| r.value).collect(),
        measure: measure.to_spec(),
        poly_hash: polynomial_hash(g),
        cells,
    })
}

impl BasinGrid {
    pub fn cell(&self, col: usize, row: usize) -> &BasinCell {
        &self.cells[row * self.spec.nx + col]
    }

    /// CSV with columns `x, y, argmax_root_index, argmax_prob, escape_prob,
    /// unresolved_prob`, plus `p_root_k` columns when full probabilities are
    /// kept. A cell with no converged run has argmax index −1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let full = self.cells.first().is_some_and(|c| c.per_root.is_some());
        write!(w, "x,y,argmax_root_index,argmax_prob,escape_prob,unresolved_prob")?;
        if full {
            for k in 0..self.roots.len() {
                write!(w, ",p_root_{k}")?;
            }
        }
        writeln!(w)?;
        for row in 0..self.spec.ny {
            for col in 0..self.spec.nx {
                let z = self.spec.cell_center(col, row);
                let c = self.cell(col, row);
                let idx = c.argmax_root.map_or(-1, |i| i as i64);
                write!(w, "{},{},{idx},{},{},{}", z.re, z.im, c.argmax_prob, c.escape_prob, c.unresolved_prob)?;
                if let Some(p) = &c.per_root {
                    for v in p {
                        write!(w, ",{v}")?;
                    }
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    fn palette(&self) -> Vec<u8> {
        let hues = self.roots.len().clamp(1, MAX_HUES);
        let mut pal = vec![0, 0, 0, 128, 128, 128];
        for h in 0..hues {
            for level in 0..LIGHTNESS_LEVELS {
                let lightness = 0.15 + 0.6 * level as f64 / (LIGHTNESS_LEVELS - 1) as f64;
                pal.extend(hsl_to_rgb(h as f64 / hues as f64, 0.85, lightness));
            }
        }
        pal
    }

    fn color_index(&self, c: &BasinCell) -> u8 {
        let root_mass = c.argmax_prob;
        if c.escape_prob >= root_mass && c.escape_prob >= c.unresolved_prob {
            return ESCAPE_INDEX;
        }
        match c.argmax_root {
            Some(i) if root_mass >= c.unresolved_prob => {
                let hue = i % self.roots.len().clamp(1, MAX_HUES);
                let level = (root_mass * (LIGHTNESS_LEVELS - 1) as f64).round() as usize;
                (2 + hue * LIGHTNESS_LEVELS + level) as u8
            }
            _ => UNRESOLVED_INDEX,
        }
    }

    /// 8-bit indexed PNG, one pixel per cell, top row = largest imaginary part.
    /// Escape is black, unresolved grey, and each root has its own hue whose
    /// lightness grows with the probability of converging there.
    pub fn write_png<W: Write>(&self, w: W) -> Result<(), MonteCarloError> {
        let mut enc = png::Encoder::new(w, self.spec.nx as u32, self.spec.ny as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(self.palette());
        let mut writer = enc.write_header().map_err(png_err)?;
        let data: Vec<u8> = self.cells.iter().map(|c| self.color_index(c)).collect();
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
        Ok(())
    }
}

fn png_err(e: png::EncodingError) -> MonteCarloError {
    match e {
        png::EncodingError::IoError(io) => MonteCarloError::Io(io),
        other => MonteCarloError::Io(std::io::Error::other(other.to_string())),
    }
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h * 6.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    [r, g, b].map(|v| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{deterministic_newton, OrbitStatus};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z2m1() -> (Polynomial, Vec<RootRecord>) {
        let g = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let roots = vec![RootRecord::on(&g, c(-1.0, 0.0), 1e-10), RootRecord::on(&g, c(1.0, 0.0), 1e-10)];
        (g, roots)
    }

    #[test]
    fn halves_and_mirror_symmetry() {
        let (g, roots) = z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 5).unwrap();
        let spec = BasinSpec { full: true, ..BasinSpec::square(2.0, 64) };
        let grid = render_basin(&g, &tau, &roots, &spec, 20, &EngineConfig::default()).unwrap();
        let (mut left, mut right, mut off, mut compared) = (0, 0, 0, 0);
        for row in 0..64 {
            for col in 0..64 {
                let cell = grid.cell(col, row);
                let p = cell.per_root.as_ref().unwrap();
                if col < 32 && cell.argmax_root == Some(0) {
                    left += 1;
                }
                if col >= 32 && cell.argmax_root == Some(1) {
                    right += 1;
                }
                // z ↦ −z swaps the roots
                let mirror = grid.cell(63 - col, 63 - row).per_root.as_ref().unwrap();
                let pooled = (p[0] + mirror[1]) / 2.0;
                let se = (2.0 * pooled * (1.0 - pooled) / 20.0).sqrt();
                if (p[0] - mirror[1]).abs() > 3.0 * se + 1e-12 {
                    off += 1;
                }
                compared += 1;
            }
        }
        assert!(left as f64 > 0.95 * 32.0 * 64.0, "{left}");
        assert!(right as f64 > 0.95 * 32.0 * 64.0, "{right}");
        assert!((off as f64) < 0.02 * compared as f64, "{off} of {compared}");
        let axis = grid.cell(32, 10).per_root.as_ref().unwrap().clone();
        assert!(axis[0] > 0.0 && axis[1] > 0.0, "{axis:?}");
        for cell in &grid.cells {
            for v in [cell.argmax_prob, cell.escape_prob, cell.unresolved_prob, cell.critical_prob] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn deterministic_trap_region_is_unresolved() {
        let g = Polynomial::from_real(&[2.0, -2.0, 0.0, 1.0]).unwrap();
        let tau = LambdaMeasure::point_mass(c(1.0, 0.0), 0);
        let roots = crate::engine::find_all_roots(&g, &LambdaMeasure::uniform_disk(0.75, 0).unwrap(), &Default::default()).unwrap();
        let spec = BasinSpec { re_min: -0.3, re_max: 1.3, im_min: -0.3, im_max: 0.3, nx: 32, ny: 12, full: false };
        let grid = render_basin(&g, &tau, &roots, &spec, 1, &EngineConfig::default()).unwrap();
        let mut trapped = 0;
        for row in 0..spec.ny {
            for col in 0..spec.nx {
                let z = spec.cell_center(col, row);
                let direct = deterministic_newton(&g, z, &EngineConfig::default()).unwrap();
                let cycling = matches!(direct.status, OrbitStatus::DetectedCycle(_) | OrbitStatus::MaxIterations);
                let cell = grid.cell(col, row);
                assert_eq!(cycling, cell.unresolved_prob == 1.0, "cell at {z}");
                trapped += cycling as usize;
            }
        }
        assert!(trapped >= 10, "{trapped}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let (g, roots) = z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 5).unwrap();
        let cfg = EngineConfig::default();
        assert!(render_basin(&g, &tau, &roots, &BasinSpec::square(2.0, 8), 0, &cfg).is_err());
        assert!(render_basin(&g, &tau, &roots, &BasinSpec::square(2.0, 4096), 1, &cfg).is_err());
    }

    #[test]
    fn csv_and_png_are_reproducible() {
        let (g, roots) = z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 9).unwrap();
        let spec = BasinSpec::square(2.0, 16);
        let render = || {
            let grid = render_basin(&g, &tau, &roots, &spec, 8, &EngineConfig::default()).unwrap();
            let (mut csv, mut png) = (Vec::new(), Vec::new());
            grid.write_csv(&mut csv).unwrap();
            grid.write_png(&mut png).unwrap();
            (csv, png)
        };
        let (a, b) = (render(), render());
        assert_eq!(a, b);
        let text = String::from_utf8(a.0).unwrap();
        assert_eq!(text.lines().count(), 1 + 16 * 16);
        assert!(text.starts_with("x,y,argmax_root_index,argmax_prob,escape_prob,unresolved_prob\n"));
        assert_eq!(&a.1[1..4], b"PNG");
    }
}
