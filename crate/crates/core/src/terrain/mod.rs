//! Elevation grid, per-cell terrain features and the foothold cost map.
//!
//! Elevations are stored as integer multiples of the vertical resolution so
//! that flat regions produce exactly zero features and costs.

mod cost;
mod features;
mod server;

use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector2};
use thiserror::Error;

pub use cost::{CostMap, CostParams};
pub use features::{compute_features, TerrainFeatures};
pub use server::{ChangeEvent, TerrainServer};

/// Elevation at or below which a cell counts as a hole. Holes keep a finite
/// stored height but are never valid footholds.
pub const VOID_ELEVATION: f64 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("invalid grid geometry: {0}")]
    Geometry(String),
    #[error("elevation table is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    Dimension {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("non-finite elevation at cell ({ix}, {iy})")]
    NonFinite { ix: usize, iy: usize },
    #[error("rectangle {0} is outside the grid")]
    OutOfBounds(CellRect),
    #[error("empty region")]
    EmptyRegion,
    #[error("invalid feature weights {0:?}")]
    Weights([f64; 3]),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Grid shape and placement. Cell `(ix, iy)` is centered at
/// `origin + resolution_xy * (ix, iy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    pub resolution_xy: f64,
    pub resolution_z: f64,
    pub origin: Vector2<f64>,
}

impl GridGeometry {
    pub fn new(nx: usize, ny: usize, origin: Vector2<f64>) -> Self {
        Self {
            nx,
            ny,
            resolution_xy: 0.04,
            resolution_z: 0.02,
            origin,
        }
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if self.nx == 0 || self.ny == 0 {
            return Err(TerrainError::Geometry("grid has no cells".into()));
        }
        if !(self.resolution_xy > 0.0 && self.resolution_xy.is_finite()) {
            return Err(TerrainError::Geometry(format!(
                "resolution_xy must be positive, got {}",
                self.resolution_xy
            )));
        }
        if !(self.resolution_z > 0.0 && self.resolution_z.is_finite()) {
            return Err(TerrainError::Geometry(format!(
                "resolution_z must be positive, got {}",
                self.resolution_z
            )));
        }
        if !(self.origin.x.is_finite() && self.origin.y.is_finite()) {
            return Err(TerrainError::Geometry("origin is not finite".into()));
        }
        Ok(())
    }

    pub fn full_rect(&self) -> CellRect {
        CellRect::new(0, 0, self.nx, self.ny)
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vector2<f64> {
        self.origin + Vector2::new(ix as f64, iy as f64) * self.resolution_xy
    }

    /// Cell containing the world point, if it is on the grid.
    pub fn cell_of(&self, p: Vector2<f64>) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution_xy).round();
        let fy = ((p.y - self.origin.y) / self.resolution_xy).round();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Cells whose centers lie within `radius` of `p`, in (iy, ix) order.
    pub fn cells_in_disc(&self, p: Vector2<f64>, radius: f64) -> Vec<(usize, usize)> {
        let res = self.resolution_xy;
        let lo_x = ((p.x - radius - self.origin.x) / res).floor().max(0.0) as usize;
        let lo_y = ((p.y - radius - self.origin.y) / res).floor().max(0.0) as usize;
        let hi_x = ((p.x + radius - self.origin.x) / res).ceil();
        let hi_y = ((p.y + radius - self.origin.y) / res).ceil();
        if hi_x < 0.0 || hi_y < 0.0 {
            return Vec::new();
        }
        let hi_x = (hi_x as usize).min(self.nx.saturating_sub(1));
        let hi_y = (hi_y as usize).min(self.ny.saturating_sub(1));
        let r2 = radius * radius;
        let mut out = Vec::new();
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                if (self.cell_center(ix, iy) - p).norm_squared() <= r2 + 1e-12 {
                    out.push((ix, iy));
                }
            }
        }
        out
    }

    /// Smallest cell rectangle covering the world box centered at `center`.
    pub fn rect_around(&self, center: Vector2<f64>, extent_x: f64, extent_y: f64) -> CellRect {
        let res = self.resolution_xy;
        let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64) as usize;
        let x0 = clamp(((center.x - 0.5 * extent_x - self.origin.x) / res).round(), self.nx);
        let x1 = clamp(((center.x + 0.5 * extent_x - self.origin.x) / res).round() + 1.0, self.nx);
        let y0 = clamp(((center.y - 0.5 * extent_y - self.origin.y) / res).round(), self.ny);
        let y1 = clamp(((center.y + 0.5 * extent_y - self.origin.y) / res).round() + 1.0, self.ny);
        CellRect::new(x0, y0, x1.max(x0), y1.max(y0))
    }

    /// World-space bounds `(min, max)` of a rectangle, including the cell extents.
    pub fn world_bounds(&self, rect: &CellRect) -> (Vector2<f64>, Vector2<f64>) {
        let half = Vector2::repeat(0.5 * self.resolution_xy);
        let lo = self.cell_center(rect.x0, rect.y0) - half;
        let hi = self.cell_center(rect.x1.max(1) - 1, rect.y1.max(1) - 1) + half;
        (lo, hi)
    }
}

/// Half-open cell rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl std::fmt::Display for CellRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}) x [{}, {})", self.x0, self.x1, self.y0, self.y1)
    }
}

impl CellRect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn cell_count(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.x1 - self.x0) * (self.y1 - self.y0)
        }
    }

    pub fn contains(&self, ix: usize, iy: usize) -> bool {
        ix >= self.x0 && ix < self.x1 && iy >= self.y0 && iy < self.y1
    }

    /// Bounding rectangle of both.
    pub fn union(&self, other: &CellRect) -> CellRect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        CellRect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn intersects(&self, other: &CellRect) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self.x0 < other.x1
            && other.x0 < self.x1
            && self.y0 < other.y1
            && other.y0 < self.y1
    }

    /// Grow by `r` cells on every side, clipped to an `nx x ny` grid.
    pub fn dilate(&self, r: usize, nx: usize, ny: usize) -> CellRect {
        CellRect::new(
            self.x0.saturating_sub(r),
            self.y0.saturating_sub(r),
            (self.x1 + r).min(nx),
            (self.y1 + r).min(ny),
        )
    }

    pub fn fits(&self, nx: usize, ny: usize) -> bool {
        self.x1 <= nx && self.y1 <= ny && self.x0 <= self.x1 && self.y0 <= self.y1
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |iy| (self.x0..self.x1).map(move |ix| (ix, iy)))
    }
}

/// Round `z / res` to the nearest integer, ties away from zero. Values within
/// 1e-9 of a half step count as ties so that decimal inputs like 0.15 m with a
/// 0.02 m step behave as written.
pub fn quantize_level(z: f64, res: f64) -> i32 {
    let v = z / res;
    let frac = v - v.trunc();
    if (frac.abs() - 0.5).abs() < 1e-9 {
        (v.trunc() + frac.signum()) as i32
    } else {
        v.round() as i32
    }
}

/// 2.5D elevation map.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    geometry: GridGeometry,
    /// Elevation in units of `resolution_z`, row-major in `iy`.
    levels: Vec<i32>,
    dirty: Option<CellRect>,
}

impl HeightGrid {
    pub fn flat(geometry: GridGeometry) -> Result<Self, TerrainError> {
        geometry.validate()?;
        Ok(Self {
            levels: vec![0; geometry.nx * geometry.ny],
            dirty: Some(geometry.full_rect()),
            geometry,
        })
    }

    /// Build a grid from an `ny x nx` elevation table (row `iy`, column `ix`).
    pub fn ingest(geometry: GridGeometry, table: &DMatrix<f64>) -> Result<Self, TerrainError> {
        geometry.validate()?;
        if table.nrows() != geometry.ny || table.ncols() != geometry.nx {
            return Err(TerrainError::Dimension {
                rows: geometry.ny,
                cols: geometry.nx,
                got_rows: table.nrows(),
                got_cols: table.ncols(),
            });
        }
        let mut levels = Vec::with_capacity(geometry.nx * geometry.ny);
        for iy in 0..geometry.ny {
            for ix in 0..geometry.nx {
                let z = table[(iy, ix)];
                if !z.is_finite() {
                    return Err(TerrainError::NonFinite { ix, iy });
                }
                levels.push(quantize_level(z, geometry.resolution_z));
            }
        }
        Ok(Self {
            levels,
            dirty: Some(geometry.full_rect()),
            geometry,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn nx(&self) -> usize {
        self.geometry.nx
    }

    pub fn ny(&self) -> usize {
        self.geometry.ny
    }

    pub fn level(&self, ix: usize, iy: usize) -> i32 {
        self.levels[iy * self.geometry.nx + ix]
    }

    pub fn height(&self, ix: usize, iy: usize) -> f64 {
        self.level(ix, iy) as f64 * self.geometry.resolution_z
    }

    /// Elevation of the cell containing `p`.
    pub fn height_at(&self, p: Vector2<f64>) -> Option<f64> {
        self.geometry.cell_of(p).map(|(ix, iy)| self.height(ix, iy))
    }

    pub fn is_void(&self, ix: usize, iy: usize) -> bool {
        self.height(ix, iy) <= VOID_ELEVATION + 0.5 * self.geometry.resolution_z
    }

    pub fn dirty_region(&self) -> Option<CellRect> {
        self.dirty
    }

    pub fn clear_dirty(&mut self) {
        self.dirty = None;
    }

    fn mark_dirty(&mut self, rect: CellRect) {
        self.dirty = Some(match self.dirty {
            Some(d) => d.union(&rect),
            None => rect,
        });
    }

    /// Overwrite the cells of `rect` with one elevation.
    pub fn fill(&mut self, rect: CellRect, z: f64) -> Result<(), TerrainError> {
        if !rect.fits(self.nx(), self.ny()) {
            return Err(TerrainError::OutOfBounds(rect));
        }
        if !z.is_finite() {
            return Err(TerrainError::NonFinite { ix: rect.x0, iy: rect.y0 });
        }
        let level = quantize_level(z, self.geometry.resolution_z);
        for (ix, iy) in rect.cells() {
            self.levels[iy * self.geometry.nx + ix] = level;
        }
        if !rect.is_empty() {
            self.mark_dirty(rect);
        }
        Ok(())
    }

    /// Write `patch` (rows `iy`, columns `ix`) with its first cell at `at`.
    /// Returns the patched rectangle; the dirty region grows to include it.
    pub fn apply_patch(
        &mut self,
        patch: &DMatrix<f64>,
        at: (usize, usize),
    ) -> Result<CellRect, TerrainError> {
        let rect = CellRect::new(at.0, at.1, at.0 + patch.ncols(), at.1 + patch.nrows());
        if !rect.fits(self.nx(), self.ny()) {
            return Err(TerrainError::OutOfBounds(rect));
        }
        if rect.is_empty() {
            return Err(TerrainError::EmptyRegion);
        }
        for r in 0..patch.nrows() {
            for c in 0..patch.ncols() {
                if !patch[(r, c)].is_finite() {
                    return Err(TerrainError::NonFinite { ix: at.0 + c, iy: at.1 + r });
                }
            }
        }
        for r in 0..patch.nrows() {
            for c in 0..patch.ncols() {
                let idx = (at.1 + r) * self.geometry.nx + at.0 + c;
                self.levels[idx] = quantize_level(patch[(r, c)], self.geometry.resolution_z);
            }
        }
        self.mark_dirty(rect);
        Ok(rect)
    }

    /// Elevations as an `ny x nx` table in meters.
    pub fn to_table(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.ny(), self.nx(), |iy, ix| self.height(ix, iy))
    }

    /// `heightgrid nx ny res_xy res_z origin_x origin_y` followed by `ny` rows.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let mut out = format!(
            "heightgrid {} {} {} {} {} {}\n",
            g.nx, g.ny, g.resolution_xy, g.resolution_z, g.origin.x, g.origin.y
        );
        for iy in 0..g.ny {
            let row: Vec<String> = (0..g.nx).map(|ix| format!("{}", self.height(ix, iy))).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TerrainError> {
        let (geometry, table) = parse_table(text, "heightgrid")?;
        Self::ingest(geometry, &table)
    }
}

/// Parse a `<keyword> nx ny res_xy res_z ox oy` table. `inf` entries are accepted.
pub(crate) fn parse_table(
    text: &str,
    keyword: &str,
) -> Result<(GridGeometry, DMatrix<f64>), TerrainError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(TerrainError::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let perr = |line: usize, msg: String| TerrainError::Parse { line, msg };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 7 || fields[0] != keyword {
        return Err(perr(
            hline,
            format!("expected `{keyword} nx ny res_xy res_z origin_x origin_y`"),
        ));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|e| perr(hline, format!("`{s}`: {e}")));
    let num = |s: &str| s.parse::<f64>().map_err(|e| perr(hline, format!("`{s}`: {e}")));
    let geometry = GridGeometry {
        nx: int(fields[1])?,
        ny: int(fields[2])?,
        resolution_xy: num(fields[3])?,
        resolution_z: num(fields[4])?,
        origin: Vector2::new(num(fields[5])?, num(fields[6])?),
    };
    geometry.validate()?;
    let mut table = DMatrix::zeros(geometry.ny, geometry.nx);
    let mut rows = 0;
    for (line, l) in lines {
        if rows == geometry.ny {
            return Err(perr(line, "more rows than declared".into()));
        }
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != geometry.nx {
            return Err(perr(line, format!("expected {} values, got {}", geometry.nx, vals.len())));
        }
        for (ix, v) in vals.iter().enumerate() {
            table[(rows, ix)] = v.parse::<f64>().map_err(|e| perr(line, format!("`{v}`: {e}")))?;
        }
        rows += 1;
    }
    if rows != geometry.ny {
        return Err(perr(hline, format!("expected {} rows, got {rows}", geometry.ny)));
    }
    Ok((geometry, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(nx: usize, ny: usize) -> GridGeometry {
        GridGeometry::new(nx, ny, Vector2::zeros())
    }

    #[test]
    fn flat_table_ingests_to_zeros() {
        let grid = HeightGrid::ingest(geom(10, 10), &DMatrix::zeros(10, 10)).unwrap();
        assert!(grid.levels.iter().all(|&l| l == 0));
        assert_eq!(grid.dirty_region(), Some(CellRect::new(0, 0, 10, 10)));
    }

    #[test]
    fn quantization_rounds_to_nearest_with_ties_away_from_zero() {
        assert_eq!(quantize_level(0.151, 0.02), 8);
        assert_eq!(quantize_level(0.15, 0.02), 8);
        assert_eq!(quantize_level(-0.15, 0.02), -8);
        assert_eq!(quantize_level(0.07, 0.02), 4);
        assert_eq!(quantize_level(0.069, 0.02), 3);
        assert_eq!(quantize_level(0.0, 0.02), 0);
        let mut table = DMatrix::zeros(2, 2);
        table[(1, 0)] = 0.151;
        let grid = HeightGrid::ingest(geom(2, 2), &table).unwrap();
        assert!((grid.height(0, 1) - 0.16).abs() < 1e-15);
    }

    #[test]
    fn ingest_rejects_bad_tables() {
        assert!(matches!(
            HeightGrid::ingest(geom(3, 2), &DMatrix::zeros(3, 2)),
            Err(TerrainError::Dimension { .. })
        ));
        let mut t = DMatrix::zeros(2, 3);
        t[(1, 2)] = f64::NAN;
        assert_eq!(
            HeightGrid::ingest(geom(3, 2), &t).unwrap_err(),
            TerrainError::NonFinite { ix: 2, iy: 1 }
        );
    }

    #[test]
    fn pallet_edge_stays_on_cell_boundary() {
        let mut grid = HeightGrid::flat(geom(40, 30)).unwrap();
        let pallet = grid.geometry().rect_around(Vector2::new(0.8, 0.6), 0.4, 0.4);
        grid.fill(pallet, 0.15).unwrap();
        for iy in 0..30 {
            for ix in 0..40 {
                let expect = if pallet.contains(ix, iy) { 0.16 } else { 0.0 };
                assert_eq!(grid.height(ix, iy), expect);
            }
        }
    }

    #[test]
    fn patches_union_into_dirty_region() {
        let mut grid = HeightGrid::flat(geom(20, 20)).unwrap();
        grid.clear_dirty();
        let a = grid.apply_patch(&DMatrix::repeat(3, 4, 0.15), (2, 5)).unwrap();
        assert_eq!(a, CellRect::new(2, 5, 6, 8));
        assert_eq!(grid.dirty_region(), Some(a));
        let b = grid.apply_patch(&DMatrix::repeat(4, 2, 0.3), (5, 6)).unwrap();
        // Union oracle: componentwise min of lower corners, max of upper corners.
        assert_eq!(grid.dirty_region(), Some(CellRect::new(2, 5, 7, 10)));
        assert_eq!(b, CellRect::new(5, 6, 7, 10));
        assert!(matches!(
            grid.apply_patch(&DMatrix::zeros(2, 2), (19, 0)),
            Err(TerrainError::OutOfBounds(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut table = DMatrix::zeros(3, 4);
        table[(2, 1)] = 0.32;
        table[(0, 3)] = -1.0;
        let geometry = GridGeometry::new(4, 3, Vector2::new(-0.5, 0.25));
        let grid = HeightGrid::ingest(geometry, &table).unwrap();
        let back = HeightGrid::from_text(&grid.to_text()).unwrap();
        assert_eq!(grid, back);
        assert!(back.is_void(3, 0));
    }

    #[test]
    fn malformed_text_reports_line() {
        let err = HeightGrid::from_text("heightgrid 2 2 0.04 0.02 0 0\n0 0\n0\n").unwrap_err();
        assert!(matches!(err, TerrainError::Parse { line: 3, .. }));
    }

    #[test]
    fn disc_cells_and_lookup() {
        let g = geom(50, 50);
        let cells = g.cells_in_disc(Vector2::new(1.0, 1.0), 0.10);
        // Lattice points (i, j) with i^2 + j^2 <= 6.25.
        let expect = (-2i32..=2)
            .flat_map(|i| (-2i32..=2).map(move |j| (i, j)))
            .filter(|(i, j)| i * i + j * j <= 6)
            .count();
        assert_eq!(cells.len(), expect);
        assert_eq!(g.cell_of(Vector2::new(1.01, 0.99)), Some((25, 25)));
        assert_eq!(g.cell_of(Vector2::new(-0.03, 0.0)), None);
    }
}
