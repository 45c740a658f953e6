use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector2};

use super::{compute_features, parse_table, CellRect, GridGeometry, HeightGrid, TerrainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Weights of (height stddev, slope, curvature).
    pub weights: [f64; 3],
    /// Feature window radius in cells.
    pub window: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            weights: [1.0, 1.0, 0.5],
            window: 2,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), TerrainError> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(TerrainError::Weights(self.weights));
        }
        if self.window == 0 {
            return Err(TerrainError::Geometry("feature window must be at least 1".into()));
        }
        Ok(())
    }

    /// How far a height change can influence costs, in cells.
    pub fn influence_radius(&self) -> usize {
        // The one-sided border Laplacian reaches two cells.
        self.window.max(2)
    }
}

/// Per-cell foothold cost together with the heights it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    grid: HeightGrid,
    cost: Vec<f64>,
    params: CostParams,
}

impl CostMap {
    /// Cost map of `grid` with every cell computed.
    pub fn compute(grid: &mut HeightGrid, params: CostParams) -> Result<Self, TerrainError> {
        params.validate()?;
        let mut map = Self {
            grid: grid.clone(),
            cost: vec![0.0; grid.nx() * grid.ny()],
            params,
        };
        map.update_region(grid, grid.geometry().full_rect())?;
        Ok(map)
    }

    /// Recompute costs inside `region` from the current `grid`; other cells keep
    /// their previous values. Clears the grid's dirty region.
    pub fn update_region(&mut self, grid: &mut HeightGrid, region: CellRect) -> Result<(), TerrainError> {
        if region.is_empty() {
            return Err(TerrainError::EmptyRegion);
        }
        if !region.fits(grid.nx(), grid.ny()) {
            return Err(TerrainError::OutOfBounds(region));
        }
        if grid.geometry() != self.grid.geometry() {
            return Err(TerrainError::Geometry("cost map and grid geometry differ".into()));
        }
        grid.clear_dirty();
        self.grid = grid.clone();
        let w = self.params.weights;
        for (ix, iy) in region.cells() {
            let f = compute_features(&self.grid, ix, iy, self.params.window).as_array();
            self.cost[iy * grid.nx() + ix] = w[0] * f[0] + w[1] * f[1] + w[2] * f[2];
        }
        Ok(())
    }

    pub fn grid(&self) -> &HeightGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.grid.geometry()
    }

    pub fn params(&self) -> &CostParams {
        &self.params
    }

    /// Stored weighted feature cost; always finite.
    pub fn stored_cost(&self, ix: usize, iy: usize) -> f64 {
        self.cost[iy * self.grid.nx() + ix]
    }

    /// Foothold cost of a cell: infinite on holes.
    pub fn cost(&self, ix: usize, iy: usize) -> f64 {
        if self.grid.is_void(ix, iy) {
            f64::INFINITY
        } else {
            self.stored_cost(ix, iy)
        }
    }

    /// Foothold cost at a world point: infinite off the map or on holes.
    pub fn cost_at(&self, p: Vector2<f64>) -> f64 {
        match self.geometry().cell_of(p) {
            Some((ix, iy)) => self.cost(ix, iy),
            None => f64::INFINITY,
        }
    }

    pub fn height(&self, ix: usize, iy: usize) -> f64 {
        self.grid.height(ix, iy)
    }

    pub fn height_at(&self, p: Vector2<f64>) -> Option<f64> {
        self.grid.height_at(p)
    }

    /// `costmap nx ny res_xy res_z origin_x origin_y` then `ny` rows; holes are `inf`.
    pub fn to_text(&self) -> String {
        let g = self.geometry();
        let mut out = format!(
            "costmap {} {} {} {} {} {}\n",
            g.nx, g.ny, g.resolution_xy, g.resolution_z, g.origin.x, g.origin.y
        );
        for iy in 0..g.ny {
            let row: Vec<String> = (0..g.nx).map(|ix| format!("{}", self.cost(ix, iy))).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// Parse an exported cost table.
    pub fn table_from_text(text: &str) -> Result<(GridGeometry, DMatrix<f64>), TerrainError> {
        parse_table(text, "costmap")
    }
}
