use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CellRect, CostMap, CostParams, HeightGrid, TerrainError};

/// Notification that part of the map changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangeEvent {
    /// Cells written by the patch.
    pub rect: CellRect,
    /// Accumulated dirty region of the grid after the patch.
    pub dirty: CellRect,
}

/// Owns the authoritative height grid and publishes immutable cost-map
/// snapshots. Readers holding an older snapshot are unaffected by later patches.
#[derive(Debug)]
pub struct TerrainServer {
    grid: HeightGrid,
    published: Arc<CostMap>,
}

impl TerrainServer {
    pub fn new(mut grid: HeightGrid, params: CostParams) -> Result<Self, TerrainError> {
        let map = CostMap::compute(&mut grid, params)?;
        Ok(Self {
            grid,
            published: Arc::new(map),
        })
    }

    pub fn grid(&self) -> &HeightGrid {
        &self.grid
    }

    pub fn snapshot(&self) -> Arc<CostMap> {
        Arc::clone(&self.published)
    }

    /// Write a patch into the grid. The published map is not touched until
    /// [`TerrainServer::refresh`].
    pub fn apply_patch(
        &mut self,
        patch: &DMatrix<f64>,
        at: (usize, usize),
    ) -> Result<ChangeEvent, TerrainError> {
        let rect = self.grid.apply_patch(patch, at)?;
        Ok(ChangeEvent {
            rect,
            dirty: self.grid.dirty_region().unwrap_or(rect),
        })
    }

    /// Recompute costs around the dirty region and publish a new snapshot.
    /// Returns the recomputed rectangle, or `None` if nothing was dirty.
    pub fn refresh(&mut self) -> Result<Option<CellRect>, TerrainError> {
        let Some(dirty) = self.grid.dirty_region() else {
            return Ok(None);
        };
        let mut next = (*self.published).clone();
        let region = dirty.dilate(next.params().influence_radius(), self.grid.nx(), self.grid.ny());
        next.update_region(&mut self.grid, region)?;
        self.published = Arc::new(next);
        Ok(Some(region))
    }
}
