use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;

use super::SimError;
use crate::terrain::{CellRect, GridGeometry, HeightGrid, VOID_ELEVATION};

/// Built-in terrain generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinTerrain {
    Flat,
    Pallet,
    TwoPallets,
    Gap,
    SteppingStones,
}

impl BuiltinTerrain {
    pub const ALL: [BuiltinTerrain; 5] = [
        BuiltinTerrain::Flat,
        BuiltinTerrain::Pallet,
        BuiltinTerrain::TwoPallets,
        BuiltinTerrain::Gap,
        BuiltinTerrain::SteppingStones,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinTerrain::Flat => "flat",
            BuiltinTerrain::Pallet => "pallet",
            BuiltinTerrain::TwoPallets => "two_pallets",
            BuiltinTerrain::Gap => "gap",
            BuiltinTerrain::SteppingStones => "stepping_stones",
        }
    }
}

impl fmt::Display for BuiltinTerrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinTerrain {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinTerrain::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| SimError::Scenario(format!("unknown scenario {s:?}")))
    }
}

/// Dimensions of the built-in obstacles (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub pallet_height: f64,
    /// Pallet extent along the walking direction.
    pub pallet_length: f64,
    pub pallet_width: f64,
    pub gap_width: f64,
    /// How much lower the stepping stones are than the pallets.
    pub stone_drop: f64,
    /// Free distance between the two pallets of the stepping-stone course.
    pub pallet_spacing: f64,
    pub stone_size: f64,
    /// Center-to-center distance of consecutive stones.
    pub stone_pitch: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            pallet_height: 0.15,
            pallet_length: 1.2,
            pallet_width: 0.8,
            gap_width: 0.35,
            stone_drop: 0.08,
            pallet_spacing: 1.2,
            stone_size: 0.16,
            stone_pitch: 0.24,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let all = [
            self.pallet_height,
            self.pallet_length,
            self.pallet_width,
            self.gap_width,
            self.stone_drop,
            self.pallet_spacing,
            self.stone_size,
            self.stone_pitch,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.stone_drop >= self.pallet_height {
            return Err(SimError::Scenario(format!("invalid scenario parameters {self:?}")));
        }
        if self.stone_size > self.stone_pitch {
            return Err(SimError::Scenario("stones overlap".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerrainSource {
    Builtin(BuiltinTerrain),
    Grid(HeightGrid),
}

/// Terrain plus start and goal body poses `(x, y, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub terrain: TerrainSource,
    pub start: (f64, f64, f64),
    pub goal: (f64, f64, f64),
    pub params: ScenarioParams,
}

/// Map covering x in [-1, 4] m and y in [-1.24, 1.24] m at 4 cm.
pub fn builtin_geometry() -> GridGeometry {
    GridGeometry::new(126, 63, Vector2::new(-1.0, -1.24))
}

impl Scenario {
    pub fn builtin(kind: BuiltinTerrain) -> Self {
        let (start, goal) = match kind {
            BuiltinTerrain::Flat => ((0.0, 0.0, 0.0), (2.0, 0.0, 0.0)),
            BuiltinTerrain::Pallet => ((0.0, 0.0, 0.0), (1.6, 0.0, 0.0)),
            BuiltinTerrain::TwoPallets => ((0.0, 0.0, 0.0), (2.2, 0.0, 0.0)),
            BuiltinTerrain::Gap => ((0.0, 0.0, 0.0), (2.4, 0.0, 0.0)),
            BuiltinTerrain::SteppingStones => ((0.6, 0.0, 0.0), (3.0, 0.0, 0.0)),
        };
        Self {
            name: kind.name().to_string(),
            terrain: TerrainSource::Builtin(kind),
            start,
            goal,
            params: ScenarioParams::default(),
        }
    }

    pub fn from_grid(name: &str, grid: HeightGrid, start: (f64, f64, f64), goal: (f64, f64, f64)) -> Self {
        Self {
            name: name.to_string(),
            terrain: TerrainSource::Grid(grid),
            start,
            goal,
            params: ScenarioParams::default(),
        }
    }

    /// Deterministic height grid for this scenario.
    pub fn generate(&self) -> Result<HeightGrid, SimError> {
        match &self.terrain {
            TerrainSource::Grid(grid) => Ok(grid.clone()),
            TerrainSource::Builtin(kind) => generate_builtin(*kind, &self.params),
        }
    }
}

/// Cells whose centers lie in `[lo, hi)`.
pub fn world_rect(geometry: &GridGeometry, lo: Vector2<f64>, hi: Vector2<f64>) -> Result<CellRect, SimError> {
    let first = |v: f64, o: f64| ((v - o) / geometry.resolution_xy - 1e-9).ceil();
    let (x0, x1) = (first(lo.x, geometry.origin.x), first(hi.x, geometry.origin.x));
    let (y0, y1) = (first(lo.y, geometry.origin.y), first(hi.y, geometry.origin.y));
    if x0 < 0.0 || y0 < 0.0 || x1 > geometry.nx as f64 || y1 > geometry.ny as f64 || x1 <= x0 || y1 <= y0 {
        return Err(SimError::Scenario(format!("region {lo:?}..{hi:?} does not fit the map")));
    }
    Ok(CellRect::new(x0 as usize, y0 as usize, x1 as usize, y1 as usize))
}

fn fill(grid: &mut HeightGrid, lo: (f64, f64), hi: (f64, f64), z: f64) -> Result<(), SimError> {
    let rect = world_rect(grid.geometry(), Vector2::new(lo.0, lo.1), Vector2::new(hi.0, hi.1))?;
    grid.fill(rect, z).map_err(SimError::Terrain)
}

fn generate_builtin(kind: BuiltinTerrain, p: &ScenarioParams) -> Result<HeightGrid, SimError> {
    p.validate()?;
    let geometry = builtin_geometry();
    let mut grid = HeightGrid::flat(geometry).map_err(SimError::Terrain)?;
    let (lo_y, hi_y) = (geometry.origin.y - 0.02, geometry.origin.y + geometry.ny as f64 * geometry.resolution_xy);
    let half_w = 0.5 * p.pallet_width;
    match kind {
        BuiltinTerrain::Flat => {}
        BuiltinTerrain::Pallet => {
            fill(&mut grid, (1.0, -half_w), (1.0 + p.pallet_length, half_w), p.pallet_height)?;
        }
        BuiltinTerrain::TwoPallets => {
            // Second pallet stacked on the far half of the first, like a stair.
            let x0 = 0.8;
            let x1 = x0 + 0.5 * p.pallet_length + 0.2;
            fill(&mut grid, (x0, -half_w), (x1, half_w), p.pallet_height)?;
            fill(&mut grid, (x1, -half_w), (x1 + p.pallet_length, half_w), 2.0 * p.pallet_height)?;
        }
        BuiltinTerrain::Gap => {
            fill(&mut grid, (1.0, lo_y), (1.0 + p.gap_width, hi_y), VOID_ELEVATION)?;
        }
        BuiltinTerrain::SteppingStones => {
            let a0 = 0.0;
            let a1 = a0 + p.pallet_length;
            let b0 = a1 + p.pallet_spacing;
            fill(&mut grid, (a0, -half_w), (a1, half_w), p.pallet_height)?;
            fill(&mut grid, (b0, -half_w), (b0 + p.pallet_length, half_w), p.pallet_height)?;
            fill(&mut grid, (a1, lo_y), (b0, hi_y), VOID_ELEVATION)?;
            let stone_z = p.pallet_height - p.stone_drop;
            let half = 0.5 * p.stone_size;
            let lane = 0.26;
            let mut x = a1 + 0.5 * (p.stone_pitch - p.stone_size) + half;
            while x + half <= b0 + 1e-9 {
                for y in [-lane, lane] {
                    fill(&mut grid, (x - half, y - half), (x + half, y + half), stone_z)?;
                }
                x += p.stone_pitch;
            }
        }
    }
    grid.clear_dirty();
    Ok(grid)
}
