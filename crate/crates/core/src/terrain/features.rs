use nalgebra::{Matrix3, Vector3};

use super::HeightGrid;

/// Local geometric descriptors of the terrain around one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TerrainFeatures {
    /// Population standard deviation of the window heights (m).
    pub height_stddev: f64,
    /// Angle between the least-squares plane normal and vertical (rad).
    pub slope: f64,
    /// Magnitude of the discrete Laplacian of height (1/m).
    pub curvature: f64,
}

impl TerrainFeatures {
    pub fn as_array(&self) -> [f64; 3] {
        [self.height_stddev, self.slope, self.curvature]
    }
}

/// Features of cell `(ix, iy)` over a square window of `window` cells radius,
/// clipped at the grid border.
pub fn compute_features(grid: &HeightGrid, ix: usize, iy: usize, window: usize) -> TerrainFeatures {
    let window = window.max(1);
    let (nx, ny) = (grid.nx(), grid.ny());
    let x0 = ix.saturating_sub(window);
    let x1 = (ix + window).min(nx - 1);
    let y0 = iy.saturating_sub(window);
    let y1 = (iy + window).min(ny - 1);

    // Window statistics on integer levels are exact, which keeps flat terrain
    // at exactly zero.
    let mut count = 0i64;
    let mut sum = 0i64;
    let mut sum_sq = 0i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let l = grid.level(x, y) as i64;
            count += 1;
            sum += l;
            sum_sq += l * l;
        }
    }
    let res_z = grid.geometry().resolution_z;
    let res_xy = grid.geometry().resolution_xy;
    let var_num = count * sum_sq - sum * sum;
    let height_stddev = (var_num as f64).sqrt() / count as f64 * res_z;

    let slope = if var_num == 0 {
        0.0
    } else {
        plane_slope(grid, (x0, x1), (y0, y1), sum as f64 / count as f64, res_xy, res_z)
    };

    let curvature = laplacian(grid, ix, iy).abs() as f64 * res_z / (res_xy * res_xy);
    TerrainFeatures {
        height_stddev,
        slope,
        curvature,
    }
}

fn plane_slope(
    grid: &HeightGrid,
    (x0, x1): (usize, usize),
    (y0, y1): (usize, usize),
    mean_level: f64,
    res_xy: f64,
    res_z: f64,
) -> f64 {
    let cx = 0.5 * (x0 + x1) as f64;
    let cy = 0.5 * (y0 + y1) as f64;
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let row = Vector3::new(x as f64 - cx, y as f64 - cy, 1.0);
            ata += row * row.transpose();
            atb += row * (grid.level(x, y) as f64 - mean_level);
        }
    }
    let Some(sol) = ata.lu().solve(&atb) else {
        return 0.0;
    };
    // Gradient in level units per cell -> meters per meter.
    let gradient = (sol.x.hypot(sol.y)) * res_z / res_xy;
    gradient.atan()
}

/// Sum of the second differences along x and y, in level units. Border cells
/// use the one-sided stencil, and axes shorter than three cells contribute 0.
fn laplacian(grid: &HeightGrid, ix: usize, iy: usize) -> i64 {
    let l = |x: usize, y: usize| grid.level(x, y) as i64;
    let second = |i: usize, n: usize, at: &dyn Fn(usize) -> i64| -> i64 {
        if n < 3 {
            0
        } else if i == 0 {
            at(0) - 2 * at(1) + at(2)
        } else if i == n - 1 {
            at(n - 1) - 2 * at(n - 2) + at(n - 3)
        } else {
            at(i - 1) - 2 * at(i) + at(i + 1)
        }
    };
    second(ix, grid.nx(), &|x| l(x, iy)) + second(iy, grid.ny(), &|y| l(ix, y))
}
