use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Text artifacts of one run. Fields stay empty for stages that did not run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub heightgrid: String,
    pub costmap: String,
    /// Body action plans, the initial one first and one per replan after it.
    pub action_plans: Vec<String>,
    /// Foothold plan per chunk.
    pub footholds: Vec<String>,
    /// Sampled trajectory with spline coefficients per chunk.
    pub trajectories: Vec<String>,
    /// One `WholeBodyCommand` log line per tick.
    pub commands: Vec<String>,
    /// `t,chunk,phase,cog_x,cog_y,cog_z,zmp_x,zmp_y,slack` per tick.
    pub cog_zmp_csv: String,
    /// `chunk,phase,kind,vertex,x,y` for every shrunk support polygon.
    pub polygons_csv: String,
}

impl Artifacts {
    /// Write every non-empty artifact into `dir`, returning the files written.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, text: &str| -> io::Result<()> {
            if text.is_empty() {
                return Ok(());
            }
            let path = dir.join(name);
            fs::write(&path, text)?;
            written.push(path);
            Ok(())
        };
        put("terrain.heightgrid".into(), &self.heightgrid)?;
        put("costmap.txt".into(), &self.costmap)?;
        for (i, plan) in self.action_plans.iter().enumerate() {
            put(format!("actions_{i}.txt"), plan)?;
        }
        for (i, plan) in self.footholds.iter().enumerate() {
            put(format!("footholds_{i:03}.txt"), plan)?;
        }
        for (i, traj) in self.trajectories.iter().enumerate() {
            put(format!("trajectory_{i:03}.txt"), traj)?;
        }
        let mut log = String::new();
        if !self.commands.is_empty() {
            log.push_str("# t tau[12] lambda[3 per stance foot] stance_mask\n");
            for line in &self.commands {
                log.push_str(line);
                log.push('\n');
            }
        }
        put("commands.txt".into(), &log)?;
        put("cog_zmp.csv".into(), &self.cog_zmp_csv)?;
        put("polygons.csv".into(), &self.polygons_csv)?;
        Ok(written)
    }
}
