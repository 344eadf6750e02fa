use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::EvolutionTrace;
use crate::discretize::Grid;
use crate::error::Result;

fn coord_header(dim: usize, prefix: &str) -> String {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

/// `trace.csv`: `t, x1..xN, norm`, plus `X1..X{N+1}` ambient columns for sphere charts.
pub fn write_trace_csv(trace: &EvolutionTrace, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let dim = trace.mean_position.first().map_or(0, |x| x.len());
    write!(out, "t,{},norm", coord_header(dim, "x"))?;
    if let Some(amb) = &trace.ambient_position {
        let adim = amb.first().map_or(dim + 1, |x| x.len());
        write!(out, ",{}", coord_header(adim, "X"))?;
    }
    writeln!(out)?;
    for (k, t) in trace.times.iter().enumerate() {
        write!(out, "{t}")?;
        for x in &trace.mean_position[k] {
            write!(out, ",{x}")?;
        }
        write!(out, ",{}", trace.norms[k])?;
        if let Some(amb) = &trace.ambient_position {
            for x in &amb[k] {
                write!(out, ",{x}")?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn write_field(path: &Path, grid: &Grid, name: &str, values: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{},{name}", coord_header(grid.dim(), "x"))?;
    let mut x = vec![0.0; grid.dim()];
    for (idx, v) in values.iter().enumerate() {
        grid.coord_into(idx, &mut x);
        for xi in &x {
            write!(out, "{xi},")?;
        }
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// One `frame_<t>.csv` per captured frame (`x1..xN, density`) and
/// `sqrt_g.csv` with the volume factor on the same nodes. Creates `dir`.
pub fn write_frames(trace: &EvolutionTrace, grid: &Grid, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for frame in &trace.frames {
        let path = dir.join(format!("frame_{:.4}.csv", frame.time));
        write_field(&path, grid, "density", &frame.density)?;
    }
    write_field(&dir.join("sqrt_g.csv"), grid, "sqrt_g", &trace.sqrt_det)
}
