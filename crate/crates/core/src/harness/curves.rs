use super::config::BoundsSpec;
use crate::error::{invalid, Result};
use crate::numfmt::sig17;
use crate::theory::{bound_crossover, gen_bound, optimal_t, OptimalT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub t: f64,
    pub gen_bound_total: f64,
    pub exponential_bound_total: f64,
    /// Grid point closest to `T*` (ties go to the smaller T).
    pub t_star_marker: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurves {
    pub rows: Vec<CurveRow>,
    /// Smallest T on the grid range beyond which the exponential bound stays
    /// above the linear one; `None` for a single-point grid or no crossing.
    pub crossover: Option<f64>,
    pub t_star: OptimalT,
}

impl BoundCurves {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["T", "gen_bound_total", "exponential_bound_total", "t_star_marker"])?;
        for r in &self.rows {
            w.write_record([
                sig17(r.t),
                sig17(r.gen_bound_total),
                sig17(r.exponential_bound_total),
                u8::from(r.t_star_marker).to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Grid `t_min, t_min + t_step, ...` up to `t_max` (inclusive within rounding).
pub fn t_grid(b: &BoundsSpec) -> Result<Vec<f64>> {
    if !(b.t_min >= 1.0 && b.t_max >= b.t_min && b.t_step > 0.0 && b.t_max.is_finite()) {
        return Err(invalid("bounds grid needs 1 <= t_min <= t_max and t_step > 0"));
    }
    let cells = ((b.t_max - b.t_min) / b.t_step + 1e-9).floor() as usize;
    Ok((0..=cells).map(|i| b.t_min + b.t_step * i as f64).collect())
}

/// Linear and exponential bound totals over the T grid, the crossover and T*.
pub fn emit_bound_curves(b: &BoundsSpec) -> Result<BoundCurves> {
    let grid = t_grid(b)?;
    let delta_max = b.delta_max.unwrap_or(b.delta_avg);
    let t_star = optimal_t(delta_max, b.n, b.source_target_distance, b.scale)?;
    let nearest = grid
        .iter()
        .enumerate()
        .fold(0, |best, (i, t)| if (t - t_star.t_star).abs() < (grid[best] - t_star.t_star).abs() { i } else { best });
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let r = gen_bound(&b.constants, b.eps0, t, b.n, b.delta_avg)?;
            Ok(CurveRow {
                t,
                gen_bound_total: r.total,
                exponential_bound_total: r.comparison_exponential_total,
                t_star_marker: i == nearest,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossover = if grid.len() > 1 {
        let hi = *grid.last().expect("grid is non-empty");
        bound_crossover(&b.constants, b.eps0, b.n, b.delta_avg, b.t_min, hi, 4 * grid.len())?
    } else {
        None
    };
    Ok(BoundCurves { rows, crossover, t_star })
}
