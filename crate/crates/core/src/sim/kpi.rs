use std::collections::VecDeque;
use std::io;

use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::geometry::Point;
use crate::radio::{db_to_linear, linear_to_db, rsrp_dbm, rs_sinr};

/// Coverage probe thresholds, dBm.
pub const PROBE_85_DBM: f64 = -85.0;
pub const PROBE_80_DBM: f64 = -80.0;

/// Per-bin best-server values over the cluster area.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    pub origin: Point,
    pub step_m: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the lower-left corner; `None` outside the cluster.
    pub rsrp_dbm: Vec<Option<f64>>,
    pub sinr_db: Vec<Option<f64>>,
    pub serving: Vec<Option<usize>>,
}

impl HeatGrid {
    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.step_m,
            self.origin.y + (iy as f64 + 0.5) * self.step_m,
        )
    }

    /// 8-bit binary PGM with `gray = clamp((rsrp + 140) / 70)·255`, top row
    /// first; bins outside the cluster are black.
    pub fn write_pgm<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.nx, self.ny)?;
        let mut row = vec![0u8; self.nx];
        for iy in (0..self.ny).rev() {
            for (ix, px) in row.iter_mut().enumerate() {
                *px = self.rsrp_dbm[iy * self.nx + ix].map_or(0, rsrp_to_gray);
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    /// One row per in-cluster bin.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x_m", "y_m", "rsrp_dbm", "sinr_db", "serving_cell"])?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                if let (Some(r), Some(s), Some(c)) = (self.rsrp_dbm[i], self.sinr_db[i], self.serving[i]) {
                    let p = self.center(ix, iy);
                    out.write_record([p.x.to_string(), p.y.to_string(), r.to_string(), s.to_string(), c.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn rsrp_to_gray(rsrp_dbm: f64) -> u8 {
    (((rsrp_dbm + 140.0) / 70.0).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Area KPIs of one network state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub round: u64,
    pub bins: usize,
    /// Ascending best-server RSRP of every bin.
    pub rsrp_cdf_dbm: Vec<f64>,
    pub coverage_85: f64,
    pub coverage_80: f64,
    pub coverage_holes: usize,
    /// Mean over cells of the per-bin `min(log2(1 + SINR), cap)`, bit/s/Hz.
    pub throughput_proxy: f64,
    /// Share of bins whose SINR falls under the failure threshold.
    pub rrc_failure_proxy: f64,
}

impl KpiReport {
    pub fn rsrp_percentile(&self, pct: f64) -> f64 {
        crate::engine::percentile(&self.rsrp_cdf_dbm, pct).unwrap_or(f64::NAN)
    }

    /// `metric,value` rows in a fixed order.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("round".to_string(), self.round.to_string()),
            ("bins".to_string(), self.bins.to_string()),
            ("coverage_ge_-85dbm".to_string(), self.coverage_85.to_string()),
            ("coverage_ge_-80dbm".to_string(), self.coverage_80.to_string()),
            ("coverage_holes".to_string(), self.coverage_holes.to_string()),
            ("throughput_proxy_bps_hz".to_string(), self.throughput_proxy.to_string()),
            ("rrc_failure_proxy".to_string(), self.rrc_failure_proxy.to_string()),
        ];
        for pct in [1, 5, 10, 25, 50, 75, 90, 95, 99] {
            rows.push((format!("rsrp_p{pct:02}_dbm"), self.rsrp_percentile(f64::from(pct)).to_string()));
        }
        rows
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        for (k, v) in self.rows() {
            out.write_record([k, v])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Evaluates median (unshadowed) best-server RSRP and RS SINR on a square
/// grid over the cluster.
pub fn kpi(net: &Network, round: u64) -> (KpiReport, HeatGrid) {
    let cfg = &net.config.kpi;
    let step = cfg.grid_step_m;
    let (lo, hi) = net.layout.bounds();
    let nx = ((hi.x - lo.x) / step).ceil() as usize;
    let ny = ((hi.y - lo.y) / step).ceil() as usize;
    let mut grid = HeatGrid {
        origin: lo,
        step_m: step,
        nx,
        ny,
        rsrp_dbm: vec![None; nx * ny],
        sinr_db: vec![None; nx * ny],
        serving: vec![None; nx * ny],
    };

    let n_cells = net.cells.len();
    let mut links = Vec::with_capacity(n_cells);
    let mut cell_tp = vec![(0.0f64, 0usize); n_cells];
    let (mut cov85, mut cov80, mut fails) = (0usize, 0usize, 0usize);
    let mut samples = Vec::new();
    let fail_lin = db_to_linear(cfg.rrc_failure_sinr_db);

    for iy in 0..ny {
        for ix in 0..nx {
            let p = grid.center(ix, iy);
            if !net.layout.contains(p) {
                continue;
            }
            links.clear();
            let mut best = (0usize, f64::NEG_INFINITY);
            for c in 0..n_cells {
                let link = net.link(c, net.link_geometry(c, p), 0.0);
                let rsrp = rsrp_dbm(net.cells[c].p_rs_dbm, &link);
                if rsrp > best.1 {
                    best = (c, rsrp);
                }
                links.push(link);
            }
            let (serving, rsrp) = best;
            let interferers: Vec<_> = net
                .rs_interferers(serving)
                .map(|c| (links[c], net.cells[c].p_rs_dbm))
                .collect();
            let sinr = rs_sinr(&links[serving], net.cells[serving].p_rs_dbm, &interferers);

            let i = iy * nx + ix;
            grid.rsrp_dbm[i] = Some(rsrp);
            grid.sinr_db[i] = Some(linear_to_db(sinr));
            grid.serving[i] = Some(serving);
            samples.push(rsrp);
            cov85 += usize::from(rsrp >= PROBE_85_DBM);
            cov80 += usize::from(rsrp >= PROBE_80_DBM);
            fails += usize::from(sinr < fail_lin);
            let tp = (1.0 + sinr).log2().min(cfg.throughput_cap);
            cell_tp[serving].0 += tp;
            cell_tp[serving].1 += 1;
        }
    }

    let bins = samples.len();
    samples.sort_by(f64::total_cmp);
    let frac = |n: usize| if bins == 0 { 0.0 } else { n as f64 / bins as f64 };
    let served: Vec<f64> = cell_tp.iter().filter(|(_, n)| *n > 0).map(|(s, n)| s / *n as f64).collect();
    let throughput = if served.is_empty() {
        0.0
    } else {
        served.iter().sum::<f64>() / served.len() as f64
    };
    let report = KpiReport {
        round,
        bins,
        rsrp_cdf_dbm: samples,
        coverage_85: frac(cov85),
        coverage_80: frac(cov80),
        coverage_holes: count_holes(&grid, cfg.hole_threshold_dbm),
        throughput_proxy: throughput,
        rrc_failure_proxy: frac(fails),
    };
    (report, grid)
}

/// 4-connected components of in-cluster bins below `threshold_dbm`.
pub fn count_holes(grid: &HeatGrid, threshold_dbm: f64) -> usize {
    let (nx, ny) = (grid.nx, grid.ny);
    let weak = |i: usize| grid.rsrp_dbm[i].is_some_and(|r| r < threshold_dbm);
    let mut seen = vec![false; nx * ny];
    let mut holes = 0;
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        if seen[start] || !weak(start) {
            continue;
        }
        holes += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % nx, i / nx);
            let mut visit = |j: usize| {
                if !seen[j] && weak(j) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < nx {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - nx);
            }
            if y + 1 < ny {
                visit(i + nx);
            }
        }
    }
    holes
}
