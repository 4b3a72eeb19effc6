//! Spatial grid of Monte-Carlo averaged optimal SNR, with LOS/NLOS labels.
//!
//! File format (version 1): `#` comment lines, then `key=value` header lines
//! (`version`, `nx`, `ny`, `cell_w`, `cell_h`, `origin_x`, `origin_y`,
//! `scenario_hash`, `seed`, `draws_per_cell`), then the CSV column line
//! `ix,iy,x,y,ap_class,irs_class,avg_opt_snr_linear,n_draws` and one row per
//! cell in row-major order (`iy` outer). Floats are written with Rust's
//! shortest round-trip decimal formatting, so a load reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{draw_channel_with, optimal_beamformer, snr, StaticLink};
use crate::error::{Error, Result};
use crate::scenario::{los_class, LinkClass, Position, Scenario, Visibility};

pub const MAP_FORMAT_VERSION: u32 = 1;
const COLUMNS: &str = "ix,iy,x,y,ap_class,irs_class,avg_opt_snr_linear,n_draws";

#[derive(Clone, Debug, PartialEq)]
pub struct MapCell {
    pub ix: usize,
    pub iy: usize,
    pub center: Position,
    pub class: LinkClass,
    /// Average of the beamforming-optimal linear SNR over the draws.
    pub avg_opt_snr: f64,
    pub n_draws: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadioMap {
    pub nx: usize,
    pub ny: usize,
    pub cell_w: f64,
    pub cell_h: f64,
    pub origin: Position,
    pub scenario_hash: String,
    pub seed: u64,
    pub draws_per_cell: u32,
    /// Row-major, `iy * nx + ix`.
    pub cells: Vec<MapCell>,
}

/// Mean and unbiased sample standard deviation of one cell's draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    pub std_dev: f64,
}

fn cell_center(scenario: &Scenario, nx: usize, ny: usize, ix: usize, iy: usize) -> Position {
    let ws = &scenario.workspace;
    let w = ws.width() / nx as f64;
    let h = ws.height() / ny as f64;
    Position::new(ws.x_min + (ix as f64 + 0.5) * w, ws.y_min + (iy as f64 + 0.5) * h)
}

/// Runs the Monte-Carlo average for one cell. The generator is seeded with
/// `seed` and switched to stream `index`, so every cell has its own
/// independent sequence regardless of evaluation order.
fn simulate_cell(
    scenario: &Scenario,
    link: &StaticLink,
    q: Position,
    class: LinkClass,
    draws: u32,
    seed: u64,
    index: u64,
) -> CellStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=draws {
        let d = draw_channel_with(&mut rng, link, q, scenario, class);
        let v = match optimal_beamformer(&d) {
            Ok(bf) => snr(&d, &bf, scenario),
            Err(_) => 0.0,
        };
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    let std_dev = if draws > 1 {
        (m2 / (draws - 1) as f64).sqrt()
    } else {
        0.0
    };
    CellStats { mean, std_dev }
}

fn check_args(nx: usize, ny: usize, draws: u32) -> Result<()> {
    if nx < 1 || ny < 1 {
        return Err(Error::Domain(format!("grid must be non-empty, got {nx}x{ny}")));
    }
    if draws < 1 {
        return Err(Error::Domain("draws_per_cell must be at least 1".into()));
    }
    Ok(())
}

/// Builds the map and returns each cell's sample standard deviation alongside.
pub fn build_map_with_spread(
    scenario: &Scenario,
    nx: usize,
    ny: usize,
    draws_per_cell: u32,
    seed: u64,
) -> Result<(RadioMap, Vec<f64>)> {
    check_args(nx, ny, draws_per_cell)?;
    let link = StaticLink::new(scenario);
    let results: Vec<(MapCell, f64)> = (0..nx * ny)
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % nx, i / nx);
            let center = cell_center(scenario, nx, ny, ix, iy);
            let class = los_class(center, scenario);
            let stats = simulate_cell(scenario, &link, center, class, draws_per_cell, seed, i as u64);
            let cell = MapCell {
                ix,
                iy,
                center,
                class,
                avg_opt_snr: stats.mean,
                n_draws: draws_per_cell,
            };
            (cell, stats.std_dev)
        })
        .collect();
    let (cells, spread) = results.into_iter().unzip();
    let ws = &scenario.workspace;
    let map = RadioMap {
        nx,
        ny,
        cell_w: ws.width() / nx as f64,
        cell_h: ws.height() / ny as f64,
        origin: Position::new(ws.x_min, ws.y_min),
        scenario_hash: scenario.hash(),
        seed,
        draws_per_cell,
        cells,
    };
    Ok((map, spread))
}

/// Builds the radio map: per cell center, classify visibility, average the
/// optimal SNR over `draws_per_cell` channel draws. Deterministic in `seed`
/// and independent of the number of worker threads.
pub fn build_map(scenario: &Scenario, nx: usize, ny: usize, draws_per_cell: u32, seed: u64) -> Result<RadioMap> {
    build_map_with_spread(scenario, nx, ny, draws_per_cell, seed).map(|(m, _)| m)
}

impl RadioMap {
    pub fn cell(&self, ix: usize, iy: usize) -> &MapCell {
        &self.cells[iy * self.nx + ix]
    }

    /// Number of cells in each link class, indexed by [`LinkClass::index`].
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for c in &self.cells {
            counts[c.class.index()] += 1;
        }
        counts
    }

    /// Bilinear interpolation between cell centers. Positions outside the
    /// center lattice are clamped to it; positions outside the workspace
    /// additionally log a warning.
    pub fn snr_at(&self, q: Position) -> f64 {
        let fx = (q.x - self.origin.x) / self.cell_w - 0.5;
        let fy = (q.y - self.origin.y) / self.cell_h - 0.5;
        let outside = q.x < self.origin.x
            || q.y < self.origin.y
            || q.x > self.origin.x + self.nx as f64 * self.cell_w
            || q.y > self.origin.y + self.ny as f64 * self.cell_h;
        if outside {
            log::warn!(
                "radio map lookup at ({}, {}) outside the mapped area; clamping",
                q.x,
                q.y
            );
        }
        let fx = fx.clamp(0.0, (self.nx - 1) as f64);
        let fy = fy.clamp(0.0, (self.ny - 1) as f64);
        let x0 = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let y0 = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let x1 = (x0 + 1).min(self.nx - 1);
        let y1 = (y0 + 1).min(self.ny - 1);
        let tx = (fx - x0 as f64).clamp(0.0, 1.0);
        let ty = (fy - y0 as f64).clamp(0.0, 1.0);
        let v = |ix, iy| self.cell(ix, iy).avg_opt_snr;
        let bottom = v(x0, y0) * (1.0 - tx) + v(x1, y0) * tx;
        let top = v(x0, y1) * (1.0 - tx) + v(x1, y1) * tx;
        bottom * (1.0 - ty) + top * ty
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# irsplan radio map\n");
        let _ = writeln!(out, "version={MAP_FORMAT_VERSION}");
        let _ = writeln!(out, "nx={}", self.nx);
        let _ = writeln!(out, "ny={}", self.ny);
        let _ = writeln!(out, "cell_w={}", self.cell_w);
        let _ = writeln!(out, "cell_h={}", self.cell_h);
        let _ = writeln!(out, "origin_x={}", self.origin.x);
        let _ = writeln!(out, "origin_y={}", self.origin.y);
        let _ = writeln!(out, "scenario_hash={}", self.scenario_hash);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "draws_per_cell={}", self.draws_per_cell);
        out.push_str(COLUMNS);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.ix,
                c.iy,
                c.center.x,
                c.center.y,
                c.class.ap.as_str(),
                c.class.irs.as_str(),
                c.avg_opt_snr,
                c.n_draws
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: Vec<(usize, String, String)> = Vec::new();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut columns_line = None;
        for (no, line) in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == COLUMNS {
                columns_line = Some(no);
                break;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(no, "header", format!("expected key=value, got `{line}`")));
            };
            header.push((no, k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| -> Result<(usize, &str)> {
            header
                .iter()
                .find(|(_, k, _)| k == key)
                .map(|(n, _, v)| (*n, v.as_str()))
                .ok_or_else(|| Error::parse(0, key, "missing header field"))
        };
        let (vline, version) = get("version")?;
        if version != MAP_FORMAT_VERSION.to_string() {
            let _ = vline;
            return Err(Error::UnsupportedVersion {
                found: version.to_string(),
                expected: MAP_FORMAT_VERSION,
            });
        }
        fn num<T: std::str::FromStr>(v: (usize, &str), key: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.1.parse::<T>()
                .map_err(|e| Error::parse(v.0, key, format!("`{}`: {e}", v.1)))
        }
        let nx: usize = num(get("nx")?, "nx")?;
        let ny: usize = num(get("ny")?, "ny")?;
        let cell_w: f64 = num(get("cell_w")?, "cell_w")?;
        let cell_h: f64 = num(get("cell_h")?, "cell_h")?;
        let origin = Position::new(num(get("origin_x")?, "origin_x")?, num(get("origin_y")?, "origin_y")?);
        let scenario_hash = get("scenario_hash")?.1.to_string();
        let seed: u64 = num(get("seed")?, "seed")?;
        let draws_per_cell: u32 = num(get("draws_per_cell")?, "draws_per_cell")?;
        let Some(mut last_line) = columns_line else {
            return Err(Error::parse(
                text.lines().count() + 1,
                "columns",
                "missing column header line",
            ));
        };
        let expected = nx * ny;
        let mut cells = Vec::with_capacity(expected);
        for (no, line) in lines {
            last_line = no;
            if line.trim().is_empty() {
                continue;
            }
            cells.push(parse_row(no, line)?);
        }
        if cells.len() != expected {
            return Err(Error::parse(
                last_line + 1,
                "row",
                format!("expected {expected} cell rows, found {}", cells.len()),
            ));
        }
        for (i, c) in cells.iter().enumerate() {
            if c.ix != i % nx || c.iy != i / nx {
                return Err(Error::parse(
                    columns_line.unwrap_or(0) + 1 + i,
                    "ix",
                    format!("cell ({}, {}) out of row-major order", c.ix, c.iy),
                ));
            }
        }
        Ok(RadioMap {
            nx,
            ny,
            cell_w,
            cell_h,
            origin,
            scenario_hash,
            seed,
            draws_per_cell,
            cells,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_row(no: usize, line: &str) -> Result<MapCell> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 8 {
        return Err(Error::parse(no, "row", format!("expected 8 fields, found {}", f.len())));
    }
    fn p<T: std::str::FromStr>(no: usize, name: &str, s: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        s.parse::<T>()
            .map_err(|e| Error::parse(no, name, format!("`{s}`: {e}")))
    }
    let vis = |name: &str, s: &str| {
        Visibility::parse(s).ok_or_else(|| Error::parse(no, name, format!("`{s}` is not LOS or NLOS")))
    };
    let avg: f64 = p(no, "avg_opt_snr_linear", f[6])?;
    if !(avg >= 0.0) {
        return Err(Error::parse(no, "avg_opt_snr_linear", "must be a nonnegative number"));
    }
    let n_draws: u32 = p(no, "n_draws", f[7])?;
    if n_draws < 1 {
        return Err(Error::parse(no, "n_draws", "must be at least 1"));
    }
    Ok(MapCell {
        ix: p(no, "ix", f[0])?,
        iy: p(no, "iy", f[1])?,
        center: Position::new(p(no, "x", f[2])?, p(no, "y", f[3])?),
        class: LinkClass::new(vis("ap_class", f[4])?, vis("irs_class", f[5])?),
        avg_opt_snr: avg,
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, optimal_snr_closed_form};
    use crate::scenario::ScenarioConfig;

    fn small_scenario(m: usize) -> Scenario {
        ScenarioConfig::reference().build().unwrap().with_irs_elements(m)
    }

    #[test]
    fn single_cell_single_draw_matches_that_draw() {
        let s = small_scenario(8);
        let map = build_map(&s, 1, 1, 1, 42).unwrap();
        let c = &map.cells[0];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(0);
        let d = draw_channel_with(&mut rng, &StaticLink::new(&s), c.center, &s, c.class);
        let expect = optimal_snr_closed_form(&d, d.d_a, d.d_i, &s);
        assert!(((c.avg_opt_snr - expect) / expect).abs() < 1e-9);
        let _ = draw_channel;
    }

    #[test]
    fn same_seed_same_map() {
        let s = small_scenario(4);
        let a = build_map(&s, 10, 6, 5, 7).unwrap();
        let b = build_map(&s, 10, 6, 5, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_map(&s, 10, 6, 5, 8).unwrap());
    }

    #[test]
    fn thread_count_does_not_change_map() {
        let s = small_scenario(4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| build_map(&s, 8, 5, 3, 1).unwrap());
        let b = three.install(|| build_map(&s, 8, 5, 3, 1).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = small_scenario(4);
        let map = build_map(&s, 6, 4, 3, 11).unwrap();
        let back = RadioMap::from_text(&map.to_text()).unwrap();
        assert_eq!(map, back);
        assert_eq!(back.to_text(), map.to_text());
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let s = small_scenario(2);
        let text = build_map(&s, 4, 3, 2, 1).unwrap().to_text();
        let cut: String = text
            .lines()
            .take(text.lines().count() - 2)
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(RadioMap::from_text(&cut), Err(Error::Parse { .. })));
        let mangled = text.replacen(",LOS,", ",MAYBE,", 1);
        match RadioMap::from_text(&mangled) {
            Err(Error::Parse { field, .. }) => assert!(field.ends_with("class")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let s = small_scenario(2);
        let text = build_map(&s, 2, 2, 1, 1)
            .unwrap()
            .to_text()
            .replace("version=1", "version=9");
        assert!(matches!(
            RadioMap::from_text(&text),
            Err(Error::UnsupportedVersion { .. })
        ));
    }

    #[test]
    fn bilinear_lookup_hits_cell_centers() {
        let s = small_scenario(2);
        let map = build_map(&s, 5, 4, 2, 3).unwrap();
        for c in &map.cells {
            let v = map.snr_at(c.center);
            assert!((v - c.avg_opt_snr).abs() <= 1e-12 * c.avg_opt_snr.max(1.0));
        }
        // clamped outside the workspace
        let corner = map.cell(0, 0).avg_opt_snr;
        assert!((map.snr_at(Position::new(-5.0, -5.0)) - corner).abs() <= 1e-12 * corner);
    }

    #[test]
    fn cell_counts_cover_the_grid() {
        let s = small_scenario(2);
        let map = build_map(&s, 10, 6, 1, 3).unwrap();
        assert_eq!(map.class_counts().iter().sum::<usize>(), 60);
        assert_eq!(map.cell_w, 5.0);
    }
}
