//! CSV artifacts: trajectories, SCO traces and sweep tables.
//!
//! Every file starts with a `# irsplan <kind> v<version>` line followed by a
//! column header. Floats use the shortest representation that parses back to
//! the same value, so trajectories round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::{los_class, step_energy, Position, Scenario};
use crate::sco::ScoTrace;
use crate::snrmodel::{rate_at, SnrModel};

pub const TRAJECTORY_CSV_VERSION: u32 = 1;
pub const TRACE_CSV_VERSION: u32 = 1;
pub const SWEEP_CSV_VERSION: u32 = 1;

const TRAJECTORY_MAGIC: &str = "# irsplan trajectory v";
const TRAJECTORY_COLUMNS: &str = "k,x,y,step_length,slot_energy,slot_rate_bits_s,ap_class,irs_class";
const TRACE_COLUMNS: &str =
    "iteration,energy_j,improvement,status,max_violation,candidate_energy_j,trust_radius,retries,solver_iterations";

/// Renders a trajectory with its per-slot accounting. Slot 0 has no step, so
/// its step length and energy are zero.
pub fn trajectory_csv(traj: &[Position], scenario: &Scenario, model: &SnrModel) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{TRAJECTORY_MAGIC}{TRAJECTORY_CSV_VERSION}");
    out.push_str(TRAJECTORY_COLUMNS);
    out.push('\n');
    for (k, &q) in traj.iter().enumerate() {
        let (len, energy) = if k == 0 {
            (0.0, 0.0)
        } else {
            let l = q.distance(traj[k - 1]);
            (l, step_energy(l, scenario))
        };
        let class = los_class(q, scenario);
        let rate = rate_at(model, class, q, scenario)?;
        let _ = writeln!(
            out,
            "{k},{},{},{len},{energy},{rate},{},{}",
            q.x,
            q.y,
            class.ap.as_str(),
            class.irs.as_str()
        );
    }
    Ok(out)
}

/// Reads the waypoints back; the derived columns are ignored.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<Position>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "header", "empty trajectory file"))?;
    let version = first
        .trim()
        .strip_prefix(TRAJECTORY_MAGIC)
        .ok_or_else(|| Error::parse(1, "header", format!("expected `{TRAJECTORY_MAGIC}N`")))?;
    if version != TRAJECTORY_CSV_VERSION.to_string() {
        return Err(Error::UnsupportedVersion {
            found: version.to_string(),
            expected: TRAJECTORY_CSV_VERSION,
        });
    }
    match lines.next() {
        Some((_, l)) if l.trim() == TRAJECTORY_COLUMNS => {}
        Some((no, l)) => return Err(Error::parse(no, "columns", format!("unexpected column line `{l}`"))),
        None => return Err(Error::parse(2, "columns", "missing column line")),
    }
    let mut traj = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                no,
                "row",
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(no, "k", format!("not an index: `{}`", fields[0])))?;
        if k != traj.len() {
            return Err(Error::parse(no, "k", format!("expected {}, got {k}", traj.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::parse(no, name, format!("not a number: `{}`", fields[i])))
        };
        traj.push(Position::new(num(1, "x")?, num(2, "y")?));
    }
    if traj.is_empty() {
        return Err(Error::parse(0, "row", "trajectory has no waypoints"));
    }
    Ok(traj)
}

pub fn save_trajectory(path: &Path, traj: &[Position], scenario: &Scenario, model: &SnrModel) -> Result<()> {
    write_file(path, &trajectory_csv(traj, scenario, model)?)
}

pub fn load_trajectory(path: &Path) -> Result<Vec<Position>> {
    parse_trajectory_csv(&read_file(path)?)
}

/// One row per SCO iteration; wall time is left out so reruns are identical.
pub fn trace_csv(trace: &ScoTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# irsplan sco-trace v{TRACE_CSV_VERSION}");
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    let mut prev = None;
    for it in &trace.iterations {
        let improvement = prev.map_or(0.0, |p| it.improvement(p));
        let candidate = it.candidate_energy.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{improvement},{},{},{candidate},{},{},{}",
            it.iteration,
            it.energy,
            it.status.as_str(),
            it.audit.max_violation(),
            it.trust_radius,
            it.retries,
            it.solver_iterations
        );
        prev = Some(it.energy);
    }
    out
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub irs_elements: usize,
    pub r_min_gbps: f64,
    pub seed: u64,
    /// `planned`, `infeasible` or `failed`.
    pub status: String,
    pub initial_solution: Option<String>,
    pub energy_j: Option<f64>,
    pub average_rate_bits_s: Option<f64>,
    pub iterations: Option<usize>,
    pub dir: String,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# irsplan sweep v{SWEEP_CSV_VERSION}");
    out.push_str("irs_elements,r_min_gbps,seed,status,initial_solution,energy_j,average_rate_bits_s,iterations,dir\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.irs_elements,
            r.r_min_gbps,
            r.seed,
            r.status,
            opt(r.initial_solution.clone()),
            opt(r.energy_j.map(|v| v.to_string())),
            opt(r.average_rate_bits_s.map(|v| v.to_string())),
            opt(r.iterations.map(|v| v.to_string())),
            r.dir
        );
    }
    out
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
