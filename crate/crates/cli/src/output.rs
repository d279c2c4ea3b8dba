//! Energy CSV and snapshot writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use harvestdiff_core::coeff::Species;
use harvestdiff_core::grid::ScalarField;
use harvestdiff_core::trajectory::Trajectory;

pub const ENERGY_HEADER: &str = "t,energy_u,energy_v,mass_u,mass_v";

/// Energy table with 17 significant digits per value.
pub fn format_energy_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(80 * (traj.records.len() + 1));
    out.push_str(ENERGY_HEADER);
    out.push('\n');
    for r in &traj.records {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.t, r.energy_u, r.energy_v, r.mass_u, r.mass_v
        ));
    }
    out
}

pub fn write_energy_csv(traj: &Trajectory, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(format_energy_csv(traj).as_bytes())?;
    w.flush()
}

/// `# t=.. n=.. field=..` followed by one row per `y` level.
pub fn format_field(t: f64, species: Species, field: &ScalarField) -> String {
    let n = field.grid().n();
    let mut out = format!("# t={t} n={n} field={species}\n");
    for row in field.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes one species of snapshot `index`.
pub fn write_snapshot(traj: &Trajectory, index: usize, species: Species, path: &Path) -> io::Result<()> {
    let snap = traj.snapshots.get(index).ok_or_else(|| {
        io::Error::new(io::ErrorKind::NotFound, format!("no snapshot with index {index}"))
    })?;
    let field = match species {
        Species::U => &snap.u,
        Species::V => &snap.v,
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(format_field(snap.t, species, field).as_bytes())?;
    w.flush()
}

/// File name used for snapshot `index` of `species` inside an output directory.
pub fn snapshot_file_name(index: usize, species: Species) -> String {
    format!("snapshot_{index:03}_{species}.csv")
}
