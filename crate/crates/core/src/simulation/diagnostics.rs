//! Conserved quantities, energies and rank statistics, and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{electric_energy, SpatialField};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::tt::{DenseTensor, TTTensor};

/// One row of the diagnostics time series.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub l2_norm: f64,
    pub kinetic_energy: f64,
    pub electric_energy: Vec<f64>,
    pub total_energy: f64,
    /// Interior bond ranks; all zero for full-grid runs.
    pub ranks: Vec<usize>,
    pub stored_doubles: usize,
    /// `stored_doubles / Π n_k`.
    pub compression_rate: f64,
}

impl DiagnosticsRecord {
    pub fn electric_energy_total(&self) -> f64 {
        self.electric_energy.iter().sum()
    }
}

/// Per-axis weight vectors in tensor order: `v_k` on `V(k)`, ones elsewhere.
fn velocity_weights(grid: &PhaseSpaceGrid, power: i32, axis: usize) -> Vec<Vec<f64>> {
    grid.ordering()
        .iter()
        .map(|a| match *a {
            Axis::V(i) if i == axis => grid.v_nodes(i).iter().map(|v| v.powi(power)).collect(),
            Axis::V(i) => vec![1.0; grid.nv()[i]],
            Axis::X(i) => vec![1.0; grid.nx()[i]],
        })
        .collect()
}

fn contract_with(f: &TTTensor, w: &[Vec<f64>]) -> Result<f64> {
    let refs: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
    f.contract(&refs)
}

/// `cell · Σ f`.
pub fn mass(f: &TTTensor, grid: &PhaseSpaceGrid) -> Result<f64> {
    Ok(grid.cell_volume() * contract_with(f, &velocity_weights(grid, 0, usize::MAX))?)
}

/// `cell · Σ f v_k` for every velocity axis.
pub fn momentum(f: &TTTensor, grid: &PhaseSpaceGrid) -> Result<Vec<f64>> {
    (0..grid.spatial_dims())
        .map(|k| Ok(grid.cell_volume() * contract_with(f, &velocity_weights(grid, 1, k))?))
        .collect()
}

pub fn tt_diagnostics(time: f64, f: &TTTensor, e: &[SpatialField], grid: &PhaseSpaceGrid) -> Result<DiagnosticsRecord> {
    let cell = grid.cell_volume();
    let d = grid.spatial_dims();
    let mut kinetic = 0.0;
    for k in 0..d {
        kinetic += 0.5 * cell * contract_with(f, &velocity_weights(grid, 2, k))?;
    }
    let ranks = f.ranks();
    let interior = ranks[1..ranks.len() - 1].to_vec();
    let stored = f.storage();
    Ok(finish(DiagnosticsRecord {
        time,
        mass: mass(f, grid)?,
        momentum: momentum(f, grid)?,
        l2_norm: f.norm() * cell.sqrt(),
        kinetic_energy: kinetic,
        electric_energy: electric_energy(e),
        total_energy: 0.0,
        ranks: interior,
        stored_doubles: stored,
        compression_rate: stored as f64 / grid.total_points() as f64,
    }))
}

pub fn dense_diagnostics(time: f64, f: &DenseTensor, e: &[SpatialField], grid: &PhaseSpaceGrid) -> Result<DiagnosticsRecord> {
    let cell = grid.cell_volume();
    let d = grid.spatial_dims();
    let vpos: Vec<(usize, Vec<f64>)> = (0..d).map(|i| (grid.position(Axis::V(i)), grid.v_nodes(i))).collect();
    let shape = grid.mode_sizes();
    let mut idx = vec![0; shape.len()];
    let (mut m, mut l2, mut kin) = (0.0, 0.0, 0.0);
    let mut mom = vec![0.0; d];
    for &x in f.data() {
        m += x;
        l2 += x * x;
        for (k, (p, v)) in vpos.iter().enumerate() {
            let vk = v[idx[*p]];
            mom[k] += x * vk;
            kin += x * vk * vk;
        }
        crate::tt::dense_increment(&mut idx, &shape);
    }
    Ok(finish(DiagnosticsRecord {
        time,
        mass: cell * m,
        momentum: mom.iter().map(|p| cell * p).collect(),
        l2_norm: (cell * l2).sqrt(),
        kinetic_energy: 0.5 * cell * kin,
        electric_energy: electric_energy(e),
        total_energy: 0.0,
        ranks: vec![0; shape.len() - 1],
        stored_doubles: f.len(),
        compression_rate: 1.0,
    }))
}

fn finish(mut r: DiagnosticsRecord) -> DiagnosticsRecord {
    r.total_energy = r.kinetic_energy + r.electric_energy_total();
    r
}

/// Column names in output order.
pub fn columns(spatial_dims: usize) -> Vec<String> {
    let mut c = vec!["time".to_string(), "mass".into()];
    c.extend((1..=spatial_dims).map(|k| format!("momentum_{k}")));
    c.push("l2_norm".into());
    c.push("kinetic_energy".into());
    c.extend((1..=spatial_dims).map(|k| format!("electric_energy_{k}")));
    c.push("total_energy".into());
    c.extend((1..2 * spatial_dims).map(|k| format!("r_{k}")));
    c.push("stored_doubles".into());
    c.push("compression_rate".into());
    c
}

fn row(r: &DiagnosticsRecord) -> Vec<String> {
    let mut out = vec![fmt(r.time), fmt(r.mass)];
    out.extend(r.momentum.iter().map(|&x| fmt(x)));
    out.push(fmt(r.l2_norm));
    out.push(fmt(r.kinetic_energy));
    out.extend(r.electric_energy.iter().map(|&x| fmt(x)));
    out.push(fmt(r.total_energy));
    out.extend(r.ranks.iter().map(usize::to_string));
    out.push(r.stored_doubles.to_string());
    out.push(fmt(r.compression_rate));
    out
}

/// Shortest representation that parses back to the same value.
fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// Writes diagnostics with a `#` comment line describing the columns.
pub fn write_diagnostics(mut out: impl Write, spatial_dims: usize, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(
        out,
        "# ttsl diagnostics: time, mass, momentum per axis, l2 norm, kinetic energy, electric energy per axis, \
         total energy, interior ranks (0 on the full grid), stored doubles, compression rate"
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns(spatial_dims))?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Rank history: time followed by every bond rank including the outer ones.
pub fn write_ranks(mut out: impl Write, history: &[(f64, Vec<usize>)]) -> Result<()> {
    writeln!(out, "# ttsl rank history: time, r_0 .. r_D")?;
    let mut w = csv::Writer::from_writer(out);
    if let Some((_, first)) = history.first() {
        let mut header = vec!["time".to_string()];
        header.extend((0..first.len()).map(|k| format!("r_{k}")));
        w.write_record(header)?;
    }
    for (t, ranks) in history {
        let mut rec = vec![fmt(*t)];
        rec.extend(ranks.iter().map(usize::to_string));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Electric field samples: time, component, then the field values with the
/// first spatial axis fastest.
pub fn write_efield(mut out: impl Write, history: &[(f64, Vec<SpatialField>)]) -> Result<()> {
    writeln!(out, "# ttsl electric field: time, component, values (first spatial axis fastest)")?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for (t, e) in history {
        for (k, c) in e.iter().enumerate() {
            let mut rec = vec![fmt(*t), (k + 1).to_string()];
            rec.extend(c.values.data().iter().map(|&x| fmt(x)));
            w.write_record(rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A numeric table read back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Reads a diagnostics or rank file, skipping `#` comment lines.
pub fn read_table(input: impl Read) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    Ok(Table { columns, rows })
}

/// Strict local maxima of `values` with `lo ≤ time ≤ hi`.
pub fn local_maxima(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| times[i] >= lo && times[i] <= hi)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| (times[i], values[i]))
        .collect()
}

/// Least-squares slope of `ln(peak)` against time over the local maxima of an
/// oscillating, decaying or growing energy curve in `[lo, hi]`. `None` with
/// fewer than two peaks.
pub fn fitted_rate(times: &[f64], energy: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let peaks: Vec<(f64, f64)> = local_maxima(times, energy, lo, hi).into_iter().filter(|p| p.1 > 0.0).collect();
    if peaks.len() < 2 {
        return None;
    }
    let n = peaks.len() as f64;
    let mt = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let my = peaks.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{density, poisson_solve};
    use crate::simulation::cases::maxwellian;

    fn maxwellian_state(grid: &PhaseSpaceGrid) -> TTTensor {
        let vecs = grid
            .ordering()
            .iter()
            .map(|a| match *a {
                Axis::V(i) => grid.v_nodes(i).iter().map(|&v| maxwellian(v)).collect(),
                Axis::X(i) => vec![1.0; grid.nx()[i]],
            })
            .collect();
        TTTensor::rank_one(vecs)
    }

    #[test]
    fn maxwellian_integrals() {
        let grid = PhaseSpaceGrid::landau(2, 8, 64, 0.5).unwrap();
        let f = maxwellian_state(&grid);
        let e = poisson_solve(&density(&f, &grid).unwrap()).unwrap().e;
        let r = tt_diagnostics(0.0, &f, &e, &grid).unwrap();
        let vol = grid.spatial_volume();
        assert!((r.mass - vol).abs() <= 1e-8 * vol);
        // asymmetric node set: Σ v g(v) picks up the unmatched node at -6
        assert!(r.momentum.iter().all(|p| p.abs() <= 1e-7 * vol));
        // ½ ∫ |v|² g = d/2 per unit volume
        assert!((r.kinetic_energy - vol).abs() <= 1e-6 * vol);
        assert!(r.electric_energy.iter().all(|&w| w < 1e-20));
        assert_eq!(r.ranks, vec![1, 1, 1]);
        assert_eq!(r.stored_doubles, 64 + 8 + 8 + 64);
        assert!((r.compression_rate - 144.0 / (64.0 * 64.0 * 64.0)).abs() < 1e-18);
    }

    #[test]
    fn dense_and_tt_agree() {
        let grid = PhaseSpaceGrid::landau(1, 8, 16, 0.5).unwrap();
        let f = maxwellian_state(&grid).add(&TTTensor::rank_one(vec![vec![0.1; 16], (0..8).map(|i| i as f64).collect()])).unwrap();
        let e = poisson_solve(&density(&f, &grid).unwrap()).unwrap().e;
        let a = tt_diagnostics(1.0, &f, &e, &grid).unwrap();
        let b = dense_diagnostics(1.0, &f.to_dense().unwrap(), &e, &grid).unwrap();
        for (x, y) in [
            (a.mass, b.mass),
            (a.momentum[0], b.momentum[0]),
            (a.l2_norm, b.l2_norm),
            (a.kinetic_energy, b.kinetic_energy),
            (a.total_energy, b.total_energy),
        ] {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn zero_tensor() {
        let grid = PhaseSpaceGrid::landau(1, 8, 16, 0.5).unwrap();
        let f = TTTensor::zeros(&grid.mode_sizes());
        let r = tt_diagnostics(0.0, &f, &[], &grid).unwrap();
        assert_eq!((r.mass, r.momentum[0], r.l2_norm, r.kinetic_energy), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let rec = DiagnosticsRecord {
            time: 0.5,
            mass: 12.566370614359172,
            momentum: vec![-1.25e-17],
            l2_norm: 1.0 / 3.0,
            kinetic_energy: 6.2,
            electric_energy: vec![1e-5],
            total_energy: 6.20001,
            ranks: vec![7],
            stored_doubles: 1120,
            compression_rate: 0.2734375,
        };
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, 1, &[rec.clone(), rec.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with('#'));
        let t = read_table(buf.as_slice()).unwrap();
        assert_eq!(t.columns, columns(1));
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.column("mass").unwrap()[0], rec.mass);
        assert_eq!(t.column("l2_norm").unwrap()[1], rec.l2_norm);
        assert_eq!(t.column("r_1").unwrap()[0], 7.0);
    }

    #[test]
    fn fitted_rate_of_a_damped_oscillation() {
        let times: Vec<f64> = (0..4000).map(|i| i as f64 * 0.01).collect();
        let energy: Vec<f64> = times.iter().map(|t| (-0.3066 * t).exp() * (1.4156 * t).cos().powi(2) + 1e-30).collect();
        let rate = fitted_rate(&times, &energy, 1.0, 15.0).unwrap();
        // peaks of e^{-γt}cos²(ωt) sit slightly before the cosine maxima; the
        // slope is still γ to within the sampling step
        assert!((rate + 0.3066).abs() < 2e-3, "{rate}");
        assert!(fitted_rate(&times[..50], &energy[..50], 0.0, 0.5).is_none());
        let peaks = local_maxima(&times, &energy, 1.0, 15.0);
        assert!(peaks.windows(2).all(|w| (w[1].0 - w[0].0 - std::f64::consts::PI / 1.4156).abs() < 0.02));
    }
}
