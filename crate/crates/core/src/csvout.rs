//! CSV writers (and one reader) for run artifacts.
//!
//! All numbers use Rust's shortest round-trip float formatting, so a rerun
//! with identical inputs produces byte-identical files and `read_design`
//! recovers the exact values that were written.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{DensityField, PhysicalDesign};
use crate::materials::{InterpScheme, IronModel};
use crate::optimizer::{tanh_projection, HistoryRow};
use crate::postprocess::{Clustering, MagnetCell};
use crate::torque::TorqueSample;

/// Optimization history, one row per outer iteration.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("iter,lagrangian,t_bar_nm,vol_iron,vol_magnet,step,grad_inf\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter, r.lagrangian, r.t_bar, r.vol_iron, r.vol_mag, r.step, r.grad_inf
        );
    }
    out
}

pub fn write_history(path: impl AsRef<Path>, rows: &[HistoryRow]) -> Result<()> {
    std::fs::write(path, history_csv(rows))?;
    Ok(())
}

/// Torque over rotor angle.
pub fn sweep_csv(samples: &[TorqueSample]) -> String {
    let mut out = String::from("theta_rad,torque_nm,newton_iters\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{}", s.theta, s.torque, s.newton_iters);
    }
    out
}

pub fn write_sweep(path: impl AsRef<Path>, samples: &[TorqueSample]) -> Result<()> {
    std::fs::write(path, sweep_csv(samples))?;
    Ok(())
}

/// Cluster report: which block each magnet cell landed in and how far its
/// angle moved.
pub fn cluster_csv(cells: &[MagnetCell], clustering: &Clustering) -> String {
    let mut out = String::from("element_id,cluster_id,angle_before_rad,angle_after_rad\n");
    for (cell, &j) in cells.iter().zip(&clustering.assignments) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            cell.element, j, cell.angle, clustering.centroids[j].angle
        );
    }
    out
}

pub fn write_clusters(
    path: impl AsRef<Path>,
    cells: &[MagnetCell],
    clustering: &Clustering,
) -> Result<()> {
    std::fs::write(path, cluster_csv(cells, clustering))?;
    Ok(())
}

/// Raw design densities, suitable for chaining runs.
pub fn design_csv(field: &DensityField) -> String {
    let mut out = String::from("element_id,rho_nu,rho_mx,rho_my\n");
    for e in 0..field.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e, field.rho_nu[e], field.rho_mx[e], field.rho_my[e]
        );
    }
    out
}

pub fn write_design(path: impl AsRef<Path>, field: &DensityField) -> Result<()> {
    std::fs::write(path, design_csv(field))?;
    Ok(())
}

/// Parse a design CSV written by [`write_design`]. Element ids must be
/// 0..n in order; values are recovered exactly.
pub fn read_design(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut field = DensityField::constant(0, 0.0, 0.0, 0.0);
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "element_id,rho_nu,rho_mx,rho_my" {
                return Err(Error::Config(format!(
                    "{}:1: not a design CSV (unexpected header '{line}')",
                    path.display()
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let bad = |what: &str| {
            Error::Config(format!(
                "{}:{}: {what} in '{line}'",
                path.display(),
                lineno + 1
            ))
        };
        let id: usize = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad("bad element id"))?;
        if id != field.len() {
            return Err(bad("element ids must run 0..n in order"));
        }
        let mut val = || -> Result<f64> {
            cols.next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad("bad density value"))
        };
        field.rho_nu.push(val()?);
        field.rho_mx.push(val()?);
        field.rho_my.push(val()?);
    }
    if field.is_empty() {
        return Err(Error::Config(format!(
            "{}: design CSV has no rows",
            path.display()
        )));
    }
    Ok(field)
}

/// Filtered and projected design: the fields the solver actually sees.
/// This is what post-processing consumes, so it can run in a separate
/// invocation without reconstructing the filter chain.
pub fn physical_csv(design: &PhysicalDesign) -> String {
    let mut out = String::from("element_id,rho_nu,mag_x,mag_y\n");
    for e in 0..design.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e, design.rho_nu[e], design.mag[e][0], design.mag[e][1]
        );
    }
    out
}

pub fn write_physical(path: impl AsRef<Path>, design: &PhysicalDesign) -> Result<()> {
    std::fs::write(path, physical_csv(design))?;
    Ok(())
}

/// Parse a physical design CSV written by [`write_physical`].
pub fn read_physical(path: impl AsRef<Path>) -> Result<PhysicalDesign> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rho_nu = Vec::new();
    let mut mag = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "element_id,rho_nu,mag_x,mag_y" {
                return Err(Error::Config(format!(
                    "{}:1: not a physical design CSV (unexpected header '{line}')",
                    path.display()
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let bad = |what: &str| {
            Error::Config(format!(
                "{}:{}: {what} in '{line}'",
                path.display(),
                lineno + 1
            ))
        };
        let id: usize = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad("bad element id"))?;
        if id != rho_nu.len() {
            return Err(bad("element ids must run 0..n in order"));
        }
        let mut val = || -> Result<f64> {
            cols.next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad("bad value"))
        };
        rho_nu.push(val()?);
        mag.push([val()?, val()?]);
    }
    if rho_nu.is_empty() {
        return Err(Error::Config(format!(
            "{}: physical design CSV has no rows",
            path.display()
        )));
    }
    Ok(PhysicalDesign::new(rho_nu, mag))
}

/// Reluctivity curve tabulation: nu(B) and its saturation behavior.
pub fn reluctivity_table_csv(iron: &IronModel, b_max: f64, n: usize) -> String {
    let mut out = String::from("b_tesla,nu\n");
    for i in 0..=n {
        let b = b_max * i as f64 / n as f64;
        let _ = writeln!(out, "{},{}", b, iron.reluctivity(b));
    }
    out
}

/// Density interpolation tabulation for a set of named schemes.
pub fn interpolation_table_csv(schemes: &[(&str, InterpScheme)], n: usize) -> String {
    let mut out = String::from("rho");
    for (name, _) in schemes {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for i in 0..=n {
        let rho = i as f64 / n as f64;
        let _ = write!(out, "{rho}");
        for (_, s) in schemes {
            let _ = write!(out, ",{}", s.value(rho));
        }
        out.push('\n');
    }
    out
}

/// The tanh projection at several sharpness values.
pub fn projection_table_csv(betas: &[f64], rho_cut: f64, n: usize) -> String {
    let mut out = String::from("rho");
    for b in betas {
        let _ = write!(out, ",beta_{b}");
    }
    out.push('\n');
    for i in 0..=n {
        let rho = i as f64 / n as f64;
        let _ = write!(out, "{rho}");
        for &b in betas {
            let _ = write!(out, ",{}", tanh_projection(rho, b, rho_cut));
        }
        out.push('\n');
    }
    out
}
