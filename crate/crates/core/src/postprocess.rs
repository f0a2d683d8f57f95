//! Magnet feasibility post-processing.
//!
//! Optimized designs carry a freely varying magnetization direction, which
//! no manufacturer will sell. This module groups the magnet elements into
//! `k` blocks of uniform direction: extract the magnet cells from the
//! final design, cluster them by position and magnetization angle with a
//! Lloyd-type K-means under the weighted distance
//!
//! ```text
//! d^2 = (dx/N_x)^2 + (dy/N_y)^2 + alpha * (dbeta/2pi)^2
//! ```
//!
//! and overwrite each cell's direction with its cluster's. The first
//! assignment runs with `alpha = 0` because centroid angles are undefined
//! until a cluster has members.
//!
//! Angles are treated circularly by default: differences wrap to
//! (-pi, pi] and centroid angles use the circular mean, since an
//! arithmetic mean of angles breaks at the 0/2pi seam (two cells at
//! 0.1 and 2pi - 0.1 would average to pi, the opposite direction).
//! `wrap_angles = false` switches both back to plain arithmetic for
//! textbook K-means behavior.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{Machine, PhysicalDesign};

/// One design element that passed the magnet mask.
#[derive(Debug, Clone)]
pub struct MagnetCell {
    /// Design-element index.
    pub element: usize,
    /// Centroid of the triangle at reference rotation.
    pub x: f64,
    pub y: f64,
    /// Magnetization angle in [0, 2pi).
    pub angle: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    /// Coordinate normalizers in meters.
    pub n_x: f64,
    pub n_y: f64,
    /// Weight of the angle term.
    pub alpha_w: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Circular angle differences and means (default). Disable for plain
    /// arithmetic treatment.
    pub wrap_angles: bool,
    /// A cell is a magnet when |M| exceeds this...
    pub mag_threshold: f64,
    /// ...and its iron density stays below this.
    pub iron_threshold: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 5,
            // rotor diameter of the reference machine
            n_x: 0.037,
            n_y: 0.037,
            alpha_w: 1.0,
            max_iters: 100,
            seed: 0,
            wrap_angles: true,
            mag_threshold: 0.5,
            iron_threshold: 0.5,
        }
    }
}

impl ClusterConfig {
    /// Defaults with the coordinate normalizers set to the machine's rotor
    /// diameter.
    pub fn for_machine(machine: &Machine) -> Self {
        let d = 2.0 * machine.geom.rotor_outer;
        ClusterConfig {
            n_x: d,
            n_y: d,
            ..ClusterConfig::default()
        }
    }

    fn validate(&self, n_cells: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Postprocess("cluster count must be >= 1".into()));
        }
        if self.k > n_cells {
            return Err(Error::Postprocess(format!(
                "requested {} clusters but only {} magnet cells exist",
                self.k, n_cells
            )));
        }
        if !(self.n_x > 0.0) || !(self.n_y > 0.0) || self.alpha_w < 0.0 {
            return Err(Error::Postprocess(
                "normalizers must be positive and the angle weight nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
    /// In [0, 2pi).
    pub angle: f64,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    /// Cluster index per cell, parallel to the cell list.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Centroid>,
    /// Lloyd iterations until assignments stabilized.
    pub iterations: usize,
    /// Final sum of squared distances to assigned centroids.
    pub objective: f64,
}

/// Magnet elements of a design: |M| above and iron density below their
/// thresholds. Fails when the mask comes up empty, since clustering
/// nothing is always a configuration mistake.
pub fn extract_magnet_cells(
    machine: &Machine,
    design: &PhysicalDesign,
    mag_threshold: f64,
    iron_threshold: f64,
) -> Result<Vec<MagnetCell>> {
    let centroids = machine.design_centroids();
    let areas = machine.design_areas();
    let mut cells = Vec::new();
    for (e, m) in design.mag.iter().enumerate() {
        let norm = (m[0] * m[0] + m[1] * m[1]).sqrt();
        if norm > mag_threshold && design.rho_nu[e] < iron_threshold {
            let mut angle = m[1].atan2(m[0]);
            if angle < 0.0 {
                angle += 2.0 * PI;
            }
            cells.push(MagnetCell {
                element: e,
                x: centroids[e][0],
                y: centroids[e][1],
                angle,
                area: areas[e],
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::Postprocess(format!(
            "no element has |M| > {mag_threshold} with iron density < {iron_threshold}; \
             relax the thresholds or check that the design actually places magnets"
        )));
    }
    Ok(cells)
}

fn angle_diff(a: f64, b: f64, wrap: bool) -> f64 {
    let d = a - b;
    if wrap {
        d - 2.0 * PI * (d / (2.0 * PI)).round()
    } else {
        d
    }
}

fn dist2(cell: &MagnetCell, c: &Centroid, cfg: &ClusterConfig, alpha: f64) -> f64 {
    let dx = (cell.x - c.x) / cfg.n_x;
    let dy = (cell.y - c.y) / cfg.n_y;
    let db = angle_diff(cell.angle, c.angle, cfg.wrap_angles) / (2.0 * PI);
    dx * dx + dy * dy + alpha * db * db
}

fn mean_angle(cells: &[MagnetCell], members: &[usize], wrap: bool) -> f64 {
    let mut a = if wrap {
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in members {
            sx += cells[i].angle.cos();
            sy += cells[i].angle.sin();
        }
        sy.atan2(sx)
    } else {
        members.iter().map(|&i| cells[i].angle).sum::<f64>() / members.len() as f64
    };
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a
}

/// Lloyd iteration under the weighted distance. Centroid positions start
/// uniformly random over the disk spanned by the cells (seeded, so runs
/// reproduce); the first assignment ignores angles. Stops when an
/// assignment pass changes nothing. Clusters that run empty are re-seeded
/// at the cell currently farthest from its own centroid.
pub fn kmeans_cluster(cells: &[MagnetCell], cfg: &ClusterConfig) -> Result<Clustering> {
    cfg.validate(cells.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let disk_r = cells
        .iter()
        .map(|c| (c.x * c.x + c.y * c.y).sqrt())
        .fold(0.0f64, f64::max);
    let mut centroids: Vec<Centroid> = (0..cfg.k)
        .map(|_| {
            let r = disk_r * rng.random_range(0.0..1.0f64).sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            Centroid {
                x: r * phi.cos(),
                y: r * phi.sin(),
                angle: 0.0,
            }
        })
        .collect();

    let assign = |centroids: &[Centroid], alpha: f64| -> Vec<usize> {
        cells
            .iter()
            .map(|cell| {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (j, c) in centroids.iter().enumerate() {
                    let d = dist2(cell, c, cfg, alpha);
                    // strict inequality: ties go to the lowest index
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignments = assign(&centroids, 0.0);
    let mut iterations = 0usize;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        // means per cluster
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.k];
        for (i, &j) in assignments.iter().enumerate() {
            members[j].push(i);
        }
        for j in 0..cfg.k {
            if members[j].is_empty() {
                continue; // handled below, needs the updated centroids
            }
            let inv = 1.0 / members[j].len() as f64;
            centroids[j] = Centroid {
                x: members[j].iter().map(|&i| cells[i].x).sum::<f64>() * inv,
                y: members[j].iter().map(|&i| cells[i].y).sum::<f64>() * inv,
                angle: mean_angle(cells, &members[j], cfg.wrap_angles),
            };
        }
        let mut reseeded: Vec<usize> = Vec::new();
        for j in 0..cfg.k {
            if !members[j].is_empty() {
                continue;
            }
            // farthest cell from its current centroid, skipping cells a
            // previous empty cluster just claimed
            let (mut far, mut far_d) = (usize::MAX, -1.0);
            for (i, cell) in cells.iter().enumerate() {
                if reseeded.contains(&i) {
                    continue;
                }
                let d = dist2(cell, &centroids[assignments[i]], cfg, cfg.alpha_w);
                if d > far_d {
                    far_d = d;
                    far = i;
                }
            }
            centroids[j] = Centroid {
                x: cells[far].x,
                y: cells[far].y,
                angle: cells[far].angle,
            };
            reseeded.push(far);
        }
        let next = assign(&centroids, cfg.alpha_w);
        if next == assignments {
            break;
        }
        assignments = next;
    }

    let objective = cells
        .iter()
        .zip(&assignments)
        .map(|(cell, &j)| dist2(cell, &centroids[j], cfg, cfg.alpha_w))
        .sum();
    Ok(Clustering {
        assignments,
        centroids,
        iterations,
        objective,
    })
}

/// Overwrite every clustered cell's magnetization with a unit vector along
/// its cluster's centroid angle. Iron densities and non-magnet elements
/// pass through untouched.
pub fn apply_clustering(
    design: &PhysicalDesign,
    cells: &[MagnetCell],
    clustering: &Clustering,
) -> PhysicalDesign {
    let mut mag = design.mag.clone();
    for (cell, &j) in cells.iter().zip(&clustering.assignments) {
        let a = clustering.centroids[j].angle;
        mag[cell.element] = [a.cos(), a.sin()];
    }
    PhysicalDesign::new(design.rho_nu.clone(), mag)
}
