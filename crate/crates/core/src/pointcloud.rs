//! Point-cloud representation, file I/O, voxel downsampling, normal
//! estimation, PCA reference frames, random rotation and occlusion
//! simulation.
//!
//! All operations are pure functions of their inputs plus an explicit seed,
//! so they can run concurrently on distinct clouds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A single 3D point. Coordinates are in dataset units and must be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub(crate) fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub(crate) fn from_vector(v: Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Cloud file formats understood by [`load_cloud`] and [`save_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// ASCII, one `x y z` triple per line.
    Xyz,
    /// ASCII, one `x y z label` line per point; the trailing label is a
    /// nonnegative integer part id.
    XyzLabel,
    /// OFF mesh; only the vertex block is read.
    Off,
}

impl CloudFormat {
    /// Guess a format from a file extension; defaults to labelled points.
    pub fn from_extension(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") => CloudFormat::Xyz,
            Some("off") => CloudFormat::Off,
            _ => CloudFormat::XyzLabel,
        }
    }
}

/// A 3D point cloud with optional per-point normals and part labels.
///
/// The optional parallel vectors, when present, always have the same length
/// as `points`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub part_labels: Option<Vec<u32>>,
    pub category: Option<String>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            normals: None,
            part_labels: None,
            category: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Centroid of the cloud. Errors on an empty cloud.
    pub fn centroid(&self) -> Result<Point3> {
        if self.points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut sum = Vector3::zeros();
        for p in &self.points {
            sum += p.to_vector();
        }
        Ok(Point3::from_vector(sum / self.points.len() as f64))
    }

    fn check_parallel(&self) -> Result<()> {
        if let Some(n) = &self.normals {
            if n.len() != self.points.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} normals for {} points",
                    n.len(),
                    self.points.len()
                )));
            }
        }
        if let Some(l) = &self.part_labels {
            if l.len() != self.points.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} points",
                    l.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }
}

/// Repeatable global reference frame of a cloud.
///
/// `axes` rows are the PCA eigenvectors in descending eigenvalue order; the
/// matrix is orthonormal with determinant +1. `stable` is false when two
/// covariance eigenvalues are relatively closer than 1e-9, in which case the
/// axis order was fixed by a lexicographic tie-break and repeatability under
/// rotation is not guaranteed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFrame {
    pub origin: Point3,
    pub axes: Matrix3<f64>,
    pub stable: bool,
}

impl ReferenceFrame {
    /// Identity frame at a given origin; useful for tests and synthetic data.
    pub fn identity_at(origin: Point3) -> Self {
        ReferenceFrame {
            origin,
            axes: Matrix3::identity(),
            stable: true,
        }
    }

    /// Express a point in frame coordinates.
    pub fn to_local(&self, p: &Point3) -> Vector3<f64> {
        self.axes * (p.to_vector() - self.origin.to_vector())
    }
}

/// Load a cloud from disk in the given format.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cloud = match format {
        CloudFormat::Xyz => parse_points(path, &text, false)?,
        CloudFormat::XyzLabel => parse_points(path, &text, true)?,
        CloudFormat::Off => parse_off(path, &text)?,
    };
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(cloud)
}

fn parse_points(path: &Path, text: &str, labelled: bool) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let expected = if labelled { 4 } else { 3 };
        if fields.len() != expected {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("bad coordinate {s:?}")))
        };
        let p = Point3::new(coord(fields[0])?, coord(fields[1])?, coord(fields[2])?);
        if !p.is_finite() {
            return Err(Error::parse(path, line_no, "non-finite coordinate"));
        }
        points.push(p);
        if labelled {
            let label = fields[3]
                .parse::<u32>()
                .map_err(|_| Error::parse(path, line_no, format!("bad label {:?}", fields[3])))?;
            labels.push(label);
        }
    }
    Ok(PointCloud {
        points,
        normals: None,
        part_labels: labelled.then_some(labels),
        category: None,
    })
}

fn parse_off(path: &Path, text: &str) -> Result<PointCloud> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing OFF header"))?;
    let counts_line = if header == "OFF" {
        None
    } else if let Some(rest) = header.strip_prefix("OFF") {
        // single-line variant "OFF nv nf ne"
        Some((line_no, rest.trim()))
    } else {
        return Err(Error::parse(path, line_no, "missing OFF header"));
    };
    let (counts_no, counts) = match counts_line {
        Some(c) => c,
        None => lines
            .next()
            .ok_or_else(|| Error::parse(path, line_no, "missing vertex counts"))?,
    };
    let fields: Vec<&str> = counts.split_whitespace().collect();
    if fields.is_empty() {
        return Err(Error::parse(path, counts_no, "missing vertex counts"));
    }
    let n_vertices: usize = fields[0]
        .parse()
        .map_err(|_| Error::parse(path, counts_no, format!("bad vertex count {:?}", fields[0])))?;

    let mut points = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, counts_no, "fewer vertices than declared"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::parse(path, no, "vertex line with fewer than 3 fields"));
        }
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, no, format!("bad coordinate {s:?}")))
        };
        points.push(Point3::new(
            coord(fields[0])?,
            coord(fields[1])?,
            coord(fields[2])?,
        ));
    }
    Ok(PointCloud::from_points(points))
}

/// Render a cloud in the given format. Labelled output writes label 0 for
/// clouds without annotations.
pub fn format_cloud(cloud: &PointCloud, format: CloudFormat) -> String {
    let mut out = String::new();
    match format {
        CloudFormat::Xyz => {
            for p in &cloud.points {
                writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
            }
        }
        CloudFormat::XyzLabel => {
            for (i, p) in cloud.points.iter().enumerate() {
                let label = cloud.part_labels.as_ref().map_or(0, |l| l[i]);
                writeln!(out, "{} {} {} {}", p.x, p.y, p.z, label).unwrap();
            }
        }
        CloudFormat::Off => {
            writeln!(out, "OFF").unwrap();
            writeln!(out, "{} 0 0", cloud.points.len()).unwrap();
            for p in &cloud.points {
                writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
            }
        }
    }
    out
}

/// Write a cloud to disk in the given format.
pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    fs::write(path, format_cloud(cloud, format)).map_err(|e| Error::io(path, e))
}

/// Voxel-grid downsampling: one output point per occupied cube of edge
/// `leaf`, placed at the centroid of the cube's members.
///
/// Part labels are fused by majority vote with ties broken by the smallest
/// label id. Normals are dropped; estimate them on the downsampled cloud.
/// The grid is anchored at the coordinate origin, which makes the operation
/// idempotent for a fixed leaf.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0) {
        return Err(Error::NonPositiveLeaf(leaf));
    }
    cloud.check_parallel()?;

    struct Cell {
        sum: Vector3<f64>,
        count: usize,
        votes: BTreeMap<u32, usize>,
    }

    let mut cells: BTreeMap<(i64, i64, i64), Cell> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = (
            (p.x / leaf).floor() as i64,
            (p.y / leaf).floor() as i64,
            (p.z / leaf).floor() as i64,
        );
        let cell = cells.entry(key).or_insert_with(|| Cell {
            sum: Vector3::zeros(),
            count: 0,
            votes: BTreeMap::new(),
        });
        cell.sum += p.to_vector();
        cell.count += 1;
        if let Some(labels) = &cloud.part_labels {
            *cell.votes.entry(labels[i]).or_insert(0) += 1;
        }
    }

    let mut points = Vec::with_capacity(cells.len());
    let mut labels = Vec::with_capacity(cells.len());
    for cell in cells.values() {
        points.push(Point3::from_vector(cell.sum / cell.count as f64));
        if cloud.part_labels.is_some() {
            // BTreeMap iterates ids ascending, so keeping only strictly
            // greater counts leaves the smallest id on ties.
            let mut best = (0u32, 0usize);
            for (&label, &count) in &cell.votes {
                if count > best.1 {
                    best = (label, count);
                }
            }
            labels.push(best.0);
        }
    }

    Ok(PointCloud {
        points,
        normals: None,
        part_labels: cloud.part_labels.is_some().then_some(labels),
        category: cloud.category.clone(),
    })
}

/// Estimate per-point unit normals by PCA over each point's `k`-nearest
/// neighborhood (the point counts as its own nearest neighbor).
///
/// Normals are oriented outward: flipped so that `normal . (point - centroid)`
/// is nonnegative.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::InvalidHyperparameter(format!(
            "normal estimation needs k >= 3, got {k}"
        )));
    }
    if cloud.len() < k {
        return Err(Error::TooFewPoints {
            points: cloud.len(),
            needed: k,
        });
    }
    let centroid = cloud.centroid()?.to_vector();

    let mut normals = Vec::with_capacity(cloud.len());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        order.clear();
        for (j, q) in cloud.points.iter().enumerate() {
            order.push((p.distance(q), j));
        }
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let neighborhood = &order[..k];

        let mut mean = Vector3::zeros();
        for &(_, j) in neighborhood {
            mean += cloud.points[j].to_vector();
        }
        mean /= k as f64;
        let mut cov = Matrix3::zeros();
        for &(_, j) in neighborhood {
            let d = cloud.points[j].to_vector() - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut min_idx = 0;
        for c in 1..3 {
            if eig.eigenvalues[c] < eig.eigenvalues[min_idx] {
                min_idx = c;
            }
        }
        let mut normal = eig.eigenvectors.column(min_idx).into_owned();
        let norm = normal.norm();
        if norm > 0.0 {
            normal /= norm;
        } else {
            normal = Vector3::z();
        }
        if normal.dot(&(p.to_vector() - centroid)) < 0.0 {
            normal = -normal;
        }
        normals.push(normal);
    }

    Ok(PointCloud {
        points: cloud.points.clone(),
        normals: Some(normals),
        part_labels: cloud.part_labels.clone(),
        category: cloud.category.clone(),
    })
}

/// Relative eigenvalue gap below which the frame is flagged unstable.
const EIGENVALUE_TIE: f64 = 1e-9;

/// Repeatable PCA reference frame of a cloud.
///
/// The origin is the centroid; the axes are covariance eigenvectors in
/// descending eigenvalue order. Each of the first two axes is flipped so the
/// signed projections of the points onto it sum to a nonnegative value (the
/// sign majority); the third axis is the cross product of the first two,
/// making the frame right-handed.
pub fn pca_frame(cloud: &PointCloud) -> Result<ReferenceFrame> {
    let centroid = cloud.centroid()?.to_vector();
    if cloud.len() < 3 {
        return Err(Error::DegenerateFrame);
    }

    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p.to_vector() - centroid;
        cov += d * d.transpose();
    }
    cov /= cloud.len() as f64;

    let eig = cov.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values = [
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    ];
    if !(values[0] > 0.0) || values[1] <= values[0] * 1e-12 {
        return Err(Error::DegenerateFrame);
    }

    let mut axes: Vec<Vector3<f64>> = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    // Sign disambiguation by projection-sign majority.
    for axis in axes.iter_mut().take(2) {
        let mut majority = 0.0;
        for p in &cloud.points {
            majority += (axis.dot(&(p.to_vector() - centroid))).signum();
        }
        if majority < 0.0 {
            *axis = -*axis;
        }
    }

    let mut stable = true;
    for w in values.windows(2) {
        if (w[0] - w[1]).abs() < EIGENVALUE_TIE * values[0].max(f64::MIN_POSITIVE) {
            stable = false;
        }
    }
    if !stable {
        // Near-equal eigenvalues leave the order arbitrary; fix it
        // lexicographically so the result is at least deterministic.
        for i in 0..2 {
            let tied = (values[i] - values[i + 1]).abs()
                < EIGENVALUE_TIE * values[0].max(f64::MIN_POSITIVE);
            if tied && lex_less(&axes[i + 1], &axes[i]) {
                axes.swap(i, i + 1);
            }
        }
    }

    let third = axes[0].cross(&axes[1]);
    let mut m = Matrix3::zeros();
    m.set_row(0, &axes[0].transpose());
    m.set_row(1, &axes[1].transpose());
    m.set_row(2, &third.transpose());

    Ok(ReferenceFrame {
        origin: Point3::from_vector(centroid),
        axes: m,
        stable,
    })
}

fn lex_less(a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    for i in 0..3 {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

/// One rotation drawn uniformly from SO(3) via uniform unit quaternions.
fn rotation_from_rng(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let two_pi = std::f64::consts::TAU;
    let q = Quaternion::new(
        (u1).sqrt() * (two_pi * u3).cos(),
        (1.0 - u1).sqrt() * (two_pi * u2).sin(),
        (1.0 - u1).sqrt() * (two_pi * u2).cos(),
        (u1).sqrt() * (two_pi * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q)
}

fn apply_rotation(cloud: &PointCloud, rotation: &UnitQuaternion<f64>) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| Point3::from_vector(rotation * p.to_vector()))
            .collect(),
        normals: cloud
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| rotation * n).collect()),
        part_labels: cloud.part_labels.clone(),
        category: cloud.category.clone(),
    }
}

/// Apply one uniformly random rotation (deterministic per seed) to all
/// points and normals.
pub fn random_rotation(cloud: &PointCloud, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_rotation(cloud, &rotation_from_rng(&mut rng))
}

/// Cut range for the occlusion simulation: the middle half of `[min, max]`.
pub fn occlusion_cut_range(min: f64, max: f64) -> (f64, f64) {
    let quarter = (max - min) / 4.0;
    (min + quarter, max - quarter)
}

/// Simulate occlusion: rotate the cloud uniformly at random, draw a cutting
/// point uniformly in the middle half of the rotated x-extent and drop every
/// point with a smaller x-coordinate.
///
/// The rotated cloud equals `random_rotation(cloud, seed)` exactly; the
/// output is a subset of it and is never empty.
pub fn occlude(cloud: &PointCloud, seed: u64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotated = apply_rotation(cloud, &rotation_from_rng(&mut rng));

    let min = rotated.points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max = rotated
        .points
        .iter()
        .map(|p| p.x)
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = occlusion_cut_range(min, max);
    let cut = if hi > lo { rng.random_range(lo..hi) } else { lo };

    let keep: Vec<usize> = (0..rotated.len())
        .filter(|&i| rotated.points[i].x >= cut)
        .collect();

    Ok(PointCloud {
        points: keep.iter().map(|&i| rotated.points[i]).collect(),
        normals: rotated
            .normals
            .as_ref()
            .map(|ns| keep.iter().map(|&i| ns[i]).collect()),
        part_labels: rotated
            .part_labels
            .as_ref()
            .map(|ls| keep.iter().map(|&i| ls[i]).collect()),
        category: rotated.category.clone(),
    })
}
