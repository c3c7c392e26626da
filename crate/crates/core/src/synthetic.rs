//! Generated three-category dataset with known per-point part labels.
//!
//! Shapes are simple surfaces with two semantic parts each:
//!
//! - mug: cylindrical body + torus handle
//! - table: slab top + four legs
//! - airplane: elongated fuselage + two thin wings
//!
//! Objects live in roughly unit scale with per-object proportion jitter and
//! small point noise, all driven by one seed, so every test and demo can
//! regenerate the exact same corpus.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, ObjectInstance};
use crate::pointcloud::{Point3, PointCloud};

/// Synthetic object categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Mug,
    Table,
    Airplane,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Mug, Category::Table, Category::Airplane];

    pub fn name(self) -> &'static str {
        match self {
            Category::Mug => "mug",
            Category::Table => "table",
            Category::Airplane => "airplane",
        }
    }

    /// Part names indexed by the label ids used in generated clouds.
    pub fn part_names(self) -> &'static [&'static str] {
        match self {
            Category::Mug => &["body", "handle"],
            Category::Table => &["top", "leg"],
            Category::Airplane => &["fuselage", "wing"],
        }
    }
}

const POINT_NOISE: f64 = 0.004;

/// Sample one object surface. Labels follow [`Category::part_names`].
pub fn sample_object(category: Category, points: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise = Normal::new(0.0, POINT_NOISE).unwrap();
    let scale: f64 = rng.random_range(0.9..1.1);

    let mut pts = Vec::with_capacity(points);
    let mut labels = Vec::with_capacity(points);
    match category {
        Category::Mug => sample_mug(&mut rng, points, &mut pts, &mut labels),
        Category::Table => sample_table(&mut rng, points, &mut pts, &mut labels),
        Category::Airplane => sample_airplane(&mut rng, points, &mut pts, &mut labels),
    }

    for p in &mut pts {
        p.x = p.x * scale + noise.sample(&mut rng);
        p.y = p.y * scale + noise.sample(&mut rng);
        p.z = p.z * scale + noise.sample(&mut rng);
    }

    PointCloud {
        points: pts,
        normals: None,
        part_labels: Some(labels),
        category: Some(category.name().to_string()),
    }
}

fn sample_mug(rng: &mut ChaCha8Rng, points: usize, pts: &mut Vec<Point3>, labels: &mut Vec<u32>) {
    // Proportions keep the covariance eigenvalues well separated (height >
    // radius+handle > depth); a repeatable PCA frame needs that ordering to
    // hold across the category.
    let radius = rng.random_range(0.25..0.30);
    let height = rng.random_range(1.05..1.15);
    let handle_major = rng.random_range(0.12..0.15);
    let handle_minor = 0.045;
    let handle_center = radius + handle_major * 0.9;

    let n_handle = points / 5;
    let n_body = points - n_handle;
    for _ in 0..n_body {
        // side wall or bottom disc, by area share
        if rng.random_range(0.0..1.0) < 0.85 {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let z = rng.random_range(-height / 2.0..height / 2.0);
            pts.push(Point3::new(radius * theta.cos(), radius * theta.sin(), z));
        } else {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let r = radius * rng.random_range(0.0f64..1.0).sqrt();
            pts.push(Point3::new(r * theta.cos(), r * theta.sin(), -height / 2.0));
        }
        labels.push(0);
    }
    for _ in 0..n_handle {
        // torus in the x-z plane, stuck to the body side
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let ring = handle_major + handle_minor * phi.cos();
        pts.push(Point3::new(
            handle_center + ring * theta.cos(),
            handle_minor * phi.sin(),
            ring * theta.sin(),
        ));
        labels.push(1);
    }
}

fn sample_table(rng: &mut ChaCha8Rng, points: usize, pts: &mut Vec<Point3>, labels: &mut Vec<u32>) {
    let half_x = rng.random_range(0.58..0.66);
    let half_y = rng.random_range(0.28..0.34);
    let top_z = rng.random_range(0.42..0.48);
    let leg = 0.05;

    let n_top = points * 3 / 5;
    let n_legs = points - n_top;
    for _ in 0..n_top {
        pts.push(Point3::new(
            rng.random_range(-half_x..half_x),
            rng.random_range(-half_y..half_y),
            top_z + rng.random_range(-0.02..0.02),
        ));
        labels.push(0);
    }
    let corners = [
        (half_x - leg, half_y - leg),
        (half_x - leg, -half_y + leg),
        (-half_x + leg, half_y - leg),
        (-half_x + leg, -half_y + leg),
    ];
    for i in 0..n_legs {
        let (cx, cy) = corners[i % 4];
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        pts.push(Point3::new(
            cx + leg * theta.cos(),
            cy + leg * theta.sin(),
            rng.random_range(-0.45..top_z),
        ));
        labels.push(1);
    }
}

fn sample_airplane(
    rng: &mut ChaCha8Rng,
    points: usize,
    pts: &mut Vec<Point3>,
    labels: &mut Vec<u32>,
) {
    // Wingspan strictly dominates fuselage length so the first frame axis is
    // always the span.
    let half_len: f64 = rng.random_range(0.58..0.68);
    let body_radius: f64 = rng.random_range(0.10..0.13);
    let half_span: f64 = rng.random_range(0.88..1.0);
    let chord = 0.16;

    let n_body = points / 2;
    let n_wings = points - n_body;
    for _ in 0..n_body {
        let x = rng.random_range(-half_len..half_len);
        // taper toward the nose and tail
        let taper = 1.0 - 0.6 * (x.abs() / half_len).powi(2);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        pts.push(Point3::new(
            x,
            body_radius * taper * theta.cos(),
            body_radius * taper * theta.sin(),
        ));
        labels.push(0);
    }
    for _ in 0..n_wings {
        pts.push(Point3::new(
            rng.random_range(-chord..chord),
            rng.random_range(-half_span..half_span),
            rng.random_range(-0.015..0.015),
        ));
        labels.push(1);
    }
}

/// Generate a full dataset: `objects_per_category` instances of every
/// category, `points` surface samples each, with part-name metadata filled
/// in.
pub fn generate_dataset(objects_per_category: usize, points: usize, seed: u64) -> Dataset {
    let mut dataset = Dataset::default();
    for category in Category::ALL {
        dataset.part_names.insert(
            category.name().to_string(),
            category.part_names().iter().map(|s| s.to_string()).collect(),
        );
    }
    for (c, category) in Category::ALL.into_iter().enumerate() {
        for i in 0..objects_per_category {
            let object_seed = seed
                .wrapping_mul(1_000_003)
                .wrapping_add((c * objects_per_category + i) as u64);
            dataset.objects.push(ObjectInstance {
                id: format!("{}/{i:04}", category.name()),
                category: category.name().to_string(),
                cloud: sample_object(category, points, object_seed),
            });
        }
    }
    dataset
}
