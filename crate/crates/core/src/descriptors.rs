//! Shape descriptors and their bag-of-words documents.
//!
//! Each keypoint of a downsampled cloud gets two descriptors: a spin image
//! whose support radius covers the whole object (local-to-global), and a
//! pinpoint descriptor that accumulates distance-weighted evidence of the
//! keypoint's position on the three PCA projection planes (global-to-local).
//! Histogram bins are treated as vocabulary words, so no dictionary has to be
//! built up front; one sparse count vector per keypoint feeds the topic
//! models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pointcloud::{voxel_downsample, estimate_normals, pca_frame, Point3, PointCloud, ReferenceFrame};

/// Parameters of the descriptor stage, shared by every document of one
/// experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    /// Spin-image bins per side.
    pub spin_bins: usize,
    /// Projection-plane bins per side.
    pub proj_bins: usize,
    /// Robustness margin of the projection binning, relative to the support
    /// length.
    pub epsilon_scale: f64,
    /// Multiplier converting fractional bin values to integer word counts.
    pub count_scale: f64,
    /// Voxel edge used to downsample clouds into keypoints.
    pub voxel_leaf: f64,
    /// Neighborhood size for normal estimation.
    pub normal_neighbors: usize,
    /// Drop the projection words; used when test objects are occluded.
    pub spin_only: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            spin_bins: 8,
            proj_bins: 5,
            epsilon_scale: 0.015,
            count_scale: 10.0,
            voxel_leaf: 0.05,
            normal_neighbors: 10,
            spin_only: false,
        }
    }
}

impl DescriptorConfig {
    /// Vocabulary size of documents produced under this configuration.
    pub fn vocabulary_size(&self) -> usize {
        if self.spin_only {
            self.spin_bins * self.spin_bins
        } else {
            self.spin_bins * self.spin_bins + 3 * self.proj_bins * self.proj_bins
        }
    }

    /// Vocabulary size with projection words included regardless of
    /// `spin_only`. Models are always trained over the full vocabulary so
    /// that spin-only documents stay compatible at prediction time.
    pub fn full_vocabulary_size(&self) -> usize {
        self.spin_bins * self.spin_bins + 3 * self.proj_bins * self.proj_bins
    }

    pub fn validate(&self) -> Result<()> {
        if self.spin_bins == 0 || self.proj_bins == 0 {
            return Err(Error::InvalidHyperparameter(
                "descriptor bin counts must be positive".into(),
            ));
        }
        if !(self.epsilon_scale > 0.0) {
            return Err(Error::InvalidHyperparameter(
                "epsilon_scale must be positive".into(),
            ));
        }
        if !(self.count_scale >= 1.0) {
            return Err(Error::InvalidHyperparameter(
                "count_scale must be at least 1".into(),
            ));
        }
        if !(self.voxel_leaf > 0.0) {
            return Err(Error::InvalidHyperparameter(
                "voxel_leaf must be positive".into(),
            ));
        }
        if self.normal_neighbors < 3 {
            return Err(Error::InvalidHyperparameter(
                "normal_neighbors must be at least 3".into(),
            ));
        }
        Ok(())
    }
}

/// Spin image: a 2D histogram over (radial distance, signed height)
/// cylindrical coordinates around a keypoint's normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinImage {
    /// `spin_bins x spin_bins` grid; rows run from +radius down to -radius in
    /// signed height, columns from 0 out to +radius in radial distance.
    pub bins: Array2<f64>,
    pub support_radius: f64,
    pub keypoint_index: usize,
}

/// Projection plane selector. Plane names list the two retained frame axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionPlane {
    XoY,
    XoZ,
    YoZ,
}

impl ProjectionPlane {
    pub const ALL: [ProjectionPlane; 3] =
        [ProjectionPlane::XoY, ProjectionPlane::XoZ, ProjectionPlane::YoZ];

    fn retained_axes(self) -> (usize, usize) {
        match self {
            ProjectionPlane::XoY => (0, 1),
            ProjectionPlane::XoZ => (0, 2),
            ProjectionPlane::YoZ => (1, 2),
        }
    }
}

/// Distance-weighted projection descriptor of one keypoint: three
/// `proj_bins x proj_bins` grids, one per PCA plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionDescriptor {
    pub planes: [Array2<f64>; 3],
    pub support_length: f64,
    pub bin_count: usize,
    pub epsilon: f64,
}

/// Sparse bag-of-words counts of one keypoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PointDocument {
    pub counts: BTreeMap<usize, u32>,
}

impl PointDocument {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total token count.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn max_word_id(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }
}

/// Spin image of `keypoint` over the whole cloud.
///
/// With `radius` set to the greatest distance from the keypoint to any point
/// the image is local-to-global: every point of the object lands in some bin.
/// Points outside the support are skipped; boundary coordinates are clamped
/// into the last row and column.
pub fn spin_image(
    cloud: &PointCloud,
    keypoint: usize,
    spin_bins: usize,
    radius: f64,
) -> Result<SpinImage> {
    let normals = cloud.normals.as_ref().ok_or(Error::MissingNormals)?;
    if keypoint >= cloud.len() {
        return Err(Error::KeypointOutOfRange {
            index: keypoint,
            points: cloud.len(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "spin-image radius must be positive, got {radius}"
        )));
    }
    let center = cloud.points[keypoint].to_vector();
    let normal = normals[keypoint];

    let mut bins = Array2::zeros((spin_bins, spin_bins));
    for p in &cloud.points {
        let offset = p.to_vector() - center;
        let height = normal.dot(&offset);
        let radial_sq = (offset.norm_squared() - height * height).max(0.0);
        let radial = radial_sq.sqrt();
        if radial > radius || height.abs() > radius {
            continue;
        }
        let row = ((radius - height) * spin_bins as f64 / (2.0 * radius)) as usize;
        let col = (radial * spin_bins as f64 / radius) as usize;
        bins[(row.min(spin_bins - 1), col.min(spin_bins - 1))] += 1.0;
    }

    Ok(SpinImage {
        bins,
        support_radius: radius,
        keypoint_index: keypoint,
    })
}

/// Express `p` in frame coordinates and drop the plane's normal coordinate.
pub fn project_point(p: &Point3, frame: &ReferenceFrame, plane: ProjectionPlane) -> (f64, f64) {
    let local = frame.to_local(p);
    let (a, b) = plane.retained_axes();
    (local[a], local[b])
}

/// Row/column of a projected point on an `n x n` grid of support length `l`.
///
/// Both coordinates must lie within `[-l/2, l/2]`; the epsilon margin widens
/// the bins just enough that the extreme point falls inside the last one.
pub fn bin_index(alpha: f64, beta: f64, l: f64, n: usize, epsilon: f64) -> Result<(usize, usize)> {
    let half = l / 2.0;
    if alpha.abs() > half || beta.abs() > half {
        return Err(Error::OutOfSupport {
            alpha,
            beta,
            half,
        });
    }
    let width = (l + epsilon) / n as f64;
    let row = ((alpha + half) / width) as usize;
    let col = ((beta + half) / width) as usize;
    Ok((row, col))
}

/// Support length covering every point of the cloud in frame coordinates:
/// twice the largest absolute coordinate.
pub fn support_length(cloud: &PointCloud, frame: &ReferenceFrame) -> f64 {
    let mut max_abs = 0.0f64;
    for p in &cloud.points {
        let local = frame.to_local(p);
        for c in 0..3 {
            max_abs = max_abs.max(local[c].abs());
        }
    }
    max_abs * 2.0
}

/// Squared linear falloff of a point's vote with its 3D distance `d` from
/// the keypoint, clamped to zero beyond the support length.
pub fn projection_weight(d: f64, l: f64) -> f64 {
    if d >= l {
        0.0
    } else {
        let w = (l - d) / l;
        w * w
    }
}

/// Distance-weighted projection descriptor of one keypoint.
///
/// Every point of the cloud votes on all three planes with weight
/// `((l - d)/l)^2`, where `d` is its 3D distance from the keypoint and `l`
/// the support length computed over the whole cloud.
pub fn pinpoint_descriptor(
    cloud: &PointCloud,
    keypoint: usize,
    frame: &ReferenceFrame,
    proj_bins: usize,
    epsilon_scale: f64,
) -> Result<ProjectionDescriptor> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if keypoint >= cloud.len() {
        return Err(Error::KeypointOutOfRange {
            index: keypoint,
            points: cloud.len(),
        });
    }
    let l = support_length(cloud, frame).max(f64::MIN_POSITIVE);
    let epsilon = epsilon_scale * l;
    let center = cloud.points[keypoint];

    let mut planes = [
        Array2::zeros((proj_bins, proj_bins)),
        Array2::zeros((proj_bins, proj_bins)),
        Array2::zeros((proj_bins, proj_bins)),
    ];
    for p in &cloud.points {
        let weight = projection_weight(p.distance(&center), l);
        for (i, plane) in ProjectionPlane::ALL.iter().enumerate() {
            let (alpha, beta) = project_point(p, frame, *plane);
            let (row, col) = bin_index(alpha, beta, l, proj_bins, epsilon)?;
            planes[i][(row, col)] += weight;
        }
    }

    Ok(ProjectionDescriptor {
        planes,
        support_length: l,
        bin_count: proj_bins,
        epsilon,
    })
}

/// Assemble a sparse document from a spin image and, unless running in
/// spin-only mode, a projection descriptor.
///
/// Word ids `0 .. spin_bins^2` are the spin bins in row-major order; the
/// projection bins follow plane-major, row-major. Counts are
/// `round(count_scale * bin_value)` with zero counts omitted.
pub fn make_document(
    spin: &SpinImage,
    projection: Option<&ProjectionDescriptor>,
    count_scale: f64,
) -> Result<PointDocument> {
    let mut counts = BTreeMap::new();
    let mut word = 0usize;
    for value in spin.bins.iter() {
        let count = (count_scale * value).round();
        if count >= 1.0 {
            counts.insert(word, count as u32);
        }
        word += 1;
    }
    if let Some(projection) = projection {
        if projection.planes[0].nrows() == 0 {
            return Err(Error::DimensionMismatch("empty projection grid".into()));
        }
        for plane in &projection.planes {
            for value in plane.iter() {
                let count = (count_scale * value).round();
                if count >= 1.0 {
                    counts.insert(word, count as u32);
                }
                word += 1;
            }
        }
    }
    Ok(PointDocument { counts })
}

/// A downsampled cloud together with one document per keypoint.
#[derive(Debug, Clone)]
pub struct DocumentSet {
    /// Downsampled keypoints; carries fused part labels when the input had
    /// annotations.
    pub keypoints: PointCloud,
    pub documents: Vec<PointDocument>,
}

/// Run the full descriptor stage on a cloud: downsample, estimate normals,
/// fit the PCA frame (unless spin-only) and emit one document per keypoint.
pub fn point_documents(cloud: &PointCloud, config: &DescriptorConfig) -> Result<DocumentSet> {
    config.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let keypoints = voxel_downsample(cloud, config.voxel_leaf)?;
    let keypoints = estimate_normals(&keypoints, config.normal_neighbors.min(keypoints.len()))?;
    let frame = if config.spin_only {
        None
    } else {
        Some(pca_frame(&keypoints)?)
    };

    let mut documents = Vec::with_capacity(keypoints.len());
    for i in 0..keypoints.len() {
        let mut radius = 0.0f64;
        for p in &keypoints.points {
            radius = radius.max(p.distance(&keypoints.points[i]));
        }
        let spin = spin_image(&keypoints, i, config.spin_bins, radius.max(f64::MIN_POSITIVE))?;
        let projection = match &frame {
            Some(frame) => Some(pinpoint_descriptor(
                &keypoints,
                i,
                frame,
                config.proj_bins,
                config.epsilon_scale,
            )?),
            None => None,
        };
        documents.push(make_document(&spin, projection.as_ref(), config.count_scale)?);
    }

    Ok(DocumentSet {
        keypoints,
        documents,
    })
}

/// Serialize documents as sparse text lines: `doc_id word:count ...`.
pub fn format_documents(documents: &[PointDocument]) -> String {
    let mut out = String::new();
    for (id, doc) in documents.iter().enumerate() {
        write!(out, "{id}").unwrap();
        for (word, count) in &doc.counts {
            write!(out, " {word}:{count}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parse the sparse text format produced by [`format_documents`].
pub fn parse_documents(text: &str) -> Result<Vec<PointDocument>> {
    let mut documents = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let _doc_id = fields
            .next()
            .ok_or_else(|| Error::parse("<documents>", line_no, "missing doc id"))?;
        let mut counts = BTreeMap::new();
        for field in fields {
            let (word, count) = field.split_once(':').ok_or_else(|| {
                Error::parse("<documents>", line_no, format!("bad token {field:?}"))
            })?;
            let word: usize = word.parse().map_err(|_| {
                Error::parse("<documents>", line_no, format!("bad word id {word:?}"))
            })?;
            let count: u32 = count.parse().map_err(|_| {
                Error::parse("<documents>", line_no, format!("bad count {count:?}"))
            })?;
            if count > 0 {
                counts.insert(word, count);
            }
        }
        documents.push(PointDocument { counts });
    }
    Ok(documents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};
    use crate::pointcloud::random_rotation;

    fn cloud_with_normals(points: Vec<Point3>, normal: Vector3<f64>) -> PointCloud {
        let n = points.len();
        PointCloud {
            points,
            normals: Some(vec![normal; n]),
            part_labels: None,
            category: None,
        }
    }

    #[test]
    fn spin_point_along_normal_hits_top_left() {
        let radius = 2.0;
        let cloud = cloud_with_normals(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, radius)],
            Vector3::z(),
        );
        let spin = spin_image(&cloud, 0, 4, radius).unwrap();
        assert_relative_eq!(spin.bins[(0, 0)], 1.0);
    }

    #[test]
    fn spin_keypoint_itself_lands_in_middle_row() {
        let cloud = cloud_with_normals(vec![Point3::new(0.0, 0.0, 0.0)], Vector3::z());
        let spin = spin_image(&cloud, 0, 4, 1.0).unwrap();
        assert_relative_eq!(spin.bins[(2, 0)], 1.0); // row floor(n_s/2), col 0
    }

    #[test]
    fn spin_three_point_histogram_matches_hand_computation() {
        // keypoint at origin with normal +z, radius 2, 2x2 bins:
        //   p0 = keypoint: height 0, radial 0        -> row 1, col 0
        //   p1 = (1,0,0.5): height 0.5, radial 1     -> row 0, col 1
        //   p2 = (0,0.8,-0.2): height -0.2, radial .8 -> row 1, col 0
        let cloud = cloud_with_normals(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.5),
                Point3::new(0.0, 0.8, -0.2),
            ],
            Vector3::z(),
        );
        let spin = spin_image(&cloud, 0, 2, 2.0).unwrap();
        assert_relative_eq!(spin.bins[(0, 0)], 0.0);
        assert_relative_eq!(spin.bins[(0, 1)], 1.0);
        assert_relative_eq!(spin.bins[(1, 0)], 2.0);
        assert_relative_eq!(spin.bins[(1, 1)], 0.0);
    }

    #[test]
    fn spin_requires_normals() {
        let cloud = PointCloud::from_points(vec![Point3::new(0.0, 0.0, 0.0)]);
        assert!(matches!(
            spin_image(&cloud, 0, 4, 1.0),
            Err(Error::MissingNormals)
        ));
    }

    #[test]
    fn spin_bin_mass_bounded_by_cloud_size() {
        let cloud = cloud_with_normals(
            (0..50)
                .map(|i| Point3::new((i as f64 * 0.37).sin(), (i as f64 * 0.61).cos(), i as f64 * 0.01))
                .collect(),
            Vector3::z(),
        );
        let spin = spin_image(&cloud, 0, 8, 3.0).unwrap();
        assert!(spin.bins.iter().sum::<f64>() <= 50.0);
        assert!(spin.bins.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn project_origin_is_zero_on_every_plane() {
        let frame = ReferenceFrame::identity_at(Point3::new(1.0, 2.0, 3.0));
        for plane in ProjectionPlane::ALL {
            let (a, b) = project_point(&Point3::new(1.0, 2.0, 3.0), &frame, plane);
            assert_relative_eq!(a, 0.0);
            assert_relative_eq!(b, 0.0);
        }
    }

    #[test]
    fn project_identity_frame_drops_coordinate() {
        let frame = ReferenceFrame::identity_at(Point3::new(0.0, 0.0, 0.0));
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(project_point(&p, &frame, ProjectionPlane::XoY), (1.0, 2.0));
        assert_eq!(project_point(&p, &frame, ProjectionPlane::XoZ), (1.0, 3.0));
        assert_eq!(project_point(&p, &frame, ProjectionPlane::YoZ), (2.0, 3.0));
    }

    #[test]
    fn project_inverts_a_known_rotation() {
        // Frame axes R as rows; a point placed at origin + R^T (1,2,3) must
        // project back to (1,2) on the first plane.
        let angle = 0.7;
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
        let frame = ReferenceFrame {
            origin: Point3::new(0.5, -0.25, 2.0),
            axes: *rot.matrix(),
            stable: true,
        };
        let local = Vector3::new(1.0, 2.0, 3.0);
        let world = frame.origin.to_vector() + rot.matrix().transpose() * local;
        let (alpha, beta) = project_point(
            &Point3::from_vector(world),
            &frame,
            ProjectionPlane::XoY,
        );
        assert_relative_eq!(alpha, 1.0, epsilon = 1e-12);
        assert_relative_eq!(beta, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bin_index_lower_corner_is_origin_bin() {
        let l = 3.0;
        assert_eq!(bin_index(-l / 2.0, -l / 2.0, l, 7, 0.01).unwrap(), (0, 0));
    }

    #[test]
    fn bin_index_center_case_from_formula() {
        // (0 + 1) / (2.008 / 4) = 1.992 -> bin 1 on both axes.
        assert_eq!(bin_index(0.0, 0.0, 2.0, 4, 0.008).unwrap(), (1, 1));
    }

    #[test]
    fn bin_index_upper_corner_stays_inside() {
        for &(l, n, eps) in &[(2.0, 4usize, 0.008), (1.0, 9, 1e-6), (10.0, 3, 0.5)] {
            let (r, c) = bin_index(l / 2.0, l / 2.0, l, n, eps).unwrap();
            assert_eq!((r, c), (n - 1, n - 1));
        }
    }

    #[test]
    fn bin_index_rejects_out_of_support() {
        assert!(matches!(
            bin_index(1.01, 0.0, 2.0, 4, 0.008),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn projection_weight_boundaries() {
        assert_relative_eq!(projection_weight(0.0, 2.0), 1.0);
        assert_relative_eq!(projection_weight(2.0, 2.0), 0.0);
        assert_relative_eq!(projection_weight(3.0, 2.0), 0.0);
        assert_relative_eq!(projection_weight(1.0, 2.0), 0.25);
    }

    #[test]
    fn pinpoint_rectangle_matches_hand_computation() {
        // 2x1 rectangle in the z=0 plane, identity frame, keypoint A=(1,0.5,0),
        // l = 2, eps = 0.03, bin width 1.015. Weights: A 1, B 0.25, C 0, D 0.
        let cloud = PointCloud::from_points(vec![
            Point3::new(1.0, 0.5, 0.0),
            Point3::new(1.0, -0.5, 0.0),
            Point3::new(-1.0, 0.5, 0.0),
            Point3::new(-1.0, -0.5, 0.0),
        ]);
        let frame = ReferenceFrame::identity_at(Point3::new(0.0, 0.0, 0.0));
        let desc = pinpoint_descriptor(&cloud, 0, &frame, 2, 0.015).unwrap();
        assert_relative_eq!(desc.support_length, 2.0);

        let expect = |plane: &Array2<f64>, grid: [[f64; 2]; 2]| {
            for r in 0..2 {
                for c in 0..2 {
                    assert_relative_eq!(plane[(r, c)], grid[r][c], epsilon = 1e-12);
                }
            }
        };
        expect(&desc.planes[0], [[0.0, 0.0], [0.25, 1.0]]); // XoY
        expect(&desc.planes[1], [[0.0, 0.0], [1.25, 0.0]]); // XoZ
        expect(&desc.planes[2], [[0.25, 0.0], [1.0, 0.0]]); // YoZ
    }

    #[test]
    fn make_document_one_hot_and_rounding() {
        let mut spin = SpinImage {
            bins: Array2::zeros((2, 2)),
            support_radius: 1.0,
            keypoint_index: 0,
        };
        spin.bins[(0, 1)] = 1.0;
        let doc = make_document(&spin, None, 10.0).unwrap();
        assert_eq!(doc.counts.len(), 1);
        assert_eq!(doc.counts[&1], 10);

        spin.bins[(0, 1)] = 0.4;
        let doc = make_document(&spin, None, 1.0).unwrap();
        assert!(doc.is_empty());
    }

    #[test]
    fn make_document_word_layout_partitions_vocabulary() {
        let spin_bins = 3usize;
        let proj_bins = 2usize;
        let mut spin = SpinImage {
            bins: Array2::from_elem((spin_bins, spin_bins), 1.0),
            support_radius: 1.0,
            keypoint_index: 0,
        };
        spin.bins[(2, 2)] = 2.0;
        let proj = ProjectionDescriptor {
            planes: [
                Array2::from_elem((proj_bins, proj_bins), 1.0),
                Array2::from_elem((proj_bins, proj_bins), 1.0),
                Array2::from_elem((proj_bins, proj_bins), 1.0),
            ],
            support_length: 1.0,
            bin_count: proj_bins,
            epsilon: 0.015,
        };
        let doc = make_document(&spin, Some(&proj), 1.0).unwrap();
        let vocab = spin_bins * spin_bins + 3 * proj_bins * proj_bins;
        assert_eq!(doc.counts.len(), vocab);
        assert_eq!(doc.max_word_id(), Some(vocab - 1));
        // spin word ids < spin_bins^2, projection ids cover the rest
        assert_eq!(doc.counts[&(spin_bins * spin_bins - 1)], 2);
    }

    #[test]
    fn documents_are_deterministic() {
        let cloud = crate::synthetic::sample_object(crate::synthetic::Category::Mug, 900, 5);
        let cfg = DescriptorConfig {
            voxel_leaf: 0.08,
            ..DescriptorConfig::default()
        };
        let a = point_documents(&cloud, &cfg).unwrap();
        let b = point_documents(&cloud, &cfg).unwrap();
        assert_eq!(a.documents, b.documents);
        assert!(a.documents.iter().all(|d| !d.is_empty()));
        let vocab = cfg.vocabulary_size();
        assert!(a
            .documents
            .iter()
            .all(|d| d.max_word_id().unwrap() < vocab));
    }

    #[test]
    fn pinpoint_is_pose_invariant_through_the_frame() {
        let cloud = crate::synthetic::sample_object(crate::synthetic::Category::Airplane, 700, 9);
        let down = voxel_downsample(&cloud, 0.08).unwrap();
        let frame = pca_frame(&down).unwrap();
        assert!(frame.stable);
        let desc = pinpoint_descriptor(&down, 0, &frame, 5, 0.015).unwrap();

        let moved = random_rotation(&down, 31);
        let moved_frame = pca_frame(&moved).unwrap();
        let moved_desc = pinpoint_descriptor(&moved, 0, &moved_frame, 5, 0.015).unwrap();

        for plane in 0..3 {
            for (a, b) in desc.planes[plane]
                .iter()
                .zip(moved_desc.planes[plane].iter())
            {
                assert!((a - b).abs() < 1e-3, "plane {plane}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn document_lines_round_trip() {
        let docs = vec![
            PointDocument {
                counts: [(0usize, 3u32), (17, 1)].into_iter().collect(),
            },
            PointDocument {
                counts: [(5usize, 2u32)].into_iter().collect(),
            },
        ];
        let text = format_documents(&docs);
        assert_eq!(text, "0 0:3 17:1\n1 5:2\n");
        assert_eq!(parse_documents(&text).unwrap(), docs);
    }

    #[test]
    fn spin_only_mode_shrinks_vocabulary() {
        let cfg = DescriptorConfig::default();
        assert_eq!(cfg.vocabulary_size(), 64 + 75);
        let spin_only = DescriptorConfig {
            spin_only: true,
            ..cfg
        };
        assert_eq!(spin_only.vocabulary_size(), 64);
        assert_eq!(spin_only.full_vocabulary_size(), 139);
    }

    #[test]
    fn identity_frame_helper_is_orthonormal() {
        let frame = ReferenceFrame::identity_at(Point3::new(0.0, 0.0, 0.0));
        assert_relative_eq!(frame.axes, Matrix3::identity());
    }
}
