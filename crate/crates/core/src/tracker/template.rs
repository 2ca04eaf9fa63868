use crate::geometry::{rotation_angle_between, NearestNeighborIndex, PointCloud, RigidPose};

use super::TrackerConfig;

/// Model points currently believed visible, plus the pose and progress at
/// the moment they were extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    /// Indices into the model cloud, ascending.
    pub indices: Vec<usize>,
    /// Model-frame points, `cad[indices]`.
    pub cloud: PointCloud,
    /// Pose (`R_last`, `t_last`) at the last update.
    pub pose_last: RigidPose,
    /// Progress at the last update, in `[0, 1]`.
    pub eta_last: f64,
}

impl Template {
    pub(crate) fn new(cad: &PointCloud, indices: Vec<usize>, pose_last: RigidPose, eta_last: f64) -> Self {
        Self {
            cloud: cad.select(&indices),
            indices,
            pose_last,
            eta_last: eta_last.clamp(0.0, 1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Indices of posed model points whose nearest scan point is strictly closer than `xi` (meters).
pub fn template_indices(transformed_cad: &PointCloud, scan: &NearestNeighborIndex, xi: f64) -> Vec<usize> {
    let xi_sq = xi * xi;
    transformed_cad
        .iter()
        .enumerate()
        .filter(|(_, p)| scan.nearest_within(p, xi).is_some_and(|nb| nb.dist_sq < xi_sq))
        .map(|(i, _)| i)
        .collect()
}

/// The posed model points matched by the scan within `xi` (meters).
///
/// Output keeps the model's point order. An empty scan matches nothing.
pub fn template_update(transformed_cad: &PointCloud, scan: &PointCloud, xi: f64) -> PointCloud {
    let index = NearestNeighborIndex::new(scan);
    transformed_cad.select(&template_indices(transformed_cad, &index, xi))
}

/// True when rotation, translation or progress moved past its threshold
/// since the template was last extracted. All three use absolute change.
pub fn should_update(template: &Template, new_pose: &RigidPose, new_eta: f64, cfg: &TrackerConfig) -> bool {
    rotation_angle_between(new_pose, &template.pose_last) > cfg.delta1_deg
        || new_pose.translation_distance(&template.pose_last) > cfg.delta2_m()
        || (new_eta - template.eta_last).abs() > cfg.delta3
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, half: f64) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-half..half),
                        rng.random_range(-half..half),
                        rng.random_range(-half..half),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn brute(cad: &PointCloud, scan: &PointCloud, xi: f64) -> Vec<usize> {
        (0..cad.len())
            .filter(|&i| {
                scan.iter().any(|q| {
                    let (dx, dy, dz) = (cad[i].x - q.x, cad[i].y - q.y, cad[i].z - q.z);
                    dx * dx + dy * dy + dz * dz < xi * xi
                })
            })
            .collect()
    }

    #[test]
    fn full_overlap_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cad = random_cloud(&mut rng, 300, 0.05);
        assert_eq!(template_update(&cad, &cad, 0.01), cad);
    }

    #[test]
    fn single_scan_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cad = random_cloud(&mut rng, 500, 0.05);
        let scan = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]).unwrap();
        let idx = NearestNeighborIndex::new(&scan);
        assert_eq!(template_indices(&cad, &idx, 0.02), brute(&cad, &scan, 0.02));
    }

    #[test]
    fn noise_amplitude_split() {
        // Half-amplitude noise keeps every point; double-amplitude offsets drop exactly that half.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xi = 0.01;
        // Sparse enough that no point has a neighbor within xi besides its own copy.
        let cad: PointCloud = PointCloud::new(
            (0..1000)
                .map(|i| Point3::new((i % 10) as f64 * 0.03, ((i / 10) % 10) as f64 * 0.03, (i / 100) as f64 * 0.03))
                .collect(),
        )
        .unwrap();
        let mut dir = || {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            v.normalize()
        };
        let small: Vec<_> = cad.iter().map(|p| p + dir() * (xi / 2.0)).collect();
        let small = PointCloud::new(small).unwrap();
        assert_eq!(template_update(&cad, &small, xi).len(), 1000);

        let half: Vec<_> = cad
            .iter()
            .enumerate()
            .map(|(i, p)| if i % 2 == 0 { *p } else { p + dir() * (2.0 * xi) })
            .collect();
        let half = PointCloud::new(half).unwrap();
        let kept = template_indices(&cad, &NearestNeighborIndex::new(&half), xi);
        assert_eq!(kept, brute(&cad, &half, xi));
        assert_eq!(kept, (0..1000).step_by(2).collect::<Vec<_>>());
    }

    #[test]
    fn update_rule_thresholds() {
        let cfg = TrackerConfig::default();
        let cad = PointCloud::new(vec![Point3::origin()]).unwrap();
        let tmpl = Template::new(&cad, vec![0], RigidPose::identity(), 0.40);
        assert!(!should_update(&tmpl, &RigidPose::identity(), 0.40, &cfg));
        let r31 = RigidPose::from_axis_angle(&Vector3::z(), 31f64.to_radians(), Vector3::zeros());
        assert!(should_update(&tmpl, &r31, 0.40, &cfg));
        let r29 = RigidPose::from_axis_angle(&Vector3::z(), 29f64.to_radians(), Vector3::zeros());
        assert!(!should_update(&tmpl, &r29, 0.40, &cfg));
        assert!(should_update(&tmpl, &RigidPose::identity(), 0.56, &cfg));
        assert!(!should_update(&tmpl, &RigidPose::identity(), 0.54, &cfg));
        // Absolute change: a drop in progress counts too.
        assert!(should_update(&tmpl, &RigidPose::identity(), 0.24, &cfg));
        let t6 = RigidPose::from_translation(Vector3::new(0.0, 0.06, 0.0));
        assert!(should_update(&tmpl, &t6, 0.40, &cfg));
        let t4 = RigidPose::from_translation(Vector3::new(0.0, 0.04, 0.0));
        assert!(!should_update(&tmpl, &t4, 0.40, &cfg));
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in any::<u64>(), n_cad in 1usize..300, n_scan in 1usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cad = random_cloud(&mut rng, n_cad, 0.05);
            let scan = random_cloud(&mut rng, n_scan, 0.05);
            let idx = NearestNeighborIndex::new(&scan);
            prop_assert_eq!(template_indices(&cad, &idx, 0.01), brute(&cad, &scan, 0.01));
        }
    }
}
