//! Heuristic candidate grasps from the object's oriented bounding box.
//!
//! The palm y-axis (the finger-opposition direction) is aligned with an OBB
//! axis chosen with probability proportional to its side length. The palm
//! x-axis (the approach direction) points along one of the remaining axes.
//! The frame is perturbed by a random rotation with a von Mises distributed
//! angle, the palm is placed a fixed standoff from the box along its x-axis,
//! and the fingers are pre-shaped to straddle the chosen width.

use nalgebra::{DVector, Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Obb, ObjectModel};
use crate::kinematics::HandModel;

type V3 = Vector3<f64>;
type M3 = Matrix3<f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Palm distance from the OBB face along the palm x-axis (m).
    pub standoff: f64,
    /// Von Mises concentration of the rotational noise; infinite disables it.
    pub kappa: f64,
    /// Objects shorter than this (m) are only approached from above.
    pub top_only_height: f64,
    /// Extra fingertip clearance beyond the box half-width (m).
    pub width_margin: f64,
    /// Approach directions with `x·ẑ` above this point up from under the
    /// table and are not used.
    pub max_upward_approach: f64,
    /// Lowest admissible palm origin height (m).
    pub min_palm_height: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            standoff: 0.04,
            kappa: 10.0,
            top_only_height: 0.03,
            width_margin: 0.005,
            max_upward_approach: 0.5,
            min_palm_height: 0.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.standoff > 0.0) || !(self.kappa > 0.0) {
            return Err("sampler needs standoff > 0 and kappa > 0".into());
        }
        Ok(())
    }
}

/// Angle from the von Mises distribution `VM(0, κ)` on `(−π, π]`
/// (Best–Fisher rejection sampler).
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    use std::f64::consts::PI;
    if kappa.is_infinite() {
        return 0.0;
    }
    if kappa < 1e-8 {
        return rng.random_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.random();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 > 0.5 { theta } else { -theta };
        }
    }
}

/// Random rotation about a uniformly distributed axis by a von Mises angle.
pub fn von_mises_rotation<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> M3 {
    let axis = loop {
        let v = V3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        if let Some(u) = Unit::try_new(v, 1e-12) {
            break u;
        }
    };
    let angle = sample_von_mises(kappa, rng);
    Rotation3::from_axis_angle(&axis, angle).into_inner()
}

/// OBB axis index with probability proportional to side length.
pub fn choose_axis<R: Rng + ?Sized>(obb: &Obb, rng: &mut R) -> usize {
    let total = obb.half_extents.sum();
    let mut u = rng.random::<f64>() * total;
    for k in 0..3 {
        if u < obb.half_extents[k] {
            return k;
        }
        u -= obb.half_extents[k];
    }
    2
}

fn support(obb: &Obb, dir: &V3) -> f64 {
    (0..3).map(|k| obb.half_extents[k] * obb.axes.column(k).dot(dir).abs()).sum()
}

/// Nominal palm frame (before noise): columns are palm x, y, z.
#[derive(Debug, Clone, Copy)]
pub struct PalmChoice {
    pub width_axis: usize,
    pub rotation: M3,
    pub width: f64,
}

/// Picks the width axis and approach direction, honoring the top-approach
/// rule and excluding approaches from below.
pub fn choose_palm_frame<R: Rng + ?Sized>(obb: &Obb, cfg: &SamplerConfig, rng: &mut R) -> PalmChoice {
    let up = V3::z();
    let height = 2.0 * support(obb, &up);
    let top_only = height < cfg.top_only_height;
    for _ in 0..64 {
        let k = choose_axis(obb, rng);
        let y = obb.axes.column(k).into_owned();
        let mut candidates: Vec<V3> = Vec::with_capacity(4);
        for j in (0..3).filter(|&j| j != k) {
            for sign in [1.0, -1.0] {
                let x = obb.axes.column(j) * sign;
                let ok = if top_only { x.dot(&-up) > 0.5 } else { x.dot(&up) <= cfg.max_upward_approach };
                if ok {
                    candidates.push(x);
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let x = candidates[rng.random_range(0..candidates.len())];
        let z = x.cross(&y);
        return PalmChoice { width_axis: k, rotation: M3::from_columns(&[x, y, z]), width: 2.0 * obb.half_extents[k] };
    }
    // Degenerate boxes: approach straight down across the longest axis.
    let k = obb.half_extents.imax();
    let y = obb.axes.column(k).into_owned();
    let x = (-up - y * y.dot(&-up)).try_normalize(1e-9).unwrap_or_else(|| y.cross(&V3::x()).normalize());
    PalmChoice { width_axis: k, rotation: M3::from_columns(&[x, y, x.cross(&y)]), width: 2.0 * obb.half_extents[k] }
}

/// Finger joints interpolated between the lower and upper limits so that the
/// contact point sits `target` from the palm's y = 0 plane.
fn preshape_finger(hand: &HandModel, q: &mut DVector<f64>, finger: usize, target: f64) {
    let range = hand.joint_range(finger);
    let (lo, hi) = (hand.lower().clone(), hand.upper().clone());
    let mut palm_frame = q.clone();
    for k in 0..6 {
        palm_frame[k] = 0.0;
    }
    let offset = |t: f64, qq: &mut DVector<f64>| {
        for k in range.clone() {
            qq[k] = lo[k] + t * (hi[k] - lo[k]);
        }
        hand.forward_kinematics(qq, finger).y.abs() - target
    };
    const GRID: usize = 64;
    let mut prev = 0.0;
    let mut found = None;
    if offset(0.0, &mut palm_frame) <= 0.0 {
        found = Some((0.0, 0.0));
    } else {
        for i in 1..=GRID {
            let t = i as f64 / GRID as f64;
            if offset(t, &mut palm_frame) <= 0.0 {
                found = Some((prev, t));
                break;
            }
            prev = t;
        }
    }
    let t = match found {
        Some((a, b)) if b > a => {
            let (mut a, mut b) = (a, b);
            for _ in 0..50 {
                let mid = 0.5 * (a + b);
                if offset(mid, &mut palm_frame) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        }
        Some((a, _)) => a,
        None => 1.0,
    };
    for k in range {
        q[k] = lo[k] + t * (hi[k] - lo[k]);
    }
}

/// Draws one candidate configuration; deterministic in `seed`.
pub fn sample_candidate(hand: &HandModel, object: &ObjectModel, cfg: &SamplerConfig, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obb = object.obb();
    let mut q = DVector::zeros(hand.dofs());
    for attempt in 0..32 {
        let choice = choose_palm_frame(obb, cfg, &mut rng);
        let rot = von_mises_rotation(cfg.kappa, &mut rng) * choice.rotation;
        let x = rot.column(0).into_owned();
        let position = obb.center - x * (support(obb, &x) + cfg.standoff);
        let w = Rotation3::from_matrix_unchecked(rot).scaled_axis();
        q.fixed_rows_mut::<3>(0).copy_from(&position);
        q.fixed_rows_mut::<3>(3).copy_from(&w);
        let target = 0.5 * choice.width + cfg.width_margin;
        for f in 0..hand.num_fingers() {
            preshape_finger(hand, &mut q, f, target);
        }
        if position.z >= cfg.min_palm_height || attempt == 31 {
            break;
        }
    }
    hand.clamp(&q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Isometry3;

    use crate::geometry::Primitive;
    use crate::kinematics::three_finger_hand;

    fn box_object(h: [f64; 3]) -> ObjectModel {
        ObjectModel::analytic(Primitive::Box { half_extents: h }, Isometry3::translation(0.0, 0.0, h[2]), 0.1, 0.7).unwrap()
    }

    #[test]
    fn von_mises_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mean_cos: f64 = (0..n).map(|_| sample_von_mises(10.0, &mut rng).cos()).sum::<f64>() / n as f64;
        // A(κ) = I₁(κ)/I₀(κ) ≈ 0.9486 for κ = 10.
        assert!((mean_cos - 0.9486).abs() < 0.005, "{mean_cos}");
    }

    #[test]
    fn noiseless_palm_is_axis_aligned() {
        let obj = box_object([0.03, 0.05, 0.04]);
        let cfg = SamplerConfig { kappa: f64::INFINITY, ..Default::default() };
        let hand = three_finger_hand();
        for seed in 0..20 {
            let q = sample_candidate(&hand, &obj, &cfg, seed);
            let rot = hand.palm_pose(&q).rotation.to_rotation_matrix().into_inner();
            let y = rot.column(1);
            let best = (0..3).map(|k| obj.obb().axes.column(k).dot(&y).abs()).fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_objects_are_approached_from_above() {
        let obj = box_object([0.05, 0.04, 0.01]);
        let hand = three_finger_hand();
        for seed in 0..200 {
            let q = sample_candidate(&hand, &obj, &SamplerConfig::default(), seed);
            let x = hand.palm_pose(&q).rotation * V3::x();
            assert!(x.dot(&-V3::z()) > 0.0);
        }
    }

    #[test]
    fn deterministic_and_within_limits() {
        let obj = box_object([0.03, 0.04, 0.05]);
        let hand = three_finger_hand();
        let a = sample_candidate(&hand, &obj, &SamplerConfig::default(), 11);
        let b = sample_candidate(&hand, &obj, &SamplerConfig::default(), 11);
        assert_eq!(a, b);
        assert!(hand.within_limits(&a, 0.0));
    }

    #[test]
    fn standoff_is_exact() {
        let obj = box_object([0.03, 0.04, 0.05]);
        let hand = three_finger_hand();
        let q = sample_candidate(&hand, &obj, &SamplerConfig::default(), 5);
        let pose = hand.palm_pose(&q);
        let x = pose.rotation * V3::x();
        let obb = obj.obb();
        let gap = (obb.center - pose.translation.vector).dot(&x) - support(obb, &x);
        assert!((gap - 0.04).abs() < 1e-12);
    }
}
