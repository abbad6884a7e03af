//! Collision pairs between hand spheres, the object and a table halfspace,
//! with witness-point signed distances and their configuration gradients.

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::ObjectModel;
use crate::kinematics::{Body, HandModel};

type V3 = Vector3<f64>;

/// Allowed fingertip penetration into the object.
pub const FINGERTIP_OBJECT_MARGIN: f64 = -0.003;
/// Minimum clearance for every other pair.
pub const SAFETY_MARGIN: f64 = 0.001;
/// Pairs farther apart than this report a zero gradient.
pub const CULL_DISTANCE: f64 = 0.05;

/// `{x : n·x ≥ offset}` with unit `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub normal: V3,
    pub offset: f64,
}

impl Halfspace {
    /// The table surface `z ≥ 0`.
    pub fn table() -> Self {
        Self { normal: V3::z(), offset: 0.0 }
    }

    pub fn signed_distance(&self, p: &V3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Two hand spheres on non-adjacent bodies.
    SelfCollision { a: usize, b: usize },
    SphereObject { sphere: usize },
    SphereTable { sphere: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPair {
    pub kind: PairKind,
    /// Required lower bound on the signed distance.
    pub margin: f64,
}

/// Enumerates all constrained pairs: self-collision between spheres on
/// distinct non-adjacent bodies, every sphere against the object, and every
/// sphere against the table when one is present.
pub fn collision_pairs(hand: &HandModel, table: Option<&Halfspace>) -> Vec<CollisionPair> {
    let s = &hand.spheres;
    let mut out = Vec::new();
    for a in 0..s.len() {
        for b in a + 1..s.len() {
            if s[a].body != s[b].body && !hand.adjacent(s[a].body, s[b].body) {
                out.push(CollisionPair { kind: PairKind::SelfCollision { a, b }, margin: SAFETY_MARGIN });
            }
        }
    }
    for (i, sphere) in s.iter().enumerate() {
        let margin = if sphere.fingertip { FINGERTIP_OBJECT_MARGIN } else { SAFETY_MARGIN };
        out.push(CollisionPair { kind: PairKind::SphereObject { sphere: i }, margin });
    }
    if table.is_some() {
        for i in 0..s.len() {
            out.push(CollisionPair { kind: PairKind::SphereTable { sphere: i }, margin: SAFETY_MARGIN });
        }
    }
    out
}

/// Direction memory for coincident witness points: the previous separating
/// direction is reused, initialized from a seeded random draw.
#[derive(Debug, Clone)]
pub struct WitnessCache {
    directions: Vec<Option<V3>>,
    rng: ChaCha8Rng,
}

impl WitnessCache {
    pub fn new(pairs: usize, seed: u64) -> Self {
        Self { directions: vec![None; pairs], rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn direction(&mut self, pair: usize, candidate: Option<V3>) -> V3 {
        if let Some(d) = candidate {
            self.directions[pair] = Some(d);
            return d;
        }
        if let Some(d) = self.directions[pair] {
            return d;
        }
        let d = loop {
            let v = V3::new(StandardNormal.sample(&mut self.rng), StandardNormal.sample(&mut self.rng), StandardNormal.sample(&mut self.rng));
            if let Some(u) = v.try_normalize(1e-12) {
                break u;
            }
        };
        self.directions[pair] = Some(d);
        d
    }
}

/// Everything a collision evaluation needs besides `q`.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub hand: &'a HandModel,
    pub object: &'a ObjectModel,
    pub table: Option<&'a Halfspace>,
}

/// Signed distance `σ` of one pair and `∇_q σ`. Gradients of pairs farther
/// than [`CULL_DISTANCE`] are zeroed.
pub fn collision_constraint(
    scene: &Scene,
    pairs: &[CollisionPair],
    index: usize,
    q: &DVector<f64>,
    cache: &mut WitnessCache,
) -> (f64, DVector<f64>) {
    let hand = scene.hand;
    let n = hand.dofs();
    let (value, grad) = match pairs[index].kind {
        PairKind::SelfCollision { a, b } => {
            let ca = hand.sphere_center(q, a);
            let cb = hand.sphere_center(q, b);
            let diff = cb - ca;
            let dist = diff.norm();
            let dir = cache.direction(index, diff.try_normalize(1e-12));
            let value = dist - hand.spheres[a].radius - hand.spheres[b].radius;
            let ja = hand.sphere_jacobian(q, a);
            let jb = hand.sphere_jacobian(q, b);
            (value, (jb - ja).transpose() * dir)
        }
        PairKind::SphereObject { sphere } => {
            let c = hand.sphere_center(q, sphere);
            let value = scene.object.sdf_value(&c) - hand.spheres[sphere].radius;
            let g = scene.object.sdf_gradient(&c);
            let dir = cache.direction(index, g.try_normalize(1e-12));
            (value, hand.sphere_jacobian(q, sphere).transpose() * dir)
        }
        PairKind::SphereTable { sphere } => {
            let table = scene.table.expect("table pair without a table");
            let c = hand.sphere_center(q, sphere);
            let value = table.signed_distance(&c) - hand.spheres[sphere].radius;
            (value, hand.sphere_jacobian(q, sphere).transpose() * table.normal)
        }
    };
    if value > CULL_DISTANCE {
        (value, DVector::zeros(n))
    } else {
        (value, grad)
    }
}

/// Signed distance of every pair without gradients.
pub fn pair_distances(scene: &Scene, pairs: &[CollisionPair], q: &DVector<f64>) -> Vec<f64> {
    let hand = scene.hand;
    let centers: Vec<V3> = (0..hand.spheres.len()).map(|i| hand.sphere_center(q, i)).collect();
    pairs
        .iter()
        .map(|p| match p.kind {
            PairKind::SelfCollision { a, b } => {
                (centers[b] - centers[a]).norm() - hand.spheres[a].radius - hand.spheres[b].radius
            }
            PairKind::SphereObject { sphere } => scene.object.sdf_value(&centers[sphere]) - hand.spheres[sphere].radius,
            PairKind::SphereTable { sphere } => {
                scene.table.expect("table pair without a table").signed_distance(&centers[sphere]) - hand.spheres[sphere].radius
            }
        })
        .collect()
}

/// Whether the pair involves a body of the given finger.
pub fn involves_finger(hand: &HandModel, pair: &CollisionPair, finger: usize) -> bool {
    let on = |s: usize| matches!(hand.spheres[s].body, Body::Link { finger: f, .. } if f == finger);
    match pair.kind {
        PairKind::SelfCollision { a, b } => on(a) || on(b),
        PairKind::SphereObject { sphere } | PairKind::SphereTable { sphere } => on(sphere),
    }
}
