//! Deterministic inputs shared by the benchmarks.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use grasp_core::{fixtures, HandModel, ObjectModel};

/// Gaussian `d × m` wrench matrix, shifted so its centroid sits at `offset`
/// times a random unit vector.
pub fn wrench_matrix(seed: u64, d: usize, m: usize, offset: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let shift = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize() * offset;
    let mean = w.column_mean();
    for mut c in w.column_iter_mut() {
        c += &shift - &mean;
    }
    w
}

/// `n` derivative directions for a `d × m` wrench matrix.
pub fn perturbations(seed: u64, d: usize, m: usize, n: usize) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal))).collect()
}

/// Query points in a shell around the object's bounding sphere.
pub fn shell_points(object: &ObjectModel, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = object.bounding_radius();
    (0..n)
        .map(|_| {
            let u = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
            object.origin() + u * r * rng.random_range(0.5..1.5)
        })
        .collect()
}

/// The default hand with the sphere, box and cylinder fixtures.
pub fn scenes() -> (HandModel, Vec<(&'static str, ObjectModel)>) {
    (
        fixtures::three_finger_hand(),
        vec![("sphere", fixtures::sphere()), ("box", fixtures::cuboid()), ("cylinder", fixtures::cylinder())],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_deterministic() {
        assert_eq!(wrench_matrix(3, 6, 12, 0.2), wrench_matrix(3, 6, 12, 0.2));
        let c = wrench_matrix(1, 6, 12, 0.0).column_mean();
        assert!(c.amax() < 1e-12);
        let (_, objects) = scenes();
        assert_eq!(shell_points(&objects[0].1, 10, 1), shell_points(&objects[0].1, 10, 1));
    }
}
