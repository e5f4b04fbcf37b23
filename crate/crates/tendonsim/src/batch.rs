//! Batch evaluation over poses, data-parallel when the `parallel` feature is
//! enabled (it is by default).
//!
//! Parallelism never changes results: work splits per pose, each pose's
//! arithmetic is untouched, and outputs collect in input order, so the
//! parallel and sequential paths return bitwise-identical vectors.

use crate::geometry::JointPose;
use crate::sensor::{delta_length, NeutralReference, SensorError, SensorFrame};
use crate::tendon::TendonLayout;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Caps the rayon thread pool. `None` keeps the default (one thread per
/// core); calls after the pool exists are ignored, as are calls when the
/// `parallel` feature is off.
pub fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Maps `f` over `items`, preserving order.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like [`map_ordered`] but stops at the first error.
pub fn try_map_ordered<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential length deltas for a batch of poses.
pub fn delta_lengths_seq(
    layout: &TendonLayout,
    neutral: &NeutralReference,
    poses: &[JointPose],
) -> Result<Vec<SensorFrame>, SensorError> {
    poses
        .iter()
        .map(|p| delta_length(layout, neutral, p))
        .collect()
}

/// Parallel length deltas for a batch of poses; same results as
/// [`delta_lengths_seq`] in the same order.
#[cfg(feature = "parallel")]
pub fn delta_lengths_par(
    layout: &TendonLayout,
    neutral: &NeutralReference,
    poses: &[JointPose],
) -> Result<Vec<SensorFrame>, SensorError> {
    poses
        .par_iter()
        .map(|p| delta_length(layout, neutral, p))
        .collect()
}

/// Length deltas for a batch of poses, parallel when the feature allows it.
pub fn delta_lengths(
    layout: &TendonLayout,
    neutral: &NeutralReference,
    poses: &[JointPose],
) -> Result<Vec<SensorFrame>, SensorError> {
    #[cfg(feature = "parallel")]
    {
        delta_lengths_par(layout, neutral, poses)
    }
    #[cfg(not(feature = "parallel"))]
    {
        delta_lengths_seq(layout, neutral, poses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::neutral_reference;
    use crate::tendon::default_layout;

    fn pose_grid() -> Vec<JointPose> {
        let mut poses = Vec::new();
        for i in 0..12 {
            for j in 1..10 {
                poses.push(JointPose::new(
                    -40.0 + 130.0 * i as f64 / 11.0,
                    90.0 * j as f64 / 9.0,
                ));
            }
        }
        poses
    }

    #[test]
    fn batch_matches_per_pose_calls() {
        let layout = default_layout();
        let neutral = neutral_reference(layout, &JointPose::NEUTRAL).unwrap();
        let poses = pose_grid();
        let batch = delta_lengths(layout, &neutral, &poses).unwrap();
        for (pose, frame) in poses.iter().zip(&batch) {
            let single = delta_length(layout, &neutral, pose).unwrap();
            assert_eq!(single.as_array(), frame.as_array());
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let layout = default_layout();
        let neutral = neutral_reference(layout, &JointPose::NEUTRAL).unwrap();
        let poses = pose_grid();
        let seq = delta_lengths_seq(layout, &neutral, &poses).unwrap();
        let par = delta_lengths_par(layout, &neutral, &poses).unwrap();
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.as_array(), b.as_array());
        }
    }

    #[test]
    fn map_ordered_preserves_order() {
        let items: Vec<u64> = (0..100).collect();
        let doubled = map_ordered(&items, |&x| 2 * x);
        assert_eq!(doubled, items.iter().map(|x| 2 * x).collect::<Vec<_>>());
        let fallible = try_map_ordered(
            &items,
            |&x| {
                if x < 100 {
                    Ok(x)
                } else {
                    Err("out of range")
                }
            },
        );
        assert_eq!(fallible.unwrap(), items);
        let err: Result<Vec<u64>, &str> =
            try_map_ordered(&items, |&x| if x < 50 { Ok(x) } else { Err("boom") });
        assert!(err.is_err());
    }
}
