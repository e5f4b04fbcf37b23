//! Evaluation utilities: monotonicity screening of the routing, forward
//! surface sampling, sensor-subset ablation, hysteresis characterization, and
//! RMSE reporting for trained maps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::geometry::JointPose;
use crate::mapping::{
    rmse_columns, train, Direction, MappingError, Mat, TrainConfig, TrainedModel,
};
use crate::sensor::{
    emulate_sequence, neutral_reference, NeutralReference, SensorEmulation, SensorError,
    SensorFrame,
};
use crate::tendon::{TendonLayout, TENDON_NAMES};

/// Sample pitch of the monotonicity sweeps, in degrees.
const SWEEP_STEP_DEG: f64 = 1.0;
const HORIZONTAL_STEP_DEG: f64 = 2.0;
const HYSTERESIS_STEP_DEG: f64 = 0.1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("sensor data must have exactly {expected} columns, got {got}")]
    WrongWidth { expected: usize, got: usize },
    #[error("{0}")]
    BadArgument(String),
}

/// Overall direction of a signal along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Falling,
    Rising,
    Flat,
}

/// Screen result for one tendon on one sweep.
#[derive(Debug, Clone)]
pub struct MonotonicityEntry {
    pub tendon: String,
    pub sweep: String,
    pub trend: Trend,
    /// Direction changes between consecutive significant steps.
    pub reversals: usize,
    /// Deepest countertrend excursion, whatever the dead band.
    pub max_reversal_mm: f64,
    pub monotone: bool,
}

/// Classifies one sampled series. A step smaller than the dead band is
/// ignored; a reversal is a sign flip between two consecutive significant
/// steps. The reported depth is the largest drawdown against the overall
/// trend, so slow sub-threshold drifts still show up in the numbers even
/// when they do not count as reversals.
fn scan_trend(values: &[f64], dead_band: f64) -> (Trend, usize, f64) {
    let total = values[values.len() - 1] - values[0];
    let trend = if total.abs() <= dead_band {
        Trend::Flat
    } else if total > 0.0 {
        Trend::Rising
    } else {
        Trend::Falling
    };

    let mut reversals = 0usize;
    let mut last_significant = 0.0f64;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d.abs() > dead_band {
            if last_significant != 0.0 && d.signum() != last_significant.signum() {
                reversals += 1;
            }
            last_significant = d;
        }
    }

    let dir = if total >= 0.0 { 1.0 } else { -1.0 };
    let mut extreme = values[0];
    let mut deepest = 0.0f64;
    for &v in values {
        let progress = (v - extreme) * dir;
        if progress >= 0.0 {
            extreme = v;
        } else {
            deepest = deepest.max(-progress);
        }
    }
    (trend, reversals, deepest)
}

/// Sweeps three canonical movements and reports, per tendon, whether its
/// length delta changes monotonically at the dead-band resolution.
/// `dead_band_mm` is typically the ADC quantization step: changes the sensor
/// cannot resolve should not count against the routing.
pub fn monotonicity_screen(
    layout: &TendonLayout,
    dead_band_mm: f64,
) -> Result<Vec<MonotonicityEntry>, EvalError> {
    let neutral = neutral_reference(layout, &JointPose::NEUTRAL)?;
    let elevation_steps = (90.0 / SWEEP_STEP_DEG) as usize;
    let horizontal_steps = (130.0 / HORIZONTAL_STEP_DEG) as usize;
    let sweeps: [(&str, usize, Box<dyn Fn(f64) -> JointPose>); 3] = [
        (
            "flex_ext",
            elevation_steps,
            Box::new(|s| JointPose::new(90.0, s * 90.0)),
        ),
        (
            "ab_ad",
            elevation_steps,
            Box::new(|s| JointPose::new(0.0, s * 90.0)),
        ),
        (
            "horizontal",
            horizontal_steps,
            Box::new(|s| JointPose::new(-40.0 + s * 130.0, 90.0)),
        ),
    ];
    let mut entries = Vec::with_capacity(12);
    for (name, steps, pose_at) in &sweeps {
        let poses: Vec<JointPose> = (0..=*steps)
            .map(|i| pose_at(i as f64 / *steps as f64))
            .collect();
        let frames = batch::delta_lengths(layout, &neutral, &poses)?;
        for (t, tendon) in TENDON_NAMES.iter().enumerate() {
            let series: Vec<f64> = frames.iter().map(|f| f.as_array()[t]).collect();
            let (trend, reversals, deepest) = scan_trend(&series, dead_band_mm);
            entries.push(MonotonicityEntry {
                tendon: tendon.to_string(),
                sweep: name.to_string(),
                trend,
                reversals,
                max_reversal_mm: deepest,
                monotone: reversals == 0,
            });
        }
    }
    Ok(entries)
}

/// Azimuth/elevation box that bounds a sweep or surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkspaceBounds {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub phi_min_deg: f64,
    pub phi_max_deg: f64,
}

impl Default for WorkspaceBounds {
    fn default() -> Self {
        Self {
            theta_min_deg: -40.0,
            theta_max_deg: 90.0,
            phi_min_deg: 0.0,
            phi_max_deg: 90.0,
        }
    }
}

/// One grid node of the forward surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub pose: JointPose,
    pub deltas: SensorFrame,
}

/// Evaluates all four length deltas over an `n x n` grid (azimuth-major).
pub fn forward_surface(
    layout: &TendonLayout,
    neutral: &NeutralReference,
    bounds: &WorkspaceBounds,
    n: usize,
) -> Result<Vec<SurfacePoint>, EvalError> {
    if n < 2 {
        return Err(EvalError::BadArgument(format!(
            "surface grid needs at least 2 nodes per axis, got {n}"
        )));
    }
    let mut poses = Vec::with_capacity(n * n);
    for i in 0..n {
        let theta = bounds.theta_min_deg
            + (bounds.theta_max_deg - bounds.theta_min_deg) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let phi = bounds.phi_min_deg
                + (bounds.phi_max_deg - bounds.phi_min_deg) * j as f64 / (n - 1) as f64;
            poses.push(JointPose::new(theta, phi));
        }
    }
    let frames = batch::delta_lengths(layout, neutral, &poses)?;
    Ok(poses
        .into_iter()
        .zip(frames)
        .map(|(pose, deltas)| SurfacePoint { pose, deltas })
        .collect())
}

/// How pose errors are aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    /// Weight azimuth errors by `sin(elevation)` so the indeterminate
    /// azimuth at the hanging pose does not dominate the score.
    pub weight_azimuth_by_sin_elevation: bool,
}

/// Azimuth and elevation RMSE between predicted and true poses, optionally
/// weighting azimuth rows by the sine of the true elevation.
pub fn pose_rmse(pred: &Mat, truth: &Mat, opts: &EvalOptions) -> (f64, f64) {
    assert_eq!(pred.rows, truth.rows);
    assert_eq!(pred.cols, 2);
    assert_eq!(truth.cols, 2);
    let mut az_num = 0.0;
    let mut az_den = 0.0;
    let mut el_sum = 0.0;
    for r in 0..pred.rows {
        let e_az = pred.at(r, 0) - truth.at(r, 0);
        let e_el = pred.at(r, 1) - truth.at(r, 1);
        let w = if opts.weight_azimuth_by_sin_elevation {
            truth.at(r, 1).to_radians().sin().max(0.0)
        } else {
            1.0
        };
        az_num += w * e_az * e_az;
        az_den += w;
        el_sum += e_el * e_el;
    }
    let az = if az_den > 0.0 {
        (az_num / az_den).sqrt()
    } else {
        0.0
    };
    (az, (el_sum / pred.rows as f64).sqrt())
}

/// Test-set pose RMSE of an inverse model on raw sensor columns.
pub fn inverse_rmse(
    model: &TrainedModel,
    sensors: &Mat,
    poses: &Mat,
    opts: &EvalOptions,
) -> Result<(f64, f64), EvalError> {
    let pred = model.predict(sensors)?;
    Ok(pose_rmse(&pred, poses, opts))
}

/// Per-tendon delta RMSE of a forward model, in millimeters.
pub fn forward_rmse(
    model: &TrainedModel,
    poses: &Mat,
    sensors: &Mat,
) -> Result<Vec<f64>, EvalError> {
    let pred = model.predict(poses)?;
    if pred.cols != sensors.cols {
        return Err(EvalError::WrongWidth {
            expected: pred.cols,
            got: sensors.cols,
        });
    }
    Ok(rmse_columns(&pred, sensors))
}

/// Ablation result for one sensor subset.
#[derive(Debug, Clone)]
pub struct AblationEntry {
    pub sensors: Vec<String>,
    pub rmse_azimuth_deg: f64,
    pub rmse_elevation_deg: f64,
    pub mean_rmse_deg: f64,
    pub epochs_run: usize,
}

/// Full ablation over every subset of two or more sensors.
#[derive(Debug, Clone)]
pub struct AblationReport {
    pub entries: Vec<AblationEntry>,
    pub best_subset: Vec<String>,
    /// Whether the weakest pair is the antagonist front/rear pair {F, R}.
    pub antagonist_pair_worst: bool,
}

/// The eleven subsets of size two or more, smallest first.
pub fn sensor_subsets() -> Vec<Vec<usize>> {
    let mut subsets = Vec::with_capacity(11);
    for size in 2..=4usize {
        for mask in 0u8..16 {
            if mask.count_ones() as usize == size {
                subsets.push((0..4).filter(|i| mask & (1 << i) != 0).collect());
            }
        }
    }
    subsets
}

fn gather_cols(m: &Mat, cols: &[usize]) -> Mat {
    Mat::from_fn(m.rows, cols.len(), |r, c| m.at(r, cols[c]))
}

/// Trains an inverse model per sensor subset and scores each on the shared
/// test split. `sensors` must hold the four tendon columns in canonical
/// order; the split depends only on the row count and the shuffle seed, so
/// every subset sees identical train/validation/test rows.
pub fn ablate(
    sensors: &Mat,
    poses: &Mat,
    cfg: &TrainConfig,
    opts: &EvalOptions,
) -> Result<AblationReport, EvalError> {
    if sensors.cols != 4 {
        return Err(EvalError::WrongWidth {
            expected: 4,
            got: sensors.cols,
        });
    }
    let subsets = sensor_subsets();
    let entries: Vec<AblationEntry> = batch::try_map_ordered(&subsets, |subset| {
        let names: Vec<String> = subset
            .iter()
            .map(|&i| TENDON_NAMES[i].to_string())
            .collect();
        let x = gather_cols(sensors, subset);
        let outcome = train(&x, poses, Direction::Inverse, &names, cfg)?;
        let x_test = x.gather_rows(&outcome.split.test);
        let y_test = poses.gather_rows(&outcome.split.test);
        let (az, el) = inverse_rmse(&outcome.model, &x_test, &y_test, opts)?;
        Ok::<AblationEntry, EvalError>(AblationEntry {
            sensors: names,
            rmse_azimuth_deg: az,
            rmse_elevation_deg: el,
            mean_rmse_deg: 0.5 * (az + el),
            epochs_run: outcome.model.epochs_run,
        })
    })?;

    let best_subset = entries
        .iter()
        .min_by(|a, b| a.mean_rmse_deg.total_cmp(&b.mean_rmse_deg))
        .map(|e| e.sensors.clone())
        .unwrap_or_default();
    let worst_pair = entries
        .iter()
        .filter(|e| e.sensors.len() == 2)
        .max_by(|a, b| a.mean_rmse_deg.total_cmp(&b.mean_rmse_deg))
        .map(|e| e.sensors.clone())
        .unwrap_or_default();
    let antagonist_pair_worst = worst_pair == vec!["F".to_string(), "R".to_string()];

    Ok(AblationReport {
        entries,
        best_subset,
        antagonist_pair_worst,
    })
}

/// Hysteresis characterization of one channel.
#[derive(Debug, Clone)]
pub struct HysteresisEntry {
    pub tendon: String,
    /// Gap between the descending and ascending branches at mid-flexion.
    pub loop_width_mm: f64,
    /// Reading left over at the return to the hanging pose.
    pub residual_offset_mm: f64,
    /// RMS gap between the two branches over the whole last cycle.
    pub rms_gap_mm: f64,
}

/// Drives repeated flexion cycles through the emulated channels and measures
/// the opening of each channel's loop on the final cycle.
///
/// The sweep raises elevation 0 to 90 degrees and back in the 90-degree
/// azimuth plane at 0.1-degree resolution. The loop width is read at
/// 45 degrees, where the branches are farthest from the turnarounds.
pub fn compare_channels(
    layout: &TendonLayout,
    neutral: &NeutralReference,
    emulation: &SensorEmulation,
    cycles: usize,
) -> Result<Vec<HysteresisEntry>, EvalError> {
    if cycles == 0 {
        return Err(EvalError::BadArgument("cycles must be at least 1".into()));
    }
    let half: usize = (90.0 / HYSTERESIS_STEP_DEG).round() as usize + 1;
    let mut poses = Vec::with_capacity(cycles * 2 * half);
    for _ in 0..cycles {
        for i in 0..half {
            poses.push(JointPose::new(90.0, i as f64 * HYSTERESIS_STEP_DEG));
        }
        // The descending branch revisits the exact same grid values, so any
        // branch gap comes from the emulation alone.
        for i in (0..half).rev() {
            poses.push(JointPose::new(90.0, i as f64 * HYSTERESIS_STEP_DEG));
        }
    }
    let ideal = batch::delta_lengths(layout, neutral, &poses)?;
    let emulated = emulate_sequence(emulation, &ideal);

    let base = (cycles - 1) * 2 * half;
    let mid = (45.0 / HYSTERESIS_STEP_DEG).round() as usize;
    let mut entries = Vec::with_capacity(4);
    for (t, tendon) in TENDON_NAMES.iter().enumerate() {
        let asc = |i: usize| emulated[base + i].as_array()[t];
        let desc_at_phi = |i: usize| emulated[base + half + (half - 1 - i)].as_array()[t];
        let loop_width_mm = (desc_at_phi(mid) - asc(mid)).abs();
        let residual_offset_mm = emulated[base + 2 * half - 1].as_array()[t];
        let mut acc = 0.0;
        for i in 0..half {
            let gap = desc_at_phi(i) - asc(i);
            acc += gap * gap;
        }
        entries.push(HysteresisEntry {
            tendon: tendon.to_string(),
            loop_width_mm,
            residual_offset_mm,
            rms_gap_mm: (acc / half as f64).sqrt(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tendon::default_layout;

    #[test]
    fn reversal_scan_counts_significant_sign_flips() {
        let clean: Vec<f64> = (0..50).map(|i| -0.3 * i as f64).collect();
        let (trend, reversals, deepest) = scan_trend(&clean, 0.01);
        assert_eq!(trend, Trend::Falling);
        assert_eq!(reversals, 0);
        assert!(deepest < 1e-12);

        // A spike flips direction twice: down-up, then up-down.
        let mut spiky: Vec<f64> = (0..50).map(|i| -0.6 * i as f64).collect();
        spiky[20] += 2.0;
        let (trend, reversals, deepest) = scan_trend(&spiky, 0.5);
        assert_eq!(trend, Trend::Falling);
        assert_eq!(reversals, 2);
        // The spike pokes 1.4 above the sample before it.
        assert!((deepest - 1.4).abs() < 1e-9);

        // A V-shaped series flips once.
        let vee: Vec<f64> = (0..20)
            .map(|i| if i < 10 { -(i as f64) } else { i as f64 - 20.0 })
            .collect();
        assert_eq!(scan_trend(&vee, 0.1).1, 1);

        // A bump made of sub-threshold steps does not count as a reversal,
        // but its drawdown depth is still reported.
        let drifty: Vec<f64> = (0..100)
            .map(|i| {
                let base = -0.05 * i as f64;
                let bump = if (40..=60).contains(&i) {
                    0.2 * (10.0 - (i as f64 - 50.0).abs())
                } else {
                    0.0
                };
                base + bump
            })
            .collect();
        let (_, reversals, deepest) = scan_trend(&drifty, 0.3);
        assert_eq!(reversals, 0);
        assert!(deepest > 1.0);

        let flat = vec![1.0; 20];
        assert_eq!(scan_trend(&flat, 0.01).0, Trend::Flat);
    }

    #[test]
    fn default_layout_screens_clean_on_primary_sweeps() {
        let dead_band = SensorEmulation::default().quantization_step_mm();
        let entries = monotonicity_screen(default_layout(), dead_band).unwrap();
        assert_eq!(entries.len(), 12);
        let find = |tendon: &str, sweep: &str| {
            entries
                .iter()
                .find(|e| e.tendon == tendon && e.sweep == sweep)
                .unwrap()
        };
        // Each movement's own agonist/antagonist channels respond cleanly.
        for (tendon, trend) in [("F", Trend::Falling), ("R", Trend::Rising)] {
            let e = find(tendon, "flex_ext");
            assert_eq!(e.trend, trend, "{tendon} on flex_ext");
            assert!(
                e.monotone,
                "{tendon} on flex_ext: {} reversals",
                e.reversals
            );
        }
        for tendon in ["SF", "SR"] {
            let e = find(tendon, "ab_ad");
            assert_eq!(e.trend, Trend::Falling, "{tendon} on ab_ad");
            assert!(e.monotone, "{tendon} on ab_ad: {} reversals", e.reversals);
        }
        // The off-axis side channels are allowed to fold; the screen's job
        // is to report it, not hide it.
        assert!(find("SR", "flex_ext").reversals <= 1);
    }

    #[test]
    fn surface_grid_contains_the_neutral_node() {
        let layout = default_layout();
        let neutral = neutral_reference(layout, &JointPose::NEUTRAL).unwrap();
        let surface = forward_surface(layout, &neutral, &WorkspaceBounds::default(), 5).unwrap();
        assert_eq!(surface.len(), 25);
        // phi = 0 nodes are the hanging pose, where every delta is zero.
        for p in surface.iter().filter(|p| p.pose.elevation_deg == 0.0) {
            for v in p.deltas.as_array() {
                assert_eq!(v, 0.0);
            }
        }
        assert!(forward_surface(layout, &neutral, &WorkspaceBounds::default(), 1).is_err());
    }

    #[test]
    fn azimuth_weighting_discounts_low_elevation_rows() {
        let truth = Mat::from_vec(2, 2, vec![0.0, 5.0, 0.0, 85.0]);
        let pred = Mat::from_vec(2, 2, vec![10.0, 5.0, 0.0, 85.0]);
        let plain = pose_rmse(&pred, &truth, &EvalOptions::default());
        let weighted = pose_rmse(
            &pred,
            &truth,
            &EvalOptions {
                weight_azimuth_by_sin_elevation: true,
            },
        );
        assert!((plain.0 - 50.0f64.sqrt()).abs() < 1e-12);
        assert!(weighted.0 < plain.0 / 2.0);
        assert_eq!(plain.1, 0.0);
    }

    #[test]
    fn subsets_enumerate_pairs_triples_and_quad() {
        let subsets = sensor_subsets();
        assert_eq!(subsets.len(), 11);
        assert_eq!(subsets.iter().filter(|s| s.len() == 2).count(), 6);
        assert_eq!(subsets.iter().filter(|s| s.len() == 3).count(), 4);
        assert_eq!(subsets[10], vec![0, 1, 2, 3]);
    }

    #[test]
    fn hysteresis_is_zero_when_emulation_is_off() {
        let layout = default_layout();
        let neutral = neutral_reference(layout, &JointPose::NEUTRAL).unwrap();
        // Defaults: no noise, no backlash. Quantization alone cannot open a
        // loop because both branches sample identical elevations.
        let clean = SensorEmulation::default();
        let entries = compare_channels(layout, &neutral, &clean, 2).unwrap();
        assert_eq!(entries.len(), 4);
        for e in &entries {
            assert!(e.loop_width_mm < 1e-9, "{}: {}", e.tendon, e.loop_width_mm);
            assert!(e.residual_offset_mm.abs() < 1e-9);
            assert!(e.rms_gap_mm < 1e-9);
        }
        assert!(compare_channels(layout, &neutral, &clean, 0).is_err());
    }
}
