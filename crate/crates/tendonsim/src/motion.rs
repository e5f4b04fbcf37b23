//! Calibration motion protocols: deterministic joint-angle trajectories sampled
//! at a fixed frame rate.
//!
//! Five movement kinds cover the workspace: flexion/extension, abduction and
//! adduction, azimuth-fixed elevation sweeps, elevation-fixed azimuth sweeps,
//! and a seeded smooth random walk. The generators share a few rules that keep
//! the data well conditioned near the hanging pose, where azimuth becomes
//! unobservable:
//!
//! * every visit to elevation 0 is a pass-through, never a dwell: excursions
//!   use quarter-sine ramps whose velocity peaks at the bottom and vanishes at
//!   the apex, where a dwell fraction holds instead;
//! * each excursion owns an integer number of frames and is sampled mid-frame
//!   (u = (i + 0.5)/n), so the turnaround knots land exactly between samples;
//! * the random walk keeps its waypoints away from the pole.
//!
//! All timing comes from the frame counter; `time_s = frame / frame_rate_hz`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::JointPose;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Fraction of a dwell excursion spent holding at the apex.
const APEX_DWELL: f64 = 0.35;
/// Velocity-blend fraction at each end of an azimuth trapezoid sweep.
const AZIMUTH_BLEND: f64 = 0.15;
/// Number of waypoints in one random-walk row.
const RANDOM_WAYPOINTS: usize = 48;
/// The random walk keeps elevations at least this far from the pole.
const POLE_MARGIN_DEG: f64 = 4.0;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("reps must be at least 1")]
    BadReps,
    #[error("frame_rate_hz must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("duration_s must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("workspace bounds invalid: azimuth [{theta_min_deg}, {theta_max_deg}], elevation [{phi_min_deg}, {phi_max_deg}]")]
    BadWorkspace {
        theta_min_deg: f64,
        theta_max_deg: f64,
        phi_min_deg: f64,
        phi_max_deg: f64,
    },
    #[error("{frames} frames is too few for {parts} movement phases")]
    TooFewFrames { frames: u64, parts: usize },
}

/// The five calibration movements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    FlexExt,
    AbAd,
    AzimuthFixed,
    ElevationFixed,
    Random,
}

impl MotionKind {
    /// File-friendly row name.
    pub fn slug(&self) -> &'static str {
        match self {
            MotionKind::FlexExt => "flex_ext",
            MotionKind::AbAd => "ab_ad",
            MotionKind::AzimuthFixed => "azimuth_fixed",
            MotionKind::ElevationFixed => "elevation_fixed",
            MotionKind::Random => "random",
        }
    }

    fn default_reps(&self) -> u32 {
        match self {
            MotionKind::FlexExt | MotionKind::AbAd => 4,
            MotionKind::AzimuthFixed | MotionKind::ElevationFixed => 2,
            MotionKind::Random => 1,
        }
    }

    fn default_frames(&self) -> u64 {
        match self {
            MotionKind::FlexExt => 3037,
            MotionKind::AbAd => 3630,
            MotionKind::AzimuthFixed => 5814,
            MotionKind::ElevationFixed => 6757,
            MotionKind::Random => 10313,
        }
    }
}

/// Parameters of one protocol row. `duration_s` scales the frame count
/// (`round(duration * rate)`); when unset the row uses its calibrated default
/// length. `reps` divides the row into that many repetitions of its movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub kind: MotionKind,
    pub reps: u32,
    pub frame_rate_hz: f64,
    pub seed: u64,
    pub duration_s: Option<f64>,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub phi_min_deg: f64,
    pub phi_max_deg: f64,
}

impl MotionConfig {
    pub fn for_kind(kind: MotionKind) -> Self {
        Self {
            kind,
            reps: kind.default_reps(),
            frame_rate_hz: 120.0,
            seed: 42,
            duration_s: None,
            theta_min_deg: -40.0,
            theta_max_deg: 90.0,
            phi_min_deg: 0.0,
            phi_max_deg: 90.0,
        }
    }

    /// Number of frames this row will produce.
    pub fn frames(&self) -> u64 {
        match self.duration_s {
            Some(d) => (d * self.frame_rate_hz).round() as u64,
            None => self.kind.default_frames(),
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.reps == 0 {
            return Err(MotionError::BadReps);
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return Err(MotionError::BadRate(self.frame_rate_hz));
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(MotionError::BadDuration(d));
            }
        }
        let ws_ok = self.theta_min_deg < self.theta_max_deg
            && self.phi_min_deg < self.phi_max_deg
            && self.phi_min_deg >= 0.0
            && self.phi_max_deg <= 180.0
            && [
                self.theta_min_deg,
                self.theta_max_deg,
                self.phi_min_deg,
                self.phi_max_deg,
            ]
            .iter()
            .all(|v| v.is_finite());
        if !ws_ok {
            return Err(MotionError::BadWorkspace {
                theta_min_deg: self.theta_min_deg,
                theta_max_deg: self.theta_max_deg,
                phi_min_deg: self.phi_min_deg,
                phi_max_deg: self.phi_max_deg,
            });
        }
        Ok(())
    }
}

/// One timestamped pose of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub frame: u64,
    pub time_s: f64,
    pub pose: JointPose,
}

/// Per-row overrides for the default protocol suite; unset fields keep the
/// row's calibrated defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionOverride {
    pub reps: Option<u32>,
    pub frame_rate_hz: Option<f64>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub theta_min_deg: Option<f64>,
    pub theta_max_deg: Option<f64>,
    pub phi_min_deg: Option<f64>,
    pub phi_max_deg: Option<f64>,
}

impl MotionOverride {
    fn apply(&self, mut base: MotionConfig) -> MotionConfig {
        if let Some(v) = self.reps {
            base.reps = v;
        }
        if let Some(v) = self.frame_rate_hz {
            base.frame_rate_hz = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.duration_s {
            base.duration_s = Some(v);
        }
        if let Some(v) = self.theta_min_deg {
            base.theta_min_deg = v;
        }
        if let Some(v) = self.theta_max_deg {
            base.theta_max_deg = v;
        }
        if let Some(v) = self.phi_min_deg {
            base.phi_min_deg = v;
        }
        if let Some(v) = self.phi_max_deg {
            base.phi_max_deg = v;
        }
        base
    }
}

/// The full five-row calibration suite, with optional per-row overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSpec {
    pub flex_ext: MotionOverride,
    pub ab_ad: MotionOverride,
    pub azimuth_fixed: MotionOverride,
    pub elevation_fixed: MotionOverride,
    pub random: MotionOverride,
}

impl ProtocolSpec {
    pub fn configs(&self) -> [MotionConfig; 5] {
        [
            self.flex_ext
                .apply(MotionConfig::for_kind(MotionKind::FlexExt)),
            self.ab_ad.apply(MotionConfig::for_kind(MotionKind::AbAd)),
            self.azimuth_fixed
                .apply(MotionConfig::for_kind(MotionKind::AzimuthFixed)),
            self.elevation_fixed
                .apply(MotionConfig::for_kind(MotionKind::ElevationFixed)),
            self.random
                .apply(MotionConfig::for_kind(MotionKind::Random)),
        ]
    }
}

/// A generated protocol row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRow {
    pub name: &'static str,
    pub config: MotionConfig,
    pub samples: Vec<TrajectorySample>,
}

/// Generates the whole suite in calibration order.
pub fn protocol_suite(spec: &ProtocolSpec) -> Result<Vec<ProtocolRow>, MotionError> {
    spec.configs()
        .iter()
        .map(|cfg| {
            Ok(ProtocolRow {
                name: cfg.kind.slug(),
                config: *cfg,
                samples: trajectory(cfg)?,
            })
        })
        .collect()
}

/// Generates one row's trajectory.
pub fn trajectory(cfg: &MotionConfig) -> Result<Vec<TrajectorySample>, MotionError> {
    cfg.validate()?;
    let n = cfg.frames();
    let (theta, phi) = match cfg.kind {
        MotionKind::FlexExt => flex_ext(cfg, n)?,
        MotionKind::AbAd => ab_ad(cfg, n)?,
        MotionKind::AzimuthFixed => azimuth_fixed(cfg, n)?,
        MotionKind::ElevationFixed => elevation_fixed(cfg, n)?,
        MotionKind::Random => random_walk(cfg, n)?,
    };
    Ok(theta
        .into_iter()
        .zip(phi)
        .enumerate()
        .map(|(i, (th, ph))| TrajectorySample {
            frame: i as u64,
            time_s: i as f64 / cfg.frame_rate_hz,
            pose: JointPose::new(th, ph),
        })
        .collect())
}

/// Splits `total` frames into `parts` integer chunks, earlier chunks take the
/// remainder.
fn split_counts(total: u64, parts: usize) -> Result<Vec<u64>, MotionError> {
    let base = total / parts as u64;
    if base == 0 {
        return Err(MotionError::TooFewFrames {
            frames: total,
            parts,
        });
    }
    let mut counts = vec![base; parts];
    for c in counts
        .iter_mut()
        .take((total - base * parts as u64) as usize)
    {
        *c += 1;
    }
    Ok(counts)
}

/// lo -> hi -> lo over `n` mid-frame samples: quarter-sine ramps on both sides
/// of an apex hold. Velocity is maximal at the lo ends (pass-through) and zero
/// across the held apex.
fn dwell_excursion(n: u64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let r = (1.0 - APEX_DWELL) / 2.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let s = if u < r {
            (0.5 * PI * u / r).sin()
        } else if u <= 1.0 - r {
            1.0
        } else {
            (0.5 * PI * (1.0 - u) / r).sin()
        };
        out.push(lo + (hi - lo) * s);
    }
}

/// Position along a 0 -> 1 move with raised-cosine velocity blends covering
/// fractions `b0` and `b1` of the move at its start and end.
fn blend_pos(x: f64, b0: f64, b1: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let b0 = b0.max(1e-12);
    let b1 = b1.max(1e-12);
    let norm = 1.0 - 0.5 * b0 - 0.5 * b1;
    let raw = if x < b0 {
        0.5 * x - (b0 / (2.0 * PI)) * (PI * x / b0).sin()
    } else if x <= 1.0 - b1 {
        0.5 * b0 + (x - b0)
    } else {
        let y = 1.0 - x;
        norm - (0.5 * y - (b1 / (2.0 * PI)) * (PI * y / b1).sin())
    };
    raw / norm
}

/// lo -> hi -> lo trapezoid over `n` mid-frame samples with raised-cosine
/// blends at both ends of each half.
fn trapezoid_excursion(n: u64, lo: f64, hi: f64, b_lo: f64, b_hi: f64, out: &mut Vec<f64>) {
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let v = if u < 0.5 {
            blend_pos(2.0 * u, b_lo, b_hi)
        } else {
            blend_pos(2.0 * (1.0 - u), b_lo, b_hi)
        };
        out.push(lo + (hi - lo) * v);
    }
}

fn flex_ext(cfg: &MotionConfig, n: u64) -> Result<(Vec<f64>, Vec<f64>), MotionError> {
    // One rep = a flexion excursion in the theta=+90 plane followed by an
    // extension excursion in the theta=-90 plane.
    let parts = 2 * cfg.reps as usize;
    let counts = split_counts(n, parts)?;
    let mut theta = Vec::with_capacity(n as usize);
    let mut phi = Vec::with_capacity(n as usize);
    for (k, cnt) in counts.into_iter().enumerate() {
        let plane = if k % 2 == 0 { 90.0 } else { -90.0 };
        theta.extend(std::iter::repeat(plane).take(cnt as usize));
        dwell_excursion(cnt, cfg.phi_min_deg, cfg.phi_max_deg, &mut phi);
    }
    Ok((theta, phi))
}

fn ab_ad(cfg: &MotionConfig, n: u64) -> Result<(Vec<f64>, Vec<f64>), MotionError> {
    // Lateral raises in the theta=0 plane, one excursion per rep.
    let counts = split_counts(n, cfg.reps as usize)?;
    let mut theta = Vec::with_capacity(n as usize);
    let mut phi = Vec::with_capacity(n as usize);
    for cnt in counts {
        theta.extend(std::iter::repeat(0.0).take(cnt as usize));
        dwell_excursion(cnt, cfg.phi_min_deg, cfg.phi_max_deg, &mut phi);
    }
    Ok((theta, phi))
}

fn azimuth_fixed(cfg: &MotionConfig, n: u64) -> Result<(Vec<f64>, Vec<f64>), MotionError> {
    // Five evenly spaced constant azimuths, visited boustrophedon so adjacent
    // excursions share their azimuth at the rep boundary.
    let values: Vec<f64> = (0..5)
        .map(|k| cfg.theta_min_deg + (cfg.theta_max_deg - cfg.theta_min_deg) * k as f64 / 4.0)
        .collect();
    let parts = 5 * cfg.reps as usize;
    let counts = split_counts(n, parts)?;
    let mut theta = Vec::with_capacity(n as usize);
    let mut phi = Vec::with_capacity(n as usize);
    for (k, cnt) in counts.into_iter().enumerate() {
        let rep = k / 5;
        let pos = k % 5;
        let value = if rep % 2 == 0 {
            values[pos]
        } else {
            values[4 - pos]
        };
        theta.extend(std::iter::repeat(value).take(cnt as usize));
        dwell_excursion(cnt, cfg.phi_min_deg, cfg.phi_max_deg, &mut phi);
    }
    Ok((theta, phi))
}

fn elevation_fixed(cfg: &MotionConfig, n: u64) -> Result<(Vec<f64>, Vec<f64>), MotionError> {
    // Five constant elevations strictly above the pole, each holding an
    // azimuth sweep min -> max -> min; boustrophedon across reps.
    let span = cfg.phi_max_deg - cfg.phi_min_deg;
    let values: Vec<f64> = (0..5)
        .map(|k| cfg.phi_max_deg - span * k as f64 / 5.0)
        .collect();
    let parts = 5 * cfg.reps as usize;
    let counts = split_counts(n, parts)?;
    let mut theta = Vec::with_capacity(n as usize);
    let mut phi = Vec::with_capacity(n as usize);
    for (k, cnt) in counts.into_iter().enumerate() {
        let rep = k / 5;
        let pos = k % 5;
        let value = if rep % 2 == 0 {
            values[pos]
        } else {
            values[4 - pos]
        };
        phi.extend(std::iter::repeat(value).take(cnt as usize));
        trapezoid_excursion(
            cnt,
            cfg.theta_min_deg,
            cfg.theta_max_deg,
            AZIMUTH_BLEND,
            AZIMUTH_BLEND,
            &mut theta,
        );
    }
    Ok((theta, phi))
}

fn random_walk(cfg: &MotionConfig, n: u64) -> Result<(Vec<f64>, Vec<f64>), MotionError> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let phi_floor = cfg
        .phi_min_deg
        .max(POLE_MARGIN_DEG.min(cfg.phi_max_deg * 0.5));
    let mut way_theta: Vec<f64> = (0..RANDOM_WAYPOINTS)
        .map(|_| rng.random_range(cfg.theta_min_deg..cfg.theta_max_deg))
        .collect();
    let mut way_phi: Vec<f64> = (0..RANDOM_WAYPOINTS)
        .map(|_| rng.random_range(phi_floor..cfg.phi_max_deg))
        .collect();
    // Start at the workspace center so every run leaves from a known pose.
    way_theta[0] = 0.5 * (cfg.theta_min_deg + cfg.theta_max_deg);
    way_phi[0] = 0.5 * (cfg.phi_min_deg + cfg.phi_max_deg);
    let counts = split_counts(n, RANDOM_WAYPOINTS - 1)?;
    let mut theta = Vec::with_capacity(n as usize);
    let mut phi = Vec::with_capacity(n as usize);
    for (seg, cnt) in counts.into_iter().enumerate() {
        for i in 0..cnt {
            // Cosine easing between waypoints keeps velocities continuous.
            let s = 0.5 * (1.0 - (PI * (i as f64 + 0.5) / cnt as f64).cos());
            theta.push(way_theta[seg] + (way_theta[seg + 1] - way_theta[seg]) * s);
            phi.push(way_phi[seg] + (way_phi[seg + 1] - way_phi[seg]) * s);
        }
    }
    Ok((theta, phi))
}
