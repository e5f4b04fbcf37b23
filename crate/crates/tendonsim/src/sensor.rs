//! Delta-length sensing and draw-wire sensor emulation.
//!
//! The physical rig measures how much cable each draw-wire sensor pays out
//! relative to the neutral pose, so the signal of interest per tendon is
//! delta-length = length(pose) - length(neutral). Shortening reads negative.
//!
//! [`emulate`] layers the sensor chain on top of the ideal signal, in order:
//! Gaussian noise, backlash play, travel limits, ADC quantization (a trailing
//! clamp keeps rounding from stepping past the limits). All randomness comes
//! from the seed carried in [`SensorEmulation`], drawn per frame in tendon
//! order F, SF, SR, R, so streams are reproducible byte for byte.
//!
//! Concurrency: an [`EmulationState`] is a single sensor stream and must stay
//! confined to it; run one state per dataset row sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::JointPose;
use crate::tendon::{tendon_length, TendonError, TendonLayout, TENDON_NAMES};

#[derive(Debug, Error)]
pub enum SensorError {
    #[error(transparent)]
    Tendon(#[from] TendonError),
    #[error("neutral reference was built for a different layout")]
    NeutralMismatch,
    #[error("adc_bits must be in 1..=32, got {0}")]
    BadAdcBits(u32),
    #[error("travel_mm must be positive, got {0}")]
    BadTravel(f64),
    #[error("noise_std_mm must be non-negative, got {0}")]
    BadNoise(f64),
    #[error("hysteresis_backlash_mm must be non-negative, got {0}")]
    BadBacklash(f64),
    #[error("limit_min_mm {0} must be below limit_max_mm {1}")]
    BadLimits(f64, f64),
    #[error("supply_voltage_V must be positive, got {0}")]
    BadSupply(f64),
}

/// One sample of the four delta-length channels, in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub dl_f_mm: f64,
    pub dl_sf_mm: f64,
    pub dl_sr_mm: f64,
    pub dl_r_mm: f64,
}

impl SensorFrame {
    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            dl_f_mm: v[0],
            dl_sf_mm: v[1],
            dl_sr_mm: v[2],
            dl_r_mm: v[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dl_f_mm, self.dl_sf_mm, self.dl_sr_mm, self.dl_r_mm]
    }

    /// Value by tendon name, following [`TENDON_NAMES`].
    pub fn get(&self, name: &str) -> Option<f64> {
        tendon_index(name).map(|i| self.as_array()[i])
    }
}

/// Index of a tendon name in the canonical order.
pub fn tendon_index(name: &str) -> Option<usize> {
    TENDON_NAMES.iter().position(|n| *n == name)
}

/// Draw-wire sensor chain parameters. Defaults model a 3.3 V, 12-bit sensor
/// with 304.8 mm of travel, centered limits and no noise or backlash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorEmulation {
    #[serde(rename = "supply_voltage_V")]
    pub supply_voltage_v: f64,
    pub adc_bits: u32,
    pub travel_mm: f64,
    pub noise_std_mm: f64,
    pub limit_min_mm: f64,
    pub limit_max_mm: f64,
    pub hysteresis_backlash_mm: f64,
    pub seed: u64,
}

impl Default for SensorEmulation {
    fn default() -> Self {
        Self {
            supply_voltage_v: 3.3,
            adc_bits: 12,
            travel_mm: 304.8,
            noise_std_mm: 0.0,
            limit_min_mm: -152.4,
            limit_max_mm: 152.4,
            hysteresis_backlash_mm: 0.0,
            seed: 0,
        }
    }
}

impl SensorEmulation {
    /// Millimeters per ADC count: travel / 2^bits.
    pub fn quantization_step_mm(&self) -> f64 {
        self.travel_mm / (1u64 << self.adc_bits) as f64
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if self.adc_bits == 0 || self.adc_bits > 32 {
            return Err(SensorError::BadAdcBits(self.adc_bits));
        }
        if !(self.travel_mm > 0.0) {
            return Err(SensorError::BadTravel(self.travel_mm));
        }
        if !(self.noise_std_mm >= 0.0) {
            return Err(SensorError::BadNoise(self.noise_std_mm));
        }
        if !(self.hysteresis_backlash_mm >= 0.0) {
            return Err(SensorError::BadBacklash(self.hysteresis_backlash_mm));
        }
        if !(self.limit_min_mm < self.limit_max_mm) {
            return Err(SensorError::BadLimits(self.limit_min_mm, self.limit_max_mm));
        }
        if !(self.supply_voltage_v > 0.0) {
            return Err(SensorError::BadSupply(self.supply_voltage_v));
        }
        Ok(())
    }
}

/// Frozen tendon lengths at the pose the rig was zeroed in. Tied to the layout
/// it was computed from; [`delta_length`] rejects a reference built elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralReference {
    pub pose: JointPose,
    pub lengths_mm: [f64; 4],
    layout_digest: u64,
}

/// Computes the reference lengths at `pose` for `layout`.
pub fn neutral_reference(
    layout: &TendonLayout,
    pose: &JointPose,
) -> Result<NeutralReference, SensorError> {
    let mut lengths = [0.0; 4];
    for (i, name) in TENDON_NAMES.iter().enumerate() {
        lengths[i] = tendon_length(layout, name, pose)?;
    }
    Ok(NeutralReference {
        pose: *pose,
        lengths_mm: lengths,
        layout_digest: layout_digest(layout),
    })
}

/// Ideal delta-length signal at `pose`: length(pose) - length(neutral) per
/// tendon. At the neutral pose this is exactly zero, the same computation
/// subtracted from itself.
pub fn delta_length(
    layout: &TendonLayout,
    neutral: &NeutralReference,
    pose: &JointPose,
) -> Result<SensorFrame, SensorError> {
    if neutral.layout_digest != layout_digest(layout) {
        return Err(SensorError::NeutralMismatch);
    }
    let mut dl = [0.0; 4];
    for (i, name) in TENDON_NAMES.iter().enumerate() {
        dl[i] = tendon_length(layout, name, pose)? - neutral.lengths_mm[i];
    }
    Ok(SensorFrame::from_array(dl))
}

fn layout_digest(layout: &TendonLayout) -> u64 {
    // FNV-1a over the layout's defining bytes; enough to catch a reference
    // carried across layouts by mistake.
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            hash ^= u64::from(*b);
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    for v in layout
        .model
        .center_mm
        .iter()
        .chain([layout.model.sphere_radius_mm, layout.model.arm_length_mm].iter())
        .chain(layout.model.neutral_axis.iter())
    {
        eat(&v.to_bits().to_le_bytes());
    }
    for tendon in &layout.tendons {
        eat(tendon.name.as_bytes());
        eat(&[match tendon.path_policy {
            crate::tendon::PathPolicy::Polyline => 0,
            crate::tendon::PathPolicy::Spline => 1,
            crate::tendon::PathPolicy::SphereWrap => 2,
        }]);
        for el in &tendon.elements {
            eat(el.id.as_bytes());
            eat(&[match el.frame {
                crate::geometry::Frame::Torso => 0,
                crate::geometry::Frame::Humerus => 1,
            }]);
            for v in el.local_position_mm {
                eat(&v.to_bits().to_le_bytes());
            }
        }
    }
    hash
}

/// Per-stream emulation state: the seeded noise generator plus each channel's
/// backlash play center. The play center starts at the first processed input,
/// so a stream that starts at rest reads its first value unchanged.
#[derive(Debug, Clone)]
pub struct EmulationState {
    rng: ChaCha20Rng,
    play_mm: [Option<f64>; 4],
}

impl EmulationState {
    pub fn new(emu: &SensorEmulation) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(emu.seed),
            play_mm: [None; 4],
        }
    }
}

/// Applies the sensor chain to one ideal frame, advancing `state`.
pub fn emulate(
    emu: &SensorEmulation,
    ideal: &SensorFrame,
    state: &mut EmulationState,
) -> SensorFrame {
    let step = emu.quantization_step_mm();
    let half_play = 0.5 * emu.hysteresis_backlash_mm;
    let mut out = [0.0; 4];
    for (i, &value) in ideal.as_array().iter().enumerate() {
        let mut x = value;
        if emu.noise_std_mm > 0.0 {
            let z: f64 = StandardNormal.sample(&mut state.rng);
            x += emu.noise_std_mm * z;
        }
        if emu.hysteresis_backlash_mm > 0.0 {
            let center = match state.play_mm[i] {
                None => x,
                Some(prev) => {
                    let offset = x - prev;
                    if offset > half_play {
                        x - half_play
                    } else if offset < -half_play {
                        x + half_play
                    } else {
                        prev
                    }
                }
            };
            state.play_mm[i] = Some(center);
            x = center;
        }
        x = x.clamp(emu.limit_min_mm, emu.limit_max_mm);
        x = (x / step).round() * step;
        out[i] = x.clamp(emu.limit_min_mm, emu.limit_max_mm);
    }
    SensorFrame::from_array(out)
}

/// Runs a whole stream through a fresh state.
pub fn emulate_sequence(emu: &SensorEmulation, ideal: &[SensorFrame]) -> Vec<SensorFrame> {
    let mut state = EmulationState::new(emu);
    ideal.iter().map(|f| emulate(emu, f, &mut state)).collect()
}
