use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::streams::{DisengagementEvent, Initiator, SteeringSample, SteeringTrace};

fn default_base_amplitude() -> f64 {
    3.0
}

/// A steering scenario. Outside ramps the secondary angle is the primary
/// angle plus zero-mean Gaussian noise with standard deviation
/// `baseline_noise_deg`. During the `ramp_len_frames` frames before each
/// event the primary is offset by `+divergence_deg` and the secondary by
/// `-divergence_deg` (sign chosen per event), so the streams sit
/// `2 * divergence_deg` apart plus noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringScenarioSpec {
    pub duration_frames: u64,
    pub fps: u32,
    pub event_frames: Vec<u64>,
    pub baseline_noise_deg: f64,
    pub divergence_deg: f64,
    pub ramp_len_frames: u64,
    pub seed: u64,
    /// AR(1) coefficient of the noise, in `[0, 1)`; 0 means independent.
    #[serde(default)]
    pub smoothing: f64,
    /// Peak of the shared road-curvature signal both systems follow.
    #[serde(default = "default_base_amplitude")]
    pub base_amplitude_deg: f64,
}

impl SteeringScenarioSpec {
    /// 20 evenly spaced events over 100000 frames, σ = 0.5°, divergence 4°,
    /// 150-frame ramps.
    pub fn acceptance(seed: u64) -> Self {
        SteeringScenarioSpec {
            duration_frames: 100_000,
            fps: 30,
            event_frames: evenly_spaced_events(100_000, 20),
            baseline_noise_deg: 0.5,
            divergence_deg: 4.0,
            ramp_len_frames: 150,
            seed,
            smoothing: 0.0,
            base_amplitude_deg: default_base_amplitude(),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Infeasible(m));
        if self.duration_frames == 0 || self.fps == 0 {
            return bad("duration and fps must be positive".into());
        }
        for (name, v) in [
            ("baseline_noise_deg", self.baseline_noise_deg),
            ("divergence_deg", self.divergence_deg),
            ("base_amplitude_deg", self.base_amplitude_deg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return bad(format!("smoothing must be in [0, 1), got {}", self.smoothing));
        }
        let mut sorted = self.event_frames.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate event frame {}", w[0]));
        }
        if let Some(&e) = sorted.last() {
            if e >= self.duration_frames {
                return bad(format!(
                    "event {e} outside duration {}",
                    self.duration_frames
                ));
            }
        }
        Ok(())
    }
}

/// `count` events at `(i + 1) * duration / (count + 1)`.
pub fn evenly_spaced_events(duration_frames: u64, count: u64) -> Vec<u64> {
    (1..=count)
        .map(|i| i * duration_frames / (count + 1))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringScenario {
    pub trace: SteeringTrace,
    pub events: Vec<DisengagementEvent>,
    /// Ramp intervals actually injected, `[start, end)`.
    pub ramps: Vec<(u64, u64)>,
    pub warnings: Vec<String>,
}

pub fn gen_steering_scenario(spec: &SteeringScenarioSpec) -> Result<SteeringScenario, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut events_sorted = spec.event_frames.clone();
    events_sorted.sort_unstable();

    let mut warnings = Vec::new();
    let mut ramps = Vec::with_capacity(events_sorted.len());
    let mut events = Vec::with_capacity(events_sorted.len());
    let mut signs = Vec::with_capacity(events_sorted.len());
    let mut floor = 0u64;
    for &e in &events_sorted {
        let wanted = e.saturating_sub(spec.ramp_len_frames);
        let start = wanted.max(floor);
        if start > wanted || e < spec.ramp_len_frames {
            warnings.push(format!(
                "ramp before event {e} truncated to {} frames",
                e - start
            ));
        }
        ramps.push((start, e));
        floor = e + 1;
        signs.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        events.push(DisengagementEvent {
            frame_index: e,
            initiator: if rng.random::<bool>() {
                Initiator::Human
            } else {
                Initiator::Machine
            },
        });
    }

    let fps = spec.fps as f64;
    let a = spec.base_amplitude_deg;
    let rho = spec.smoothing;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut noise = 0.0f64;
    let mut ramp_idx = 0usize;
    let samples = (0..spec.duration_frames)
        .map(|f| {
            let z: f64 = rng.sample(StandardNormal);
            noise = if f == 0 {
                spec.baseline_noise_deg * z
            } else {
                rho * noise + innovation * spec.baseline_noise_deg * z
            };
            while ramp_idx < ramps.len() && ramps[ramp_idx].1 <= f {
                ramp_idx += 1;
            }
            let offset = match ramps.get(ramp_idx) {
                Some(&(s, e)) if s <= f && f < e => signs[ramp_idx] * spec.divergence_deg,
                _ => 0.0,
            };
            let secs = f as f64 / fps;
            let base = a
                * (0.6 * (std::f64::consts::TAU * secs / 20.0).sin()
                    + 0.4 * (std::f64::consts::TAU * secs / 7.3).sin());
            SteeringSample {
                frame_index: f,
                primary_angle_deg: base + offset,
                secondary_angle_deg: base - offset + noise,
            }
        })
        .collect();

    let trace = SteeringTrace::new(samples, spec.fps).map_err(|e| SynthError::Internal(e.to_string()))?;
    Ok(SteeringScenario {
        trace,
        events,
        ramps,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SteeringScenarioSpec {
        SteeringScenarioSpec {
            duration_frames: 2000,
            fps: 30,
            event_frames: vec![500, 1500],
            baseline_noise_deg: 0.5,
            divergence_deg: 4.0,
            ramp_len_frames: 150,
            seed: 11,
            smoothing: 0.0,
            base_amplitude_deg: 3.0,
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = gen_steering_scenario(&spec()).unwrap();
        let b = gen_steering_scenario(&spec()).unwrap();
        assert_eq!(a, b);
        let c = gen_steering_scenario(&SteeringScenarioSpec { seed: 12, ..spec() }).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn overlapping_ramps_truncated_with_warning() {
        let s = SteeringScenarioSpec {
            event_frames: vec![100, 200, 1000],
            ..spec()
        };
        let out = gen_steering_scenario(&s).unwrap();
        assert_eq!(out.ramps, vec![(0, 100), (101, 200), (850, 1000)]);
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            SteeringScenarioSpec {
                event_frames: vec![2000],
                ..spec()
            },
            SteeringScenarioSpec {
                event_frames: vec![5, 5],
                ..spec()
            },
            SteeringScenarioSpec {
                baseline_noise_deg: -1.0,
                ..spec()
            },
            SteeringScenarioSpec {
                smoothing: 1.0,
                ..spec()
            },
        ] {
            assert!(matches!(gen_steering_scenario(&bad), Err(SynthError::Infeasible(_))));
        }
    }

    #[test]
    fn even_spacing() {
        assert_eq!(evenly_spaced_events(100, 3), vec![25, 50, 75]);
        assert_eq!(SteeringScenarioSpec::acceptance(0).event_frames.len(), 20);
    }
}
