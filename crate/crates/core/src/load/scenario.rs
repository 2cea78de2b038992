use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Linear,
    Random,
    Spike,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Linear, ScenarioKind::Random, ScenarioKind::Spike];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Linear => "linear",
            ScenarioKind::Random => "random",
            ScenarioKind::Spike => "spike",
        }
    }

    /// Control points as (minute, VUs).
    pub fn control_points(self) -> &'static [(u32, u32)] {
        match self {
            ScenarioKind::Linear => &[(0, 0), (30, 100)],
            ScenarioKind::Random => &[(0, 0), (7, 60), (14, 30), (21, 100), (28, 40), (30, 0)],
            ScenarioKind::Spike => &[(0, 0), (1, 10), (14, 10), (15, 100), (16, 10), (29, 10), (30, 0)],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario {s:?} (expected linear, random or spike)"))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("t = {t}s outside the scenario's 0..={duration}s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A piecewise-linear VU schedule. `stages` are (end time in seconds,
/// target VUs) before scaling; `time_scale` compresses time and
/// `vu_scale` shrinks the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub stages: Vec<(f64, u32)>,
    pub total_duration_s: f64,
    pub time_scale: f64,
    pub vu_scale: f64,
}

impl ScenarioSpec {
    pub fn canonical(kind: ScenarioKind) -> Self {
        let stages: Vec<(f64, u32)> =
            kind.control_points().iter().map(|&(m, v)| (m as f64 * 60.0, v)).collect();
        Self {
            name: kind.as_str().to_owned(),
            total_duration_s: stages.last().map_or(0.0, |s| s.0),
            stages,
            time_scale: 1.0,
            vu_scale: 1.0,
        }
    }

    /// Holds `vus` from t = 0 for `duration_s` (before scaling).
    pub fn constant(vus: u32, duration_s: f64) -> Self {
        Self {
            name: format!("constant-{vus}"),
            stages: vec![(0.0, vus), (duration_s, vus)],
            total_duration_s: duration_s,
            time_scale: 1.0,
            vu_scale: 1.0,
        }
    }

    pub fn scaled(mut self, time_scale: f64, vu_scale: f64) -> Self {
        self.time_scale = time_scale;
        self.vu_scale = vu_scale;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.stages.is_empty() {
            return Err(ScenarioError::Invalid("no stages".into()));
        }
        if self.stages[0].0 != 0.0 {
            return Err(ScenarioError::Invalid("first stage must start at t = 0".into()));
        }
        if self.stages.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ScenarioError::Invalid("stage times must be strictly increasing".into()));
        }
        let last = self.stages.last().unwrap().0;
        if (last - self.total_duration_s).abs() > 1e-9 {
            return Err(ScenarioError::Invalid("last stage must end at total_duration_s".into()));
        }
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.time_scale) || !ok(self.vu_scale) {
            return Err(ScenarioError::Invalid("scales must be positive".into()));
        }
        Ok(())
    }

    /// Length of the scaled run in seconds.
    pub fn duration_s(&self) -> f64 {
        self.total_duration_s * self.time_scale
    }

    /// Interpolated VUs at unscaled time `t`, rounded to the nearest integer.
    pub fn vu_at_unscaled(&self, t: f64) -> Result<u32, ScenarioError> {
        if !(0.0..=self.total_duration_s + 1e-9).contains(&t) {
            return Err(ScenarioError::OutOfRange { t, duration: self.total_duration_s });
        }
        let i = self.stages.partition_point(|s| s.0 <= t);
        let v = if i == 0 {
            self.stages[0].1 as f64
        } else if i == self.stages.len() {
            self.stages[i - 1].1 as f64
        } else {
            let (t0, v0) = self.stages[i - 1];
            let (t1, v1) = self.stages[i];
            v0 as f64 + (v1 as f64 - v0 as f64) * (t - t0) / (t1 - t0)
        };
        Ok(v.round() as u32)
    }

    /// VUs at scaled time `t` (seconds since the start of the scaled run).
    pub fn vu_at(&self, t: f64) -> Result<u32, ScenarioError> {
        let d = self.duration_s();
        if !(0.0..=d + 1e-9).contains(&t) {
            return Err(ScenarioError::OutOfRange { t, duration: d });
        }
        let base = self.vu_at_unscaled((t / self.time_scale).min(self.total_duration_s))?;
        Ok((self.vu_scale * base as f64).round() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_min(kind: ScenarioKind, m: f64) -> u32 {
        ScenarioSpec::canonical(kind).vu_at(m * 60.0).unwrap()
    }

    #[test]
    fn control_points_are_exact() {
        for kind in ScenarioKind::ALL {
            for &(m, v) in kind.control_points() {
                assert_eq!(at_min(kind, m as f64), v, "{kind} at {m} min");
            }
        }
    }

    #[test]
    fn linear_midpoint() {
        assert_eq!(at_min(ScenarioKind::Linear, 15.0), 50);
        assert_eq!(at_min(ScenarioKind::Linear, 3.0), 10);
    }

    #[test]
    fn spike_ramps() {
        assert_eq!(at_min(ScenarioKind::Spike, 14.5), 55);
        assert_eq!(at_min(ScenarioKind::Spike, 29.5), 5);
        assert_eq!(at_min(ScenarioKind::Spike, 7.0), 10);
    }

    #[test]
    fn out_of_range() {
        let s = ScenarioSpec::canonical(ScenarioKind::Linear);
        assert!(s.vu_at(-1.0).is_err());
        assert!(s.vu_at(1800.5).is_err());
        let scaled = s.scaled(0.1, 0.2);
        assert_eq!(scaled.duration_s(), 180.0);
        assert_eq!(scaled.vu_at(180.0).unwrap(), 20);
        assert!(scaled.vu_at(181.0).is_err());
    }

    #[test]
    fn canonical_specs_validate() {
        for kind in ScenarioKind::ALL {
            let s = ScenarioSpec::canonical(kind);
            s.validate().unwrap();
            assert_eq!(s.total_duration_s, 1800.0);
        }
        let mut bad = ScenarioSpec::canonical(ScenarioKind::Random);
        bad.stages.swap(1, 2);
        assert!(bad.validate().is_err());
    }
}
