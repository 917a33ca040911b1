//! Piecewise-linear exploration schedule.

use std::fmt;
use std::str::FromStr;

use super::QError;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    breakpoints: Vec<(usize, f64)>,
}

impl EpsilonSchedule {
    /// Breakpoints must start at episode 0, have strictly increasing
    /// episodes, and non-increasing values in `[0, 1]`. The last value holds
    /// forever.
    pub fn new(breakpoints: Vec<(usize, f64)>) -> Result<Self, QError> {
        let bad = |m: &str| Err(QError::InvalidConfig(format!("epsilon schedule: {m}")));
        if breakpoints.first().map(|b| b.0) != Some(0) {
            return bad("first breakpoint must be at episode 0");
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad("episodes must strictly increase");
            }
            if w[1].1 > w[0].1 {
                return bad("values must not increase");
            }
        }
        if breakpoints.iter().any(|b| !(0.0..=1.0).contains(&b.1)) {
            return bad("values must lie in [0, 1]");
        }
        Ok(EpsilonSchedule { breakpoints })
    }

    /// 1.0 at episode 0 falling linearly to 0.01 at `anneal_episodes`.
    pub fn linear(anneal_episodes: usize) -> Self {
        EpsilonSchedule::new(vec![(0, 1.0), (anneal_episodes.max(1), 0.01)]).expect("valid")
    }

    pub fn constant(epsilon: f64) -> Result<Self, QError> {
        EpsilonSchedule::new(vec![(0, epsilon)])
    }

    pub fn breakpoints(&self) -> &[(usize, f64)] {
        &self.breakpoints
    }

    pub fn value(&self, episode: usize) -> f64 {
        let i = self.breakpoints.partition_point(|b| b.0 <= episode);
        let (e0, v0) = self.breakpoints[i - 1];
        match self.breakpoints.get(i) {
            None => v0,
            Some(&(e1, v1)) => v0 + (v1 - v0) * (episode - e0) as f64 / (e1 - e0) as f64,
        }
    }
}

impl fmt::Display for EpsilonSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.breakpoints.iter().map(|(e, v)| format!("{e}:{v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `episode:value` pairs separated by commas, e.g. `0:1.0,1000:0.01`.
impl FromStr for EpsilonSchedule {
    type Err = QError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut points = Vec::new();
        for part in s.split(',') {
            let (e, v) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| QError::InvalidConfig(format!("epsilon breakpoint {part:?} is not episode:value")))?;
            let e = e
                .trim()
                .parse()
                .map_err(|_| QError::InvalidConfig(format!("bad episode in {part:?}")))?;
            let v = v
                .trim()
                .parse()
                .map_err(|_| QError::InvalidConfig(format!("bad epsilon in {part:?}")))?;
            points.push((e, v));
        }
        EpsilonSchedule::new(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoints() {
        let s = EpsilonSchedule::linear(1000);
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(1000), 0.01);
        assert_eq!(s.value(5000), 0.01);
        assert!((s.value(500) - 0.505).abs() < 1e-12);
    }

    #[test]
    fn multi_segment() {
        let s: EpsilonSchedule = "0:1.0,100:0.5,300:0.1".parse().unwrap();
        assert_eq!(s.value(50), 0.75);
        assert!((s.value(200) - 0.3).abs() < 1e-12);
        assert_eq!(s.value(300), 0.1);
        assert_eq!(s.to_string(), "0:1,100:0.5,300:0.1");
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!("5:1.0".parse::<EpsilonSchedule>().is_err());
        assert!("0:0.5,10:0.9".parse::<EpsilonSchedule>().is_err());
        assert!("0:1.5".parse::<EpsilonSchedule>().is_err());
        assert!("0:1.0,0:0.5".parse::<EpsilonSchedule>().is_err());
        assert!("0-1".parse::<EpsilonSchedule>().is_err());
    }
}
