use std::fmt;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Lin,
    Log,
}

/// `start:stop:count:lin|log`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i == self.count - 1 {
                    return self.stop;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Lin => self.start + t * (self.stop - self.start),
                    Spacing::Log => {
                        (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                    }
                }
            })
            .collect()
    }

    /// Grid points rounded to photon numbers, duplicates dropped.
    pub fn integer_points(&self) -> Result<Vec<u64>, CliError> {
        if self.start < 1.0 {
            return Err(CliError::Usage(format!(
                "photon-number grid must start at 1 or above, got {}",
                self.start
            )));
        }
        let mut out: Vec<u64> = self
            .points()
            .into_iter()
            .map(|v| v.round() as u64)
            .collect();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = |why: &str| {
            CliError::Usage(format!(
                "grid '{s}': {why} (expected start:stop:count:lin|log)"
            ))
        };
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [start, stop, count, spacing] = parts[..] else {
            return Err(bad("need four fields"));
        };
        let start: f64 = start.parse().map_err(|_| bad("start is not a number"))?;
        let stop: f64 = stop.parse().map_err(|_| bad("stop is not a number"))?;
        let count: usize = count
            .parse()
            .map_err(|_| bad("count is not a whole number"))?;
        let spacing = match spacing {
            "lin" => Spacing::Lin,
            "log" => Spacing::Log,
            _ => return Err(bad("spacing must be lin or log")),
        };
        if !(start.is_finite() && stop.is_finite()) {
            return Err(bad("endpoints must be finite"));
        }
        if count < 2 {
            return Err(bad("count must be at least 2"));
        }
        if start >= stop {
            return Err(bad("start must be below stop"));
        }
        if spacing == Spacing::Log && start <= 0.0 {
            return Err(bad("log spacing needs a positive start"));
        }
        Ok(Grid {
            start,
            stop,
            count,
            spacing,
        })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spacing = match self.spacing {
            Spacing::Lin => "lin",
            Spacing::Log => "log",
        };
        write!(f, "{}:{}:{}:{}", self.start, self.stop, self.count, spacing)
    }
}
