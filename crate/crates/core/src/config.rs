//! Flat `key = value` run configuration.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::delayed_lqr::LqrWeights;
use crate::error::{invalid, Error, Result};
use crate::muscle_plant::{DiscretePlant, MuscleParams, OperatingPoint};
use crate::simulation::{pulse, Disturbance};
use crate::transfer_fn::DecompositionParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealizationChoice {
    Controllable,
    Observable,
    /// Random similarity transform of the controllable form, from `seed`.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerChoice {
    /// Plant driven by a rate pulse, no feedback.
    OpenLoop,
    /// The augmented-state gain law.
    Gains,
    /// Neural circuit of the decomposed pipeline.
    Circuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceChoice {
    None,
    Pulse,
}

macro_rules! keyword_enum {
    ($ty:ty, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!("expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(RealizationChoice,
    "controllable" => RealizationChoice::Controllable,
    "observable" => RealizationChoice::Observable,
    "general" => RealizationChoice::General,
);
keyword_enum!(ControllerChoice,
    "open_loop" => ControllerChoice::OpenLoop,
    "gains" => ControllerChoice::Gains,
    "circuit" => ControllerChoice::Circuit,
);
keyword_enum!(DisturbanceChoice,
    "none" => DisturbanceChoice::None,
    "pulse" => DisturbanceChoice::Pulse,
);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub f_max: f64,
    pub tau: f64,
    pub r_bar: f64,
    pub ts: f64,
    pub delay: usize,
    pub q: f64,
    pub r: f64,
    pub c1: f64,
    pub c3: f64,
    pub eps1: f64,
    pub eps3: f64,
    pub realization: RealizationChoice,
    pub seed: u64,
    pub controller: ControllerChoice,
    pub disturbance: DisturbanceChoice,
    pub pulse_amplitude: f64,
    pub pulse_start: usize,
    pub pulse_duration: usize,
    pub horizon: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            f_max: 60.0,
            tau: 0.02,
            r_bar: 1.0,
            ts: 0.01,
            delay: 2,
            q: 1.0,
            r: 0.01,
            c1: 1.0,
            c3: 1.0,
            eps1: 0.0,
            eps3: 0.0,
            realization: RealizationChoice::Controllable,
            seed: 0,
            controller: ControllerChoice::Circuit,
            disturbance: DisturbanceChoice::Pulse,
            pulse_amplitude: 1.0,
            pulse_start: 10,
            pulse_duration: 10,
            horizon: 100,
            out_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 20] = [
    "f_max",
    "tau",
    "r_bar",
    "ts",
    "delay",
    "q",
    "r",
    "c1",
    "c3",
    "eps1",
    "eps3",
    "realization",
    "seed",
    "controller",
    "disturbance",
    "pulse_amplitude",
    "pulse_start",
    "pulse_duration",
    "horizon",
    "out_dir",
];

/// Named starting points for `simulate`, one per plot.
pub const PRESETS: [&str; 5] = ["open-loop", "closed-loop", "controllable", "observable", "general"];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| Error::InvalidValue {
        key: key.to_string(),
        reason: format!("`{value}`: {e}"),
    })
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self::default();
        match name {
            "open-loop" => {
                c.controller = ControllerChoice::OpenLoop;
                c.pulse_duration = 30;
            }
            "closed-loop" => c.controller = ControllerChoice::Gains,
            "controllable" => c.realization = RealizationChoice::Controllable,
            "observable" => c.realization = RealizationChoice::Observable,
            "general" => c.realization = RealizationChoice::General,
            _ => return Err(invalid("preset", format!("unknown preset `{name}`; expected one of: {}", PRESETS.join(", ")))),
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "f_max" => self.f_max = parse_value(key, v)?,
            "tau" => self.tau = parse_value(key, v)?,
            "r_bar" => self.r_bar = parse_value(key, v)?,
            "ts" => self.ts = parse_value(key, v)?,
            "delay" => self.delay = parse_value(key, v)?,
            "q" => self.q = parse_value(key, v)?,
            "r" => self.r = parse_value(key, v)?,
            "c1" => self.c1 = parse_value(key, v)?,
            "c3" => self.c3 = parse_value(key, v)?,
            "eps1" => self.eps1 = parse_value(key, v)?,
            "eps3" => self.eps3 = parse_value(key, v)?,
            "realization" => self.realization = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "controller" => self.controller = parse_value(key, v)?,
            "disturbance" => self.disturbance = parse_value(key, v)?,
            "pulse_amplitude" => self.pulse_amplitude = parse_value(key, v)?,
            "pulse_start" => self.pulse_start = parse_value(key, v)?,
            "pulse_duration" => self.pulse_duration = parse_value(key, v)?,
            "horizon" => self.horizon = parse_value(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "f_max" => self.f_max.to_string(),
            "tau" => self.tau.to_string(),
            "r_bar" => self.r_bar.to_string(),
            "ts" => self.ts.to_string(),
            "delay" => self.delay.to_string(),
            "q" => self.q.to_string(),
            "r" => self.r.to_string(),
            "c1" => self.c1.to_string(),
            "c3" => self.c3.to_string(),
            "eps1" => self.eps1.to_string(),
            "eps3" => self.eps3.to_string(),
            "realization" => self.realization.to_string(),
            "seed" => self.seed.to_string(),
            "controller" => self.controller.to_string(),
            "disturbance" => self.disturbance.to_string(),
            "pulse_amplitude" => self.pulse_amplitude.to_string(),
            "pulse_start" => self.pulse_start.to_string(),
            "pulse_duration" => self.pulse_duration.to_string(),
            "horizon" => self.horizon.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => return None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            writeln!(s, "{key} = {}", self.get(key).expect("listed key")).unwrap();
        }
        s
    }

    pub fn muscle(&self) -> Result<MuscleParams> {
        MuscleParams::new(self.f_max, self.tau)
    }

    pub fn operating_point(&self) -> Result<OperatingPoint> {
        OperatingPoint::at_rate(&self.muscle()?, self.r_bar)
    }

    pub fn plant(&self) -> Result<DiscretePlant> {
        DiscretePlant::from_muscle(&self.muscle()?, self.r_bar, self.ts)
    }

    pub fn weights(&self) -> Result<LqrWeights> {
        LqrWeights::new(self.q, self.r)
    }

    pub fn decomposition(&self) -> Result<DecompositionParams> {
        DecompositionParams::new(self.c1, self.c3, self.eps1, self.eps3)
    }

    pub fn disturbance(&self) -> Result<Disturbance> {
        match self.disturbance {
            DisturbanceChoice::None => Ok(Disturbance::None),
            DisturbanceChoice::Pulse => pulse(self.pulse_amplitude, self.pulse_start, self.pulse_duration),
        }
    }

    /// Checks every derived parameter set.
    pub fn validate(&self) -> Result<()> {
        self.operating_point()?;
        self.plant()?;
        self.weights()?;
        self.decomposition()?;
        self.disturbance()?;
        if self.delay == 0 {
            return Err(Error::ZeroDelay);
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        Ok(())
    }
}
