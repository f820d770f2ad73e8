use std::fmt;
use std::ops::Add;
use std::str::FromStr;

/// A number of timesteps, or no path at all. Orders with every finite delay
/// below `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Delay {
    Finite(u32),
    Infinite,
}

impl Delay {
    pub const ZERO: Delay = Delay::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Delay::Finite(_))
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Delay::Finite(d) => Some(d),
            Delay::Infinite => None,
        }
    }
}

impl Add for Delay {
    type Output = Delay;

    fn add(self, rhs: Delay) -> Delay {
        match (self, rhs) {
            (Delay::Finite(a), Delay::Finite(b)) => a.checked_add(b).map_or(Delay::Infinite, Delay::Finite),
            _ => Delay::Infinite,
        }
    }
}

impl From<u32> for Delay {
    fn from(d: u32) -> Self {
        Delay::Finite(d)
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Finite(d) => write!(f, "{d}"),
            Delay::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Delay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "∞" | "infinity" => Ok(Delay::Infinite),
            _ => s
                .parse::<u32>()
                .map(Delay::Finite)
                .map_err(|_| format!("`{s}` is not a delay (non-negative integer or inf)")),
        }
    }
}
