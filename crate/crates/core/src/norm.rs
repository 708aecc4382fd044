use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Norm index `p` of an `L_p` norm, `1 <= p <= inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Norm(f64);

impl Norm {
    pub const INF: Norm = Norm(f64::INFINITY);
    pub const L1: Norm = Norm(1.0);
    pub const L2: Norm = Norm(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::invalid(format!("norm index must satisfy p >= 1, got {p}")));
        }
        Ok(Norm(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn recip(self) -> f64 {
        if self.is_inf() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "max" => Ok(Norm::INF),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid(format!("cannot parse norm index {s:?}")))?;
                Norm::new(p)
            }
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => Norm::new(p),
            Raw::Text(t) => t.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inf_and_numbers() {
        assert!("inf".parse::<Norm>().unwrap().is_inf());
        assert_eq!("2".parse::<Norm>().unwrap(), Norm::L2);
        assert_eq!(Norm::INF.recip(), 0.0);
        assert_eq!(Norm::new(4.0).unwrap().recip(), 0.25);
    }

    #[test]
    fn rejects_p_below_one() {
        let err = Norm::new(0.0).unwrap_err().to_string();
        assert!(err.contains("p >= 1"), "{err}");
        assert!("0.5".parse::<Norm>().is_err());
        assert!(Norm::new(f64::NAN).is_err());
    }
}
