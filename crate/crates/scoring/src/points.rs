use std::fmt;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact point value. Scores are only ever rounded for display.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Points(pub Ratio<i64>);

impl Points {
    pub const ZERO: Points = Points(Ratio::new_raw(0, 1));

    pub fn new(numer: i64, denom: i64) -> Points {
        Points(Ratio::new(numer, denom))
    }

    pub fn from_integer(n: i64) -> Points {
        Points(Ratio::from_integer(n))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Renders with two fraction digits, rounding half away from zero.
    pub fn render(&self) -> String {
        let scaled = self.0 * Ratio::from_integer(100);
        let cents = scaled.round().to_integer();
        let sign = if cents < 0 { "-" } else { "" };
        let abs = cents.unsigned_abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }

    /// Exact form: `"n"` for integers, `"n/d"` otherwise.
    pub fn exact(&self) -> String {
        if self.0.is_integer() {
            self.0.numer().to_string()
        } else {
            format!("{}/{}", self.0.numer(), self.0.denom())
        }
    }

    pub fn parse_exact(s: &str) -> Option<Points> {
        match s.split_once('/') {
            Some((n, d)) => {
                let n = n.trim().parse().ok()?;
                let d: i64 = d.trim().parse().ok()?;
                (d != 0).then(|| Points::new(n, d))
            }
            None => s.trim().parse().ok().map(Points::from_integer),
        }
    }
}

impl fmt::Debug for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Points({})", self.exact())
    }
}

impl fmt::Display for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::ops::Add for Points {
    type Output = Points;
    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Points {
    fn add_assign(&mut self, rhs: Points) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for Points {
    type Output = Points;
    fn sub(self, rhs: Points) -> Points {
        Points(self.0 - rhs.0)
    }
}

impl std::ops::Neg for Points {
    type Output = Points;
    fn neg(self) -> Points {
        Points(-self.0)
    }
}

impl std::ops::Div<i64> for Points {
    type Output = Points;
    fn div(self, rhs: i64) -> Points {
        Points(self.0 / rhs)
    }
}

impl std::ops::Mul<i64> for Points {
    type Output = Points;
    fn mul(self, rhs: i64) -> Points {
        Points(self.0 * rhs)
    }
}

impl std::iter::Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Points {
        iter.fold(Points::ZERO, |a, b| a + b)
    }
}

impl Serialize for Points {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.exact())
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Points::parse_exact(&s).ok_or_else(|| serde::de::Error::custom(format!("bad points value {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_rounds_half_up() {
        assert_eq!(Points::new(25, 2).render(), "12.50");
        assert_eq!(Points::new(100, 3).render(), "33.33");
        assert_eq!(Points::new(200, 3).render(), "66.67");
        assert_eq!(Points::new(1, 200).render(), "0.01");
        assert_eq!(Points::new(-75, 1).render(), "-75.00");
        assert_eq!(Points::new(-1, 200).render(), "-0.01");
    }

    #[test]
    fn exact_round_trips() {
        for p in [Points::new(50, 3), Points::from_integer(-100), Points::ZERO] {
            assert_eq!(Points::parse_exact(&p.exact()), Some(p));
        }
        assert_eq!(Points::parse_exact("1/0"), None);
    }
}
