use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Exact amount in cents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Amount(pub u64);

/// 4294967295.99
pub const MAX_AMOUNT: Amount = Amount(u32::MAX as u64 * 100 + 99);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BadAmount;

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn cents(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, other: Amount) -> Option<Amount> {
        self.0.checked_add(other.0).map(Amount)
    }

    pub fn checked_sub(self, other: Amount) -> Option<Amount> {
        self.0.checked_sub(other.0).map(Amount)
    }

    /// Receipt form: trailing fractional zeros trimmed (`1000`, `63.1`, `0.05`).
    pub fn render(self) -> String {
        let (whole, frac) = (self.0 / 100, self.0 % 100);
        match frac {
            0 => whole.to_string(),
            f if f % 10 == 0 => format!("{whole}.{}", f / 10),
            f => format!("{whole}.{f:02}"),
        }
    }

    /// Command-line form with both fraction digits.
    pub fn to_arg(self) -> String {
        format!("{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Amount {
    type Err = BadAmount;

    /// Accepts `digits[.d[d]]` without superfluous leading zeros, up to [`MAX_AMOUNT`].
    fn from_str(s: &str) -> Result<Self, BadAmount> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, Some(f)),
            None => (s, None),
        };
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || (whole.len() > 1 && whole.starts_with('0')) || whole.len() > 10 {
            return Err(BadAmount);
        }
        let cents = match frac {
            None => 0,
            Some(f) if digits(f) && f.len() <= 2 => {
                let v: u64 = f.parse().map_err(|_| BadAmount)?;
                if f.len() == 1 {
                    v * 10
                } else {
                    v
                }
            }
            Some(_) => return Err(BadAmount),
        };
        let whole: u64 = whole.parse().map_err(|_| BadAmount)?;
        let total = whole.checked_mul(100).and_then(|w| w.checked_add(cents)).ok_or(BadAmount)?;
        if total > MAX_AMOUNT.0 {
            return Err(BadAmount);
        }
        Ok(Amount(total))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        assert_eq!("1000.00".parse::<Amount>().unwrap().render(), "1000");
        assert_eq!("63.10".parse::<Amount>().unwrap().render(), "63.1");
        assert_eq!("0.05".parse::<Amount>().unwrap().render(), "0.05");
        assert_eq!("7".parse::<Amount>(), Ok(Amount(700)));
        assert_eq!("4294967295.99".parse::<Amount>(), Ok(MAX_AMOUNT));
        for bad in ["", ".5", "1.", "1.234", "01.00", "-1", "4294967296.00", "1e3", " 1", "1,00", "99999999999"] {
            assert_eq!(bad.parse::<Amount>(), Err(BadAmount), "{bad}");
        }
        assert_eq!(Amount(6310).to_arg(), "63.10");
    }
}
