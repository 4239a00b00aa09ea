use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Positive rational dither frequency, stored in lowest terms.
///
/// Frequencies are exact rationals rather than floats so that the common
/// period of a multi-frequency dither can be computed exactly; the
/// zero-mean property of the fast field over one period hinges on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidConfig(format!(
                "frequency must be a positive rational, got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(n: u64) -> Self {
        Self { num: n.max(1), den: 1 }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |_| Error::InvalidConfig(format!("cannot parse rational `{s}`"));
        match s.split_once('/') {
            Some((p, q)) => {
                Rational::new(p.trim().parse().map_err(bad)?, q.trim().parse().map_err(bad)?)
            }
            None => Rational::new(s.trim().parse().map_err(bad)?, 1),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Smallest `T > 0` such that `ω_i · T` is an integer multiple of `2π` for
/// every frequency, computed exactly in rational arithmetic:
/// `T = 2π · lcm(denominators) / gcd(numerators)`.
pub fn common_period(freqs: &[Rational]) -> Result<f64> {
    if freqs.is_empty() {
        return Err(Error::NoFrequencies);
    }
    let mut sorted = freqs.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DuplicateFrequency);
    }
    let mut den_lcm: u64 = 1;
    let mut num_gcd: u64 = 0;
    for f in freqs {
        den_lcm = lcm(den_lcm, f.denominator());
        num_gcd = gcd(num_gcd, f.numerator());
    }
    Ok(2.0 * PI * den_lcm as f64 / num_gcd as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_to_lowest_terms() {
        let r = Rational::new(6, 4).unwrap();
        assert_eq!((r.numerator(), r.denominator()), (3, 2));
    }

    #[test]
    fn single_unit_frequency_gives_two_pi() {
        let t = common_period(&[Rational::integer(1)]).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn harmonics_share_the_base_period() {
        let t = common_period(&[Rational::integer(1), Rational::integer(2)]).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn half_and_three_quarters() {
        // lcm(2,4)/gcd(1,3) = 4, so T = 8π and ω·T/2π ∈ {2, 3} exactly.
        let freqs = [Rational::new(1, 2).unwrap(), Rational::new(3, 4).unwrap()];
        let t = common_period(&freqs).unwrap();
        assert!((t - 8.0 * PI).abs() < 1e-12);
        for (f, k) in freqs.iter().zip([2.0, 3.0]) {
            let cycles = f.numerator() as f64 * 4.0 / f.denominator() as f64;
            assert_eq!(cycles, k);
        }
    }

    #[test]
    fn empty_and_duplicate_inputs_error() {
        assert!(matches!(common_period(&[]), Err(Error::NoFrequencies)));
        let dup = [Rational::new(2, 4).unwrap(), Rational::new(1, 2).unwrap()];
        assert!(matches!(common_period(&dup), Err(Error::DuplicateFrequency)));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["1", "3/4", "10/7"] {
            let r: Rational = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert!("0/3".parse::<Rational>().is_err());
        assert!("x".parse::<Rational>().is_err());
    }
}
