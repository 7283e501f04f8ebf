//! Numbers with mandatory unit suffixes, e.g. `2.2 pF` or `-15 dBm`.

/// Physical dimension a scenario key expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Farad,
    Henry,
    Ohm,
    Volt,
    Ampere,
    Coulomb,
    Second,
    Hertz,
    Metre,
    Watt,
    /// Absolute power, written as `dBm` or with a watt suffix.
    Power,
    /// Gain or level difference in `dB` (or `dBi` for antennas).
    Decibel,
}

impl Unit {
    /// Canonical suffix used in error messages and CSV unit rows.
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Farad => "F",
            Unit::Henry => "H",
            Unit::Ohm => "ohm",
            Unit::Volt => "V",
            Unit::Ampere => "A",
            Unit::Coulomb => "C",
            Unit::Second => "s",
            Unit::Hertz => "Hz",
            Unit::Metre => "m",
            Unit::Watt => "W",
            Unit::Power => "dBm",
            Unit::Decibel => "dB",
        }
    }

    fn bases(self) -> &'static [&'static str] {
        match self {
            Unit::Farad => &["F"],
            Unit::Henry => &["H"],
            Unit::Ohm => &["ohm", "Ohm", "Ω"],
            Unit::Volt => &["V"],
            Unit::Ampere => &["A"],
            Unit::Coulomb => &["C"],
            Unit::Second => &["s"],
            Unit::Hertz => &["Hz"],
            Unit::Metre => &["m"],
            Unit::Watt => &["W"],
            Unit::Power => &["W"],
            Unit::Decibel => &[],
        }
    }
}

/// Decimal exponent of an SI prefix.
fn prefix(c: char) -> Option<i32> {
    Some(match c {
        'f' => -15,
        'p' => -12,
        'n' => -9,
        'u' | 'µ' | 'μ' => -6,
        'm' => -3,
        'k' => 3,
        'M' => 6,
        'G' => 9,
        _ => return None,
    })
}

/// Decimal exponent for `suffix` in `unit`, or `None` if it does not belong.
fn scale_of(unit: Unit, suffix: &str) -> Option<i32> {
    match unit {
        Unit::Power if suffix == "dBm" => return Some(0),
        Unit::Decibel if suffix == "dB" || suffix == "dBi" => return Some(0),
        _ => {}
    }
    for base in unit.bases() {
        if suffix == *base {
            return Some(0);
        }
        let mut chars = suffix.chars();
        if let Some(p) = chars.next().and_then(prefix) {
            if chars.as_str() == *base {
                return Some(p);
            }
        }
    }
    None
}

/// Parses `<number> <unit>` into SI base units (dBm for [`Unit::Power`]).
pub fn parse_quantity(text: &str, unit: Unit) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace())
        .ok_or_else(|| format!("`{text}` needs a unit, e.g. `{text} {}`", unit.symbol()))?;
    let (num, suffix) = (text[..split].trim(), text[split..].trim());
    parse_number(num)?;
    let exp = scale_of(unit, suffix).ok_or_else(|| format!("unit `{suffix}` is not a {} unit", unit.symbol()))?;
    // Shift the decimal exponent in text so `2.2 pF` is exactly `2.2e-12`.
    let value = if exp == 0 {
        parse_number(num)?
    } else {
        let (mantissa, own) = match num.find(['e', 'E']) {
            Some(i) => (&num[..i], num[i + 1..].parse::<i32>().map_err(|_| format!("`{num}` is not a number"))?),
            None => (num, 0),
        };
        parse_number(&format!("{mantissa}e{}", own + exp))?
    };
    if unit == Unit::Power && suffix != "dBm" {
        if !(value > 0.0) {
            return Err(format!("power `{text}` must be positive"));
        }
        return Ok(10.0 * (value * 1e3).log10());
    }
    Ok(value)
}

pub fn parse_number(text: &str) -> Result<f64, String> {
    let v: f64 = text.trim().parse().map_err(|_| format!("`{}` is not a number", text.trim()))?;
    if !v.is_finite() {
        return Err(format!("`{}` is not finite", text.trim()));
    }
    Ok(v)
}

/// Shortest text that parses back to the same float: plain decimals in
/// the middle range, scientific notation outside it.
pub fn format_number(value: f64) -> String {
    if value == 0.0 || (1e-3..1e6).contains(&value.abs()) {
        format!("{value}")
    } else {
        format!("{value:e}")
    }
}

/// Writes a value in base units back with the canonical suffix.
pub fn format_quantity(value: f64, unit: Unit) -> String {
    format!("{} {}", format_number(value), unit.symbol())
}
