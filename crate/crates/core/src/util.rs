//! Small shared helpers: stable hashing for seeded decisions and value
//! normalization.

use sha2::{Digest, Sha256};

/// Stable 64-bit hash of a sequence of string parts. The parts are
/// length-prefixed so `("ab", "c")` and `("a", "bc")` differ.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Maps a stable hash onto `[0, 1)` using its top 53 bits.
pub fn unit_interval(parts: &[&str]) -> f64 {
    (stable_hash(parts) >> 11) as f64 / (1u64 << 53) as f64
}

/// Normalizes a knowledge-base literal so mention literals and store values
/// compare equal: strips a leading `+`, a midnight UTC time suffix and
/// redundant decimal zeros.
pub fn normalize_literal(raw: &str) -> String {
    let mut s = raw.trim();
    s = s.strip_prefix('+').unwrap_or(s);
    s = s.strip_suffix("T00:00:00Z").unwrap_or(s);
    if is_decimal(s) {
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        let int = int.trim_start_matches('0');
        let int = if int.is_empty() { "0" } else { int };
        let frac = frac.trim_end_matches('0');
        let mut out = String::new();
        if neg && !(int == "0" && frac.is_empty()) {
            out.push('-');
        }
        out.push_str(int);
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        return out;
    }
    s.to_string()
}

fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut dots = 0;
    !body.is_empty()
        && body.chars().all(|c| {
            if c == '.' {
                dots += 1;
                true
            } else {
                c.is_ascii_digit()
            }
        })
        && dots <= 1
        && !body.starts_with('.')
        && !body.ends_with('.')
}

/// Trim and collapse internal whitespace runs to single spaces.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Round to one decimal place.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_normalization() {
        assert_eq!(normalize_literal("+2005-05-30T00:00:00Z"), "2005-05-30");
        assert_eq!(normalize_literal("2005-05-30"), "2005-05-30");
        assert_eq!(normalize_literal("+700000"), "700000");
        assert_eq!(normalize_literal("1.50"), "1.5");
        assert_eq!(normalize_literal("007"), "7");
        assert_eq!(normalize_literal("-0.0"), "0");
    }

    #[test]
    fn hash_parts_are_length_prefixed() {
        assert_ne!(stable_hash(&["ab", "c"]), stable_hash(&["a", "bc"]));
        assert_eq!(stable_hash(&["x"]), stable_hash(&["x"]));
        let u = unit_interval(&["seed", "page"]);
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn surface_normalization() {
        assert_eq!(normalize_surface("  Buenos \t Aires "), "Buenos Aires");
    }
}
