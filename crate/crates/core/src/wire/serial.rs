//! Comparison of wrapping 16-bit sequence numbers.

const HALF: u16 = 0x8000;

/// Returns true if `a` precedes `b` in serial-number arithmetic.
///
/// The antipodal pair (distance exactly 2^15) is ordered numerically so
/// that the relation stays a tournament.
pub fn seq_is_before(a: u16, b: u16) -> bool {
    match b.wrapping_sub(a) {
        0 => false,
        d if d < HALF => true,
        HALF => a < b,
        _ => false,
    }
}

/// Forward distance from `from` to `to`, modulo 2^16.
#[inline]
pub fn serial_distance(from: u16, to: u16) -> u16 {
    to.wrapping_sub(from)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct transcription of the modular definition, kept separate from the
    // match-based implementation above.
    fn reference(a: u16, b: u16) -> bool {
        let d = (b as u32 + 65536 - a as u32) % 65536;
        if a == b {
            false
        } else if d == 32768 {
            a < b
        } else {
            d < 32768
        }
    }

    #[test]
    fn basic_cases() {
        assert!(seq_is_before(0, 1));
        assert!(!seq_is_before(1, 0));
        assert!(seq_is_before(0xFFFF, 0x0000));
        assert!(!seq_is_before(5, 5));
    }

    #[test]
    fn matches_reference_over_full_space_from_sampled_origins() {
        for a in (0..=u16::MAX).step_by(97).chain([0, 1, 0x7FFF, 0x8000, 0xFFFF]) {
            for b in 0..=u16::MAX {
                assert_eq!(seq_is_before(a, b), reference(a, b), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn antipodal_tie_break() {
        assert!(seq_is_before(0, 0x8000));
        assert!(!seq_is_before(0x8000, 0));
        assert!(seq_is_before(0x10, 0x8010));
    }

    #[test]
    fn tournament_on_windows() {
        for start in [0u16, 0x7F00, 0xFF00, 0xFFF0] {
            for i in 0..300u16 {
                for j in 0..300u16 {
                    let (a, b) = (start.wrapping_add(i), start.wrapping_add(j));
                    if a == b {
                        continue;
                    }
                    assert!(seq_is_before(a, b) ^ seq_is_before(b, a));
                }
            }
        }
    }
}
