//! UTF-8 encoding and repair decoding.
//!
//! [`utf8_repair_decode`] turns any byte sequence into the valid string
//! with the most characters, dropping as few bytes as possible. It is the
//! inverse used by the UTF-8 baseline when a model emits bytes that do not
//! form valid UTF-8.

use crate::error::{Error, Result};

/// Result of repair decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairResult {
    pub text: String,
    pub chars_recovered: usize,
    pub bytes_skipped: usize,
}

pub fn utf8_encode(text: &str) -> Vec<u8> {
    text.as_bytes().to_vec()
}

/// Encode raw scalar values, rejecting surrogates and values past U+10FFFF.
pub fn utf8_encode_scalars(scalars: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(scalars.len());
    let mut buf = [0u8; 4];
    for &s in scalars {
        let c = char::from_u32(s).ok_or(Error::InvalidScalar(s))?;
        out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
    }
    Ok(out)
}

/// Length implied by a lead byte, or `None` if it cannot start a
/// well-formed sequence (continuation bytes, C0/C1, F5..FF).
fn sequence_len(lead: u8) -> Option<usize> {
    match lead {
        0x00..=0x7F => Some(1),
        0xC2..=0xDF => Some(2),
        0xE0..=0xEF => Some(3),
        0xF0..=0xF4 => Some(4),
        _ => None,
    }
}

/// The well-formed character starting at `bytes[i]`, if any. Overlong
/// forms and surrogates are rejected. UTF-8 is a prefix code, so at most
/// one character can start at a given position.
pub fn char_at(bytes: &[u8], i: usize) -> Option<(char, usize)> {
    let len = sequence_len(*bytes.get(i)?)?;
    let chunk = bytes.get(i..i + len)?;
    let s = std::str::from_utf8(chunk).ok()?;
    s.chars().next().map(|c| (c, len))
}

#[derive(Clone, Copy)]
struct Cell {
    chars: usize,
    skips: usize,
    from: usize,
    ch: Option<char>,
}

impl Cell {
    fn beats(&self, other: &Cell) -> bool {
        self.chars > other.chars || (self.chars == other.chars && self.skips < other.skips)
    }
}

/// Recover the valid string with the most characters from `bytes`.
///
/// Among equally long recoveries, the one dropping the fewest bytes wins;
/// remaining ties keep the path whose character match starts earliest.
pub fn utf8_repair_decode(bytes: &[u8]) -> RepairResult {
    let n = bytes.len();
    let mut best: Vec<Option<Cell>> = vec![None; n + 1];
    best[0] = Some(Cell {
        chars: 0,
        skips: 0,
        from: 0,
        ch: None,
    });

    let relax = |best: &mut Vec<Option<Cell>>, j: usize, cand: Cell| match best[j] {
        Some(cur) if !cand.beats(&cur) => {}
        _ => best[j] = Some(cand),
    };

    for i in 0..n {
        let Some(cur) = best[i] else { continue };
        if let Some((c, len)) = char_at(bytes, i) {
            relax(
                &mut best,
                i + len,
                Cell {
                    chars: cur.chars + 1,
                    skips: cur.skips,
                    from: i,
                    ch: Some(c),
                },
            );
        }
        relax(
            &mut best,
            i + 1,
            Cell {
                chars: cur.chars,
                skips: cur.skips + 1,
                from: i,
                ch: None,
            },
        );
    }

    let end = best[n].expect("every position is reachable by skipping");
    let mut chars = Vec::with_capacity(end.chars);
    let mut pos = n;
    while pos > 0 {
        let cell = best[pos].expect("reachable");
        if let Some(c) = cell.ch {
            chars.push(c);
        }
        pos = cell.from;
    }
    chars.reverse();
    RepairResult {
        text: chars.into_iter().collect(),
        chars_recovered: end.chars,
        bytes_skipped: end.skips,
    }
}

/// Characters a naive decoder yields when it stops at the first error.
pub fn naive_decode_count(bytes: &[u8]) -> usize {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.chars().count(),
        Err(e) => std::str::from_utf8(&bytes[..e.valid_up_to()])
            .map(|s| s.chars().count())
            .unwrap_or(0),
    }
}
