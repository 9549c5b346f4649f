//! Byte-pair-encoding over an arbitrary base alphabet.
//!
//! Symbols `0..base_size` are base symbols (UTF-8 bytes, charset indices,
//! or latent symbol ids). The next `reserved` ids are reserved; offset 0
//! is the boundary marker, which no merge may touch. Merged symbols follow
//! consecutively.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Symbol = u32;

/// Reserved symbols after the base alphabet. Only the boundary marker
/// (offset 0) is defined.
pub const RESERVED_SYMBOLS: u32 = 1;

const VOCAB_MAGIC: &str = "bytevq-bpe";
const VOCAB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    base_size: u32,
    reserved: u32,
    merges: Vec<(Symbol, Symbol)>,
    target_size: usize,
    truncated: bool,
    ranks: HashMap<(Symbol, Symbol), u32>,
}

impl SubwordVocab {
    fn new(base_size: u32, target_size: usize, merges: Vec<(Symbol, Symbol)>, truncated: bool) -> Self {
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(r, &p)| (p, r as u32))
            .collect();
        Self {
            base_size,
            reserved: RESERVED_SYMBOLS,
            merges,
            target_size,
            truncated,
            ranks,
        }
    }

    pub fn base_size(&self) -> u32 {
        self.base_size
    }

    pub fn reserved(&self) -> u32 {
        self.reserved
    }

    pub fn boundary(&self) -> Symbol {
        self.base_size
    }

    pub fn merges(&self) -> &[(Symbol, Symbol)] {
        &self.merges
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    /// True when training ran out of pairs before reaching `target_size`.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Total symbol count: base + reserved + merges.
    pub fn size(&self) -> usize {
        self.first_merged() as usize + self.merges.len()
    }

    fn first_merged(&self) -> Symbol {
        self.base_size + self.reserved
    }

    fn check_base(&self, seq: &[Symbol]) -> Result<()> {
        for &s in seq {
            if s >= self.base_size && s != self.boundary() {
                return Err(Error::Input(format!(
                    "symbol {s} is not a base symbol (base size {})",
                    self.base_size
                )));
            }
        }
        Ok(())
    }

    /// Text serialization: a header then one `left right new` line per merge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{VOCAB_MAGIC} v{VOCAB_VERSION}");
        let _ = writeln!(s, "base_size {}", self.base_size);
        let _ = writeln!(s, "reserved {} boundary={}", self.reserved, self.boundary());
        let _ = writeln!(s, "target_size {}", self.target_size);
        let _ = writeln!(s, "merges {}", self.merges.len());
        for (r, (a, b)) in self.merges.iter().enumerate() {
            let _ = writeln!(s, "{a} {b} {}", self.first_merged() + r as u32);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Data(format!("vocab file: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let version = header
            .strip_prefix(VOCAB_MAGIC)
            .map(str::trim)
            .ok_or_else(|| bad("missing magic header"))?;
        if version != format!("v{VOCAB_VERSION}") {
            return Err(Error::Version {
                found: version.to_string(),
                expected: format!("v{VOCAB_VERSION}"),
            });
        }
        let mut field = |key: &str| -> Result<u64> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {key}")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(&format!("expected {key}")));
            }
            parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(&format!("bad {key} value")))
        };
        let base_size = field("base_size")? as u32;
        let reserved = field("reserved")? as u32;
        let target_size = field("target_size")? as usize;
        let count = field("merges")? as usize;
        if reserved != RESERVED_SYMBOLS {
            return Err(bad(&format!("unsupported reserved count {reserved}")));
        }
        let mut merges = Vec::with_capacity(count);
        for (r, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let nums: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(&format!("bad merge line {line:?}"))))
                .collect::<Result<_>>()?;
            let [a, b, new] = nums[..] else {
                return Err(bad(&format!("bad merge line {line:?}")));
            };
            let expected = base_size + reserved + r as u32;
            if new != expected || a >= expected || b >= expected || a == base_size || b == base_size {
                return Err(bad(&format!("inconsistent merge line {line:?}")));
            }
            merges.push((a, b));
        }
        if merges.len() != count {
            return Err(bad(&format!("expected {count} merges, found {}", merges.len())));
        }
        let truncated = base_size as usize + reserved as usize + count < target_size;
        Ok(Self::new(base_size, target_size, merges, truncated))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Learn merges until the vocabulary holds `target_size` symbols or no
/// adjacent pair is left.
///
/// The most frequent pair wins; ties go to the lower left id, then the
/// lower right id. Pairs touching the boundary marker are never counted.
pub fn bpe_train(corpus: &[Vec<Symbol>], base_size: u32, target_size: usize) -> Result<SubwordVocab> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot train BPE on an empty corpus".into()));
    }
    let first_merged = base_size + RESERVED_SYMBOLS;
    if target_size < first_merged as usize {
        return Err(Error::Config(format!(
            "target size {target_size} is below base + reserved = {first_merged}"
        )));
    }
    let boundary = base_size;
    let probe = SubwordVocab::new(base_size, target_size, Vec::new(), false);
    for seq in corpus {
        probe.check_base(seq)?;
    }

    // Deduplicate identical sequences, keeping first-seen order.
    let mut seen: HashMap<&[Symbol], usize> = HashMap::new();
    let mut words: Vec<Vec<Symbol>> = Vec::new();
    let mut freqs: Vec<i64> = Vec::new();
    for seq in corpus {
        match seen.get(seq.as_slice()) {
            Some(&i) => freqs[i] += 1,
            None => {
                seen.insert(seq, words.len());
                words.push(seq.clone());
                freqs.push(1);
            }
        }
    }

    let mergeable = |a: Symbol, b: Symbol| a != boundary && b != boundary;
    let mut counts: HashMap<(Symbol, Symbol), i64> = HashMap::new();
    let mut where_: HashMap<(Symbol, Symbol), BTreeSet<usize>> = HashMap::new();
    for (wi, w) in words.iter().enumerate() {
        for p in w.windows(2) {
            if mergeable(p[0], p[1]) {
                *counts.entry((p[0], p[1])).or_default() += freqs[wi];
                where_.entry((p[0], p[1])).or_default().insert(wi);
            }
        }
    }

    let wanted = target_size - first_merged as usize;
    let mut merges = Vec::with_capacity(wanted);
    while merges.len() < wanted {
        let best = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then(pb.cmp(pa)))
            .map(|(&p, _)| p);
        let Some(pair) = best else { break };
        let new = first_merged + merges.len() as u32;
        merges.push(pair);

        let affected = where_.remove(&pair).unwrap_or_default();
        for wi in affected {
            let f = freqs[wi];
            let old = std::mem::take(&mut words[wi]);
            let merged = merge_pair(&old, pair, new);
            if merged.len() == old.len() {
                words[wi] = old;
                continue;
            }
            for p in old.windows(2) {
                if mergeable(p[0], p[1]) {
                    if let Some(c) = counts.get_mut(&(p[0], p[1])) {
                        *c -= f;
                    }
                }
            }
            for p in merged.windows(2) {
                if mergeable(p[0], p[1]) {
                    *counts.entry((p[0], p[1])).or_default() += f;
                    where_.entry((p[0], p[1])).or_default().insert(wi);
                }
            }
            words[wi] = merged;
        }
        counts.retain(|_, c| *c > 0);
    }
    let truncated = merges.len() < wanted;
    if truncated {
        log::warn!(
            "BPE ran out of pairs after {} of {wanted} merges",
            merges.len()
        );
    }
    Ok(SubwordVocab::new(base_size, target_size, merges, truncated))
}

/// Replace non-overlapping occurrences of `pair`, scanning left to right.
fn merge_pair(seq: &[Symbol], pair: (Symbol, Symbol), new: Symbol) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && (seq[i], seq[i + 1]) == pair {
            out.push(new);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

/// Apply the merges in training order until none applies.
pub fn bpe_encode(vocab: &SubwordVocab, seq: &[Symbol]) -> Result<Vec<Symbol>> {
    vocab.check_base(seq)?;
    let mut cur = seq.to_vec();
    // A merge only creates pairs whose merges come later in training, so
    // repeatedly taking the lowest-ranked present pair is equivalent to
    // applying every merge in order.
    loop {
        let best = cur
            .windows(2)
            .filter_map(|p| vocab.ranks.get(&(p[0], p[1])).copied())
            .min();
        let Some(rank) = best else { break };
        let pair = vocab.merges[rank as usize];
        cur = merge_pair(&cur, pair, vocab.first_merged() + rank);
    }
    Ok(cur)
}

/// Expand merged symbols back to base symbols (boundary markers pass
/// through).
pub fn bpe_decode(vocab: &SubwordVocab, seq: &[Symbol]) -> Result<Vec<Symbol>> {
    let size = vocab.size();
    let first = vocab.first_merged();
    let mut out = Vec::with_capacity(seq.len() * 2);
    let mut stack = Vec::new();
    for &s in seq {
        if s as usize >= size {
            return Err(Error::Input(format!("symbol {s} outside vocabulary of {size}")));
        }
        stack.push(s);
        while let Some(top) = stack.pop() {
            if top >= first {
                let (a, b) = vocab.merges[(top - first) as usize];
                stack.push(b);
                stack.push(a);
            } else {
                out.push(top);
            }
        }
    }
    Ok(out)
}

/// Build one BPE training sequence per whitespace-separated word, each
/// prefixed by the boundary marker.
pub fn words_with_boundary<F>(line: &str, boundary: Symbol, mut to_symbols: F) -> Vec<Symbol>
where
    F: FnMut(&str) -> Vec<Symbol>,
{
    let mut out = Vec::new();
    for word in line.split_whitespace() {
        out.push(boundary);
        out.extend(to_symbols(word));
    }
    out
}

/// Split a decoded symbol stream at boundary markers. Empty segments are
/// dropped.
pub fn split_at_boundary(seq: &[Symbol], boundary: Symbol) -> Vec<&[Symbol]> {
    seq.split(|&s| s == boundary).filter(|w| !w.is_empty()).collect()
}
