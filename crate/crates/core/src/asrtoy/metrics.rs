//! Edit-distance scoring: word error rate for Latin-like text, character
//! error rate for CJK-like text.

use serde::{Deserialize, Serialize};

use super::synth::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Unit-cost Levenshtein alignment. Among optimal alignments the
/// backtrace prefers substitutions, then deletions.
pub fn levenshtein<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diff = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if here == d[(i - 1) * w + j - 1] + diff {
                counts.substitutions += diff;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Errors for one utterance, scored in the reference's language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerEntry {
    pub language: Language,
    pub edits: EditCounts,
    pub reference_len: usize,
}

impl TerEntry {
    pub fn rate(&self) -> f64 {
        if self.reference_len == 0 {
            if self.edits.total() == 0 { 0.0 } else { 1.0 }
        } else {
            self.edits.total() as f64 / self.reference_len as f64
        }
    }
}

/// Which tokens an error rate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenMode {
    Words,
    Chars,
}

impl From<Language> for TokenMode {
    fn from(l: Language) -> Self {
        match l {
            Language::Latin => TokenMode::Words,
            Language::Cjk => TokenMode::Chars,
        }
    }
}

/// Words for Latin-like references, characters for CJK-like ones.
pub fn token_error_rate(reference: &str, hypothesis: &str) -> TerEntry {
    let language = Language::of(reference);
    token_error_rate_in(reference, hypothesis, language, language.into())
}

pub fn token_error_rate_in(reference: &str, hypothesis: &str, language: Language, mode: TokenMode) -> TerEntry {
    let (edits, reference_len) = match mode {
        TokenMode::Words => {
            let r: Vec<&str> = reference.split_whitespace().collect();
            let h: Vec<&str> = hypothesis.split_whitespace().collect();
            (levenshtein(&r, &h), r.len())
        }
        TokenMode::Chars => {
            let r: Vec<char> = reference.chars().collect();
            let h: Vec<char> = hypothesis.chars().collect();
            (levenshtein(&r, &h), r.len())
        }
    };
    TerEntry {
        language,
        edits,
        reference_len,
    }
}

/// Corpus-level totals for one language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorTally {
    pub edits: EditCounts,
    pub reference_len: usize,
    pub utterances: usize,
}

impl ErrorTally {
    pub fn add(&mut self, e: &TerEntry) {
        self.edits.substitutions += e.edits.substitutions;
        self.edits.deletions += e.edits.deletions;
        self.edits.insertions += e.edits.insertions;
        self.reference_len += e.reference_len;
        self.utterances += 1;
    }

    /// Error rate in percent; `None` without reference tokens.
    pub fn ter_percent(&self) -> Option<f64> {
        (self.reference_len > 0).then(|| 100.0 * self.edits.total() as f64 / self.reference_len as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub latin: ErrorTally,
    pub cjk: ErrorTally,
}

impl EvalReport {
    pub fn add(&mut self, e: &TerEntry) {
        match e.language {
            Language::Latin => self.latin.add(e),
            Language::Cjk => self.cjk.add(e),
        }
    }

    pub fn tally(&self, language: Language) -> &ErrorTally {
        match language {
            Language::Latin => &self.latin,
            Language::Cjk => &self.cjk,
        }
    }

    pub fn utterances(&self) -> usize {
        self.latin.utterances + self.cjk.utterances
    }
}

pub fn evaluate<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> EvalReport {
    let mut report = EvalReport::default();
    for (r, h) in pairs {
        report.add(&token_error_rate(r, h));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_distance(a: &[u8], b: &[u8]) -> usize {
        // Plain recursion with memo over (i, j).
        fn go(a: &[u8], b: &[u8], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
            if let Some(v) = memo[a.len()][b.len()] {
                return v;
            }
            let v = match (a.split_last(), b.split_last()) {
                (None, _) => b.len(),
                (_, None) => a.len(),
                (Some((x, ra)), Some((y, rb))) => {
                    let s = go(ra, rb, memo) + usize::from(x != y);
                    s.min(go(ra, b, memo) + 1).min(go(a, rb, memo) + 1)
                }
            };
            memo[a.len()][b.len()] = Some(v);
            v
        }
        let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
        go(a, b, &mut memo)
    }

    #[test]
    fn fixtures() {
        let chars = |r: &str, h: &str| token_error_rate_in(r, h, Language::Latin, TokenMode::Chars);
        assert_eq!(token_error_rate("abc", "abc").rate(), 0.0);
        let e = chars("abc", "abd");
        assert_eq!(e.edits.substitutions, 1);
        assert!((e.rate() - 1.0 / 3.0).abs() < 1e-15);
        let e = chars("abc", "ac");
        assert_eq!(e.edits, EditCounts { substitutions: 0, deletions: 1, insertions: 0 });
        // Latin text is scored per word.
        let e = token_error_rate("ab cd ef", "ab cx ef gh");
        assert_eq!((e.edits.substitutions, e.edits.insertions, e.reference_len), (1, 1, 3));
        // CJK-like text per character.
        let e = token_error_rate("\u{4e00}\u{4e01}", "\u{4e00}");
        assert_eq!((e.language, e.edits.deletions, e.reference_len), (Language::Cjk, 1, 2));
    }

    #[test]
    fn tally_percent() {
        let r = evaluate([("ab cd", "ab"), ("\u{4e00}", "\u{4e00}")]);
        assert_eq!(r.latin.ter_percent(), Some(50.0));
        assert_eq!(r.cjk.ter_percent(), Some(0.0));
        assert_eq!(r.utterances(), 2);
        assert_eq!(EvalReport::default().latin.ter_percent(), None);
    }

    proptest! {
        #[test]
        fn agrees_with_reference_dp(
            a in proptest::collection::vec(0u8..4, 0..9),
            b in proptest::collection::vec(0u8..4, 0..9),
        ) {
            let c = levenshtein(&a, &b);
            prop_assert_eq!(c.total(), reference_distance(&a, &b));
            // Counts are consistent with the lengths.
            prop_assert_eq!(a.len() + c.insertions, b.len() + c.deletions);
        }
    }
}
