//! Synthetic two-script task: a Latin-like alphabet written in
//! space-separated words and a large CJK-like character set written without
//! spaces, each character pronounced as a short phone sequence and rendered
//! into noisy prototype frames. Pronunciations are syllable-like (an
//! onset phone, then non-onset phones), so the only acoustic ambiguity
//! built into the task is the homophones.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::charset::Charset;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// First code point of the CJK-like block.
pub const CJK_BASE: u32 = 0x4E00;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Latin,
    Cjk,
}

impl Language {
    /// Text containing any non-ASCII character counts as CJK-like.
    pub fn of(text: &str) -> Self {
        if text.is_ascii() {
            Language::Latin
        } else {
            Language::Cjk
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthTaskSpec {
    pub latin_chars: usize,
    pub cjk_chars: usize,
    /// Phone inventory, not counting the silence phone used for spaces.
    pub phones: usize,
    pub phones_per_char: (usize, usize),
    /// Fraction of CJK-like characters that reuse the pronunciation of
    /// another CJK-like character.
    pub homophone_rate: f64,
    pub frames_per_phone: (usize, usize),
    pub feature_dim: usize,
    /// Standard deviation of the additive frame noise.
    pub noise: f64,
    pub utterances: usize,
    /// Fraction of utterances drawn in the CJK-like script.
    pub cjk_fraction: f64,
    pub words_per_utterance: (usize, usize),
    pub latin_word_len: (usize, usize),
    pub cjk_word_len: (usize, usize),
    /// Word-list size per script; words are drawn with Zipfian frequency.
    pub lexicon_words: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthTaskSpec {
    fn default() -> Self {
        Self {
            latin_chars: 26,
            cjk_chars: 500,
            phones: 40,
            phones_per_char: (1, 3),
            homophone_rate: 0.3,
            frames_per_phone: (2, 4),
            feature_dim: 16,
            noise: 0.6,
            utterances: 2000,
            cjk_fraction: 0.5,
            words_per_utterance: (2, 5),
            latin_word_len: (2, 6),
            cjk_word_len: (1, 3),
            lexicon_words: 400,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

fn check_range(name: &str, (lo, hi): (usize, usize)) -> Result<()> {
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("{name} must satisfy 1 <= min <= max, got ({lo}, {hi})")));
    }
    Ok(())
}

impl SynthTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.latin_chars == 0 && self.cjk_chars == 0 {
            return Err(Error::Config("no characters requested".into()));
        }
        if self.latin_chars > 26 {
            return Err(Error::Config("at most 26 latin characters".into()));
        }
        if self.phones == 0 || self.feature_dim == 0 || self.utterances == 0 || self.lexicon_words == 0 {
            return Err(Error::Config("phones, feature_dim, utterances and lexicon_words must be positive".into()));
        }
        check_range("phones_per_char", self.phones_per_char)?;
        check_range("frames_per_phone", self.frames_per_phone)?;
        check_range("words_per_utterance", self.words_per_utterance)?;
        check_range("latin_word_len", self.latin_word_len)?;
        check_range("cjk_word_len", self.cjk_word_len)?;
        for (name, v) in [
            ("homophone_rate", self.homophone_rate),
            ("cjk_fraction", self.cjk_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        if self.homophone_rate > 0.0 && self.cjk_chars < 2 {
            return Err(Error::Config("homophones need at least two CJK-like characters".into()));
        }
        if self.homophone_count() >= self.cjk_chars && self.cjk_chars > 0 {
            return Err(Error::Config("homophone rate leaves no character to share with".into()));
        }
        if self.cjk_fraction > 0.0 && self.cjk_chars == 0 || self.cjk_fraction < 1.0 && self.latin_chars == 0 {
            return Err(Error::Config("cjk_fraction requests a script with no characters".into()));
        }
        let (lo, hi) = self.phones_per_char;
        let onsets = self.onset_phones() as f64;
        let rimes = (self.phones - self.onset_phones()) as f64;
        if hi > 1 && rimes == 0.0 {
            return Err(Error::Config("multi-phone characters need at least two phones".into()));
        }
        let capacity: f64 = (lo..=hi).map(|k| onsets * rimes.powi(k as i32 - 1)).sum();
        if capacity < (self.latin_chars + self.cjk_chars) as f64 {
            return Err(Error::Config("phone inventory too small for distinct pronunciations".into()));
        }
        Ok(())
    }

    /// Phones that may start a character; the others only continue one,
    /// so a phone string splits into characters in exactly one way.
    pub fn onset_phones(&self) -> usize {
        if self.phones_per_char.1 > 1 {
            self.phones.div_ceil(3).min(self.phones - 1).max(1)
        } else {
            self.phones
        }
    }

    fn homophone_count(&self) -> usize {
        (self.homophone_rate * self.cjk_chars as f64).round() as usize
    }
}

/// Pronunciations and phone prototypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub pronunciations: BTreeMap<char, Vec<usize>>,
    /// `(phones + 1) x F`; the last row is silence.
    pub prototypes: DenseMatrix,
}

impl Lexicon {
    pub fn silence(&self) -> usize {
        self.prototypes.rows() - 1
    }

    /// Characters sharing their pronunciation with another character.
    pub fn homophone_groups(&self) -> Vec<Vec<char>> {
        let mut groups: BTreeMap<&[usize], Vec<char>> = BTreeMap::new();
        for (&c, p) in &self.pronunciations {
            groups.entry(p.as_slice()).or_default().push(c);
        }
        groups.into_values().filter(|g| g.len() > 1).collect()
    }

    /// Phone sequence for `text`; spaces become silence.
    pub fn phones(&self, text: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for c in text.chars() {
            if c == ' ' {
                out.push(self.silence());
                continue;
            }
            let p = self
                .pronunciations
                .get(&c)
                .ok_or_else(|| Error::Input(format!("no pronunciation for {c:?}")))?;
            out.extend_from_slice(p);
        }
        Ok(out)
    }

    /// Render `text`: each phone's prototype repeated for a uniformly drawn
    /// number of frames, plus Gaussian noise.
    pub fn render<R: Rng + ?Sized>(
        &self,
        text: &str,
        frames_per_phone: (usize, usize),
        noise: f64,
        rng: &mut R,
    ) -> Result<DenseMatrix> {
        let phones = self.phones(text)?;
        let f = self.prototypes.cols();
        let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut data = Vec::new();
        for p in phones {
            let frames = rng.random_range(frames_per_phone.0..=frames_per_phone.1);
            for _ in 0..frames {
                for &x in self.prototypes.row(p) {
                    let n = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
                    data.push(x + n);
                }
            }
        }
        DenseMatrix::from_vec(data.len() / f, f, data)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub texts: Vec<String>,
    pub features: Vec<DenseMatrix>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Dataset,
    pub test: Dataset,
    pub lexicon: Lexicon,
    /// Every character of the task plus the space.
    pub charset: Charset,
}

fn draw(rng: &mut impl Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

pub fn synth_generate(spec: &SynthTaskSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let latin: Vec<char> = (0..spec.latin_chars).map(|i| (b'a' + i as u8) as char).collect();
    let cjk: Vec<char> = (0..spec.cjk_chars)
        .map(|i| char::from_u32(CJK_BASE + i as u32).expect("CJK block is valid"))
        .collect();

    let mut used = HashSet::new();
    let mut pronunciations = BTreeMap::new();
    let onsets = spec.onset_phones();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let len = draw(rng, spec.phones_per_char);
        let p: Vec<usize> = (0..len)
            .map(|k| match k {
                0 => rng.random_range(0..onsets),
                _ => rng.random_range(onsets..spec.phones),
            })
            .collect();
        if used.insert(p.clone()) {
            return p;
        }
    };
    for &c in &latin {
        pronunciations.insert(c, fresh(&mut rng));
    }
    let mut order = cjk.clone();
    order.shuffle(&mut rng);
    let homophones = spec.homophone_count();
    let (distinct, shared) = order.split_at(cjk.len() - homophones);
    for &c in distinct {
        pronunciations.insert(c, fresh(&mut rng));
    }
    for &c in shared {
        let src = distinct[rng.random_range(0..distinct.len())];
        let p = pronunciations[&src].clone();
        pronunciations.insert(c, p);
    }
    let prototypes = DenseMatrix::randn(spec.phones + 1, spec.feature_dim, 1.0, &mut rng);
    let lexicon = Lexicon {
        pronunciations,
        prototypes,
    };

    let word_list = |rng: &mut ChaCha8Rng, chars: &[char], len: (usize, usize)| -> Vec<String> {
        if chars.is_empty() {
            return Vec::new();
        }
        let mut seen = HashSet::new();
        let mut words = Vec::new();
        let mut attempts = 0;
        while words.len() < spec.lexicon_words && attempts < spec.lexicon_words * 50 {
            attempts += 1;
            let n = draw(rng, len);
            let w: String = (0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect();
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        words
    };
    let latin_words = word_list(&mut rng, &latin, spec.latin_word_len);
    let cjk_words = word_list(&mut rng, &cjk, spec.cjk_word_len);
    let zipf = |n: usize| Zipf::new(n.max(1) as f64, 1.0).map_err(|e| Error::Config(e.to_string()));
    let latin_zipf = zipf(latin_words.len())?;
    let cjk_zipf = zipf(cjk_words.len())?;

    let mut texts = Vec::with_capacity(spec.utterances);
    let mut features = Vec::with_capacity(spec.utterances);
    for _ in 0..spec.utterances {
        let is_cjk = rng.random::<f64>() < spec.cjk_fraction;
        let (words, dist, sep) = if is_cjk {
            (&cjk_words, &cjk_zipf, "")
        } else {
            (&latin_words, &latin_zipf, " ")
        };
        let n = draw(&mut rng, spec.words_per_utterance);
        let picked: Vec<&str> = (0..n)
            .map(|_| words[dist.sample(&mut rng) as usize - 1].as_str())
            .collect();
        let text = picked.join(sep);
        let frames = lexicon.render(&text, spec.frames_per_phone, spec.noise, &mut rng)?;
        texts.push(text);
        features.push(frames);
    }

    let n_test = ((spec.utterances as f64) * spec.test_fraction).round() as usize;
    let split = spec.utterances - n_test;
    let test = Dataset {
        texts: texts.split_off(split),
        features: features.split_off(split),
    };
    let train = Dataset { texts, features };
    let mut all: Vec<char> = latin.into_iter().chain(cjk).collect();
    if spec.latin_chars > 0 {
        all.push(' ');
    }
    all.sort_unstable();
    let charset = Charset::new(all)?;
    Ok(SynthCorpus {
        train,
        test,
        lexicon,
        charset,
    })
}
