use super::{apply_mask, ActivityTuple, MaskConfig, Token, Vocabulary, POSITIONS};
use crate::error::{Error, Result};

/// Length of one encoded tuple: six one-hot blocks, plus a duration slot.
pub fn feature_dim(vocab: &Vocabulary, with_duration: bool) -> usize {
    (0..POSITIONS).map(|p| vocab.position(p).width()).sum::<usize>() + usize::from(with_duration)
}

/// Appends the block one-hot encoding of `items` (masked by `mask`) to `out`.
pub fn encode_tuple(
    items: &[Token; POSITIONS],
    duration: f64,
    mask: &MaskConfig,
    vocab: &Vocabulary,
    with_duration: bool,
    out: &mut Vec<f64>,
) {
    for (p, tok) in items.iter().enumerate() {
        let width = vocab.position(p).width();
        let hot = if mask.is_visible(p) { tok.index() } else { Token::UNKNOWN.index() };
        debug_assert!(hot < width);
        let base = out.len();
        out.resize(base + width, 0.0);
        out[base + hot] = 1.0;
    }
    if with_duration {
        out.push(duration);
    }
}

fn padding(mask: &MaskConfig, vocab: &Vocabulary, with_duration: bool) -> Vec<f64> {
    let mut v = Vec::with_capacity(feature_dim(vocab, with_duration));
    encode_tuple(&[Token::UNKNOWN; POSITIONS], 0.0, mask, vocab, with_duration, &mut v);
    v
}

/// Encodes activities `i - n ..= i` of `seq`.
///
/// Positions before the start of the sequence are an all-`unknown` tuple
/// with duration 0. Returns `n + 1` vectors, oldest first.
pub fn encode_window(
    seq: &[ActivityTuple],
    i: usize,
    n: usize,
    mask: &MaskConfig,
    with_duration: bool,
    vocab: &Vocabulary,
) -> Result<Vec<Vec<f64>>> {
    if i >= seq.len() {
        return Err(Error::OutOfRange { index: i, len: seq.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("window length n must be at least 1".into()));
    }
    let pad = padding(mask, vocab, with_duration);
    let mut out = Vec::with_capacity(n + 1);
    for k in (0..=n).rev() {
        if k > i {
            out.push(pad.clone());
        } else {
            let a = apply_mask(&seq[i - k], mask);
            let mut v = Vec::with_capacity(pad.len());
            encode_tuple(&a.items, a.duration(), mask, vocab, with_duration, &mut v);
            out.push(v);
        }
    }
    Ok(out)
}

/// A whole sequence encoded once, so that windows can borrow rows instead
/// of re-encoding overlapping history.
#[derive(Debug, Clone)]
pub struct EncodedSequence {
    pub rows: Vec<Vec<f64>>,
    pub padding: Vec<f64>,
}

impl EncodedSequence {
    pub fn new(seq: &[ActivityTuple], mask: &MaskConfig, vocab: &Vocabulary, with_duration: bool) -> Self {
        let dim = feature_dim(vocab, with_duration);
        let rows = seq
            .iter()
            .map(|a| {
                let mut v = Vec::with_capacity(dim);
                encode_tuple(&a.items, a.duration(), mask, vocab, with_duration, &mut v);
                v
            })
            .collect();
        EncodedSequence { rows, padding: padding(mask, vocab, with_duration) }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Borrowed view of the window ending at `i`; same layout as [`encode_window`].
    pub fn window(&self, i: usize, n: usize) -> Vec<&[f64]> {
        (0..=n)
            .rev()
            .map(|k| if k > i { self.padding.as_slice() } else { self.rows[i - k].as_slice() })
            .collect()
    }
}
