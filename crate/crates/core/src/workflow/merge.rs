use super::{ActivityTuple, ElementKind, Hand, HandAnnotation, Token, Vocabulary, POSITIONS};
use crate::error::{Error, Result};

/// Piecewise-constant label timeline of one tuple position.
///
/// Segments are half-open `[start, end)`, sorted and non-overlapping;
/// `fill` is the token observed outside every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub fill: Token,
    pub segments: Vec<(f64, f64, Token)>,
}

impl Track {
    pub fn empty(fill: Token) -> Self {
        Track { fill, segments: Vec::new() }
    }
}

/// Change-point segmentation of six position timelines.
///
/// Every segment edge of every track is a change point. Each interval
/// between consecutive change points yields one tuple from whatever is
/// active on each track. Intervals where all six positions carry reserved
/// tokens are not emitted, and abutting intervals with equal tuples are
/// merged.
pub fn segment_tracks(tracks: &[Track; POSITIONS]) -> Vec<ActivityTuple> {
    let mut cuts: Vec<f64> = tracks
        .iter()
        .flat_map(|t| t.segments.iter().flat_map(|&(a, b, _)| [a, b]))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut cursor = [0usize; POSITIONS];
    let mut out: Vec<ActivityTuple> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut items = [Token::NONE; POSITIONS];
        for (p, track) in tracks.iter().enumerate() {
            let segs = &track.segments;
            while cursor[p] < segs.len() && segs[cursor[p]].1 <= a {
                cursor[p] += 1;
            }
            items[p] = match segs.get(cursor[p]) {
                Some(&(s, _, tok)) if s <= a => tok,
                _ => track.fill,
            };
        }
        if items.iter().all(|t| t.is_reserved()) {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.items == items && last.t_end == a => last.t_end = b,
            _ => out.push(ActivityTuple::new(items, a, b)),
        }
    }
    out
}

fn hand_track(
    anns: &mut Vec<&HandAnnotation>,
    hand: Hand,
    vocab: &mut Vocabulary,
) -> Result<[Track; 3]> {
    anns.sort_by(|x, y| x.t_start.total_cmp(&y.t_start));
    for w in anns.windows(2) {
        if w[1].t_start < w[0].t_end {
            return Err(Error::Validation(format!(
                "{hand:?} hand annotations overlap: [{}, {}) and [{}, {})",
                w[0].t_start, w[0].t_end, w[1].t_start, w[1].t_end
            )));
        }
    }
    let mut tracks = [Track::empty(Token::NONE), Track::empty(Token::NONE), Track::empty(Token::NONE)];
    for a in anns.iter() {
        a.validate()?;
        let labels = [&a.verb, &a.instrument, &a.structure];
        for (k, kind) in ElementKind::ALL.into_iter().enumerate() {
            let tok = vocab.kind_mut(kind).intern(labels[k])?;
            tracks[k].segments.push((a.t_start, a.t_end, tok));
        }
    }
    Ok(tracks)
}

/// Merges the two hands' annotation streams into a 6-tuple sequence.
///
/// A hand with no active annotation contributes `none` for its three
/// positions; intervals where both hands are idle produce no tuple.
/// Labels are interned into `vocab`.
pub fn merge_hands(
    left: &[HandAnnotation],
    right: &[HandAnnotation],
    vocab: &mut Vocabulary,
) -> Result<Vec<ActivityTuple>> {
    let mut l: Vec<&HandAnnotation> = left.iter().collect();
    let mut r: Vec<&HandAnnotation> = right.iter().collect();
    let [lv, li, ls] = hand_track(&mut l, Hand::Left, vocab)?;
    let [rv, ri, rs] = hand_track(&mut r, Hand::Right, vocab)?;
    Ok(segment_tracks(&[lv, li, ls, rv, ri, rs]))
}
