//! JSON-lines annotation files and dataset manifests.
//!
//! One file per intervention, one record per line:
//!
//! ```text
//! {"type":"phase","name":"approach","t_start":0.0,"t_end":310.5}
//! {"type":"activity","actor":"surgeon","hand":"left","verb":"hold","instrument":"classic forceps","structure":"muscle","t_start":10.0,"t_end":14.5}
//! ```
//!
//! A manifest (`manifest.json`) names the dataset and lists its
//! intervention files with site and surgeon metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{merge_hands, Dataset, Hand, HandAnnotation, Intervention, Phase, Token, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Activity {
        actor: String,
        hand: Hand,
        verb: String,
        instrument: String,
        structure: String,
        t_start: f64,
        t_end: f64,
    },
    Phase {
        name: String,
        t_start: f64,
        t_end: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationFile {
    pub activities: Vec<HandAnnotation>,
    pub phases: Vec<Phase>,
}

impl AnnotationFile {
    pub fn hand(&self, hand: Hand) -> Vec<HandAnnotation> {
        self.activities.iter().filter(|a| a.hand == hand).cloned().collect()
    }
}

pub fn parse_annotations(content: &str) -> Result<AnnotationFile> {
    let mut file = AnnotationFile::default();
    for (k, line) in content.lines().enumerate() {
        let line_no = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        match rec {
            Record::Activity { actor, hand, verb, instrument, structure, t_start, t_end } => {
                let a = HandAnnotation { actor, hand, verb, instrument, structure, t_start, t_end };
                a.validate()
                    .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
                file.activities.push(a);
            }
            Record::Phase { name, t_start, t_end } => {
                if !(t_end > t_start) {
                    return Err(Error::Validation(format!(
                        "line {line_no}: phase `{name}` has t_end {t_end} <= t_start {t_start}"
                    )));
                }
                file.phases.push(Phase { name, t_start, t_end });
            }
        }
    }
    Ok(file)
}

/// Serializes an intervention into annotation lines.
///
/// Each hand's consecutive, abutting tuples with an identical triple are
/// written as one annotation; idle (`none`) triples are omitted.
pub fn write_annotations(iv: &Intervention, vocab: &Vocabulary, actor: &str) -> Result<String> {
    let mut records: Vec<(f64, usize, Record)> = Vec::new();
    for hand in [Hand::Left, Hand::Right] {
        let mut run: Option<([Token; 3], f64, f64)> = None;
        let mut flush = |run: Option<([Token; 3], f64, f64)>| -> Result<()> {
            if let Some((triple, t0, t1)) = run {
                if triple == [Token::NONE; 3] {
                    return Ok(());
                }
                let o = hand.index() * 3;
                let labels: Vec<&str> = (0..3).map(|k| vocab.label(o + k, triple[k])).collect();
                if triple.iter().any(|t| t.is_reserved()) {
                    return Err(Error::Validation(format!(
                        "{}: partially observed triple {:?} cannot be written",
                        iv.id, labels
                    )));
                }
                records.push((
                    t0,
                    hand.index(),
                    Record::Activity {
                        actor: actor.to_owned(),
                        hand,
                        verb: labels[0].to_owned(),
                        instrument: labels[1].to_owned(),
                        structure: labels[2].to_owned(),
                        t_start: t0,
                        t_end: t1,
                    },
                ));
            }
            Ok(())
        };
        for a in &iv.activities {
            let triple = a.hand(hand);
            run = match run {
                Some((tr, t0, t1)) if tr == triple && t1 == a.t_start => Some((tr, t0, a.t_end)),
                prev => {
                    flush(prev)?;
                    Some((triple, a.t_start, a.t_end))
                }
            };
        }
        flush(run)?;
    }
    records.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = String::new();
    for p in &iv.phases {
        let rec = Record::Phase { name: p.name.clone(), t_start: p.t_start, t_end: p.t_end };
        writeln!(out, "{}", serde_json::to_string(&rec)?).unwrap();
    }
    for (_, _, rec) in &records {
        writeln!(out, "{}", serde_json::to_string(rec)?).unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub site: String,
    pub surgeon_id: String,
    /// Path of the annotation file, relative to the manifest.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub interventions: Vec<ManifestEntry>,
}

/// Loads every intervention listed in a manifest into one dataset with a
/// shared vocabulary.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut vocab = Vocabulary::default();
    let mut interventions = Vec::with_capacity(manifest.interventions.len());
    for entry in &manifest.interventions {
        let path = dir.join(&entry.file);
        let content = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file = parse_annotations(&content).map_err(|e| match e {
            Error::Parse { line, message } => {
                Error::Parse { line, message: format!("{}: {message}", path.display()) }
            }
            other => other,
        })?;
        let activities = merge_hands(&file.hand(Hand::Left), &file.hand(Hand::Right), &mut vocab)?;
        interventions.push(Intervention {
            id: entry.id.clone(),
            site: entry.site.clone(),
            surgeon_id: entry.surgeon_id.clone(),
            phases: file.phases,
            activities,
        });
    }
    let d = Dataset { name: manifest.name, interventions, vocab };
    d.validate()?;
    Ok(d)
}

/// Writes `manifest.json` plus one `<id>.jsonl` per intervention into `dir`.
pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(d.interventions.len());
    for iv in &d.interventions {
        let file = format!("{}.jsonl", iv.id);
        let path = dir.join(&file);
        let text = write_annotations(iv, &d.vocab, "surgeon")?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestEntry {
            id: iv.id.clone(),
            site: iv.site.clone(),
            surgeon_id: iv.surgeon_id.clone(),
            file,
        });
    }
    let manifest = Manifest { name: d.name.clone(), interventions: entries };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
