use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::workflow::{Token, POSITIONS};

/// Joint activity classes: the distinct 6-tuples seen in training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[Token; POSITIONS]>", into = "Vec<[Token; POSITIONS]>")]
pub struct ClassSet {
    tuples: Vec<[Token; POSITIONS]>,
    index: HashMap<[Token; POSITIONS], usize>,
}

impl ClassSet {
    /// Classes in order of first appearance.
    pub fn from_tuples<'a>(items: impl IntoIterator<Item = &'a [Token; POSITIONS]>) -> Self {
        let mut set = ClassSet::default();
        for t in items {
            set.insert(*t);
        }
        set
    }

    pub fn insert(&mut self, t: [Token; POSITIONS]) -> usize {
        if let Some(&k) = self.index.get(&t) {
            return k;
        }
        self.tuples.push(t);
        self.index.insert(t, self.tuples.len() - 1);
        self.tuples.len() - 1
    }

    pub fn class_of(&self, t: &[Token; POSITIONS]) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn tuple(&self, class: usize) -> &[Token; POSITIONS] {
        &self.tuples[class]
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

impl From<Vec<[Token; POSITIONS]>> for ClassSet {
    fn from(v: Vec<[Token; POSITIONS]>) -> Self {
        ClassSet::from_tuples(v.iter())
    }
}

impl From<ClassSet> for Vec<[Token; POSITIONS]> {
    fn from(c: ClassSet) -> Self {
        c.tuples
    }
}
