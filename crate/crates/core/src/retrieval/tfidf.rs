use std::collections::{BTreeMap, BTreeSet};

use crate::util::tokenize;

/// Document frequencies over one owner's memory corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    docs: usize,
    df: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut stats = CorpusStats::default();
        for d in docs {
            stats.docs += 1;
            for t in tokenize(d).into_iter().collect::<BTreeSet<_>>() {
                *stats.df.entry(t).or_default() += 1;
            }
        }
        stats
    }

    pub fn len(&self) -> usize {
        self.docs
    }

    pub fn is_empty(&self) -> bool {
        self.docs == 0
    }

    /// Smoothed inverse document frequency, `ln((N + 1) / (df + 1)) + 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        ((self.docs as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
    }
}

/// Sum of `tf(t, doc) * idf(t)` over distinct query terms present in `doc`.
pub fn tfidf_score(query: &str, doc_content: &str, stats: &CorpusStats) -> f64 {
    let mut tf: BTreeMap<String, usize> = BTreeMap::new();
    for t in tokenize(doc_content) {
        *tf.entry(t).or_default() += 1;
    }
    tokenize(query)
        .into_iter()
        .collect::<BTreeSet<_>>()
        .iter()
        .filter_map(|t| tf.get(t).map(|n| *n as f64 * stats.idf(t)))
        .sum()
}
