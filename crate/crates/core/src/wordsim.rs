//! Word-similarity scoring: cosine similarity of embeddings against human
//! judgments, summarized by Spearman rank correlation.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::SimilarityPair;
use crate::linalg::DenseMatrix;

/// `uᵀv / (‖u‖ ‖v‖)`, clamped to `[−1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("cosine", format!("length {}", u.len()), format!("length {}", v.len())));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Undefined("cosine similarity with a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of the average ranks of `a` and `b`.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("spearman", format!("length {}", a.len()), format!("length {}", b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!("rank correlation needs 2 points, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Undefined("rank correlation of NaN values".into()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (a.len() + 1) as f64 / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("rank correlation with a constant input".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Vocabulary with optional case-folded lookup.
#[derive(Clone, Debug)]
pub struct Embeddings {
    words: Vec<String>,
    vectors: DenseMatrix,
    index: HashMap<String, usize>,
    fold_case: bool,
}

impl Embeddings {
    /// With `fold_case`, words that collide after lowercasing resolve to the first one listed.
    pub fn new(words: Vec<String>, vectors: DenseMatrix, fold_case: bool) -> Result<Self> {
        if words.len() != vectors.rows() {
            return Err(Error::shape("Embeddings", format!("{} rows", words.len()), format!("{} rows", vectors.rows())));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            let key = if fold_case { w.to_lowercase() } else { w.clone() };
            index.entry(key).or_insert(i);
        }
        Ok(Embeddings {
            words,
            vectors,
            index,
            fold_case,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        let row = if self.fold_case {
            self.index.get(&word.to_lowercase())
        } else {
            self.index.get(word)
        };
        row.map(|&r| self.vectors.row(r))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub evaluated: usize,
    /// Pairs with an out-of-vocabulary word or a zero vector.
    pub skipped: usize,
    pub spearman: f64,
}

/// Scores every in-vocabulary pair by cosine similarity and correlates with
/// the human scores. The result does not depend on the pair order.
pub fn evaluate(embeddings: &Embeddings, task_name: &str, pairs: &[SimilarityPair]) -> Result<TaskReport> {
    let mut scored: Vec<(&SimilarityPair, f64)> = Vec::with_capacity(pairs.len());
    for p in pairs {
        if let (Some(u), Some(v)) = (embeddings.get(&p.word1), embeddings.get(&p.word2)) {
            if let Ok(sim) = cosine(u, v) {
                scored.push((p, sim));
            }
        }
    }
    if scored.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "task '{task_name}': {} of {} pairs evaluable, need at least 2",
            scored.len(),
            pairs.len()
        )));
    }
    // canonical order makes the floating-point sums order independent
    scored.sort_by(|a, b| {
        (&a.0.word1, &a.0.word2)
            .cmp(&(&b.0.word1, &b.0.word2))
            .then(a.0.score.total_cmp(&b.0.score))
            .then(a.1.total_cmp(&b.1))
    });
    let sims: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let human: Vec<f64> = scored.iter().map(|s| s.0.score).collect();
    Ok(TaskReport {
        task: task_name.to_string(),
        evaluated: scored.len(),
        skipped: pairs.len() - scored.len(),
        spearman: spearman(&sims, &human)?,
    })
}

pub fn average(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Plain-text table: one row per task, then `Average` and `Median` rows.
pub fn report_table(reports: &[TaskReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.task.len())
        .chain(["Average".len()])
        .max()
        .unwrap_or(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>9}  {:>7}  {:>7}", "task", "spearman", "pairs", "skipped");
    for r in reports {
        let _ = writeln!(out, "{:<width$}  {:>9.4}  {:>7}  {:>7}", r.task, r.spearman, r.evaluated, r.skipped);
    }
    let scores: Vec<f64> = reports.iter().map(|r| r.spearman).collect();
    if !scores.is_empty() {
        let _ = writeln!(out, "{:<width$}  {:>9.4}", "Average", average(&scores));
        let _ = writeln!(out, "{:<width$}  {:>9.4}", "Median", median(&scores));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str, s: f64) -> SimilarityPair {
        SimilarityPair {
            word1: a.into(),
            word2: b.into(),
            score: s,
        }
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Undefined(_))));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Undefined(_))));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn evaluate_counts_and_case_folding() {
        let words = vec!["Cat".to_string(), "dog".into(), "car".into()];
        let vecs = DenseMatrix::from_rows(&[[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]]);
        let emb = Embeddings::new(words.clone(), vecs.clone(), true).unwrap();
        let task = vec![pair("cat", "dog", 9.0), pair("CAT", "car", 1.0), pair("dog", "car", 3.0), pair("cat", "zebra", 5.0)];
        let rep = evaluate(&emb, "toy", &task).unwrap();
        assert_eq!((rep.evaluated, rep.skipped), (3, 1));
        assert_eq!(rep.spearman, 1.0);

        let strict = Embeddings::new(words, vecs, false).unwrap();
        assert!(strict.get("cat").is_none());
        assert!(matches!(evaluate(&strict, "toy", &task[1..2]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn table_has_summary_rows() {
        let reps = vec![
            TaskReport { task: "a".into(), evaluated: 3, skipped: 0, spearman: 0.5 },
            TaskReport { task: "b".into(), evaluated: 3, skipped: 1, spearman: 0.7 },
        ];
        let t = report_table(&reps);
        assert!(t.contains("Average") && t.contains("0.6000") && t.contains("Median"));
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
