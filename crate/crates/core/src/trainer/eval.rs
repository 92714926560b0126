use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{ExternalTags, McqInstance, PosTagger, QuestionType};
use crate::embedder::EncodedInstance;
use crate::error::{Error, Result};
use crate::model::{argmax, CsaModel};
use crate::tensor::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QtypeStats {
    pub qtype: QuestionType,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    /// Question types present in the data, in a fixed order.
    pub by_qtype: Vec<QtypeStats>,
    pub predictions: Vec<usize>,
}

/// Scores predicted indices against `(answer, qtype)` pairs.
pub fn score_predictions(predictions: Vec<usize>, gold: &[(usize, QuestionType)]) -> Evaluation {
    let mut by_qtype: Vec<QtypeStats> = QuestionType::ALL
        .iter()
        .map(|&qtype| QtypeStats {
            qtype,
            n: 0,
            correct: 0,
            accuracy: 0.0,
        })
        .collect();
    let mut correct = 0;
    for (&p, &(answer, qt)) in predictions.iter().zip(gold) {
        let s = &mut by_qtype[QuestionType::ALL.iter().position(|q| *q == qt).unwrap_or(7)];
        s.n += 1;
        if p == answer {
            s.correct += 1;
            correct += 1;
        }
    }
    by_qtype.retain(|s| s.n > 0);
    for s in &mut by_qtype {
        s.accuracy = s.correct as f64 / s.n as f64;
    }
    let total = gold.len();
    Evaluation {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        total,
        correct,
        by_qtype,
        predictions,
    }
}

/// Evaluation-mode accuracy with argmax ties broken toward the lowest index.
pub fn evaluate<T: Real>(model: &CsaModel<T>, data: &[EncodedInstance<T>]) -> Result<Evaluation> {
    let predictions = data
        .par_iter()
        .map(|inst| model.predict(inst).map(|p| argmax(&p)))
        .collect::<Result<Vec<_>>>()?;
    let gold: Vec<_> = data.iter().map(|i| (i.answer, i.qtype)).collect();
    Ok(score_predictions(predictions, &gold))
}

/// Plurality vote over per-model distributions. Ties go to the candidate
/// with the highest mean probability among the tied ones, then to the
/// lowest index.
pub fn ensemble_vote(distributions: &[Vec<f64>]) -> Result<usize> {
    let n = distributions
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Config("ensemble needs at least one model".into()))?;
    if distributions.iter().any(|d| d.len() != n) {
        return Err(Error::Config("ensemble members disagree on the number of candidates".into()));
    }
    let mut votes = vec![0usize; n];
    let mut mean = vec![0.0; n];
    for d in distributions {
        votes[argmax(d)] += 1;
        for (m, p) in mean.iter_mut().zip(d) {
            *m += p / distributions.len() as f64;
        }
    }
    let top = *votes.iter().max().unwrap_or(&0);
    let mut best: Option<usize> = None;
    for i in (0..n).filter(|&i| votes[i] == top) {
        if best.map_or(true, |b| mean[i] > mean[b]) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::Config("ensemble over zero candidates".into()))
}

/// Majority-vote prediction of several models for one raw instance; each
/// model encodes the instance with its own vocabulary.
pub fn ensemble_predict<T: Real>(
    models: &[CsaModel<T>],
    inst: &McqInstance,
    tagger: &dyn PosTagger,
    external: Option<&ExternalTags>,
) -> Result<usize> {
    let dists = models
        .iter()
        .map(|m| {
            let enc = m.encode(inst, tagger, external, None)?;
            Ok(m.predict(&enc)?.iter().map(|p| p.as_f64()).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ensemble_vote(&dists)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_rules() {
        let a = vec![0.7, 0.2, 0.1];
        let b = vec![0.2, 0.7, 0.1];
        assert_eq!(ensemble_vote(&[a.clone(), a.clone(), b.clone()]).unwrap(), 0);
        // Tie between A and B; mean probabilities 0.6 vs 0.55.
        let x = vec![0.75, 0.25];
        let y = vec![0.45, 0.55];
        assert_eq!(ensemble_vote(&[x.clone(), y.clone()]).unwrap(), 0);
        assert_eq!(ensemble_vote(&[y, x]).unwrap(), 0);
        assert_eq!(ensemble_vote(&vec![b.clone(); 7]).unwrap(), 1);
        // Exact tie in votes and means: lowest index.
        assert_eq!(ensemble_vote(&[vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap(), 0);
        assert!(ensemble_vote(&[vec![0.5, 0.5], vec![0.2, 0.3, 0.5]]).is_err());
        assert!(ensemble_vote(&[]).is_err());
    }

    #[test]
    fn scoring_partitions_by_qtype() {
        let gold = [
            (0, QuestionType::Why),
            (1, QuestionType::What),
            (0, QuestionType::Why),
            (2, QuestionType::Other),
        ];
        let e = score_predictions(vec![0, 0, 0, 2], &gold);
        assert_eq!(e.correct, 3);
        assert_eq!(e.accuracy, 0.75);
        assert_eq!(e.by_qtype.iter().map(|s| s.n).sum::<usize>(), 4);
        let why = e.by_qtype.iter().find(|s| s.qtype == QuestionType::Why).unwrap();
        assert_eq!((why.n, why.accuracy), (2, 1.0));
        assert_eq!(e.by_qtype[0].qtype, QuestionType::What);
    }
}
