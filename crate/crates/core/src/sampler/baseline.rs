use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::BufRead;

use rand::seq::SliceRandom;
use serde::Deserialize;

use super::{PoolState, SampleError, Selection, SelectionReport, Strategy};
use crate::embedding_store::{IndexedPool, SampleId, SceneId};
use crate::seed;

fn plain(scene: SceneId) -> Selection {
    Selection { scene, via_sample: None, tier: None, class: None }
}

/// Uniform sample of unlabeled scenes without replacement.
pub fn select_random(
    pool: &IndexedPool,
    state: &PoolState,
    budget: usize,
    seed: u64,
) -> Result<SelectionReport, SampleError> {
    if budget == 0 {
        return Err(SampleError::BudgetNonPositive);
    }
    let mut candidates: Vec<&SceneId> = pool.scenes().iter().filter(|s| !state.is_labeled(s)).collect();
    let mut rng = seed::rng(seed);
    let (picked, _) = candidates.partial_shuffle(&mut rng, budget);
    let selections: Vec<Selection> = picked.iter().map(|s| plain((*s).clone())).collect();
    Ok(SelectionReport {
        strategy: Strategy::Random,
        seed,
        budget,
        exhausted: selections.len() < budget,
        selections,
        quota: None,
    })
}

/// Ranks unlabeled scenes by their best sample score (descending, ties to the
/// smallest scene id) and takes the top `budget`.
pub fn select_external_score(
    pool: &IndexedPool,
    state: &PoolState,
    scores: &HashMap<SampleId, f64>,
    budget: usize,
) -> Result<SelectionReport, SampleError> {
    if budget == 0 {
        return Err(SampleError::BudgetNonPositive);
    }
    let mut ranked: Vec<(f64, &SceneId, &SampleId)> = Vec::new();
    for (scene, samples) in pool.scene_to_samples() {
        if state.is_labeled(scene) || samples.is_empty() {
            continue;
        }
        let mut best: Option<(f64, &SampleId)> = None;
        for &i in samples {
            let id = pool.set().id(i);
            let s = *scores.get(id).ok_or_else(|| SampleError::MissingScore(id.clone()))?;
            if !s.is_finite() {
                return Err(SampleError::NonFiniteScore(id.clone()));
            }
            best = match best {
                Some((b, bid)) if b > s || (b == s && bid < id) => Some((b, bid)),
                _ => Some((s, id)),
            };
        }
        let (s, id) = best.unwrap();
        ranked.push((s, scene, id));
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1)));
    let selections: Vec<Selection> = ranked
        .into_iter()
        .take(budget)
        .map(|(_, scene, id)| Selection { via_sample: Some(id.clone()), ..plain(scene.clone()) })
        .collect();
    Ok(SelectionReport {
        strategy: Strategy::External,
        seed: 0,
        budget,
        exhausted: selections.len() < budget,
        selections,
        quota: None,
    })
}

#[derive(Deserialize)]
struct ScoreLine {
    sample_id: SampleId,
    score: f64,
}

/// Reads `{"sample_id", "score"}` JSON lines.
pub fn read_scores_jsonl(r: impl BufRead) -> Result<HashMap<SampleId, f64>, SampleError> {
    let mut out = HashMap::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| SampleError::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: ScoreLine =
            serde_json::from_str(&line).map_err(|e| SampleError::Parse(format!("line {}: {e}", n + 1)))?;
        out.insert(l.sample_id, l.score);
    }
    Ok(out)
}
