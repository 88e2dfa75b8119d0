//! Labeled-pool bookkeeping across acquisition rounds and the append-only
//! ledger that makes a run replayable.
//!
//! The ledger is JSON lines: a header `{"fingerprint","total_scenes"}` followed
//! by one `{"round","strategy","seed","budget","scenes","timestamp"}` object per
//! round.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding_store::{Manifest, SceneId};
use crate::sampler::{PoolState, SelectionReport, Strategy};

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("scene {0} is already labeled")]
    OverlapWithLabeled(SceneId),
    #[error("scene {0} is not part of the pool")]
    UnknownScene(SceneId),
    #[error("scene {0} appears twice in one round")]
    DuplicateScene(SceneId),
    #[error("ledger fingerprint {ledger} does not match manifest {manifest}")]
    FingerprintMismatch { ledger: String, manifest: String },
    #[error("ledger round {found} where {expected} was expected")]
    NonContiguousRounds { expected: u32, found: u32 },
    #[error("invalid ledger: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub fingerprint: String,
    pub total_scenes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRound {
    pub round: u32,
    pub strategy: Strategy,
    pub seed: u64,
    pub budget: usize,
    pub scenes: Vec<SceneId>,
    /// Seconds since the Unix epoch, supplied by the caller.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    pub header: LedgerHeader,
    pub rounds: Vec<LedgerRound>,
}

impl Ledger {
    pub fn new(manifest: &Manifest) -> Self {
        Self {
            header: LedgerHeader { fingerprint: manifest.fingerprint(), total_scenes: manifest.scenes().len() },
            rounds: Vec::new(),
        }
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, PoolError> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let parse_err = |n: usize, e: serde_json::Error| PoolError::Parse(format!("line {}: {e}", n + 1));
        let (n, first) = lines.next().ok_or_else(|| PoolError::Parse("missing header line".into()))?;
        let header = serde_json::from_str(&first?).map_err(|e| parse_err(n, e))?;
        let mut rounds = Vec::new();
        for (n, line) in lines {
            rounds.push(serde_json::from_str(&line?).map_err(|e| parse_err(n, e))?);
        }
        Ok(Self { header, rounds })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        let f = fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PoolError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// Fresh state: every distinct scene unlabeled, round 0.
pub fn init_pool(manifest: &Manifest) -> Result<PoolState, PoolError> {
    if manifest.is_empty() {
        return Err(PoolError::EmptyManifest);
    }
    Ok(PoolState::new(manifest.scenes()))
}

fn apply(state: &PoolState, scenes: &[SceneId]) -> Result<PoolState, PoolError> {
    let mut next = state.clone();
    let mut this_round = BTreeSet::new();
    for s in scenes {
        if state.labeled.contains(s) {
            return Err(PoolError::OverlapWithLabeled(s.clone()));
        }
        if !state.all_scenes.contains(s) {
            return Err(PoolError::UnknownScene(s.clone()));
        }
        if !this_round.insert(s) {
            return Err(PoolError::DuplicateScene(s.clone()));
        }
        next.labeled.insert(s.clone());
    }
    next.round += 1;
    Ok(next)
}

/// Labels the report's scenes, bumps the round counter and appends a ledger
/// record.
pub fn advance_round(
    state: &PoolState,
    report: &SelectionReport,
    ledger: &Ledger,
    timestamp: u64,
) -> Result<(PoolState, Ledger), PoolError> {
    let scenes: Vec<SceneId> = report.scenes().cloned().collect();
    let next = apply(state, &scenes)?;
    let mut ledger = ledger.clone();
    ledger.rounds.push(LedgerRound {
        round: next.round,
        strategy: report.strategy,
        seed: report.seed,
        budget: report.budget,
        scenes,
        timestamp,
    });
    Ok((next, ledger))
}

/// Rebuilds the pool state a ledger describes.
pub fn replay(ledger: &Ledger, manifest: &Manifest) -> Result<PoolState, PoolError> {
    let fp = manifest.fingerprint();
    if ledger.header.fingerprint != fp {
        return Err(PoolError::FingerprintMismatch { ledger: ledger.header.fingerprint.clone(), manifest: fp });
    }
    let mut state = init_pool(manifest)?;
    for r in &ledger.rounds {
        if r.round != state.round + 1 {
            return Err(PoolError::NonContiguousRounds { expected: state.round + 1, found: r.round });
        }
        state = apply(&state, &r.scenes)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_store::{ManifestEntry, SampleId};
    use crate::sampler::Selection;

    fn manifest(n_scenes: usize, per_scene: usize) -> Manifest {
        let mut entries = Vec::new();
        for s in 0..n_scenes {
            for k in 0..per_scene {
                entries.push(ManifestEntry {
                    sample_id: SampleId::new(format!("scene-{s:04}/{k}")).unwrap(),
                    scene_id: SceneId::new(format!("scene-{s:04}")).unwrap(),
                    source: "CAM_FRONT".into(),
                    true_class: None,
                });
            }
        }
        Manifest::new(entries)
    }

    fn report(scenes: impl IntoIterator<Item = String>, budget: usize) -> SelectionReport {
        SelectionReport {
            strategy: Strategy::Random,
            seed: 1,
            budget,
            selections: scenes
                .into_iter()
                .map(|s| Selection { scene: SceneId::new(s).unwrap(), via_sample: None, tier: None, class: None })
                .collect(),
            exhausted: false,
            quota: None,
        }
    }

    fn scene_range(r: std::ops::Range<usize>) -> impl Iterator<Item = String> {
        r.map(|s| format!("scene-{s:04}"))
    }

    #[test]
    fn init_counts_distinct_scenes() {
        let st = init_pool(&manifest(1000, 1)).unwrap();
        assert_eq!(st.all_scenes.len(), 1000);
        assert!(st.labeled.is_empty());
        assert_eq!(init_pool(&manifest(1, 2)).unwrap().all_scenes.len(), 1);
        assert!(matches!(init_pool(&Manifest::default()), Err(PoolError::EmptyManifest)));
    }

    #[test]
    fn five_rounds_of_ten_percent() {
        let m = manifest(1000, 1);
        let mut st = init_pool(&m).unwrap();
        let mut ledger = Ledger::new(&m);
        for r in 0..5 {
            let rep = report(scene_range(r * 100..(r + 1) * 100), 100);
            (st, ledger) = advance_round(&st, &rep, &ledger, 0).unwrap();
            if r == 0 {
                assert_eq!(st.labeled.len(), 100);
                assert_eq!(st.round, 1);
            }
        }
        assert_eq!(st.labeled.len(), 500);
        assert_eq!(replay(&ledger, &m).unwrap(), st);
    }

    #[test]
    fn empty_report_only_bumps_round() {
        let m = manifest(3, 1);
        let st = init_pool(&m).unwrap();
        let (next, ledger) = advance_round(&st, &report(Vec::new(), 1), &Ledger::new(&m), 5).unwrap();
        assert_eq!(next.labeled, st.labeled);
        assert_eq!(next.round, 1);
        assert_eq!(ledger.rounds[0].timestamp, 5);
    }

    #[test]
    fn overlap_is_rejected() {
        let m = manifest(3, 1);
        let st = init_pool(&m).unwrap();
        let l = Ledger::new(&m);
        let (st, l) = advance_round(&st, &report(scene_range(0..1), 1), &l, 0).unwrap();
        assert!(matches!(
            advance_round(&st, &report(scene_range(0..2), 2), &l, 0),
            Err(PoolError::OverlapWithLabeled(_))
        ));
        assert!(matches!(advance_round(&st, &report(["nope".to_string()], 1), &l, 0), Err(PoolError::UnknownScene(_))));
    }

    #[test]
    fn replay_checks_fingerprint_and_contiguity() {
        let m = manifest(10, 1);
        let st = init_pool(&m).unwrap();
        let mut l = Ledger::new(&m);
        let mut s = st;
        for r in 0..3 {
            (s, l) = advance_round(&s, &report(scene_range(r * 2..r * 2 + 2), 2), &l, 0).unwrap();
        }
        let back = replay(&l, &m).unwrap();
        assert_eq!(back.labeled.len(), 6);

        let mut tampered = l.clone();
        tampered.header.fingerprint.replace_range(0..1, "x");
        assert!(matches!(replay(&tampered, &m), Err(PoolError::FingerprintMismatch { .. })));

        let mut gap = l.clone();
        gap.rounds[1].round = 5;
        assert!(matches!(replay(&gap, &m), Err(PoolError::NonContiguousRounds { expected: 2, found: 5 })));
    }

    #[test]
    fn ledger_jsonl_round_trip() {
        let m = manifest(4, 1);
        let st = init_pool(&m).unwrap();
        let (_, l) = advance_round(&st, &report(scene_range(1..3), 2), &Ledger::new(&m), 1_700_000_000).unwrap();
        let bytes = l.to_jsonl();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("{\"fingerprint\":"));
        assert_eq!(
            lines[1],
            r#"{"round":1,"strategy":"random","seed":1,"budget":2,"scenes":["scene-0001","scene-0002"],"timestamp":1700000000}"#
        );
        assert_eq!(Ledger::read_jsonl(&bytes[..]).unwrap(), l);
        assert!(Ledger::read_jsonl(&b""[..]).is_err());
    }
}
