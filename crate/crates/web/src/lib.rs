//! Browser demo: points on the unit circle, clustered and sampled in wasm.
//!
//! Each exported function takes plain numbers and returns a JSON string; the
//! page in `www/` draws the result.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use visled::clustering::{cut_at, linkage, DistanceSpec};
use visled::embedding_store::{join_manifest, ClassName, EmbeddingSet, Manifest, ManifestEntry, SampleId, SceneId};
use visled::harness::{generate_synthetic, run_experiment, ExperimentConfig, SyntheticConfig, World};
use visled::pool_manager::init_pool;
use visled::query::{QueryEngine, QueryOptions};
use visled::sampler::Strategy;
use visled::seed;

/// Group sizes of the demo world: a few large groups and a tail of small ones.
const GROUP_SIZES: [usize; 8] = [40, 30, 24, 12, 6, 3, 2, 1];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Point {
    pub id: String,
    pub angle: f64,
    pub group: usize,
}

fn circle_points(seed: u64, spread: f64) -> Result<Vec<Point>, String> {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, spread.max(0.0)).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (g, &size) in GROUP_SIZES.iter().enumerate() {
        let slot = std::f64::consts::TAU / GROUP_SIZES.len() as f64;
        let centre = slot * g as f64 + rng.gen_range(-0.15..0.15) * slot;
        for _ in 0..size {
            out.push(Point { id: format!("p{:03}", out.len()), angle: centre + noise.sample(&mut rng), group: g });
        }
    }
    Ok(out)
}

fn embed(points: &[Point]) -> Result<EmbeddingSet, String> {
    let records = points
        .iter()
        .map(|p| {
            Ok((
                SampleId::new(p.id.as_str()).map_err(|e| e.to_string())?,
                vec![p.angle.cos() as f32, p.angle.sin() as f32],
            ))
        })
        .collect::<Result<Vec<_>, String>>()?;
    EmbeddingSet::new(2, records).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ClusterView {
    points: Vec<Point>,
    /// Cluster index per point, clusters ordered by size then first member.
    labels: Vec<usize>,
    sizes: Vec<usize>,
    heights: Vec<f64>,
}

/// Clusters the demo points and cuts at `threshold`.
pub fn cluster_view(seed: u64, spread: f64, threshold: f64) -> Result<String, String> {
    let points = circle_points(seed, spread)?;
    let set = embed(&points)?;
    let d = linkage(&set, DistanceSpec::default()).map_err(|e| e.to_string())?;
    let mut flat = cut_at(&d, set.ids(), threshold).map_err(|e| e.to_string())?;
    flat.clusters.sort_by_key(|c| c.len());
    let mut labels = vec![0; points.len()];
    for (k, c) in flat.clusters.iter().enumerate() {
        for id in c {
            labels[set.position(id.as_str()).expect("id from this set")] = k;
        }
    }
    let view =
        ClusterView { sizes: flat.clusters.iter().map(Vec::len).collect(), heights: d.heights(), points, labels };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Serialize)]
struct Pick {
    index: usize,
    tier: Option<usize>,
    class: Option<String>,
}

/// One selection round over the demo points, one point per scene. `cwm`
/// mines the generating groups as classes.
pub fn select_view(seed: u64, spread: f64, threshold: f64, strategy: &str, budget: usize) -> Result<String, String> {
    let strategy: Strategy = strategy.parse().map_err(|e: String| e)?;
    let points = circle_points(seed, spread)?;
    let set = embed(&points)?;
    let entries = points
        .iter()
        .map(|p| {
            Ok(ManifestEntry {
                sample_id: SampleId::new(p.id.as_str()).map_err(|e| e.to_string())?,
                scene_id: SceneId::new(format!("scene-{}", p.id)).map_err(|e| e.to_string())?,
                source: "demo".into(),
                true_class: Some(ClassName::new(format!("group-{}", p.group)).map_err(|e| e.to_string())?),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let manifest = Manifest::new(entries);
    let pool = join_manifest(set, &manifest).map_err(|e| e.to_string())?;
    let state = init_pool(&manifest).map_err(|e| e.to_string())?;
    let mut engine = QueryEngine::new(&pool, QueryOptions { threshold, ..Default::default() });
    if strategy == Strategy::Cwm {
        engine = engine.with_true_classes();
    }
    let report = engine.select(&state, strategy, budget.max(1), seed).map_err(|e| e.to_string())?;
    let picks: Vec<Pick> = report
        .selections
        .iter()
        .map(|s| Pick {
            index: pool.scene_index(&s.scene).expect("selected scene is in the pool"),
            tier: s.tier,
            class: s.class.as_ref().map(|c| c.to_string()),
        })
        .collect();
    Ok(serde_json::to_string(&serde_json::json!({ "points": points, "picks": picks })).expect("view serializes"))
}

#[derive(Serialize)]
struct Curve {
    strategy: Strategy,
    rare_mean: Vec<f64>,
    coverage_mean: Vec<f64>,
}

#[derive(Serialize)]
struct CurvesView {
    rare_total: usize,
    rare_classes: Vec<String>,
    budget_per_round: usize,
    curves: Vec<Curve>,
}

/// Per-round rare-class and coverage curves for random, owe and cwm on the
/// default synthetic world.
pub fn curves_view(n_scenes: usize, rounds: u32, trials: usize, seed: u64) -> Result<String, String> {
    let synth =
        generate_synthetic(&SyntheticConfig { n_scenes, seed, ..Default::default() }).map_err(|e| e.to_string())?;
    let world = World::from_synthetic(synth).map_err(|e| e.to_string())?;
    let mut curves = Vec::new();
    let mut head = None;
    for strategy in [Strategy::Random, Strategy::Owe, Strategy::Cwm] {
        let cfg = ExperimentConfig { strategy, rounds, trials, seed, ..Default::default() };
        let r = run_experiment(&cfg, &world).map_err(|e| e.to_string())?;
        curves.push(Curve {
            strategy,
            rare_mean: r.summary.iter().map(|s| s.rare_cumulative.mean).collect(),
            coverage_mean: r.summary.iter().map(|s| s.coverage.mean).collect(),
        });
        head.get_or_insert((
            r.rare_classes.iter().map(|c| r.class_totals[c]).sum(),
            r.rare_classes.iter().map(|c| c.to_string()).collect(),
            r.budget_per_round,
        ));
    }
    let (rare_total, rare_classes, budget_per_round) = head.expect("three strategies ran");
    Ok(serde_json::to_string(&CurvesView { rare_total, rare_classes, budget_per_round, curves })
        .expect("view serializes"))
}

#[wasm_bindgen]
pub fn cluster(seed: u32, spread: f64, threshold: f64) -> Result<String, JsValue> {
    cluster_view(seed.into(), spread, threshold).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn select(seed: u32, spread: f64, threshold: f64, strategy: &str, budget: u32) -> Result<String, JsValue> {
    select_view(seed.into(), spread, threshold, strategy, budget as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn curves(n_scenes: u32, rounds: u32, trials: u32, seed: u32) -> Result<String, JsValue> {
    curves_view(n_scenes as usize, rounds, trials as usize, seed.into()).map_err(|e| JsValue::from_str(&e))
}
