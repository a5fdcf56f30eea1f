//! Acceptance suite: one test per criterion, each printing a PASS or FAIL
//! line to stderr (written directly, so it shows without `--nocapture`).
//!
//! Expected values come from oracles written here: ray-casting containment,
//! shoelace areas, binomial bounds, hand-inverted curves and closed-form
//! camera axes. Library code is only the thing under test.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use asda::capture::camera::project_point;
use asda::capture::fov::resolve_fov_obstacles;
use asda::capture::{render_frame, CameraIntrinsics, FrameAnnotation, Manifest, ObjectAnnotation, RasterImage};
use asda::cli::{cmd_generate, GenerateSummary, RunConfig};
use asda::distribution::{sample_locations, DistributionLayer, LayerSource, SamplingPattern, SpawnRegion};
use asda::dsl::{bind_script, dry_run, parse_prompt, parse_strategy_script};
use asda::optimize::{
    decide_action, estimate_data_requirement, fit_scaling_law, run_loc_loop, Decision, LocConfig, LocStatus, ScalingLawParams,
    SearchSpace, SyntheticOracle,
};
use asda::postproc::ops::{flip_image, rotate_image, warp_image, zoom_image, Lattice};
use asda::postproc::{AugmentOpSpec, PostPipeline};
use asda::preproc::ops::sample_shadow_offset;
use asda::preproc::{Layer, OperationSpec, Pipeline, SceneContext};
use asda::rng::{uniform, StreamKey};
use asda::scene::{
    load_scene_specs, Aabb, AssetInstance, AugmentedScene, FovRule, GlobalState, InstanceRole, Material, SceneSpecification,
    TrajectoryPose, Vec3,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;

fn criterion(n: u32, title: &str, f: impl FnOnce() -> Check) {
    let outcome = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d.as_str()),
        Err(d) => ("FAIL", d.as_str()),
    };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2} [{tag}] {title}: {detail}");
    if let Err(d) = outcome {
        panic!("criterion {n} failed: {d}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn scenes() -> Vec<SceneSpecification> {
    load_scene_specs(fixtures().join("scenes")).expect("fixture scenes load")
}

fn scene(id: &str) -> SceneSpecification {
    scenes().into_iter().find(|s| s.scene_id == id).expect("fixture scene")
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: landing-pad replay and determinism
// ---------------------------------------------------------------------------

struct Replay {
    dir: tempfile::TempDir,
    summary: GenerateSummary,
    seconds: f64,
}

fn replay(workers: usize) -> Replay {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(fixtures().join("scripts/landing_pad_replay.asda"), fixtures().join("scenes/SEA.json"), dir.path(), 42);
    cfg.width = Some(256);
    cfg.height = Some(256);
    cfg.workers = workers;
    let t = Instant::now();
    let summary = cmd_generate(&cfg).expect("replay runs");
    Replay { dir, summary, seconds: t.elapsed().as_secs_f64() }
}

fn first_replay() -> &'static Replay {
    static FIRST: OnceLock<Replay> = OnceLock::new();
    FIRST.get_or_init(|| replay(1))
}

/// Every file under `root`, keyed by relative path.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn criterion_01_landing_pad_replay() {
    criterion(1, "landing-pad replay", || {
        let r = first_replay();
        let manifest = Manifest::load(r.dir.path()).map_err(|e| e.to_string())?;
        let records = manifest.records.len();
        ensure(records >= 150, || format!("{records} records, need >= 150"))?;
        ensure(r.seconds < 120.0, || format!("took {:.1} s", r.seconds))?;
        ensure(r.summary.failed_variations == 0, || format!("{} failed variations", r.summary.failed_variations))?;
        let mut good = 0;
        for rec in &manifest.records {
            let text = std::fs::read_to_string(r.dir.path().join(&rec.annotation)).unwrap();
            let ann: FrameAnnotation = serde_json::from_str(&text).unwrap();
            let nonempty = |o: &ObjectAnnotation| o.bbox[2] > o.bbox[0] && o.bbox[3] > o.bbox[1];
            if !ann.objects.is_empty() && ann.objects.iter().all(nonempty) {
                good += 1;
            }
            let img = RasterImage::read_ppm(&r.dir.path().join(&rec.image)).unwrap();
            ensure((img.width, img.height) == (256, 256), || format!("{} is {}x{}", rec.image, img.width, img.height))?;
        }
        let share = good as f64 / records as f64;
        ensure(share >= 0.9, || format!("only {:.1}% of frames have nonempty main boxes", share * 100.0))?;
        Ok(format!("{records} records in {:.1} s, {:.1}% frames with nonempty main boxes", r.seconds, share * 100.0))
    });
}

#[test]
fn criterion_02_determinism() {
    criterion(2, "byte-identical reruns", || {
        let a = tree(first_replay().dir.path());
        let b = tree(replay(1).dir.path());
        let c = tree(replay(8).dir.path());
        let diff = |x: &BTreeMap<String, Vec<u8>>, y: &BTreeMap<String, Vec<u8>>| {
            let keys: Vec<_> = x.keys().chain(y.keys()).filter(|k| x.get(*k) != y.get(*k)).take(3).cloned().collect();
            keys
        };
        ensure(a.len() > 300, || format!("only {} files written", a.len()))?;
        let ab = diff(&a, &b);
        ensure(ab.is_empty(), || format!("same-seed reruns differ in {ab:?}"))?;
        let ac = diff(&a, &c);
        ensure(ac.is_empty(), || format!("workers 1 vs 8 differ in {ac:?}"))?;
        Ok(format!("{} files identical across 3 runs (workers 1, 1, 8)", a.len()))
    });
}

// ---------------------------------------------------------------------------
// Criterion 3: spawn points
// ---------------------------------------------------------------------------

/// Ray casting along +x, written independently of the library.
fn inside(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut c = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                c = !c;
            }
        }
    }
    c
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1]).sum::<f64>().abs() / 2.0
}

/// Irregular regions of unequal area: a triangle, an L, a thin sliver and a
/// concave arrow.
fn irregular_layer() -> DistributionLayer {
    let shapes: Vec<Vec<[f64; 2]>> = vec![
        vec![[0.0, 0.0], [40.0, 0.0], [10.0, 30.0]],
        vec![[100.0, 0.0], [160.0, 0.0], [160.0, 20.0], [120.0, 20.0], [120.0, 60.0], [100.0, 60.0]],
        vec![[0.0, 100.0], [80.0, 100.0], [80.0, 103.0], [0.0, 103.0]],
        vec![[200.0, 0.0], [240.0, 20.0], [200.0, 40.0], [215.0, 20.0]],
    ];
    let regions = shapes
        .into_iter()
        .enumerate()
        .map(|(i, p)| SpawnRegion::new(&format!("r{i}"), p, 3.0, Default::default()).unwrap())
        .collect();
    DistributionLayer::new("probe", regions, LayerSource::SceneGraph).unwrap()
}

#[test]
fn criterion_03_distribution_validity() {
    criterion(3, "spawn points in polygons, area-weighted regions", || {
        let mut layers = Vec::new();
        for (id, class, asset) in [("SEA", "building", "landing_pad"), ("SD", "building", "landing_pad"), ("WINDFARM", "terrain", "wind_tourbine")] {
            let ctx = SceneContext::new(scene(id));
            layers.push((id.to_string(), ctx.layer(class, &[], asset).map_err(|e| e.to_string())?));
        }
        layers.push(("irregular".into(), irregular_layer()));

        let per_layer = 2500;
        let (mut total, mut worst_p) = (0, 1.0f64);
        for (k, (name, layer)) in layers.iter().enumerate() {
            let mut rng = StreamKey::new(2024).with_u64(k as u64).stream();
            let points = sample_locations(layer, per_layer, &SamplingPattern::Uniform, 0.0, &mut rng).map_err(|e| e.to_string())?;
            ensure(points.len() == per_layer, || format!("{name}: {} points", points.len()))?;
            let mut counts = vec![0usize; layer.regions.len()];
            for sp in &points {
                let region = &layer.regions[sp.region];
                let p = [sp.position.x, sp.position.z];
                ensure(inside(&region.polygon, p), || format!("{name}: {p:?} outside {}", region.region_id))?;
                ensure((sp.position.y - region.elevation).abs() < 1e-9, || format!("{name}: wrong elevation"))?;
                counts[sp.region] += 1;
            }
            total += points.len();

            let areas: Vec<f64> = layer.regions.iter().map(|r| shoelace(&r.polygon)).collect();
            let sum: f64 = areas.iter().sum();
            let stat: f64 = counts
                .iter()
                .zip(&areas)
                .map(|(&o, a)| {
                    let e = per_layer as f64 * a / sum;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            let df = (layer.regions.len() - 1) as f64;
            let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
            ensure(p > 0.01, || format!("{name}: chi-square p = {p:.4}"))?;
            worst_p = worst_p.min(p);
        }
        ensure(total >= 10_000, || format!("only {total} points"))?;
        Ok(format!("{total} points inside, smallest chi-square p = {worst_p:.3}"))
    });
}

// ---------------------------------------------------------------------------
// Criterion 4: shadow and FOV samplers
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_geometric_samplers() {
    criterion(4, "shadow shell and FOV cone", || {
        let mut rng = StreamKey::new(4).with_str("shadow").stream();
        for i in 0..10_000 {
            let r = uniform(&mut rng, 0.2, 60.0);
            let o = sample_shadow_offset(r, [1.5, 5.0], &mut rng);
            let d = o.norm();
            ensure(o.y > 0.0, || format!("draw {i}: offset.y = {}", o.y))?;
            ensure(d >= 1.5 * r * (1.0 - 1e-12) && d <= 5.0 * r * (1.0 + 1e-12), || format!("draw {i}: |o| = {d}, R = {r}"))?;
        }

        let mut scene = AugmentedScene::new("probe", "test", 0, GlobalState::default());
        scene.deferred_fov_rules.push(FovRule {
            obstacle_asset: "obstacle_drone".into(),
            local_aabb: Aabb::new(Vec3::new(-0.4, -0.1, -0.4), Vec3::new(0.4, 0.1, 0.4)),
            material: Material::default(),
            probability: 1.0,
            distance_range: [2.0, 40.0],
            cone_margin: 0.8,
            seed: 17,
            particle: false,
        });
        let rule = scene.deferred_fov_rules[0].clone();
        let mut rng = StreamKey::new(4).with_str("poses").stream();
        let mut spawns = 0;
        for i in 0..10_000 {
            let k = if i % 2 == 0 { CameraIntrinsics::new(256, 256, 90f64.to_radians()) } else { CameraIntrinsics::new(320, 180, 1.3) }.unwrap();
            let pose = TrajectoryPose {
                position: Vec3::new(uniform(&mut rng, -500.0, 500.0), uniform(&mut rng, 5.0, 200.0), uniform(&mut rng, -500.0, 500.0)),
                yaw: uniform(&mut rng, -3.2, 3.2),
                pitch: uniform(&mut rng, -1.5, 1.5),
                roll: uniform(&mut rng, -0.5, 0.5),
                frame_index: i,
            };
            for inst in resolve_fov_obstacles(&scene, &pose, &k) {
                let center = inst.position + rule.local_aabb.center();
                let p = project_point(&k, &pose, &center).ok_or_else(|| format!("frame {i}: spawn behind camera"))?;
                let (w, h) = (k.width as f64, k.height as f64);
                ensure((0.0..=w).contains(&p.u) && (0.0..=h).contains(&p.v), || format!("frame {i}: ({}, {}) outside {w}x{h}", p.u, p.v))?;
                spawns += 1;
            }
        }
        ensure(spawns == 10_000, || format!("{spawns} spawns at probability 1"))?;
        Ok("10000 shadow draws and 10000 FOV spawns, 0 violations".into())
    });
}

// ---------------------------------------------------------------------------
// Criterion 5: probability gates
// ---------------------------------------------------------------------------

fn within_three_sd(count: usize, n: usize, p: f64) -> Result<(), String> {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    ensure((count as f64 - mean).abs() <= 3.0 * sd, || format!("p = {p}: {count} of {n}, expected {mean} +- {:.1}", 3.0 * sd))
}

#[test]
fn criterion_05_probability_gates() {
    criterion(5, "gate counts within 3 binomial sd", || {
        let n = 10_000;
        let probs = [0.1, 0.5, 0.9];

        let mut pre = Pipeline::new(5);
        pre.register_custom_operation("tick", Layer::GlobalVariation, |_, _, _| Ok(())).unwrap();
        for p in probs {
            pre.add(OperationSpec::new("tick", p)).unwrap();
        }
        let out = pre.run(&[scene("WINDFARM")], n, 1).map_err(|e| e.to_string())?;
        ensure(out.scenes.len() == n, || format!("{} variations", out.scenes.len()))?;
        let mut pre_counts = Vec::new();
        for (ordinal, p) in probs.iter().enumerate() {
            let c = out.scenes.iter().filter(|s| s.provenance.iter().any(|e| e.ordinal == ordinal && e.applied)).count();
            within_three_sd(c, n, *p).map_err(|e| format!("pre-processing {e}"))?;
            pre_counts.push(c);
        }

        let mut post = PostPipeline::new(5);
        post.add(AugmentOpSpec::new("flip", probs[0])).unwrap();
        post.add(AugmentOpSpec::new("rotate", probs[1])).unwrap();
        post.add(AugmentOpSpec::new("zoom", probs[2])).unwrap();
        let img = RasterImage::filled(16, 16, [90, 120, 150]);
        let mut post_counts = [0usize; 3];
        for i in 0..n {
            let aug = post.augment(&format!("rec_{i}.ppm"), 0, &img, &[]).map_err(|e| e.to_string())?;
            for a in &aug.applied {
                let k = ["flip", "rotate", "zoom"].iter().position(|name| *name == a.op).unwrap();
                post_counts[k] += 1;
            }
        }
        for (c, p) in post_counts.iter().zip(probs) {
            within_three_sd(*c, n, p).map_err(|e| format!("post-processing {e}"))?;
        }
        Ok(format!("pre {pre_counts:?}, post {post_counts:?} of {n}"))
    });
}

// ---------------------------------------------------------------------------
// Criterion 6: annotation soundness
// ---------------------------------------------------------------------------

fn noise_image(w: u32, h: u32, rng: &mut impl Rng) -> RasterImage {
    let mut img = RasterImage::new(w, h);
    for v in img.pixels.iter_mut() {
        *v = rng.gen();
    }
    img
}

/// Boxes on the 1/1024 px grid that annotations use, well inside the frame.
fn random_objects(w: f64, h: f64, rng: &mut impl Rng) -> Vec<ObjectAnnotation> {
    let snap = |v: f64| (v * 1024.0).round() / 1024.0;
    (0..3)
        .map(|i| {
            let (x0, y0) = (snap(uniform(rng, 0.2 * w, 0.55 * w)), snap(uniform(rng, 0.2 * h, 0.55 * h)));
            let (bw, bh) = (snap(uniform(rng, 6.0, 0.25 * w)), snap(uniform(rng, 6.0, 0.25 * h)));
            ObjectAnnotation {
                class: "landing_pad".into(),
                bbox: [x0, y0, x0 + bw, y0 + bh],
                visibility: 1.0,
                position: Vec3::zeros(),
                rotation: Vec3::zeros(),
                scale: Vec3::repeat(1.0),
                variant_index: Some(i),
                anchor_region: None,
            }
        })
        .collect()
}

fn corners(b: &[f64; 4]) -> [(f64, f64); 4] {
    [(b[0], b[1]), (b[2], b[1]), (b[0], b[3]), (b[2], b[3])]
}

/// Every mapped corner, clipped to the frame, lies in the new box.
fn contains_all(before: &[ObjectAnnotation], after: &[ObjectAnnotation], w: f64, h: f64, map: impl Fn(f64, f64) -> (f64, f64)) -> Result<(), String> {
    for o in before {
        let Some(t) = after.iter().find(|a| a.variant_index == o.variant_index) else { continue };
        for (x, y) in corners(&o.bbox) {
            let (u, v) = map(x, y);
            let (u, v) = (u.clamp(0.0, w), v.clamp(0.0, h));
            let eps = 1e-9;
            ensure(u >= t.bbox[0] - eps && u <= t.bbox[2] + eps && v >= t.bbox[1] - eps && v <= t.bbox[3] + eps, || {
                format!("corner ({x}, {y}) maps to ({u}, {v}) outside {:?}", t.bbox)
            })?;
        }
    }
    Ok(())
}

#[test]
fn criterion_06_annotation_soundness() {
    criterion(6, "flip identity, box containment, photometric ops", || {
        let mut rng = StreamKey::new(6).stream();
        let (w, h) = (96u32, 64u32);
        let (wf, hf) = (w as f64, h as f64);
        let (cx, cy) = (wf / 2.0, hf / 2.0);

        for axis in [asda::postproc::FlipAxis::Horizontal, asda::postproc::FlipAxis::Vertical] {
            for _ in 0..50 {
                let img = noise_image(w, h, &mut rng);
                let objs = random_objects(wf, hf, &mut rng);
                let mut twice = objs.clone();
                let once = flip_image(&img, &mut twice, axis);
                let back = flip_image(&once, &mut twice, axis);
                ensure(back == img, || format!("{axis:?} double flip changed pixels"))?;
                ensure(twice == objs, || format!("{axis:?} double flip changed boxes"))?;
            }
        }

        let img = noise_image(w, h, &mut rng);
        for i in 0..1000 {
            let objs = random_objects(wf, hf, &mut rng);
            let mut out = objs.clone();
            match i % 3 {
                0 => {
                    let deg = uniform(&mut rng, -10.0, 10.0);
                    rotate_image(&img, &mut out, deg);
                    // Counter-clockwise on screen with y down.
                    let (s, c) = deg.to_radians().sin_cos();
                    contains_all(&objs, &out, wf, hf, |x, y| (cx + (x - cx) * c + (y - cy) * s, cy - (x - cx) * s + (y - cy) * c))?;
                }
                1 => {
                    let f = uniform(&mut rng, 1.0, 1.5);
                    zoom_image(&img, &mut out, f);
                    contains_all(&objs, &out, wf, hf, |x, y| (cx + (x - cx) * f, cy + (y - cy) * f))?;
                }
                _ => {
                    let lattice = Lattice::random(&img, 4, 4.0, &mut rng);
                    warp_image(&img, &mut out, &lattice);
                    // The forward map must really invert the backward warp.
                    for o in &objs {
                        for (x, y) in corners(&o.bbox) {
                            let (u, v) = lattice.forward(x, y);
                            let (sx, sy) = lattice.backward(u, v);
                            ensure((sx - x).abs() < 1e-6 && (sy - y).abs() < 1e-6, || format!("forward map off at ({x}, {y})"))?;
                        }
                    }
                    contains_all(&objs, &out, wf, hf, |x, y| lattice.forward(x, y))?;
                }
            }
        }

        let mut post = PostPipeline::new(6);
        post.add(AugmentOpSpec::new("random_erasing", 1.0)).unwrap();
        post.add(AugmentOpSpec::new("add_effect", 1.0).with("effect_name", "visibility").with("intensity", 1.0)).unwrap();
        for i in 0..50 {
            let objs = random_objects(wf, hf, &mut rng);
            let aug = post.augment(&format!("r{i}"), 0, &img, &objs).map_err(|e| e.to_string())?;
            ensure(aug.applied.len() == 2, || "photometric ops did not fire".into())?;
            ensure(aug.objects == objs, || format!("record {i}: photometric ops changed annotations"))?;
            ensure(aug.image != img, || format!("record {i}: image unchanged"))?;
        }
        Ok("double flips exact, 1000 geometric ops contain all corners, photometric ops keep boxes".into())
    });
}

// ---------------------------------------------------------------------------
// Criteria 7 to 9: scaling law, decision rule, LOC loop
// ---------------------------------------------------------------------------

fn curve_points(d: f64, alpha: f64, c: f64, noise: Option<(&mut rand_chacha::ChaCha8Rng, f64)>) -> Vec<(f64, f64)> {
    let sizes: Vec<f64> = (0..12).map(|k| 10.0 * 2f64.powi(k)).collect();
    let mut noise = noise;
    sizes
        .into_iter()
        .map(|n| {
            let e = d * n.powf(-alpha) + c;
            let e = match noise.as_mut() {
                // Box-Muller keeps this oracle off the library's samplers.
                Some((rng, rel)) => {
                    let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
                    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    e * (1.0 + *rel * z)
                }
                None => e,
            };
            (n, e)
        })
        .collect()
}

#[test]
fn criterion_07_scaling_law_recovery() {
    criterion(7, "scaling-law recovery", || {
        let fit = fit_scaling_law(&curve_points(0.8, 0.5, 0.05, None)).map_err(|e| e.to_string())?;
        ensure((fit.alpha - 0.5).abs() <= 0.02, || format!("noiseless alpha {}", fit.alpha))?;
        ensure((fit.transfer_gap_c - 0.05).abs() <= 0.005, || format!("noiseless C {}", fit.transfer_gap_c))?;

        let (mut worst_a, mut worst_c) = (0.0f64, 0.0f64);
        for trial in 0..20 {
            let mut rng = StreamKey::new(700).with_u64(trial).stream();
            let pts = curve_points(0.8, 0.5, 0.05, Some((&mut rng, 0.01)));
            let f = fit_scaling_law(&pts).map_err(|e| e.to_string())?;
            worst_a = worst_a.max((f.alpha - 0.5).abs());
            worst_c = worst_c.max((f.transfer_gap_c - 0.05).abs());
            ensure((f.alpha - 0.5).abs() <= 0.05, || format!("trial {trial}: alpha {}", f.alpha))?;
            ensure((f.transfer_gap_c - 0.05).abs() <= 0.01, || format!("trial {trial}: C {}", f.transfer_gap_c))?;
        }
        Ok(format!(
            "noiseless alpha {:.4}, C {:.4}; noisy worst |da| {worst_a:.4}, |dC| {worst_c:.4}",
            fit.alpha, fit.transfer_gap_c
        ))
    });
}

#[test]
fn criterion_08_decision_rule() {
    criterion(8, "size-or-setting rule", || {
        let cfg = LocConfig::new(0.85);
        // Hand inversion: 0.8 n^-0.5 + 0.05 = 0.15  =>  n = (0.8 / 0.1)^2 = 64.
        let n_star = ((0.8f64 / (0.15 - 0.05)).powf(1.0 / 0.5)).round() as u64;
        ensure(n_star == 64, || format!("oracle gives {n_star}"))?;
        let base = ScalingLawParams::new(0.8, 0.5, 0.05);
        ensure(estimate_data_requirement(&base, 0.85).ok() == Some(n_star), || "inversion is not 64".into())?;
        ensure(decide_action(&base, &cfg) == Decision::IncreaseSize(64), || format!("{:?}", decide_action(&base, &cfg)))?;
        let slow = ScalingLawParams::new(0.8, 0.2, 0.05);
        ensure(decide_action(&slow, &cfg) == Decision::ChangeSetting, || "low alpha kept the setting".into())?;
        for c in [0.15, 0.2, 0.5] {
            let floor = ScalingLawParams::new(0.8, 0.5, c);
            ensure(decide_action(&floor, &cfg) == Decision::ChangeSetting, || format!("C = {c} kept the setting"))?;
        }
        Ok("IncreaseSize(64), low alpha and high floor both ChangeSetting".into())
    });
}

#[test]
fn criterion_09_loc_loop() {
    criterion(9, "learn / optimize / collect loop", || {
        let space = SearchSpace::default_for("landing_pad", Some("obstacle_drone"));
        let cfg = LocConfig::new(0.9);
        let mut reached = 0;
        for seed in 0..100u64 {
            let mut oracle = SyntheticOracle::new(ScalingLawParams::new(0.8, 0.5, 0.02), 0.005, seed).map_err(|e| e.to_string())?;
            let out = run_loc_loop(&mut oracle, &cfg, &space, seed, None).map_err(|e| e.to_string())?;
            ensure(out.history.len() <= 8, || format!("seed {seed}: {} iterations", out.history.len()))?;
            ensure(out.history.windows(2).all(|w| w[0].size < w[1].size), || format!("seed {seed}: sizes not increasing"))?;
            if out.status == LocStatus::Reached {
                reached += 1;
            }
        }
        ensure(reached >= 95, || format!("reached V* in {reached}/100 runs"))?;

        let mut floor_cfg = cfg;
        floor_cfg.max_iterations = 12;
        let mut post_fit = 0;
        for seed in 0..10u64 {
            let mut oracle = SyntheticOracle::new(ScalingLawParams::new(0.8, 0.5, 0.3), 0.005, seed).map_err(|e| e.to_string())?;
            let out = run_loc_loop(&mut oracle, &floor_cfg, &space, seed, None).map_err(|e| e.to_string())?;
            ensure(out.status == LocStatus::BudgetExhausted, || format!("seed {seed}: unreachable target reported reached"))?;
            for r in out.history.iter().filter(|r| r.fitted.is_some()) {
                ensure(r.decision == Decision::ChangeSetting, || format!("seed {seed} iteration {}: {:?}", r.iteration, r.decision))?;
                post_fit += 1;
            }
        }
        ensure(post_fit > 0, || "no iteration was fitted".into())?;
        Ok(format!("reached in {reached}/100 runs; {post_fit} post-fit iterations with C = 0.3 all ChangeSetting"))
    });
}

// ---------------------------------------------------------------------------
// Criterion 10: DSL conformance
// ---------------------------------------------------------------------------

const CITY_WEATHER: [&str; 4] = [
    r#"pre_processing_pipeline.generate_rand_variation (1, scenes=["SEA","SD"], asset="cellular_tower", nvariations=10)"#,
    r#"pre_processing_pipeline.distribute_asset_within_radius (1, mode="center", radius="200")"#,
    r#"pre_processing_pipeline.random_weather (1, scene="SEA", p=[0.6, 0.3, 0.1])"#,
    r#"pre_processing_pipeline.random_weather (1, scene="SD", p=[0.5, 0.5, 0])"#,
];

const SCENARIOS: [&str; 5] = [
    "scenario_turbine_cracks.asda",
    "scenario_tower_trajectories.asda",
    "scenario_fov_odometry.asda",
    "scenario_localization.asda",
    "scenario_landing_pads.asda",
];

/// Parses, round-trips and binds `text`; returns the number of prompts.
fn conform(name: &str, text: &str) -> Result<usize, String> {
    let script = parse_strategy_script(text).map_err(|e| format!("{name}: {e}"))?;
    for sp in &script.prompts {
        let printed = sp.prompt.to_string();
        let again = parse_prompt(&printed).map_err(|e| format!("{name}: `{printed}` does not reparse: {e}"))?;
        ensure(again == sp.prompt, || format!("{name}: `{printed}` changes on reparse"))?;
    }
    // One prompt per line, so each bound op maps back to exactly one prompt.
    let canonical = parse_strategy_script(&script.pretty()).map_err(|e| format!("{name}: {e}"))?;
    let bound = bind_script(&canonical, 0).map_err(|e| format!("{name}: {e}"))?;
    for op in bound.pre.ops() {
        ensure(bound.pre.operation(&op.name).is_some(), || format!("{name}: `{}` not registered", op.name))?;
    }
    for sp in canonical.pre() {
        ensure(bound.pre_lines.contains(&sp.line), || format!("{name}: `{}` bound to nothing", sp.prompt.method))?;
    }
    for sp in canonical.post() {
        ensure(bound.post_lines.contains(&sp.line), || format!("{name}: `{}` bound to nothing", sp.prompt.method))?;
    }
    let names = bound.post.operation_names();
    for op in bound.post.ops() {
        ensure(names.contains(&op.name), || format!("{name}: `{}` not registered", op.name))?;
    }
    Ok(script.prompts.len())
}

#[test]
fn criterion_10_dsl_conformance() {
    criterion(10, "reference prompts parse, round-trip, bind and dry-run", || {
        let mut prompts = conform("city weather", &CITY_WEATHER.join("\n"))?;
        for p in CITY_WEATHER {
            let parsed = parse_prompt(p).map_err(|e| format!("`{p}`: {e}"))?;
            ensure(parse_prompt(&parsed.to_string()).ok() == Some(parsed), || format!("`{p}` does not round-trip"))?;
        }
        let all = scenes();
        let weather = std::fs::read_to_string(fixtures().join("scripts/weather_by_city.asda")).unwrap();
        dry_run(&weather, &all).map_err(|e| format!("city weather dry run: {e}"))?;
        for file in SCENARIOS {
            let text = std::fs::read_to_string(fixtures().join("scripts").join(file)).unwrap();
            prompts += conform(file, &text)?;
            let report = dry_run(&text, &all).map_err(|e| format!("{file} dry run: {e}"))?;
            ensure(!report.pre_ops.is_empty() && report.capture.is_some(), || format!("{file}: empty dry run"))?;
        }
        Ok(format!("{prompts} prompts conform; 5 scenario dry runs pass"))
    });
}

// ---------------------------------------------------------------------------
// Criterion 11: renderer
// ---------------------------------------------------------------------------

fn cube(role: InstanceRole, center: Vec3, half: f64, rotation: Vec3) -> AssetInstance {
    AssetInstance {
        prototype: "box".into(),
        position: center,
        rotation,
        scale: Vec3::repeat(1.0),
        material: Material { rgb: [0.7, 0.3, 0.2], texture: None },
        role,
        anchor_region: None,
        variant_index: Some(0),
        local_aabb: Aabb::new(Vec3::repeat(-half), Vec3::repeat(half)),
    }
}

fn main_visibility(scene: &AugmentedScene, pose: &TrajectoryPose, k: &CameraIntrinsics) -> f64 {
    let (_, ann) = render_frame(scene, pose, k);
    ann.objects.first().map_or(0.0, |o| o.visibility)
}

#[test]
fn criterion_11_renderer_sanity() {
    criterion(11, "optical axis and occlusion monotonicity", || {
        let mut rng = StreamKey::new(11).stream();
        for i in 0..200 {
            let k = if i % 2 == 0 { CameraIntrinsics::new(256, 256, 1.5) } else { CameraIntrinsics::new(320, 200, 1.1) }.unwrap();
            let (yaw, pitch) = (uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, -1.4, 1.4));
            let pose = TrajectoryPose {
                position: Vec3::new(uniform(&mut rng, -50.0, 50.0), uniform(&mut rng, 1.0, 80.0), uniform(&mut rng, -50.0, 50.0)),
                yaw,
                pitch,
                roll: uniform(&mut rng, -0.6, 0.6),
                frame_index: 0,
            };
            // Closed-form viewing direction: yaw about +Y, then pitch, from -Z.
            let axis = Vec3::new(-yaw.sin() * pitch.cos(), pitch.sin(), -yaw.cos() * pitch.cos());
            let p = project_point(&k, &pose, &(pose.position + axis * uniform(&mut rng, 1.0, 500.0))).ok_or("axis point behind camera")?;
            let (cu, cv) = (k.width as f64 / 2.0, k.height as f64 / 2.0);
            ensure((p.u - cu).abs() < 1e-6 && (p.v - cv).abs() < 1e-6, || format!("axis lands at ({}, {})", p.u, p.v))?;
        }

        let k = CameraIntrinsics::new(96, 96, 1.2).unwrap();
        let pose = TrajectoryPose { position: Vec3::zeros(), yaw: 0.0, pitch: 0.0, roll: 0.0, frame_index: 0 };
        let sqrt3 = 3f64.sqrt();
        let (mut scenes_done, mut lowered) = (0, 0);
        while scenes_done < 1000 {
            let d = uniform(&mut rng, 8.0, 40.0);
            let dir = Vec3::new(uniform(&mut rng, -0.2, 0.2), uniform(&mut rng, -0.2, 0.2), -1.0).normalize();
            let target_half = uniform(&mut rng, 0.3, 1.5);
            let s = uniform(&mut rng, 0.25, 0.75);
            // Occluder sphere must clear both the camera and the target.
            let room = ((1.0 - s) * d - sqrt3 * target_half).min(s * d) / sqrt3;
            if room < 0.1 {
                continue;
            }
            let occ_half = uniform(&mut rng, 0.05, 0.9 * room);
            let rot = |rng: &mut rand_chacha::ChaCha8Rng| Vec3::new(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
            let target = cube(InstanceRole::Main, dir * d, target_half, rot(&mut rng));
            let off = Vec3::new(uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0), 0.0) * target_half * 0.5;
            let blocker = cube(InstanceRole::Obstacle, dir * (s * d) + off, occ_half, rot(&mut rng));

            let mut alone = AugmentedScene::new("probe", "test", 0, GlobalState::default());
            alone.instances.push(target);
            let before = main_visibility(&alone, &pose, &k);
            if before == 0.0 {
                continue;
            }
            let mut both = alone.clone();
            both.instances.push(blocker);
            let after = main_visibility(&both, &pose, &k);
            ensure(after <= before, || format!("scene {scenes_done}: visibility rose from {before} to {after}"))?;
            if after < before {
                lowered += 1;
            }
            scenes_done += 1;
        }
        ensure(lowered > 100, || format!("occluders lowered visibility in only {lowered} scenes"))?;
        Ok(format!("axis hits center in 200 poses; 1000 occluded scenes monotone ({lowered} strictly lower)"))
    });
}
