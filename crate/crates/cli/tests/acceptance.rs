//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero when a gated criterion fails.

use std::collections::HashSet;
use std::time::Instant;

use posebox::codec::{encode_confidence_maps, gaussian_confidence, EncoderConfig, StageMaps};
use posebox::detect::{connection_score, extend_box, DetectConfig};
use posebox::eval::{average_precision, oks, pipeline_diagnostics, OksConfig, OKS_THRESHOLDS};
use posebox::parse::{
    parse_scene, parse_scene_detailed, pose_distance, pose_nms, ParseConfig, ParsedPose,
    PipelineConfig,
};
use posebox::synth::{generate_scene, perturb_fields, CounterRng, Occlusion, SynthConfig};
use posebox::{
    canonical_skeleton, BoundingBox, FieldGrid, Point2, Pose, PoseJoint, SceneAnnotation, Skeleton,
    NUM_JOINTS,
};
use posebox_cli::scene_file::SceneFile;
use posebox_cli::tensor::{read_tensor, write_tensor, Tensor};

// Pinned thresholds.
const C1_TOL: f64 = 1e-6;
const C2_SCENES: u64 = 200;
const C2_OKS: f64 = 0.95;
const C2_RECOVERED: f64 = 0.99;
const C2_MEAN_ERROR_PX: f64 = 1.0;
const C2_SECONDS: f64 = 60.0;
const C3_NOISE: f64 = 0.05;
const C3_OKS: f64 = 0.90;
const C3_RECOVERED: f64 = 0.95;
const C4_COUNT_EXACT: f64 = 0.99;
const C5_CLEAN_SCENES: f64 = 0.95;
const C6_SHIFT: f64 = 0.10;
const C6_MAX_OKS_CHANGE: f64 = 0.02;
const C8_SETS: u64 = 10_000;
const C9_BUDGET_MS: f64 = 100.0;
const C10_CASES: u64 = 1_000;

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn report(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        println!(
            "[{}] criterion {n:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failures += 1;
        }
    }
}

fn main() {
    let mut out = Outcome { failures: 0 };
    criterion_1(&mut out);
    corpus_criteria(&mut out);
    criterion_7(&mut out);
    criterion_8(&mut out);
    criterion_9();
    criterion_10(&mut out);
    if out.failures > 0 {
        println!("{} criteria failed", out.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}

fn criterion_1(out: &mut Outcome) {
    let start = Instant::now();
    let sigma = 7.0;
    let j = Point2::new(40.5, 30.5);
    let mut worst: f64 = 0.0;
    worst = worst.max((gaussian_confidence(j, j, sigma) - 1.0).abs());
    worst =
        worst.max((gaussian_confidence(Point2::new(47.5, 30.5), j, sigma) - (-1.0f64).exp()).abs());

    // Same values read back from an encoded map (cell centers at +0.5).
    let mut scene = SceneAnnotation::new(80, 60);
    let mut locs = [None; NUM_JOINTS];
    locs[0] = Some(j);
    scene.persons.push(Pose::from_locations(locs));
    let maps = encode_confidence_maps(
        &scene,
        &EncoderConfig {
            sigma,
            ..EncoderConfig::default()
        },
    )
    .unwrap();
    worst = worst.max((maps[0].get(40, 30, 0) as f64 - 1.0).abs());
    worst = worst.max((maps[0].get(47, 30, 0) as f64 - (-1.0f64).exp()).abs());

    let cfg = DetectConfig::default();
    let (a, b) = (Point2::new(5.3, 7.1), Point2::new(31.8, 22.6));
    let d = (b - a).scale(1.0 / a.distance(b));
    let mut field = FieldGrid::zeros(40, 30, 2, 1);
    for row in 0..30 {
        for col in 0..40 {
            field.set(col, row, 0, d.x as f32);
            field.set(col, row, 1, d.y as f32);
        }
    }
    let along = connection_score(&field, a, b, &cfg).unwrap();
    let against = connection_score(&field, b, a, &cfg).unwrap();
    worst = worst.max((along - 1.0).abs()).max((against + 1.0).abs());
    let secs = start.elapsed().as_secs_f64();
    out.report(
        1,
        "analytic field checks",
        worst <= C1_TOL && secs < 1.0,
        format!("max deviation {worst:.2e} (tol {C1_TOL:.0e}), scores {along:.9}/{against:.9}, {secs:.3} s (< 1 s)"),
    );
}

fn corpus_scene(seed: u64) -> SceneAnnotation {
    let cfg = SynthConfig {
        seed,
        num_persons: (1, 5),
        min_separation: 120.0,
        ..SynthConfig::default()
    };
    generate_scene(&cfg).unwrap().scene
}

fn extended_boxes(scene: &SceneAnnotation, boxes: &[BoundingBox]) -> Vec<BoundingBox> {
    let (w, h) = (scene.image_width as f64, scene.image_height as f64);
    let f = DetectConfig::default().box_extension;
    boxes.iter().map(|b| extend_box(b, w, h, f)).collect()
}

/// Best OKS of each ground-truth person over all predictions, with the index
/// of the prediction achieving it.
fn best_matches(preds: &[ParsedPose], scene: &SceneAnnotation) -> Vec<(f64, Option<usize>)> {
    let cfg = OksConfig::default();
    scene
        .persons
        .iter()
        .enumerate()
        .map(|(k, gt)| {
            let b = scene.person_box(k).unwrap();
            preds.iter().enumerate().fold((0.0, None), |acc, (i, p)| {
                let v = oks(&p.pose, gt, &b, &cfg).unwrap();
                if v > acc.0 {
                    (v, Some(i))
                } else {
                    acc
                }
            })
        })
        .collect()
}

#[derive(Default)]
struct CorpusStats {
    persons: usize,
    c2_recovered: usize,
    c2_error_sum: f64,
    c2_error_joints: usize,
    c2_missing_joints: usize,
    c2_seconds: f64,
    c3_recovered: usize,
    c4_count_exact: usize,
    c5_clean_with: usize,
    c5_disconnected_with: usize,
    c5_disconnected_without: usize,
    c6_violations: usize,
    c6_worst: f64,
    scenes: usize,
    gt: Vec<SceneAnnotation>,
    preds_dup_nms: Vec<Vec<ParsedPose>>,
    preds_dup_raw: Vec<Vec<ParsedPose>>,
    preds_occ_with: Vec<Vec<ParsedPose>>,
    preds_occ_without: Vec<Vec<ParsedPose>>,
}

fn corpus_criteria(out: &mut Outcome) {
    let skel = canonical_skeleton();
    let enc = EncoderConfig::default();
    let cfg = PipelineConfig::default();
    let mut no_nms = cfg;
    no_nms.parse.nms = false;
    let mut no_completion = cfg;
    no_completion.parse.completion = false;
    let mut st = CorpusStats::default();

    for seed in 0..C2_SCENES {
        let scene = corpus_scene(seed);
        let boxes = extended_boxes(&scene, &scene.boxes);
        st.scenes += 1;
        st.persons += scene.persons.len();

        // 2: clean round trip.
        let t = Instant::now();
        let maps = StageMaps::encode(&scene, &enc, &skel).unwrap();
        let clean = parse_scene(&boxes, &maps.maps, &maps.fields, &skel, &cfg).unwrap();
        st.c2_seconds += t.elapsed().as_secs_f64();
        let clean_best = best_matches(&clean, &scene);
        for (k, &(v, i)) in clean_best.iter().enumerate() {
            st.c2_recovered += (v >= C2_OKS) as usize;
            let Some(i) = i else {
                st.c2_missing_joints += scene.persons[k].joint_count();
                continue;
            };
            for j in 0..NUM_JOINTS {
                match (scene.persons[k].location(j), clean[i].pose.location(j)) {
                    (Some(g), Some(p)) => {
                        st.c2_error_sum += g.distance(p);
                        st.c2_error_joints += 1;
                    }
                    (Some(_), None) => st.c2_missing_joints += 1,
                    _ => {}
                }
            }
        }

        // 3: uniform noise.
        let noisy_cfg = SynthConfig {
            seed,
            noise_amplitude: C3_NOISE,
            ..SynthConfig::default()
        };
        let noisy =
            perturb_fields(&maps.maps, &maps.fields, &scene, &enc, &skel, &noisy_cfg).unwrap();
        let poses = parse_scene(&boxes, &noisy.maps, &noisy.fields, &skel, &cfg).unwrap();
        st.c3_recovered += best_matches(&poses, &scene)
            .iter()
            .filter(|m| m.0 >= C3_OKS)
            .count();

        // 4: every box twice.
        let doubled: Vec<BoundingBox> = boxes.iter().chain(&boxes).copied().collect();
        let with = parse_scene(&doubled, &maps.maps, &maps.fields, &skel, &cfg).unwrap();
        let without = parse_scene(&doubled, &maps.maps, &maps.fields, &skel, &no_nms).unwrap();
        st.c4_count_exact += (with.len() == scene.persons.len()) as usize;
        st.preds_dup_nms.push(with);
        st.preds_dup_raw.push(without);

        // 5: one limb field zeroed for every person.
        let occ_cfg = SynthConfig {
            seed,
            occlusion: Some(Occlusion {
                limb: (seed % 13) as usize,
                probability: 1.0,
            }),
            ..SynthConfig::default()
        };
        let occ = perturb_fields(&maps.maps, &maps.fields, &scene, &enc, &skel, &occ_cfg).unwrap();
        let with = parse_scene(&boxes, &occ.maps, &occ.fields, &skel, &cfg).unwrap();
        let without = parse_scene(&boxes, &occ.maps, &occ.fields, &skel, &no_completion).unwrap();
        let oks_cfg = OksConfig::default();
        let dw = pipeline_diagnostics(&with, &scene, &oks_cfg)
            .unwrap()
            .disconnected_joints;
        let dn = pipeline_diagnostics(&without, &scene, &oks_cfg)
            .unwrap()
            .disconnected_joints;
        st.c5_clean_with += (dw == 0) as usize;
        st.c5_disconnected_with += dw;
        st.c5_disconnected_without += dn;
        st.preds_occ_with.push(with);
        st.preds_occ_without.push(without);

        // 6: shifted boxes.
        let mut rng = CounterRng::new(seed, 0x5F1F7);
        let shifted: Vec<BoundingBox> = scene
            .boxes
            .iter()
            .map(|b| {
                let dx = rng.uniform(-C6_SHIFT, C6_SHIFT) * b.width();
                let dy = rng.uniform(-C6_SHIFT, C6_SHIFT) * b.height();
                b.translate(dx, dy)
            })
            .collect();
        let moved = parse_scene(
            &extended_boxes(&scene, &shifted),
            &maps.maps,
            &maps.fields,
            &skel,
            &cfg,
        )
        .unwrap();
        for (a, b) in clean_best.iter().zip(best_matches(&moved, &scene)) {
            let change = (a.0 - b.0).abs();
            st.c6_worst = st.c6_worst.max(change);
            st.c6_violations += (change > C6_MAX_OKS_CHANGE) as usize;
        }
        st.gt.push(scene);
    }

    let n = st.persons as f64;
    let rate2 = st.c2_recovered as f64 / n;
    let mean_err = st.c2_error_sum / st.c2_error_joints.max(1) as f64;
    out.report(
        2,
        "round-trip recovery",
        rate2 >= C2_RECOVERED && mean_err <= C2_MEAN_ERROR_PX && st.c2_seconds < C2_SECONDS,
        format!(
            "{}/{} persons ({:.2}%) at OKS >= {C2_OKS} (need >= {:.0}%), mean joint error {mean_err:.3} px (need <= {C2_MEAN_ERROR_PX}), {} joints missing, {:.1} s (need < {C2_SECONDS} s), {} scenes",
            st.c2_recovered, st.persons, 100.0 * rate2, 100.0 * C2_RECOVERED, st.c2_missing_joints, st.c2_seconds, st.scenes
        ),
    );

    let rate3 = st.c3_recovered as f64 / n;
    out.report(
        3,
        "noise robustness",
        rate3 >= C3_RECOVERED,
        format!(
            "{}/{} persons ({:.2}%) at OKS >= {C3_OKS} with noise {C3_NOISE} (need >= {:.0}%)",
            st.c3_recovered,
            st.persons,
            100.0 * rate3,
            100.0 * C3_RECOVERED
        ),
    );

    let oks_cfg = OksConfig::default();
    let ap_nms = average_precision(&st.preds_dup_nms, &st.gt, &oks_cfg)
        .unwrap()
        .ap;
    let ap_raw = average_precision(&st.preds_dup_raw, &st.gt, &oks_cfg)
        .unwrap()
        .ap;
    let exact = st.c4_count_exact as f64 / st.scenes as f64;
    out.report(
        4,
        "pose-NMS ablation",
        ap_nms > ap_raw && exact >= C4_COUNT_EXACT,
        format!(
            "AP {ap_nms:.4} with NMS vs {ap_raw:.4} without (need strictly greater), pose count exact in {}/{} scenes (need >= {:.0}%)",
            st.c4_count_exact, st.scenes, 100.0 * C4_COUNT_EXACT
        ),
    );

    let ap_with = average_precision(&st.preds_occ_with, &st.gt, &oks_cfg)
        .unwrap()
        .ap;
    let ap_without = average_precision(&st.preds_occ_without, &st.gt, &oks_cfg)
        .unwrap()
        .ap;
    let clean5 = st.c5_clean_with as f64 / st.scenes as f64;
    out.report(
        5,
        "completion ablation",
        clean5 >= C5_CLEAN_SCENES
            && st.c5_disconnected_with < st.c5_disconnected_without
            && ap_with > ap_without,
        format!(
            "no disconnected joints in {}/{} scenes (need >= {:.0}%), disconnected joints {} with vs {} without, AP {ap_with:.4} with vs {ap_without:.4} without",
            st.c5_clean_with, st.scenes, 100.0 * C5_CLEAN_SCENES, st.c5_disconnected_with, st.c5_disconnected_without
        ),
    );

    out.report(
        6,
        "box-shift robustness",
        st.c6_violations == 0,
        format!(
            "{} of {} persons changed OKS by more than {C6_MAX_OKS_CHANGE} under shifts up to {:.0}% (worst change {:.4})",
            st.c6_violations, st.persons, 100.0 * C6_SHIFT, st.c6_worst
        ),
    );
}

/// Area under the interpolated precision/recall curve. Detections with equal
/// confidence enter the curve together.
fn oracle_ap(dets: &[(f64, bool)], n_gt: usize) -> f64 {
    let mut confs: Vec<f64> = dets.iter().map(|d| d.0).collect();
    confs.sort_by(|a, b| b.total_cmp(a));
    confs.dedup();
    let mut curve = Vec::new();
    for &c in &confs {
        let upto: Vec<&(f64, bool)> = dets.iter().filter(|d| d.0 >= c).collect();
        let tp = upto.iter().filter(|d| d.1).count();
        curve.push((tp as f64 / n_gt as f64, tp as f64 / upto.len() as f64));
    }
    let mut area = 0.0;
    let mut prev = 0.0;
    for (k, &(r, _)) in curve.iter().enumerate() {
        if r > prev {
            let best = curve[k..].iter().map(|p| p.1).fold(0.0, f64::max);
            area += (r - prev) * best;
            prev = r;
        }
    }
    area
}

/// Every partial one-to-one assignment of `n_pred` rows to `n_gt` columns.
fn all_matchings(n_pred: usize, n_gt: usize) -> Vec<Vec<Option<usize>>> {
    fn go(
        row: usize,
        n_pred: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        all: &mut Vec<Vec<Option<usize>>>,
    ) {
        if row == n_pred {
            all.push(cur.clone());
            return;
        }
        cur.push(None);
        go(row + 1, n_pred, used, cur, all);
        cur.pop();
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(Some(c));
                go(row + 1, n_pred, used, cur, all);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut all = Vec::new();
    go(0, n_pred, &mut vec![false; n_gt], &mut Vec::new(), &mut all);
    all
}

fn jittered(pose: &Pose, px: f64, rng: &mut CounterRng) -> Pose {
    let mut p = pose.clone();
    for j in p.joints.iter_mut().flatten() {
        let a = rng.uniform(0.0, std::f64::consts::TAU);
        j.location = j.location + Point2::new(px * a.cos(), px * a.sin());
    }
    p
}

fn criterion_7(out: &mut Outcome) {
    const JITTER_PX: [f64; 3] = [0.5, 4.0, 12.0];
    const CONFIDENCES: [f64; 3] = [0.3, 0.6, 0.9];
    let cfg = OksConfig::default();
    let mut instances = 0usize;
    let mut outside_domain = 0usize;
    let mut mismatches = 0usize;
    let mut first_mismatch = String::new();
    let spurious_pool: Vec<Pose> = (0..4u64)
        .flat_map(|s| corpus_scene(1000 + s).persons)
        .collect();

    for n_gt in 1..=4usize {
        let gt_cfg = SynthConfig {
            seed: 500 + n_gt as u64,
            num_persons: (n_gt, n_gt),
            ..SynthConfig::default()
        };
        let gt = generate_scene(&gt_cfg).unwrap().scene;
        assert_eq!(gt.persons.len(), n_gt);
        let roles = JITTER_PX.len() * n_gt + 1;
        for n_pred in 0..=4usize {
            let matchings = all_matchings(n_pred, n_gt);
            for code in 0..roles.pow(n_pred as u32) {
                instances += 1;
                let mut rng = CounterRng::new(code as u64, (n_gt * 8 + n_pred) as u64);
                let mut rest = code;
                let mut preds = Vec::with_capacity(n_pred);
                for i in 0..n_pred {
                    let role = rest % roles;
                    rest /= roles;
                    let pose = if role + 1 == roles {
                        spurious_pool[(code + i) % spurious_pool.len()].clone()
                    } else {
                        jittered(
                            &gt.persons[role / JITTER_PX.len()],
                            JITTER_PX[role % JITTER_PX.len()],
                            &mut rng,
                        )
                    };
                    let confidence = CONFIDENCES[rng.range_inclusive(0, CONFIDENCES.len() - 1)];
                    preds.push(ParsedPose {
                        pose,
                        confidence,
                        box_index: i,
                    });
                }
                let sims: Vec<Vec<f64>> = preds
                    .iter()
                    .map(|p| {
                        (0..n_gt)
                            .map(|k| {
                                oks(&p.pose, &gt.persons[k], &gt.person_box(k).unwrap(), &cfg)
                                    .unwrap()
                            })
                            .collect()
                    })
                    .collect();
                if sims
                    .iter()
                    .any(|row| row.iter().filter(|&&v| v >= OKS_THRESHOLDS[0]).count() > 1)
                {
                    outside_domain += 1;
                    continue;
                }

                let report =
                    average_precision(&[preds.clone()], std::slice::from_ref(&gt), &cfg).unwrap();
                for (t, &thr) in OKS_THRESHOLDS.iter().enumerate() {
                    let best = matchings
                        .iter()
                        .filter(|m| {
                            m.iter()
                                .enumerate()
                                .all(|(r, c)| c.is_none_or(|c| sims[r][c] >= thr))
                        })
                        .map(|m| {
                            let dets: Vec<(f64, bool)> = preds
                                .iter()
                                .zip(m)
                                .map(|(p, c)| (p.confidence, c.is_some()))
                                .collect();
                            oracle_ap(&dets, n_gt)
                        })
                        .fold(0.0, f64::max);
                    if best != report.ap_per_threshold[t] && first_mismatch.is_empty() {
                        first_mismatch = format!(
                            " first: gt {n_gt} preds {n_pred} code {code} threshold {thr}: greedy {} optimal {best}",
                            report.ap_per_threshold[t]
                        );
                    }
                    mismatches += (best != report.ap_per_threshold[t]) as usize;
                }
            }
        }
    }
    out.report(
        7,
        "evaluator oracle",
        mismatches == 0 && outside_domain == 0,
        format!(
            "{instances} instances (<= 4 predictions x <= 4 ground truths) x 10 thresholds, {mismatches} greedy/optimal differences (tol 0), {outside_domain} instances with a prediction matching two people{first_mismatch}"
        ),
    );
}

fn random_pose(rng: &mut CounterRng) -> Pose {
    let mut p = Pose::empty();
    let fill = rng.uniform(0.2, 1.0);
    for j in 0..NUM_JOINTS {
        if rng.next_f64() < fill {
            let id = j * 4 + rng.range_inclusive(0, 3);
            p.joints[j] = Some(PoseJoint {
                location: Point2::new(id as f64, j as f64),
                score: 1.0,
                candidate: Some(id),
            });
        }
    }
    if p.joint_count() == 0 {
        p.joints[0] = Some(PoseJoint {
            location: Point2::new(0.0, 0.0),
            score: 1.0,
            candidate: Some(0),
        });
    }
    p
}

fn criterion_8(out: &mut Outcome) {
    let mut violations = 0usize;
    let mut survivors = 0usize;
    let mut total = 0usize;
    for set in 0..C8_SETS {
        let mut rng = CounterRng::new(set, 0x4E4D53);
        let eta = rng.uniform(0.05, 0.95);
        let n = rng.range_inclusive(0, 12);
        let n_boxes = rng.range_inclusive(1, 5);
        let base: Vec<Pose> = (0..rng.range_inclusive(1, 4))
            .map(|_| random_pose(&mut rng))
            .collect();
        let poses: Vec<ParsedPose> = (0..n)
            .map(|_| {
                // Mostly near-copies of a few base poses so that NMS has work to do.
                let mut pose = base[rng.range_inclusive(0, base.len() - 1)].clone();
                for j in 0..NUM_JOINTS {
                    if rng.next_f64() < 0.15 {
                        pose.joints[j] = random_pose(&mut rng).joints[j];
                    }
                }
                if pose.joint_count() == 0 {
                    pose = random_pose(&mut rng);
                }
                let confidence = (rng.range_inclusive(0, 10) as f64) / 10.0;
                ParsedPose {
                    pose,
                    confidence,
                    box_index: rng.range_inclusive(0, n_boxes - 1),
                }
            })
            .collect();
        let cfg = ParseConfig {
            eta,
            ..ParseConfig::default()
        };
        let kept = pose_nms(poses.clone(), &cfg);
        total += poses.len();
        survivors += kept.len();
        let mut ok = pose_nms(kept.clone(), &cfg) == kept;
        let mut boxes = HashSet::new();
        for (i, a) in kept.iter().enumerate() {
            ok &= boxes.insert(a.box_index);
            ok &= poses.contains(a);
            for b in &kept[i + 1..] {
                ok &= pose_distance(&a.pose, &b.pose).unwrap() > eta;
            }
        }
        ok &= kept.windows(2).all(|w| w[0].confidence >= w[1].confidence);
        violations += (!ok) as usize;
    }
    out.report(
        8,
        "NMS algebra",
        violations == 0,
        format!("{violations} of {C8_SETS} random pose sets violate idempotence or post-conditions ({survivors} of {total} poses survived)"),
    );
}

fn criterion_9() {
    let skel: Skeleton = canonical_skeleton();
    let cfg = SynthConfig {
        seed: 9,
        num_persons: (5, 5),
        ..SynthConfig::default()
    };
    let scene = generate_scene(&cfg).unwrap().scene;
    let maps = StageMaps::encode(&scene, &EncoderConfig::default(), &skel).unwrap();
    let boxes = extended_boxes(&scene, &scene.boxes);
    let pipeline = PipelineConfig::default();
    let mut times = Vec::new();
    let mut poses = 0;
    for _ in 0..7 {
        let t = Instant::now();
        let r = parse_scene_detailed(&boxes, &maps.maps, &maps.fields, &skel, &pipeline).unwrap();
        times.push(t.elapsed().as_secs_f64() * 1e3);
        poses = r.poses.len();
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    // Advisory: reported but not counted as a failure.
    let pass = median <= C9_BUDGET_MS;
    println!(
        "[{}] criterion  9 decode time (advisory): median {median:.1} ms over 7 runs (budget {C9_BUDGET_MS} ms), {} persons in scene, {poses} poses, single thread",
        if pass { "PASS" } else { "FAIL" },
        scene.persons.len()
    );
}

fn random_finite(rng: &mut CounterRng) -> f64 {
    loop {
        let v = match rng.range_inclusive(0, 3) {
            0 => f64::from_bits(rng.next_u64()),
            1 => rng.uniform(-1e4, 1e4),
            2 => -0.0,
            _ => rng.uniform(0.0, 1000.0).round() / 8.0,
        };
        if v.is_finite() {
            return v;
        }
    }
}

fn criterion_10(out: &mut Outcome) {
    let dir = tempfile::tempdir().unwrap();
    let mut tensor_drift = 0usize;
    let mut scene_drift = 0usize;
    for case in 0..C10_CASES {
        let mut rng = CounterRng::new(case, 0x10);
        let rank = rng.range_inclusive(0, 4);
        let dims: Vec<usize> = (0..rank).map(|_| rng.range_inclusive(0, 6)).collect();
        let n: usize = dims.iter().product();
        let values: Vec<f32> = (0..n)
            .map(|_| f32::from_bits(rng.next_u64() as u32))
            .collect();
        let t = Tensor::new(dims, values).unwrap();
        let path = dir.path().join("t.pft");
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        let same = back.dims == t.dims
            && back
                .values
                .iter()
                .map(|v| v.to_bits())
                .eq(t.values.iter().map(|v| v.to_bits()));
        tensor_drift += (!same) as usize;

        let n_persons = rng.range_inclusive(0, 4);
        let persons = (0..n_persons)
            .map(|_| {
                std::array::from_fn(|_| {
                    if rng.next_f64() < 0.3 {
                        [0.0, 0.0, 0.0]
                    } else {
                        [random_finite(&mut rng), random_finite(&mut rng), 1.0]
                    }
                })
            })
            .collect();
        let boxes: Vec<[f64; 4]> = (0..rng.range_inclusive(0, 4))
            .map(|_| std::array::from_fn(|_| random_finite(&mut rng)))
            .collect();
        let scores = |rng: &mut CounterRng, k: usize| {
            (rng.next_f64() < 0.5).then(|| (0..k).map(|_| random_finite(rng)).collect())
        };
        let file = SceneFile {
            image_id: format!("case_{case}"),
            image_width: rng.range_inclusive(1, 4000),
            image_height: rng.range_inclusive(1, 4000),
            persons,
            box_scores: scores(&mut rng, boxes.len()),
            person_scores: scores(&mut rng, n_persons),
            boxes,
        };
        let path = dir.path().join("s.json");
        file.write(&path).unwrap();
        let back = SceneFile::read(&path).unwrap();
        let bits = |f: &SceneFile| -> Vec<u64> {
            let mut v: Vec<u64> = f
                .persons
                .iter()
                .flatten()
                .flatten()
                .map(|x| x.to_bits())
                .collect();
            v.extend(f.boxes.iter().flatten().map(|x| x.to_bits()));
            v.extend(f.box_scores.iter().flatten().map(|x| x.to_bits()));
            v.extend(f.person_scores.iter().flatten().map(|x| x.to_bits()));
            v
        };
        let same = back == file && bits(&back) == bits(&file);
        scene_drift += (!same) as usize;
    }
    out.report(
        10,
        "bit-exact I/O",
        tensor_drift == 0 && scene_drift == 0,
        format!("{tensor_drift} of {C10_CASES} tensors and {scene_drift} of {C10_CASES} scene files changed on a write/read round trip"),
    );
}
