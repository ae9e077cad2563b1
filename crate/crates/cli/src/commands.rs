use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use posebox::codec::{EncoderConfig, StageMaps};
use posebox::detect::{extend_box, fuse_scales, DetectConfig, GridShape, ScaleOutput};
use posebox::eval::{average_precision, EvalReport, OksConfig};
use posebox::parse::{parse_scene, ParseConfig, PipelineConfig};
use posebox::synth::{generate_scene, perturb_fields, CounterRng, Occlusion, SynthConfig};
use posebox::{canonical_skeleton, NUM_JOINTS};

use crate::error::{CliError, CliResult};
use crate::manifest::{read_tensor_set, write_tensor_set, TensorManifest, TensorSet};
use crate::render::render;
use crate::scene_file::{read_scene_set, triples_to_pose, SceneFile};
use crate::{Command, EncodeArgs, EvalArgs, ParseArgs, RenderArgs, SynthArgs, THREADS_ENV};

/// Stream used to derive per-scene seeds of a synthetic corpus.
const CORPUS_STREAM: u64 = 0xC0;

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Encode(a) => encode(&a),
        Command::Parse(a) => parse(&a),
        Command::Eval(a) => {
            let report = eval(&a)?;
            println!("{}", report_json(&report));
            Ok(())
        }
        Command::Synth(a) => synth(&a).map(|_| ()),
        Command::Render(a) => render_file(&a),
    }
}

pub fn encode(a: &EncodeArgs) -> CliResult<()> {
    let cfg = EncoderConfig {
        sigma: a.sigma,
        delta: a.delta,
        stride: a.stride,
    };
    cfg.validate()?;
    let file = SceneFile::read(&a.scene_file)?;
    let scene = file.to_annotation()?;
    let stage = StageMaps::encode(&scene, &cfg, &canonical_skeleton())?;
    let manifest = TensorManifest::for_grids(
        &file.image_id,
        scene.image_width,
        scene.image_height,
        &stage.maps[0],
        &cfg,
    );
    write_tensor_set(
        &a.out_dir,
        &TensorSet {
            manifest,
            maps: stage.maps,
            fields: stage.fields,
        },
    )
}

fn pipeline_config(a: &ParseArgs) -> PipelineConfig {
    PipelineConfig {
        detect: DetectConfig {
            peak_threshold: a.peak_threshold,
            nms_window: a.nms_window,
            box_extension: a.box_extension,
            ..DetectConfig::default()
        },
        parse: ParseConfig {
            eta: a.eta,
            nms: !a.no_nms,
            completion: !a.no_completion,
            ..ParseConfig::default()
        },
    }
}

pub fn parse(a: &ParseArgs) -> CliResult<()> {
    let cfg = pipeline_config(a);
    cfg.detect.validate()?;
    cfg.parse.validate()?;
    let base = read_tensor_set(&a.tensor_dir)?;
    let boxes_file = SceneFile::read(&a.boxes_file)?;
    let m = &base.manifest;
    if (boxes_file.image_width, boxes_file.image_height) != (m.image_width, m.image_height) {
        return Err(CliError::Data(format!(
            "boxes file is for a {}x{} image, tensors for {}x{}",
            boxes_file.image_width, boxes_file.image_height, m.image_width, m.image_height
        )));
    }
    let (w, h) = (m.image_width as f64, m.image_height as f64);
    let boxes: Vec<_> = boxes_file
        .bounding_boxes()?
        .iter()
        .map(|b| extend_box(b, w, h, cfg.detect.box_extension))
        .collect();

    let (maps, fields) = if a.scales.is_empty() {
        (base.maps, base.fields)
    } else {
        let mut per_scale = Vec::with_capacity(a.scales.len());
        for &s in &a.scales {
            let set = if s == m.scale {
                base.clone()
            } else {
                let dir = m.scale_dir(&a.tensor_dir, s).ok_or_else(|| {
                    CliError::Data(format!("scale {s} is not listed in the manifest"))
                })?;
                let set = read_tensor_set(&dir)?;
                if set.manifest.scale != s {
                    return Err(CliError::Data(format!(
                        "{} holds scale {}, manifest says {s}",
                        dir.display(),
                        set.manifest.scale
                    )));
                }
                set
            };
            per_scale.push(ScaleOutput {
                scale: s / m.scale,
                maps: set.maps,
                fields: set.fields,
            });
        }
        fuse_scales(&per_scale, GridShape::of(&base.maps[0]))?
    };

    let poses = parse_scene(&boxes, &maps, &fields, &canonical_skeleton(), &cfg)?;
    let id = if boxes_file.image_id.is_empty() {
        &m.image_id
    } else {
        &boxes_file.image_id
    };
    SceneFile::from_predictions(id, m.image_width, m.image_height, &poses).write(&a.out_file)
}

#[derive(Debug, Clone, Deserialize)]
struct OksFile {
    per_joint_k: [f64; NUM_JOINTS],
}

pub fn eval(a: &EvalArgs) -> CliResult<EvalReport> {
    let cfg = match &a.oks_config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let f: OksFile = serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?;
            OksConfig {
                per_joint_k: f.per_joint_k,
            }
        }
        None => OksConfig::default(),
    };
    cfg.validate()?;
    let preds = read_scene_set(&a.pred)?;
    let gts = read_scene_set(&a.gt)?;

    let mut by_id: BTreeMap<&str, &SceneFile> = BTreeMap::new();
    let mut offenders = BTreeSet::new();
    for p in &preds {
        if by_id.insert(&p.image_id, p).is_some() {
            offenders.insert(format!("{:?} (duplicate prediction)", p.image_id));
        }
    }
    let gt_ids: BTreeSet<&str> = gts.iter().map(|g| g.image_id.as_str()).collect();
    if gt_ids.len() != gts.len() {
        offenders.insert("duplicate ground-truth ids".to_string());
    }
    for g in &gts {
        if !by_id.contains_key(g.image_id.as_str()) {
            offenders.insert(format!("{:?} (no prediction)", g.image_id));
        }
    }
    for p in &preds {
        if !gt_ids.contains(p.image_id.as_str()) {
            offenders.insert(format!("{:?} (no ground truth)", p.image_id));
        }
    }
    if !offenders.is_empty() {
        let list: Vec<String> = offenders.into_iter().collect();
        return Err(CliError::Data(format!(
            "image ids do not align: {}",
            list.join(", ")
        )));
    }

    let mut pred_scenes = Vec::with_capacity(gts.len());
    let mut gt_scenes = Vec::with_capacity(gts.len());
    for g in &gts {
        gt_scenes.push(g.to_annotation()?);
        pred_scenes.push(by_id[g.image_id.as_str()].to_predictions()?);
    }
    Ok(average_precision(&pred_scenes, &gt_scenes, &cfg)?)
}

pub fn report_json(r: &EvalReport) -> String {
    serde_json::json!({
        "ap": r.ap,
        "ap_per_threshold": r.ap_per_threshold,
        "mean_oks": r.mean_oks,
        "matched": r.matched,
        "missed": r.missed,
        "spurious": r.spurious,
    })
    .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub image_id: String,
    pub seed: u64,
    pub scene: String,
    pub tensors: String,
    pub requested_persons: usize,
    pub persons: usize,
    pub occluded_persons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub scenes: usize,
    pub persons: (usize, usize),
    pub noise: f64,
    pub occlude_limb: Option<usize>,
    pub occlude_probability: f64,
    pub min_separation: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub sigma: f64,
    pub delta: f64,
    pub stride: usize,
    pub entries: Vec<CorpusEntry>,
}

pub const CORPUS_MANIFEST: &str = "corpus.json";

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(e.to_string()))
}

/// Seed of scene `index` in a corpus generated from `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    CounterRng::at(seed, CORPUS_STREAM, index as u64)
}

pub fn synth(a: &SynthArgs) -> CliResult<CorpusManifest> {
    let encoder = EncoderConfig {
        sigma: a.sigma,
        delta: a.delta,
        stride: a.stride,
    };
    encoder.validate()?;
    let base = SynthConfig {
        seed: a.seed,
        num_persons: a.persons,
        min_separation: a.min_separation,
        image_width: a.width,
        image_height: a.height,
        noise_amplitude: a.noise,
        occlusion: a.occlude_limb.map(|limb| Occlusion {
            limb,
            probability: a.occlude_probability,
        }),
        ..SynthConfig::default()
    };
    base.validate()?;
    let scenes_dir = a.out_dir.join("scenes");
    let tensors_dir = a.out_dir.join("tensors");
    for d in [&scenes_dir, &tensors_dir] {
        fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
    }
    let skeleton = canonical_skeleton();

    let one = |i: usize| -> CliResult<CorpusEntry> {
        let cfg = SynthConfig {
            seed: scene_seed(a.seed, i),
            ..base.clone()
        };
        let generated = generate_scene(&cfg)?;
        let scene = &generated.scene;
        let id = format!("scene_{i:04}");
        let stage = StageMaps::encode(scene, &encoder, &skeleton)?;
        let perturbed =
            perturb_fields(&stage.maps, &stage.fields, scene, &encoder, &skeleton, &cfg)?;
        let mut manifest =
            TensorManifest::for_grids(&id, a.width, a.height, &stage.maps[0], &encoder);
        manifest.noise_amplitude = a.noise;
        manifest.occluded_limb = a.occlude_limb;
        manifest.occluded_persons = perturbed.occluded_persons.clone();
        manifest.seed = Some(cfg.seed);
        let scene_rel = format!("scenes/{id}.json");
        let tensor_rel = format!("tensors/{id}");
        SceneFile::from_annotation(&id, scene).write(&a.out_dir.join(&scene_rel))?;
        write_tensor_set(
            &a.out_dir.join(&tensor_rel),
            &TensorSet {
                manifest,
                maps: perturbed.maps,
                fields: perturbed.fields,
            },
        )?;
        Ok(CorpusEntry {
            image_id: id,
            seed: cfg.seed,
            scene: scene_rel,
            tensors: tensor_rel,
            requested_persons: generated.requested_persons,
            persons: scene.persons.len(),
            occluded_persons: perturbed.occluded_persons,
        })
    };
    let entries = thread_pool()?.install(|| {
        (0..a.scenes)
            .into_par_iter()
            .map(one)
            .collect::<CliResult<Vec<_>>>()
    })?;

    let corpus = CorpusManifest {
        seed: a.seed,
        scenes: a.scenes,
        persons: a.persons,
        noise: a.noise,
        occlude_limb: a.occlude_limb,
        occlude_probability: a.occlude_probability,
        min_separation: a.min_separation,
        image_width: a.width,
        image_height: a.height,
        sigma: a.sigma,
        delta: a.delta,
        stride: a.stride,
        entries,
    };
    let path = a.out_dir.join(CORPUS_MANIFEST);
    let text = serde_json::to_string_pretty(&corpus).expect("manifests always serialize");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(corpus)
}

pub fn render_file(a: &RenderArgs) -> CliResult<()> {
    let file = SceneFile::read(&a.scene_file)?;
    let persons = file
        .persons
        .iter()
        .map(triples_to_pose)
        .collect::<CliResult<Vec<_>>>()?;
    let (w, h) = (
        u32::try_from(file.image_width),
        u32::try_from(file.image_height),
    );
    let (Ok(w), Ok(h)) = (w, h) else {
        return Err(CliError::Data("image size does not fit a raster".into()));
    };
    let img = render(w, h, &persons, &file.boxes, &canonical_skeleton());
    write_png(&img, &a.out_image)
}

fn write_png(img: &image::RgbImage, path: &Path) -> CliResult<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
