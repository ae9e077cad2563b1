//! Tensor directories: one `PFT1` file per map or field plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use posebox::codec::{background_map, EncoderConfig};
use posebox::{FieldGrid, NUM_JOINTS, NUM_LIMBS};

use crate::error::{CliError, CliResult};
use crate::tensor::{read_tensor, write_tensor, Tensor};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Another tensor directory holding the same scene at a different scale,
/// relative to the directory of the manifest that lists it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub scale: f64,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorManifest {
    pub format: String,
    #[serde(default)]
    pub image_id: String,
    pub image_width: usize,
    pub image_height: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub stride: usize,
    pub sigma: f64,
    pub delta: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    pub confidence_maps: Vec<String>,
    pub direction_fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
    #[serde(default)]
    pub scales: Vec<ScaleEntry>,
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occluded_limb: Option<usize>,
    #[serde(default)]
    pub occluded_persons: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn unit_scale() -> f64 {
    1.0
}

/// Maps and fields of one scene at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    pub manifest: TensorManifest,
    pub maps: Vec<FieldGrid>,
    pub fields: Vec<FieldGrid>,
}

impl TensorManifest {
    /// Manifest for freshly encoded grids with the default file names.
    pub fn for_grids(
        image_id: &str,
        image_width: usize,
        image_height: usize,
        grid: &FieldGrid,
        encoder: &EncoderConfig,
    ) -> Self {
        Self {
            format: "PFT1".into(),
            image_id: image_id.into(),
            image_width,
            image_height,
            grid_width: grid.width(),
            grid_height: grid.height(),
            stride: grid.stride(),
            sigma: encoder.sigma,
            delta: encoder.delta,
            scale: 1.0,
            confidence_maps: (0..NUM_JOINTS).map(|j| format!("map_{j:02}.pft")).collect(),
            direction_fields: (0..NUM_LIMBS)
                .map(|c| format!("field_{c:02}.pft"))
                .collect(),
            background: Some("background.pft".into()),
            scales: Vec::new(),
            noise_amplitude: 0.0,
            occluded_limb: None,
            occluded_persons: Vec::new(),
            seed: None,
        }
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::json(&path, e))
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifests always serialize");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn scale_dir(&self, dir: &Path, scale: f64) -> Option<PathBuf> {
        self.scales
            .iter()
            .find(|s| s.scale == scale)
            .map(|s| dir.join(&s.dir))
    }
}

/// Writes every grid and then the manifest, so a present manifest implies
/// complete tensors.
pub fn write_tensor_set(dir: &Path, set: &TensorSet) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let m = &set.manifest;
    for (name, grid) in m.confidence_maps.iter().zip(&set.maps) {
        write_tensor(&dir.join(name), &Tensor::from_grid(grid))?;
    }
    for (name, grid) in m.direction_fields.iter().zip(&set.fields) {
        write_tensor(&dir.join(name), &Tensor::from_grid(grid))?;
    }
    if let Some(name) = &m.background {
        let bg = background_map(&set.maps)?;
        write_tensor(&dir.join(name), &Tensor::from_grid(&bg))?;
    }
    m.write(dir)
}

pub fn read_tensor_set(dir: &Path) -> CliResult<TensorSet> {
    let manifest = TensorManifest::read(dir)?;
    if manifest.format != "PFT1" {
        return Err(CliError::Data(format!(
            "unknown tensor format {:?}",
            manifest.format
        )));
    }
    if manifest.confidence_maps.len() != NUM_JOINTS || manifest.direction_fields.len() != NUM_LIMBS
    {
        return Err(CliError::Data(format!(
            "{}: manifest lists {} maps and {} fields, expected {NUM_JOINTS} and {NUM_LIMBS}",
            dir.display(),
            manifest.confidence_maps.len(),
            manifest.direction_fields.len()
        )));
    }
    let load = |name: &String, channels: usize| -> CliResult<FieldGrid> {
        let path = dir.join(name);
        let grid = read_tensor(&path)?.into_grid(manifest.stride)?;
        if grid.width() != manifest.grid_width
            || grid.height() != manifest.grid_height
            || grid.channels() != channels
        {
            return Err(CliError::Data(format!(
                "{}: tensor is {}x{}x{}, manifest says {}x{}x{channels}",
                path.display(),
                grid.height(),
                grid.width(),
                grid.channels(),
                manifest.grid_height,
                manifest.grid_width
            )));
        }
        Ok(grid)
    };
    let maps = manifest
        .confidence_maps
        .iter()
        .map(|n| load(n, 1))
        .collect::<CliResult<_>>()?;
    let fields = manifest
        .direction_fields
        .iter()
        .map(|n| load(n, 2))
        .collect::<CliResult<_>>()?;
    Ok(TensorSet {
        manifest,
        maps,
        fields,
    })
}
