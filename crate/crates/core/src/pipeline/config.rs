use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendEndpoint, InpaintParams};
use crate::blend::BlendConfig;
use crate::context::ContextConfig;
use crate::error::{Error, Result};
use crate::prompts::INFERENCE_PROMPT;
use crate::resample::ResampleFilter;

/// Inference parameters forwarded to the inpainting backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintSettings {
    pub prompt: String,
    pub seed: u64,
    pub num_steps: u32,
    pub noise_mix: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guidance: Option<f32>,
    /// Fixed request id; by default one is derived from the input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

impl Default for InpaintSettings {
    fn default() -> Self {
        let p = InpaintParams::default();
        Self {
            prompt: INFERENCE_PROMPT.into(),
            seed: p.seed,
            num_steps: p.num_steps,
            noise_mix: p.noise_mix,
            guidance: None,
            request_id: None,
        }
    }
}

impl InpaintSettings {
    pub fn params(&self, request_id: String) -> InpaintParams {
        InpaintParams {
            prompt: self.prompt.clone(),
            seed: self.seed,
            num_steps: self.num_steps,
            noise_mix: self.noise_mix,
            request_id,
            guidance: self.guidance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// Significance- and distance-gated feathered blend.
    #[default]
    Custom,
    /// Hard replacement inside the mask (ablation).
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub context: ContextConfig,
    pub superres_scale: u32,
    /// Filter used to bring the superresolved image back to band scale.
    pub unwarp_filter: ResampleFilter,
    /// Extra dilation of the mask (baseline comparisons use 10-20).
    pub baseline_mask_dilation: usize,
    /// Furniture class set file; the bundled ADE20K set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_set: Option<PathBuf>,
    pub blend_mode: BlendMode,
    pub inpaint: InpaintSettings,
    pub blend: BlendConfig,
    pub backend: BackendEndpoint,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            context: ContextConfig::default(),
            superres_scale: 4,
            unwarp_filter: ResampleFilter::Lanczos3,
            baseline_mask_dilation: 0,
            class_set: None,
            blend_mode: BlendMode::Custom,
            inpaint: InpaintSettings::default(),
            blend: BlendConfig::default(),
            backend: BackendEndpoint::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.superres_scale != 2 && self.superres_scale != 4 {
            return Err(Error::param(format!(
                "superres_scale {} is not 2 or 4",
                self.superres_scale
            )));
        }
        self.blend.validate()?;
        self.backend.validate()?;
        self.inpaint.params(String::new()).validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Sets a dotted key such as `blend.tau` from its TOML literal text.
    /// Bare words that are not valid TOML are taken as strings.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}`: `{part}` is not a section")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value);
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let updated: Self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("`{key} = {raw}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
