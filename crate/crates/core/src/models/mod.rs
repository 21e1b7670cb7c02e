//! Trainable patch models: `WithoutLvm` (linear mixer), `Lvm2Attn` (one
//! multi-head self-attention block) and `MiniMae` (attention encoder with
//! mask token and per-patch linear decoder), each with exact analytic
//! gradients.

mod forecast;
pub mod linalg;
mod network;
mod params;

use std::fmt;
use std::str::FromStr;

pub use forecast::{predict_forecast, ReconLayout, Reconstructor};
pub use linalg::Matrix;
pub use network::{
    attention_weights, backward, batch_loss, forward_attention, forward_classify, forward_embed,
    forward_forecast_linear, forward_mixer, forward_reconstruct, init_params, Example, Model,
    max_relative_gradient_error, random_batch, GRAD_CHECK_FLOOR, LAYER_NORM_EPS,
};
pub use params::{GradSet, ParamSet, Tensor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    /// Patch projection followed by a single linear layer.
    WithoutLvm,
    /// Patch projection followed by one randomly initialised attention block.
    Lvm2Attn,
    /// Attention encoder with learned mask token; the reference stand-in for
    /// a masked-autoencoder backbone.
    MiniMae,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::WithoutLvm, Arch::Lvm2Attn, Arch::MiniMae];

    pub fn uses_attention(self) -> bool {
        !matches!(self, Arch::WithoutLvm)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::WithoutLvm => "wolvm",
            Arch::Lvm2Attn => "lvm2attn",
            Arch::MiniMae => "minimae",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wolvm" => Ok(Arch::WithoutLvm),
            "lvm2attn" => Ok(Arch::Lvm2Attn),
            "minimae" => Ok(Arch::MiniMae),
            _ => Err(Error::InvalidArgument(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    /// Linear probe over mean-pooled patch embeddings.
    Classify,
    /// Linear head over the flattened patch embeddings.
    ForecastLinear,
    /// Masked-patch reconstruction of the horizon region.
    ForecastReconstruct,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [
        TaskKind::Classify,
        TaskKind::ForecastLinear,
        TaskKind::ForecastReconstruct,
    ];
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Classify => "classify",
            TaskKind::ForecastLinear => "forecast-linear",
            TaskKind::ForecastReconstruct => "forecast-reconstruct",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(TaskKind::Classify),
            "forecast-linear" => Ok(TaskKind::ForecastLinear),
            "forecast-reconstruct" => Ok(TaskKind::ForecastReconstruct),
            _ => Err(Error::InvalidArgument(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub task: TaskKind,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub patch_size: usize,
    pub image_size: usize,
    /// Images per sample fed to the classification head (variates).
    pub num_images: usize,
    pub num_classes: usize,
    /// Output length of the linear forecasting head.
    pub horizon: usize,
}

impl ModelConfig {
    /// Desk-scale defaults: 64×64 images, 8×8 patches, 64-dim tokens.
    pub fn new(arch: Arch, task: TaskKind) -> Self {
        Self {
            arch,
            task,
            embed_dim: 64,
            num_heads: 4,
            patch_size: 8,
            image_size: 64,
            num_images: 1,
            num_classes: 2,
            horizon: 96,
        }
    }

    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.embed_dim,
            self.num_heads,
            self.patch_size,
            self.image_size,
            self.num_images,
        ];
        if positive.contains(&0) {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "embed_dim {} is not divisible by {} heads",
                self.embed_dim, self.num_heads
            )));
        }
        if self.image_size % self.patch_size != 0 {
            return Err(Error::IndivisiblePatch {
                size: self.image_size,
                patch: self.patch_size,
            });
        }
        match self.task {
            TaskKind::Classify if self.num_classes < 2 => Err(Error::InvalidArgument(
                "classification needs at least two classes".into(),
            )),
            TaskKind::ForecastLinear if self.horizon == 0 => {
                Err(Error::InvalidArgument("forecast horizon must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}
