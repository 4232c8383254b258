use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::transform::DEFAULT_HALF_EXTENT;
use crate::network::{Activation, InitScheme, MlpArchitecture};

/// Hyperparameters of a fit. [`Default`] gives the full-scale setup
/// (6 x 256 ReLU network, skip into layer 3, Adam at 1e-4 for 25000
/// epochs, lambda = 0.1); [`TrainConfig::desk`] is a reduced network and
/// schedule that finishes in seconds on one core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// `None` means `min(N, 1024)`.
    pub surface_batch_size: Option<usize>,
    /// `None` means the surface batch size.
    pub eikonal_batch_size: Option<usize>,
    pub seed: u64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub skip_layer: Option<usize>,
    pub activation: Activation,
    pub init: InitScheme,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Std of the surface perturbations in the Eikonal batch (normalised units).
    pub sigma: f64,
    pub half_extent: f64,
    /// Weight of the optional nesting hinge; 0 disables it.
    pub nesting_weight: f64,
    /// Log progress every this many epochs; 0 is silent.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25_000,
            learning_rate: 1e-4,
            lambda: 0.1,
            surface_batch_size: None,
            eikonal_batch_size: None,
            seed: 0,
            hidden_layers: 6,
            hidden_width: 256,
            skip_layer: Some(3),
            activation: Activation::Relu,
            init: InitScheme::Sphere,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sigma: 0.1,
            half_extent: DEFAULT_HALF_EXTENT,
            nesting_weight: 0.0,
            log_every: 0,
        }
    }
}

pub const MAX_DEFAULT_BATCH: usize = 1024;

impl TrainConfig {
    /// 4 x 64 network trained for 2000 epochs; everything else as in
    /// [`Default`].
    pub fn desk() -> Self {
        Self {
            epochs: 2000,
            hidden_layers: 4,
            hidden_width: 64,
            ..Self::default()
        }
    }

    pub fn architecture(&self, channels: usize) -> MlpArchitecture {
        MlpArchitecture {
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            output_channels: channels,
            skip_layer: self.skip_layer,
            activation: self.activation,
        }
    }

    pub fn surface_batch(&self, n: usize) -> usize {
        self.surface_batch_size.unwrap_or(n.min(MAX_DEFAULT_BATCH))
    }

    pub fn eikonal_batch(&self, largest_cloud: usize) -> usize {
        self.eikonal_batch_size
            .unwrap_or_else(|| self.surface_batch(largest_cloud))
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {}", self.lambda));
        }
        if self.surface_batch_size == Some(0) || self.eikonal_batch_size == Some(0) {
            return bad("batch sizes must be at least 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma {}", self.sigma));
        }
        if !(self.nesting_weight >= 0.0 && self.nesting_weight.is_finite()) {
            return bad(format!("nesting weight {}", self.nesting_weight));
        }
        if !(self.half_extent > 0.0 && self.half_extent <= 1.0) {
            return bad(format!("half extent {}", self.half_extent));
        }
        self.architecture(1).validate()
    }

    /// Flat `key = value` view, also the format accepted by
    /// [`TrainConfig::set`].
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_else(|| "auto".into());
        let (activation, beta) = match self.activation {
            Activation::Relu => ("relu", None),
            Activation::Softplus { beta } => ("softplus", Some(beta)),
        };
        let mut kv = vec![
            ("epochs", self.epochs.to_string()),
            ("lr", self.learning_rate.to_string()),
            ("lambda", self.lambda.to_string()),
            ("batch", opt(self.surface_batch_size)),
            ("eikonal_batch", opt(self.eikonal_batch_size)),
            ("seed", self.seed.to_string()),
            ("layers", self.hidden_layers.to_string()),
            ("width", self.hidden_width.to_string()),
            ("skip", self.skip_layer.map(|s| s.to_string()).unwrap_or_else(|| "none".into())),
            ("activation", activation.to_string()),
        ];
        if let Some(beta) = beta {
            kv.push(("beta", beta.to_string()));
        }
        kv.extend([
            (
                "init",
                match self.init {
                    InitScheme::Standard => "standard",
                    InitScheme::Sphere => "sphere",
                }
                .to_string(),
            ),
            ("adam_beta1", self.beta1.to_string()),
            ("adam_beta2", self.beta2.to_string()),
            ("adam_eps", self.epsilon.to_string()),
            ("sigma", self.sigma.to_string()),
            ("half_extent", self.half_extent.to_string()),
            ("nesting_weight", self.nesting_weight.to_string()),
        ]);
        kv
    }

    /// Sets one field from its `key_values` name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value {v:?} for {key}")))
        }
        let auto = |v: &str| -> Result<Option<usize>> {
            if v == "auto" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        };
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "lr" | "learning_rate" => self.learning_rate = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "batch" | "surface_batch_size" => self.surface_batch_size = auto(value)?,
            "eikonal_batch" | "eikonal_batch_size" => self.eikonal_batch_size = auto(value)?,
            "seed" => self.seed = num(key, value)?,
            "layers" | "hidden_layers" => {
                self.hidden_layers = num(key, value)?;
                // a skip into a layer that no longer exists is dropped
                if self.skip_layer.is_some_and(|s| s > self.hidden_layers) {
                    self.skip_layer = None;
                }
            }
            "width" | "hidden_width" => self.hidden_width = num(key, value)?,
            "skip" | "skip_layer" => {
                self.skip_layer = match value {
                    "none" | "0" => None,
                    v => Some(num(key, v)?),
                }
            }
            "activation" => {
                self.activation = match value {
                    "relu" => Activation::Relu,
                    "softplus" => match self.activation {
                        s @ Activation::Softplus { .. } => s,
                        Activation::Relu => Activation::softplus(),
                    },
                    v => return Err(Error::InvalidArgument(format!("unknown activation {v:?}"))),
                }
            }
            "beta" => self.activation = Activation::Softplus { beta: num(key, value)? },
            "init" => {
                self.init = match value {
                    "standard" => InitScheme::Standard,
                    "sphere" => InitScheme::Sphere,
                    v => return Err(Error::InvalidArgument(format!("unknown init scheme {v:?}"))),
                }
            }
            "adam_beta1" => self.beta1 = num(key, value)?,
            "adam_beta2" => self.beta2 = num(key, value)?,
            "adam_eps" => self.epsilon = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "half_extent" => self.half_extent = num(key, value)?,
            "nesting_weight" => self.nesting_weight = num(key, value)?,
            "log_every" => self.log_every = num(key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected key = value", n + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::InvalidArgument(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_full_scale() {
        let c = TrainConfig::default();
        assert_eq!(c.epochs, 25_000);
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.lambda, 0.1);
        assert_eq!((c.hidden_layers, c.hidden_width, c.skip_layer), (6, 256, Some(3)));
        assert_eq!(c.activation, Activation::Relu);
        assert_eq!(c.surface_batch(200), 200);
        assert_eq!(c.surface_batch(5000), 1024);
        assert_eq!(c.eikonal_batch(200), 200);
    }

    #[test]
    fn key_values_round_trip() {
        let mut c = TrainConfig::desk();
        c.activation = Activation::Softplus { beta: 50.0 };
        c.surface_batch_size = Some(128);
        c.skip_layer = None;
        let text: String = c.key_values().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut back = TrainConfig::default();
        back.merge_text(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_config_lines() {
        let mut c = TrainConfig::default();
        assert!(c.merge_text("epochs 10").is_err());
        assert!(c.merge_text("colour = red").is_err());
        assert!(c.merge_text("epochs = ten").is_err());
        c.merge_text("layers = 2").unwrap();
        assert_eq!(c.skip_layer, None);
        c.merge_text("layers = 5\nskip = 2").unwrap();
        assert_eq!(c.skip_layer, Some(2));
        c.merge_text("# comment\n\nepochs = 10\n").unwrap();
        assert_eq!(c.epochs, 10);
        c.epochs = 0;
        assert!(c.validate().is_err());
    }
}
