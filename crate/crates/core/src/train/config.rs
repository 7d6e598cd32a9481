//! Run configuration: training hyperparameters, contact-map settings, and
//! scene sampling, persisted as flat `key value` text with `#` comments.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_contact: f64,
    pub lr_motion: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Contact-map normalizing factor, meters.
    pub sigma: f64,
    /// Kept DCT coefficients per contact channel.
    pub dct_l: usize,
    /// Contact threshold for point extraction.
    pub epsilon: f64,
    /// Observed frames.
    pub past: usize,
    /// Predicted frames.
    pub future: usize,
    /// Scene sampling around the last observed root.
    pub sample_radius: f64,
    pub sample_count: usize,
    pub voxel_r: usize,
    pub root_dct_l: usize,
    pub hidden: usize,
    pub fps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 50,
            lr_contact: 0.0005,
            lr_motion: 0.001,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            sigma: 0.2,
            dct_l: 20,
            epsilon: 0.32,
            past: 30,
            future: 60,
            sample_radius: 2.5,
            sample_count: 5000,
            voxel_r: 32,
            root_dct_l: 60,
            hidden: 128,
            fps: 30.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs as f64),
            ("lr_contact", self.lr_contact),
            ("lr_motion", self.lr_motion),
            ("sigma", self.sigma),
            ("dct_l", self.dct_l as f64),
            ("past", self.past as f64),
            ("future", self.future as f64),
            ("sample_radius", self.sample_radius),
            ("sample_count", self.sample_count as f64),
            ("voxel_r", self.voxel_r as f64),
            ("root_dct_l", self.root_dct_l as f64),
            ("hidden", self.hidden as f64),
            ("fps", self.fps),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.epsilon <= 0.0 || self.epsilon >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.dct_l > self.past + self.future {
            return Err(Error::InvalidParameter(format!(
                "dct_l {} exceeds past+future {}",
                self.dct_l,
                self.past + self.future
            )));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> (f64, f64, f64) {
        (self.lambda1, self.lambda2, self.lambda3)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# run configuration\n");
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push(' ');
            s.push_str(&v);
            s.push('\n');
        };
        kv("epochs", self.epochs.to_string());
        kv("lr_contact", self.lr_contact.to_string());
        kv("lr_motion", self.lr_motion.to_string());
        kv("lambda1", self.lambda1.to_string());
        kv("lambda2", self.lambda2.to_string());
        kv("lambda3", self.lambda3.to_string());
        kv("sigma", self.sigma.to_string());
        kv("dct_l", self.dct_l.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("past", self.past.to_string());
        kv("future", self.future.to_string());
        kv("sample_radius", self.sample_radius.to_string());
        kv("sample_count", self.sample_count.to_string());
        kv("voxel_r", self.voxel_r.to_string());
        kv("root_dct_l", self.root_dct_l.to_string());
        kv("hidden", self.hidden.to_string());
        kv("fps", self.fps.to_string());
        kv("seed", self.seed.to_string());
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = TrainConfig::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = || format!("{}:{}", path.display(), ln + 1);
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(loc(), "expected `key value`"))?;
            let value = value.trim();
            let bad = |what: &str| Error::parse(loc(), format!("{key}: expected {what}, got {value:?}"));
            match key {
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("an integer"))?,
                "lr_contact" => cfg.lr_contact = value.parse().map_err(|_| bad("a number"))?,
                "lr_motion" => cfg.lr_motion = value.parse().map_err(|_| bad("a number"))?,
                "lambda1" => cfg.lambda1 = value.parse().map_err(|_| bad("a number"))?,
                "lambda2" => cfg.lambda2 = value.parse().map_err(|_| bad("a number"))?,
                "lambda3" => cfg.lambda3 = value.parse().map_err(|_| bad("a number"))?,
                "sigma" => cfg.sigma = value.parse().map_err(|_| bad("a number"))?,
                "dct_l" => cfg.dct_l = value.parse().map_err(|_| bad("an integer"))?,
                "epsilon" => cfg.epsilon = value.parse().map_err(|_| bad("a number"))?,
                "past" => cfg.past = value.parse().map_err(|_| bad("an integer"))?,
                "future" => cfg.future = value.parse().map_err(|_| bad("an integer"))?,
                "sample_radius" => cfg.sample_radius = value.parse().map_err(|_| bad("a number"))?,
                "sample_count" => cfg.sample_count = value.parse().map_err(|_| bad("an integer"))?,
                "voxel_r" => cfg.voxel_r = value.parse().map_err(|_| bad("an integer"))?,
                "root_dct_l" => cfg.root_dct_l = value.parse().map_err(|_| bad("an integer"))?,
                "hidden" => cfg.hidden = value.parse().map_err(|_| bad("an integer"))?,
                "fps" => cfg.fps = value.parse().map_err(|_| bad("a number"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("an integer"))?,
                other => {
                    return Err(Error::parse(loc(), format!("unknown configuration key {other:?}")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reported_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_contact, 0.0005);
        assert_eq!(c.lr_motion, 0.001);
        assert_eq!((c.lambda1, c.lambda2, c.lambda3), (1.0, 1.0, 0.1));
        assert_eq!(c.sigma, 0.2);
        assert_eq!(c.dct_l, 20);
        assert_eq!(c.epsilon, 0.32);
        assert_eq!((c.past, c.future), (30, 60));
        assert_eq!(c.sample_radius, 2.5);
        assert_eq!(c.sample_count, 5000);
        assert_eq!(c.epochs, 50);
        assert_eq!(c.root_dct_l, 60);
        assert_eq!(c.hidden, 128);
        c.validate().unwrap();
    }

    #[test]
    fn text_roundtrip() {
        let dir = std::env::temp_dir().join("camf-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        let mut cfg = TrainConfig::default();
        cfg.epochs = 3;
        cfg.sigma = 0.25;
        cfg.seed = 1234;
        cfg.save(&path).unwrap();
        let loaded = TrainConfig::load(&path).unwrap();
        assert_eq!(cfg, loaded);
    }

    #[test]
    fn unknown_key_and_bad_value_are_errors() {
        let dir = std::env::temp_dir().join("camf-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "nonsense 3\n").unwrap();
        assert!(TrainConfig::load(&path).is_err());
        std::fs::write(&path, "epochs banana\n").unwrap();
        assert!(TrainConfig::load(&path).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = TrainConfig::default();
        c.sigma = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.lambda3 = -0.1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
    }
}
