//! Flat configuration: one TOML table of scalar keys, plus `key=value`
//! overrides from the command line.
//!
//! Keys are case-insensitive (`N0` and `n0` are the same key). Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rddce::estimators::RddceConfig;
use rddce::sim::{ChannelUpdate, SimConfig};

use crate::CliError;

/// Every configurable field, flattened. Field order is the echo order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlatConfig {
    pub seed: u64,
    pub method: String,
    pub channel: String,
    #[serde(with = "float_or_inf")]
    pub snr_db: f64,
    pub lambda: f64,
    pub channel_update: String,
    pub frames: usize,
    pub samples: usize,
    pub nc: usize,
    pub symbols_per_frame: usize,
    pub sample_period_ns: f64,
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
    pub n_taps: usize,
    pub n_w: usize,
    pub n_iter: usize,
    pub k_keep: usize,
    pub metric: String,
    pub max_redraws: usize,
    pub redecide: bool,
    pub gamma: f64,
    pub custom_delays_ns: Vec<f64>,
    pub custom_powers_db: Vec<f64>,
}

impl Default for FlatConfig {
    fn default() -> Self {
        FlatConfig::from(&SimConfig::default())
    }
}

impl From<&SimConfig> for FlatConfig {
    fn from(c: &SimConfig) -> Self {
        let r = &c.rddce;
        Self {
            seed: c.seed,
            method: c.method.to_string(),
            channel: c.channel.to_string(),
            snr_db: c.snr_db,
            lambda: c.lambda,
            channel_update: c.channel_update.to_string(),
            frames: c.frames,
            samples: c.samples,
            nc: c.nc,
            symbols_per_frame: c.symbols_per_frame,
            sample_period_ns: c.sample_period_ns,
            n0: r.n0,
            n1: r.n1,
            n2: r.n2,
            n_taps: r.n_taps,
            n_w: r.n_w,
            n_iter: r.n_iter,
            k_keep: r.k_keep,
            metric: r.metric.to_string(),
            max_redraws: r.max_redraws,
            redecide: r.redecide,
            gamma: c.gamma,
            custom_delays_ns: c.custom_delays_ns.clone(),
            custom_powers_db: c.custom_powers_db.clone(),
        }
    }
}

impl FlatConfig {
    /// Converts and validates.
    pub fn to_sim(&self) -> Result<SimConfig, CliError> {
        let field = |name: &str, e: String| CliError::Config(format!("{name}: {e}"));
        let cfg = SimConfig {
            nc: self.nc,
            symbols_per_frame: self.symbols_per_frame,
            frames: self.frames,
            samples: self.samples,
            snr_db: self.snr_db,
            lambda: self.lambda,
            channel_update: self
                .channel_update
                .parse::<ChannelUpdate>()
                .map_err(|e| field("channel_update", e))?,
            channel: self.channel.parse().map_err(|e| field("channel", e))?,
            sample_period_ns: self.sample_period_ns,
            custom_delays_ns: self.custom_delays_ns.clone(),
            custom_powers_db: self.custom_powers_db.clone(),
            method: self.method.parse().map_err(|e| field("method", e))?,
            rddce: RddceConfig {
                n0: self.n0,
                n1: self.n1,
                n2: self.n2,
                n_taps: self.n_taps,
                n_w: self.n_w,
                n_iter: self.n_iter,
                k_keep: self.k_keep,
                metric: self.metric.parse().map_err(|e| field("metric", e))?,
                max_redraws: self.max_redraws,
                redecide: self.redecide,
            },
            gamma: self.gamma,
            seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// TOML text that parses back to this configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config is always representable")
    }
}

/// Reads `path` (if any), applies `overrides`, validates.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<SimConfig, CliError> {
    parse_flat(path, overrides)?.to_sim()
}

/// Same as [`parse_config`] without the final validation.
pub fn parse_flat(path: Option<&Path>, overrides: &[String]) -> Result<FlatConfig, CliError> {
    let mut table = toml::Table::new();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (key, value) in doc {
            if let toml::Value::Table(_) = value {
                return Err(CliError::Config(format!(
                    "{}: `{key}` is a table; the configuration is flat",
                    path.display()
                )));
            }
            insert_unique(&mut table, &key, value)?;
        }
    }
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
        table.insert(key.trim().to_ascii_lowercase(), parse_value(raw.trim()));
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

fn insert_unique(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let lower = key.to_ascii_lowercase();
    if table.insert(lower, value).is_some() {
        return Err(CliError::Config(format!("key `{key}` given twice")));
    }
    Ok(())
}

/// A TOML literal when it parses as one, otherwise a bare string, so that
/// `channel=ETU` works without quotes.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Finite floats as numbers; infinities as the strings `"inf"`/`"-inf"`
/// so that JSON can carry them. Either form is accepted on input.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Float(f64),
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Float(v) => Ok(v),
            Repr::Int(v) => Ok(v as f64),
            Repr::Text(t) => t
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("expected a number or \"inf\", got `{t}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rddce::estimators::{Method, Metric};
    use rddce::ProfileName;

    fn over(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn no_input_gives_defaults() {
        let cfg = parse_config(None, &[]).unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!((cfg.rddce.n0, cfg.rddce.n1, cfg.rddce.n2, cfg.rddce.n_iter), (100, 15, 20, 10));
    }

    #[test]
    fn overrides_parse_typed_and_bare_values() {
        let cfg = parse_config(
            None,
            &over(&["lambda=0.990", "snr_db=10", "channel=ETU", "method=basic", "N0=90", "metric=alpha", "redecide=true"]),
        )
        .unwrap();
        assert_eq!(cfg.lambda, 0.99);
        assert_eq!(cfg.snr_db, 10.0);
        assert_eq!(cfg.channel, ProfileName::Etu);
        assert_eq!(cfg.method, Method::Basic);
        assert_eq!(cfg.rddce.n0, 90);
        assert_eq!(cfg.rddce.metric, Metric::Alpha);
        assert!(cfg.rddce.redecide);
        assert!(parse_config(None, &over(&["snr_db=inf"])).unwrap().snr_db.is_infinite());
    }

    #[test]
    fn invariant_violation_names_the_field() {
        let err = parse_config(None, &over(&["N2=5"])).unwrap_err().to_string();
        assert!(err.contains("n2"), "{err}");
        let err = parse_config(None, &over(&["frames=0"])).unwrap_err().to_string();
        assert!(err.contains("frames"), "{err}");
        let err = parse_config(None, &over(&["method=kalman"])).unwrap_err().to_string();
        assert!(err.contains("method"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(None, &over(&["lamda=0.9"])).unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
        assert!(parse_config(None, &over(&["novalue"])).is_err());
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "N_taps = 10\nn_w = 10\nchannel = \"EVA\"\nframes = 7\n").unwrap();
        let cfg = parse_config(Some(&path), &over(&["frames=9"])).unwrap();
        assert_eq!((cfg.rddce.n_taps, cfg.frames), (10, 9));

        std::fs::write(&path, "n0 = 100\nN0 = 90\n").unwrap();
        assert!(parse_config(Some(&path), &[]).unwrap_err().to_string().contains("twice"));
        std::fs::write(&path, "[rddce]\nn0 = 100\n").unwrap();
        assert!(parse_config(Some(&path), &[]).is_err());
        assert!(parse_config(Some(&dir.path().join("missing.toml")), &[]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config(
            None,
            &over(&["snr_db=inf", "channel=custom", "custom_delays_ns=[0.0, 1000.0]", "custom_powers_db=[0, -3]", "seed=99"]),
        )
        .unwrap();
        let flat = FlatConfig::from(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.toml");
        std::fs::write(&path, flat.to_toml()).unwrap();
        assert_eq!(parse_config(Some(&path), &[]).unwrap(), cfg);
        let json = serde_json::to_string(&flat).unwrap();
        assert_eq!(serde_json::from_str::<FlatConfig>(&json).unwrap(), flat);
    }
}
