//! Scenario configuration: embedded defaults for every knob, a structured
//! config-file loader (TOML sections), repeatable `key=value` overrides,
//! validation with field-level messages, and a resolved-parameter report
//! that shows where each effective value came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::metrics::ContentionWeights;
use crate::mobility::HighwayConfig;
use crate::radio::RadioConfig;

/// Which transmission-range figure the link metrics use: `Etr` scores links
/// with the fading-degraded expected range, `Mtr` with the nominal maximum
/// range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Etr,
    Mtr,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Etr => "etr",
            Variant::Mtr => "mtr",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("etr") {
            Ok(Variant::Etr)
        } else if s.eq_ignore_ascii_case("mtr") {
            Ok(Variant::Mtr)
        } else {
            Err(format!("expected \"etr\" or \"mtr\", got \"{s}\""))
        }
    }
}

/// Complete description of one simulation run. Field groups mirror the
/// config-file sections; see the registry below for the dotted key names.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area_length: f64,
    pub area_width: f64,
    pub vehicles: u32,
    /// How many vehicles carry the cellular interface in addition to the
    /// short-range one.
    pub vgc_count: u32,
    pub min_speed: f64,
    pub max_speed: f64,
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
    pub variant: Variant,
    pub radio: RadioConfig,
    /// Minimum predicted coverage lifetime (seconds) for gateway
    /// eligibility.
    pub llt_threshold: f64,
    /// Maximum relative speed deviation for gateway eligibility.
    pub rsd_threshold: f64,
    pub weights: ContentionWeights,
    pub adv_interval: f64,
    /// Advertisement flood radius, hops.
    pub proactive_hops: u32,
    /// Solicitation flood radius, hops.
    pub reactive_hops: u32,
    /// Handover safety margin before a route expires, seconds, used until a
    /// node has measured its own discovery latency.
    pub delta_fallback: f64,
    pub speed_sample_interval: f64,
    pub speed_window: usize,
    /// Per-node forwarding queue capacity, packets.
    pub buffer_capacity: usize,
    pub sources: u32,
    pub cbr_interval: f64,
    pub payload_bytes: usize,
    /// Sources start sending this many seconds into the run.
    pub traffic_start: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area_length: 8000.0,
            area_width: 100.0,
            vehicles: 50,
            vgc_count: 20,
            min_speed: 5.0,
            max_speed: 30.0,
            duration: 300.0,
            tick: 0.1,
            seed: 1,
            variant: Variant::Etr,
            radio: RadioConfig::default(),
            llt_threshold: 10.0,
            rsd_threshold: 0.5,
            weights: ContentionWeights::default(),
            adv_interval: 1.0,
            proactive_hops: 3,
            reactive_hops: 5,
            delta_fallback: 0.5,
            speed_sample_interval: 1.0,
            speed_window: 10,
            buffer_capacity: 20,
            sources: 5,
            cbr_interval: 0.1,
            payload_bytes: 1000,
            traffic_start: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn highway(&self) -> HighwayConfig {
        HighwayConfig {
            area_length: self.area_length,
            area_width: self.area_width,
            vehicle_count: self.vehicles as usize,
            min_speed: self.min_speed,
            max_speed: self.max_speed,
            duration: self.duration,
            tick: self.tick,
        }
    }

    /// Field-level validation; collects every problem before reporting.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems: Vec<String> = Vec::new();
        let mut check = |ok: bool, field: &str, reason: String| {
            if !ok {
                problems.push(format!("{field}: {reason}"));
            }
        };

        check(self.area_length > 0.0, "scenario.area_length", format!("{} must be > 0", self.area_length));
        check(self.area_width > 0.0, "scenario.area_width", format!("{} must be > 0", self.area_width));
        check(self.vehicles >= 1, "scenario.vehicles", "must be at least 1".into());
        check(
            self.vgc_count <= self.vehicles,
            "scenario.vgc_count",
            format!("{} exceeds the vehicle count {}", self.vgc_count, self.vehicles),
        );
        check(
            self.min_speed > 0.0 && self.min_speed <= self.max_speed,
            "scenario.min_speed",
            format!("{} must be > 0 and <= max_speed ({})", self.min_speed, self.max_speed),
        );
        check(self.duration > 0.0, "scenario.duration", format!("{} must be > 0", self.duration));
        check(
            self.tick > 0.0 && self.tick <= self.duration,
            "scenario.tick",
            format!("{} must be > 0 and <= duration", self.tick),
        );
        check(self.llt_threshold >= 0.0, "thresholds.llt", format!("{} must be >= 0", self.llt_threshold));
        check(
            self.rsd_threshold > 0.0 && self.rsd_threshold <= 1.0,
            "thresholds.rsd",
            format!("{} must be in (0, 1]", self.rsd_threshold),
        );
        check(self.adv_interval > 0.0, "timers.adv_interval", format!("{} must be > 0", self.adv_interval));
        check(self.proactive_hops >= 1, "timers.proactive_hops", "must be at least 1".into());
        check(self.reactive_hops >= 1, "timers.reactive_hops", "must be at least 1".into());
        check(self.delta_fallback > 0.0, "timers.delta_fallback", format!("{} must be > 0", self.delta_fallback));
        check(
            self.speed_sample_interval > 0.0,
            "timers.speed_sample_interval",
            format!("{} must be > 0", self.speed_sample_interval),
        );
        check(self.speed_window >= 2, "timers.speed_window", "must be at least 2 samples".into());
        check(self.buffer_capacity >= 1, "buffer.capacity", "must be at least 1".into());
        check(
            self.sources <= self.vehicles,
            "traffic.sources",
            format!("{} exceeds the vehicle count {}", self.sources, self.vehicles),
        );
        check(self.cbr_interval > 0.0, "traffic.interval", format!("{} must be > 0", self.cbr_interval));
        check(self.payload_bytes >= 1, "traffic.payload_bytes", "must be at least 1 byte".into());
        check(self.traffic_start >= 0.0, "traffic.start", format!("{} must be >= 0", self.traffic_start));

        if let Err(reason) = self.weights.check() {
            problems.push(format!("weights: {reason}"));
        }
        if let Err(reason) = self.radio.check() {
            problems.push(format!("radio: {reason}"));
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Io { path: String, reason: String },
    Parse(String),
    UnknownKey(String),
    AmbiguousKey { given: String, candidates: Vec<String> },
    BadValue { key: String, reason: String },
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, reason } => write!(f, "cannot read config {path}: {reason}"),
            ConfigError::Parse(reason) => write!(f, "config syntax error: {reason}"),
            ConfigError::UnknownKey(key) => write!(f, "unknown configuration key `{key}`"),
            ConfigError::AmbiguousKey { given, candidates } => write!(
                f,
                "configuration key `{given}` is ambiguous; candidates: {}",
                candidates.join(", ")
            ),
            ConfigError::BadValue { key, reason } => {
                write!(f, "bad value for `{key}`: {reason}")
            }
            ConfigError::Invalid(problems) => {
                writeln!(f, "invalid configuration:")?;
                for p in problems {
                    writeln!(f, "  {p}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Where an effective parameter value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSource {
    Default,
    File,
    Override,
}

impl ParamSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamSource::Default => "default",
            ParamSource::File => "config file",
            ParamSource::Override => "override",
        }
    }
}

/// One row of the resolved-parameter report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedParam {
    pub key: &'static str,
    pub value: String,
    pub source: ParamSource,
}

struct ParamDef {
    key: &'static str,
    get: fn(&ScenarioConfig) -> String,
    set: fn(&mut ScenarioConfig, &toml::Value) -> Result<(), String>,
}

fn as_f64(v: &toml::Value) -> Result<f64, String> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("expected a number, got {other}")),
    }
}

fn as_u64(v: &toml::Value) -> Result<u64, String> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(format!("expected a non-negative integer, got {other}")),
    }
}

fn as_u32(v: &toml::Value) -> Result<u32, String> {
    let n = as_u64(v)?;
    u32::try_from(n).map_err(|_| format!("{n} is out of range"))
}

fn as_usize(v: &toml::Value) -> Result<usize, String> {
    let n = as_u64(v)?;
    usize::try_from(n).map_err(|_| format!("{n} is out of range"))
}

fn as_bool(v: &toml::Value) -> Result<bool, String> {
    match v {
        toml::Value::Boolean(b) => Ok(*b),
        other => Err(format!("expected true or false, got {other}")),
    }
}

fn as_variant(v: &toml::Value) -> Result<Variant, String> {
    match v {
        toml::Value::String(s) => s.parse(),
        other => Err(format!("expected \"etr\" or \"mtr\", got {other}")),
    }
}

macro_rules! param {
    ($key:literal, $($field:tt).+, f64) => {
        ParamDef {
            key: $key,
            get: |c| c.$($field).+.to_string(),
            set: |c, v| { c.$($field).+ = as_f64(v)?; Ok(()) },
        }
    };
    ($key:literal, $($field:tt).+, u32) => {
        ParamDef {
            key: $key,
            get: |c| c.$($field).+.to_string(),
            set: |c, v| { c.$($field).+ = as_u32(v)?; Ok(()) },
        }
    };
    ($key:literal, $($field:tt).+, u64) => {
        ParamDef {
            key: $key,
            get: |c| c.$($field).+.to_string(),
            set: |c, v| { c.$($field).+ = as_u64(v)?; Ok(()) },
        }
    };
    ($key:literal, $($field:tt).+, usize) => {
        ParamDef {
            key: $key,
            get: |c| c.$($field).+.to_string(),
            set: |c, v| { c.$($field).+ = as_usize(v)?; Ok(()) },
        }
    };
    ($key:literal, $($field:tt).+, bool) => {
        ParamDef {
            key: $key,
            get: |c| c.$($field).+.to_string(),
            set: |c, v| { c.$($field).+ = as_bool(v)?; Ok(()) },
        }
    };
}

static PARAMS: &[ParamDef] = &[
    param!("scenario.area_length", area_length, f64),
    param!("scenario.area_width", area_width, f64),
    param!("scenario.vehicles", vehicles, u32),
    param!("scenario.vgc_count", vgc_count, u32),
    param!("scenario.min_speed", min_speed, f64),
    param!("scenario.max_speed", max_speed, f64),
    param!("scenario.duration", duration, f64),
    param!("scenario.tick", tick, f64),
    param!("scenario.seed", seed, u64),
    ParamDef {
        key: "scenario.variant",
        get: |c| c.variant.to_string(),
        set: |c, v| {
            c.variant = as_variant(v)?;
            Ok(())
        },
    },
    param!("radio.range", radio.max_range, f64),
    param!("radio.data_rate", radio.data_rate, f64),
    param!("radio.r4g", radio.r4g, f64),
    param!("radio.rss_threshold_distance", radio.rss_threshold_distance, f64),
    param!("radio.lte_uplink_latency", radio.lte_uplink_latency, f64),
    param!("radio.base_station_x", radio.base_station.0, f64),
    param!("radio.base_station_y", radio.base_station.1, f64),
    param!("radio.lossless", radio.lossless, bool),
    param!("thresholds.llt", llt_threshold, f64),
    param!("thresholds.rsd", rsd_threshold, f64),
    param!("weights.mu", weights.mu, f64),
    param!("weights.alpha", weights.alpha, f64),
    param!("weights.beta", weights.beta, f64),
    param!("weights.gamma", weights.gamma, f64),
    param!("weights.stability_scale", weights.stability_scale, f64),
    param!("timers.gateway_contention_window", weights.gateway_window, f64),
    param!("timers.relay_contention_window", weights.relay_window, f64),
    param!("timers.adv_interval", adv_interval, f64),
    param!("timers.proactive_hops", proactive_hops, u32),
    param!("timers.reactive_hops", reactive_hops, u32),
    param!("timers.delta_fallback", delta_fallback, f64),
    param!("timers.speed_sample_interval", speed_sample_interval, f64),
    param!("timers.speed_window", speed_window, usize),
    param!("buffer.capacity", buffer_capacity, usize),
    param!("traffic.sources", sources, u32),
    param!("traffic.interval", cbr_interval, f64),
    param!("traffic.payload_bytes", payload_bytes, usize),
    param!("traffic.start", traffic_start, f64),
];

/// Builds a [`ScenarioConfig`] from defaults, an optional config file, and
/// repeatable overrides, remembering where each value came from.
#[derive(Debug, Clone)]
pub struct ConfigLoader {
    config: ScenarioConfig,
    sources: BTreeMap<&'static str, ParamSource>,
}

impl Default for ConfigLoader {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfigLoader {
    pub fn new() -> Self {
        ConfigLoader {
            config: ScenarioConfig::default(),
            sources: BTreeMap::new(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut loader = Self::new();
        let value: toml::Value = text.parse().map_err(|e: toml::de::Error| {
            ConfigError::Parse(e.message().to_string())
        })?;
        let table = match value {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::Parse("top level must be sections".into())),
        };
        for (section, body) in &table {
            let inner = match body {
                toml::Value::Table(t) => t,
                _ => return Err(ConfigError::UnknownKey(section.clone())),
            };
            for (key, v) in inner {
                loader.assign(&format!("{section}.{key}"), v, ParamSource::File)?;
            }
        }
        Ok(loader)
    }

    /// Apply one `key=value` override. A key without a dot is resolved
    /// against the leaf names of the registry when that is unambiguous.
    pub fn set_override(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let full = self.resolve_key(key)?;
        let value = parse_raw(raw);
        self.assign(full, &value, ParamSource::Override)
    }

    fn resolve_key(&self, key: &str) -> Result<&'static str, ConfigError> {
        if key.contains('.') {
            return PARAMS
                .iter()
                .map(|p| p.key)
                .find(|k| *k == key)
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()));
        }
        let matches: Vec<&'static str> = PARAMS
            .iter()
            .map(|p| p.key)
            .filter(|k| k.rsplit('.').next() == Some(key))
            .collect();
        match matches.as_slice() {
            [] => Err(ConfigError::UnknownKey(key.to_string())),
            [one] => Ok(one),
            many => Err(ConfigError::AmbiguousKey {
                given: key.to_string(),
                candidates: many.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    fn assign(
        &mut self,
        key: &str,
        value: &toml::Value,
        source: ParamSource,
    ) -> Result<(), ConfigError> {
        let def = PARAMS
            .iter()
            .find(|p| p.key == key)
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        (def.set)(&mut self.config, value).map_err(|reason| ConfigError::BadValue {
            key: key.to_string(),
            reason,
        })?;
        self.sources.insert(def.key, source);
        Ok(())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Validate and hand out the finished config.
    pub fn into_config(self) -> Result<ScenarioConfig, ConfigError> {
        self.config.validate()?;
        Ok(self.config)
    }

    /// Every parameter with its effective value and provenance, in stable
    /// registry order.
    pub fn resolved(&self) -> Vec<ResolvedParam> {
        PARAMS
            .iter()
            .map(|p| ResolvedParam {
                key: p.key,
                value: (p.get)(&self.config),
                source: self.sources.get(p.key).copied().unwrap_or(ParamSource::Default),
            })
            .collect()
    }
}

/// Interpret an override value string the way the config file syntax would:
/// integer, then float, then boolean, falling back to a bare string.
fn parse_raw(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(x) = raw.parse::<f64>() {
        toml::Value::Float(x)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_scenario() {
        let c = ScenarioConfig::default();
        assert_eq!((c.area_length, c.area_width), (8000.0, 100.0));
        assert_eq!(c.vehicles, 50);
        assert_eq!(c.vgc_count, 20);
        assert_eq!(c.max_speed, 30.0);
        assert_eq!(c.duration, 300.0);
        assert_eq!(c.buffer_capacity, 20);
        assert_eq!(c.radio.max_range, 250.0);
        assert_eq!(c.radio.r4g, 7000.0);
        assert_eq!((c.sources, c.cbr_interval, c.payload_bytes), (5, 0.1, 1000));
        assert_eq!(c.variant, Variant::Etr);
        c.validate().unwrap();
    }

    #[test]
    fn file_values_override_defaults_and_are_tracked() {
        let loader = ConfigLoader::from_str(
            "[scenario]\nvehicles = 10\nvariant = \"mtr\"\n\n[radio]\nrange = 300.0\nlossless = true\n",
        )
        .unwrap();
        let c = loader.config();
        assert_eq!(c.vehicles, 10);
        assert_eq!(c.variant, Variant::Mtr);
        assert_eq!(c.radio.max_range, 300.0);
        assert!(c.radio.lossless);
        // untouched key keeps its default
        assert_eq!(c.vgc_count, 20);

        let rows = loader.resolved();
        let row = |key: &str| rows.iter().find(|r| r.key == key).unwrap().clone();
        assert_eq!(row("scenario.vehicles").source, ParamSource::File);
        assert_eq!(row("scenario.vehicles").value, "10");
        assert_eq!(row("scenario.vgc_count").source, ParamSource::Default);
        assert_eq!(row("radio.lossless").value, "true");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ConfigLoader::from_str("[scenario]\nvehicle = 10\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("scenario.vehicle".into()));
        assert!(err.to_string().contains("scenario.vehicle"));

        let err = ConfigLoader::from_str("[nosuch]\nx = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("nosuch.x".into()));

        let err = ConfigLoader::from_str("toplevel = 3\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("toplevel".into()));
    }

    #[test]
    fn bad_value_types_name_the_key() {
        let err = ConfigLoader::from_str("[scenario]\nvehicles = \"many\"\n").unwrap_err();
        match err {
            ConfigError::BadValue { key, .. } => assert_eq!(key, "scenario.vehicles"),
            other => panic!("unexpected error {other:?}"),
        }
        let err = ConfigLoader::from_str("[scenario]\nvehicles = -3\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn overrides_resolve_short_names() {
        let mut loader = ConfigLoader::new();
        loader.set_override("vgc_count", "0").unwrap();
        assert_eq!(loader.config().vgc_count, 0);
        loader.set_override("scenario.seed", "42").unwrap();
        assert_eq!(loader.config().seed, 42);
        loader.set_override("lossless", "true").unwrap();
        assert!(loader.config().radio.lossless);
        // an integer literal lands in a float field
        loader.set_override("weights.mu", "1").unwrap();
        assert_eq!(loader.config().weights.mu, 1.0);

        let rows = loader.resolved();
        let row = |key: &str| rows.iter().find(|r| r.key == key).unwrap().clone();
        assert_eq!(row("scenario.vgc_count").source, ParamSource::Override);
        assert_eq!(row("scenario.vgc_count").value, "0");

        let err = loader.set_override("nope", "1").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("nope".into()));
        let err = loader.set_override("weights.mu", "high").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn validation_collects_field_level_problems() {
        let mut c = ScenarioConfig {
            vgc_count: 60,
            sources: 55,
            min_speed: 40.0,
            ..Default::default()
        };
        c.weights.alpha = 0.9; // alpha + beta + gamma != 1
        let err = c.validate().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("scenario.vgc_count"));
        assert!(text.contains("traffic.sources"));
        assert!(text.contains("scenario.min_speed"));
        assert!(text.contains("weights"));
    }

    #[test]
    fn variant_parsing_is_case_insensitive() {
        assert_eq!("ETR".parse::<Variant>().unwrap(), Variant::Etr);
        assert_eq!("mtr".parse::<Variant>().unwrap(), Variant::Mtr);
        assert!("both".parse::<Variant>().is_err());
        let err = ConfigLoader::from_str("[scenario]\nvariant = \"fast\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn syntax_errors_surface_as_parse_errors() {
        assert!(matches!(
            ConfigLoader::from_str("[scenario\nvehicles = 1"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn highway_projection_carries_the_scenario_fields() {
        let c = ScenarioConfig::default();
        let h = c.highway();
        assert_eq!(h.area_length, 8000.0);
        assert_eq!(h.vehicle_count, 50);
        assert_eq!(h.tick, 0.1);
    }
}
