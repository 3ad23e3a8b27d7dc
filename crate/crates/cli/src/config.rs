//! Run configuration: INI sections, command-line overrides and per-dataset
//! defaults.
//!
//! Every value is addressed as `section.key`. The file is read first, then
//! overrides are layered on top, then the result is parsed field by field so
//! that an error can always name the offending field.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::path::PathBuf;
use std::str::FromStr;

use ini::Ini;
use ipinf_core::{Activation, Arch, CurationAction, Method, Objective, TrainConfig};

/// A configuration or command-line mistake; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Verify,
    Curate,
    Defend,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Verify => "verify",
            Kind::Curate => "curate",
            Kind::Defend => "defend",
        }
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "verify" => Ok(Kind::Verify),
            "curate" => Ok(Kind::Curate),
            "defend" => Ok(Kind::Defend),
            _ => Err("expected verify, curate or defend".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    Moons,
    Group,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Moons => "moons",
            DatasetKind::Group => "group",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "moons" | "half-moons" => Ok(DatasetKind::Moons),
            "group" => Ok(DatasetKind::Group),
            _ => Err("expected blobs, moons or group".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            _ => Err("expected f64 or f32".into()),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    Linear,
    Mlp,
}

impl FromStr for ArchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(ArchKind::Linear),
            "mlp" => Ok(ArchKind::Mlp),
            _ => Err("expected linear or mlp".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Utility,
    Fairness,
    Joint,
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "utility" => Ok(TargetKind::Utility),
            "fairness" => Ok(TargetKind::Fairness),
            "joint" => Ok(TargetKind::Joint),
            _ => Err("expected utility, fairness or joint".into()),
        }
    }
}

impl Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::Utility => "utility",
            TargetKind::Fairness => "fairness",
            TargetKind::Joint => "joint",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub dataset: DatasetKind,
    pub n_train: usize,
    /// 0 means the test split doubles as the validation set.
    pub n_val: usize,
    pub n_test: usize,
    pub separation: f64,
    pub noise: f64,
    pub flips: usize,
    pub flips_per_class: bool,
    pub minority_frac: f64,
    pub bias: f64,
    pub label_noise: f64,
}

impl DataConfig {
    fn defaults(kind: Kind, dataset: DatasetKind) -> Self {
        let base = Self {
            dataset,
            n_train: 150,
            n_val: 0,
            n_test: 100,
            separation: ipinf_core::data::BlobsConfig::DEFAULT_SEPARATION,
            noise: ipinf_core::data::DEFAULT_MOONS_NOISE,
            flips: 10,
            flips_per_class: false,
            minority_frac: 0.3,
            bias: 1.5,
            label_noise: 0.5,
        };
        match (kind, dataset) {
            (Kind::Defend, DatasetKind::Blobs) => Self {
                n_val: 100,
                flips: 0,
                ..base
            },
            (_, DatasetKind::Blobs) => base,
            (_, DatasetKind::Moons) => Self {
                n_train: 200,
                n_val: 100,
                flips_per_class: true,
                ..base
            },
            (_, DatasetKind::Group) => Self {
                n_train: 400,
                n_val: 200,
                n_test: 400,
                flips: 0,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub arch: ArchKind,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Its `seed` is replaced by the run seed.
    pub train: TrainConfig,
}

impl ModelConfig {
    fn defaults(dataset: DatasetKind) -> Self {
        match dataset {
            DatasetKind::Moons => Self {
                arch: ArchKind::Mlp,
                hidden: vec![32, 32],
                activation: Activation::Relu,
                train: TrainConfig {
                    learning_rate: 0.3,
                    epochs: 300,
                    weight_decay: 1e-4,
                    ..TrainConfig::default()
                },
            },
            _ => Self {
                arch: ArchKind::Linear,
                hidden: vec![32, 32],
                activation: Activation::Relu,
                train: TrainConfig::default(),
            },
        }
    }

    pub fn arch(&self, input: usize) -> Arch {
        match self.arch {
            ArchKind::Linear => Arch::linear(input),
            ArchKind::Mlp => Arch::Mlp {
                input,
                hidden: self.hidden.clone(),
                activation: self.activation,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceConfig {
    pub methods: Vec<Method>,
    /// One grid cell per size for ensemble methods.
    pub ensemble_sizes: Vec<usize>,
    pub dropout: (f64, f64),
    pub extra_sgd_steps: usize,
    pub damping: f64,
    pub temperature: f64,
    pub lissa_depth: usize,
    pub lissa_repeats: usize,
    /// Objectives scored by `verify`.
    pub objectives: Vec<Objective>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationConfig {
    pub actions: Vec<CurationAction>,
    pub fractions: Vec<f64>,
    pub target: TargetKind,
    pub retrains: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSettings {
    pub gamma: f64,
    pub fractions: Vec<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: Kind,
    pub precision: Precision,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub workers: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub influence: InfluenceConfig,
    pub curation: CurationConfig,
    pub attack: AttackSettings,
}

/// Raw `section.key → value` pairs awaiting parsing.
#[derive(Debug, Default, Clone)]
struct Fields {
    entries: BTreeMap<(String, String), String>,
}

impl Fields {
    fn from_ini(text: &str) -> anyhow::Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| usage(format!("config: {e}")))?;
        let mut fields = Self::default();
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let Some(section) = section else {
                    return Err(usage(format!(
                        "config: key `{key}` must be inside a [section]"
                    )));
                };
                fields.insert(
                    &section.to_ascii_lowercase(),
                    &key.to_ascii_lowercase(),
                    value,
                );
            }
        }
        Ok(fields)
    }

    fn insert(&mut self, section: &str, key: &str, value: &str) {
        self.entries.insert(
            (section.to_string(), key.to_string()),
            value.trim().to_string(),
        );
    }

    fn take_raw(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn parse<V: FromStr>(section: &str, key: &str, text: &str) -> anyhow::Result<V>
    where
        V::Err: Display,
    {
        text.parse().map_err(|e| {
            usage(format!(
                "invalid value `{text}` for field {section}.{key}: {e}"
            ))
        })
    }

    fn take<V: FromStr>(&mut self, section: &str, key: &str, slot: &mut V) -> anyhow::Result<()>
    where
        V::Err: Display,
    {
        if let Some(text) = self.take_raw(section, key) {
            *slot = Self::parse(section, key, &text)?;
        }
        Ok(())
    }

    fn take_list<V: FromStr>(
        &mut self,
        section: &str,
        key: &str,
        slot: &mut Vec<V>,
    ) -> anyhow::Result<()>
    where
        V::Err: Display,
    {
        if let Some(text) = self.take_raw(section, key) {
            *slot = text
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Self::parse(section, key, s))
                .collect::<anyhow::Result<_>>()?;
        }
        Ok(())
    }

    fn take_pair(&mut self, section: &str, key: &str, slot: &mut (f64, f64)) -> anyhow::Result<()> {
        let mut v: Vec<f64> = Vec::new();
        self.take_list(section, key, &mut v)?;
        match v.len() {
            0 => {}
            2 => *slot = (v[0], v[1]),
            _ => {
                return Err(usage(format!(
                    "field {section}.{key} expects two values `LO,HI`"
                )))
            }
        }
        Ok(())
    }
}

struct ActivationName(Activation);

impl FromStr for ActivationName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relu" => Ok(Self(Activation::Relu)),
            "tanh" => Ok(Self(Activation::Tanh)),
            _ => Err("expected relu or tanh".into()),
        }
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
    }
}

fn join<V: Display>(items: &[V]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_with<V>(items: &[V], name: impl Fn(&V) -> &'static str) -> String {
    items.iter().map(name).collect::<Vec<_>>().join(", ")
}

fn is_ensemble(m: Method) -> bool {
    matches!(m, Method::TracIn | Method::Gex | Method::IpEnsemble)
}

impl RunConfig {
    /// Builds the configuration for `kind` from optional INI text and
    /// `(section.key, value)` overrides applied after the file.
    pub fn load(
        kind: Kind,
        ini_text: Option<&str>,
        overrides: &[(String, String)],
    ) -> anyhow::Result<Self> {
        let mut f = match ini_text {
            Some(text) => Fields::from_ini(text)?,
            None => Fields::default(),
        };
        for (field, value) in overrides {
            let (section, key) = field
                .split_once('.')
                .ok_or_else(|| usage(format!("override `{field}` must look like section.key")))?;
            f.insert(section, key, value);
        }

        if let Some(text) = f.take_raw("run", "kind") {
            let declared: Kind = Fields::parse("run", "kind", &text)?;
            if declared != kind {
                return Err(usage(format!(
                    "field run.kind is `{}` but the command is `{}`",
                    declared.name(),
                    kind.name()
                )));
            }
        }
        let mut dataset = match kind {
            Kind::Curate => DatasetKind::Moons,
            _ => DatasetKind::Blobs,
        };
        f.take("data", "dataset", &mut dataset)?;

        let mut cfg = Self::defaults(kind, dataset);
        let mut out = cfg.out.display().to_string();
        f.take("run", "precision", &mut cfg.precision)?;
        f.take_list("run", "seeds", &mut cfg.seeds)?;
        f.take("run", "out", &mut out)?;
        cfg.out = PathBuf::from(out);
        f.take("run", "workers", &mut cfg.workers)?;

        let d = &mut cfg.data;
        f.take("data", "n_train", &mut d.n_train)?;
        f.take("data", "n_val", &mut d.n_val)?;
        f.take("data", "n_test", &mut d.n_test)?;
        f.take("data", "separation", &mut d.separation)?;
        f.take("data", "noise", &mut d.noise)?;
        f.take("data", "flips", &mut d.flips)?;
        f.take("data", "flips_per_class", &mut d.flips_per_class)?;
        f.take("data", "minority_frac", &mut d.minority_frac)?;
        f.take("data", "bias", &mut d.bias)?;
        f.take("data", "label_noise", &mut d.label_noise)?;

        let m = &mut cfg.model;
        f.take("model", "arch", &mut m.arch)?;
        f.take_list("model", "hidden", &mut m.hidden)?;
        let mut act = ActivationName(m.activation);
        f.take("model", "activation", &mut act)?;
        m.activation = act.0;
        let t = &mut m.train;
        f.take("model", "learning_rate", &mut t.learning_rate)?;
        f.take("model", "epochs", &mut t.epochs)?;
        f.take("model", "batch_size", &mut t.batch_size)?;
        f.take("model", "weight_decay", &mut t.weight_decay)?;
        f.take("model", "checkpoint_stride", &mut t.checkpoint_stride)?;
        if m.arch == ArchKind::Mlp
            && kind == Kind::Verify
            && !f
                .entries
                .contains_key(&("influence".into(), "methods".into()))
        {
            cfg.influence.methods = vec![Method::Ip, Method::IpEnsemble];
        }

        let i = &mut cfg.influence;
        f.take_list("influence", "methods", &mut i.methods)?;
        f.take_list("influence", "ensemble_sizes", &mut i.ensemble_sizes)?;
        f.take_pair("influence", "dropout", &mut i.dropout)?;
        f.take("influence", "extra_sgd_steps", &mut i.extra_sgd_steps)?;
        f.take("influence", "damping", &mut i.damping)?;
        f.take("influence", "temperature", &mut i.temperature)?;
        f.take("influence", "lissa_depth", &mut i.lissa_depth)?;
        f.take("influence", "lissa_repeats", &mut i.lissa_repeats)?;
        f.take_list("influence", "objectives", &mut i.objectives)?;

        let c = &mut cfg.curation;
        f.take_list("curation", "actions", &mut c.actions)?;
        f.take_list("curation", "fractions", &mut c.fractions)?;
        f.take("curation", "target", &mut c.target)?;
        f.take("curation", "retrains", &mut c.retrains)?;

        let a = &mut cfg.attack;
        f.take("attack", "gamma", &mut a.gamma)?;
        f.take_list("attack", "fractions", &mut a.fractions)?;
        f.take("attack", "draws", &mut a.draws)?;

        if let Some(((section, key), _)) = f.entries.into_iter().next() {
            return Err(usage(format!("unknown field {section}.{key}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn defaults(kind: Kind, dataset: DatasetKind) -> Self {
        let defend = kind == Kind::Defend;
        Self {
            kind,
            precision: Precision::F64,
            seeds: vec![0],
            out: PathBuf::from("runs"),
            workers: 1,
            data: DataConfig::defaults(kind, dataset),
            model: ModelConfig::defaults(dataset),
            influence: InfluenceConfig {
                methods: if defend {
                    vec![Method::Ip, Method::IpEnsemble]
                } else {
                    vec![Method::Ip]
                },
                ensemble_sizes: vec![5],
                dropout: (0.0, 0.01),
                extra_sgd_steps: 50,
                damping: 1e-2,
                temperature: 1.0,
                lissa_depth: 500,
                lissa_repeats: 4,
                objectives: if dataset == DatasetKind::Group {
                    vec![Objective::Utility, Objective::Fairness]
                } else {
                    vec![Objective::Utility]
                },
            },
            curation: CurationConfig {
                actions: if defend {
                    vec![
                        CurationAction::Trim,
                        CurationAction::Relabel,
                        CurationAction::Reweight,
                    ]
                } else {
                    vec![CurationAction::Trim]
                },
                fractions: vec![if defend { 0.05 } else { 0.1 }],
                target: TargetKind::Utility,
                retrains: 5,
            },
            attack: AttackSettings {
                gamma: 2.0,
                fractions: vec![0.25],
                draws: 10,
            },
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(usage(format!("field {field} must lie in [0,1], got {v}")))
            }
        };
        if self.seeds.is_empty() {
            return Err(usage("field run.seeds must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(usage("field run.seeds contains duplicates"));
        }
        if self.workers == 0 {
            return Err(usage("field run.workers must be at least 1"));
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(usage(
                "fields data.n_train and data.n_test must be positive",
            ));
        }
        if self.data.flips * if self.data.flips_per_class { 2 } else { 1 } > self.data.n_train {
            return Err(usage("field data.flips exceeds the training set size"));
        }
        unit("data.minority_frac", self.data.minority_frac)?;
        if self.model.arch == ArchKind::Mlp && self.model.hidden.contains(&0) {
            return Err(usage("field model.hidden must list positive widths"));
        }
        self.model
            .train
            .validate()
            .map_err(|e| usage(format!("section [model]: {e}")))?;

        let inf = &self.influence;
        if inf.methods.is_empty() {
            return Err(usage(
                "field influence.methods must name at least one method",
            ));
        }
        if inf.ensemble_sizes.is_empty() || inf.ensemble_sizes.contains(&0) {
            return Err(usage(
                "field influence.ensemble_sizes must list sizes of at least 1",
            ));
        }
        let (lo, hi) = inf.dropout;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return Err(usage("field influence.dropout needs 0 <= LO <= HI < 1"));
        }
        if !(inf.damping > 0.0) || !(inf.temperature > 0.0) {
            return Err(usage(
                "fields influence.damping and influence.temperature must be positive",
            ));
        }
        if inf.lissa_depth == 0 || inf.lissa_repeats == 0 {
            return Err(usage(
                "fields influence.lissa_depth and influence.lissa_repeats must be positive",
            ));
        }
        let linear = self.model.arch == ArchKind::Linear;
        for m in &inf.methods {
            if matches!(m, Method::Exact | Method::Lissa) && !linear {
                return Err(usage(format!(
                    "field influence.methods: {} needs model.arch = linear",
                    m.name()
                )));
            }
        }
        let groups = self.data.dataset == DatasetKind::Group;
        if self.kind == Kind::Verify {
            if inf.objectives.is_empty() {
                return Err(usage(
                    "field influence.objectives must name at least one objective",
                ));
            }
            for o in &inf.objectives {
                if *o == Objective::Fairness && !groups {
                    return Err(usage(
                        "field influence.objectives: fairness needs data.dataset = group",
                    ));
                }
                if *o == Objective::Robustness && !linear {
                    return Err(usage(
                        "field influence.objectives: robustness needs model.arch = linear",
                    ));
                }
            }
        }

        let cur = &self.curation;
        if cur.actions.is_empty() || cur.fractions.is_empty() {
            return Err(usage(
                "fields curation.actions and curation.fractions must be non-empty",
            ));
        }
        for &v in &cur.fractions {
            unit("curation.fractions", v)?;
        }
        if cur.retrains == 0 {
            return Err(usage("field curation.retrains must be at least 1"));
        }
        if self.kind == Kind::Curate && cur.target != TargetKind::Utility && !groups {
            return Err(usage(format!(
                "field curation.target: {} needs data.dataset = group",
                cur.target
            )));
        }

        let att = &self.attack;
        if !(att.gamma > 0.0) || !att.gamma.is_finite() {
            return Err(usage("field attack.gamma must be positive"));
        }
        if att.fractions.is_empty() || att.draws == 0 {
            return Err(usage(
                "fields attack.fractions and attack.draws must be non-empty",
            ));
        }
        for &v in &att.fractions {
            unit("attack.fractions", v)?;
        }
        if self.kind == Kind::Defend {
            if !linear {
                return Err(usage(
                    "defend runs on a linear model; set model.arch = linear",
                ));
            }
            if self.data.dataset == DatasetKind::Moons {
                return Err(usage(
                    "field data.dataset: defend needs blobs or group data",
                ));
            }
        }
        Ok(())
    }

    /// Ensemble sizes a method fans out over; `None` for single-model methods.
    pub fn sizes_for(&self, method: Method) -> Vec<Option<usize>> {
        if is_ensemble(method) {
            self.influence
                .ensemble_sizes
                .iter()
                .copied()
                .map(Some)
                .collect()
        } else {
            vec![None]
        }
    }

    /// Canonical INI text for a single-seed run. Output location and worker
    /// count are left out because they do not affect results; loading the
    /// text back reproduces the configuration.
    pub fn echo(&self, seed: u64) -> String {
        let mut ini = Ini::new();
        ini.with_section(Some("run"))
            .set("kind", self.kind.name())
            .set("precision", self.precision.to_string())
            .set("seeds", seed.to_string());
        let d = &self.data;
        ini.with_section(Some("data"))
            .set("dataset", d.dataset.name())
            .set("n_train", d.n_train.to_string())
            .set("n_val", d.n_val.to_string())
            .set("n_test", d.n_test.to_string())
            .set("separation", d.separation.to_string())
            .set("noise", d.noise.to_string())
            .set("flips", d.flips.to_string())
            .set("flips_per_class", d.flips_per_class.to_string())
            .set("minority_frac", d.minority_frac.to_string())
            .set("bias", d.bias.to_string())
            .set("label_noise", d.label_noise.to_string());
        let m = &self.model;
        ini.with_section(Some("model"))
            .set(
                "arch",
                match m.arch {
                    ArchKind::Linear => "linear",
                    ArchKind::Mlp => "mlp",
                },
            )
            .set("hidden", join(&m.hidden))
            .set("activation", activation_name(m.activation))
            .set("learning_rate", m.train.learning_rate.to_string())
            .set("epochs", m.train.epochs.to_string())
            .set("batch_size", m.train.batch_size.to_string())
            .set("weight_decay", m.train.weight_decay.to_string())
            .set("checkpoint_stride", m.train.checkpoint_stride.to_string());
        let i = &self.influence;
        ini.with_section(Some("influence"))
            .set("methods", join_with(&i.methods, |m| m.name()))
            .set("ensemble_sizes", join(&i.ensemble_sizes))
            .set("dropout", format!("{}, {}", i.dropout.0, i.dropout.1))
            .set("extra_sgd_steps", i.extra_sgd_steps.to_string())
            .set("damping", i.damping.to_string())
            .set("temperature", i.temperature.to_string())
            .set("lissa_depth", i.lissa_depth.to_string())
            .set("lissa_repeats", i.lissa_repeats.to_string())
            .set("objectives", join_with(&i.objectives, |o| o.name()));
        let c = &self.curation;
        ini.with_section(Some("curation"))
            .set("actions", join_with(&c.actions, |a| a.name()))
            .set("fractions", join(&c.fractions))
            .set("target", c.target.to_string())
            .set("retrains", c.retrains.to_string());
        let a = &self.attack;
        ini.with_section(Some("attack"))
            .set("gamma", a.gamma.to_string())
            .set("fractions", join(&a.fractions))
            .set("draws", a.draws.to_string());
        let mut buf = Vec::new();
        ini.write_to(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("ini output is UTF-8")
    }
}
